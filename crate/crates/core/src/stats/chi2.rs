use serde::{Deserialize, Serialize};

use super::Histogram;
use crate::error::{Error, Result};

pub const DEFAULT_MIN_EXPECTED: f64 = 5.0;

/// Outcome of a two-sample homogeneity test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Result {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Original labels pooled into each tested bin, in label order.
    pub merged_bins: Vec<Vec<usize>>,
}

struct Bin {
    labels: Vec<usize>,
    a: f64,
    b: f64,
}

/// Pooled two-sample chi-square test.
///
/// Bins are aligned on the union of labels; bins empty in both samples are
/// dropped. Starting from the highest label, a bin whose smaller expected
/// count falls under `min_expected` is folded into its left neighbour; a
/// deficient first bin is finally folded to the right. The statistic sums
/// `(O - E)^2 / E` over both samples with `E_si = n_s (a_i + b_i) / (n_a + n_b)`
/// and has `bins - 1` degrees of freedom.
pub fn chi2_two_sample(a: &Histogram, b: &Histogram, min_expected: f64) -> Result<Chi2Result> {
    if !(min_expected >= 0.0) {
        return Err(Error::argument(format!("min_expected must be non-negative, got {min_expected}")));
    }
    let (na, nb) = (a.total() as f64, b.total() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::argument("both histograms need a positive total"));
    }
    let mut labels = a.labels();
    labels.extend(b.labels());
    labels.sort_unstable();
    labels.dedup();
    let mut bins: Vec<Bin> = labels
        .into_iter()
        .map(|l| Bin {
            labels: vec![l],
            a: a.count(l) as f64,
            b: b.count(l) as f64,
        })
        .filter(|bin| bin.a + bin.b > 0.0)
        .collect();

    let n = na + nb;
    let min_e = |bin: &Bin| (bin.a + bin.b) * na.min(nb) / n;
    let mut i = bins.len();
    while i > 1 {
        i -= 1;
        if min_e(&bins[i]) < min_expected {
            let tail = bins.remove(i);
            let left = &mut bins[i - 1];
            left.labels.extend(tail.labels);
            left.a += tail.a;
            left.b += tail.b;
        }
    }
    if bins.len() > 1 && min_e(&bins[0]) < min_expected {
        let head = bins.remove(0);
        let next = &mut bins[0];
        let mut labels = head.labels;
        labels.append(&mut next.labels);
        next.labels = labels;
        next.a += head.a;
        next.b += head.b;
    }
    if bins.len() < 2 {
        return Err(Error::Test(format!(
            "insufficient support: {} bin(s) left after merging to expected count {min_expected}",
            bins.len()
        )));
    }

    let mut statistic = 0.0;
    for bin in &bins {
        let pooled = bin.a + bin.b;
        for (observed, total) in [(bin.a, na), (bin.b, nb)] {
            let expected = total * pooled / n;
            statistic += (observed - expected).powi(2) / expected;
        }
    }
    let df = bins.len() - 1;
    Ok(Chi2Result {
        statistic,
        df,
        p_value: chi2_sf(statistic, df)?,
        merged_bins: bins.into_iter().map(|b| b.labels).collect(),
    })
}

/// Survival function of the chi-square distribution, `Q(df/2, x/2)`.
pub fn chi2_sf(x: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::argument("chi-square degrees of freedom must be at least 1"));
    }
    if !(x >= 0.0) {
        return Err(Error::argument(format!("chi-square statistic must be non-negative, got {x}")));
    }
    Ok(gamma_q(df as f64 / 2.0, x / 2.0))
}

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// Upper regularized incomplete gamma function.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        (1.0 - gamma_p_series(a, x)).clamp(0.0, 1.0)
    } else {
        gamma_q_fraction(a, x).clamp(0.0, 1.0)
    }
}

fn prefactor(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * prefactor(a, x)
}

// Modified Lentz evaluation of the continued fraction for Q.
fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    prefactor(a, x) * h
}

/// Lanczos approximation (g = 7, n = 9), reflected below 1/2.
pub fn ln_gamma(x: f64) -> f64 {
    // Published coefficients, kept digit for digit.
    #[allow(clippy::excessive_precision)]
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut s = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        s += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}
