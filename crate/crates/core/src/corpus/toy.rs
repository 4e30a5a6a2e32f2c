use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{CityMap, MapMeta};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Monocentric,
    Polycentric,
    Coastal,
}

impl Archetype {
    pub fn name(self) -> &'static str {
        match self {
            Archetype::Monocentric => "monocentric",
            Archetype::Polycentric => "polycentric",
            Archetype::Coastal => "coastal",
        }
    }
}

/// Recipe for one procedural city: Gaussian density bumps, optional speckle
/// and, for coastal cities, a half-plane of water.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyCitySpec {
    pub archetype: Archetype,
    pub n_centers: usize,
    /// Diameter of the ring the satellite centers are placed on, in km.
    pub center_spread_km: f64,
    pub density_scale: f64,
    /// Amplitude of the uniform speckle added to a share of the pixels.
    pub noise_level: f64,
    pub seed: u64,
}

// Bump shapes. The monocentric bump is wide and unclipped at unit scale so
// its profile falls off monotonically; polycentric cities get a modest core
// and saturated satellites that show up as separate profile peaks.
const MONO_SIGMA_KM: f64 = 3.0;
const CORE_AMPLITUDE: f64 = 0.6;
const CORE_SIGMA_KM: f64 = 1.0;
const SATELLITE_AMPLITUDE: f64 = 4.0;
const SATELLITE_SIGMA_KM: f64 = 2.0;
const SATELLITE_RADIUS: (f64, f64) = (0.6, 1.0);
const SPECKLE_SHARE: f64 = 0.3;
const COAST_OFFSET_KM: (f64, f64) = (1.0, 4.0);

pub const DEFAULT_SPREAD_KM: f64 = 20.0;
pub const DEFAULT_NOISE_LEVEL: f64 = 0.05;

impl ToyCitySpec {
    pub fn monocentric(seed: u64) -> Self {
        ToyCitySpec {
            archetype: Archetype::Monocentric,
            n_centers: 1,
            center_spread_km: 0.0,
            density_scale: 1.0,
            noise_level: DEFAULT_NOISE_LEVEL,
            seed,
        }
    }

    pub fn polycentric(n_centers: usize, center_spread_km: f64, seed: u64) -> Self {
        ToyCitySpec {
            archetype: Archetype::Polycentric,
            n_centers,
            center_spread_km,
            ..Self::monocentric(seed)
        }
    }

    pub fn coastal(n_centers: usize, center_spread_km: f64, seed: u64) -> Self {
        ToyCitySpec {
            archetype: Archetype::Coastal,
            n_centers,
            center_spread_km,
            ..Self::monocentric(seed)
        }
    }

    pub fn with_noise(mut self, noise_level: f64) -> Self {
        self.noise_level = noise_level;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.archetype {
            Archetype::Monocentric if self.n_centers != 1 => {
                return Err(Error::argument(format!(
                    "a monocentric city has exactly one center, got {}",
                    self.n_centers
                )))
            }
            Archetype::Polycentric if self.n_centers < 2 => {
                return Err(Error::argument(format!(
                    "a polycentric city needs at least two centers, got {}",
                    self.n_centers
                )))
            }
            _ if self.n_centers == 0 => return Err(Error::argument("a city needs at least one center")),
            _ => {}
        }
        if !(self.center_spread_km >= 0.0) || !self.center_spread_km.is_finite() {
            return Err(Error::argument(format!("center spread must be >= 0 km, got {}", self.center_spread_km)));
        }
        if !(self.density_scale > 0.0) || !self.density_scale.is_finite() {
            return Err(Error::argument(format!("density scale must be > 0, got {}", self.density_scale)));
        }
        if !(0.0..=1.0).contains(&self.noise_level) {
            return Err(Error::argument(format!("noise level must be in [0, 1], got {}", self.noise_level)));
        }
        Ok(())
    }
}

struct Bump {
    x: f64,
    y: f64,
    amplitude: f64,
    sigma: f64,
}

fn bumps<R: Rng>(spec: &ToyCitySpec, rng: &mut R) -> Vec<Bump> {
    let scale = spec.density_scale;
    if spec.n_centers == 1 {
        return vec![Bump {
            x: 0.0,
            y: 0.0,
            amplitude: scale,
            sigma: MONO_SIGMA_KM,
        }];
    }
    let mut out = vec![Bump {
        x: 0.0,
        y: 0.0,
        amplitude: CORE_AMPLITUDE * scale,
        sigma: CORE_SIGMA_KM,
    }];
    let satellites = spec.n_centers - 1;
    let phase = rng.random_range(0.0..2.0 * PI);
    for i in 0..satellites {
        let angle = phase + 2.0 * PI * i as f64 / satellites as f64;
        let radius = spec.center_spread_km / 2.0 * rng.random_range(SATELLITE_RADIUS.0..SATELLITE_RADIUS.1);
        out.push(Bump {
            x: radius * angle.cos(),
            y: radius * angle.sin(),
            amplitude: SATELLITE_AMPLITUDE * scale,
            sigma: SATELLITE_SIGMA_KM,
        });
    }
    out
}

/// Render `spec` on a `width` x `width` grid of `pixel_size` meter cells.
pub fn generate_toy_city(spec: &ToyCitySpec, width: usize, pixel_size: f64) -> Result<CityMap> {
    spec.validate()?;
    if width < 2 || !(pixel_size > 0.0) {
        return Err(Error::argument(format!("invalid grid {width} px at {pixel_size} m")));
    }
    let mut rng = seed::rng(spec.seed, "toy-city", 0);
    let bumps = bumps(spec, &mut rng);
    let coast = (spec.archetype == Archetype::Coastal).then(|| {
        let angle = rng.random_range(0.0..2.0 * PI);
        let offset = rng.random_range(COAST_OFFSET_KM.0..COAST_OFFSET_KM.1);
        (angle.cos(), angle.sin(), offset)
    });

    let px_km = pixel_size / 1000.0;
    let c = (width as f64 - 1.0) / 2.0;
    let mut values = Vec::with_capacity(width * width);
    for row in 0..width {
        for col in 0..width {
            let (x, y) = ((col as f64 - c) * px_km, (c - row as f64) * px_km);
            let density: f64 = bumps
                .iter()
                .map(|b| b.amplitude * (-((x - b.x).powi(2) + (y - b.y).powi(2)) / (2.0 * b.sigma * b.sigma)).exp())
                .sum();
            values.push(density.clamp(0.0, 1.0));
        }
    }
    if spec.noise_level > 0.0 {
        for v in &mut values {
            let hit = rng.random::<f64>() < SPECKLE_SHARE;
            let u: f64 = rng.random_range(-1.0..1.0);
            if hit {
                *v = (*v + spec.noise_level * u).clamp(0.0, 1.0);
            }
        }
    }
    if let Some((nx, ny, offset)) = coast {
        for row in 0..width {
            for col in 0..width {
                let (x, y) = ((col as f64 - c) * px_km, (c - row as f64) * px_km);
                if x * nx + y * ny > offset {
                    values[row * width + col] = 0.0;
                }
            }
        }
    }
    let meta = MapMeta {
        source: Some(format!("toy:{}", spec.archetype.name())),
        ..Default::default()
    };
    Ok(CityMap::new(width, pixel_size, values)?.with_meta(meta))
}
