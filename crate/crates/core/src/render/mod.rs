//! Figures as SVG documents or PNG images: maps in grayscale, profiles as
//! line plots with their peaks, comparison reports as grouped bar charts.
//! Output bytes depend only on the input.

mod scene;

use std::path::Path;

use crate::error::{Error, Result};
use crate::morphology::{PeakSet, RadialProfile};
use crate::raster::CityMap;
use crate::stats::{ComparisonReport, Histogram};

pub use scene::{Color, Scene, Shape, BLACK, WHITE};

const REAL: Color = [31, 119, 180];
const SYNTH: Color = [255, 127, 14];
const PEAK: Color = [214, 39, 40];
const AXIS: Color = [80, 80, 80];
const MARGIN: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Svg,
    Png,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("svg") => Ok(Format::Svg),
            Some("png") => Ok(Format::Png),
            _ => Err(Error::argument(format!("{}: output must end in .svg or .png", path.display()))),
        }
    }
}

pub fn encode(scene: &Scene, format: Format) -> Vec<u8> {
    match format {
        Format::Svg => scene.to_svg().into_bytes(),
        Format::Png => scene.to_png(),
    }
}

/// Write `scene` in the format implied by the file extension.
pub fn write(scene: &Scene, path: &Path) -> Result<()> {
    let bytes = encode(scene, Format::from_path(path)?);
    std::fs::write(path, bytes)?;
    Ok(())
}

fn gray(v: f64) -> Color {
    let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    [g, g, g]
}

/// One square cell per pixel, built-up fraction as brightness.
pub fn map_scene(map: &CityMap) -> Scene {
    let w = map.width();
    let cell = (512 / w).max(1);
    let side = (w * cell) as u32;
    let mut scene = Scene::new(side, side);
    scene.background = BLACK;
    for r in 0..w {
        for c in 0..w {
            let v = map.get(r, c);
            if v > 0.0 {
                scene.push(Shape::Rect {
                    x: (c * cell) as f64,
                    y: (r * cell) as f64,
                    w: cell as f64,
                    h: cell as f64,
                    fill: gray(v),
                });
            }
        }
    }
    scene
}

struct Plot {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    x_max: f64,
    y_max: f64,
}

impl Plot {
    fn at(&self, x: f64, y: f64) -> (f64, f64) {
        (self.x0 + self.w * x / self.x_max, self.y0 + self.h - self.h * y / self.y_max)
    }

    fn axes(&self, scene: &mut Scene, x_label: &str, y_label: &str) {
        let (l, b) = (self.x0, self.y0 + self.h);
        scene.push(Shape::Polyline {
            points: vec![(l, self.y0), (l, b), (l + self.w, b)],
            stroke: AXIS,
            width: 1.5,
        });
        scene.push(Shape::Text { x: l + self.w / 2.0 - 30.0, y: b + 28.0, size: 12.0, text: x_label.into() });
        scene.push(Shape::Text { x: 4.0, y: self.y0 - 10.0, size: 12.0, text: y_label.into() });
        scene.push(Shape::Text { x: l - 30.0, y: self.y0 + 4.0, size: 10.0, text: format!("{:.2}", self.y_max) });
        scene.push(Shape::Text { x: l + self.w - 20.0, y: b + 14.0, size: 10.0, text: format!("{:.1}", self.x_max) });
    }
}

/// Line plot of `x(d)`; each detected peak is a circle of class `peak`.
pub fn profile_scene(profile: &RadialProfile, peaks: Option<&PeakSet>) -> Scene {
    let mut scene = Scene::new(640, 400);
    let plot = Plot {
        x0: MARGIN + 10.0,
        y0: MARGIN,
        w: 640.0 - 2.0 * MARGIN - 10.0,
        h: 400.0 - 2.0 * MARGIN - 10.0,
        x_max: (profile.distance_km(profile.len().saturating_sub(1))).max(profile.ring_width_km),
        y_max: profile.max_value().max(1e-9) * 1.05,
    };
    plot.axes(&mut scene, "distance (km)", "built-up fraction");
    scene.push(Shape::Polyline {
        points: profile.values.iter().enumerate().map(|(k, &v)| plot.at(profile.distance_km(k), v)).collect(),
        stroke: REAL,
        width: 2.0,
    });
    for p in peaks.map(|s| s.peaks.as_slice()).unwrap_or_default() {
        let (cx, cy) = plot.at(p.distance_km, p.height);
        scene.push(Shape::Circle { cx, cy, r: 5.0, fill: PEAK, class: "peak" });
    }
    scene
}

/// Side-by-side bars of the real and synthetic shares per label.
fn bar_panel(scene: &mut Scene, plot: &Plot, title: &str, real: &Histogram, synth: &Histogram) {
    let mut labels = real.labels();
    labels.extend(synth.labels());
    labels.sort_unstable();
    labels.dedup();
    let share = |h: &Histogram, l: usize| if h.total() > 0 { h.count(l) as f64 / h.total() as f64 } else { 0.0 };
    plot.axes(scene, title, "share");
    let slot = plot.w / labels.len().max(1) as f64;
    for (i, &l) in labels.iter().enumerate() {
        let x = plot.x0 + i as f64 * slot;
        for (j, (h, color)) in [(real, REAL), (synth, SYNTH)].into_iter().enumerate() {
            let v = share(h, l);
            let bar_h = plot.h * v / plot.y_max;
            scene.push(Shape::Rect {
                x: (x + slot * (0.1 + 0.4 * j as f64)).round(),
                y: (plot.y0 + plot.h - bar_h).round(),
                w: (slot * 0.4).round().max(1.0),
                h: bar_h.round(),
                fill: color,
            });
        }
        scene.push(Shape::Text { x: x + slot * 0.4, y: plot.y0 + plot.h + 14.0, size: 10.0, text: l.to_string() });
    }
}

/// Peak-count and cluster-share distributions, real (blue) vs synthetic
/// (orange), with the chi-square results in the titles.
pub fn report_scene(report: &ComparisonReport) -> Scene {
    let mut scene = Scene::new(900, 420);
    let panel = |x0: f64| Plot { x0, y0: 60.0, w: 360.0, h: 300.0, x_max: 1.0, y_max: 1.0 };
    let left = panel(MARGIN + 20.0);
    let right = panel(450.0 + MARGIN + 20.0);
    bar_panel(&mut scene, &left, "peaks per city", &report.peak_hist_real, &report.peak_hist_synth);
    bar_panel(&mut scene, &right, "profile class", &report.cluster.shares_real, &report.cluster.shares_synth);
    let title = |c: &crate::stats::ChiSummary| format!("chi2 = {:.3}, df = {}, p = {:.3e}", c.stat, c.df, c.p);
    scene.push(Shape::Text { x: left.x0, y: 24.0, size: 13.0, text: title(&report.peak_chi2) });
    scene.push(Shape::Text { x: right.x0, y: 24.0, size: 13.0, text: title(&report.cluster.share_chi2) });
    scene.push(Shape::Rect { x: 800.0, y: 8.0, w: 12.0, h: 12.0, fill: REAL });
    scene.push(Shape::Text { x: 816.0, y: 19.0, size: 11.0, text: "real".into() });
    scene.push(Shape::Rect { x: 800.0, y: 26.0, w: 12.0, h: 12.0, fill: SYNTH });
    scene.push(Shape::Text { x: 816.0, y: 37.0, size: 11.0, text: "synthetic".into() });
    scene
}
