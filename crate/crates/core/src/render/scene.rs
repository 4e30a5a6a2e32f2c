use std::fmt::Write;

use image::{ImageEncoder, Rgb, RgbImage};

pub type Color = [u8; 3];

pub const BLACK: Color = [0, 0, 0];
pub const WHITE: Color = [255, 255, 255];

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rect { x: f64, y: f64, w: f64, h: f64, fill: Color },
    Polyline { points: Vec<(f64, f64)>, stroke: Color, width: f64 },
    Circle { cx: f64, cy: f64, r: f64, fill: Color, class: &'static str },
    /// SVG only; the rasterizer has no font and skips text.
    Text { x: f64, y: f64, size: f64, text: String },
}

/// Flat list of primitives on a white canvas, in paint order.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub width: u32,
    pub height: u32,
    pub background: Color,
    pub shapes: Vec<Shape>,
}

fn hex(c: Color) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

// Fixed precision keeps the output independent of float formatting quirks.
fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Scene {
    pub fn new(width: u32, height: u32) -> Self {
        Scene {
            width,
            height,
            background: WHITE,
            shapes: Vec::new(),
        }
    }

    pub fn push(&mut self, shape: Shape) {
        self.shapes.push(shape);
    }

    pub fn to_svg(&self) -> String {
        let mut s = String::new();
        let (w, h) = (self.width, self.height);
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" shape-rendering="crispEdges">"#
        )
        .unwrap();
        writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="{}"/>"#, hex(self.background)).unwrap();
        for shape in &self.shapes {
            match shape {
                Shape::Rect { x, y, w, h, fill } => writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                    num(*x),
                    num(*y),
                    num(*w),
                    num(*h),
                    hex(*fill)
                ),
                Shape::Polyline { points, stroke, width } => {
                    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{},{}", num(*x), num(*y))).collect();
                    writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="{}"/>"#,
                        pts.join(" "),
                        hex(*stroke),
                        num(*width)
                    )
                }
                Shape::Circle { cx, cy, r, fill, class } => writeln!(
                    s,
                    r#"<circle class="{class}" cx="{}" cy="{}" r="{}" fill="{}"/>"#,
                    num(*cx),
                    num(*cy),
                    num(*r),
                    hex(*fill)
                ),
                Shape::Text { x, y, size, text } => writeln!(
                    s,
                    r#"<text x="{}" y="{}" font-family="sans-serif" font-size="{}">{}</text>"#,
                    num(*x),
                    num(*y),
                    num(*size),
                    escape(text)
                ),
            }
            .unwrap();
        }
        s.push_str("</svg>\n");
        s
    }

    /// Aliased rasterization: a pixel takes a shape's color when its
    /// center lies inside the shape.
    pub fn rasterize(&self) -> RgbImage {
        let mut img = RgbImage::from_pixel(self.width, self.height, Rgb(self.background));
        let (w, h) = (self.width as i64, self.height as i64);
        let paint = |img: &mut RgbImage, x0: f64, y0: f64, x1: f64, y1: f64, c: Color, inside: &dyn Fn(f64, f64) -> bool| {
            let cols = (x0.floor() as i64).max(0)..=(x1.ceil() as i64).min(w - 1);
            for py in (y0.floor() as i64).max(0)..=(y1.ceil() as i64).min(h - 1) {
                for px in cols.clone() {
                    if inside(px as f64 + 0.5, py as f64 + 0.5) {
                        img.put_pixel(px as u32, py as u32, Rgb(c));
                    }
                }
            }
        };
        for shape in &self.shapes {
            match shape {
                &Shape::Rect { x, y, w, h, fill } => {
                    paint(&mut img, x, y, x + w, y + h, fill, &|px, py| px >= x && px < x + w && py >= y && py < y + h)
                }
                Shape::Polyline { points, stroke, width } => {
                    let half = width / 2.0;
                    for seg in points.windows(2) {
                        let ((ax, ay), (bx, by)) = (seg[0], seg[1]);
                        let inside = |px: f64, py: f64| {
                            let (dx, dy) = (bx - ax, by - ay);
                            let len2 = dx * dx + dy * dy;
                            let t = if len2 > 0.0 { (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
                            (px - ax - t * dx).hypot(py - ay - t * dy) <= half
                        };
                        paint(&mut img, ax.min(bx) - half, ay.min(by) - half, ax.max(bx) + half, ay.max(by) + half, *stroke, &inside);
                    }
                }
                &Shape::Circle { cx, cy, r, fill, .. } => {
                    paint(&mut img, cx - r, cy - r, cx + r, cy + r, fill, &|px, py| (px - cx).hypot(py - cy) <= r)
                }
                Shape::Text { .. } => {}
            }
        }
        img
    }

    pub fn to_png(&self) -> Vec<u8> {
        let img = self.rasterize();
        let mut out = Vec::new();
        image::codecs::png::PngEncoder::new(&mut out)
            .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
            .expect("in-memory PNG encoding");
        out
    }
}
