//! Static SVG figures.

use plotters::prelude::*;
use std::error::Error;
use std::io;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers instead of a line.
    pub markers: bool,
    /// Palette index; defaults to the series position.
    pub color: Option<usize>,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, markers: false, color: None }
    }

    pub fn dots(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, markers: true, color: None }
    }

    pub fn colored(self, i: usize) -> Self {
        Self { color: Some(i), ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl Panel {
    pub fn new(title: impl Into<String>, x_label: &str, y_label: &str) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new() }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }
}

/// Cell values on a rectilinear grid; `x_edges` and `y_edges` have one
/// more entry than the corresponding axis of `values` (row-major in x).
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Figure {
    Lines { name: String, panels: Vec<Panel> },
    Heat { name: String, maps: Vec<Heatmap> },
}

impl Figure {
    pub fn name(&self) -> &str {
        match self {
            Figure::Lines { name, .. } | Figure::Heat { name, .. } => name,
        }
    }

    pub fn render(&self, path: &Path) -> io::Result<()> {
        let r = match self {
            Figure::Lines { panels, .. } => lines(path, panels),
            Figure::Heat { maps, .. } => heat(path, maps),
        };
        r.map_err(|e| io::Error::other(e.to_string()))
    }
}

/// Cell edges from ascending centres.
pub fn edges(centres: &[f64]) -> Vec<f64> {
    let n = centres.len();
    if n == 1 {
        return vec![centres[0] - 0.5, centres[0] + 0.5];
    }
    let mut e = Vec::with_capacity(n + 1);
    e.push(centres[0] - 0.5 * (centres[1] - centres[0]));
    for w in centres.windows(2) {
        e.push(0.5 * (w[0] + w[1]));
    }
    e.push(centres[n - 1] + 0.5 * (centres[n - 1] - centres[n - 2]));
    e
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let flat = hi - lo <= 1e-9 * lo.abs().max(hi.abs()).max(1e-300);
    let pad = if flat { 0.1 * lo.abs().max(1e-3) } else { 0.05 * (hi - lo) };
    (lo - pad, hi + pad)
}

const WIDTH: u32 = 560;
const HEIGHT: u32 = 420;

fn lines(path: &Path, panels: &[Panel]) -> Result<(), Box<dyn Error>> {
    let root = SVGBackend::new(path, (WIDTH * panels.len().max(1) as u32, HEIGHT)).into_drawing_area();
    root.fill(&WHITE)?;
    for (area, p) in root.split_evenly((1, panels.len().max(1))).iter().zip(panels) {
        let all = || p.series.iter().flat_map(|s| s.points.iter().copied());
        let (x0, x1) = range(all().map(|q| q.0));
        let (y0, y1) = range(all().map(|q| q.1));
        let mut chart = ChartBuilder::on(area)
            .caption(&p.title, ("sans-serif", 16))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(60)
            .build_cartesian_2d(x0..x1, y0..y1)?;
        chart.configure_mesh().x_desc(p.x_label.as_str()).y_desc(p.y_label.as_str()).draw()?;
        for (i, s) in p.series.iter().enumerate() {
            let color = Palette99::pick(s.color.unwrap_or(i)).to_rgba();
            let pts = s.points.iter().copied().filter(|q| q.0.is_finite() && q.1.is_finite());
            let anno = if s.markers {
                chart.draw_series(pts.map(|q| Circle::new(q, 3, color.filled())))?
            } else {
                chart.draw_series(LineSeries::new(pts, color.stroke_width(2)))?
            };
            if !s.label.is_empty() {
                anno.label(s.label.as_str()).legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
            }
        }
        if p.series.iter().any(|s| !s.label.is_empty()) {
            chart.configure_series_labels().border_style(BLACK).background_style(WHITE.mix(0.85)).draw()?;
        }
    }
    root.present()?;
    Ok(())
}

/// Blue below zero, red above, white at zero.
fn diverging(t: f64) -> RGBColor {
    let t = t.clamp(-1.0, 1.0);
    let fade = |c: u8, w: f64| (255.0 + (c as f64 - 255.0) * w).round() as u8;
    if t >= 0.0 {
        RGBColor(fade(178, t), fade(24, t), fade(43, t))
    } else {
        RGBColor(fade(33, -t), fade(102, -t), fade(172, -t))
    }
}

/// Colour of `v` given the finite range of the map: diverging around zero
/// for signed data, white to red (or blue) otherwise.
fn shade(v: f64, lo: f64, hi: f64) -> RGBColor {
    if lo < 0.0 && hi > 0.0 {
        return diverging(v / lo.abs().max(hi));
    }
    let t = if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
    if hi > 0.0 {
        diverging(t)
    } else {
        diverging(t - 1.0)
    }
}

fn heat(path: &Path, maps: &[Heatmap]) -> Result<(), Box<dyn Error>> {
    let root = SVGBackend::new(path, (WIDTH * maps.len().max(1) as u32, HEIGHT)).into_drawing_area();
    root.fill(&WHITE)?;
    for (area, m) in root.split_evenly((1, maps.len().max(1))).iter().zip(maps) {
        let (nx, ny) = (m.x_edges.len() - 1, m.y_edges.len() - 1);
        let (lo, hi) = m.values.iter().filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let title = format!("{} [{:.4}, {:.4}]", m.title, lo, hi);
        let mut chart = ChartBuilder::on(area)
            .caption(title, ("sans-serif", 15))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(60)
            .build_cartesian_2d(m.x_edges[0]..m.x_edges[nx], m.y_edges[0]..m.y_edges[ny])?;
        chart.configure_mesh().disable_mesh().x_desc(m.x_label.as_str()).y_desc(m.y_label.as_str()).draw()?;
        chart.draw_series((0..nx * ny).map(|n| {
            let (i, j) = (n / ny, n % ny);
            let c = shade(m.values[n], lo, hi);
            Rectangle::new([(m.x_edges[i], m.y_edges[j]), (m.x_edges[i + 1], m.y_edges[j + 1])], c.filled())
        }))?;
    }
    root.present()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_bracket_centres() {
        assert_eq!(edges(&[1.0, 2.0, 4.0]), vec![0.5, 1.5, 3.0, 5.0]);
    }

    #[test]
    fn svg_files_render() {
        let dir = std::env::temp_dir().join(format!("xplab-plot-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let f = Figure::Lines {
            name: "l".into(),
            panels: vec![Panel::new("p", "x", "y").with(Series::line("a", vec![(0.0, 0.0), (1.0, 1.0)]))],
        };
        f.render(&dir.join("l.svg")).unwrap();
        let h = Figure::Heat {
            name: "h".into(),
            maps: vec![Heatmap {
                title: "h".into(),
                x_label: "x".into(),
                y_label: "y".into(),
                x_edges: vec![0.0, 1.0, 2.0],
                y_edges: vec![0.0, 1.0],
                values: vec![-1.0, 2.0],
            }],
        };
        h.render(&dir.join("h.svg")).unwrap();
        let text = std::fs::read_to_string(dir.join("h.svg")).unwrap();
        assert!(text.starts_with("<svg") && text.contains("<rect"));
        std::fs::remove_dir_all(dir).unwrap();
    }
}
