use std::fmt::Write as _;

use rabi_chaos::phasespace::{linspace, DistributionKind, PhaseSpaceDistribution};

pub struct HeatmapStyle {
    /// Cells per axis.
    pub resolution: usize,
    /// Half-width of the plotted square in x and p.
    pub extent: f64,
}

impl Default for HeatmapStyle {
    fn default() -> Self {
        HeatmapStyle { resolution: 151, extent: 15.0 }
    }
}

const CELL: f64 = 4.0;
const MARGIN: f64 = 50.0;

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn hex(c: [f64; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0].round() as u8, c[1].round() as u8, c[2].round() as u8)
}

/// Blue below zero, white at zero, red above; `v` scaled to [-1, 1].
fn diverging(v: f64) -> [f64; 3] {
    const BLUE: [f64; 3] = [33.0, 102.0, 172.0];
    const WHITE: [f64; 3] = [247.0, 247.0, 247.0];
    const RED: [f64; 3] = [178.0, 24.0, 43.0];
    let v = v.clamp(-1.0, 1.0);
    if v < 0.0 {
        lerp(WHITE, BLUE, -v)
    } else {
        lerp(WHITE, RED, v)
    }
}

/// White to dark purple through yellow and teal; `v` in [0, 1].
fn sequential(v: f64) -> [f64; 3] {
    const STOPS: [[f64; 3]; 4] = [[255.0, 255.0, 255.0], [253.0, 231.0, 37.0], [33.0, 145.0, 140.0], [68.0, 1.0, 84.0]];
    let v = v.clamp(0.0, 1.0) * 3.0;
    let i = (v.floor() as usize).min(2);
    lerp(STOPS[i], STOPS[i + 1], v - i as f64)
}

/// SVG heatmap. Wigner functions use a diverging palette centred at zero;
/// cells drawn from its negative half carry `class="neg"`. Husimi functions
/// and histograms use a sequential palette.
pub fn render_heatmap(d: &PhaseSpaceDistribution, style: &HeatmapStyle) -> String {
    let n = style.resolution.max(2);
    let axis = linspace(-style.extent, style.extent, n);
    let r = d.resample(axis.clone(), axis.clone());
    let signed = d.kind == DistributionKind::Wigner;
    let scale = r.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let size = n as f64 * CELL;
    let (w, h) = (size + 2.0 * MARGIN, size + 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" shape-rendering="crispEdges">"#
    );
    let _ = writeln!(s, r#"<title>{:?} t = {}</title>"#, d.kind, d.t);
    let _ = writeln!(s, r#"<g transform="translate({MARGIN},{MARGIN})">"#);
    for i in 0..n {
        for j in 0..n {
            let v = r.values[[i, j]] / scale;
            let (colour, class) = if signed {
                (diverging(v), if v < 0.0 { "neg" } else { "pos" })
            } else {
                (sequential(v.max(0.0)), "pos")
            };
            // p increases upwards
            let x = i as f64 * CELL;
            let y = (n - 1 - j) as f64 * CELL;
            let _ = writeln!(
                s,
                r#"<rect class="{class}" x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                hex(colour)
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{size}" height="{size}" fill="none" stroke="black"/>"#
    );
    let (lo, hi) = (axis[0], axis[n - 1]);
    let bottom = MARGIN + size;
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">x</text>"#, MARGIN + size / 2.0, bottom + 35.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">p</text>"#, MARGIN - 35.0, MARGIN + size / 2.0);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}" text-anchor="middle" font-size="11">{lo}</text>"#, bottom + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{hi}</text>"#, MARGIN + size, bottom + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{bottom}" text-anchor="end" font-size="11">{lo}</text>"#, MARGIN - 5.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{hi}</text>"#, MARGIN - 5.0, MARGIN + 10.0);
    let _ = writeln!(s, "</svg>");
    s
}
