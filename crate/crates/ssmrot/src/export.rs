//! Deterministic CSV and SVG emitters for spectra, backbone curves, and
//! forced response curves. All floats print through one fixed format so
//! identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::reduced::continuation::{Bifurcation, Frc};
use crate::reduced::BackboneCurve;
use crate::spectral::Spectrum;
use crate::validate::Trajectory;

fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.12e}")
    }
}

pub fn spectrum_csv(spectrum: &Spectrum) -> String {
    let mut out = String::from("index,re,im,damping_ratio,frequency_hz\n");
    let mut idx = 0usize;
    for p in &spectrum.pairs {
        for lam in [p.lambda, p.lambda.conj()] {
            let zeta = -lam.re / lam.norm().max(1e-300);
            let hz = lam.im.abs() / (2.0 * std::f64::consts::PI);
            let _ = writeln!(out, "{idx},{},{},{},{}", num(lam.re), num(lam.im), num(zeta), num(hz));
            idx += 1;
        }
    }
    for r in &spectrum.real_modes {
        let _ = writeln!(out, "{idx},{},0,1,0", num(r.lambda));
        idx += 1;
    }
    out
}

pub fn backbone_csv(curve: &BackboneCurve, output_name: &str) -> String {
    let mut out = format!("rho,omega_hat,amp_{output_name}\n");
    for p in &curve.points {
        let _ = writeln!(out, "{},{},{}", num(p.rho), num(p.omega_hat), num(p.amplitude));
    }
    out
}

pub fn frc_csv(frc: &Frc) -> String {
    let mut out = String::from("omega");
    for k in 0..frc.dim_m / 2 {
        let _ = write!(out, ",rho{}", k + 1);
    }
    for dof in &frc.output_dofs {
        let _ = write!(out, ",amp_{}", dof.name);
    }
    out.push_str(",stability,bifurcation\n");
    for p in &frc.points {
        let _ = write!(out, "{}", num(p.omega));
        for r in &p.rho {
            let _ = write!(out, ",{}", num(*r));
        }
        for a in &p.amplitudes {
            let _ = write!(out, ",{}", num(*a));
        }
        let _ = writeln!(out, ",{},{}", if p.stable { 1 } else { 0 }, p.bifurcation);
    }
    out
}

pub fn trajectory_csv(traj: &Trajectory, dofs: &[(String, usize)]) -> String {
    let mut out = String::from("t");
    for (name, _) in dofs {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for (i, &t) in traj.times.iter().enumerate() {
        let _ = write!(out, "{}", num(t));
        for (_, idx) in dofs {
            let _ = write!(out, ",{}", num(traj.displacements[i][*idx]));
        }
        out.push('\n');
    }
    out
}

/// Minimal line-plot SVG: solid stable segments, dashed unstable segments,
/// circles on saddle-node points and squares on Hopf points.
pub struct SvgPlot {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl Default for SvgPlot {
    fn default() -> Self {
        Self {
            width: 800.0,
            height: 520.0,
            margin: 60.0,
            title: String::new(),
            x_label: "x".into(),
            y_label: "y".into(),
        }
    }
}

struct Mapper {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    width: f64,
    height: f64,
    margin: f64,
}

impl Mapper {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = self.margin
            + (x - self.x0) / (self.x1 - self.x0).max(1e-300) * (self.width - 2.0 * self.margin);
        let sy = self.height
            - self.margin
            - (y - self.y0) / (self.y1 - self.y0).max(1e-300) * (self.height - 2.0 * self.margin);
        (sx, sy)
    }
}

fn svg_header(plot: &SvgPlot, m: &Mapper) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        plot.width, plot.height, plot.width, plot.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    // Axes.
    let (ax0, ay0) = (plot.margin, plot.height - plot.margin);
    let (ax1, ay1) = (plot.width - plot.margin, plot.margin);
    let _ = writeln!(
        s,
        r#"<path d="M {ax0:.1} {ay1:.1} L {ax0:.1} {ay0:.1} L {ax1:.1} {ay0:.1}" stroke="black" fill="none" stroke-width="1"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        plot.width / 2.0,
        plot.title
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        plot.width / 2.0,
        plot.height - 14.0,
        plot.x_label
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {:.1})">{}</text>"#,
        plot.height / 2.0,
        plot.height / 2.0,
        plot.y_label
    );
    // Tick labels on the data range.
    for frac in [0.0, 0.5, 1.0] {
        let xv = m.x0 + frac * (m.x1 - m.x0);
        let yv = m.y0 + frac * (m.y1 - m.y0);
        let (sx, _) = m.map(xv, m.y0);
        let (_, sy) = m.map(m.x0, yv);
        let _ = writeln!(
            s,
            r#"<text x="{sx:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{xv:.4}</text>"#,
            plot.height - plot.margin + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{sy:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{yv:.4}</text>"#,
            plot.margin - 6.0
        );
    }
    s
}

/// FRC plot: amplitude of one output against Ω.
pub fn frc_svg(frc: &Frc, output_idx: usize, plot: &SvgPlot) -> String {
    let pts: Vec<(f64, f64, bool, Bifurcation)> = frc
        .points
        .iter()
        .map(|p| (p.omega, p.amplitudes[output_idx], p.stable, p.bifurcation))
        .collect();
    polyline_svg(&pts, plot)
}

/// Backbone plot: ω̂ on the x-axis, amplitude on the y-axis.
pub fn backbone_svg(curve: &BackboneCurve, plot: &SvgPlot) -> String {
    let pts: Vec<(f64, f64, bool, Bifurcation)> = curve
        .points
        .iter()
        .map(|p| (p.omega_hat, p.amplitude, true, Bifurcation::None))
        .collect();
    polyline_svg(&pts, plot)
}

fn polyline_svg(pts: &[(f64, f64, bool, Bifurcation)], plot: &SvgPlot) -> String {
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, _, _) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        x0 = 0.0;
        x1 = 1.0;
        y0 = 0.0;
        y1 = 1.0;
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let m = Mapper {
        x0,
        x1,
        y0,
        y1,
        width: plot.width,
        height: plot.height,
        margin: plot.margin,
    };
    let mut s = svg_header(plot, &m);
    // Segments grouped by stability.
    let mut i = 0usize;
    while i + 1 < pts.len() {
        let stable = pts[i].2;
        let mut j = i + 1;
        while j < pts.len() && pts[j].2 == stable {
            j += 1;
        }
        let mut d = String::new();
        for (k, &(x, y, _, _)) in pts[i..j.min(pts.len())].iter().enumerate() {
            let (sx, sy) = m.map(x, y);
            let _ = write!(d, "{}{sx:.2} {sy:.2} ", if k == 0 { "M " } else { "L " });
        }
        let dash = if stable { "" } else { r#" stroke-dasharray="6 4""# };
        let _ = writeln!(
            s,
            r##"<path d="{}" stroke="#1f4e9c" fill="none" stroke-width="1.6"{dash}/>"##,
            d.trim_end()
        );
        // Overlap one point so segments connect.
        i = j.saturating_sub(1).max(i + 1);
    }
    // Bifurcation glyphs.
    for &(x, y, _, b) in pts {
        let (sx, sy) = m.map(x, y);
        match b {
            Bifurcation::SaddleNode => {
                let _ = writeln!(
                    s,
                    r##"<circle cx="{sx:.2}" cy="{sy:.2}" r="5" stroke="#008b8b" fill="none" stroke-width="1.6"/>"##
                );
            }
            Bifurcation::Hopf => {
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="9" height="9" stroke="black" fill="none" stroke-width="1.6"/>"#,
                    sx - 4.5,
                    sy - 4.5
                );
            }
            Bifurcation::None => {}
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OutputDof;
    use crate::reduced::continuation::FrcPoint;

    fn tiny_frc() -> Frc {
        Frc {
            points: vec![
                FrcPoint {
                    omega: 1.0,
                    q: vec![],
                    rho: vec![0.1],
                    amplitudes: vec![0.2],
                    stable: true,
                    bifurcation: Bifurcation::None,
                },
                FrcPoint {
                    omega: 1.05,
                    q: vec![],
                    rho: vec![0.2],
                    amplitudes: vec![0.5],
                    stable: false,
                    bifurcation: Bifurcation::SaddleNode,
                },
                FrcPoint {
                    omega: 1.1,
                    q: vec![],
                    rho: vec![0.15],
                    amplitudes: vec![0.3],
                    stable: true,
                    bifurcation: Bifurcation::Hopf,
                },
            ],
            eps: 0.01,
            order: 3,
            dim_m: 2,
            output_dofs: vec![OutputDof {
                name: "tip".into(),
                index: 0,
            }],
            warnings: vec![],
        }
    }

    #[test]
    fn frc_csv_format() {
        let text = frc_csv(&tiny_frc());
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "omega,rho1,amp_tip,stability,bifurcation");
        let row = lines.next().unwrap();
        assert!(row.ends_with(",1,-"), "row: {row}");
        let row2 = lines.next().unwrap();
        assert!(row2.ends_with(",0,SN"), "row2: {row2}");
    }

    #[test]
    fn svg_is_deterministic_and_marks_bifurcations() {
        let frc = tiny_frc();
        let a = frc_svg(&frc, 0, &SvgPlot::default());
        let b = frc_svg(&frc, 0, &SvgPlot::default());
        assert_eq!(a, b);
        assert!(a.contains("circle"), "SN glyph missing");
        assert!(a.contains("rect x="), "Hopf glyph missing");
        assert!(a.contains("stroke-dasharray"), "unstable dash missing");
    }
}
