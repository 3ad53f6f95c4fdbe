//! Two-panel SVG scatterplot: `x1` against `y` on the left, `γᵀx` against
//! `y` on the right. Output is a pure function of the input bytes.

use std::fmt::Write as _;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::models::{Dataset, StiefelFrame};

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 50.0;

/// Ordinates of the two panels, `(x1, γᵀx)`, in observation order.
pub fn panel_ordinates(data: &Dataset, gamma: &StiefelFrame) -> Result<(Vec<f64>, Vec<f64>)> {
    if gamma.d() != 1 {
        return Err(Error::PlotDimension);
    }
    if gamma.p() != data.p() {
        return Err(Error::dims(format!("data has p = {} but frame has p = {}", data.p(), gamma.p())));
    }
    let left = data.x.column(0).iter().copied().collect();
    let g: DVector<f64> = gamma.as_matrix().column(0).into_owned();
    Ok((left, data.project(&g)))
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn panel(out: &mut String, x0: f64, ys: &[f64], ord: &[f64], ylabel: &str) {
    let (xlo, xhi) = range(ys);
    let (ylo, yhi) = range(ord);
    let sx = |v: f64| x0 + MARGIN + (v - xlo) / (xhi - xlo) * PANEL_W;
    let sy = |v: f64| MARGIN + PANEL_H - (v - ylo) / (yhi - ylo) * PANEL_H;
    let (left, top, bottom) = (x0 + MARGIN, MARGIN, MARGIN + PANEL_H);
    writeln!(
        out,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{PANEL_W:.2}" height="{PANEL_H:.2}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for v in [xlo, xhi] {
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{v:.3}</text>"#,
            sx(v),
            bottom + 15.0
        )
        .unwrap();
    }
    for v in [ylo, yhi] {
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{v:.3}</text>"#,
            left - 4.0,
            sy(v) + 3.0
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">y</text>"#,
        left + PANEL_W / 2.0,
        bottom + 35.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{ylabel}</text>"#,
        left - 35.0,
        top + PANEL_H / 2.0,
        left - 35.0,
        top + PANEL_H / 2.0
    )
    .unwrap();
    for (y, o) in ys.iter().zip(ord) {
        writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#, sx(*y), sy(*o)).unwrap();
    }
}

/// Renders the two panels; requires a one-column frame.
pub fn plot_svg(data: &Dataset, gamma: &StiefelFrame) -> Result<String> {
    let (left, right) = panel_ordinates(data, gamma)?;
    let width = 2.0 * (PANEL_W + 2.0 * MARGIN);
    let height = PANEL_H + 2.0 * MARGIN;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    panel(&mut out, 0.0, &data.y, &left, "x1");
    panel(&mut out, PANEL_W + 2.0 * MARGIN, &data.y, &right, "γᵀx");
    out.push_str("</svg>\n");
    Ok(out)
}
