//! Static SVG figures.

use std::path::Path;

use anyhow::{anyhow, Result};
use num_complex::Complex64;
use plotters::prelude::*;

fn err<E: std::fmt::Display>(e: E) -> anyhow::Error {
    anyhow!("plot: {e}")
}

fn range(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-12);
    (lo - pad, hi + pad)
}

/// `1 - Re λ` along a line of twists, with the quadratic prediction.
pub fn curve(path: &Path, t: &[f64], measured: &[f64], predicted: &[f64]) -> Result<()> {
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let (x0, x1) = range(t.iter().copied());
    let (y0, y1) = range(measured.iter().chain(predicted).copied());
    let mut chart = ChartBuilder::on(&root)
        .caption("1 - Re λ_w along the twist line", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(err)?;
    chart.configure_mesh().x_desc("|w|").y_desc("1 - Re λ").draw().map_err(err)?;
    chart
        .draw_series(LineSeries::new(t.iter().copied().zip(predicted.iter().copied()), &RED))
        .map_err(err)?
        .label("wᵀΣw/2")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], RED));
    chart
        .draw_series(t.iter().zip(measured).map(|(&x, &y)| Circle::new((x, y), 3, BLUE.filled())))
        .map_err(err)?
        .label("Ulam")
        .legend(|(x, y)| Circle::new((x + 8, y), 3, BLUE.filled()));
    chart.configure_series_labels().border_style(BLACK).draw().map_err(err)?;
    root.present().map_err(err)
}

/// Eigenvalues in the complex plane with the unit circle and the cut.
pub fn spectrum(path: &Path, values: &[Complex64], rho_cut: f64) -> Result<()> {
    let root = SVGBackend::new(path, (560, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("cover spectrum", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(50)
        .build_cartesian_2d(-1.05..1.05, -1.05..1.05)
        .map_err(err)?;
    chart.configure_mesh().x_desc("Re").y_desc("Im").draw().map_err(err)?;
    for (r, color) in [(1.0, BLACK), (rho_cut, RED)] {
        let circle: Vec<(f64, f64)> = (0..=256)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 256.0;
                (r * a.cos(), r * a.sin())
            })
            .collect();
        chart.draw_series(LineSeries::new(circle, color)).map_err(err)?;
    }
    chart
        .draw_series(values.iter().map(|z| Circle::new((z.re, z.im), 2, BLUE.filled())))
        .map_err(err)?;
    root.present().map_err(err)
}

/// Histogram density on the window with the theory overlay.
/// `bins` holds `(left, right, empirical_mass, theory_mass)`.
pub fn density(path: &Path, title: &str, bins: &[(f64, f64, f64, f64)]) -> Result<()> {
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let dens: Vec<(f64, f64, f64, f64)> = bins.iter().map(|&(l, r, e, t)| (l, r, e / (r - l), t / (r - l))).collect();
    let (x0, x1) = range(bins.iter().flat_map(|b| [b.0, b.1]));
    let (_, y1) = range(dens.iter().flat_map(|d| [d.2, d.3]));
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, 0.0..y1)
        .map_err(err)?;
    chart.configure_mesh().x_desc("λ").y_desc("density").draw().map_err(err)?;
    chart
        .draw_series(dens.iter().map(|&(l, r, e, _)| Rectangle::new([(l, 0.0), (r, e)], BLUE.mix(0.4).filled())))
        .map_err(err)?;
    chart
        .draw_series(dens.iter().map(|&(l, r, _, t)| PathElement::new(vec![(l, t), (r, t)], RED.stroke_width(2))))
        .map_err(err)?;
    root.present().map_err(err)
}
