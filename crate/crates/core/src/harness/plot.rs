//! SVG figure: empirical points with +-2 binomial standard-error bars against
//! dashed theoretical curves.

use std::path::Path;

use plotters::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::run::{ExperimentReport, SummaryRow};
use crate::error::{Error, Result};

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

struct Series {
    label: String,
    /// `(lambda, empirical, half-width, theory)`.
    points: Vec<(f64, f64, f64, f64)>,
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(format!("plot: {e}")))
}

/// Two-sample error sums get the SE of each binomial proportion added in quadrature.
fn half_width(row: &SummaryRow, two_sided: bool) -> f64 {
    let valid = (row.trials - row.aborted_count).max(1) as f64;
    if two_sided {
        let per = valid / 2.0;
        let p = (row.empirical_error / 2.0).clamp(0.0, 1.0);
        2.0 * (2.0 * p * (1.0 - p) / per).sqrt()
    } else {
        let p = row.empirical_error.clamp(0.0, 1.0);
        2.0 * (p * (1.0 - p) / valid).sqrt()
    }
}

fn series_from(rows: &[SummaryRow], prefix: &str, two_sided: bool, by_k2: bool) -> Vec<Series> {
    let mut keys: Vec<(usize, usize)> = rows.iter().map(|r| (r.k1, r.k2)).collect();
    keys.dedup();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(k1, k2)| Series {
            label: if by_k2 { format!("{prefix}k1={k1}, k2={k2}") } else { prefix.trim_end().to_string() },
            points: rows
                .iter()
                .filter(|r| r.k1 == k1 && r.k2 == k2)
                .map(|r| (r.lambda, r.empirical_error, half_width(r, two_sided), r.theoretical_error))
                .collect(),
        })
        .collect()
}

pub fn render(path: &Path, cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<()> {
    let (series, y_label) = match cfg.experiment {
        ExperimentKind::CltCheck => {
            let rows = report.clt.as_deref().unwrap_or_default();
            let mut ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
            ks.sort();
            ks.dedup();
            let s = ks
                .into_iter()
                .map(|k| Series {
                    label: format!("k={k}"),
                    points: rows
                        .iter()
                        .filter(|r| r.k == k)
                        .map(|r| {
                            let se = (r.sample_variance / (r.trials - r.aborted_count).max(1) as f64).sqrt();
                            (r.lambda, r.sample_mean, 2.0 * se, r.theory_mean)
                        })
                        .collect(),
                })
                .collect();
            (s, "mean of L")
        }
        ExperimentKind::Rank => (series_from(&report.summary, "rank ", false, false), "misclassification rate"),
        ExperimentKind::HypothesisTransformed => {
            let mut s = series_from(&report.summary, "transformed ", true, true);
            if let Some(b) = &report.baseline_summary {
                s.extend(series_from(b, "plain ", true, true));
            }
            (s, "Type-I + Type-II error")
        }
        _ => (series_from(&report.summary, "", true, true), "Type-I + Type-II error"),
    };

    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x_hi, mut y_lo, mut y_hi) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, h, t) in all {
        x_hi = x_hi.max(x);
        for v in [y - h, y + h, t] {
            if v.is_finite() {
                y_lo = y_lo.min(v);
                y_hi = y_hi.max(v);
            }
        }
    }
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    let pad = 0.05 * (y_hi - y_lo).max(1e-3);
    let (y_lo, y_hi) = if cfg.experiment == ExperimentKind::CltCheck {
        (y_lo - pad, y_hi + pad)
    } else {
        (0.0f64.min(y_lo), y_hi + pad)
    };

    let root = SVGBackend::new(path, (800, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let title = format!("{} (n={}, {} trials per point)", cfg.experiment.name(), cfg.n, cfg.trials);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(0.0..x_hi * 1.05 + 1e-3, y_lo..y_hi)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("lambda").y_desc(y_label).draw().map_err(plot_err)?;

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(DashedLineSeries::new(s.points.iter().map(|p| (p.0, p.3)), 6, 4, color.stroke_width(2)))
            .map_err(plot_err)?;
        chart
            .draw_series(
                s.points.iter().map(|p| ErrorBar::new_vertical(p.0, p.1 - p.2, p.1, p.1 + p.2, color.filled(), 6)),
            )
            .map_err(plot_err)?
            .label(s.label.clone())
            .legend(move |(x, y)| Circle::new((x + 8, y), 4, color.filled()));
        chart
            .draw_series(LineSeries::new(s.points.iter().map(|p| (p.0, p.1)), color.stroke_width(1)))
            .map_err(plot_err)?;
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}
