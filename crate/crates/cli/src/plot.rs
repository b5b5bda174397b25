//! Static SVG plots of experiment results.

use std::collections::BTreeMap;
use std::path::Path;

use plotters::prelude::*;
use wignerlab::harness::{ExperimentResult, ResultRow};
use wignerlab::{Error, Result};

const WIDTH: u32 = 800;
const HEIGHT: u32 = 560;

/// The parameter along which rows of a result vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N,
    Eta,
    Energy,
    /// Nothing varies; points sit at x = 0.
    Index,
}

impl Axis {
    fn value(self, row: &ResultRow) -> f64 {
        match self {
            Axis::N => row.n as f64,
            Axis::Eta => row.eta,
            Axis::Energy => row.energy,
            Axis::Index => 0.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Axis::N => "N",
            Axis::Eta => "eta",
            Axis::Energy => "E",
            Axis::Index => "",
        }
    }
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Picks the swept parameter: N first, then eta, then energy.
pub fn swept_axis(rows: &[ResultRow]) -> Axis {
    if distinct(rows.iter().map(|r| r.n as f64)) > 1 {
        Axis::N
    } else if distinct(rows.iter().map(|r| r.eta)) > 1 {
        Axis::Eta
    } else if distinct(rows.iter().map(|r| r.energy)) > 1 {
        Axis::Energy
    } else {
        Axis::Index
    }
}

struct Point {
    x: f64,
    mean: f64,
    stderr: f64,
    reference: f64,
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Numeric(format!("plot rendering failed: {e}"))
}

/// Renders estimate +- stderr against the swept parameter, one series per
/// label, with reference values overlaid as lines.
pub fn render_svg(result: &ExperimentResult) -> Result<String> {
    let rows = &result.rows;
    if rows.is_empty() {
        return Err(Error::Domain("cannot plot an empty result".into()));
    }
    let axis = swept_axis(rows);
    let xs: Vec<f64> = rows.iter().map(|r| axis.value(r)).collect();
    let log_x = axis != Axis::Index && xs.iter().all(|&x| x > 0.0) && {
        let (lo, hi) = bounds(xs.iter().copied());
        hi / lo > 10.0
    };
    let tx = |x: f64| if log_x { x.log10() } else { x };

    let mut series: BTreeMap<&str, Vec<Point>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !series.contains_key(r.series.as_str()) {
            order.push(&r.series);
        }
        series.entry(&r.series).or_default().push(Point {
            x: tx(axis.value(r)),
            mean: r.mean,
            stderr: r.stderr,
            reference: r.reference,
        });
    }
    for pts in series.values_mut() {
        pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    }

    let (mut x0, mut x1) = bounds(xs.iter().map(|&x| tx(x)));
    if x1 - x0 <= 0.0 {
        let pad = if x0 == 0.0 { 1.0 } else { 0.5 * x0.abs() };
        x0 -= pad;
        x1 += pad;
    } else {
        let pad = 0.05 * (x1 - x0);
        x0 -= pad;
        x1 += pad;
    }
    let ys = rows.iter().flat_map(|r| {
        let se = if r.stderr.is_finite() { r.stderr } else { 0.0 };
        [r.mean - se, r.mean + se, r.reference]
    });
    let (mut y0, mut y1) = bounds(ys);
    if !(y0.is_finite() && y1.is_finite()) {
        return Err(Error::Domain("result has no finite estimates to plot".into()));
    }
    let pad = if y1 > y0 { 0.08 * (y1 - y0) } else { 0.1 * y0.abs().max(1e-12) };
    y0 -= pad;
    y1 += pad;

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (WIDTH, HEIGHT)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let title = format!("{} (seed {}, {} samples)", result.spec.kind.name(), result.spec.seed, result.spec.samples);
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(15)
            .x_label_area_size(45)
            .y_label_area_size(70)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(plot_err)?;
        let x_desc = match (axis, log_x) {
            (Axis::Index, _) => String::new(),
            (a, true) => format!("log10({})", a.name()),
            (a, false) => a.name().to_string(),
        };
        chart.configure_mesh().x_desc(x_desc).y_desc("estimate").draw().map_err(plot_err)?;

        for (i, label) in order.iter().enumerate() {
            let pts = &series[label];
            let color = Palette99::pick(i).to_rgba();
            chart
                .draw_series(LineSeries::new(pts.iter().map(|p| (p.x, p.mean)), color.stroke_width(2)))
                .map_err(plot_err)?
                .label(label.to_string())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
            chart.draw_series(pts.iter().map(|p| Circle::new((p.x, p.mean), 4, color.filled()))).map_err(plot_err)?;
            chart
                .draw_series(pts.iter().filter(|p| p.stderr.is_finite()).map(|p| {
                    ErrorBar::new_vertical(p.x, p.mean - p.stderr, p.mean, p.mean + p.stderr, color.stroke_width(1), 8)
                }))
                .map_err(plot_err)?;
            let refs: Vec<(f64, f64)> =
                pts.iter().filter(|p| p.reference.is_finite()).map(|p| (p.x, p.reference)).collect();
            let line = match refs.as_slice() {
                [] => continue,
                [(_, r)] => vec![(x0, *r), (x1, *r)],
                _ => refs,
            };
            let faded = color.mix(0.6);
            chart
                .draw_series(DashedLineSeries::new(line, 8, 5, faded.stroke_width(1)))
                .map_err(plot_err)?
                .label(format!("{label} reference"))
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], faded.stroke_width(1)));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

/// Writes [`render_svg`] output to `out`.
pub fn emit_plot(result: &ExperimentResult, out: &Path) -> Result<()> {
    let svg = render_svg(result)?;
    std::fs::write(out, svg)?;
    Ok(())
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}
