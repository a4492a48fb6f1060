//! Self-contained SVG figures: a success-rate (or error) heatmap over the
//! (structure, delta) grid with optional theory-curve overlays.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use unirec_core::harness::PhaseGrid;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMap {
    SuccessRate,
    MeanRelError,
}

pub struct PlotSpec {
    pub grid_path: PathBuf,
    pub theory_csvs: Vec<PathBuf>,
    pub output: PathBuf,
    pub title: String,
    pub color: ColorMap,
}

struct OverlaySeries {
    label: String,
    points: Vec<(f64, f64)>,
}

/// One polyline per (file, method) group of a theory CSV.
fn load_overlays(paths: &[PathBuf]) -> Result<Vec<OverlaySeries>, CliError> {
    let mut series = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 2 {
                return Err(CliError::Runtime(format!(
                    "{}: malformed row '{line}'",
                    path.display()
                )));
            }
            let Ok(x) = fields[0].parse::<f64>() else {
                continue; // header row
            };
            let y: f64 = fields[1].parse().map_err(|_| {
                CliError::Runtime(format!("{}: bad value in '{line}'", path.display()))
            })?;
            let method = fields.get(2).copied().unwrap_or("").to_string();
            match groups.iter_mut().find(|(m, _)| *m == method) {
                Some((_, pts)) => pts.push((x, y)),
                None => groups.push((method, vec![(x, y)])),
            }
        }
        for (method, points) in groups {
            let label = if method.is_empty() {
                stem.clone()
            } else {
                format!("{stem}:{method}")
            };
            series.push(OverlaySeries { label, points });
        }
    }
    Ok(series)
}

fn heat_color(value: f64, map: ColorMap) -> String {
    let t = value.clamp(0.0, 1.0);
    let (lo, hi) = match map {
        ColorMap::SuccessRate => ((255.0, 255.0, 255.0), (8.0, 48.0, 107.0)),
        ColorMap::MeanRelError => ((255.0, 255.0, 255.0), (165.0, 15.0, 21.0)),
    };
    let c = |a: f64, b: f64| (a + t * (b - a)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(lo.0, hi.0), c(lo.1, hi.1), c(lo.2, hi.2))
}

const OVERLAY_COLORS: [&str; 4] = ["#1f78ff", "#ff7f00", "#33a02c", "#e31a1c"];

pub fn render(spec: &PlotSpec) -> Result<String, CliError> {
    let grid = unirec_core::harness::load_run(&spec.grid_path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", spec.grid_path.display())))?;
    let overlays = load_overlays(&spec.theory_csvs)?;
    Ok(render_svg(&grid, &overlays, spec.title.as_str(), spec.color))
}

fn render_svg(
    grid: &PhaseGrid,
    overlays: &[OverlaySeries],
    title: &str,
    color: ColorMap,
) -> String {
    let s_axis = &grid.plan.structure_axis;
    let d_axis = &grid.plan.delta_axis;
    let (ns, nd) = (s_axis.len(), d_axis.len());

    let (ox, oy, w, h) = (80.0, 50.0, 560.0, 420.0);
    let total_w = ox + w + 180.0;
    let total_h = oy + h + 70.0;
    let cell_w = w / ns as f64;
    let cell_h = h / nd as f64;

    // Value-space mapping with half-cell padding at the edges, so a curve
    // passing through an axis value crosses the matching cell's center.
    let step_s = if ns > 1 { (s_axis[ns - 1] - s_axis[0]) / (ns - 1) as f64 } else { 1.0 };
    let step_d = if nd > 1 { (d_axis[nd - 1] - d_axis[0]) / (nd - 1) as f64 } else { 1.0 };
    let s_lo = s_axis[0] - step_s / 2.0;
    let s_hi = s_axis[ns - 1] + step_s / 2.0;
    let d_lo = d_axis[0] - step_d / 2.0;
    let d_hi = d_axis[nd - 1] + step_d / 2.0;
    let x_of = |s: f64| ox + (s - s_lo) / (s_hi - s_lo) * w;
    let y_of = |d: f64| oy + (d_hi - d) / (d_hi - d_lo) * h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total_w:.0}\" height=\"{total_h:.0}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(svg, "<defs><clipPath id=\"plot\"><rect x=\"{ox:.2}\" y=\"{oy:.2}\" width=\"{w:.2}\" height=\"{h:.2}\"/></clipPath></defs>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"28\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        ox + w / 2.0,
        xml_escape(title)
    );

    // Heatmap cells (structure-major storage).
    for (si, &s) in s_axis.iter().enumerate() {
        for (di, &d) in d_axis.iter().enumerate() {
            let cell = grid.cell(di, si);
            let value = match color {
                ColorMap::SuccessRate => cell.successes as f64 / cell.trials as f64,
                ColorMap::MeanRelError => cell.mean_rel_error,
            };
            let x = x_of(s) - cell_w / 2.0;
            let y = y_of(d) - cell_h / 2.0;
            let _ = writeln!(
                svg,
                "<rect class=\"cell\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell_w:.2}\" height=\"{cell_h:.2}\" fill=\"{}\"><title>s={s} delta={d} value={value:.4}</title></rect>",
                heat_color(value, color)
            );
        }
    }

    // Axes.
    let _ = writeln!(
        svg,
        "<line x1=\"{ox:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        oy + h,
        ox + w,
        oy + h
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{ox:.2}\" y1=\"{oy:.2}\" x2=\"{ox:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        oy + h
    );
    for &s in s_axis {
        let x = x_of(s);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            oy + h,
            oy + h + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{s}</text>",
            oy + h + 18.0
        );
    }
    for &d in d_axis {
        let y = y_of(d);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{ox:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>",
            ox - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{d}</text>",
            ox - 8.0,
            y + 3.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">structure</text>",
        ox + w / 2.0,
        oy + h + 40.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"22\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 22 {:.2})\">delta</text>",
        oy + h / 2.0,
        oy + h / 2.0
    );

    // Theory overlays, one polyline per series, clipped to the plot area.
    for (i, series) in overlays.iter().enumerate() {
        let color = OVERLAY_COLORS[i % OVERLAY_COLORS.len()];
        let pts: Vec<String> = series
            .points
            .iter()
            .map(|&(s, d)| format!("{:.2},{:.2}", x_of(s), y_of(d)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline clip-path=\"url(#plot)\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            pts.join(" ")
        );
    }

    // Legend.
    let lx = ox + w + 16.0;
    let mut ly = oy + 10.0;
    let map_label = match color {
        ColorMap::SuccessRate => "fill: success rate",
        ColorMap::MeanRelError => "fill: mean rel. error",
    };
    let _ = writeln!(
        svg,
        "<text x=\"{lx:.2}\" y=\"{ly:.2}\" font-size=\"11\">{map_label}</text>"
    );
    for (i, series) in overlays.iter().enumerate() {
        ly += 18.0;
        let color = OVERLAY_COLORS[i % OVERLAY_COLORS.len()];
        let _ = writeln!(
            svg,
            "<text x=\"{lx:.2}\" y=\"{ly:.2}\" font-size=\"11\" fill=\"{color}\">{}</text>",
            xml_escape(&series.label)
        );
    }

    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
