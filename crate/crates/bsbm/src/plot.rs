//! SVG line charts from result CSV files.
//!
//! The emitter is dependency-free and deterministic: one panel per facet
//! value, one `<polyline>` per series within a panel, a shared legend, and
//! axis labels taken from the column names.

use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("CSV is empty")]
    Empty,
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("no data rows")]
    NoData,
}

/// Which columns drive the chart.
#[derive(Clone, Debug)]
pub struct PlotSpec {
    pub x: String,
    pub y: String,
    pub series: String,
    pub facet: Option<String>,
}

struct DataRow {
    x: f64,
    y: f64,
    series: String,
    facet: String,
}

const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

const PANEL_W: f64 = 560.0;
const PANEL_H: f64 = 340.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 120.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 52.0;

fn parse_csv_line(line: &str) -> Vec<String> {
    line.split(',').map(|s| s.trim().to_string()).collect()
}

/// Renders the chart; `csv_text` must use the plain comma dialect emitted by
/// the experiment runner.
pub fn render_csv_chart(csv_text: &str, spec: &PlotSpec) -> Result<String, PlotError> {
    let mut lines = csv_text.lines().enumerate();
    let (_, header) = lines.next().ok_or(PlotError::Empty)?;
    let columns = parse_csv_line(header);
    let col = |name: &str| -> Result<usize, PlotError> {
        columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| PlotError::MissingColumn(name.to_string()))
    };
    let xi = col(&spec.x)?;
    let yi = col(&spec.y)?;
    let si = col(&spec.series)?;
    let fi = match &spec.facet {
        Some(f) => Some(col(f)?),
        None => None,
    };

    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = parse_csv_line(line);
        if fields.len() != columns.len() {
            return Err(PlotError::BadRow {
                line: line_no,
                reason: format!("{} fields, header has {}", fields.len(), columns.len()),
            });
        }
        let number = |i: usize, name: &str| -> Result<f64, PlotError> {
            fields[i].parse().map_err(|_| PlotError::BadRow {
                line: line_no,
                reason: format!("column {name:?} is not a number: {:?}", fields[i]),
            })
        };
        rows.push(DataRow {
            x: number(xi, &spec.x)?,
            y: number(yi, &spec.y)?,
            series: fields[si].clone(),
            facet: fi.map_or_else(String::new, |i| fields[i].clone()),
        });
    }
    if rows.is_empty() {
        return Err(PlotError::NoData);
    }

    // Facets in first-appearance order; series order shared across panels.
    let mut facet_order = Vec::new();
    let mut series_order = Vec::new();
    for r in &rows {
        if !facet_order.contains(&r.facet) {
            facet_order.push(r.facet.clone());
        }
        if !series_order.contains(&r.series) {
            series_order.push(r.series.clone());
        }
    }

    let width = MARGIN_L + PANEL_W + MARGIN_R;
    let height = (MARGIN_T + PANEL_H + MARGIN_B) * facet_order.len() as f64;
    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );

    for (panel, facet) in facet_order.iter().enumerate() {
        let panel_rows: Vec<&DataRow> = rows.iter().filter(|r| &r.facet == facet).collect();
        let top = (MARGIN_T + PANEL_H + MARGIN_B) * panel as f64 + MARGIN_T;
        render_panel(
            &mut svg,
            &panel_rows,
            &series_order,
            spec,
            facet,
            MARGIN_L,
            top,
        );
    }
    svg.push_str("</svg>");
    Ok(svg)
}

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 0.01 && a < 10_000.0 {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn render_panel(
    svg: &mut String,
    rows: &[&DataRow],
    series_order: &[String],
    spec: &PlotSpec,
    facet: &str,
    left: f64,
    top: f64,
) {
    let x_min = rows.iter().map(|r| r.x).fold(f64::INFINITY, f64::min);
    let x_max = rows.iter().map(|r| r.x).fold(f64::NEG_INFINITY, f64::max);
    let y_min = rows.iter().map(|r| r.y).fold(f64::INFINITY, f64::min);
    let y_max = rows.iter().map(|r| r.y).fold(f64::NEG_INFINITY, f64::max);
    let (x_min, x_max) = pad_range(x_min, x_max);
    let (y_min, y_max) = pad_range(y_min.min(0.0), y_max);

    let sx = |x: f64| left + (x - x_min) / (x_max - x_min) * PANEL_W;
    let sy = |y: f64| top + PANEL_H - (y - y_min) / (y_max - y_min) * PANEL_H;

    // Frame and title.
    let _ = write!(
        svg,
        r##"<rect x="{left}" y="{top}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#333"/>"##
    );
    if !facet.is_empty() {
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-weight="bold">{} = {}</text>"#,
            left + PANEL_W / 2.0,
            top - 10.0,
            xml_escape(spec.facet.as_deref().unwrap_or("facet")),
            xml_escape(facet)
        );
    }

    // Ticks and grid.
    for t in nice_ticks(x_min, x_max, 6) {
        let x = sx(t);
        let _ = write!(
            svg,
            r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#ddd"/>"##,
            top,
            top + PANEL_H
        );
        let _ = write!(
            svg,
            r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            top + PANEL_H + 16.0,
            fmt_tick(t)
        );
    }
    for t in nice_ticks(y_min, y_max, 5) {
        let y = sy(t);
        let _ = write!(
            svg,
            r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##,
            left + PANEL_W
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }

    // Axis labels from the column names.
    let _ = write!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-weight="bold">{}</text>"#,
        left + PANEL_W / 2.0,
        top + PANEL_H + 38.0,
        xml_escape(&spec.x)
    );
    let _ = write!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-weight="bold" transform="rotate(-90 {} {})">{}</text>"#,
        left - 44.0,
        top + PANEL_H / 2.0,
        left - 44.0,
        top + PANEL_H / 2.0,
        xml_escape(&spec.y)
    );

    // One polyline per series present in this panel, plus the legend.
    let mut legend_slot = 0;
    for (si, series) in series_order.iter().enumerate() {
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| &r.series == series)
            .map(|r| (r.x, r.y))
            .collect();
        if pts.is_empty() {
            continue;
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let color = COLORS[si % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = write!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        let ly = top + 14.0 + 18.0 * legend_slot as f64;
        let lx = left + PANEL_W + 12.0;
        let _ = write!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            xml_escape(series)
        );
        legend_slot += 1;
    }
}

fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
