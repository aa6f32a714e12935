//! Report serialization: CSV, JSON, and static SVG scatter plots of
//! language-model quality against delta log-likelihood.

use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::Measure;
use crate::error::{Error, Result};
use crate::eval::run::{Report, ReportRow};

/// Writes bytes via a temporary file in the target directory followed by an
/// atomic rename, so failed runs never leave partial reports behind.
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d),
        None => tempfile::NamedTempFile::new(),
    }
    .map_err(|e| Error::io(path, e))?;
    std::io::Write::write_all(&mut tmp, content).map_err(|e| Error::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn to_csv(report: &Report) -> String {
    let mut out = String::from(
        "model_id,ppl,ppl_normalized,pnc,pnc_pairs,dll_ffd,dll_gd,dll_td,n_ffd,n_gd,n_td\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.9},{:.6},{},{},{},{},{},{},{}",
            r.model_id,
            r.ppl,
            r.ppl_normalized,
            r.pnc,
            r.pnc_pairs,
            fmt_opt_f64(r.dll_ffd),
            fmt_opt_f64(r.dll_gd),
            fmt_opt_f64(r.dll_td),
            fmt_opt_usize(r.n_ffd),
            fmt_opt_usize(r.n_gd),
            fmt_opt_usize(r.n_td),
        );
    }
    out
}

pub fn to_json(report: &Report) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| Error::Format {
            path: "report.json".into(),
            message: e.to_string(),
        })
        .map(|mut s| {
            s.push('\n');
            s
        })
}

pub fn from_json(text: &str) -> Result<Report> {
    serde_json::from_str(text).map_err(|e| Error::Format {
        path: "report.json".into(),
        message: e.to_string(),
    })
}

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 240.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_B: f64 = 44.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_R: f64 = 16.0;

struct Extent {
    min: f64,
    max: f64,
}

impl Extent {
    fn of(values: impl Iterator<Item = f64>) -> Option<Extent> {
        let values: Vec<f64> = values.filter(|v| v.is_finite()).collect();
        if values.is_empty() {
            return None;
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pad = ((max - min) * 0.08).max(1e-9);
        Some(Extent {
            min: min - pad,
            max: max + pad,
        })
    }

    fn scale(&self, v: f64, lo: f64, hi: f64) -> f64 {
        lo + (v - self.min) / (self.max - self.min) * (hi - lo)
    }
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Two panels per measure: perplexity vs dll and PNC vs dll, one mark per
/// model with the model id as a tooltip title.
pub fn to_svg(report: &Report) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::Argument(
            "cannot plot an empty report; run at least one model".into(),
        ));
    }
    let measures: Vec<Measure> = report
        .measures
        .iter()
        .cloned()
        .filter(|m| report.rows.iter().any(|r| r.dll(*m).is_some()))
        .collect();
    let metrics: [(&str, fn(&ReportRow) -> f64); 2] =
        [("perplexity", |r| r.ppl), ("PNC", |r| r.pnc)];

    let width = 2.0 * PANEL_W;
    let height = measures.len().max(1) as f64 * PANEL_H;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(svg, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");

    for (mi, measure) in measures.iter().enumerate() {
        let points: Vec<&ReportRow> = report
            .rows
            .iter()
            .filter(|r| r.dll(*measure).is_some())
            .collect();
        let y_ext = Extent::of(points.iter().filter_map(|r| r.dll(*measure)))
            .ok_or_else(|| Error::Argument("no finite dll values to plot".into()))?;
        for (ci, (metric_name, metric)) in metrics.iter().enumerate() {
            let x0 = ci as f64 * PANEL_W;
            let y0 = mi as f64 * PANEL_H;
            let plot_l = x0 + MARGIN_L;
            let plot_r = x0 + PANEL_W - MARGIN_R;
            let plot_t = y0 + MARGIN_T;
            let plot_b = y0 + PANEL_H - MARGIN_B;
            let x_ext = Extent::of(points.iter().map(|r| metric(r)))
                .ok_or_else(|| Error::Argument("no finite metric values to plot".into()))?;

            let _ = writeln!(
                svg,
                "<g class=\"panel\" data-measure=\"{measure}\" data-metric=\"{metric_name}\">"
            );
            let _ = writeln!(
                svg,
                "<rect x=\"{plot_l}\" y=\"{plot_t}\" width=\"{}\" height=\"{}\" \
                 fill=\"none\" stroke=\"#444\"/>",
                plot_r - plot_l,
                plot_b - plot_t
            );
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{} ({})</text>",
                (plot_l + plot_r) / 2.0,
                y0 + 16.0,
                escape_xml(metric_name),
                measure
            );
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
                (plot_l + plot_r) / 2.0,
                plot_b + 32.0,
                escape_xml(metric_name)
            );
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" \
                 transform=\"rotate(-90 {} {})\">&#916;LogLik ({measure})</text>",
                x0 + 14.0,
                (plot_t + plot_b) / 2.0,
                x0 + 14.0,
                (plot_t + plot_b) / 2.0
            );
            // axis extent labels
            let _ = writeln!(
                svg,
                "<text x=\"{plot_l}\" y=\"{}\" text-anchor=\"middle\">{:.3}</text>",
                plot_b + 16.0,
                x_ext.min
            );
            let _ = writeln!(
                svg,
                "<text x=\"{plot_r}\" y=\"{}\" text-anchor=\"middle\">{:.3}</text>",
                plot_b + 16.0,
                x_ext.max
            );
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{plot_b}\" text-anchor=\"end\">{:.2}</text>",
                plot_l - 4.0,
                y_ext.min
            );
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.2}</text>",
                plot_l - 4.0,
                plot_t + 4.0,
                y_ext.max
            );
            for r in &points {
                let x = x_ext.scale(metric(r), plot_l, plot_r);
                let y = y_ext.scale(r.dll(*measure).unwrap(), plot_b, plot_t);
                let _ = writeln!(
                    svg,
                    "<circle class=\"mark\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" \
                     fill=\"#2b6cb0\" fill-opacity=\"0.8\">\
                     <title>{}</title></circle>",
                    escape_xml(&r.model_id)
                );
            }
            let _ = writeln!(svg, "</g>");
        }
    }
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "svg" | "svg-scatter" => Ok(ReportFormat::Svg),
            other => Err(Error::Argument(format!("unknown report format {other:?}"))),
        }
    }
}

pub fn emit_report(report: &Report, format: ReportFormat, path: &Path) -> Result<()> {
    let content = match format {
        ReportFormat::Csv => to_csv(report),
        ReportFormat::Json => to_json(report)?,
        ReportFormat::Svg => to_svg(report)?,
    };
    write_atomic(path, content.as_bytes())
}
