//! Markdown table, CSV records and hand-written SVG figures.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::{EvalSummary, GapRecord};
use crate::opf::FormulationKind;

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width histogram over the range of `values`; the maximum lands in the last bin.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let (lo, hi) = range(values.iter().copied());
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        counts[bin_index(v, lo, hi, bins)] += 1;
    }
    Histogram { edges, counts }
}

fn bin_index(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    (((v - lo) / (hi - lo) * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1e-300) {
        let pad = (lo.abs() * 1e-3).max(1e-9);
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Named output files of one report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub files: Vec<(String, String)>,
}

impl ReportBundle {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            std::fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

fn formulation_name(f: FormulationKind) -> &'static str {
    match f {
        FormulationKind::Dc => "DC",
        FormulationKind::Soc => "SOC",
        FormulationKind::Ac => "AC",
    }
}

fn table(summaries: &[EvalSummary]) -> String {
    let mut s = String::from("| System | OPF |");
    let mut rule = String::from("|---|---|");
    for m in summaries {
        let _ = write!(s, " {0} mean gap (%) | {0} worst gap (%) |", m.model);
        rule.push_str("---:|---:|");
    }
    s.push('\n');
    s.push_str(&rule);
    let first = &summaries[0];
    let _ = write!(s, "\n| {} | {} |", first.system, formulation_name(first.formulation));
    for m in summaries {
        let _ = write!(s, " {:.2} | {:.2} |", 100.0 * m.mean_gap, 100.0 * m.worst_gap);
    }
    s.push('\n');
    s
}

fn markdown(summaries: &[EvalSummary]) -> String {
    let mut s = String::from("# Optimality gaps\n\n");
    s.push_str(&table(summaries));
    s.push('\n');
    for m in summaries {
        let _ = writeln!(
            s,
            "- {}: {} test samples, {} gaps below the floor {:e} used in the geometric mean",
            m.model, m.count, m.floored, m.floor
        );
    }
    s
}

fn csv(records: &[GapRecord]) -> String {
    let mut s = String::from("id,z_true,z_pred,gap_signed,gap_abs,total_load\n");
    for r in records {
        let _ = writeln!(s, "{},{:e},{:e},{:e},{:e},{:e}", r.id, r.z_true, r.z_pred, r.gap_signed, r.gap_abs, r.total_load);
    }
    s
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n",
        WIDTH / 2.0
    )
}

fn axes(s: &mut String, x: (f64, f64), y: (f64, f64), xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(s, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>");
    let _ = writeln!(s, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>");
    let text = |s: &mut String, x: f64, y: f64, anchor: &str, t: String| {
        let _ = writeln!(s, "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"11\">{t}</text>");
    };
    text(s, x0, y0 + 16.0, "start", format!("{:.4e}", x.0));
    text(s, x1, y0 + 16.0, "end", format!("{:.4e}", x.1));
    text(s, x0 - 4.0, y0, "end", format!("{:.3e}", y.0));
    text(s, x0 - 4.0, y1 + 4.0, "end", format!("{:.3e}", y.1));
    text(s, WIDTH / 2.0, HEIGHT - 12.0, "middle", xlabel.to_string());
    text(s, 14.0, HEIGHT / 2.0, "middle", ylabel.to_string());
}

fn legend(s: &mut String, summaries: &[EvalSummary]) {
    for (k, m) in summaries.iter().enumerate() {
        let y = MARGIN + 14.0 * k as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            WIDTH - MARGIN - 90.0,
            y,
            COLORS[k % COLORS.len()],
            WIDTH - MARGIN - 75.0,
            y + 9.0,
            m.model
        );
    }
}

fn hist_svg(summaries: &[EvalSummary], records: &[Vec<GapRecord>]) -> String {
    const BINS: usize = 40;
    let all: Vec<f64> = records.iter().flatten().map(|r| r.gap_signed).collect();
    let (lo, hi) = range(all.iter().copied());
    let counts: Vec<Vec<usize>> = records
        .iter()
        .map(|rs| {
            let mut c = vec![0; BINS];
            for r in rs {
                c[bin_index(r.gap_signed, lo, hi, BINS)] += 1;
            }
            c
        })
        .collect();
    let top = counts.iter().flatten().copied().max().unwrap_or(1).max(1) as f64;
    let mut s = svg_open("Relative gap (z̃ − z*)/|z*|");
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let bar = plot_w / BINS as f64;
    for (k, series) in counts.iter().enumerate() {
        for (b, &c) in series.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let height = plot_h * c as f64 / top;
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\" fill-opacity=\"0.5\"/>",
                MARGIN + bar * b as f64,
                HEIGHT - MARGIN - height,
                bar,
                height,
                COLORS[k % COLORS.len()]
            );
        }
    }
    axes(&mut s, (lo, hi), (0.0, top), "signed relative gap", "count");
    legend(&mut s, summaries);
    s.push_str("</svg>\n");
    s
}

fn scatter_svg(summaries: &[EvalSummary], records: &[Vec<GapRecord>]) -> String {
    let (xl, xh) = range(records.iter().flatten().map(|r| r.total_load));
    let (yl, yh) = range(records.iter().flatten().map(|r| r.gap_signed));
    let mut s = svg_open("Relative gap against total load");
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    for (k, rs) in records.iter().enumerate() {
        for r in rs {
            let cx = MARGIN + plot_w * (r.total_load - xl) / (xh - xl);
            let cy = HEIGHT - MARGIN - plot_h * (r.gap_signed - yl) / (yh - yl);
            let _ = writeln!(s, "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"2\" fill=\"{}\" fill-opacity=\"0.6\"/>", COLORS[k % COLORS.len()]);
        }
    }
    axes(&mut s, (xl, xh), (yl, yh), "total active load (p.u.)", "signed relative gap");
    legend(&mut s, summaries);
    s.push_str("</svg>\n");
    s
}

/// Renders `report.md`, one CSV per model (`gaps.csv` for the first, then
/// `gaps_baseline.csv`, `gaps_baseline2.csv`, ...), `hist.svg` and `scatter.svg`.
/// `records[k]` belongs to `summaries[k]`.
///
/// # Panics
///
/// If `summaries` is empty or the two slices differ in length.
pub fn render_report(summaries: &[EvalSummary], records: &[Vec<GapRecord>]) -> ReportBundle {
    assert!(!summaries.is_empty(), "at least one summary");
    assert_eq!(summaries.len(), records.len(), "one record list per summary");
    let mut files = vec![("report.md".to_string(), markdown(summaries))];
    for (k, rs) in records.iter().enumerate() {
        let name = match k {
            0 => "gaps.csv".to_string(),
            1 => "gaps_baseline.csv".to_string(),
            _ => format!("gaps_baseline{k}.csv"),
        };
        files.push((name, csv(rs)));
    }
    files.push(("hist.svg".into(), hist_svg(summaries, records)));
    files.push(("scatter.svg".into(), scatter_svg(summaries, records)));
    ReportBundle { files }
}
