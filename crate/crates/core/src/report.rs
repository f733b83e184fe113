//! CSV, SVG and plain-text summaries of experiment results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::experiment::{sort_results, CellResult, Method};

pub const CSV_HEADER: &str =
    "method,epsilon,seed,horizon,instance,coverage,mean_lower,mean_upper,mean_length,miss_count,noncontiguous_count";

/// Results as CSV text, rows sorted by `(method, ε, seed)`.
pub fn csv_string(results: &[CellResult]) -> String {
    let mut rows = results.to_vec();
    sort_results(&mut rows);
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &rows {
        let _ = writeln!(
            out,
            "{},{:.6},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{}",
            r.method.name(),
            r.epsilon,
            r.seed,
            r.horizon,
            r.instance,
            r.coverage,
            r.mean_lower,
            r.mean_upper,
            r.mean_length,
            r.miss_count,
            r.noncontiguous_count
        );
    }
    out
}

pub fn emit_csv(results: &[CellResult], path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(results))?;
    Ok(())
}

/// Seed-averaged statistics of one `(method, ε)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub coverage: f64,
    pub mean_lower: f64,
    pub mean_upper: f64,
    pub mean_length: f64,
    pub runs: usize,
}

fn finite_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.filter(|v| v.is_finite()).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Averages over seeds, keyed by method and the ε value's bit pattern order.
pub fn aggregate(results: &[CellResult]) -> BTreeMap<Method, Vec<(f64, Aggregate)>> {
    let mut groups: BTreeMap<Method, Vec<(f64, Vec<&CellResult>)>> = BTreeMap::new();
    for r in results {
        let per_method = groups.entry(r.method).or_default();
        match per_method.iter_mut().find(|(e, _)| *e == r.epsilon) {
            Some((_, v)) => v.push(r),
            None => per_method.push((r.epsilon, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(m, mut cells)| {
            cells.sort_by(|a, b| a.0.total_cmp(&b.0));
            let aggs = cells
                .into_iter()
                .map(|(eps, rs)| {
                    let agg = Aggregate {
                        coverage: finite_mean(rs.iter().map(|r| r.coverage)),
                        mean_lower: finite_mean(rs.iter().map(|r| r.mean_lower)),
                        mean_upper: finite_mean(rs.iter().map(|r| r.mean_upper)),
                        mean_length: finite_mean(rs.iter().map(|r| r.mean_length)),
                        runs: rs.len(),
                    };
                    (eps, agg)
                })
                .collect();
            (m, aggs)
        })
        .collect()
}

/// Markdown tables of seed-averaged coverage and interval length.
pub fn summary_table(results: &[CellResult]) -> String {
    let agg = aggregate(results);
    let mut eps: Vec<f64> = results.iter().map(|r| r.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let mut out = String::new();
    for (title, pick) in [
        ("coverage", (|a: &Aggregate| a.coverage) as fn(&Aggregate) -> f64),
        ("mean interval length", |a: &Aggregate| a.mean_length),
    ] {
        let _ = writeln!(out, "{title}\n");
        let _ = write!(out, "| method |");
        eps.iter().for_each(|e| {
            let _ = write!(out, " ε={e} |");
        });
        let _ = write!(out, "\n|---|");
        eps.iter().for_each(|_| out.push_str("---|"));
        out.push('\n');
        for (m, cells) in &agg {
            let _ = write!(out, "| {} |", m.name());
            for e in &eps {
                match cells.iter().find(|(ce, _)| ce == e) {
                    Some((_, a)) => {
                        let _ = write!(out, " {:.4} |", pick(a));
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn new(xs: &[f64], ys: &[f64]) -> Self {
        let span = |v: &[f64]| {
            let lo = v.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-9 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = (hi - lo) * 0.05;
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = span(xs);
        let (y0, y1) = span(ys);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn svg_open(title: &str, axes: &Axes, xlabel: &str, ylabel: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let fx = axes.x0 + (axes.x1 - axes.x0) * i as f64 / 4.0;
        let fy = axes.y0 + (axes.y1 - axes.y0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.2}</text>"#, axes.px(fx), b + 16.0, fx);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.2}</text>"#, l - 4.0, axes.py(fy) + 4.0, fy);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
    s
}

fn legend(s: &mut String, methods: &[Method]) {
    for (i, m) in methods.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let x = WIDTH - MARGIN - 110.0;
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{c}"/>"#, y - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, m.name());
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Seed-averaged coverage against ε, one line per method, with a dashed
/// reference line at `1 − α`.
pub fn coverage_svg(results: &[CellResult], alpha: f64, title: &str) -> String {
    let agg = aggregate(results);
    let xs: Vec<f64> = results.iter().map(|r| r.epsilon).collect();
    let mut ys: Vec<f64> = agg.values().flatten().map(|(_, a)| a.coverage).collect();
    ys.push(1.0 - alpha);
    ys.push(1.0);
    let axes = Axes::new(&xs, &ys);
    let mut s = svg_open(title, &axes, "target epsilon", "coverage");
    let target = axes.py(1.0 - alpha);
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{target:.1}" x2="{}" y2="{target:.1}" stroke="black" stroke-dasharray="6 4"/>"#,
        WIDTH - MARGIN
    );
    let methods: Vec<Method> = agg.keys().copied().collect();
    for (i, (_, cells)) in agg.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let pts: Vec<String> = cells
            .iter()
            .filter(|(_, a)| a.coverage.is_finite())
            .map(|(e, a)| format!("{:.1},{:.1}", axes.px(*e), axes.py(a.coverage)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, pts.join(" "));
        for p in &pts {
            let (x, y) = p.split_once(',').expect("point");
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{c}"/>"#);
        }
    }
    legend(&mut s, &methods);
    s.push_str("</svg>\n");
    s
}

/// Seed-averaged `[mean_lower, mean_upper]` whiskers per method against ε.
pub fn extent_svg(results: &[CellResult], title: &str) -> String {
    let agg = aggregate(results);
    let xs: Vec<f64> = results.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = agg.values().flatten().flat_map(|(_, a)| [a.mean_lower, a.mean_upper]).collect();
    let mut eps = xs.clone();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let step = eps.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let step = if step.is_finite() { step } else { 1.0 };
    let axes = Axes::new(&xs, &ys);
    let mut s = svg_open(title, &axes, "target epsilon", "mean interval extent");
    let methods: Vec<Method> = agg.keys().copied().collect();
    let k = methods.len().max(1) as f64;
    let slot = axes.px(axes.x0 + step) - axes.px(axes.x0);
    let slot = (slot * 0.6 / k).clamp(3.0, 30.0);
    for (i, (_, cells)) in agg.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        for (e, a) in cells.iter().filter(|(_, a)| a.mean_lower.is_finite() && a.mean_upper.is_finite()) {
            let x = axes.px(*e) + (i as f64 - (k - 1.0) / 2.0) * slot;
            let (top, bottom) = (axes.py(a.mean_upper), axes.py(a.mean_lower));
            let half = slot * 0.35;
            let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{top:.1}" x2="{x:.1}" y2="{bottom:.1}" stroke="{c}" stroke-width="2"/>"#);
            for y in [top, bottom] {
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{c}" stroke-width="2"/>"#,
                    x - half,
                    x + half
                );
            }
        }
    }
    legend(&mut s, &methods);
    s.push_str("</svg>\n");
    s
}

/// Writes one coverage and one extent chart per `(horizon, instance)`;
/// returns the written paths.
pub fn emit_plots(results: &[CellResult], alpha: f64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut groups: BTreeMap<(usize, String), Vec<CellResult>> = BTreeMap::new();
    for r in results {
        groups.entry((r.horizon, r.instance.clone())).or_default().push(r.clone());
    }
    let mut written = Vec::new();
    for ((h, inst), rs) in groups {
        let stem = format!("{inst}_h{h}");
        let cov = out_dir.join(format!("coverage_{stem}.svg"));
        std::fs::write(&cov, coverage_svg(&rs, alpha, &format!("Coverage, {inst}, H={h}")))?;
        let ext = out_dir.join(format!("intervals_{stem}.svg"));
        std::fs::write(&ext, extent_svg(&rs, &format!("Interval extents, {inst}, H={h}")))?;
        written.push(cov);
        written.push(ext);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(method: Method, eps: f64, seed: usize) -> CellResult {
        CellResult {
            method,
            epsilon: eps,
            seed,
            horizon: 4,
            instance: "t".into(),
            coverage: 0.9,
            mean_lower: -1.5,
            mean_upper: 2.25,
            mean_length: 3.75,
            miss_count: 2,
            noncontiguous_count: 0,
        }
    }

    #[test]
    fn empty_is_header_only() {
        assert_eq!(csv_string(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn single_row_format() {
        let s = csv_string(&[cell(Method::Pinball, 0.4, 0)]);
        assert_eq!(s.lines().count(), 2);
        assert!(s.ends_with('\n'));
        assert_eq!(s.lines().nth(1).unwrap(), "pinball,0.400000,0,4,t,0.900000,-1.500000,2.250000,3.750000,2,0");
    }

    #[test]
    fn rows_sorted() {
        let s = csv_string(&[cell(Method::StandardCp, 0.2, 0), cell(Method::Pinball, 0.4, 1), cell(Method::Pinball, 0.4, 0)]);
        let methods: Vec<&str> = s.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(methods, ["pinball", "pinball", "standard_cp"]);
        assert!(s.lines().nth(1).unwrap().contains(",0,4,"));
    }

    #[test]
    fn degenerate_chart_renders() {
        let r = [cell(Method::Pinball, 0.4, 0)];
        let svg = coverage_svg(&r, 0.1, "x");
        assert!(svg.contains("stroke-dasharray"));
        assert!(!svg.contains("NaN"));
        assert!(!extent_svg(&r, "x").contains("NaN"));
    }

    #[test]
    fn summary_lists_methods() {
        let t = summary_table(&[cell(Method::Pinball, 0.4, 0), cell(Method::QisBootstrap, 0.4, 0)]);
        assert!(t.contains("| pinball | 0.9000 |"));
        assert!(t.contains("qis_bootstrap"));
    }
}
