//! Gnuplot data and a small SVG rendering of a report's tables.
//!
//! Each table becomes one `.dat` block (select with `index n` in gnuplot).
//! Output depends only on the report, so equal reports give equal bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::report::{Report, Table};

pub fn dat_text(r: &Report) -> String {
    let mut s = format!("# {} seed={} config={}\n", r.experiment, r.seed, r.config_hash);
    for (k, t) in r.tables.iter().enumerate() {
        if k > 0 {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# [{k}] {}", t.name);
        let _ = writeln!(s, "# {}", t.columns.join(" "));
        for row in &t.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.12e}")).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
    }
    s
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const M: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Column 0 against column 1 of every table; a table whose last column is
/// named `fit_residual` also gets the fitted line (y − residual).
pub fn svg_text(r: &Report) -> String {
    let pts: Vec<(usize, f64, f64)> = r
        .tables
        .iter()
        .enumerate()
        .flat_map(|(k, t)| t.rows.iter().filter(|row| row.len() >= 2).map(move |row| (k, row[0], row[1])))
        .filter(|p| p.1.is_finite() && p.2.is_finite())
        .collect();
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n");
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{M}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{}</text>", r.experiment);
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(_, x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, b + 0.5) };
    let ((x0, x1), (y0, y1)) = (pad(x0, x1), pad(y0, y1));
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let _ = writeln!(s, "<path d=\"M{M} {} H{} M{M} {} V{M}\" stroke=\"black\" fill=\"none\"/>", H - M, W - M, H - M);
    for (v, x, y, anchor) in [(x0, sx(x0), H - M + 18.0, "start"), (x1, sx(x1), H - M + 18.0, "end")] {
        let _ = writeln!(s, "<text x=\"{x:.1}\" y=\"{y:.1}\" font-size=\"11\" text-anchor=\"{anchor}\">{v:.4}</text>");
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{y:.1}\" font-size=\"11\" text-anchor=\"end\">{v:.4}</text>", M - 4.0);
    }
    for (k, t) in r.tables.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        for &(_, x, y) in pts.iter().filter(|p| p.0 == k) {
            let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{c}\"/>", sx(x), sy(y));
        }
        if let Some(line) = fit_line_of(t) {
            let d: Vec<String> = line.iter().map(|&(x, y)| format!("{:.2} {:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(s, "<polyline points=\"{}\" stroke=\"{c}\" fill=\"none\"/>", d.join(" "));
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"{c}\" text-anchor=\"end\">{} ({} vs {})</text>",
            W - M,
            M - 20.0 + 14.0 * k as f64,
            t.name,
            t.columns.get(1).map_or("", |c| c),
            t.columns.first().map_or("", |c| c)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fit_line_of(t: &Table) -> Option<Vec<(f64, f64)>> {
    if t.columns.last().map(|c| c.as_str()) != Some("fit_residual") || t.columns.len() < 3 {
        return None;
    }
    let r = t.columns.len() - 1;
    Some(t.rows.iter().filter(|row| row.iter().all(|x| x.is_finite())).map(|row| (row[0], row[1] - row[r])).collect())
}

/// Write `<experiment>.dat` and `<experiment>.svg` into `dir`.
pub fn emit_plotdata(r: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let name = if r.experiment.is_empty() { "report" } else { &r.experiment };
    let dat = dir.join(format!("{name}.dat"));
    let svg = dir.join(format!("{name}.svg"));
    fs::write(&dat, dat_text(r))?;
    fs::write(&svg, svg_text(r))?;
    Ok(vec![dat, svg])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_header_only() {
        let r = Report::new("empty", "h", 0);
        let t = dat_text(&r);
        assert!(t.lines().all(|l| l.starts_with('#')));
        assert_eq!(t.lines().count(), 1);
    }

    #[test]
    fn exponent_columns_and_determinism() {
        let mut r = Report::new("arms", "h", 1);
        let mut t = Table::new("one_arm", &["log_scale", "log_prob", "fit_residual"]);
        t.push(vec![0.0, -0.1, 0.01]);
        t.push(vec![1.0, -0.3, -0.01]);
        r.tables.push(t);
        let a = dat_text(&r);
        assert!(a.contains("# log_scale log_prob fit_residual"));
        assert_eq!(a.lines().filter(|l| !l.starts_with('#')).count(), 2);
        assert_eq!(a, dat_text(&r.clone()));
        assert_eq!(svg_text(&r), svg_text(&r.clone()));
        assert!(svg_text(&r).contains("<polyline"));
    }
}
