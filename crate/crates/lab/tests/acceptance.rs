//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! `cargo test -p magsle-lab --test acceptance` runs all ten;
//! `cargo test -p magsle-lab --test acceptance -- 3 7` runs a subset.
//! Reports land in `<target>/tmp/acceptance/<experiment>/`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use magsle_lab::config::ExperimentConfig;
use magsle_lab::plot::emit_plotdata;
use magsle_lab::pool::resolve_threads;
use magsle_lab::report::{write_report, Manifest, Report};
use magsle_lab::run_experiment;

const CONFIGS: &[(&str, &str)] = &[
    ("es_exact", include_str!("../configs/es_exact.toml")),
    ("loewner_oracles", include_str!("../configs/loewner_oracles.toml")),
    ("kernel_oracles", include_str!("../configs/kernel_oracles.toml")),
    ("covariance_check", include_str!("../configs/covariance_check.toml")),
    ("arm_exponents", include_str!("../configs/arm_exponents.toml")),
    ("driving_variance", include_str!("../configs/driving_variance.toml")),
    ("rn_importance", include_str!("../configs/rn_importance.toml")),
    ("interface_magnetization", include_str!("../configs/interface_magnetization.toml")),
    ("large_field_degeneration", include_str!("../configs/large_field_degeneration.toml")),
    ("small_field_ks", include_str!("../configs/small_field_ks.toml")),
    ("h_limit_trend", include_str!("../configs/h_limit_trend.toml")),
    ("inequality_suite", include_str!("../configs/inequality_suite.toml")),
];

struct Criterion {
    id: u32,
    title: &'static str,
    /// (experiment, check-name prefixes; empty means every check)
    parts: &'static [(&'static str, &'static [&'static str])],
    /// Wall-clock budget per experiment, seconds.
    budget: f64,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, title: "ES coupling with field matches the exact Ising law", parts: &[("es_exact", &["es_pipeline_tv", "es_literal_tv"])], budget: 60.0 },
    Criterion { id: 2, title: "cosh-reweighted FK law equals the ghost coupling's edge marginal", parts: &[("es_exact", &["cosh_reweighting"])], budget: 60.0 },
    Criterion { id: 3, title: "Loewner oracles", parts: &[("loewner_oracles", &[])], budget: 60.0 },
    Criterion { id: 4, title: "two-point kernel, disk closed forms, Koebe", parts: &[("kernel_oracles", &[])], budget: 60.0 },
    Criterion { id: 5, title: "conformal covariance of kernels and series", parts: &[("covariance_check", &[])], budget: 1800.0 },
    Criterion { id: 6, title: "one-arm 1/8 and two-arm 7/8 exponents on 128²", parts: &[("arm_exponents", &[])], budget: 1800.0 },
    Criterion { id: 7, title: "Var(W_t)/t slope equals κ = 3", parts: &[("driving_variance", &[])], budget: 2700.0 },
    Criterion { id: 8, title: "RN normalisation and rn_full/discrete_rn agreement", parts: &[("rn_importance", &[])], budget: 1800.0 },
    Criterion {
        id: 9,
        title: "regime trends",
        parts: &[("interface_magnetization", &[]), ("large_field_degeneration", &[]), ("small_field_ks", &[]), ("h_limit_trend", &[])],
        budget: 1800.0,
    },
    Criterion { id: 10, title: "statistical inequality suite", parts: &[("inequality_suite", &[])], budget: 900.0 },
];

fn out_root() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn run(id: &str, threads: usize) -> Result<(Report, f64), String> {
    let text = CONFIGS.iter().find(|c| c.0 == id).ok_or(format!("no config for {id}"))?.1;
    let cfg = ExperimentConfig::from_toml(text).map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let r = run_experiment(&cfg, threads).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    let dir = out_root().join(id);
    let m = Manifest::for_report(&r, Vec::new(), threads, secs);
    write_report(&dir, &r, &m).map_err(|e| e.to_string())?;
    emit_plotdata(&r, &dir).map_err(|e| e.to_string())?;
    Ok((r, secs))
}

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let threads = resolve_threads(None);
    let mut cache: BTreeMap<&str, Result<(Report, f64), String>> = BTreeMap::new();
    let mut lines = Vec::new();
    let mut all = true;
    for c in CRITERIA.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let mut pass = true;
        let mut notes = Vec::new();
        let mut secs = 0.0;
        for &(exp, prefixes) in c.parts {
            let res = cache.entry(exp).or_insert_with(|| run(exp, threads));
            match res {
                Err(e) => {
                    pass = false;
                    notes.push(format!("{exp}: error {e}"));
                }
                Ok((r, t)) => {
                    secs += *t;
                    if *t > c.budget {
                        pass = false;
                        notes.push(format!("{exp}: {t:.0} s over the {:.0} s budget", c.budget));
                    }
                    let checks: Vec<_> = r.checks.iter().filter(|k| prefixes.is_empty() || prefixes.iter().any(|p| k.name.starts_with(p))).collect();
                    if checks.is_empty() {
                        pass = false;
                        notes.push(format!("{exp}: no checks"));
                    }
                    for k in checks {
                        pass &= k.pass;
                        notes.push(format!("{}{}={:.4e} [{}]", if k.pass { "" } else { "FAILED " }, k.name, k.value, k.target));
                        if !k.pass {
                            notes.push(format!("  ({})", k.detail));
                        }
                    }
                }
            }
        }
        all &= pass;
        let line = format!("criterion {:>2} {} {} ({secs:.1} s): {}", c.id, if pass { "PASS" } else { "FAIL" }, c.title, notes.join("; "));
        println!("{line}");
        lines.push(line);
    }
    println!();
    for l in &lines {
        println!("{}", &l[..l.find(':').unwrap_or(l.len())]);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
