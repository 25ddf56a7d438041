//! Driving-function statistics and the three field regimes.

use magsle_core::field::FieldSpec;
use magsle_core::interface::{adjacency_counts, LatticePath};
use magsle_core::loewner::{driving_variance as variance_profile, extract_driving_with, DrivingFunction, PeelOptions};
use magsle_core::rn::{discrete_rn_scaled, RnParams};
use magsle_core::stats::{self, Estimate};

use super::{exits, minus_neighbourhood, Run};
use crate::error::Result;
use crate::pool::par_map;
use crate::report::{Check, Report, Table};

/// Driving functions up to capacity `t_max`; failed extractions are counted.
fn driving_ensemble(run: &Run, d: &magsle_core::domain::DiscreteDomain, paths: &[LatticePath], t_max: f64) -> (Vec<DrivingFunction>, usize) {
    let opts = PeelOptions { t_max, ..Default::default() };
    let res = par_map(run.threads, paths, |_, p| extract_driving_with(p, d, opts).map(|x| x.0));
    let failed = res.iter().filter(|r| r.is_err()).count();
    (res.into_iter().flatten().collect(), failed)
}

pub fn driving_variance(run: &Run, r: &mut Report) -> Result<()> {
    let cfg = run.cfg;
    let [lo, hi] = cfg.t_window;
    let ts: Vec<f64> = (0..=25).map(|k| lo + (hi - lo) * k as f64 / 25.0).collect();
    let field = cfg.field.spec();
    let mut tab = Table::new("variance", &["delta", "t", "var", "var_over_t", "n"]);
    let mut fits = Vec::new();
    for (j, &delta) in cfg.meshes.iter().enumerate() {
        let d = run.domain(delta)?;
        let paths = run.interfaces(&d, &field, cfg.samples, run.seed("mesh", j as u64))?;
        let (ens, failed) = driving_ensemble(run, &d, &paths, hi * 1.05);
        let prof = variance_profile(&ens, &ts);
        let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for &(t, v, n) in &prof {
            tab.push(vec![delta, t, v, v / t, n as f64]);
            if n > 2 && v > 0.0 {
                // Var of a sample variance of Gaussians: 2σ⁴/(n − 1)
                x.push(t);
                y.push(v);
                w.push((n as f64 - 1.0) / (2.0 * v * v));
            }
        }
        let fit = stats::fit_line(&x, &y, &w);
        let (origin, origin_se) = stats::fit_through_origin(&x, &y);
        fits.push(serde_json::json!({
            "delta": delta, "slope": fit.slope, "slope_se": fit.slope_se, "intercept": fit.intercept,
            "intercept_se": fit.intercept_se, "residual_rms": fit.residual_rms,
            "origin_slope": origin, "origin_slope_se": origin_se, "curves": ens.len(), "failed": failed,
        }));
        if j + 1 == cfg.meshes.len() {
            let pass = (fit.slope - 3.0).abs() <= 0.3 && failed * 100 <= paths.len();
            r.check(Check::new(
                "kappa",
                pass,
                fit.slope,
                "3 ± 0.3",
                format!(
                    "slope {:.3} ± {:.3}, intercept {:.4}, through-origin {:.3}, δ = 1/{:.0}, {} curves, {} failed",
                    fit.slope,
                    fit.slope_se,
                    fit.intercept,
                    origin,
                    1.0 / delta,
                    ens.len(),
                    failed
                ),
            ));
        }
    }
    r.note("fits", fits);
    r.tolerance("kappa_abs", 0.3);
    r.tables.push(tab);
    Ok(())
}

fn value_at(ens: &[DrivingFunction], t: f64) -> Vec<f64> {
    ens.iter().filter(|d| d.total_capacity >= t).map(|d| d.at(t)).collect()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let k = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[k]
}

pub fn small_field_ks(run: &Run, r: &mut Report) -> Result<()> {
    let cfg = run.cfg;
    let t = cfg.t_probe;
    let field = cfg.field.spec();
    let mut ladder = Table::new("ks", &["delta", "d_stat", "p_value", "lattice_field", "continuum_h"]);
    let mut last = None;
    for (j, &delta) in cfg.meshes.iter().enumerate() {
        let d = run.domain(delta)?;
        let zero = run.interfaces(&d, &FieldSpec::zero(), cfg.samples, run.seed("zero", j as u64))?;
        let small = run.interfaces(&d, &field, cfg.samples, run.seed("field", j as u64))?;
        let (e0, f0) = driving_ensemble(run, &d, &zero, t * 1.05);
        let (e1, f1) = driving_ensemble(run, &d, &small, t * 1.05);
        let (a, b) = (value_at(&e0, t), value_at(&e1, t));
        let (dstat, p) = stats::ks_two_sample(&a, &b);
        // h·g(δ), the intensity the continuum limit sees at this mesh
        let hg = field.h.eval([0.0, 0.0]) * field.modifier.eval(delta);
        ladder.push(vec![delta, dstat, p, field.at([0.0, 0.0], delta), hg]);
        last = Some((a, b, dstat, p, f0 + f1, delta));
    }
    let (mut a, mut b, dstat, p, failed, delta) = last.expect("validated: at least one mesh");
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut tab = Table::new("quantiles", &["q", "w_zero", "w_field"]);
    for k in 1..20 {
        let q = k as f64 / 20.0;
        tab.push(vec![q, quantile(&a, q), quantile(&b, q)]);
    }
    r.tables.push(ladder);
    r.tables.push(tab);
    r.note("var_zero", stats::variance(&a));
    r.note("var_field", stats::variance(&b));
    r.note("mean_zero", stats::mean(&a));
    r.note("mean_field", stats::mean(&b));
    r.note("failed", failed);
    r.tolerance("ks_alpha", 0.01);
    r.check(Check::new(
        "ks_small_field",
        p > 0.01,
        p,
        "p > 0.01",
        format!("D = {dstat:.4}, p = {p:.3}, W at t = {t}, {} vs {} curves, δ = 1/{:.0}", a.len(), b.len(), 1.0 / delta),
    ));
    Ok(())
}

/// Checks that successive estimates fall, each drop exceeding `sigmas`
/// combined standard errors.
fn decreasing_checks(r: &mut Report, name: &str, labels: &[String], est: &[Estimate], sigmas: f64) {
    for k in 1..est.len() {
        let (a, b) = (est[k - 1], est[k]);
        let gap = a.value - b.value;
        let s = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        let z = if s > 0.0 { gap / s } else if gap > 0.0 { f64::INFINITY } else { 0.0 };
        r.check(Check::new(
            &format!("{name}_{}", k),
            gap > 0.0 && z > sigmas,
            z,
            if sigmas > 0.0 { format!("drop > {sigmas}σ") } else { "drop > 0".into() },
            format!("{} → {}: {:.4} ± {:.4} → {:.4} ± {:.4}", labels[k - 1], labels[k], a.value, a.stderr, b.value, b.stderr),
        ));
    }
}

fn mesh_label(d: f64) -> String {
    format!("1/{:.0}", 1.0 / d)
}

pub fn large_field_degeneration(run: &Run, r: &mut Report) -> Result<()> {
    let cfg = run.cfg;
    let field = cfg.field.spec();
    let mut tab = Table::new("exit", &["delta", "p_exit", "stderr", "wilson_lo", "wilson_hi", "lattice_field"]);
    let mut est = Vec::new();
    for (j, &delta) in cfg.meshes.iter().enumerate() {
        let d = run.domain(delta)?;
        let near = minus_neighbourhood(&d, cfg.eta);
        let paths = run.interfaces(&d, &field, cfg.samples, run.seed("mesh", j as u64))?;
        let k = paths.iter().filter(|p| exits(p, &near)).count();
        let e = stats::proportion(k, paths.len());
        let (lo, hi) = stats::wilson(k, paths.len(), 1.96);
        tab.push(vec![delta, e.value, e.stderr, lo, hi, field.at([0.0, 0.0], delta)]);
        est.push(e);
    }
    let labels: Vec<String> = cfg.meshes.iter().map(|&d| mesh_label(d)).collect();
    decreasing_checks(r, "exit_decreases", &labels, &est, 1.0);
    r.tolerance("gap_sigmas", 1.0);
    r.note("eta", cfg.eta);
    r.tables.push(tab);
    Ok(())
}

pub fn interface_magnetization(run: &Run, r: &mut Report) -> Result<()> {
    let cfg = run.cfg;
    let field = cfg.field.spec();
    let mut tab = Table::new("magnetization", &["delta", "mean_abs_scaled_diff", "stderr", "mean_v"]);
    let mut est = Vec::new();
    for (j, &delta) in cfg.meshes.iter().enumerate() {
        let d = run.domain(delta)?;
        let paths = run.interfaces(&d, &field, cfg.samples, run.seed("mesh", j as u64))?;
        let xs: Vec<f64> = paths.iter().map(|p| adjacency_counts(p).2.abs()).collect();
        let nv: Vec<f64> = paths.iter().map(|p| (p.v_left.len() + p.v_right.len()) as f64).collect();
        let e = stats::jackknife(&xs, 20.min(xs.len()), stats::mean);
        tab.push(vec![delta, e.value, e.stderr, stats::mean(&nv)]);
        est.push(e);
    }
    let labels: Vec<String> = cfg.meshes.iter().map(|&d| mesh_label(d)).collect();
    decreasing_checks(r, "magnetization_decreases", &labels, &est, 0.0);
    r.tables.push(tab);
    Ok(())
}

/// Self-normalised importance estimate Σ w·1_exit / Σ w with a jackknife
/// error over curves, and the effective sample size.
fn weighted_exit(w: &[f64], e: &[bool]) -> (Estimate, f64) {
    let ratio = |idx: &[usize]| {
        let (num, den) = idx.iter().fold((0.0, 0.0), |(n, s), &i| (n + if e[i] { w[i] } else { 0.0 }, s + w[i]));
        num / den
    };
    let est = stats::jackknife_idx(w.len(), 20.min(w.len()), ratio);
    let (s1, s2) = w.iter().fold((0.0, 0.0), |(a, b), x| (a + x, b + x * x));
    (est, s1 * s1 / s2)
}

pub fn h_limit_trend(run: &Run, r: &mut Report) -> Result<()> {
    let cfg = run.cfg;
    let delta = cfg.finest();
    let d = run.domain(delta)?;
    let near = minus_neighbourhood(&d, cfg.eta);
    let paths = run.interfaces(&d, &FieldSpec::zero(), cfg.samples, run.seed("zero", 0))?;
    let e: Vec<bool> = paths.iter().map(|p| exits(p, &near)).collect();
    let unit = cfg.field.spec_at(1.0);
    let p = RnParams { order: cfg.order, n_mc: cfg.n_mc, n_samples: cfg.conditional_samples, seed: run.seed("rn", 0) };
    let weights = par_map(run.threads, &paths, |_, path| discrete_rn_scaled(path, &d, &unit, &cfg.h_values, &p));
    let weights: Vec<Vec<f64>> = weights.into_iter().map(|w| w.map(|v| v.iter().map(|x| x.value.value).collect())).collect::<std::result::Result<_, _>>()?;
    let mut tab = Table::new("weighted_exit", &["h", "p_exit", "stderr", "ess"]);
    let k = e.iter().filter(|&&x| x).count();
    let base = stats::proportion(k, e.len());
    tab.push(vec![0.0, base.value, base.stderr, e.len() as f64]);
    let mut est = Vec::new();
    for (m, &h) in cfg.h_values.iter().enumerate() {
        let w: Vec<f64> = weights.iter().map(|row| row[m]).collect();
        let (x, ess) = weighted_exit(&w, &e);
        tab.push(vec![h, x.value, x.stderr, ess]);
        est.push(x);
    }
    let labels: Vec<String> = cfg.h_values.iter().map(|h| format!("h={h}")).collect();
    decreasing_checks(r, "weighted_exit_decreases", &labels, &est, 0.0);
    r.note("delta", delta);
    r.note("eta", cfg.eta);
    r.tables.push(tab);
    Ok(())
}
