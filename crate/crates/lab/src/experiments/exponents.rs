//! Arm exponents and the C_σ calibration.

use magsle_core::correlation::{estimate_c_sigma, C_SIGMA_REFERENCE};
use magsle_core::interface::{one_arm_estimate, two_arm_estimate, ArmFit};
use magsle_core::ising::BoundaryCondition;

use super::Run;
use crate::error::Result;
use crate::report::{Check, Report, Table};

/// Two-arm probes: a 5×5 block spaced 4 sites apart around the centre.
const TWO_ARM_PROBES: (i32, i32) = (2, 4);
/// One-arm probes: the (2·8+1)² block around the centre.
const ONE_ARM_BLOCK: i32 = 8;
/// SLE₃ interior two-arm exponent (16 − (4 − κ)²)/(8κ) at κ = 3.
const TWO_ARM_SLE3: f64 = 5.0 / 8.0;

fn loglog_table(name: &str, fit: &ArmFit) -> Table {
    let mut t = Table::new(name, &["log_scale", "log_prob", "fit_residual"]);
    for (&x, &p) in fit.radii.iter().zip(&fit.probs) {
        if x > 0.0 && p > 0.0 {
            let (lx, lp) = (x.ln(), p.ln());
            t.push(vec![lx, lp, lp - (fit.intercept - fit.exponent * lx)]);
        }
    }
    t
}

pub fn arm_exponents(run: &Run, r: &mut Report) -> Result<()> {
    let cfg = run.cfg;
    let d = run.domain(cfg.meshes[0])?;
    let one = one_arm_estimate(&d, &cfg.radii, ONE_ARM_BLOCK, cfg.samples, run.seed("one_arm", 0))?;
    let outer: Vec<i32> = cfg.ratios.iter().map(|q| q * cfg.inner_radius).collect();
    let two = two_arm_estimate(&d, BoundaryCondition::Dobrushin, cfg.inner_radius, &outer, TWO_ARM_PROBES, cfg.samples, run.seed("two_arm", 0))?;
    r.tables.push(loglog_table("one_arm", &one));
    r.tables.push(loglog_table("two_arm", &two));
    r.tolerance("one_arm_abs", 0.02);
    r.tolerance("two_arm_abs", 0.1);
    r.check(Check::new(
        "one_arm_exponent",
        (one.exponent - 0.125).abs() <= 0.02,
        one.exponent,
        "1/8 ± 0.02",
        format!("{:.4} ± {:.4}, wired FK, L in {:?}, {} samples", one.exponent, one.exponent_se, cfg.radii, one.n_samples),
    ));
    r.check(Check::new(
        "two_arm_exponent",
        (two.exponent - 0.875).abs() <= 0.1,
        two.exponent,
        "7/8 ± 0.1",
        format!(
            "{:.4} ± {:.4}, Dobrushin spins, r = {}, R/r in {:?}, {} samples; SLE_3 interior two-arm value is {TWO_ARM_SLE3}",
            two.exponent, two.exponent_se, cfg.inner_radius, cfg.ratios, two.n_samples
        ),
    ));
    r.note("one_arm", &one);
    r.note("two_arm", &two);
    Ok(())
}

pub fn c_sigma_calibration(run: &Run, r: &mut Report) -> Result<()> {
    let cfg = run.cfg;
    let fit = estimate_c_sigma(&cfg.meshes, cfg.samples, run.seed("c_sigma", 0))?;
    let mut t = Table::new("ratio", &["delta", "ratio", "stderr", "inner", "inner_se", "outer", "outer_se"]);
    for m in &fit.meshes {
        t.push(vec![m.delta, m.ratio.value, m.ratio.stderr, m.inner.value, m.inner.stderr, m.outer.value, m.outer.stderr]);
    }
    r.tables.push(t);
    let se = (fit.ci.1 - fit.ci.0) / (2.0 * 1.96);
    r.check(Check::new(
        "c_sigma_positive",
        fit.c_sigma.is_finite() && fit.c_sigma > 0.0,
        fit.c_sigma,
        "finite, > 0",
        format!("C_σ = {:.4}, 95% interval [{:.4}, {:.4}]", fit.c_sigma, fit.ci.0, fit.ci.1),
    ));
    let z = (fit.c_sigma - C_SIGMA_REFERENCE).abs() / se.max(1e-12);
    r.check(Check::new(
        "c_sigma_reference",
        z <= 3.0,
        z,
        "within 3σ of the reference",
        format!("fit {:.4} vs reference {C_SIGMA_REFERENCE:.4}", fit.c_sigma),
    ));
    let finest = fit.meshes.last().unwrap();
    let zin = finest.inner.z_diff(&finest.outer);
    r.check(Check::new(
        "c_sigma_uniform",
        zin <= 3.0,
        zin,
        "inner and outer probes agree within 3σ",
        format!("inner {:.4} ± {:.4}, outer {:.4} ± {:.4}", finest.inner.value, finest.inner.stderr, finest.outer.value, finest.outer.stderr),
    ));
    r.note("c_sigma", fit.c_sigma);
    r.note("ci", fit.ci);
    Ok(())
}
