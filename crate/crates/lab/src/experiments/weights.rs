//! RN weight normalisation, estimator agreement and conformal covariance.

use num_complex::Complex64 as C;

use magsle_core::conformal::DiskAutomorphism;
use magsle_core::correlation::{f_minus_k, f_plus_k, series_integral, ImageContext, Kernel, SeriesEstimate};
use magsle_core::field::FieldSpec;
use magsle_core::harmonic::{slit_context, Component, HarmonicContext};
use magsle_core::rn::{discrete_normalizer, discrete_rn, intensity, rn_full, RnParams};
use magsle_core::rng::{self, Rng};
use magsle_core::stats;

use super::Run;
use crate::error::Result;
use crate::pool::par_map;
use crate::report::{Check, Report, Table};

pub fn rn_importance(run: &Run, r: &mut Report) -> Result<()> {
    let cfg = run.cfg;
    let field = cfg.field.spec();

    // E₀[F] = 1 over H = 0 interfaces on the coarse mesh
    let d = run.domain(cfg.meshes[0])?;
    let paths = run.interfaces(&d, &FieldSpec::zero(), cfg.samples, run.seed("ensemble", 0))?;
    let p = RnParams { order: cfg.order, n_mc: cfg.n_mc, n_samples: cfg.conditional_samples, seed: run.seed("rn", 0) };
    let ws = par_map(run.threads, &paths, |_, path| discrete_rn(path, &d, &field, &p).map(|w| w.value.value));
    let ws: Vec<f64> = ws.into_iter().collect::<std::result::Result<_, _>>()?;
    let z = discrete_normalizer(&d, &field, p.n_samples, p.seed)?;
    let m = stats::jackknife(&ws, 20.min(ws.len()), stats::mean);
    // Z is shared by every curve, so its error is added once, not averaged down
    let sigma = (m.stderr.powi(2) + (m.value * z.stderr / z.value).powi(2)).sqrt();
    let zscore = (m.value - 1.0).abs() / sigma;
    let mut tab = Table::new("weights", &["curve", "discrete_rn"]);
    for (k, w) in ws.iter().enumerate() {
        tab.push(vec![k as f64, *w]);
    }
    r.tables.push(tab);
    r.check(Check::new(
        "rn_normalisation",
        zscore <= 3.0,
        m.value,
        "1 ± 3σ",
        format!("mean {:.4} ± {:.4} (curves {:.4}, Z {:.4}), {} curves, δ = 1/{:.0}, h = {}", m.value, sigma, m.stderr, z.stderr / z.value, ws.len(), 1.0 / d.delta, cfg.field.h),
    ));

    // rn_full against discrete_rn on the fine mesh
    let d = run.domain(cfg.finest())?;
    let curves = run.interfaces(&d, &FieldSpec::zero(), cfg.cross_curves, run.seed("cross", 0))?;
    let p = RnParams { order: cfg.order, n_mc: cfg.cross_samples, n_samples: cfg.cross_samples, seed: run.seed("cross_rn", 0) };
    let pairs = par_map(run.threads, &curves, |_, c| -> Result<(f64, f64, f64, f64)> {
        let a = rn_full(c, &d, &field, &p)?;
        let b = discrete_rn(c, &d, &field, &p)?;
        Ok((a.value, a.stderr, b.value.value, b.value.stderr))
    });
    let mut cross = Table::new("cross", &["curve", "rn_full", "rn_full_se", "discrete_rn", "discrete_rn_se", "rel_diff"]);
    let mut worst: f64 = 0.0;
    for (k, x) in pairs.into_iter().enumerate() {
        let (a, sa, b, sb) = x?;
        let rel = (a / b - 1.0).abs();
        worst = worst.max(rel);
        cross.push(vec![k as f64, a, sa, b, sb, rel]);
    }
    r.tables.push(cross);
    r.tolerance("cross_rel", 0.15);
    r.check(Check::new(
        "rn_cross_agreement",
        worst <= 0.15,
        worst,
        "every curve within 15%",
        format!("{} curves, δ = 1/{:.0}, h = {}, K = {}", curves.len(), 1.0 / d.delta, cfg.field.h, cfg.order),
    ));
    Ok(())
}

fn random_points(r: &mut rng::ChainRng, k: usize) -> Vec<C> {
    (0..k).map(|_| C::from_polar(0.9 * r.random::<f64>().sqrt(), std::f64::consts::TAU * r.random::<f64>())).collect()
}

/// Product of two series with first-order error propagation.
fn product(a: &SeriesEstimate, b: &SeriesEstimate) -> (f64, f64) {
    let v = a.value * b.value;
    (v, v.abs() * ((a.stderr / a.value).powi(2) + (b.stderr / b.value).powi(2)).sqrt())
}

pub fn covariance_check(run: &Run, r: &mut Report) -> Result<()> {
    let cfg = run.cfg;
    let disk = HarmonicContext::Disk { center: C::new(0.0, 0.0), radius: 1.0 };

    // kernels: f(z) = ∏|ψ'(z_j)|^{1/8} f(ψz) on the unit disk
    let mut g = rng::stream(run.seed("kernel", 0), 0);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.automorphisms {
        let psi = DiskAutomorphism::random(&mut g, 0.7);
        for k in 1..=4 {
            let z = random_points(&mut g, k);
            let img: Vec<C> = z.iter().map(|&x| psi.apply(x)).collect();
            let jac: f64 = z.iter().map(|&x| psi.deriv(x).norm().powf(0.125)).product();
            for f in [f_plus_k, f_minus_k] {
                let (a, b) = (f(&disk, &z)?, jac * f(&disk, &img)?);
                worst = worst.max((a - b).abs() / a.abs());
            }
        }
    }
    r.tolerance("kernel_rel", 1e-5);
    r.check(Check::new("kernel_covariance", worst <= 1e-5, worst, "≤ 1e-5 relative", format!("{} automorphisms, k = 1..4, both signs", cfg.automorphisms)));

    // series: S on Ω_L, Ω_R with h against the image domains with
    // h̃(w) = |(ψ⁻¹)'(w)|^{15/8} h(ψ⁻¹ w)
    let d = run.domain(cfg.finest())?;
    let curve = run.interfaces(&d, &FieldSpec::zero(), 1, run.seed("curve", 0))?.remove(0);
    let field = cfg.field.spec();
    let h = intensity(&field);
    let left = slit_context(&d, &curve, Component::LeftOfCurve)?;
    let right = slit_context(&d, &curve, Component::RightOfCurve)?;
    let (k, n) = (cfg.order, cfg.samples);
    let sl = series_integral(&left, &h, Kernel::Plus, k, n, run.seed("left", 0))?;
    let sr = series_integral(&right, &h, Kernel::Minus, k, n, run.seed("right", 0))?;
    let (base, base_se) = product(&sl, &sr);
    let maps: Vec<DiskAutomorphism> = {
        let mut g = rng::stream(run.seed("maps", 0), 0);
        (0..3).map(|_| DiskAutomorphism::random(&mut g, 0.5)).collect()
    };
    let mut tab = Table::new("series_covariance", &["map", "product", "stderr", "z"]);
    tab.push(vec![-1.0, base, base_se, 0.0]);
    let mut zmax: f64 = 0.0;
    for (j, psi) in maps.iter().enumerate() {
        let inv = psi.inverse();
        let ht = |w: C| inv.deriv(w).norm().powf(15.0 / 8.0) * h(inv.apply(w));
        let il = ImageContext::new(left.clone(), *psi).series_integral(&ht, Kernel::Plus, k, n, run.seed("image_left", j as u64))?;
        let ir = ImageContext::new(right.clone(), *psi).series_integral(&ht, Kernel::Minus, k, n, run.seed("image_right", j as u64))?;
        let (v, se) = product(&il, &ir);
        let z = (v - base).abs() / (se * se + base_se * base_se).sqrt();
        zmax = zmax.max(z);
        tab.push(vec![j as f64, v, se, z]);
    }
    r.tables.push(tab);
    r.tolerance("series_sigmas", 3.0);
    r.check(Check::new(
        "series_covariance",
        zmax <= 3.0,
        zmax,
        "within 3 combined σ",
        format!("S_L·S_R = {base:.4} ± {base_se:.4} on Ω_L, Ω_R; {} image domains, δ = 1/{:.0}, h = {}", maps.len(), 1.0 / d.delta, cfg.field.h),
    ));
    Ok(())
}
