//! Radon–Nikodym weight of the near-critical interface law with respect to
//! the critical one, E₀[e^{Σ H σ} | γ]/E₀[e^{Σ H σ}], in three forms:
//! the whole-curve continuum series S_L·S_R/Z, the time-t form on the slit
//! domain, and a direct lattice estimate through the Markov property.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::correlation::{moment_series, series_integral, Kernel, SeriesEstimate};
use crate::domain::DiscreteDomain;
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::graph::SiteGraph;
use crate::harmonic::{slit_context, Component};
use crate::interface::{split_components, LatticePath};
use crate::ising::{fixed_spins, BoundaryCondition, IsingChain, IsingSystem, BETA_C};
use crate::stats::{self, Estimate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RnForm {
    Full,
    TimeT,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RnWeight {
    pub form: RnForm,
    /// S_L and S_R for the full form; the slit series (left slot) for time t.
    pub numerator_left: SeriesEstimate,
    pub numerator_right: Option<SeriesEstimate>,
    pub normalizer: SeriesEstimate,
    pub value: f64,
    pub stderr: f64,
    pub order: usize,
    pub delta: f64,
}

/// Monte Carlo effort shared by the estimators.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RnParams {
    pub order: usize,
    /// Samples per order for the continuum series.
    pub n_mc: usize,
    /// Ising samples for lattice expectations.
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for RnParams {
    fn default() -> Self {
        RnParams { order: 6, n_mc: 2000, n_samples: 2000, seed: 0 }
    }
}

/// Ratio of products with first-order error propagation.
fn quotient(num: &[&SeriesEstimate], den: &SeriesEstimate) -> (f64, f64) {
    let v = num.iter().map(|s| s.value).product::<f64>() / den.value;
    let rel2: f64 = num.iter().chain([&den]).map(|s| (s.stderr / s.value).powi(2)).sum();
    (v, v.abs() * rel2.sqrt())
}

impl RnWeight {
    pub fn from_series(left: SeriesEstimate, right: SeriesEstimate, z: SeriesEstimate, delta: f64) -> Result<Self> {
        if z.value <= 0.0 {
            return Err(Error::NormalizerNonpositive(z.value));
        }
        let (value, stderr) = quotient(&[&left, &right], &z);
        Ok(RnWeight { form: RnForm::Full, order: z.order, numerator_left: left, numerator_right: Some(right), normalizer: z, value, stderr, delta })
    }
}

/// Σ_x H_x σ_x over the given vertices of the system's graph.
fn field_sum(h: &[f64], verts: &[usize], spins: &[i8]) -> f64 {
    verts.iter().map(|&v| h[v] * spins[v] as f64).sum()
}

/// Ising at H = 0 on the domain with the spins on V_L = + and V_R = −
/// (the law of the configuration given the path), Dobrushin arcs.
fn conditional_system(d: &DiscreteDomain, path: &LatticePath) -> Result<IsingSystem> {
    let g = SiteGraph::from_domain(d);
    let mut fixed = fixed_spins(&g, BoundaryCondition::Dobrushin)?;
    for &k in &path.v_left {
        fixed[k] = Some(1);
    }
    for &k in &path.v_right {
        fixed[k] = Some(-1);
    }
    let n = g.n;
    IsingSystem::new(g, fixed, vec![0.0; n], BETA_C)
}

/// Samples of Σ_{x ∈ sets[i]} H_x σ_x for each set, one row per sample.
fn field_sum_samples(sys: IsingSystem, h: &[f64], sets: &[&[usize]], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let sys = Arc::new(sys);
    let mut ch = IsingChain::new(sys.clone(), seed, 0);
    ch.equilibrate();
    let mut buf = vec![0i8; sys.graph.n];
    let mut out = Vec::with_capacity(n);
    ch.run(n, 1, |c| {
        c.fill(&mut buf);
        out.push(sets.iter().map(|s| field_sum(h, s, &buf)).collect());
    });
    out
}

/// Samples of M_H = Σ H_x σ_x under the critical Dobrushin law, cached per
/// (domain, field, n, seed).
pub fn dobrushin_field_sums(d: &DiscreteDomain, field: &FieldSpec, n: usize, seed: u64) -> Result<Arc<Vec<f64>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<Vec<f64>>>>> = OnceLock::new();
    let key = format!("{}:{}:{n}:{seed}", d.hash(), serde_json::to_string(field).unwrap());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(v.clone());
    }
    let sys = IsingSystem::on_domain(d, BoundaryCondition::Dobrushin, &FieldSpec::zero())?;
    let h = field.per_vertex(d);
    let all: Vec<usize> = (0..d.n_interior()).collect();
    let rows = field_sum_samples(sys, &h, &[&all], n, seed);
    let v = Arc::new(rows.into_iter().map(|r| r[0]).collect::<Vec<_>>());
    cache.lock().unwrap().insert(key, v.clone());
    Ok(v)
}

/// Z_h(Ω): the Dobrushin series at t = 0 with lattice kernels, i.e.
/// Σ_{k≤K} E₀[M_H^k]/k!.
pub fn normalizer(d: &DiscreteDomain, field: &FieldSpec, p: &RnParams) -> Result<SeriesEstimate> {
    if field.is_zero() {
        return Ok(SeriesEstimate::trivial());
    }
    let m = dobrushin_field_sums(d, field, p.n_samples, p.seed)?;
    let z = moment_series(&m, p.order);
    if z.value <= 0.0 {
        return Err(Error::NormalizerNonpositive(z.value));
    }
    Ok(z)
}

/// Continuum intensity h(x) of a field spec (the δ-independent profile).
pub fn intensity(field: &FieldSpec) -> impl Fn(C) -> f64 + '_ {
    move |z| field.h.eval([z.re, z.im])
}

/// Whole-curve weight: series with f^{(+,k)} on Ω_L and f^{(−,k)} on Ω_R,
/// over V(γ)-free lattice components, divided by Z_h(Ω).
pub fn rn_full(curve: &LatticePath, d: &DiscreteDomain, field: &FieldSpec, p: &RnParams) -> Result<RnWeight> {
    let z = normalizer(d, field, p)?;
    if field.is_zero() {
        let one = SeriesEstimate::trivial();
        return RnWeight::from_series(one.clone(), one, z, d.delta);
    }
    let h = intensity(field);
    let left = slit_context(d, curve, Component::LeftOfCurve)?;
    let right = slit_context(d, curve, Component::RightOfCurve)?;
    let sl = series_integral(&left, &h, Kernel::Plus, p.order, p.n_mc, crate::rng::derive_seed(p.seed, "left", 0))?;
    let sr = series_integral(&right, &h, Kernel::Minus, p.order, p.n_mc, crate::rng::derive_seed(p.seed, "right", 0))?;
    RnWeight::from_series(sl, sr, z, d.delta)
}

/// Time-t weight on the slit domain of a prefix: the Dobrushin series with
/// lattice kernels for the law given the prefix, divided by Z_h(Ω). The
/// prefix is usually cut by `loewner::stop_at_capacity`.
pub fn rn_time(prefix: &LatticePath, d: &DiscreteDomain, field: &FieldSpec, p: &RnParams) -> Result<RnWeight> {
    let z = normalizer(d, field, p)?;
    let num = if prefix.crossed.is_empty() || field.is_zero() {
        z.clone()
    } else {
        let sys = conditional_system(d, prefix)?;
        let h = field.per_vertex(d);
        let reg = split_components(d, prefix)?;
        let mut free: Vec<usize> = reg.left.iter().chain(&reg.right).copied().collect();
        free.sort_unstable();
        free.dedup();
        let rows = field_sum_samples(sys, &h, &[&free], p.n_samples, crate::rng::derive_seed(p.seed, "slit", 0));
        let m: Vec<f64> = rows.into_iter().map(|r| r[0]).collect();
        moment_series(&m, p.order)
    };
    let (value, stderr) = if prefix.crossed.is_empty() { (1.0, 0.0) } else { quotient(&[&num], &z) };
    Ok(RnWeight { form: RnForm::TimeT, order: p.order, numerator_left: num, numerator_right: None, normalizer: z, value, stderr, delta: d.delta })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteRn {
    pub value: Estimate,
    /// exp(Σ_{V_L} H − Σ_{V_R} H), the fixed spins next to the curve.
    pub prefactor: f64,
    pub left: Estimate,
    pub right: Estimate,
    pub normalizer: Estimate,
}

/// E₀[e^{M_H}] under the Dobrushin law, cached through the field sums.
pub fn discrete_normalizer(d: &DiscreteDomain, field: &FieldSpec, n: usize, seed: u64) -> Result<Estimate> {
    Ok(scaled_normalizers(d, field, &[1.0], n, seed)?[0])
}

fn scaled_normalizers(d: &DiscreteDomain, field: &FieldSpec, factors: &[f64], n: usize, seed: u64) -> Result<Vec<Estimate>> {
    let m = dobrushin_field_sums(d, field, n, seed)?;
    Ok(factors
        .iter()
        .map(|s| {
            let xs: Vec<f64> = m.iter().map(|x| (s * x).exp()).collect();
            stats::jackknife(&xs, 50.min(xs.len()), stats::mean)
        })
        .collect())
}

/// Lattice weight through the Markov property: given γ, Ω_L and Ω_R carry
/// independent critical Ising models with + and − boundary, so
/// E₀[e^{ΣHσ} | γ] = e^{H(V_L) − H(V_R)} E⁺_L[e^{M_L}] E⁻_R[e^{M_R}].
/// Both factors come from one chain on interior \ V(γ). The normalizer is
/// taken from `discrete_normalizer` with the seed in `p`.
pub fn discrete_rn(curve: &LatticePath, d: &DiscreteDomain, field: &FieldSpec, p: &RnParams) -> Result<DiscreteRn> {
    Ok(discrete_rn_scaled(curve, d, field, &[1.0], p)?.remove(0))
}

/// `discrete_rn` for the fields s·H, s in `factors`, from the same samples.
/// M_H is linear in H, so one conditional chain serves every factor.
pub fn discrete_rn_scaled(curve: &LatticePath, d: &DiscreteDomain, field: &FieldSpec, factors: &[f64], p: &RnParams) -> Result<Vec<DiscreteRn>> {
    let one = Estimate::new(1.0, 0.0);
    if field.is_zero() {
        return Ok(factors.iter().map(|_| DiscreteRn { value: one, prefactor: 1.0, left: one, right: one, normalizer: one }).collect());
    }
    let h = field.per_vertex(d);
    let pre: f64 = curve.v_left.iter().map(|&k| h[k]).sum::<f64>() - curve.v_right.iter().map(|&k| h[k]).sum::<f64>();
    let reg = split_components(d, curve)?;
    let sys = conditional_system(d, curve)?;
    // seeded by the curve itself, so distinct curves get independent chains
    let tag = u64::from_str_radix(&curve.hash()[..16], 16).unwrap_or(0);
    let seed = crate::rng::derive_seed(p.seed, "conditional", tag);
    let rows = field_sum_samples(sys, &h, &[&reg.left, &reg.right], p.n_samples, seed);
    let zs = scaled_normalizers(d, field, factors, p.n_samples, p.seed)?;
    let nb = 50.min(rows.len());
    factors
        .iter()
        .zip(zs)
        .map(|(&s, z)| {
            if z.value <= 0.0 {
                return Err(Error::NormalizerNonpositive(z.value));
            }
            let el: Vec<f64> = rows.iter().map(|r| (s * r[0]).exp()).collect();
            let er: Vec<f64> = rows.iter().map(|r| (s * r[1]).exp()).collect();
            let left = stats::jackknife(&el, nb, stats::mean);
            let right = stats::jackknife(&er, nb, stats::mean);
            // product of the two factors from the same rows, jackknifed jointly
            let num = stats::jackknife_idx(rows.len(), nb, |idx| {
                let k = idx.len() as f64;
                idx.iter().map(|&i| el[i]).sum::<f64>() / k * idx.iter().map(|&i| er[i]).sum::<f64>() / k
            });
            let prefactor = (s * pre).exp();
            let v = prefactor * num.value / z.value;
            let se = v * ((num.stderr / num.value).powi(2) + (z.stderr / z.value).powi(2)).sqrt();
            Ok(DiscreteRn { value: Estimate::new(v, se), prefactor, left, right, normalizer: z })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, ShapeSpec};
    use crate::interface::extract_interface;
    use crate::ising::SpinConfig;

    fn setup() -> (DiscreteDomain, LatticePath) {
        let d = build_domain(&ShapeSpec::unit_disk([0.0, -1.0], [0.0, 1.0]), 1.0 / 12.0).unwrap();
        let spins = SpinConfig { bc: BoundaryCondition::Dobrushin, spins: d.interior.iter().map(|s| if s.i < 0 { 1 } else { -1 }).collect() };
        let path = extract_interface(&d, &spins).unwrap();
        (d, path)
    }

    #[test]
    fn zero_field_is_one() {
        let (d, path) = setup();
        let p = RnParams { n_mc: 100, n_samples: 100, ..Default::default() };
        let f = FieldSpec::zero();
        assert_eq!(rn_full(&path, &d, &f, &p).unwrap().value, 1.0);
        assert_eq!(rn_time(&path, &d, &f, &p).unwrap().value, 1.0);
        assert_eq!(discrete_rn(&path, &d, &f, &p).unwrap().value.value, 1.0);
    }

    #[test]
    fn time_zero_is_one_and_positive_weights() {
        let (d, path) = setup();
        let p = RnParams { n_mc: 200, n_samples: 400, order: 4, seed: 3 };
        let f = FieldSpec::constant(0.5).with_c_sigma(0.84);
        let w = rn_time(&path.prefix(&d, 0), &d, &f, &p).unwrap();
        assert_eq!(w.value, 1.0);
        assert!(rn_full(&path, &d, &f, &p).unwrap().value > 0.0);
        let r = discrete_rn(&path, &d, &f, &p).unwrap();
        assert!(r.value.value > 0.0);
        // symmetric straight interface: V_L and V_R have equal size
        assert!((r.prefactor - 1.0).abs() < 1e-12, "{}", r.prefactor);
    }
}
