//! Continuum spin-correlation kernels f^{(±,k)}, the truncated exponential
//! series Σ_k 1/k! ∫ ∏h(z_j) f^{(k)}(z), lattice spin correlations, and the
//! calibration of C_σ from δ^{−1/8}E⁺[σ_x].

use std::sync::Arc;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::domain::{build_domain, DiscreteDomain, ShapeSpec};
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::harmonic::{DiscreteGreen, HarmonicContext};
use crate::ising::{BoundaryCondition, IsingChain, IsingSystem};
use crate::rng::{self, ChainRng, Rng};
use crate::stats::{self, Estimate};

/// Largest order for which the 2^k sign sum is evaluated.
pub const K_MAX: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Plus,
    Minus,
}

/// ∏ CR(x_j)^{−1/8} · (2^{−k/2} Σ_μ ∏_{j<m} e^{μ_j μ_m G(x_j, x_m)/2})^{1/2}.
pub fn f_plus_k(ctx: &HarmonicContext, pts: &[C]) -> Result<f64> {
    let k = pts.len();
    if k > K_MAX {
        return Err(Error::BadParam(format!("order {k} above {K_MAX}")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let mut cr = 1.0;
    for &x in pts {
        cr *= ctx.conformal_radius(x)?.powf(-0.125);
    }
    let mut g = vec![0.0; k * k];
    for j in 0..k {
        for m in j + 1..k {
            g[j * k + m] = ctx.green(pts[j], pts[m])?;
        }
    }
    // μ and −μ give the same term: fix μ_0 = +1 and double
    let mut sum = 0.0;
    for mask in 0..1usize << (k - 1) {
        let mu = |j: usize| if j == 0 || mask >> (j - 1) & 1 == 0 { 1.0 } else { -1.0 };
        let mut e = 0.0;
        for j in 0..k {
            for m in j + 1..k {
                e += mu(j) * mu(m) * g[j * k + m];
            }
        }
        sum += (0.5 * e).exp();
    }
    sum *= 2.0;
    Ok(cr * (sum * 2f64.powf(-(k as f64) / 2.0)).sqrt())
}

/// Minus boundary condition: (−1)^k f^{(+,k)} by the global spin flip.
pub fn f_minus_k(ctx: &HarmonicContext, pts: &[C]) -> Result<f64> {
    let f = f_plus_k(ctx, pts)?;
    Ok(if pts.len() % 2 == 1 { -f } else { f })
}

pub fn kernel(ctx: &HarmonicContext, which: Kernel, pts: &[C]) -> Result<f64> {
    match which {
        Kernel::Plus => f_plus_k(ctx, pts),
        Kernel::Minus => f_minus_k(ctx, pts),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesEstimate {
    pub value: f64,
    pub stderr: f64,
    pub order: usize,
    /// Order-k terms, k = 0..=order; the k = 0 term is 1.
    pub contributions: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub mc_samples: Vec<usize>,
    /// Fitted tail Σ_{k>K}; heuristic, see `tail_bound`.
    pub tail_bound: f64,
}

impl SeriesEstimate {
    fn from_terms(contributions: Vec<f64>, stderrs: Vec<f64>, mc_samples: Vec<usize>) -> Self {
        let value = contributions.iter().sum();
        let stderr = stderrs.iter().map(|s| s * s).sum::<f64>().sqrt();
        let tail = tail_bound(&contributions);
        SeriesEstimate { value, stderr, order: contributions.len() - 1, contributions, stderrs, mc_samples, tail_bound: tail }
    }

    pub fn trivial() -> Self {
        SeriesEstimate::from_terms(vec![1.0], vec![0.0], vec![0])
    }

    pub fn to_json(&self, h: f64) -> serde_json::Value {
        serde_json::json!({
            "h": h,
            "K": self.order,
            "per_order": self.contributions,
            "per_order_stderr": self.stderrs,
            "value": self.value,
            "stderr": self.stderr,
            "tail_bound": self.tail_bound,
        })
    }
}

/// Fit |a_k| ≤ c^k k^{k/16}/k! on the orders k ≥ 1 (the smallest c that
/// covers every observed order) and sum the fitted terms beyond K.
pub fn tail_bound(contributions: &[f64]) -> f64 {
    let lf = |k: usize| (1..=k).map(|j| (j as f64).ln()).sum::<f64>();
    let pts: Vec<f64> = contributions
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, a)| a.abs() > 0.0)
        .map(|(k, a)| {
            let k = k as f64;
            (a.abs().ln() + lf(k as usize) - k / 16.0 * k.ln()) / k
        })
        .collect();
    if pts.is_empty() {
        return 0.0;
    }
    let logc = pts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let big_k = contributions.len() - 1;
    let mut tail = 0.0;
    for k in big_k + 1..big_k + 200 {
        let kf = k as f64;
        let t = (kf * logc + kf / 16.0 * kf.ln() - lf(k)).exp();
        tail += t;
        if t < 1e-16 * tail.max(1.0) {
            break;
        }
    }
    tail
}

/// Discrete contexts: independent vertex pools per batch, and their size.
const POOL_BATCHES: usize = 16;
const POOL_SIZE: usize = 24;

/// Move k random distinct entries of `buf` to its front (partial Fisher-Yates).
fn distinct(r: &mut ChainRng, buf: &mut [usize], k: usize) {
    for j in 0..k {
        let m = r.random_range(j..buf.len());
        buf.swap(j, m);
    }
}

/// Σ_{k≤K} 1/k! ∫_{D^k} ∏h(z_j) f^{(±,k)}(z) dz by uniform Monte Carlo.
///
/// Analytic contexts draw i.i.d. uniform points (bounding-box rejection);
/// a draw that lands on a kernel singularity is redrawn. Discrete contexts
/// split the samples into batches, each with its own pool of distinct
/// region vertices, and average the kernel over random distinct k-subsets
/// of the pool. That estimates the lattice sum over distinct vertex tuples
/// (each vertex carrying area δ²) without bias, bounds the number of
/// Green's function columns to solve, and the spread of the batch means
/// carries the pool randomness into the standard error.
pub fn series_integral(
    ctx: &HarmonicContext,
    h: &dyn Fn(C) -> f64,
    which: Kernel,
    order: usize,
    n_mc: usize,
    seed: u64,
) -> Result<SeriesEstimate> {
    if order > K_MAX {
        return Err(Error::BadParam(format!("order {order} above {K_MAX}")));
    }
    let mut contributions = vec![1.0];
    let mut stderrs = vec![0.0];
    let mut counts = vec![0];
    let area = ctx.area();
    let mut pools: Vec<Vec<C>> = Vec::new();
    if let HarmonicContext::Discrete(g) = ctx {
        let mut r = rng::stream(seed, 1 << 32);
        let mut idx: Vec<usize> = (0..g.len()).collect();
        let m = POOL_SIZE.min(g.len());
        for _ in 0..POOL_BATCHES {
            distinct(&mut r, &mut idx, m);
            pools.push(idx[..m].iter().map(|&k| g.position(k)).collect());
        }
    }
    let mut pts = Vec::with_capacity(order);
    for k in 1..=order {
        let mut r = rng::stream(seed, k as u64);
        let fact: f64 = (1..=k).map(|j| j as f64).product();
        let scale = area.powi(k as i32) / fact;
        if pools.is_empty() {
            let mut xs = Vec::with_capacity(n_mc);
            let mut redraws = 0usize;
            while xs.len() < n_mc {
                pts.clear();
                for _ in 0..k {
                    pts.push(ctx.sample(&mut r)?);
                }
                match kernel(ctx, which, &pts) {
                    Ok(f) => xs.push(f * pts.iter().map(|&z| h(z)).product::<f64>()),
                    Err(Error::CoincidentPoints) if redraws < n_mc => redraws += 1,
                    Err(e) => return Err(e),
                }
            }
            let est = stats::mean_iid(&xs);
            contributions.push(scale * est.value);
            stderrs.push(scale * est.stderr);
        } else {
            if k > pools[0].len() {
                contributions.push(0.0);
                stderrs.push(0.0);
                counts.push(0);
                continue;
            }
            let per = n_mc.div_ceil(POOL_BATCHES);
            let mut means = Vec::with_capacity(pools.len());
            let mut buf: Vec<usize> = (0..pools[0].len()).collect();
            for pool in &pools {
                let mut acc = 0.0;
                for _ in 0..per {
                    distinct(&mut r, &mut buf, k);
                    pts.clear();
                    pts.extend(buf[..k].iter().map(|&j| pool[j]));
                    acc += kernel(ctx, which, &pts)? * pts.iter().map(|&z| h(z)).product::<f64>();
                }
                means.push(acc / per as f64);
            }
            let est = stats::mean_iid(&means);
            contributions.push(scale * est.value);
            stderrs.push(scale * est.stderr);
        }
        counts.push(n_mc);
    }
    Ok(SeriesEstimate::from_terms(contributions, stderrs, counts))
}

/// Constant-intensity convenience wrapper.
pub fn series_const(ctx: &HarmonicContext, h: f64, which: Kernel, order: usize, n_mc: usize, seed: u64) -> Result<SeriesEstimate> {
    if h == 0.0 {
        return Ok(SeriesEstimate::trivial());
    }
    series_integral(ctx, &|_| h, which, order, n_mc, seed)
}

/// The discrete series Σ_{k≤K} E[M^k]/k! from samples of M = Σ_x H_x σ_x.
/// Its order-k term is the lattice sum of H^k E[σ_{x_1}⋯σ_{x_k}], i.e. the
/// series with lattice kernels in place of f^{(k)}; block-jackknife errors.
pub fn moment_series(m: &[f64], order: usize) -> SeriesEstimate {
    let mut c = vec![1.0];
    let mut s = vec![0.0];
    let mut fact = 1.0;
    for k in 1..=order {
        fact *= k as f64;
        let xs: Vec<f64> = m.iter().map(|x| x.powi(k as i32) / fact).collect();
        let e = stats::jackknife(&xs, 50.min(xs.len()), stats::mean);
        c.push(e.value);
        s.push(e.stderr);
    }
    // the jackknife of the sum accounts for covariance between orders
    let tot: Vec<f64> = m
        .iter()
        .map(|x| {
            let mut t = 0.0;
            let mut p = 1.0;
            for k in 1..=order {
                p *= x / k as f64;
                t += p;
            }
            t
        })
        .collect();
    let mut out = SeriesEstimate::from_terms(c, s, vec![m.len(); order + 1]);
    out.stderr = stats::jackknife(&tot, 50.min(tot.len()), stats::mean).stderr;
    out
}

/// Pairwise and boundary separation of at least η.
pub fn check_separation(d: &DiscreteDomain, pts: &[C], eta: f64) -> Result<()> {
    for (j, p) in pts.iter().enumerate() {
        if d.shape.boundary_distance([p.re, p.im]) < eta || pts[..j].iter().any(|q| (p - q).norm() < eta) {
            return Err(Error::PointsTooClose);
        }
    }
    Ok(())
}

/// δ^{−k/8} E^{bc}[σ_{x_1}⋯σ_{x_k}] at the nearest interior vertices, H = 0.
pub fn discrete_correlation(
    d: &DiscreteDomain,
    bc: BoundaryCondition,
    pts: &[C],
    eta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    check_separation(d, pts, eta)?;
    let idx: Vec<usize> = pts
        .iter()
        .map(|p| d.nearest_interior([p.re, p.im]).ok_or(Error::ExteriorPoint([p.re, p.im])))
        .collect::<Result<_>>()?;
    let sys = Arc::new(IsingSystem::on_domain(d, bc, &FieldSpec::zero())?);
    let mut ch = IsingChain::new(sys.clone(), seed, 0);
    ch.equilibrate();
    let mut buf = vec![0i8; sys.graph.n];
    let mut xs = Vec::with_capacity(n_samples);
    let scale = d.delta.powf(-(pts.len() as f64) / 8.0);
    ch.run(n_samples, 1, |c| {
        c.fill(&mut buf);
        xs.push(scale * idx.iter().map(|&k| buf[k] as f64).product::<f64>());
    });
    Ok(stats::batch_means(&xs).estimate)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CSigmaMesh {
    pub delta: f64,
    /// Pooled ratio δ^{−1/8}E⁺[σ_x]/f^{(+,1)}(x) over the probe vertices.
    pub ratio: Estimate,
    /// The same ratio restricted to |x| < r_in and to r_in ≤ |x| < r_out.
    pub inner: Estimate,
    pub outer: Estimate,
    pub n_probes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CSigmaFit {
    pub c_sigma: f64,
    pub ci: (f64, f64),
    pub meshes: Vec<CSigmaMesh>,
}

/// Reference lattice constant 2^{5/48} e^{(3/2)ζ'(−1)} of the one-point
/// function, against which the calibration is compared.
pub const C_SIGMA_REFERENCE: f64 = 0.838_677_624_411_024;

/// Probe radius on the unit disk: every interior vertex with |x| < 0.5.
pub const PROBE_RADIUS: f64 = 0.5;

/// Pooled ratio at one mesh of the unit disk.
pub fn c_sigma_ratio(delta: f64, n_samples: usize, seed: u64) -> Result<CSigmaMesh> {
    let d = build_domain(&ShapeSpec::unit_disk([-1.0, 0.0], [1.0, 0.0]), delta)?;
    let ctx = HarmonicContext::Disk { center: C::new(0.0, 0.0), radius: 1.0 };
    let probes: Vec<(usize, f64, bool)> = d
        .interior
        .iter()
        .enumerate()
        .filter_map(|(k, s)| {
            let p = d.pos(*s);
            let r = p[0].hypot(p[1]);
            (r < PROBE_RADIUS).then(|| {
                let f = f_plus_k(&ctx, &[C::new(p[0], p[1])]).unwrap();
                (k, delta.powf(-0.125) / f, r < PROBE_RADIUS / 2.0)
            })
        })
        .collect();
    let (n_in, n_out) = probes.iter().fold((0usize, 0usize), |a, p| if p.2 { (a.0 + 1, a.1) } else { (a.0, a.1 + 1) });
    let sys = Arc::new(IsingSystem::on_domain(&d, BoundaryCondition::Plus, &FieldSpec::zero())?);
    let mut ch = IsingChain::new(sys.clone(), seed, 0);
    ch.set_all(1);
    ch.equilibrate();
    let mut buf = vec![0i8; sys.graph.n];
    let (mut all, mut inn, mut out) = (Vec::new(), Vec::new(), Vec::new());
    ch.run(n_samples, 1, |c| {
        c.fill(&mut buf);
        let (mut a, mut i, mut o) = (0.0, 0.0, 0.0);
        for &(k, w, is_in) in &probes {
            let x = w * buf[k] as f64;
            a += x;
            if is_in {
                i += x;
            } else {
                o += x;
            }
        }
        all.push(a / probes.len() as f64);
        inn.push(i / n_in.max(1) as f64);
        out.push(o / n_out.max(1) as f64);
    });
    let e = |xs: &[f64]| stats::batch_means(xs).estimate;
    Ok(CSigmaMesh { delta, ratio: e(&all), inner: e(&inn), outer: e(&out), n_probes: probes.len() })
}

/// C_σ from a ladder of unit-disk meshes: weighted linear extrapolation of
/// the pooled ratio to δ = 0, with a 95% interval from the fit.
pub fn estimate_c_sigma(meshes: &[f64], n_samples: usize, seed: u64) -> Result<CSigmaFit> {
    if meshes.len() < 3 {
        return Err(Error::BadParam("need at least three meshes".into()));
    }
    let per: Vec<CSigmaMesh> = meshes
        .iter()
        .enumerate()
        .map(|(j, &delta)| c_sigma_ratio(delta, n_samples, rng::derive_seed(seed, "c_sigma", j as u64)))
        .collect::<Result<_>>()?;
    let x: Vec<f64> = per.iter().map(|m| m.delta).collect();
    let y: Vec<f64> = per.iter().map(|m| m.ratio.value).collect();
    let w: Vec<f64> = per.iter().map(|m| 1.0 / m.ratio.stderr.max(1e-12).powi(2)).collect();
    let fit = stats::fit_line_inv_var(&x, &y, &w);
    let c = fit.intercept;
    let se = fit.intercept_se;
    Ok(CSigmaFit { c_sigma: c, ci: (c - 1.96 * se, c + 1.96 * se), meshes: per })
}

/// Pulled-back context ψ(D) for a disk automorphism ψ, used to check the
/// covariance of kernels and series. G_{ψD}(ψx, ψy) = G_D(x, y) and
/// CR(ψx, ψD) = |ψ'(x)| CR(x, D). Uniform samples on ψ(D) come from
/// uniform samples on D accepted with probability |ψ'|²/max|ψ'|².
#[derive(Clone, Debug)]
pub struct ImageContext {
    pub base: HarmonicContext,
    pub psi: crate::conformal::DiskAutomorphism,
    jac_max: f64,
    area: f64,
}

impl ImageContext {
    pub fn new(base: HarmonicContext, psi: crate::conformal::DiskAutomorphism) -> Self {
        let a = psi.inverse().apply(C::new(0.0, 0.0)).norm();
        let jac_max = ((1.0 + a) / (1.0 - a)).powi(2);
        let area = match &base {
            HarmonicContext::Discrete(g) => (0..g.len()).map(|k| psi.deriv(g.position(k)).norm_sqr()).sum::<f64>() * g.delta * g.delta,
            _ => f64::NAN,
        };
        let area = if area.is_nan() { image_area_mc(&base, &psi) } else { area };
        ImageContext { base, psi, jac_max, area }
    }

    fn pre(&self, w: C) -> C {
        self.psi.inverse().apply(w)
    }

    pub fn green(&self, x: C, y: C) -> Result<f64> {
        self.base.green(self.pre(x), self.pre(y))
    }

    pub fn conformal_radius(&self, x: C) -> Result<f64> {
        let z = self.pre(x);
        Ok(self.psi.deriv(z).norm() * self.base.conformal_radius(z)?)
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn sample(&self, r: &mut ChainRng) -> Result<C> {
        loop {
            let z = self.base.sample(r)?;
            if r.random::<f64>() * self.jac_max < self.psi.deriv(z).norm_sqr() {
                return Ok(self.psi.apply(z));
            }
        }
    }

    /// Same formula as `f_plus_k`, written against this context.
    pub fn f_plus_k(&self, pts: &[C]) -> Result<f64> {
        let pre: Vec<C> = pts.iter().map(|&w| self.pre(w)).collect();
        let jac: f64 = pre.iter().map(|&z| self.psi.deriv(z).norm().powf(-0.125)).product();
        Ok(jac * f_plus_k(&self.base, &pre)?)
    }

    pub fn series_integral(&self, h: &dyn Fn(C) -> f64, which: Kernel, order: usize, n_mc: usize, seed: u64) -> Result<SeriesEstimate> {
        let mut c = vec![1.0];
        let mut s = vec![0.0];
        let mut n = vec![0];
        let mut pts = Vec::with_capacity(order);
        for k in 1..=order {
            let mut r = rng::stream(seed, k as u64);
            let mut xs = Vec::with_capacity(n_mc);
            while xs.len() < n_mc {
                pts.clear();
                for _ in 0..k {
                    pts.push(self.sample(&mut r)?);
                }
                let f = match self.f_plus_k(&pts) {
                    Ok(f) => f,
                    Err(Error::CoincidentPoints) => continue,
                    Err(e) => return Err(e),
                };
                let f = if which == Kernel::Minus && k % 2 == 1 { -f } else { f };
                xs.push(f * pts.iter().map(|&z| h(z)).product::<f64>());
            }
            let fact: f64 = (1..=k).map(|j| j as f64).product();
            let scale = self.area.powi(k as i32) / fact;
            let e = stats::mean_iid(&xs);
            c.push(scale * e.value);
            s.push(scale * e.stderr);
            n.push(n_mc);
        }
        Ok(SeriesEstimate::from_terms(c, s, n))
    }
}

fn image_area_mc(base: &HarmonicContext, psi: &crate::conformal::DiskAutomorphism) -> f64 {
    let mut r = rng::stream(0x1a6e, 0);
    let n = 20_000;
    let s: f64 = (0..n).map(|_| psi.deriv(base.sample(&mut r).unwrap()).norm_sqr()).sum();
    base.area() * s / n as f64
}

/// Convenience: the discrete context of a whole lattice domain.
pub fn lattice_context(d: &DiscreteDomain) -> Result<HarmonicContext> {
    let all: Vec<usize> = (0..d.n_interior()).collect();
    Ok(HarmonicContext::Discrete(Arc::new(DiscreteGreen::new(d, &all)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::DiskAutomorphism;

    fn disk() -> HarmonicContext {
        HarmonicContext::Disk { center: C::new(0.0, 0.0), radius: 1.0 }
    }

    #[test]
    fn low_orders() {
        let g = disk();
        assert!((f_plus_k(&g, &[C::new(0.0, 0.0)]).unwrap() - 2f64.powf(0.25)).abs() < 1e-15);
        assert_eq!(f_plus_k(&g, &[]).unwrap(), 1.0);
        let (x, y) = (C::new(0.2, -0.1), C::new(-0.4, 0.3));
        let want = g.conformal_radius(x).unwrap().powf(-0.125)
            * g.conformal_radius(y).unwrap().powf(-0.125)
            * (2.0 * (g.green(x, y).unwrap() / 2.0).cosh()).sqrt();
        assert!((f_plus_k(&g, &[x, y]).unwrap() - want).abs() < 1e-12);
        assert_eq!(f_minus_k(&g, &[x]).unwrap(), -f_plus_k(&g, &[x]).unwrap());
        assert_eq!(f_minus_k(&g, &[x, y]).unwrap(), f_plus_k(&g, &[x, y]).unwrap());
        assert!(matches!(f_plus_k(&g, &[x, x]), Err(Error::CoincidentPoints)));
    }

    #[test]
    fn permutation_and_covariance() {
        let g = disk();
        let mut r = rng::stream(4, 0);
        for _ in 0..20 {
            let pts: Vec<C> = (0..5).map(|_| g.sample(&mut r).unwrap()).collect();
            let f = f_plus_k(&g, &pts).unwrap();
            let mut p = pts.clone();
            p.reverse();
            p.swap(0, 2);
            assert!((f_plus_k(&g, &p).unwrap() - f).abs() <= 1e-12 * f);
            let psi = DiskAutomorphism::random(&mut r, 0.7);
            let img: Vec<C> = pts.iter().map(|&z| psi.apply(z)).collect();
            let jac: f64 = pts.iter().map(|&z| psi.deriv(z).norm().powf(0.125)).product();
            assert!((jac * f_plus_k(&g, &img).unwrap() - f).abs() < 1e-5 * f);
        }
    }

    #[test]
    fn series_basics() {
        let g = disk();
        let s = series_const(&g, 0.0, Kernel::Plus, 6, 1000, 1).unwrap();
        assert_eq!(s.value, 1.0);
        // K = 1: 1 + h ∫ 2^{1/4} CR^{-1/8}; ∫_𝔻 (1 − r²)^{-1/8} = π/(7/8)
        let s = series_const(&g, 0.5, Kernel::Plus, 1, 20_000, 2).unwrap();
        let want = 1.0 + 0.5 * 2f64.powf(0.25) * std::f64::consts::PI / 0.875;
        assert!((s.value - want).abs() < 4.0 * s.stderr, "{} vs {want} ± {}", s.value, s.stderr);
        let s2 = series_const(&g, 0.5, Kernel::Plus, 1, 40_000, 3).unwrap();
        let ratio = (s.stderrs[1] / s2.stderrs[1]).powi(2);
        assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
        let a = series_const(&g, 0.5, Kernel::Plus, 4, 4000, 5).unwrap();
        let b = series_const(&g, 0.5, Kernel::Plus, 6, 4000, 5).unwrap();
        assert!(a.tail_bound > 0.0);
        assert!((a.value - b.value).abs() < a.tail_bound + 3.0 * b.stderr, "{} {} {}", a.value, b.value, a.tail_bound);
        let m = series_const(&g, 0.5, Kernel::Minus, 3, 2000, 6).unwrap();
        assert!(m.contributions[1] < 0.0 && m.contributions[2] > 0.0 && m.contributions[3] < 0.0);
    }

    #[test]
    fn moment_series_matches_exponential_for_small_m() {
        let m: Vec<f64> = (0..1000).map(|k| 0.01 * ((k % 7) as f64 - 3.0)).collect();
        let s = moment_series(&m, 6);
        let exact = stats::mean(&m.iter().map(|x| x.exp()).collect::<Vec<_>>());
        assert!((s.value - exact).abs() < 1e-10);
    }

    #[test]
    fn image_context_agrees_with_pulled_back_kernel() {
        let mut r = rng::stream(8, 0);
        let psi = DiskAutomorphism::random(&mut r, 0.5);
        let img = ImageContext::new(disk(), psi);
        // ψ(𝔻) = 𝔻, so the image context is the disk again
        assert!((img.area() - std::f64::consts::PI).abs() < 0.05);
        for _ in 0..10 {
            let pts: Vec<C> = (0..3).map(|_| disk().sample(&mut r).unwrap()).collect();
            assert!((img.f_plus_k(&pts).unwrap() - f_plus_k(&disk(), &pts).unwrap()).abs() < 1e-8);
        }
    }
}
