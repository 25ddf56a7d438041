//! Loewner-chain numerics with vertical-slit elementary maps.
//!
//! A step (x, τ) is g(z) = x + √((z − x)² + 4τ): it sends the slit from x to
//! x + 2i√τ onto the real line, fixes ∞ with g(z) = z + 2τ/z + O(z⁻²), and
//! adds τ to the half-plane capacity. A chain of steps is a discretized
//! Loewner flow driven by the piecewise constant function equal to x on each
//! step.

use std::fmt::Write as _;
use std::io::{Read, Write};

use num_complex::Complex64 as C;
use rand_distr::{Distribution, StandardNormal};

use crate::conformal::{slit_forward, slit_inverse, HalfPlaneMap};
use crate::domain::DiscreteDomain;
use crate::error::{Error, Result};
use crate::interface::LatticePath;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlitStep {
    pub x: f64,
    pub tau: f64,
}

/// Base uniformization followed by the slit steps peeled so far.
#[derive(Clone, Debug)]
pub struct ConformalChain {
    pub base: HalfPlaneMap,
    pub steps: Vec<SlitStep>,
}

#[derive(Clone, Debug, Default)]
pub struct DrivingFunction {
    /// (t, W) with t the cumulative capacity; starts at (0, 0).
    pub samples: Vec<(f64, f64)>,
    pub total_capacity: f64,
    /// Largest |W_k − W_{k−1}|.
    pub max_jump: f64,
    /// Path vertex peeled at each sample after the first.
    pub path_index: Vec<usize>,
    /// Path vertices dropped because they mapped onto (or below) ℝ.
    pub skipped: usize,
    /// Per-step condition proxy |g'(tip)|⁻¹ of the map that receives the tip.
    pub cond: Vec<f64>,
}

impl DrivingFunction {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,W\n");
        for (t, w) in &self.samples {
            let _ = writeln!(s, "{t:.12e},{w:.12e}");
        }
        s
    }

    /// W at capacity t by linear interpolation (clamped to the last sample).
    pub fn at(&self, t: f64) -> f64 {
        let s = &self.samples;
        if s.is_empty() {
            return 0.0;
        }
        let k = s.partition_point(|p| p.0 <= t);
        if k == 0 {
            return s[0].1;
        }
        if k >= s.len() {
            return s[s.len() - 1].1;
        }
        let (t0, w0) = s[k - 1];
        let (t1, w1) = s[k];
        if t1 == t0 {
            w1
        } else {
            w0 + (w1 - w0) * (t - t0) / (t1 - t0)
        }
    }
}

/// Sup distance between two driving functions on a common grid of `n`
/// capacities covering the shorter one.
pub fn sup_distance(a: &DrivingFunction, b: &DrivingFunction, n: usize) -> f64 {
    let tmax = a.total_capacity.min(b.total_capacity);
    (0..=n)
        .map(|k| tmax * k as f64 / n as f64)
        .map(|t| (a.at(t) - b.at(t)).abs())
        .fold(0.0, f64::max)
}

impl ConformalChain {
    pub fn half_plane() -> Self {
        ConformalChain { base: HalfPlaneMap::Identity, steps: Vec::new() }
    }

    pub fn capacity(&self) -> f64 {
        self.steps.iter().map(|s| s.tau).sum()
    }

    /// Slits only, on points already in ℍ.
    pub fn apply_slits(&self, w: C) -> (C, C) {
        apply(&self.steps, w)
    }

    /// g_t∘φ and its derivative at a point of the original domain.
    pub fn forward_deriv(&self, z: C) -> (C, C) {
        let (w, d0) = self.base.map_deriv(z);
        let (w, d1) = apply(&self.steps, w);
        (w, d0 * d1)
    }

    pub fn forward(&self, z: C) -> C {
        self.forward_deriv(z).0
    }

    pub fn inverse(&self, w: C) -> C {
        let mut u = w;
        for s in self.steps.iter().rev() {
            u = slit_inverse(s.x, s.tau, u);
        }
        self.base.inverse(u)
    }

    /// |g(z) − z − 2t/z|·|z|² at z = r·i, with g − z accumulated from
    /// the per-step displacements so that nothing cancels.
    pub fn hydrodynamic_residual(&self, r: f64) -> f64 {
        let z0 = C::new(0.0, r);
        let mut z = z0;
        let mut disp = C::new(0.0, 0.0);
        for s in &self.steps {
            let w = z - s.x;
            let q = 1.0 + 4.0 * s.tau / (w * w);
            let d = (4.0 * s.tau / w) / (q.sqrt() + 1.0);
            disp += d;
            z += d;
        }
        (disp - 2.0 * self.capacity() / z0).norm() * r * r
    }

    /// Little-endian: magic, step count, residual at 1e6, then (x, τ) pairs.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(b"SLITCHN1")?;
        out.write_all(&(self.steps.len() as u64).to_le_bytes())?;
        out.write_all(&self.hydrodynamic_residual(1e6).to_le_bytes())?;
        for s in &self.steps {
            out.write_all(&s.x.to_le_bytes())?;
            out.write_all(&s.tau.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the steps back; the base map is not stored and comes back as ℍ.
    pub fn read_binary<R: Read>(mut inp: R) -> Result<(Vec<SlitStep>, f64)> {
        let mut magic = [0u8; 8];
        inp.read_exact(&mut magic)?;
        if &magic != b"SLITCHN1" {
            return Err(Error::Format("not a slit chain file".into()));
        }
        let mut b8 = [0u8; 8];
        inp.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        inp.read_exact(&mut b8)?;
        let residual = f64::from_le_bytes(b8);
        let mut steps = Vec::with_capacity(n);
        for _ in 0..n {
            inp.read_exact(&mut b8)?;
            let x = f64::from_le_bytes(b8);
            inp.read_exact(&mut b8)?;
            steps.push(SlitStep { x, tau: f64::from_le_bytes(b8) });
        }
        Ok((steps, residual))
    }
}

fn apply(steps: &[SlitStep], mut w: C) -> (C, C) {
    let mut d = C::new(1.0, 0.0);
    for s in steps {
        let (nw, dd) = slit_forward(s.x, s.tau, w);
        w = nw;
        d *= dd;
    }
    (w, d)
}

/// Options for peeling.
#[derive(Clone, Copy, Debug)]
pub struct PeelOptions {
    /// Points whose current image has Im ≤ eps·scale are skipped.
    pub eps: f64,
    /// Stop once the capacity reaches this value.
    pub t_max: f64,
}

impl Default for PeelOptions {
    fn default() -> Self {
        PeelOptions { eps: 1e-12, t_max: f64::INFINITY }
    }
}

/// Peel points already in ℍ (the curve from 0 outward) one at a time.
pub fn peel_points(points: &[C], opts: PeelOptions) -> Result<(DrivingFunction, Vec<SlitStep>)> {
    let mut steps: Vec<SlitStep> = Vec::with_capacity(points.len());
    let mut df = DrivingFunction { samples: vec![(0.0, 0.0)], ..Default::default() };
    let scale = points.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1e-300);
    let mut t = 0.0;
    let mut last: Option<C> = None;
    for (k, &p) in points.iter().enumerate() {
        if t >= opts.t_max {
            break;
        }
        let (w, d) = apply(&steps, p);
        if !w.is_finite() {
            return Err(Error::Numerical(format!("non-finite image at path vertex {k}")));
        }
        if w.im <= opts.eps * scale {
            df.skipped += 1;
            continue;
        }
        if let Some(q) = last {
            if (p - q).norm() <= 4.0 * f64::EPSILON * scale {
                return Err(Error::DegenerateStep(k));
            }
        }
        last = Some(p);
        let step = SlitStep { x: w.re, tau: w.im * w.im / 4.0 };
        t += step.tau;
        let prev = df.samples.last().unwrap().1;
        df.max_jump = df.max_jump.max((step.x - prev).abs());
        df.samples.push((t, step.x));
        df.path_index.push(k);
        df.cond.push(1.0 / d.norm());
        steps.push(step);
    }
    df.total_capacity = t;
    Ok((df, steps))
}

/// Map the lattice path into ℍ with the domain's uniformization (a ↦ 0,
/// b ↦ ∞) and peel it.
pub fn extract_driving(path: &LatticePath, d: &DiscreteDomain) -> Result<(DrivingFunction, ConformalChain)> {
    extract_driving_with(path, d, PeelOptions::default())
}

pub fn extract_driving_with(
    path: &LatticePath,
    d: &DiscreteDomain,
    opts: PeelOptions,
) -> Result<(DrivingFunction, ConformalChain)> {
    let base = HalfPlaneMap::for_shape(&d.shape)?;
    let pts = mapped_points(path, &base);
    let (df, steps) = peel_points(&pts, opts)?;
    Ok((df, ConformalChain { base, steps }))
}

pub fn mapped_points(path: &LatticePath, base: &HalfPlaneMap) -> Vec<C> {
    path.positions().iter().map(|p| base.map(C::new(p[0], p[1]))).collect()
}

/// Half-plane capacity of the hull of a curve in ℍ starting on ℝ.
pub fn hcap_of_hull(points: &[C]) -> Result<f64> {
    Ok(peel_points(points, PeelOptions::default())?.0.total_capacity)
}

/// Shortest prefix whose capacity reaches t; the whole path if it never does.
pub fn stop_at_capacity(path: &LatticePath, d: &DiscreteDomain, t: f64) -> Result<LatticePath> {
    if t <= 0.0 {
        return Ok(path.prefix(d, 0));
    }
    let (df, _) = extract_driving_with(path, d, PeelOptions { t_max: t, ..Default::default() })?;
    if df.total_capacity < t {
        return Ok(path.prefix(d, path.len()));
    }
    let k = *df.path_index.last().unwrap();
    Ok(path.prefix(d, k))
}

/// Trace of the Loewner flow driven by the step data:
/// γ_k = g_1⁻¹∘…∘g_{k−1}⁻¹(x_k + 2i√τ_k).
pub fn trace_from_steps(steps: &[SlitStep]) -> Vec<C> {
    (0..steps.len())
        .map(|k| {
            let mut u = C::new(steps[k].x, 2.0 * steps[k].tau.sqrt());
            for s in steps[..k].iter().rev() {
                u = slit_inverse(s.x, s.tau, u);
            }
            u
        })
        .collect()
}

/// Forward SLE_κ: Brownian driving sampled every dt, flow solved backward
/// from each tip. O(n²) in the number of steps.
pub fn sample_sle(kappa: f64, total_t: f64, dt: f64, seed: u64) -> Result<Vec<C>> {
    if kappa < 0.0 || dt <= 0.0 || total_t < 0.0 {
        return Err(Error::BadParam(format!("kappa={kappa} dt={dt} T={total_t}")));
    }
    let steps = sle_steps(kappa, total_t, dt, seed);
    Ok(trace_from_steps(&steps))
}

/// The driving data alone: x_k = √κ B_{k dt}, τ = dt.
pub fn sle_steps(kappa: f64, total_t: f64, dt: f64, seed: u64) -> Vec<SlitStep> {
    let n = (total_t / dt).round() as usize;
    let mut r = rng::stream(seed, 0);
    let mut w = 0.0;
    (0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut r);
            w += (kappa * dt).sqrt() * g;
            SlitStep { x: w, tau: dt }
        })
        .collect()
}

/// True if no two non-adjacent segments of the polyline cross or touch
/// closer than `tol`. Uses a uniform grid so long traces stay cheap.
pub fn is_simple(points: &[C], tol: f64) -> bool {
    use std::collections::HashMap;
    let n = points.len();
    if n < 4 {
        return true;
    }
    let len: f64 = points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let cell = (len / n as f64).max(tol) * 2.0;
    let key = |p: C| ((p.re / cell).floor() as i64, (p.im / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for k in 0..n - 1 {
        let (a, b) = (points[k], points[k + 1]);
        let (lo, hi) = (key(C::new(a.re.min(b.re) - tol, a.im.min(b.im) - tol)), key(C::new(a.re.max(b.re) + tol, a.im.max(b.im) + tol)));
        for i in lo.0..=hi.0 {
            for j in lo.1..=hi.1 {
                let bucket = grid.entry((i, j)).or_default();
                for &m in bucket.iter() {
                    if k - m >= 2 && seg_dist(points[m], points[m + 1], a, b) < tol {
                        return false;
                    }
                }
                bucket.push(k);
            }
        }
    }
    true
}

fn seg_dist(p: C, q: C, r: C, s: C) -> f64 {
    let cross = |u: C, v: C| u.re * v.im - u.im * v.re;
    let (d1, d2) = (cross(q - p, r - p), cross(q - p, s - p));
    let (d3, d4) = (cross(s - r, p - r), cross(s - r, q - r));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    let pt_seg = |x: C, a: C, b: C| {
        let ab = b - a;
        let t = if ab.norm_sqr() == 0.0 { 0.0 } else { (((x - a).re * ab.re + (x - a).im * ab.im) / ab.norm_sqr()).clamp(0.0, 1.0) };
        (a + ab * t - x).norm()
    };
    pt_seg(p, r, s).min(pt_seg(q, r, s)).min(pt_seg(r, p, q)).min(pt_seg(s, p, q))
}

/// Moment check of a driving ensemble: for each t in `ts`, the sample
/// variance of W_t over the ensemble.
pub fn driving_variance(ensemble: &[DrivingFunction], ts: &[f64]) -> Vec<(f64, f64, usize)> {
    ts.iter()
        .map(|&t| {
            let vals: Vec<f64> = ensemble.iter().filter(|d| d.total_capacity >= t).map(|d| d.at(t)).collect();
            (t, crate::stats::variance(&vals), vals.len())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vertical(y: f64, n: usize) -> Vec<C> {
        (1..=n).map(|k| C::new(0.0, y * k as f64 / n as f64)).collect()
    }

    #[test]
    fn vertical_slit_has_zero_driving_and_quarter_square_capacity() {
        let (df, steps) = peel_points(&vertical(0.7, 400), PeelOptions::default()).unwrap();
        assert!(df.samples.iter().all(|s| s.1.abs() < 1e-3));
        assert!((df.total_capacity / (0.49 / 4.0) - 1.0).abs() < 0.01);
        assert!((hcap_of_hull(&vertical(2.0, 50)).unwrap() - 1.0).abs() < 1e-2);
        let chain = ConformalChain { base: HalfPlaneMap::Identity, steps };
        // the slit itself lands on ℝ, both sides
        for p in vertical(0.7, 7) {
            let w = chain.apply_slits(p + C::new(1e-9, 0.0)).0;
            assert!(w.im.abs() < 1e-3, "{w}");
        }
        assert!(chain.hydrodynamic_residual(1e6) < 1e-6);
    }

    #[test]
    fn sle_zero_is_straight_and_roundtrips() {
        let tr = sample_sle(0.0, 1.0, 1e-3, 3).unwrap();
        assert!(tr.iter().all(|z| z.re.abs() < 1e-9));
        assert!((tr.last().unwrap().im - 2.0).abs() < 1e-6);
        let (df, _) = peel_points(&tr, PeelOptions::default()).unwrap();
        assert!(df.samples.iter().all(|s| s.1.abs() < 1e-3));
        assert!((df.total_capacity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sle3_roundtrip_and_capacity() {
        let steps = sle_steps(3.0, 0.5, 1e-3, 11);
        let tr = trace_from_steps(&steps);
        let (df, got) = peel_points(&tr, PeelOptions::default()).unwrap();
        assert_eq!(df.skipped, 0);
        for (a, b) in steps.iter().zip(&got) {
            assert!((a.x - b.x).abs() < 1e-2 * (1.0 + a.x.abs()));
            assert!((a.tau - b.tau).abs() < 1e-2 * a.tau);
        }
        assert!((df.total_capacity - 0.5).abs() < 1e-6);
        let back = trace_from_steps(&got);
        for (p, q) in tr.iter().zip(&back) {
            assert!((p - q).norm() < 1e-2 * p.norm());
        }
        assert!(tr.iter().all(|z| z.im >= 0.0));
        assert!(is_simple(&tr, 1e-9));
        let chain = ConformalChain { base: HalfPlaneMap::Identity, steps: got };
        assert!(chain.hydrodynamic_residual(1e6) < 1e-3 * chain.steps.len() as f64);
    }

    #[test]
    fn capacities_are_monotone_on_prefixes() {
        let tr = sample_sle(3.0, 0.2, 1e-3, 5).unwrap();
        let caps: Vec<f64> = [0, 10, 50, 100, 200].iter().map(|&k| hcap_of_hull(&tr[..k]).unwrap()).collect();
        assert_eq!(caps[0], 0.0);
        assert!(caps.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn simplicity_detects_crossings() {
        let pts = vec![C::new(0.0, 0.0), C::new(1.0, 1.0), C::new(1.0, 0.0), C::new(0.0, 1.0)];
        assert!(!is_simple(&pts, 1e-9));
        let pts = vec![C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(1.0, 1.0), C::new(0.0, 1.0)];
        assert!(is_simple(&pts, 1e-9));
    }

    #[test]
    fn chain_binary_roundtrip() {
        let chain = ConformalChain { base: HalfPlaneMap::Identity, steps: sle_steps(3.0, 0.01, 1e-3, 1) };
        let mut buf = Vec::new();
        chain.write_binary(&mut buf).unwrap();
        let (steps, res) = ConformalChain::read_binary(&buf[..]).unwrap();
        assert_eq!(steps, chain.steps);
        assert!(res.is_finite());
    }

    #[test]
    fn driving_interpolation_and_sup_distance() {
        let a = DrivingFunction { samples: vec![(0.0, 0.0), (1.0, 1.0)], total_capacity: 1.0, ..Default::default() };
        let b = DrivingFunction { samples: vec![(0.0, 0.0), (2.0, 0.0)], total_capacity: 2.0, ..Default::default() };
        assert!((a.at(0.25) - 0.25).abs() < 1e-15);
        assert!((sup_distance(&a, &b, 10) - 1.0).abs() < 1e-15);
    }
}
