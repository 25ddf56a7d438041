//! Critical Ising model on a finite graph with fixed boundary spins and an
//! external field. Dynamics: Swendsen-Wang moves with a ghost spin for the
//! field, interleaved with heat-bath sweeps.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{ArcSide, DiscreteDomain};
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::graph::SiteGraph;
use crate::rng::{self, ChainRng, Rng};
use crate::stats::{self, Estimate};
use crate::union_find::UnionFind;

/// ½·log(1 + √2).
pub const BETA_C: f64 = 0.440_686_793_509_771_5;

/// FK edge probability at criticality, 1 − e^{−2β_c} = 2 − √2.
pub const P_C: f64 = 0.585_786_437_626_905;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dobrushin,
    Plus,
    Minus,
    Free,
}

/// Fixed spins per vertex implied by a boundary condition. Interior
/// vertices are always free; under free bc so are the boundary vertices.
pub fn fixed_spins(graph: &SiteGraph, bc: BoundaryCondition) -> Result<Vec<Option<i8>>> {
    if bc == BoundaryCondition::Dobrushin {
        let has = |s| graph.side.iter().any(|x| *x == Some(s));
        if !has(ArcSide::Minus) || !has(ArcSide::Plus) {
            return Err(Error::BadParam("Dobrushin bc needs two nonempty arcs".into()));
        }
    }
    Ok((0..graph.n)
        .map(|v| {
            if graph.interior[v] {
                return None;
            }
            match bc {
                BoundaryCondition::Free => None,
                BoundaryCondition::Plus => Some(1),
                BoundaryCondition::Minus => Some(-1),
                BoundaryCondition::Dobrushin => match graph.side[v] {
                    Some(ArcSide::Minus) => Some(-1),
                    _ => Some(1),
                },
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinConfig {
    /// One spin per graph vertex (interior first, then boundary for domain graphs).
    pub spins: Vec<i8>,
    pub bc: BoundaryCondition,
}

impl SpinConfig {
    pub fn magnetization(&self, graph: &SiteGraph) -> i64 {
        (0..graph.n).filter(|&v| graph.interior[v]).map(|v| self.spins[v] as i64).sum()
    }
}

/// Immutable description of a spin system: graph, which spins are fixed,
/// and the field on each vertex.
#[derive(Debug)]
pub struct IsingSystem {
    pub graph: SiteGraph,
    pub fixed: Vec<Option<i8>>,
    pub field: Vec<f64>,
    pub beta: f64,
    free: Vec<u32>,
    free_of: Vec<u32>,
    nbr_start: Vec<u32>,
    nbr: Vec<u32>,
    ff_edges: Vec<(u32, u32)>,
    fixed_plus: Vec<u8>,
    fixed_minus: Vec<u8>,
    hfree: Vec<f64>,
    /// P(σ=+) indexed by (local spin sum + offset) when the field is uniform.
    hb_table: Option<(i32, Vec<f64>)>,
    /// For the magnetization: which free vertices are interior.
    free_interior: Vec<bool>,
    fixed_interior_sum: i64,
}

impl IsingSystem {
    pub fn new(graph: SiteGraph, fixed: Vec<Option<i8>>, field: Vec<f64>, beta: f64) -> Result<Self> {
        let n = graph.n;
        if fixed.len() != n || field.len() != n {
            return Err(Error::BadParam("fixed/field length mismatch".into()));
        }
        if field.iter().any(|h| !h.is_finite()) {
            return Err(Error::BadParam("field must be finite".into()));
        }
        let mut free = Vec::new();
        let mut free_of = vec![u32::MAX; n];
        for v in 0..n {
            if fixed[v].is_none() {
                free_of[v] = free.len() as u32;
                free.push(v as u32);
            }
        }
        let nf = free.len();
        let mut nbr_lists: Vec<Vec<u32>> = vec![Vec::new(); nf];
        let mut fixed_plus = vec![0u8; nf];
        let mut fixed_minus = vec![0u8; nf];
        let mut ff_edges = Vec::new();
        for &(u, w) in &graph.edges {
            let (u, w) = (u as usize, w as usize);
            match (fixed[u], fixed[w]) {
                (None, None) => {
                    let (a, b) = (free_of[u], free_of[w]);
                    nbr_lists[a as usize].push(b);
                    nbr_lists[b as usize].push(a);
                    ff_edges.push((a, b));
                }
                (None, Some(s)) | (Some(s), None) => {
                    let x = if fixed[u].is_none() { free_of[u] } else { free_of[w] } as usize;
                    if s > 0 {
                        fixed_plus[x] += 1;
                    } else {
                        fixed_minus[x] += 1;
                    }
                }
                (Some(_), Some(_)) => {}
            }
        }
        let mut nbr_start = vec![0u32; nf + 1];
        let mut nbr = Vec::new();
        for (k, l) in nbr_lists.iter().enumerate() {
            nbr.extend_from_slice(l);
            nbr_start[k + 1] = nbr.len() as u32;
        }
        let hfree: Vec<f64> = free.iter().map(|&v| field[v as usize]).collect();
        let uniform = hfree.first().copied().filter(|h0| hfree.iter().all(|h| h == h0));
        let max_deg = (0..nf)
            .map(|k| (nbr_start[k + 1] - nbr_start[k]) as i32 + fixed_plus[k] as i32 + fixed_minus[k] as i32)
            .max()
            .unwrap_or(0);
        let hb_table = uniform.map(|h| {
            let t = (-max_deg..=max_deg)
                .map(|s| 1.0 / (1.0 + (-2.0 * (beta * s as f64 + h)).exp()))
                .collect();
            (max_deg, t)
        });
        let free_interior = free.iter().map(|&v| graph.interior[v as usize]).collect();
        let fixed_interior_sum = (0..n)
            .filter(|&v| graph.interior[v])
            .map(|v| fixed[v].unwrap_or(0) as i64)
            .sum();
        Ok(IsingSystem {
            graph,
            fixed,
            field,
            beta,
            free,
            free_of,
            nbr_start,
            nbr,
            ff_edges,
            fixed_plus,
            fixed_minus,
            hfree,
            hb_table,
            free_interior,
            fixed_interior_sum,
        })
    }

    /// System for a domain under a boundary condition; the field acts on interior vertices.
    pub fn on_domain(d: &DiscreteDomain, bc: BoundaryCondition, field: &FieldSpec) -> Result<Self> {
        let g = SiteGraph::from_domain(d);
        let fixed = fixed_spins(&g, bc)?;
        let h = field.per_vertex(d);
        IsingSystem::new(g, fixed, h, BETA_C)
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_vertices(&self) -> &[u32] {
        &self.free
    }

    pub fn free_index(&self, v: usize) -> Option<usize> {
        let k = self.free_of[v];
        if k == u32::MAX { None } else { Some(k as usize) }
    }

    /// Unnormalized log-weight β Σ σσ + Σ H σ of a full configuration.
    pub fn log_weight(&self, spins: &[i8]) -> f64 {
        let mut e = 0.0;
        for &(u, v) in &self.graph.edges {
            e += (spins[u as usize] * spins[v as usize]) as f64;
        }
        let mut h = 0.0;
        for v in 0..self.graph.n {
            h += self.field[v] * spins[v] as f64;
        }
        self.beta * e + h
    }
}

/// One Markov chain over the free spins of a system.
pub struct IsingChain {
    pub sys: Arc<IsingSystem>,
    s: Vec<i8>,
    rng: ChainRng,
    uf: UnionFind,
    decided: Vec<u32>,
    flip: Vec<bool>,
    epoch: u32,
    pub sweeps_done: u64,
    pub tau: f64,
}

impl IsingChain {
    pub fn new(sys: Arc<IsingSystem>, seed: u64, stream: u64) -> Self {
        let mut rng = rng::stream(seed, stream);
        let nf = sys.n_free();
        let s = (0..nf).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        IsingChain {
            uf: UnionFind::new(nf + 2),
            decided: vec![0; nf + 2],
            flip: vec![false; nf + 2],
            sys,
            s,
            rng,
            epoch: 0,
            sweeps_done: 0,
            tau: f64::NAN,
        }
    }

    pub fn set_all(&mut self, spin: i8) {
        self.s.iter_mut().for_each(|x| *x = spin);
    }

    pub fn free_spins(&self) -> &[i8] {
        &self.s
    }

    pub fn rng(&mut self) -> &mut ChainRng {
        &mut self.rng
    }

    /// Σ σ over interior vertices (fixed interior spins included).
    pub fn magnetization(&self) -> i64 {
        let mut m = self.sys.fixed_interior_sum;
        for (k, &x) in self.s.iter().enumerate() {
            if self.sys.free_interior[k] {
                m += x as i64;
            }
        }
        m
    }

    /// Full configuration on the graph.
    pub fn config(&self, bc: BoundaryCondition) -> SpinConfig {
        let mut spins = vec![0i8; self.sys.graph.n];
        self.fill(&mut spins);
        SpinConfig { spins, bc }
    }

    pub fn fill(&self, out: &mut [i8]) {
        for v in 0..self.sys.graph.n {
            out[v] = match self.sys.fixed[v] {
                Some(s) => s,
                None => self.s[self.sys.free_of[v] as usize],
            };
        }
    }

    #[inline]
    fn local_sum(&self, k: usize) -> i32 {
        let sys = &*self.sys;
        let mut acc = sys.fixed_plus[k] as i32 - sys.fixed_minus[k] as i32;
        for &m in &sys.nbr[sys.nbr_start[k] as usize..sys.nbr_start[k + 1] as usize] {
            acc += self.s[m as usize] as i32;
        }
        acc
    }

    pub fn heat_bath_sweep(&mut self) {
        let nf = self.s.len();
        let sys = self.sys.clone();
        for k in 0..nf {
            let sum = self.local_sum(k);
            let p = match &sys.hb_table {
                Some((off, t)) => t[(sum + off) as usize],
                None => 1.0 / (1.0 + (-2.0 * (sys.beta * sum as f64 + sys.hfree[k])).exp()),
            };
            self.s[k] = if self.rng.random::<f64>() < p { 1 } else { -1 };
        }
    }

    /// Swendsen-Wang move. Bonds to fixed spins or to the ghost freeze a
    /// cluster; every other cluster is flipped with probability ½.
    pub fn sw_step(&mut self) {
        let sys = self.sys.clone();
        let nf = self.s.len();
        let plus = nf;
        let minus = nf + 1;
        let p = 1.0 - (-2.0 * sys.beta).exp();
        let q = 1.0 - p;
        self.uf.reset();
        for &(a, b) in &sys.ff_edges {
            let (a, b) = (a as usize, b as usize);
            if self.s[a] == self.s[b] && self.rng.random::<f64>() < p {
                self.uf.union(a, b);
            }
        }
        for k in 0..nf {
            let h = sys.hfree[k];
            let (c, aligned) = if self.s[k] > 0 {
                (sys.fixed_plus[k] as i32, h > 0.0)
            } else {
                (sys.fixed_minus[k] as i32, h < 0.0)
            };
            let mut stay = q.powi(c);
            if aligned {
                stay *= (-2.0 * h.abs()).exp();
            }
            if stay < 1.0 && self.rng.random::<f64>() >= stay {
                self.uf.union(k, if self.s[k] > 0 { plus } else { minus });
            }
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.decided.iter_mut().for_each(|d| *d = 0);
            self.epoch = 1;
        }
        let rp = self.uf.find(plus);
        let rm = self.uf.find(minus);
        for k in 0..nf {
            let r = self.uf.find(k);
            if r == rp || r == rm {
                continue;
            }
            if self.decided[r] != self.epoch {
                self.decided[r] = self.epoch;
                self.flip[r] = self.rng.random::<bool>();
            }
            if self.flip[r] {
                self.s[k] = -self.s[k];
            }
        }
    }

    /// One composite sweep: a cluster move followed by a heat-bath sweep.
    pub fn sweep(&mut self) {
        self.sw_step();
        self.heat_bath_sweep();
        self.sweeps_done += 1;
    }

    /// Burn-in of max(100, 10·τ) sweeps, with τ the batch-means
    /// autocorrelation time of |Σσ|. Returns τ.
    pub fn equilibrate(&mut self) -> f64 {
        const CAP: usize = 20_000;
        let mut series = Vec::new();
        let mut target = 100usize;
        loop {
            while series.len() < target {
                self.sweep();
                series.push(self.magnetization().abs() as f64);
            }
            // measure τ on the second half, which is closer to equilibrium
            let tau = stats::batch_means(&series[series.len() / 2..]).tau;
            let need = 100usize.max((10.0 * tau).ceil() as usize);
            if need <= series.len() || series.len() >= CAP {
                self.tau = tau;
                return tau;
            }
            target = need.min(CAP);
        }
    }

    /// Run `n` samples spaced by `spacing` sweeps, calling `f` on each.
    pub fn run<F: FnMut(&IsingChain)>(&mut self, n: usize, spacing: usize, mut f: F) {
        for _ in 0..n {
            for _ in 0..spacing.max(1) {
                self.sweep();
            }
            f(self);
        }
    }
}

/// Draw one configuration after `sweeps` composite sweeps from a random start.
pub fn sample_ising(
    d: &DiscreteDomain,
    bc: BoundaryCondition,
    field: &FieldSpec,
    sweeps: usize,
    seed: u64,
) -> Result<SpinConfig> {
    if sweeps == 0 {
        return Err(Error::BadParam("sweeps must be at least 1".into()));
    }
    let sys = Arc::new(IsingSystem::on_domain(d, bc, field)?);
    let mut ch = IsingChain::new(sys, seed, 0);
    for _ in 0..sweeps {
        ch.sweep();
    }
    Ok(ch.config(bc))
}

/// Exact law over the free spins, states indexed by bitmask (bit k set ⇔
/// free vertex k is +1).
#[derive(Clone, Debug)]
pub struct ExactTable {
    pub free: Vec<u32>,
    pub base: Vec<i8>,
    pub probs: Vec<f64>,
}

pub const EXACT_MAX_INTERIOR: usize = 20;
pub const EXACT_MAX_FREE: usize = 22;

impl ExactTable {
    pub fn from_system(sys: &IsingSystem) -> Result<Self> {
        let nf = sys.n_free();
        if nf > EXACT_MAX_FREE {
            return Err(Error::TooLarge(nf, EXACT_MAX_FREE));
        }
        let n = sys.graph.n;
        let mut spins: Vec<i8> = (0..n).map(|v| sys.fixed[v].unwrap_or(-1)).collect();
        let base: Vec<i8> = (0..n).map(|v| sys.fixed[v].unwrap_or(0)).collect();
        let size = 1usize << nf;
        let mut logw = vec![0.0; size];
        let mut cur = sys.log_weight(&spins);
        logw[0] = cur;
        for g in 1..size {
            let b = g.trailing_zeros() as usize;
            let v = sys.free[b] as usize;
            let mut s = 0i32;
            for &(w, _) in sys.graph.neighbors(v) {
                s += spins[w as usize] as i32;
            }
            let sv = spins[v] as f64;
            cur += -2.0 * sv * (sys.beta * s as f64 + sys.field[v]);
            spins[v] = -spins[v];
            logw[g ^ (g >> 1)] = cur;
        }
        let mx = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for w in logw.iter_mut() {
            *w = (*w - mx).exp();
            z += *w;
        }
        logw.iter_mut().for_each(|w| *w /= z);
        Ok(ExactTable { free: sys.free.clone(), base, probs: logw })
    }

    pub fn config(&self, idx: usize) -> Vec<i8> {
        let mut s = self.base.clone();
        for (k, &v) in self.free.iter().enumerate() {
            s[v as usize] = if idx >> k & 1 == 1 { 1 } else { -1 };
        }
        s
    }

    pub fn index_of(&self, spins: &[i8]) -> usize {
        self.free
            .iter()
            .enumerate()
            .map(|(k, &v)| if spins[v as usize] > 0 { 1 << k } else { 0 })
            .sum()
    }

    pub fn expect<F: Fn(&[i8]) -> f64>(&self, f: F) -> f64 {
        let mut acc = 0.0;
        for (idx, p) in self.probs.iter().enumerate() {
            if *p != 0.0 {
                acc += p * f(&self.config(idx));
            }
        }
        acc
    }

    /// Reweight by exp(Σ H_v σ_v) and renormalize.
    pub fn reweight(&self, field: &[f64]) -> ExactTable {
        let mut out = self.clone();
        let mut z = 0.0;
        for idx in 0..self.probs.len() {
            let s = self.config(idx);
            let e: f64 = field.iter().zip(&s).map(|(h, x)| h * *x as f64).sum();
            out.probs[idx] = self.probs[idx] * e.exp();
            z += out.probs[idx];
        }
        out.probs.iter_mut().for_each(|p| *p /= z);
        out
    }

    pub fn total_variation(&self, other: &[f64]) -> f64 {
        0.5 * self.probs.iter().zip(other).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

pub fn exact_distribution(d: &DiscreteDomain, bc: BoundaryCondition, field: &FieldSpec) -> Result<ExactTable> {
    if d.n_interior() > EXACT_MAX_INTERIOR {
        return Err(Error::TooLarge(d.n_interior(), EXACT_MAX_INTERIOR));
    }
    ExactTable::from_system(&IsingSystem::on_domain(d, bc, field)?)
}

/// δ^{15k/8} E[(Σ σ)^k] with a block-jackknife standard error.
pub fn moment_estimate(
    d: &DiscreteDomain,
    bc: BoundaryCondition,
    field: &FieldSpec,
    k: u32,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if k == 0 {
        return Err(Error::BadParam("k must be at least 1".into()));
    }
    let sys = Arc::new(IsingSystem::on_domain(d, bc, field)?);
    let mut ch = IsingChain::new(sys, seed, 0);
    ch.equilibrate();
    let scale = d.delta.powf(15.0 / 8.0);
    let mut xs = Vec::with_capacity(n_samples);
    ch.run(n_samples, 1, |c| xs.push((c.magnetization() as f64 * scale).powi(k as i32)));
    Ok(stats::jackknife(&xs, 50, stats::mean))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InequalityReport {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// (lhs − rhs)/stderr; the inequality lhs ≥ rhs passes when z ≥ −3.
    pub z: f64,
    pub pass: bool,
}

impl InequalityReport {
    pub fn new(lhs: Estimate, rhs: Estimate, diff_se: f64) -> Self {
        let z = if diff_se > 0.0 { (lhs.value - rhs.value) / diff_se } else if lhs.value >= rhs.value { 0.0 } else { f64::NEG_INFINITY };
        InequalityReport { lhs, rhs, z, pass: z >= -3.0 }
    }
}

/// Collect `n` samples of a vector of observables of full configurations.
pub fn sample_observables<F>(
    d: &DiscreteDomain,
    bc: BoundaryCondition,
    field: &FieldSpec,
    n: usize,
    seed: u64,
    obs: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[i8]) -> Vec<f64>,
{
    let sys = Arc::new(IsingSystem::on_domain(d, bc, field)?);
    let mut ch = IsingChain::new(sys.clone(), seed, 0);
    ch.equilibrate();
    let mut buf = vec![0i8; sys.graph.n];
    let mut out = Vec::with_capacity(n);
    ch.run(n, 1, |c| {
        c.fill(&mut buf);
        out.push(obs(&buf));
    });
    Ok(out)
}

/// FKG: E[fg] ≥ E[f]E[g] for increasing f, g (given as functions of the full configuration).
pub fn fkg_inequality_test<F, G>(
    d: &DiscreteDomain,
    bc: BoundaryCondition,
    field: &FieldSpec,
    f: F,
    g: G,
    n: usize,
    seed: u64,
) -> Result<InequalityReport>
where
    F: Fn(&[i8]) -> f64,
    G: Fn(&[i8]) -> f64,
{
    let rows = sample_observables(d, bc, field, n, seed, |s| vec![f(s), g(s)])?;
    let m = rows.len();
    let cov = |idx: &[usize]| {
        let k = idx.len() as f64;
        let (mut sf, mut sg, mut sfg) = (0.0, 0.0, 0.0);
        for &i in idx {
            sf += rows[i][0];
            sg += rows[i][1];
            sfg += rows[i][0] * rows[i][1];
        }
        sfg / k - (sf / k) * (sg / k)
    };
    let c = stats::jackknife_idx(m, 50, cov);
    let efg = stats::jackknife_idx(m, 50, |idx| idx.iter().map(|&i| rows[i][0] * rows[i][1]).sum::<f64>() / idx.len() as f64);
    let prod = Estimate::new(efg.value - c.value, 0.0);
    Ok(InequalityReport::new(efg, prod, c.stderr))
}

/// Boundary-condition domination E^{hi}[f] ≥ E^{lo}[f] from independent runs.
pub fn bc_domination_test<F>(
    d: &DiscreteDomain,
    hi: (BoundaryCondition, &FieldSpec),
    lo: (BoundaryCondition, &FieldSpec),
    f: F,
    n: usize,
    seed: u64,
) -> Result<InequalityReport>
where
    F: Fn(&[i8]) -> f64 + Copy,
{
    let est = |bc, field: &FieldSpec, s| -> Result<Estimate> {
        let rows = sample_observables(d, bc, field, n, s, |x| vec![f(x)])?;
        let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        Ok(stats::jackknife(&xs, 50, stats::mean))
    };
    let a = est(hi.0, hi.1, rng::derive_seed(seed, "hi", 0))?;
    let b = est(lo.0, lo.1, rng::derive_seed(seed, "lo", 0))?;
    Ok(InequalityReport::new(a, b, (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, ShapeSpec, Site};

    fn square(m: u32) -> DiscreteDomain {
        build_domain(&ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]), 1.0 / m as f64).unwrap()
    }

    #[test]
    fn constants() {
        assert!((BETA_C - 0.5 * std::f64::consts::SQRT_2.ln_1p()).abs() < 1e-16);
        assert!((P_C - (1.0 - (-2.0 * BETA_C).exp())).abs() < 1e-15);
    }

    #[test]
    fn single_vertex_exact() {
        let d = square(2);
        let t = exact_distribution(&d, BoundaryCondition::Plus, &FieldSpec::zero()).unwrap();
        let p = t.expect(|s| (s[0] > 0) as i32 as f64);
        let want = (4.0 * BETA_C).exp() / ((4.0 * BETA_C).exp() + (-4.0 * BETA_C).exp());
        assert!((p - want).abs() < 1e-14);
        let t = exact_distribution(&d, BoundaryCondition::Free, &FieldSpec::zero()).unwrap();
        assert!((t.expect(|s| (s[0] > 0) as i32 as f64) - 0.5).abs() < 1e-14);
        assert!((t.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_reweighting_matches_field_table() {
        let d = square(3);
        let field = FieldSpec::raw(0.37);
        let t0 = exact_distribution(&d, BoundaryCondition::Dobrushin, &FieldSpec::zero()).unwrap();
        let th = exact_distribution(&d, BoundaryCondition::Dobrushin, &field).unwrap();
        let rw = t0.reweight(&field.per_vertex(&d));
        assert!(th.total_variation(&rw.probs) < 1e-12);
    }

    #[test]
    fn exact_spin_flip_covariance() {
        let d = square(3);
        let f = FieldSpec::raw(0.2);
        let a = exact_distribution(&d, BoundaryCondition::Plus, &f).unwrap();
        let b = exact_distribution(&d, BoundaryCondition::Minus, &f.scaled(-1.0)).unwrap();
        for idx in 0..a.probs.len() {
            let flipped: Vec<i8> = a.config(idx).iter().map(|x| -x).collect();
            assert!((a.probs[idx] - b.probs[b.index_of(&flipped)]).abs() < 1e-12);
        }
    }

    #[test]
    fn too_large() {
        let d = square(6);
        assert!(matches!(
            exact_distribution(&d, BoundaryCondition::Plus, &FieldSpec::zero()),
            Err(Error::TooLarge(25, 20))
        ));
    }

    #[test]
    fn heat_bath_detailed_balance_one_site() {
        // two-state chain at a single site with local sum s and field h
        for s in -4..=4 {
            for h in [-0.3, 0.0, 0.7] {
                let l = BETA_C * s as f64 + h;
                let pi_p = l.exp();
                let pi_m = (-l).exp();
                let p_plus = 1.0 / (1.0 + (-2.0 * l).exp());
                let lhs = pi_m * p_plus;
                let rhs = pi_p * (1.0 - p_plus);
                assert!((lhs - rhs).abs() < 1e-12 * lhs.max(rhs));
            }
        }
    }

    #[test]
    fn mc_matches_exact_two_by_two() {
        let spec = ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]);
        let sites = vec![Site::new(1, 1), Site::new(1, 2), Site::new(2, 1), Site::new(2, 2)];
        let d2 = DiscreteDomain::from_sites(spec, 1.0 / 3.0, sites).unwrap();
        let t = exact_distribution(&d2, BoundaryCondition::Plus, &FieldSpec::zero()).unwrap();
        let p_all = t.expect(|s| s[..4].iter().all(|&x| x > 0) as i32 as f64);
        let sys = Arc::new(IsingSystem::on_domain(&d2, BoundaryCondition::Plus, &FieldSpec::zero()).unwrap());
        let mut ch = IsingChain::new(sys, 11, 0);
        ch.equilibrate();
        let n = 100_000;
        let mut hits = 0usize;
        ch.run(n, 1, |c| {
            if c.free_spins().iter().all(|&x| x > 0) {
                hits += 1;
            }
        });
        let est = stats::proportion(hits, n);
        assert!((est.value - p_all).abs() < 3.0 * est.stderr.max(1e-3), "{} vs {}", est.value, p_all);
    }

    #[test]
    fn strong_field_all_plus() {
        let d = square(8);
        let sys = Arc::new(IsingSystem::on_domain(&d, BoundaryCondition::Plus, &FieldSpec::raw(50.0)).unwrap());
        let mut ch = IsingChain::new(sys, 3, 0);
        for _ in 0..5 {
            ch.sweep();
        }
        let mut ok = 0;
        ch.run(1000, 1, |c| {
            if c.free_spins().iter().all(|&x| x > 0) {
                ok += 1;
            }
        });
        assert!(ok as f64 / 1000.0 >= 0.999);
    }

    #[test]
    fn dobrushin_boundary_respected() {
        let d = build_domain(&ShapeSpec::unit_disk([-1.0, 0.0], [1.0, 0.0]), 1.0 / 8.0).unwrap();
        for seed in 0..5 {
            let c = sample_ising(&d, BoundaryCondition::Dobrushin, &FieldSpec::zero(), 3, seed).unwrap();
            for (k, s) in d.boundary.iter().enumerate() {
                let want = if k < d.arc_minus.len() { -1 } else { 1 };
                assert_eq!(c.spins[d.n_interior() + k], want, "{s:?}");
            }
        }
    }

    #[test]
    fn mc_field_marginal_matches_exact() {
        // per-site marginals on a 3x3 domain with Dobrushin bc and a field
        let d = square(4);
        let f = FieldSpec::raw(0.15);
        let t = exact_distribution(&d, BoundaryCondition::Dobrushin, &f).unwrap();
        let sys = Arc::new(IsingSystem::on_domain(&d, BoundaryCondition::Dobrushin, &f).unwrap());
        let mut ch = IsingChain::new(sys, 5, 1);
        ch.equilibrate();
        let n = 60_000;
        let mut m = vec![0.0; 9];
        let mut series = Vec::with_capacity(n);
        ch.run(n, 1, |c| {
            for (k, x) in c.free_spins().iter().enumerate() {
                m[k] += *x as f64;
            }
            series.push(c.magnetization() as f64);
        });
        for k in 0..9 {
            let want = t.expect(|s| s[k] as f64);
            assert!((m[k] / n as f64 - want).abs() < 0.02, "site {k}");
        }
        let bm = stats::batch_means(&series);
        let want = t.expect(|s| s[..9].iter().map(|&x| x as f64).sum());
        assert!(bm.estimate.z_diff(&Estimate::new(want, 0.0)) < 4.0);
    }

    #[test]
    fn moment_symmetry_and_positivity() {
        let d = square(12);
        let p = moment_estimate(&d, BoundaryCondition::Plus, &FieldSpec::zero(), 1, 4000, 1).unwrap();
        let m = moment_estimate(&d, BoundaryCondition::Minus, &FieldSpec::zero(), 1, 4000, 2).unwrap();
        assert!(p.value > 0.0);
        assert!(p.z_diff(&Estimate::new(-m.value, m.stderr)) < 3.0);
        for seed in 10..14 {
            assert!(moment_estimate(&d, BoundaryCondition::Plus, &FieldSpec::zero(), 1, 200, seed).unwrap().value > 0.0);
        }
    }

    #[test]
    fn fkg_and_domination_small() {
        let d = square(10);
        let x0 = d.index(Site::new(5, 5)).unwrap();
        let x1 = d.index(Site::new(3, 6)).unwrap();
        let f = move |s: &[i8]| (s[x0] > 0) as i32 as f64;
        let g = move |s: &[i8]| (s[x1] > 0) as i32 as f64;
        let r = fkg_inequality_test(&d, BoundaryCondition::Plus, &FieldSpec::zero(), f, g, 20_000, 4).unwrap();
        assert!(r.pass, "{r:?}");
        let r = fkg_inequality_test(&d, BoundaryCondition::Plus, &FieldSpec::zero(), f, f, 20_000, 4).unwrap();
        assert!(r.pass);
        let z = FieldSpec::zero();
        let r = bc_domination_test(&d, (BoundaryCondition::Plus, &z), (BoundaryCondition::Free, &z), f, 20_000, 5).unwrap();
        assert!(r.pass && r.lhs.value > r.rhs.value);
        let h = FieldSpec::raw(0.05);
        let r = bc_domination_test(&d, (BoundaryCondition::Plus, &h), (BoundaryCondition::Plus, &z), f, 20_000, 6).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn fkg_exact_two_by_two() {
        let spec = ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]);
        let sites = vec![Site::new(1, 1), Site::new(1, 2), Site::new(2, 1), Site::new(2, 2)];
        let d = DiscreteDomain::from_sites(spec, 1.0 / 3.0, sites).unwrap();
        for bc in [BoundaryCondition::Plus, BoundaryCondition::Free, BoundaryCondition::Dobrushin] {
            let t = exact_distribution(&d, bc, &FieldSpec::raw(0.1)).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    let fa = |s: &[i8]| (s[a] > 0) as i32 as f64;
                    let fb = |s: &[i8]| (s[b] > 0) as i32 as f64;
                    let efg = t.expect(|s| fa(s) * fb(s));
                    assert!(efg >= t.expect(fa) * t.expect(fb) - 1e-14);
                }
            }
        }
        let tp = exact_distribution(&d, BoundaryCondition::Plus, &FieldSpec::zero()).unwrap();
        let tf = exact_distribution(&d, BoundaryCondition::Free, &FieldSpec::zero()).unwrap();
        for a in 0..4 {
            assert!(tp.expect(|s| (s[a] > 0) as i32 as f64) >= tf.expect(|s| (s[a] > 0) as i32 as f64));
        }
    }
}
