//! FK-Ising at p_c, the ghost-vertex coupling with an external field and
//! the Edwards-Sokal spin assignment.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{arc_neighborhood, ArcSide, DiscreteDomain};
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::graph::SiteGraph;
use crate::ising::{BoundaryCondition, IsingChain, IsingSystem, BETA_C, P_C};
use crate::rng::{self, ChainRng, Rng};
use crate::union_find::UnionFind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FkBoundary {
    Free,
    Wired,
    /// ∂⁺ wired together, ∂⁻ wired together, the two never connected.
    TwoWired,
}

/// Super-vertex an identified boundary vertex belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Group {
    None,
    Wired,
    Plus,
    Minus,
}

fn group_of(graph: &SiteGraph, bc: FkBoundary, v: usize) -> Group {
    if graph.interior[v] {
        return Group::None;
    }
    match bc {
        FkBoundary::Free => Group::None,
        FkBoundary::Wired => Group::Wired,
        FkBoundary::TwoWired => match graph.side[v] {
            Some(ArcSide::Minus) => Group::Minus,
            _ => Group::Plus,
        },
    }
}

#[derive(Clone, Debug)]
pub struct EdgeConfig {
    pub open: Vec<bool>,
    pub bc: FkBoundary,
    /// Cluster id of every vertex.
    pub cluster: Vec<u32>,
    /// Number of vertices per cluster.
    pub sizes: Vec<u32>,
    /// Cluster ids holding the identified boundary: [wired] or [plus, minus].
    pub boundary_clusters: Vec<u32>,
    /// Field the configuration was sampled at (per vertex), if any.
    pub field: Option<Vec<f64>>,
    /// Ghost connection per cluster, once attached.
    pub ghost: Option<Vec<bool>>,
}

impl EdgeConfig {
    pub fn from_open(graph: &SiteGraph, bc: FkBoundary, open: Vec<bool>) -> Self {
        let n = graph.n;
        let mut uf = UnionFind::new(n);
        for (e, &(u, v)) in graph.edges.iter().enumerate() {
            if open[e] {
                uf.union(u as usize, v as usize);
            }
        }
        let mut reps = [usize::MAX; 3];
        for v in 0..n {
            let slot = match group_of(graph, bc, v) {
                Group::None => continue,
                Group::Wired | Group::Plus => 0,
                Group::Minus => 1,
            };
            if reps[slot] == usize::MAX {
                reps[slot] = v;
            } else {
                uf.union(reps[slot], v);
            }
        }
        let (cluster, k) = uf.labels();
        let mut sizes = vec![0u32; k];
        for &c in &cluster {
            sizes[c as usize] += 1;
        }
        let boundary_clusters = reps
            .iter()
            .take(2)
            .filter(|&&r| r != usize::MAX)
            .map(|&r| cluster[r])
            .collect();
        EdgeConfig { open, bc, cluster, sizes, boundary_clusters, field: None, ghost: None }
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    /// Σ_{x∈C} H_x per cluster.
    pub fn cluster_fields(&self, h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.sizes.len()];
        for (v, &c) in self.cluster.iter().enumerate() {
            out[c as usize] += h[v];
        }
        out
    }

    /// Spin forced on a cluster by the boundary identification.
    pub fn forced_spin(&self, c: u32) -> Option<i8> {
        match self.bc {
            FkBoundary::Free => None,
            FkBoundary::Wired => (self.boundary_clusters.first() == Some(&c)).then_some(1),
            FkBoundary::TwoWired => {
                if self.boundary_clusters.first() == Some(&c) {
                    Some(1)
                } else if self.boundary_clusters.get(1) == Some(&c) {
                    Some(-1)
                } else {
                    None
                }
            }
        }
    }

    /// Number of clusters not attached to the identified boundary; the FK weight is 2^this.
    pub fn free_cluster_count(&self) -> usize {
        (0..self.sizes.len() as u32).filter(|&c| self.forced_spin(c).is_none()).count()
    }

    /// Two-wired configurations are admissible only if ∂⁺ and ∂⁻ stay apart.
    pub fn admissible(&self) -> bool {
        !(self.bc == FkBoundary::TwoWired
            && self.boundary_clusters.len() == 2
            && self.boundary_clusters[0] == self.boundary_clusters[1])
    }

    /// BFS components compared with the union-find labels.
    pub fn check_partition(&self, graph: &SiteGraph) -> bool {
        let n = graph.n;
        let mut comp = vec![u32::MAX; n];
        let mut next = 0u32;
        for s in 0..n {
            if comp[s] != u32::MAX {
                continue;
            }
            let mut q = VecDeque::from([s]);
            comp[s] = next;
            let g0 = group_of(graph, self.bc, s);
            // identified vertices join the same component
            if g0 != Group::None {
                for v in 0..n {
                    if v != s && same_group(group_of(graph, self.bc, v), g0) && comp[v] == u32::MAX {
                        comp[v] = next;
                        q.push_back(v);
                    }
                }
            }
            while let Some(v) = q.pop_front() {
                for &(w, e) in graph.neighbors(v) {
                    let w = w as usize;
                    if self.open[e as usize] && comp[w] == u32::MAX {
                        comp[w] = next;
                        q.push_back(w);
                        let g = group_of(graph, self.bc, w);
                        if g != Group::None {
                            for x in 0..n {
                                if same_group(group_of(graph, self.bc, x), g) && comp[x] == u32::MAX {
                                    comp[x] = next;
                                    q.push_back(x);
                                }
                            }
                        }
                    }
                }
            }
            next += 1;
        }
        // same partition up to relabelling
        let mut map = vec![u32::MAX; next as usize];
        for v in 0..n {
            let c = comp[v] as usize;
            if map[c] == u32::MAX {
                map[c] = self.cluster[v];
            } else if map[c] != self.cluster[v] {
                return false;
            }
        }
        next as usize == self.sizes.len()
    }
}

fn same_group(a: Group, b: Group) -> bool {
    a != Group::None && a == b
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Log of the field factor relating the ω-marginal of the field coupling to
/// the FK measure: Σ_C log cosh(Σ_{x∈C} H_x) over clusters not attached to
/// the boundary, plus ±Σ H over boundary clusters carrying a forced spin.
pub fn fk_marginal_log_weight(cfg: &EdgeConfig, h: &[f64]) -> f64 {
    let hc = cfg.cluster_fields(h);
    let mut acc = 0.0;
    for (c, &x) in hc.iter().enumerate() {
        acc += match cfg.forced_spin(c as u32) {
            None => log_cosh(x),
            Some(s) => s as f64 * x,
        };
    }
    acc
}

pub fn fk_marginal_weight(cfg: &EdgeConfig, h: &[f64]) -> Result<f64> {
    if h.iter().any(|&x| x < 0.0) {
        return Err(Error::NegativeField);
    }
    Ok(fk_marginal_log_weight(cfg, h).exp())
}

/// Flag every non-boundary cluster independently with probability tanh(Σ_{x∈C} H_x).
pub fn attach_ghost(cfg: &mut EdgeConfig, h: &[f64], rng: &mut ChainRng) -> Result<()> {
    if h.iter().any(|&x| x < 0.0) {
        return Err(Error::NegativeField);
    }
    let hc = cfg.cluster_fields(h);
    let flags = (0..hc.len())
        .map(|c| cfg.forced_spin(c as u32).is_none() && rng.random::<f64>() < hc[c].tanh())
        .collect();
    cfg.ghost = Some(flags);
    Ok(())
}

/// Edwards-Sokal spins: boundary clusters take their forced sign, ghost
/// clusters are +1, the rest get independent fair coins.
pub fn assign_spins(cfg: &EdgeConfig, rng: &mut ChainRng) -> Result<Vec<i8>> {
    let needs_ghost = cfg.field.as_ref().is_some_and(|h| h.iter().any(|&x| x != 0.0));
    if needs_ghost && cfg.ghost.is_none() {
        return Err(Error::MissingGhost);
    }
    let k = cfg.n_clusters();
    let spin: Vec<i8> = (0..k)
        .map(|c| {
            if let Some(s) = cfg.forced_spin(c as u32) {
                s
            } else if cfg.ghost.as_ref().is_some_and(|g| g[c]) {
                1
            } else if rng.random::<bool>() {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok(cfg.cluster.iter().map(|&c| spin[c as usize]).collect())
}

/// FK configuration derived from spins: equal-sign edges open with
/// probability p_c. With H ≥ 0, + vertices also get a ghost edge with
/// probability 1 − e^{−2H_x}, and a cluster is flagged if it holds one.
/// If the spins follow the Ising law with field H (free or + bc) the output
/// follows the field coupling, flags included.
pub fn fk_from_spins(
    graph: &SiteGraph,
    bc: FkBoundary,
    spins: &[i8],
    h: &[f64],
    rng: &mut ChainRng,
) -> Result<EdgeConfig> {
    let mut open = vec![false; graph.edges.len()];
    for (e, &(u, v)) in graph.edges.iter().enumerate() {
        if spins[u as usize] == spins[v as usize] && rng.random::<f64>() < P_C {
            open[e] = true;
        }
    }
    let mut cfg = EdgeConfig::from_open(graph, bc, open);
    let any_field = h.iter().any(|&x| x != 0.0);
    if any_field {
        if h.iter().any(|&x| x < 0.0) {
            return Err(Error::NegativeField);
        }
        let mut flags = vec![false; cfg.n_clusters()];
        for v in 0..graph.n {
            if spins[v] > 0 && h[v] > 0.0 && rng.random::<f64>() < 1.0 - (-2.0 * h[v]).exp() {
                flags[cfg.cluster[v] as usize] = true;
            }
        }
        for c in 0..flags.len() {
            if cfg.forced_spin(c as u32).is_some() {
                flags[c] = false;
            }
        }
        cfg.ghost = Some(flags);
        cfg.field = Some(h.to_vec());
    }
    Ok(cfg)
}

/// Single-bond heat-bath chain for the FK measure (field coupling marginal when H ≠ 0).
pub struct FkChain {
    pub graph: Arc<SiteGraph>,
    pub bc: FkBoundary,
    pub h: Vec<f64>,
    pub open: Vec<bool>,
    rng: ChainRng,
    node: Vec<u32>,
    members: Vec<Vec<u32>>,
    mark: Vec<u32>,
    stamp: u32,
    queue: [Vec<u32>; 2],
}

const SUPER_PLUS: u32 = 0;
const SUPER_MINUS: u32 = 1;

impl FkChain {
    pub fn new(graph: Arc<SiteGraph>, bc: FkBoundary, h: Vec<f64>, seed: u64, stream: u64) -> Self {
        let n = graph.n;
        // node ids: super nodes 0 (wired or plus), 1 (minus), then vertices offset by 2
        let mut node = vec![0u32; n];
        let mut members = vec![Vec::new(), Vec::new()];
        for v in 0..n {
            node[v] = match group_of(&graph, bc, v) {
                Group::None => v as u32 + 2,
                Group::Wired | Group::Plus => {
                    members[0].push(v as u32);
                    SUPER_PLUS
                }
                Group::Minus => {
                    members[1].push(v as u32);
                    SUPER_MINUS
                }
            };
        }
        for v in 0..n {
            members.push(vec![v as u32]);
        }
        let ne = graph.edges.len();
        FkChain {
            graph,
            bc,
            h,
            open: vec![false; ne],
            rng: rng::stream(seed, stream),
            node,
            members,
            mark: vec![0; n + 2],
            stamp: 0,
            queue: [Vec::new(), Vec::new()],
        }
    }

    fn next_stamp(&mut self) -> u32 {
        self.stamp = self.stamp.wrapping_add(2);
        if self.stamp < 2 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.stamp = 2;
        }
        self.stamp
    }

    /// Are nodes a and b joined by open edges other than `skip`? Alternating BFS from both ends.
    fn connected(&mut self, a: u32, b: u32, skip: usize) -> bool {
        if a == b {
            return true;
        }
        let st = self.next_stamp();
        self.queue[0].clear();
        self.queue[1].clear();
        self.queue[0].push(a);
        self.queue[1].push(b);
        self.mark[a as usize] = st;
        self.mark[b as usize] = st + 1;
        let mut head = [0usize; 2];
        loop {
            for side in 0..2 {
                if head[side] >= self.queue[side].len() {
                    return false;
                }
                let x = self.queue[side][head[side]];
                head[side] += 1;
                for mi in 0..self.members[x as usize].len() {
                    let v = self.members[x as usize][mi] as usize;
                    for &(w, e) in self.graph.neighbors(v) {
                        if e as usize == skip || !self.open[e as usize] {
                            continue;
                        }
                        let y = self.node[w as usize];
                        let m = self.mark[y as usize];
                        if m == st + side as u32 {
                            continue;
                        }
                        if m == st + 1 - side as u32 {
                            return true;
                        }
                        self.mark[y as usize] = st + side as u32;
                        self.queue[side].push(y);
                    }
                }
            }
        }
    }

    /// Field sum and super nodes reached by the open cluster of node `a` (ignoring `skip`).
    fn explore(&mut self, a: u32, skip: usize) -> (f64, bool, bool) {
        let st = self.next_stamp();
        self.queue[0].clear();
        self.queue[0].push(a);
        self.mark[a as usize] = st;
        let mut head = 0;
        let mut hsum = 0.0;
        let (mut sp, mut sm) = (false, false);
        while head < self.queue[0].len() {
            let x = self.queue[0][head];
            head += 1;
            if x == SUPER_PLUS {
                sp = true;
            }
            if x == SUPER_MINUS {
                sm = true;
            }
            for mi in 0..self.members[x as usize].len() {
                let v = self.members[x as usize][mi] as usize;
                hsum += self.h[v];
                for &(w, e) in self.graph.neighbors(v) {
                    if e as usize == skip || !self.open[e as usize] {
                        continue;
                    }
                    let y = self.node[w as usize];
                    if self.mark[y as usize] != st {
                        self.mark[y as usize] = st;
                        self.queue[0].push(y);
                    }
                }
            }
        }
        (hsum, sp, sm)
    }

    fn cluster_weight(&self, h: f64, sp: bool, sm: bool) -> Option<f64> {
        // weights relative to a free cluster at zero field (= 2)
        match (self.bc, sp, sm) {
            (FkBoundary::TwoWired, true, true) => None,
            (_, true, _) => Some(h.exp()),
            (_, _, true) => Some((-h).exp()),
            _ => Some(2.0 * h.cosh()),
        }
    }

    pub fn update_edge(&mut self, e: usize) {
        let (u, v) = self.graph.edges[e];
        let (a, b) = (self.node[u as usize], self.node[v as usize]);
        let field = self.h.iter().any(|&x| x != 0.0);
        let r: f64 = self.rng.random();
        if self.connected(a, b, e) {
            self.open[e] = r < P_C;
            return;
        }
        if !field && self.bc != FkBoundary::TwoWired {
            self.open[e] = r < P_C / (P_C + 2.0 * (1.0 - P_C));
            return;
        }
        let (h1, p1, m1) = self.explore(a, e);
        let (h2, p2, m2) = self.explore(b, e);
        let w1 = self.cluster_weight(h1, p1, m1).unwrap();
        let w2 = self.cluster_weight(h2, p2, m2).unwrap();
        let ratio = match self.cluster_weight(h1 + h2, p1 || p2, m1 || m2) {
            None => {
                self.open[e] = false;
                return;
            }
            Some(w) => P_C / (1.0 - P_C) * w / (w1 * w2),
        };
        self.open[e] = r < ratio / (1.0 + ratio);
    }

    pub fn sweep(&mut self) {
        for e in 0..self.graph.edges.len() {
            self.update_edge(e);
        }
    }

    pub fn config(&self) -> EdgeConfig {
        let mut c = EdgeConfig::from_open(&self.graph, self.bc, self.open.clone());
        if self.h.iter().any(|&x| x != 0.0) {
            c.field = Some(self.h.clone());
        }
        c
    }

    pub fn rng(&mut self) -> &mut ChainRng {
        &mut self.rng
    }
}

/// Heat-bath FK sample on a domain after `n_sweeps` edge sweeps from the empty configuration.
pub fn sample_fk(d: &DiscreteDomain, bc: FkBoundary, field: &FieldSpec, n_sweeps: usize, seed: u64) -> Result<EdgeConfig> {
    if n_sweeps == 0 {
        return Err(Error::BadParam("n_sweeps must be at least 1".into()));
    }
    let g = Arc::new(SiteGraph::from_domain(d));
    let h = field.per_vertex(d);
    let mut ch = FkChain::new(g, bc, h, seed, 0);
    for _ in 0..n_sweeps {
        ch.sweep();
    }
    Ok(ch.config())
}

/// FK (plus ghost flags when H ≠ 0) samples produced from an Ising chain through the
/// Edwards-Sokal map. `bc` must be Free or Wired; the matching spin bc is used.
pub struct SpinRouteFk {
    pub chain: IsingChain,
    pub bc: FkBoundary,
    h: Vec<f64>,
    buf: Vec<i8>,
}

impl SpinRouteFk {
    pub fn new(d: &DiscreteDomain, bc: FkBoundary, field: &FieldSpec, seed: u64, stream: u64) -> Result<Self> {
        let sbc = match bc {
            FkBoundary::Free => BoundaryCondition::Free,
            FkBoundary::Wired => BoundaryCondition::Plus,
            FkBoundary::TwoWired => return Err(Error::BadParam("spin route needs free or wired bc".into())),
        };
        let h = field.per_vertex(d);
        let sys = Arc::new(IsingSystem::on_domain(d, sbc, field)?);
        let mut chain = IsingChain::new(sys.clone(), seed, stream);
        chain.equilibrate();
        Ok(SpinRouteFk { chain, bc, h, buf: vec![0; sys.graph.n] })
    }

    pub fn graph(&self) -> &SiteGraph {
        &self.chain.sys.graph
    }

    pub fn next(&mut self, spacing: usize) -> Result<EdgeConfig> {
        for _ in 0..spacing.max(1) {
            self.chain.sweep();
        }
        self.chain.fill(&mut self.buf);
        let sys = self.chain.sys.clone();
        let mut r = rng::stream(self.chain.rng().random(), 0);
        fk_from_spins(&sys.graph, self.bc, &self.buf, &self.h, &mut r)
    }
}

/// The band R = Ω⁻(η) \ Ω⁻(η/2) with the two end arcs used by the crossing event.
#[derive(Clone, Debug)]
pub struct CrossingRect {
    pub region: Vec<bool>,
    pub start: Vec<bool>,
    pub end: Vec<bool>,
}

impl CrossingRect {
    /// Band of width η/2 around ∂⁻; the ends are the vertices of the band adjacent
    /// to ∂⁺ at distance in [η/2, η] from a (start) or b (end).
    pub fn band(d: &DiscreteDomain, eta: f64) -> Self {
        let n = d.n_vertices();
        let outer = arc_neighborhood(d, ArcSide::Minus, eta);
        let inner = arc_neighborhood(d, ArcSide::Minus, eta / 2.0);
        let mut region = vec![false; n];
        for &k in &outer {
            region[k] = true;
        }
        for &k in &inner {
            region[k] = false;
        }
        let ap = d.pos(d.a_mark);
        let bp = d.pos(d.b_mark);
        let dist = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
        let mut start = vec![false; n];
        let mut end = vec![false; n];
        for s in &d.arc_plus {
            let p = d.pos(*s);
            let (da, db) = (dist(p, ap), dist(p, bp));
            for dd in crate::domain::DIRS {
                if let Some(k) = d.index(s.offset(dd)) {
                    if k < d.n_interior() && region[k] {
                        if (eta / 2.0..=eta).contains(&da) {
                            start[k] = true;
                        }
                        if (eta / 2.0..=eta).contains(&db) {
                            end[k] = true;
                        }
                    }
                }
            }
        }
        CrossingRect { region, start, end }
    }
}

/// Is there a chain of at most `k_max` distinct ghost-flagged clusters of size ≥ `size_floor`
/// crossing the band from its start to its end, moving along open edges inside one
/// cluster or along closed edges between two different clusters of the chain?
/// The search minimises the number of cluster changes (0-1 BFS), which bounds the
/// number of distinct clusters used.
pub fn crossing_probe(graph: &SiteGraph, cfg: &EdgeConfig, rect: &CrossingRect, k_max: usize, size_floor: usize) -> bool {
    let flags = match &cfg.ghost {
        Some(f) => f,
        None => return false,
    };
    if k_max == 0 {
        return false;
    }
    let good = |v: usize| {
        let c = cfg.cluster[v] as usize;
        rect.region[v] && flags[c] && cfg.sizes[c] as usize >= size_floor
    };
    let n = graph.n;
    let mut cost = vec![usize::MAX; n];
    let mut dq = VecDeque::new();
    for v in 0..n {
        if rect.start[v] && good(v) {
            cost[v] = 1;
            dq.push_back(v);
        }
    }
    while let Some(v) = dq.pop_front() {
        let cv = cost[v];
        if rect.end[v] {
            return true;
        }
        for &(w, e) in graph.neighbors(v) {
            let w = w as usize;
            if !good(w) {
                continue;
            }
            let same = cfg.cluster[w] == cfg.cluster[v];
            let step = if same {
                if !cfg.open[e as usize] {
                    continue;
                }
                0
            } else {
                1
            };
            let nc = cv + step;
            if nc <= k_max && nc < cost[w] {
                cost[w] = nc;
                if step == 0 {
                    dq.push_front(w);
                } else {
                    dq.push_back(w);
                }
            }
        }
    }
    false
}

/// Exhaustive-enumeration oracles for tiny graphs.
pub mod exact {
    use super::*;

    pub const MAX_EDGES: usize = 20;

    fn check(graph: &SiteGraph) -> Result<()> {
        if graph.edges.len() > MAX_EDGES {
            return Err(Error::TooLarge(graph.edges.len(), MAX_EDGES));
        }
        Ok(())
    }

    fn cfg_of(graph: &SiteGraph, bc: FkBoundary, mask: usize) -> EdgeConfig {
        let open = (0..graph.edges.len()).map(|e| mask >> e & 1 == 1).collect();
        EdgeConfig::from_open(graph, bc, open)
    }

    /// P^{FK,bc}(ω) ∝ p^{|ω|}(1−p)^{|E|−|ω|} 2^{k(ω)}, indexed by edge bitmask.
    pub fn fk_law(graph: &SiteGraph, bc: FkBoundary) -> Result<Vec<f64>> {
        check(graph)?;
        let ne = graph.edges.len();
        let mut w = vec![0.0; 1 << ne];
        for (mask, slot) in w.iter_mut().enumerate() {
            let c = cfg_of(graph, bc, mask);
            if !c.admissible() {
                continue;
            }
            let k = mask.count_ones() as i32;
            *slot = P_C.powi(k) * (1.0 - P_C).powi(ne as i32 - k) * 2f64.powi(c.free_cluster_count() as i32);
        }
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= z);
        Ok(w)
    }

    /// FK law reweighted by the cluster field factor (∏ cosh for free clusters).
    pub fn reweighted_law(graph: &SiteGraph, bc: FkBoundary, h: &[f64]) -> Result<Vec<f64>> {
        let base = fk_law(graph, bc)?;
        let logs: Vec<f64> = (0..base.len())
            .map(|m| if base[m] > 0.0 { fk_marginal_log_weight(&cfg_of(graph, bc, m), h) } else { 0.0 })
            .collect();
        let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = base.iter().zip(&logs).map(|(p, l)| p * (l - mx).exp()).collect();
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= z);
        Ok(w)
    }

    /// ω-marginal of the random-cluster measure on G ∪ {ghost}, with ghost edges of
    /// probability 1 − e^{−2H_x}, obtained by summing over every ghost-edge subset.
    /// With the wired condition the boundary is identified with the ghost (both carry +).
    pub fn ghost_marginal(graph: &SiteGraph, bc: FkBoundary, h: &[f64]) -> Result<Vec<f64>> {
        check(graph)?;
        if bc == FkBoundary::TwoWired {
            return Err(Error::BadParam("ghost marginal covers free and wired only".into()));
        }
        let ne = graph.edges.len();
        let gv: Vec<usize> = (0..graph.n).filter(|&v| h[v] > 0.0).collect();
        if ne + gv.len() > 26 {
            return Err(Error::TooLarge(ne + gv.len(), 26));
        }
        let pg: Vec<f64> = gv.iter().map(|&v| 1.0 - (-2.0 * h[v]).exp()).collect();
        let n = graph.n;
        let mut out = vec![0.0; 1 << ne];
        let mut uf = UnionFind::new(n + 1);
        for (mask, slot) in out.iter_mut().enumerate() {
            let k = mask.count_ones() as i32;
            let pw = P_C.powi(k) * (1.0 - P_C).powi(ne as i32 - k);
            let mut acc = 0.0;
            for gmask in 0..(1usize << gv.len()) {
                uf.reset();
                for (e, &(u, v)) in graph.edges.iter().enumerate() {
                    if mask >> e & 1 == 1 {
                        uf.union(u as usize, v as usize);
                    }
                }
                if bc == FkBoundary::Wired {
                    for v in 0..n {
                        if !graph.interior[v] {
                            uf.union(v, n);
                        }
                    }
                }
                let mut gw = 1.0;
                for (j, &v) in gv.iter().enumerate() {
                    if gmask >> j & 1 == 1 {
                        uf.union(v, n);
                        gw *= pg[j];
                    } else {
                        gw *= 1.0 - pg[j];
                    }
                }
                let root_g = uf.find(n);
                let mut roots = std::collections::HashSet::new();
                for v in 0..n {
                    let r = uf.find(v);
                    if r != root_g {
                        roots.insert(r);
                    }
                }
                acc += gw * 2f64.powi(roots.len() as i32);
            }
            *slot = pw * acc;
        }
        let z: f64 = out.iter().sum();
        out.iter_mut().for_each(|x| *x /= z);
        Ok(out)
    }

    /// Spin law of the full coupling pipeline (ω from the reweighted FK law, ghost flags with
    /// probability tanh, fair coins), over the spins of vertices without a forced sign.
    /// Returns (probabilities indexed by bitmask over `free`, free vertex list).
    /// Flags and coins are enumerated per cluster: a cluster ends up + through
    /// (flag) or (no flag, coin +), and − through (no flag, coin −).
    pub fn pipeline_spin_law(graph: &SiteGraph, bc: FkBoundary, h: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
        let q = reweighted_law(graph, bc, h)?;
        let free: Vec<usize> = (0..graph.n).filter(|&v| group_of(graph, bc, v) == Group::None).collect();
        if free.len() > 24 {
            return Err(Error::TooLarge(free.len(), 24));
        }
        let mut pos = vec![usize::MAX; graph.n];
        for (k, &v) in free.iter().enumerate() {
            pos[v] = k;
        }
        let mut out = vec![0.0; 1 << free.len()];
        for (mask, &qw) in q.iter().enumerate() {
            if qw == 0.0 {
                continue;
            }
            let c = cfg_of(graph, bc, mask);
            let hc = c.cluster_fields(h);
            // bit pattern contributed by each free cluster when it is +
            let k = c.n_clusters();
            let mut bits = vec![0usize; k];
            for &v in &free {
                bits[c.cluster[v] as usize] |= 1 << pos[v];
            }
            let loose: Vec<usize> = (0..k).filter(|&cl| c.forced_spin(cl as u32).is_none()).collect();
            let p_plus: Vec<f64> = loose
                .iter()
                .map(|&cl| {
                    let t = hc[cl].tanh();
                    // flag (t) + no flag & coin + ((1−t)/2)
                    t + (1.0 - t) * 0.5
                })
                .collect();
            let forced_plus: usize = (0..k).filter(|&cl| c.forced_spin(cl as u32) == Some(1)).map(|cl| bits[cl]).sum();
            for pat in 0..(1usize << loose.len()) {
                let mut pr = qw;
                let mut idx = forced_plus;
                for (j, &cl) in loose.iter().enumerate() {
                    if pat >> j & 1 == 1 {
                        pr *= p_plus[j];
                        idx |= bits[cl];
                    } else {
                        pr *= 1.0 - p_plus[j];
                    }
                }
                out[idx] += pr;
            }
        }
        Ok((out, free))
    }

    /// All fixed polyominoes with 1..=max cells, normalised to min coordinate 0.
    pub fn polyominoes(max: usize) -> Vec<Vec<crate::domain::Site>> {
        use crate::domain::{Site, DIRS};
        use std::collections::BTreeSet;
        let norm = |cells: &BTreeSet<Site>| -> Vec<Site> {
            let mi = cells.iter().map(|s| s.i).min().unwrap();
            let mj = cells.iter().map(|s| s.j).min().unwrap();
            let mut v: Vec<Site> = cells.iter().map(|s| Site::new(s.i - mi, s.j - mj)).collect();
            v.sort();
            v
        };
        let mut level: BTreeSet<Vec<Site>> = BTreeSet::from([vec![Site::new(0, 0)]]);
        let mut all: Vec<Vec<Site>> = level.iter().cloned().collect();
        for _ in 1..max {
            let mut next = BTreeSet::new();
            for p in &level {
                let set: BTreeSet<Site> = p.iter().copied().collect();
                for s in p {
                    for d in DIRS {
                        let w = s.offset(d);
                        if !set.contains(&w) {
                            let mut q = set.clone();
                            q.insert(w);
                            next.insert(norm(&q));
                        }
                    }
                }
            }
            all.extend(next.iter().cloned());
            level = next;
        }
        all
    }

    /// Literal enumeration over (ω, flag vector, coin vector) for very small graphs.
    pub fn pipeline_spin_law_literal(graph: &SiteGraph, h: &[f64]) -> Result<Vec<f64>> {
        let q = reweighted_law(graph, FkBoundary::Free, h)?;
        let n = graph.n;
        if n > 8 {
            return Err(Error::TooLarge(n, 8));
        }
        let mut out = vec![0.0; 1 << n];
        for (mask, &qw) in q.iter().enumerate() {
            let c = cfg_of(graph, FkBoundary::Free, mask);
            let hc = c.cluster_fields(h);
            let k = c.n_clusters();
            for flags in 0..(1usize << k) {
                let mut pf = 1.0;
                for cl in 0..k {
                    let t = hc[cl].tanh();
                    pf *= if flags >> cl & 1 == 1 { t } else { 1.0 - t };
                }
                for coins in 0..(1usize << k) {
                    let pc = 0.5f64.powi(k as i32);
                    let mut idx = 0;
                    for v in 0..n {
                        let cl = c.cluster[v] as usize;
                        if flags >> cl & 1 == 1 || coins >> cl & 1 == 1 {
                            idx |= 1 << v;
                        }
                    }
                    out[idx] += qw * pf * pc;
                }
            }
        }
        Ok(out)
    }
}

/// Inverse temperature used by the coupling (the engine is pinned at criticality).
pub const BETA: f64 = BETA_C;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, ShapeSpec, Site};
    use crate::ising::ExactTable;
    use crate::stats;

    fn path3() -> SiteGraph {
        SiteGraph::new(3, vec![(0, 1), (1, 2)], vec![true; 3], vec![None; 3])
    }

    #[test]
    fn single_edge_open_probability() {
        let g = SiteGraph::new(2, vec![(0, 1)], vec![true, true], vec![None, None]);
        let law = exact::fk_law(&g, FkBoundary::Free).unwrap();
        let want = P_C / (P_C + 2.0 * (1.0 - P_C));
        assert!((law[1] - want).abs() < 1e-15);
        let g = Arc::new(g);
        let mut ch = FkChain::new(g, FkBoundary::Free, vec![0.0; 2], 1, 0);
        let n = 100_000;
        let mut k = 0;
        for _ in 0..n {
            ch.sweep();
            k += ch.open[0] as usize;
        }
        let e = stats::proportion(k, n);
        assert!((e.value - want).abs() < 3.0 * e.stderr);
    }

    #[test]
    fn weights_trivial_cases() {
        let g = SiteGraph::new(5, vec![(0, 1), (2, 3), (3, 4)], vec![true; 5], vec![None; 5]);
        let c = EdgeConfig::from_open(&g, FkBoundary::Free, vec![true, true, true]);
        assert_eq!(fk_marginal_weight(&c, &[0.0; 5]).unwrap(), 1.0);
        let w = fk_marginal_weight(&c, &[0.1; 5]).unwrap();
        assert!((w - 0.2f64.cosh() * 0.3f64.cosh()).abs() < 1e-15);
        assert!(fk_marginal_weight(&c, &[-0.1; 5]).is_err());
    }

    #[test]
    fn ghost_flag_rates() {
        let g = path3();
        let mut c = EdgeConfig::from_open(&g, FkBoundary::Free, vec![true, true]);
        let mut r = rng::stream(9, 0);
        let mut hits = 0;
        let n = 100_000;
        for _ in 0..n {
            attach_ghost(&mut c, &[0.2; 3], &mut r).unwrap();
            hits += c.ghost.as_ref().unwrap()[0] as usize;
        }
        let e = stats::proportion(hits, n);
        assert!((0.6f64.tanh() - 0.5370).abs() < 1e-4);
        assert!((e.value - 0.6f64.tanh()).abs() < 3.0 * e.stderr);
        attach_ghost(&mut c, &[0.0; 3], &mut r).unwrap();
        assert!(!c.ghost.as_ref().unwrap()[0]);
        let mut ok = 0;
        for _ in 0..10_000 {
            attach_ghost(&mut c, &[10.0 / 3.0; 3], &mut r).unwrap();
            ok += c.ghost.as_ref().unwrap()[0] as usize;
        }
        assert!(ok as f64 / 1e4 >= 0.999);
        assert!(attach_ghost(&mut c, &[-1.0, 0.0, 0.0], &mut r).is_err());
    }

    #[test]
    fn pipeline_three_vertex_exact() {
        let g = path3();
        let h = [0.3; 3];
        let lit = exact::pipeline_spin_law_literal(&g, &h).unwrap();
        let (agg, free) = exact::pipeline_spin_law(&g, FkBoundary::Free, &h).unwrap();
        assert_eq!(free, vec![0, 1, 2]);
        let sys = IsingSystem::new(g, vec![None; 3], h.to_vec(), BETA_C).unwrap();
        let t = ExactTable::from_system(&sys).unwrap();
        assert!(t.total_variation(&lit) < 1e-12);
        assert!(t.total_variation(&agg) < 1e-12);
    }

    #[test]
    fn free_flip_symmetry_at_zero_field() {
        let (g, _) = SiteGraph::from_sites(&[Site::new(0, 0), Site::new(1, 0), Site::new(1, 1)]);
        let (law, free) = exact::pipeline_spin_law(&g, FkBoundary::Free, &vec![0.0; g.n]).unwrap();
        let full = (1usize << free.len()) - 1;
        for idx in 0..law.len() {
            assert!((law[idx] - law[full ^ idx]).abs() < 1e-15);
        }
    }

    #[test]
    fn heat_bath_matches_exact_with_field_and_two_wired() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.5], [1.0, 0.5]), 0.5).unwrap();
        let g = SiteGraph::from_domain(&d);
        let h: Vec<f64> = (0..g.n).map(|v| if g.interior[v] { 0.4 } else { 0.0 }).collect();
        for (bc, hh) in [
            (FkBoundary::Free, h.clone()),
            (FkBoundary::Wired, h.clone()),
            (FkBoundary::TwoWired, vec![0.0; g.n]),
        ] {
            let law = exact::reweighted_law(&g, bc, &hh).unwrap();
            let want: f64 = law.iter().enumerate().filter(|(m, _)| m & 1 == 1).map(|(_, p)| p).sum();
            let mut ch = FkChain::new(Arc::new(g.clone()), bc, hh, 3, 0);
            let n = 60_000;
            let mut k = 0;
            for _ in 0..n {
                ch.sweep();
                k += ch.open[0] as usize;
            }
            let e = stats::proportion(k, n);
            assert!((e.value - want).abs() < 4.0 * e.stderr, "{bc:?}: {} vs {want}", e.value);
        }
    }

    #[test]
    fn wired_boundary_single_cluster_and_plus() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]), 1.0 / 6.0).unwrap();
        let g = SiteGraph::from_domain(&d);
        let mut r = rng::stream(2, 0);
        for seed in 0..10 {
            let c = sample_fk(&d, FkBoundary::Wired, &FieldSpec::zero(), 3, seed).unwrap();
            let b0 = c.cluster[d.n_interior()];
            assert!((d.n_interior()..g.n).all(|v| c.cluster[v] == b0));
            assert!(c.check_partition(&g));
            let s = assign_spins(&c, &mut r).unwrap();
            assert!((d.n_interior()..g.n).all(|v| s[v] == 1));
        }
    }

    #[test]
    fn wired_edge_marginal_dominates_free() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]), 1.0 / 8.0).unwrap();
        let g = Arc::new(SiteGraph::from_domain(&d));
        let x = d.index(Site::new(4, 4)).unwrap() as u32;
        let e = g.edges.iter().position(|&(u, _)| u == x).unwrap();
        let mut est = Vec::new();
        for bc in [FkBoundary::Wired, FkBoundary::Free] {
            let mut ch = FkChain::new(g.clone(), bc, vec![0.0; g.n], 7, 0);
            for _ in 0..200 {
                ch.sweep();
            }
            let mut xs = Vec::new();
            for _ in 0..6000 {
                ch.sweep();
                xs.push(ch.open[e] as i32 as f64);
            }
            est.push(stats::batch_means(&xs).estimate);
        }
        assert!(est[0].value - est[1].value > -3.0 * (est[0].stderr.powi(2) + est[1].stderr.powi(2)).sqrt());
    }

    #[test]
    fn spin_route_matches_heat_bath() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]), 1.0 / 6.0).unwrap();
        let g = Arc::new(SiteGraph::from_domain(&d));
        for bc in [FkBoundary::Free, FkBoundary::Wired] {
            let mut sr = SpinRouteFk::new(&d, bc, &FieldSpec::zero(), 4, 0).unwrap();
            let mut a = Vec::new();
            for _ in 0..20_000 {
                let c = sr.next(1).unwrap();
                assert!(c.check_partition(sr.graph()));
                a.push(c.open.iter().filter(|&&o| o).count() as f64);
            }
            let mut ch = FkChain::new(g.clone(), bc, vec![0.0; g.n], 5, 0);
            for _ in 0..300 {
                ch.sweep();
            }
            let mut b = Vec::new();
            for _ in 0..20_000 {
                ch.sweep();
                b.push(ch.open.iter().filter(|&&o| o).count() as f64);
            }
            let ea = stats::batch_means(&a).estimate;
            let eb = stats::batch_means(&b).estimate;
            assert!(ea.z_diff(&eb) < 3.5, "{bc:?}: {ea:?} vs {eb:?}");
        }
    }

    #[test]
    fn es_zero_field_magnetization_matches_direct() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]), 1.0 / 6.0).unwrap();
        let g = Arc::new(SiteGraph::from_domain(&d));
        let ni = d.n_interior();
        let mut ch = FkChain::new(g.clone(), FkBoundary::Wired, vec![0.0; g.n], 8, 0);
        for _ in 0..300 {
            ch.sweep();
        }
        let mut r = rng::stream(8, 1);
        let mut es = Vec::new();
        for _ in 0..4000 {
            for _ in 0..3 {
                ch.sweep();
            }
            let s = assign_spins(&ch.config(), &mut r).unwrap();
            es.push(s[..ni].iter().map(|&x| x as f64).sum::<f64>());
        }
        let sys = Arc::new(IsingSystem::on_domain(&d, BoundaryCondition::Plus, &FieldSpec::zero()).unwrap());
        let mut ic = IsingChain::new(sys, 9, 0);
        ic.equilibrate();
        let mut direct = Vec::new();
        ic.run(4000, 3, |c| direct.push(c.magnetization() as f64));
        let (_, p) = stats::ks_two_sample(&es, &direct);
        assert!(p > 0.01, "KS p = {p}");
    }

    #[test]
    fn crossing_probe_trivial_cases() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.5], [1.0, 0.5]), 1.0 / 16.0).unwrap();
        let g = SiteGraph::from_domain(&d);
        let rect = CrossingRect::band(&d, 0.25);
        assert!(rect.start.iter().any(|&x| x) && rect.end.iter().any(|&x| x));
        let mut c = EdgeConfig::from_open(&g, FkBoundary::Free, vec![true; g.edges.len()]);
        let mut r = rng::stream(1, 0);
        attach_ghost(&mut c, &vec![1.0; g.n], &mut r).unwrap();
        assert!(crossing_probe(&g, &c, &rect, 1, g.n));
        c.ghost = None;
        assert!(!crossing_probe(&g, &c, &rect, 3, 1));
        attach_ghost(&mut c, &vec![0.0; g.n], &mut r).unwrap();
        assert!(!crossing_probe(&g, &c, &rect, 3, 1));
    }
}
