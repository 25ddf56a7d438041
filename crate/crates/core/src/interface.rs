//! The Dobrushin interface from a to b, traced on the dual of Z² (plaquette
//! corners in doubled coordinates), plus the arm events used for exponent
//! measurements.
//!
//! Each dual step crosses a primal edge with spin + on its left and − on its
//! right. At a plaquette where both continuations are possible the turning
//! rule decides; the default keeps the leftmost one.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::{ArcSide, DiscreteDomain, Site, VertexKind, DIRS};
use crate::error::{Error, Result};
use crate::fk::EdgeConfig;
use crate::ising::{BoundaryCondition, SpinConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TurnRule {
    #[default]
    Leftmost,
    Rightmost,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticePath {
    /// Dual vertices (doubled coordinates) from the a-junction to the b-junction.
    pub points: Vec<(i32, i32)>,
    /// (left, right) endpoints of the primal edge crossed by each step.
    pub crossed: Vec<(Site, Site)>,
    /// Interior vertices adjacent to the path on the + side, sorted.
    pub v_left: Vec<usize>,
    pub v_right: Vec<usize>,
    pub delta: f64,
}

#[inline]
fn rot(d: (i32, i32)) -> (i32, i32) {
    (-d.1, d.0)
}

#[inline]
fn site_at(p: (i32, i32)) -> Site {
    Site::new(p.0.div_euclid(2), p.1.div_euclid(2))
}

fn spin_of(d: &DiscreteDomain, spins: &[i8], s: Site) -> Option<i8> {
    match d.kind(s) {
        VertexKind::Interior => Some(spins[d.index(s).unwrap()]),
        VertexKind::Boundary(ArcSide::Plus) => Some(1),
        VertexKind::Boundary(ArcSide::Minus) => Some(-1),
        VertexKind::Outside => None,
    }
}

impl LatticePath {
    pub fn len(&self) -> usize {
        self.crossed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.crossed.is_empty()
    }

    /// Turn codes (L, S, R) at every intermediate dual vertex.
    pub fn turn_codes(&self) -> String {
        let dirs: Vec<(i32, i32)> = self
            .points
            .windows(2)
            .map(|w| ((w[1].0 - w[0].0) / 2, (w[1].1 - w[0].1) / 2))
            .collect();
        dirs.windows(2)
            .map(|w| {
                if w[1] == w[0] {
                    'S'
                } else if w[1] == rot(w[0]) {
                    'L'
                } else {
                    'R'
                }
            })
            .collect()
    }

    /// Vertex positions in physical coordinates.
    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.points
            .iter()
            .map(|p| [p.0 as f64 * self.delta / 2.0, p.1 as f64 * self.delta / 2.0])
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,x2,y2,x,y\n");
        for (k, (p, q)) in self.points.iter().zip(self.positions()).enumerate() {
            let _ = writeln!(s, "{k},{},{},{},{}", p.0, p.1, q[0], q[1]);
        }
        s
    }

    /// The first `k` steps, with adjacency sets recomputed.
    pub fn prefix(&self, d: &DiscreteDomain, k: usize) -> LatticePath {
        let k = k.min(self.len());
        let crossed = self.crossed[..k].to_vec();
        let (v_left, v_right) = side_sets(d, &crossed);
        LatticePath { points: self.points[..=k].to_vec(), crossed, v_left, v_right, delta: self.delta }
    }

    /// Rebuild a path from its dual vertices (doubled coordinates): the
    /// primal edge crossed by a step in direction e has its left endpoint
    /// at the step midpoint plus rot(e).
    pub fn from_points(d: &DiscreteDomain, points: Vec<(i32, i32)>) -> Result<LatticePath> {
        let mut crossed = Vec::with_capacity(points.len().saturating_sub(1));
        for w in points.windows(2) {
            let e = ((w[1].0 - w[0].0) / 2, (w[1].1 - w[0].1) / 2);
            if e.0.abs() + e.1.abs() != 1 || (w[1].0 - w[0].0).abs() + (w[1].1 - w[0].1).abs() != 2 {
                return Err(Error::Trace(format!("non-unit step {:?} -> {:?}", w[0], w[1])));
            }
            let m = ((w[0].0 + w[1].0) / 2, (w[0].1 + w[1].1) / 2);
            let r = rot(e);
            crossed.push((site_at((m.0 + r.0, m.1 + r.1)), site_at((m.0 - r.0, m.1 - r.1))));
        }
        let (v_left, v_right) = side_sets(d, &crossed);
        Ok(LatticePath { points, crossed, v_left, v_right, delta: d.delta })
    }

    /// Replay from a start vertex, a first direction and the turn codes.
    pub fn from_turn_codes(d: &DiscreteDomain, start: (i32, i32), first: (i32, i32), codes: &str) -> Result<LatticePath> {
        let mut pts = vec![start, (start.0 + 2 * first.0, start.1 + 2 * first.1)];
        let mut e = first;
        for c in codes.chars() {
            e = match c {
                'S' => e,
                'L' => rot(e),
                'R' => (e.1, -e.0),
                _ => return Err(Error::Trace(format!("bad turn code {c:?}"))),
            };
            let p = *pts.last().unwrap();
            pts.push((p.0 + 2 * e.0, p.1 + 2 * e.1));
        }
        LatticePath::from_points(d, pts)
    }

    /// Parse the `to_csv` format (only the doubled coordinates are used).
    pub fn from_csv(d: &DiscreteDomain, text: &str) -> Result<LatticePath> {
        let mut pts = Vec::new();
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let num = |i: usize| f.get(i).and_then(|x| x.trim().parse::<i32>().ok()).ok_or_else(|| Error::Format(format!("bad path row {line:?}")));
            pts.push((num(1)?, num(2)?));
        }
        LatticePath::from_points(d, pts)
    }

    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for p in &self.points {
            h.update(p.0.to_le_bytes());
            h.update(p.1.to_le_bytes());
        }
        crate::domain::hex(&h.finalize())
    }
}

fn side_sets(d: &DiscreteDomain, crossed: &[(Site, Site)]) -> (Vec<usize>, Vec<usize>) {
    let ni = d.n_interior();
    let mut l: Vec<usize> = crossed.iter().filter_map(|(a, _)| d.index(*a)).filter(|&k| k < ni).collect();
    let mut r: Vec<usize> = crossed.iter().filter_map(|(_, b)| d.index(*b)).filter(|&k| k < ni).collect();
    l.sort_unstable();
    l.dedup();
    r.sort_unstable();
    r.dedup();
    (l, r)
}

pub fn extract_interface(d: &DiscreteDomain, cfg: &SpinConfig) -> Result<LatticePath> {
    extract_interface_with(d, cfg, TurnRule::Leftmost)
}

pub fn extract_interface_with(d: &DiscreteDomain, cfg: &SpinConfig, rule: TurnRule) -> Result<LatticePath> {
    if cfg.bc != BoundaryCondition::Dobrushin {
        return Err(Error::NoInterface);
    }
    let spins = &cfg.spins;
    let m = d.hull.len();
    let s0 = d.hull[0];
    let sp = d.hull[m - 1];
    let c_start = d.a_junction.corner;
    let c_end = d.b_junction.corner;
    let sign = |p: (i32, i32)| spin_of(d, spins, site_at(p));

    // first step out of the a-junction
    let (first_dir, incoming) = if sp.dir() == s0.dir() {
        let dout = (s0.outer.i - s0.inner.i, s0.outer.j - s0.inner.j);
        (None, (-dout.0, -dout.1))
    } else if s0.dir() == rot(sp.dir()) {
        let inner = spins[d.index(s0.inner).unwrap()];
        let d0 = if inner > 0 { s0.dir() } else { (-sp.dir().0, -sp.dir().1) };
        (Some(d0), d0)
    } else {
        return Err(Error::Trace("a-junction at a reflex hull corner".into()));
    };

    let mut c = c_start;
    let mut dir = incoming;
    let mut points = vec![c];
    let mut crossed = Vec::new();
    let mut seen: HashSet<(i32, i32)> = HashSet::new();
    let limit = 4 * d.n_vertices() + 16;
    let mut forced = first_dir;
    loop {
        let nd = match forced.take() {
            Some(fd) => fd,
            None => {
                let xl = (c.0 - dir.0 + rot(dir).0, c.1 - dir.1 + rot(dir).1);
                let xr = (c.0 - dir.0 - rot(dir).0, c.1 - dir.1 - rot(dir).1);
                let xp = (xl.0 + 2 * dir.0, xl.1 + 2 * dir.1);
                let yp = (xr.0 + 2 * dir.0, xr.1 + 2 * dir.1);
                // outside sites copy the sign of the site behind them on the same side
                let sx = sign(xp).or(sign(xl)).unwrap_or(1);
                let sy = sign(yp).or(sign(xr)).unwrap_or(-1);
                let left = rot(dir);
                let right = (-left.0, -left.1);
                match rule {
                    TurnRule::Leftmost => {
                        if sx < 0 {
                            left
                        } else if sy < 0 {
                            dir
                        } else {
                            right
                        }
                    }
                    TurnRule::Rightmost => {
                        if sy > 0 {
                            right
                        } else if sx > 0 {
                            dir
                        } else {
                            left
                        }
                    }
                }
            }
        };
        dir = nd;
        let mid = (c.0 + dir.0, c.1 + dir.1);
        let l = site_at((mid.0 + rot(dir).0, mid.1 + rot(dir).1));
        let r = site_at((mid.0 - rot(dir).0, mid.1 - rot(dir).1));
        if !d.is_interior(l) && !d.is_interior(r) {
            // the only way out is the exit across ∂Ω̂ at the b-junction
            if c == c_end {
                break;
            }
            return Err(Error::Trace(format!("step at {c:?} leaves the domain")));
        }
        let (sl, sr) = (spin_of(d, spins, l), spin_of(d, spins, r));
        if sl != Some(1) || sr != Some(-1) {
            return Err(Error::Trace(format!("step at {c:?} does not separate + from −")));
        }
        if !seen.insert(mid) {
            return Err(Error::Trace("dual edge traversed twice".into()));
        }
        crossed.push((l, r));
        c = (c.0 + 2 * dir.0, c.1 + 2 * dir.1);
        points.push(c);
        if crossed.len() > limit {
            return Err(Error::Trace("walk did not reach the b-junction".into()));
        }
    }
    let (v_left, v_right) = side_sets(d, &crossed);
    if v_left.iter().any(|k| v_right.binary_search(k).is_ok()) {
        return Err(Error::Trace("vertex on both sides".into()));
    }
    Ok(LatticePath { points, crossed, v_left, v_right, delta: d.delta })
}

/// (|V_L|, |V_R|, δ^{15/8}(|V_L| − |V_R|)).
pub fn adjacency_counts(path: &LatticePath) -> (usize, usize, f64) {
    let (l, r) = (path.v_left.len(), path.v_right.len());
    (l, r, path.delta.powf(15.0 / 8.0) * (l as f64 - r as f64))
}

/// Interior vertices off the path, split by the side they lie on.
#[derive(Clone, Debug, Default)]
pub struct Regions {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Components of interior \ V(γ), labelled by the sign of the fixed vertices
/// (arcs and V_L/V_R) they touch. For a prefix of the path the regions are
/// those of the slit domain and may be a single component.
pub fn split_components(d: &DiscreteDomain, path: &LatticePath) -> Result<Regions> {
    let ni = d.n_interior();
    let mut fixed = vec![0i8; d.n_vertices()];
    for &k in &path.v_left {
        fixed[k] = 1;
    }
    for &k in &path.v_right {
        fixed[k] = -1;
    }
    for (k, s) in d.boundary.iter().enumerate() {
        fixed[ni + k] = if matches!(d.kind(*s), VertexKind::Boundary(ArcSide::Plus)) { 1 } else { -1 };
    }
    let mut comp = vec![usize::MAX; ni];
    let mut out = Regions::default();
    for s in 0..ni {
        if fixed[s] != 0 || comp[s] != usize::MAX {
            continue;
        }
        let mut members = vec![s];
        comp[s] = s;
        let (mut plus, mut minus) = (false, false);
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            let site = d.interior[v];
            for dd in DIRS {
                let w = d.index(site.offset(dd)).unwrap();
                match fixed[w] {
                    1 => plus = true,
                    -1 => minus = true,
                    _ => {
                        if comp[w] == usize::MAX {
                            comp[w] = s;
                            members.push(w);
                            q.push_back(w);
                        }
                    }
                }
            }
        }
        match (plus, minus) {
            (true, false) => out.left.extend(members),
            (false, true) => out.right.extend(members),
            _ if path.points.last() != Some(&d.b_junction.corner) => {
                // a component of a slit domain sees both signs; report it on both sides
                out.left.extend(members.iter().copied());
                out.right.extend(members);
            }
            _ => return Err(Error::Trace("component touches both sides of a complete interface".into())),
        }
    }
    out.left.sort_unstable();
    out.right.sort_unstable();
    Ok(out)
}

/// Sites y with r ≤ |y − x|∞ ≤ R, all required to be interior.
fn annulus(d: &DiscreteDomain, x: Site, r: i32, big_r: i32) -> Result<Vec<Site>> {
    if !(0 < r && r < big_r) {
        return Err(Error::BadParam(format!("need 0 < r < R, got r={r}, R={big_r}")));
    }
    let mut out = Vec::new();
    for di in -big_r..=big_r {
        for dj in -big_r..=big_r {
            let n = di.abs().max(dj.abs());
            if n >= r {
                let s = x.offset((di, dj));
                if !d.is_interior(s) {
                    return Err(Error::AnnulusOutOfDomain);
                }
                out.push(s);
            }
        }
    }
    Ok(out)
}

fn arm_exists(d: &DiscreteDomain, spins: &[i8], x: Site, r: i32, big_r: i32, sign: i8) -> bool {
    let w = 2 * big_r + 1;
    let at = |s: Site| ((s.j - x.j + big_r) * w + (s.i - x.i + big_r)) as usize;
    let norm = |s: Site| (s.i - x.i).abs().max((s.j - x.j).abs());
    let mut seen = vec![false; (w * w) as usize];
    let mut q = VecDeque::new();
    for di in -big_r..=big_r {
        for dj in -big_r..=big_r {
            if di.abs().max(dj.abs()) == r {
                let s = x.offset((di, dj));
                if spins[d.index(s).unwrap()] == sign {
                    seen[at(s)] = true;
                    q.push_back(s);
                }
            }
        }
    }
    while let Some(s) = q.pop_front() {
        if norm(s) == big_r {
            return true;
        }
        for dd in DIRS {
            let t = s.offset(dd);
            let nt = norm(t);
            if nt < r || nt > big_r || seen[at(t)] {
                continue;
            }
            if spins[d.index(t).unwrap()] == sign {
                seen[at(t)] = true;
                q.push_back(t);
            }
        }
    }
    false
}

/// Both a + and a − nearest-neighbour path cross the ℓ∞ annulus r ≤ |y − x|∞ ≤ R.
pub fn two_arm_indicator(d: &DiscreteDomain, cfg: &SpinConfig, x: Site, r: i32, big_r: i32) -> Result<bool> {
    annulus(d, x, r, big_r)?;
    Ok(arm_exists(d, &cfg.spins, x, r, big_r, 1) && arm_exists(d, &cfg.spins, x, r, big_r, -1))
}

/// Per-cluster bounding boxes in lattice coordinates.
pub fn cluster_extents(d: &DiscreteDomain, cfg: &EdgeConfig) -> Vec<[i32; 4]> {
    let mut ext = vec![[i32::MAX, i32::MAX, i32::MIN, i32::MIN]; cfg.n_clusters()];
    for v in 0..d.n_vertices() {
        let s = d.site(v);
        let e = &mut ext[cfg.cluster[v] as usize];
        e[0] = e[0].min(s.i);
        e[1] = e[1].min(s.j);
        e[2] = e[2].max(s.i);
        e[3] = e[3].max(s.j);
    }
    ext
}

/// Does the open cluster of each probe reach ∂Λ_L(x) = {|y − x|∞ = L}?
/// Exact from the bounding box since clusters are connected.
pub fn one_arm_hits(d: &DiscreteDomain, ext: &[[i32; 4]], cfg: &EdgeConfig, probes: &[usize], l: i32) -> Vec<bool> {
    probes
        .iter()
        .map(|&v| {
            if l == 0 {
                return true;
            }
            let s = d.site(v);
            let e = ext[cfg.cluster[v] as usize];
            s.i - e[0] >= l || e[2] - s.i >= l || s.j - e[1] >= l || e[3] - s.j >= l
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArmFit {
    pub radii: Vec<f64>,
    pub probs: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Exponent ρ in P ≈ c·L^{−ρ}.
    pub exponent: f64,
    /// log c.
    pub intercept: f64,
    pub exponent_se: f64,
    pub n_samples: usize,
}

/// Fit log P against log L with weights from per-point standard errors.
/// Radii ≤ 0 are kept in the report but left out of the fit.
pub fn fit_power(radii: &[f64], probs: &[f64], stderr: &[f64], n_samples: usize) -> ArmFit {
    let keep: Vec<usize> = (0..radii.len()).filter(|&k| radii[k] > 0.0).collect();
    let lx: Vec<f64> = keep.iter().map(|&k| radii[k].ln()).collect();
    let ly: Vec<f64> = keep.iter().map(|&k| probs[k].max(1e-300).ln()).collect();
    let w: Vec<f64> = keep
        .iter()
        .map(|&k| (probs[k], stderr[k]))
        .map(|(p, s)| {
            let rel = (s / p.max(1e-300)).max(1e-9);
            1.0 / (rel * rel)
        })
        .collect();
    let f = crate::stats::fit_line_inv_var(&lx, &ly, &w);
    ArmFit {
        radii: radii.to_vec(),
        probs: probs.to_vec(),
        stderr: stderr.to_vec(),
        exponent: -f.slope,
        intercept: f.intercept,
        exponent_se: f.slope_se,
        n_samples,
    }
}

/// Wired FK one-arm probability P(x ↔ ∂Λ_L(x)) at zero field, averaged over a
/// central block of probes, for each L; returns the fitted decay exponent.
/// Standard errors come from batching over samples.
pub fn one_arm_estimate(d: &DiscreteDomain, radii: &[i32], block: i32, n_samples: usize, seed: u64) -> Result<ArmFit> {
    use crate::field::FieldSpec;
    use crate::fk::{FkBoundary, SpinRouteFk};
    let c = d.interior[d.nearest_interior(centroid(d)).unwrap()];
    let rmax = *radii.iter().max().unwrap_or(&1);
    let mut probes = Vec::new();
    for di in -block..=block {
        for dj in -block..=block {
            let s = c.offset((di, dj));
            for dd in [(rmax, 0), (-rmax, 0), (0, rmax), (0, -rmax)] {
                if !d.is_interior(s.offset(dd)) {
                    return Err(Error::BadParam("probe boxes leave the domain".into()));
                }
            }
            probes.push(d.index(s).unwrap());
        }
    }
    let mut sr = SpinRouteFk::new(d, FkBoundary::Wired, &FieldSpec::zero(), seed, 0)?;
    let mut per_l: Vec<Vec<f64>> = vec![Vec::with_capacity(n_samples); radii.len()];
    for _ in 0..n_samples {
        let cfg = sr.next(1)?;
        let ext = cluster_extents(d, &cfg);
        for (k, &l) in radii.iter().enumerate() {
            let hits = one_arm_hits(d, &ext, &cfg, &probes, l);
            per_l[k].push(hits.iter().filter(|&&h| h).count() as f64 / probes.len() as f64);
        }
    }
    let mut probs = Vec::new();
    let mut se = Vec::new();
    for xs in &per_l {
        let e = crate::stats::batch_means(xs).estimate;
        probs.push(e.value);
        se.push(e.stderr);
    }
    let rf: Vec<f64> = radii.iter().map(|&l| l as f64).collect();
    Ok(fit_power(&rf, &probs, &se, n_samples))
}

/// Two-arm probability α(r, R) for the Ising spins under `bc` at zero
/// field, averaged over a block of probes spaced `step` apart around the
/// centroid, for each outer radius; the fit is in R/r.
pub fn two_arm_estimate(
    d: &DiscreteDomain,
    bc: BoundaryCondition,
    r: i32,
    radii: &[i32],
    (block, step): (i32, i32),
    n_samples: usize,
    seed: u64,
) -> Result<ArmFit> {
    use crate::field::FieldSpec;
    use crate::ising::{IsingChain, IsingSystem};
    let c = d.interior[d.nearest_interior(centroid(d)).unwrap()];
    let rmax = *radii.iter().max().unwrap_or(&(r + 1));
    let mut probes = Vec::new();
    for di in -block..=block {
        for dj in -block..=block {
            let x = c.offset((di * step, dj * step));
            annulus(d, x, r, rmax)?;
            probes.push(x);
        }
    }
    let sys = std::sync::Arc::new(IsingSystem::on_domain(d, bc, &FieldSpec::zero())?);
    let mut ch = IsingChain::new(sys.clone(), seed, 0);
    ch.equilibrate();
    let mut buf = vec![0i8; sys.graph.n];
    let mut per_r: Vec<Vec<f64>> = vec![Vec::with_capacity(n_samples); radii.len()];
    ch.run(n_samples, 1, |ch| {
        ch.fill(&mut buf);
        for (k, &big_r) in radii.iter().enumerate() {
            let hits = probes.iter().filter(|&&x| arm_exists(d, &buf, x, r, big_r, 1) && arm_exists(d, &buf, x, r, big_r, -1)).count();
            per_r[k].push(hits as f64 / probes.len() as f64);
        }
    });
    let (mut probs, mut se) = (Vec::new(), Vec::new());
    for xs in &per_r {
        let e = crate::stats::batch_means(xs).estimate;
        probs.push(e.value);
        se.push(e.stderr);
    }
    let ratio: Vec<f64> = radii.iter().map(|&big_r| big_r as f64 / r as f64).collect();
    Ok(fit_power(&ratio, &probs, &se, n_samples))
}

fn centroid(d: &DiscreteDomain) -> [f64; 2] {
    let n = d.n_interior() as f64;
    let (sx, sy) = d.interior.iter().fold((0.0, 0.0), |(a, b), s| {
        let p = d.pos(*s);
        (a + p[0], b + p[1])
    });
    [sx / n, sy / n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, ShapeSpec};
    use crate::field::FieldSpec;
    use crate::ising::sample_ising;

    fn filled(d: &DiscreteDomain, f: impl Fn(Site) -> i8) -> SpinConfig {
        let mut spins = vec![0i8; d.n_vertices()];
        for (k, s) in d.interior.iter().enumerate() {
            spins[k] = f(*s);
        }
        for (k, s) in d.boundary.iter().enumerate() {
            spins[d.n_interior() + k] = match d.kind(*s) {
                VertexKind::Boundary(ArcSide::Plus) => 1,
                _ => -1,
            };
        }
        SpinConfig { spins, bc: BoundaryCondition::Dobrushin }
    }

    fn brute_adjacent(d: &DiscreteDomain, p: &LatticePath) -> usize {
        // interior vertices that are a corner of the plaquettes at distance 1/2 of some path edge midpoint
        let mut set = HashSet::new();
        for w in p.points.windows(2) {
            let mid = ((w[0].0 + w[1].0) / 2, (w[0].1 + w[1].1) / 2);
            for dd in DIRS {
                let q = (mid.0 + dd.0, mid.1 + dd.1);
                if q.0 % 2 == 0 && q.1 % 2 == 0 {
                    let s = Site::new(q.0 / 2, q.1 / 2);
                    if d.is_interior(s) {
                        set.insert(s);
                    }
                }
            }
        }
        set.len()
    }

    #[test]
    fn all_plus_runs_along_minus_arc() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.5], [1.0, 0.5]), 1.0 / 8.0).unwrap();
        let p = extract_interface(&d, &filled(&d, |_| 1)).unwrap();
        assert!(p.crossed.iter().all(|(_, r)| matches!(d.kind(*r), VertexKind::Boundary(ArcSide::Minus))));
        assert!(p.v_right.is_empty());
        assert_eq!(p.points[0], d.a_junction.corner);
        assert_eq!(*p.points.last().unwrap(), d.b_junction.corner);
        let q = extract_interface(&d, &filled(&d, |_| -1)).unwrap();
        assert!(q.crossed.iter().all(|(l, _)| matches!(d.kind(*l), VertexKind::Boundary(ArcSide::Plus))));
        assert!(q.v_left.is_empty());
    }

    #[test]
    fn straight_vertical_interface() {
        let delta = 1.0 / 7.0;
        let d = build_domain(&ShapeSpec::unit_square([0.45, 1.0], [0.55, 0.0]), delta).unwrap();
        // ccw from a (top) to b (bottom) passes the left side: minus is the left half
        let cfg = filled(&d, |s| if s.i <= 3 { -1 } else { 1 });
        let p = extract_interface(&d, &cfg).unwrap();
        let (l, r, diff) = adjacency_counts(&p);
        assert_eq!(l, r);
        assert_eq!(diff, 0.0);
        assert_eq!(l + r, brute_adjacent(&d, &p));
        assert!(p.turn_codes().chars().all(|c| c == 'S'));
    }

    #[test]
    fn random_samples_satisfy_invariants() {
        for (shape, delta) in [
            (ShapeSpec::unit_square([0.0, 0.5], [1.0, 0.5]), 1.0 / 16.0),
            (ShapeSpec::unit_disk([-1.0, 0.0], [1.0, 0.0]), 1.0 / 10.0),
            (ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]), 1.0 / 12.0),
        ] {
            let d = build_domain(&shape, delta).unwrap();
            for seed in 0..20 {
                let cfg = sample_ising(&d, BoundaryCondition::Dobrushin, &FieldSpec::zero(), 30, seed).unwrap();
                let p = extract_interface(&d, &cfg).unwrap();
                for (l, r) in &p.crossed {
                    assert_eq!(spin_of(&d, &cfg.spins, *l), Some(1));
                    assert_eq!(spin_of(&d, &cfg.spins, *r), Some(-1));
                }
                for w in p.points.windows(2) {
                    assert_eq!((w[0].0 - w[1].0).abs() + (w[0].1 - w[1].1).abs(), 2);
                }
                let (l, r, _) = adjacency_counts(&p);
                assert_eq!(l + r, brute_adjacent(&d, &p));
                let reg = split_components(&d, &p).unwrap();
                assert_eq!(reg.left.len() + reg.right.len() + l + r, d.n_interior());
                assert!(reg.left.iter().all(|&k| cfg.spins[k] != 0));
                assert_eq!(extract_interface(&d, &cfg).unwrap().hash(), p.hash());
                assert_eq!(LatticePath::from_points(&d, p.points.clone()).unwrap(), p);
                assert_eq!(LatticePath::from_csv(&d, &p.to_csv()).unwrap(), p);
                let first = ((p.points[1].0 - p.points[0].0) / 2, (p.points[1].1 - p.points[0].1) / 2);
                assert_eq!(LatticePath::from_turn_codes(&d, p.points[0], first, &p.turn_codes()).unwrap(), p);
            }
        }
    }

    #[test]
    fn flip_and_swap_gives_reversed_rightmost_path() {
        for (spec, seed) in (0..30).flat_map(|s| {
            [
                (ShapeSpec::unit_square([0.0, 0.3], [1.0, 0.6]), s),
                (ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]), s),
                (ShapeSpec::unit_disk([0.0, -1.0], [0.6, 0.8]), s),
            ]
        }) {
            let d = build_domain(&spec, 1.0 / 8.0).unwrap();
            let swapped = build_domain(&ShapeSpec { a: spec.b, b: spec.a, ..spec.clone() }, 1.0 / 8.0).unwrap();
            let cfg = sample_ising(&d, BoundaryCondition::Dobrushin, &FieldSpec::zero(), 20, seed).unwrap();
            let flipped = filled(&swapped, |s| -cfg.spins[d.index(s).unwrap()]);
            let p = extract_interface(&swapped, &flipped).unwrap();
            let q = extract_interface_with(&d, &cfg, TurnRule::Rightmost).unwrap();
            let mut rev = q.points.clone();
            rev.reverse();
            assert_eq!(p.points, rev);
        }
    }

    #[test]
    fn wrong_bc_rejected() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.5], [1.0, 0.5]), 0.25).unwrap();
        let mut cfg = filled(&d, |_| 1);
        cfg.bc = BoundaryCondition::Plus;
        assert!(matches!(extract_interface(&d, &cfg), Err(Error::NoInterface)));
    }

    #[test]
    fn two_arm_trivial_cases() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.0], [1.0, 0.0]), 1.0 / 32.0).unwrap();
        let x = Site::new(16, 16);
        assert!(!two_arm_indicator(&d, &filled(&d, |_| 1), x, 2, 8).unwrap());
        assert!(two_arm_indicator(&d, &filled(&d, |s| if s.i < 16 { -1 } else { 1 }), x, 2, 8).unwrap());
        assert!(matches!(two_arm_indicator(&d, &filled(&d, |_| 1), x, 4, 20), Err(Error::AnnulusOutOfDomain)));
    }

    #[test]
    fn one_arm_small_l_and_decay() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.0], [1.0, 0.0]), 1.0 / 32.0).unwrap();
        let fit = one_arm_estimate(&d, &[0, 2, 4, 8], 2, 200, 3).unwrap();
        assert_eq!(fit.probs[0], 1.0);
        assert!(fit.probs[1] > fit.probs[2] && fit.probs[2] > fit.probs[3]);
    }
}
