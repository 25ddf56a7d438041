//! Dirichlet Green's functions and conformal radii, normalized so that
//! G_D(x, y) ∼ −log|x − y| on the diagonal.
//!
//! Analytic contexts use closed forms (disk, half-plane) or pull back
//! G_ℍ(z, w) = log|(z − w̄)/(z − w)| and CR = 2 Im φ/|φ'| through a map to ℍ.
//! The discrete context inverts the Dirichlet Laplacian 4I − A of a lattice
//! region: G ≈ 2π (4I − A)⁻¹, and CR comes from the diagonal,
//! 2π g(x, x) = log(CR/δ) + c_lat.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C;

use crate::conformal::{green_half_plane, HalfPlaneMap};
use crate::domain::{build_domain, polygon_area, DiscreteDomain, Shape, ShapeSpec, Site, DIRS};
use crate::error::{Error, Result};
use crate::interface::{split_components, LatticePath};
use crate::loewner::{extract_driving, ConformalChain};
use crate::rng::{ChainRng, Rng};
use crate::sparse::{BandCholesky, Csr};

/// Euler's constant plus 3/2·log 2: the diagonal constant of the
/// square-lattice potential kernel in the 4I − A normalization. Only used to
/// check the empirical calibration.
pub const C_LAT_THEORY: f64 = 0.577_215_664_901_532_9 + 1.5 * std::f64::consts::LN_2;

#[derive(Clone, Debug)]
pub enum HarmonicContext {
    HalfPlane,
    Disk { center: C, radius: f64 },
    /// A shape pulled back from ℍ through its uniformizing map.
    Mapped { shape: ShapeSpec, map: HalfPlaneMap },
    /// The slit domain Ω \ γ[0, t] through an extracted chain.
    Chain { shape: ShapeSpec, chain: ConformalChain },
    Discrete(Arc<DiscreteGreen>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    SlitToB,
    LeftOfCurve,
    RightOfCurve,
}

impl HarmonicContext {
    pub fn for_shape(shape: &ShapeSpec) -> Result<Self> {
        Ok(match &shape.shape {
            Shape::Disk { center, radius } => HarmonicContext::Disk { center: C::new(center[0], center[1]), radius: *radius },
            _ => HarmonicContext::Mapped { shape: shape.clone(), map: HalfPlaneMap::for_shape(shape)? },
        })
    }

    pub fn contains(&self, x: C) -> bool {
        match self {
            HarmonicContext::HalfPlane => x.im > 0.0,
            HarmonicContext::Disk { center, radius } => (x - center).norm() < *radius,
            HarmonicContext::Mapped { shape, .. } | HarmonicContext::Chain { shape, .. } => shape.contains_strict([x.re, x.im]),
            HarmonicContext::Discrete(g) => g.vertex(x).is_some(),
        }
    }

    fn check(&self, x: C) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::ExteriorPoint([x.re, x.im]))
        }
    }

    pub fn green(&self, x: C, y: C) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        if x == y {
            return Err(Error::CoincidentPoints);
        }
        Ok(match self {
            HarmonicContext::HalfPlane => green_half_plane(x, y),
            HarmonicContext::Disk { center, radius } => {
                let (u, v) = ((x - center) / *radius, (y - center) / *radius);
                ((1.0 - v.conj() * u) / (u - v)).norm().ln()
            }
            HarmonicContext::Mapped { map, .. } => green_half_plane(map.map(x), map.map(y)),
            HarmonicContext::Chain { chain, .. } => green_half_plane(chain.forward(x), chain.forward(y)),
            HarmonicContext::Discrete(g) => {
                let (i, j) = (g.vertex(x).unwrap(), g.vertex(y).unwrap());
                if i == j {
                    return Err(Error::CoincidentPoints);
                }
                g.green_idx(i, j)
            }
        })
    }

    pub fn conformal_radius(&self, x: C) -> Result<f64> {
        self.check(x)?;
        let from_map = |(w, d): (C, C)| 2.0 * w.im / d.norm();
        Ok(match self {
            HarmonicContext::HalfPlane => 2.0 * x.im,
            HarmonicContext::Disk { center, radius } => {
                let u = (x - center) / *radius;
                *radius * (1.0 - u.norm_sqr())
            }
            HarmonicContext::Mapped { map, .. } => from_map(map.map_deriv(x)),
            HarmonicContext::Chain { chain, .. } => from_map(chain.forward_deriv(x)),
            HarmonicContext::Discrete(g) => g.cr_idx(g.vertex(x).unwrap()),
        })
    }

    /// Lebesgue measure of the domain (vertex count times δ² when discrete).
    pub fn area(&self) -> f64 {
        match self {
            HarmonicContext::HalfPlane => f64::INFINITY,
            HarmonicContext::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            HarmonicContext::Mapped { shape, .. } | HarmonicContext::Chain { shape, .. } => shape_area(shape),
            HarmonicContext::Discrete(g) => g.sites.len() as f64 * g.delta * g.delta,
        }
    }

    /// A uniform point of the domain (a uniform vertex when discrete).
    pub fn sample(&self, r: &mut ChainRng) -> Result<C> {
        let bbox = match self {
            HarmonicContext::HalfPlane => return Err(Error::BadParam("half-plane has infinite area".into())),
            HarmonicContext::Disk { center, radius } => ([center.re - radius, center.im - radius], [center.re + radius, center.im + radius]),
            HarmonicContext::Mapped { shape, .. } | HarmonicContext::Chain { shape, .. } => shape.bbox(),
            HarmonicContext::Discrete(g) => {
                let s = g.sites[r.random_range(0..g.sites.len())];
                return Ok(C::new(s.i as f64 * g.delta, s.j as f64 * g.delta));
            }
        };
        for _ in 0..10_000 {
            let x = C::new(r.random_range(bbox.0[0]..bbox.1[0]), r.random_range(bbox.0[1]..bbox.1[1]));
            if self.contains(x) {
                return Ok(x);
            }
        }
        Err(Error::Numerical("rejection sampling found no interior point".into()))
    }
}

fn shape_area(s: &ShapeSpec) -> f64 {
    match &s.shape {
        Shape::Square { side, .. } => side * side,
        Shape::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
        Shape::Polygon { vertices } => polygon_area(vertices).abs(),
    }
}

/// Dirichlet Green's function of a lattice region (a set of interior
/// vertices; every other vertex is held at 0).
#[derive(Debug)]
pub struct DiscreteGreen {
    pub delta: f64,
    pub sites: Vec<Site>,
    pub c_lat: f64,
    pub laplacian: Csr,
    local: HashMap<Site, usize>,
    chol: BandCholesky,
    cache: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl DiscreteGreen {
    /// Region given by interior indices of `d`; `c_lat` from the disk
    /// calibration at the same mesh.
    pub fn new(d: &DiscreteDomain, region: &[usize]) -> Result<Self> {
        Self::with_constant(d.delta, region.iter().map(|&k| d.site(k)).collect(), lattice_constant(d.delta)?)
    }

    pub fn with_constant(delta: f64, mut sites: Vec<Site>, c_lat: f64) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::ComponentEmpty);
        }
        sites.sort_unstable();
        sites.dedup();
        let local: HashMap<Site, usize> = sites.iter().enumerate().map(|(k, s)| (*s, k)).collect();
        let rows = sites
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let mut r = vec![(k, 4.0)];
                for d in DIRS {
                    if let Some(&m) = local.get(&s.offset(d)) {
                        r.push((m, -1.0));
                    }
                }
                r
            })
            .collect();
        let laplacian = Csr::from_rows(rows);
        let chol = BandCholesky::factor(&laplacian)?;
        Ok(DiscreteGreen { delta, sites, c_lat, laplacian, local, chol, cache: Mutex::new(HashMap::new()) })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Region vertex nearest to x, if x rounds onto the region.
    pub fn vertex(&self, x: C) -> Option<usize> {
        let s = Site::new((x.re / self.delta).round() as i32, (x.im / self.delta).round() as i32);
        self.local.get(&s).copied()
    }

    pub fn position(&self, k: usize) -> C {
        C::new(self.sites[k].i as f64 * self.delta, self.sites[k].j as f64 * self.delta)
    }

    /// (4I − A)⁻¹ e_k, cached.
    pub fn column(&self, k: usize) -> Arc<Vec<f64>> {
        if let Some(c) = self.cache.lock().unwrap().get(&k) {
            return c.clone();
        }
        let col = Arc::new(self.chol.column(k));
        self.cache.lock().unwrap().insert(k, col.clone());
        col
    }

    pub fn green_idx(&self, i: usize, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.column(i)[j]
    }

    pub fn cr_idx(&self, i: usize) -> f64 {
        self.delta * (2.0 * std::f64::consts::PI * self.column(i)[i] - self.c_lat).exp()
    }

    /// ‖(4I − A) g − e_k‖_∞ for the cached column.
    pub fn residual(&self, k: usize) -> f64 {
        let mut e = vec![0.0; self.len()];
        e[k] = 1.0;
        self.laplacian.residual_inf(&self.column(k), &e)
    }
}

/// c_lat at mesh δ, from the centre of the unit disk where CR = 1:
/// c_lat = 2π g(0, 0) − log(1/δ). Cached per mesh.
pub fn lattice_constant(delta: f64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = cache.lock().unwrap().get(&delta.to_bits()) {
        return Ok(*c);
    }
    let d = build_domain(&ShapeSpec::unit_disk([-1.0, 0.0], [1.0, 0.0]), delta)?;
    let all: Vec<Site> = d.interior.clone();
    let g = DiscreteGreen::with_constant(delta, all, 0.0)?;
    let o = g.vertex(C::new(0.0, 0.0)).ok_or(Error::EmptyDomain)?;
    let c = 2.0 * std::f64::consts::PI * g.column(o)[o] + delta.ln();
    cache.lock().unwrap().insert(delta.to_bits(), c);
    Ok(c)
}

/// Context for a component cut out by a path prefix: the slit domain via
/// the extracted chain, or the left/right lattice components of a completed
/// curve (interior minus V(γ)).
pub fn slit_context(d: &DiscreteDomain, prefix: &LatticePath, which: Component) -> Result<HarmonicContext> {
    match which {
        Component::SlitToB => {
            let (_, chain) = extract_driving(prefix, d)?;
            Ok(HarmonicContext::Chain { shape: d.shape.clone(), chain })
        }
        Component::LeftOfCurve | Component::RightOfCurve => {
            let reg = split_components(d, prefix)?;
            let part = if which == Component::LeftOfCurve { &reg.left } else { &reg.right };
            if part.is_empty() {
                return Err(Error::ComponentEmpty);
            }
            Ok(HarmonicContext::Discrete(Arc::new(DiscreteGreen::new(d, part)?)))
        }
    }
}

/// The whole lattice domain as a discrete context.
pub fn discrete_context(d: &DiscreteDomain) -> Result<HarmonicContext> {
    let all: Vec<usize> = (0..d.n_interior()).collect();
    Ok(HarmonicContext::Discrete(Arc::new(DiscreteGreen::new(d, &all)?)))
}
