//! Uniformizing maps Ω → ℍ with a ↦ 0 and b ↦ ∞.
//!
//! Disks use a Möbius map, squares the Schwarz-Christoffel map of the disk
//! onto a square composed with it, and general polygons a slit zipper: the
//! boundary is opened by a square root at b and then unzipped point by point
//! with vertical-slit maps, with sample points packed geometrically towards b.

use num_complex::Complex64 as C;

use crate::domain::{polygon_area, Shape, ShapeSpec};
use crate::error::{Error, Result};
use crate::quad::gl64;
use crate::rng::{ChainRng, Rng};

pub fn cx(p: [f64; 2]) -> C {
    C::new(p[0], p[1])
}

/// z ↦ (a z + b)/(c z + d).
#[derive(Clone, Copy, Debug)]
pub struct Mobius {
    pub a: C,
    pub b: C,
    pub c: C,
    pub d: C,
}

impl Mobius {
    pub fn eval(&self, z: C) -> C {
        (self.a * z + self.b) / (self.c * z + self.d)
    }
    pub fn deriv(&self, z: C) -> C {
        let den = self.c * z + self.d;
        (self.a * self.d - self.b * self.c) / (den * den)
    }
    pub fn inverse(&self) -> Mobius {
        Mobius { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Unit disk → ℍ sending a', b' (on the circle) to 0, ∞, and 0 into ℍ with |image| = 1.
    pub fn disk_to_half_plane(ap: C, bp: C) -> Mobius {
        let mid = {
            let m = (ap + bp) / 2.0;
            if m.norm() > 1e-9 { m / m.norm() } else { ap * C::i() }
        };
        let r = (mid - ap) / (mid - bp);
        let mut lam = r.conj() / r.norm();
        let mut at0 = lam * ap / bp;
        if at0.im < 0.0 {
            lam = -lam;
            at0 = -at0;
        }
        lam /= at0.norm();
        Mobius { a: lam, b: -lam * ap, c: C::new(1.0, 0.0), d: -bp }
    }
}

/// ψ(z) = e^{iθ}(z − α)/(1 − ᾱz), an automorphism of the unit disk.
#[derive(Clone, Copy, Debug)]
pub struct DiskAutomorphism {
    pub theta: f64,
    pub alpha: C,
}

impl DiskAutomorphism {
    pub fn random(rng: &mut ChainRng, max_abs: f64) -> Self {
        let r = max_abs * rng.random::<f64>().sqrt();
        let phi = std::f64::consts::TAU * rng.random::<f64>();
        DiskAutomorphism { theta: std::f64::consts::TAU * rng.random::<f64>(), alpha: C::from_polar(r, phi) }
    }
    pub fn apply(&self, z: C) -> C {
        C::from_polar(1.0, self.theta) * (z - self.alpha) / (1.0 - self.alpha.conj() * z)
    }
    pub fn deriv(&self, z: C) -> C {
        let den = 1.0 - self.alpha.conj() * z;
        C::from_polar(1.0, self.theta) * (1.0 - self.alpha.norm_sqr()) / (den * den)
    }
    pub fn inverse(&self) -> DiskAutomorphism {
        DiskAutomorphism { theta: -self.theta, alpha: -C::from_polar(1.0, self.theta) * self.alpha }
    }
}

/// ∫₀¹ dr/√(1 − r⁴).
pub const LEMNISCATE_HALF: f64 = 1.311_028_777_146_059_9;

/// Half side of the square F(𝔻), F(z) = ∫₀^z dζ/√(1+ζ⁴).
pub fn sc_half_side() -> f64 {
    LEMNISCATE_HALF / std::f64::consts::SQRT_2
}

fn sc_deriv_inv(u: C) -> C {
    // (F⁻¹)' = √(1+u⁴), principal branch is analytic on the closed disk minus the vertices
    (1.0 + u * u * u * u).sqrt()
}

pub fn sc_forward(u: C) -> C {
    let (x, w) = gl64();
    let mut acc = C::new(0.0, 0.0);
    for (t, wt) in x.iter().zip(w) {
        let v = u * *t;
        acc += *wt / (1.0 + v * v * v * v).sqrt();
    }
    u * acc
}

pub fn sc_inverse(w: C) -> C {
    let n = 32;
    let h = 1.0 / n as f64;
    let mut u = C::new(0.0, 0.0);
    let f = |u: C| w * sc_deriv_inv(u);
    for _ in 0..n {
        let k1 = f(u);
        let k2 = f(u + k1 * (h / 2.0));
        let k3 = f(u + k2 * (h / 2.0));
        let k4 = f(u + k3 * h);
        u += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
    }
    for _ in 0..6 {
        let du = (sc_forward(u) - w) * sc_deriv_inv(u);
        u -= du;
        if du.norm() < 1e-15 {
            break;
        }
    }
    u
}

/// Preimage on the unit circle of a point on the boundary of the SC square.
fn sc_boundary_preimage(w: C) -> C {
    let k = sc_half_side();
    for s in 0..4 {
        let v = C::from_polar(k * std::f64::consts::SQRT_2, std::f64::consts::FRAC_PI_4 * (2 * s + 1) as f64);
        if (w - v).norm() < 1e-12 {
            return C::from_polar(1.0, std::f64::consts::FRAC_PI_4 * (2 * s + 1) as f64);
        }
    }
    let u = sc_inverse(w * (1.0 - 1e-13));
    u / u.norm()
}

/// Polygon to ℍ with b ↦ ∞ and a ↦ 0 by a vertical-slit zipper.
/// A power map about b first straightens the corner there, so b always sits
/// on a straight run and the closing square map is exact.
#[derive(Clone, Debug)]
pub struct Zipper {
    b: C,
    rot: C,
    pow: f64,
    p1: C,
    steps: Vec<(f64, f64)>,
    fold_x: f64,
    shift: f64,
    pub n_points: usize,
}

/// Vertical slit of capacity τ at x: z ↦ x + √((z−x)² + 4τ), written as a
/// displacement to keep far-away points accurate. Returns the derivative too.
pub fn slit_forward(x: f64, tau: f64, z: C) -> (C, C) {
    if tau == 0.0 {
        return (z, C::new(1.0, 0.0));
    }
    let w = z - x;
    let s = (1.0 + 4.0 * tau / (w * w)).sqrt();
    (z + (4.0 * tau / w) / (s + 1.0), 1.0 / s)
}

/// Inverse of `slit_forward`, taking the root in the closed upper half-plane.
pub fn slit_inverse(x: f64, tau: f64, w: C) -> C {
    if tau == 0.0 {
        return w;
    }
    let v = w - x;
    let mut r = (v * v - 4.0 * tau).sqrt();
    if r.im < 0.0 || (r.im == 0.0 && r.re * v.re < 0.0) {
        r = -r;
    }
    let sum = r + v;
    if sum.norm() > 0.5 * v.norm() {
        w - 4.0 * tau / sum
    } else {
        x + r
    }
}

impl Zipper {
    /// `vertices` of a simple polygon, a and b on (or near) its boundary.
    /// `n` sets the boundary spacing (perimeter / n).
    pub fn new(vertices: &[[f64; 2]], a: [f64; 2], b: [f64; 2], n: usize) -> Result<Self> {
        let mut v: Vec<[f64; 2]> = vertices.to_vec();
        if polygon_area(&v) < 0.0 {
            v.reverse();
        }
        let m = v.len();
        let pt = |k: usize| C::new(v[k % m][0], v[k % m][1]);
        let lens: Vec<f64> = (0..m).map(|k| (pt(k + 1) - pt(k)).norm()).collect();
        let total: f64 = lens.iter().sum();
        let starts: Vec<f64> = lens
            .iter()
            .scan(0.0, |s, l| {
                let o = *s;
                *s += l;
                Some(o)
            })
            .collect();
        let project = |p: [f64; 2]| -> f64 {
            let p = C::new(p[0], p[1]);
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..m {
                let (q, r) = (pt(k), pt(k + 1));
                let t = ((p - q).re * (r - q).re + (p - q).im * (r - q).im) / (r - q).norm_sqr();
                let t = t.clamp(0.0, 1.0);
                let dist = (q + (r - q) * t - p).norm();
                if dist < best.0 {
                    best = (dist, starts[k] + t * lens[k]);
                }
            }
            best.1
        };
        let at = |s: f64| -> C {
            let s = s.rem_euclid(total);
            let mut k = 0;
            while k + 1 < m && s > starts[k] + lens[k] {
                k += 1;
            }
            let f = ((s - starts[k]) / lens[k]).clamp(0.0, 1.0);
            pt(k) + (pt(k + 1) - pt(k)) * f
        };
        let tol = total * 1e-9;
        let sb = project(b).rem_euclid(total);
        let bz = at(sb);
        let kb = (0..m).find(|&k| sb < starts[k] + lens[k] - tol).unwrap_or(0);
        let on_vertex = (sb - starts[kb]).abs() < tol;
        let kin = if on_vertex { (kb + m - 1) % m } else { kb };
        let u1 = (pt(kb + 1) - pt(kb)) / lens[kb];
        let uin = (pt(kin + 1) - pt(kin)) / lens[kin];
        let beta = if on_vertex {
            (std::f64::consts::PI - (uin.conj() * u1).arg()) / std::f64::consts::PI
        } else {
            1.0
        };
        let mut zp = Zipper {
            b: bz,
            rot: u1.conj(),
            pow: 1.0 / beta,
            p1: C::new(0.0, 0.0),
            steps: Vec::new(),
            fold_x: 0.0,
            shift: 0.0,
            n_points: 0,
        };

        let h = total / n as f64;
        let eps = h * 1e-3;
        let sa = (project(a) - sb).rem_euclid(total);
        let mut offs = vec![sa];
        let mut s = h;
        while s < total - h * 0.5 {
            offs.push(s);
            s += h;
        }
        // geometric packing toward b from both sides and into every corner;
        // much finer than h·1e-3 squeezes the interior image and costs digits
        // near b the packing is geometric in the straightened coordinate
        let hp = h;
        let mut d = hp * 1e-3;
        while d < hp {
            let e = d.powf(beta);
            offs.push(e);
            offs.push(total - e);
            d *= 1.5;
        }
        let corners: Vec<f64> = starts
            .iter()
            .map(|st| (st - sb).rem_euclid(total))
            .filter(|&o| o > tol && o < total - tol)
            .collect();
        for &o in &corners {
            offs.push(o);
            let mut e = eps;
            while e < h {
                offs.push(o - e);
                offs.push(o + e);
                e *= 1.5;
            }
        }
        offs.retain(|&o| o > tol && o < total - tol);
        offs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        offs.dedup_by(|x, y| (*x - *y).abs() < total * 1e-13);

        zp.p1 = zp.pre(at(sb + offs[0])).0;
        let mut cur = Vec::with_capacity(offs.len() - 1);
        for &o in &offs[1..] {
            let (w, _) = zp.pre(at(sb + o));
            if !w.is_finite() {
                return Err(Error::Numerical("zipper pre-map failed".into()));
            }
            let w = zp.first(w).0;
            if w.im < -1e-9 * w.norm() {
                return Err(Error::Numerical("polygon winds around b; zipper branch fails".into()));
            }
            cur.push(C::new(w.re, w.im.max(0.0)));
        }
        let ia = offs[1..].iter().position(|&o| (o - sa).abs() < total * 1e-12);
        let mut steps = Vec::with_capacity(cur.len());
        let mut a_img = None;
        for k in 0..cur.len() {
            let (x, tau) = (cur[k].re, cur[k].im.powi(2) / 4.0);
            steps.push((x, tau));
            for w in cur[k + 1..].iter_mut() {
                *w = slit_forward(x, tau, *w).0;
                w.im = w.im.max(0.0);
            }
            if Some(k) == ia {
                a_img = Some((k + 1, C::new(x, 0.0)));
            }
        }
        if !steps.iter().all(|s| s.0.is_finite() && s.1.is_finite()) {
            return Err(Error::Numerical("zipper produced non-finite slit data".into()));
        }
        zp.fold_x = steps.last().map_or(0.0, |s| s.0);
        zp.steps = steps;
        zp.n_points = offs.len();
        // a is a zipped tip (or the pivot, at 0 before any slit). The next slit
        // may lean back over it, so put it on the domain side (left) by hand.
        let (from, xa) = a_img.map_or((0, 0.0), |(k, z)| (k, z.re));
        zp.shift = match zp.steps.get(from) {
            Some(&(x, tau)) => {
                let left = x - ((xa - x).powi(2) + 4.0 * tau).sqrt();
                zp.tail(C::new(left, 0.0), from + 1).0.re
            }
            None => zp.tail(C::new(xa, 0.0), from).0.re,
        };
        Ok(zp)
    }

    /// Straightens the corner at b: the two edges through b go to ℝ± near 0.
    fn pre(&self, z: C) -> (C, C) {
        let q = (z - self.b) * self.rot;
        if self.pow == 1.0 {
            return (q, self.rot);
        }
        let mut th = q.arg();
        if th < -1e-12 {
            th += 2.0 * std::f64::consts::PI;
        }
        let w = C::from_polar(q.norm().powf(self.pow), th * self.pow);
        (w, self.pow * w / (z - self.b))
    }

    fn pre_inverse(&self, w: C) -> C {
        let q = if self.pow == 1.0 {
            w
        } else {
            C::from_polar(w.norm().powf(1.0 / self.pow), w.arg().max(0.0) / self.pow)
        };
        self.b + q / self.rot
    }

    /// i√((z−p1)/z): b (now at 0) to ∞, the short segment [0, p1] to ℝ⁻.
    fn first(&self, z: C) -> (C, C) {
        let t = (z - self.p1) / z;
        let st = t.sqrt();
        (C::i() * st, C::i() * (self.p1 / (z * z)) / (2.0 * st))
    }

    /// Slits from index `from` on, then the closing square map.
    fn tail(&self, mut w: C, from: usize) -> (C, C) {
        let mut d = C::new(1.0, 0.0);
        for &(x, tau) in &self.steps[from..] {
            let (nw, dd) = slit_forward(x, tau, w);
            w = nw;
            d *= dd;
        }
        let u = w - self.fold_x;
        (-(u * u), -2.0 * d * u)
    }

    pub fn map_deriv(&self, z: C) -> (C, C) {
        let (w, d0) = self.pre(z);
        let (w, d1) = self.first(w);
        let (w, d2) = self.tail(w, 0);
        (w - self.shift, d0 * d1 * d2)
    }

    pub fn inverse(&self, w: C) -> C {
        let v = w + self.shift;
        let mut u = self.fold_x - (-v).sqrt();
        for &(x, tau) in self.steps.iter().rev() {
            u = slit_inverse(x, tau, u);
        }
        let t = -(u * u);
        let mut z = self.pre_inverse(self.p1 / (1.0 - t));
        // composing many slit inverses loses digits near the slit tips;
        // polish against the forward map, which is what defines the zipper
        for _ in 0..30 {
            let (f, d) = self.map_deriv(z);
            let dz = (f - w) / d;
            z -= dz;
            if dz.norm() < 1e-15 * (1.0 + z.norm()) {
                break;
            }
        }
        z
    }
}

#[derive(Clone, Debug)]
pub enum HalfPlaneMap {
    /// The upper half-plane itself.
    Identity,
    Disk { center: C, radius: f64, mob: Mobius },
    Square { center: C, scale: f64, mob: Mobius },
    Zipper(Box<Zipper>),
}

impl HalfPlaneMap {
    pub fn for_shape(spec: &ShapeSpec) -> Result<Self> {
        match &spec.shape {
            Shape::Disk { center, radius } => {
                let c = cx(*center);
                let on = |p: [f64; 2]| {
                    let u = (cx(p) - c) / *radius;
                    u / u.norm()
                };
                Ok(HalfPlaneMap::Disk {
                    center: c,
                    radius: *radius,
                    mob: Mobius::disk_to_half_plane(on(spec.a), on(spec.b)),
                })
            }
            Shape::Square { origin, side } => {
                let c = C::new(origin[0] + side / 2.0, origin[1] + side / 2.0);
                let scale = 2.0 * sc_half_side() / side;
                let k = sc_half_side();
                let clamp_to_square = |p: [f64; 2]| {
                    let w = (cx(p) - c) * scale;
                    // push onto the nearest side
                    let (re, im) = (w.re.clamp(-k, k), w.im.clamp(-k, k));
                    if (k - re.abs()) < (k - im.abs()) {
                        C::new(k * re.signum(), im)
                    } else {
                        C::new(re, k * im.signum())
                    }
                };
                let ap = sc_boundary_preimage(clamp_to_square(spec.a));
                let bp = sc_boundary_preimage(clamp_to_square(spec.b));
                Ok(HalfPlaneMap::Square { center: c, scale, mob: Mobius::disk_to_half_plane(ap, bp) })
            }
            Shape::Polygon { vertices } => Ok(HalfPlaneMap::Zipper(Box::new(Zipper::new(vertices, spec.a, spec.b, 2000)?))),
        }
    }

    pub fn map_deriv(&self, z: C) -> (C, C) {
        match self {
            HalfPlaneMap::Identity => (z, C::new(1.0, 0.0)),
            HalfPlaneMap::Disk { center, radius, mob } => {
                let u = (z - center) / *radius;
                (mob.eval(u), mob.deriv(u) / *radius)
            }
            HalfPlaneMap::Square { center, scale, mob } => {
                let u = sc_inverse((z - center) * *scale);
                (mob.eval(u), mob.deriv(u) * sc_deriv_inv(u) * *scale)
            }
            HalfPlaneMap::Zipper(zp) => zp.map_deriv(z),
        }
    }

    pub fn map(&self, z: C) -> C {
        self.map_deriv(z).0
    }

    pub fn inverse(&self, w: C) -> C {
        match self {
            HalfPlaneMap::Identity => w,
            HalfPlaneMap::Disk { center, radius, mob } => center + mob.inverse().eval(w) * *radius,
            HalfPlaneMap::Square { center, scale, mob } => center + sc_forward(mob.inverse().eval(w)) / *scale,
            HalfPlaneMap::Zipper(zp) => zp.inverse(w),
        }
    }
}

/// G_ℍ(z, w) = log|(z − w̄)/(z − w)|.
pub fn green_half_plane(z: C, w: C) -> f64 {
    ((z - w.conj()) / (z - w)).norm().ln()
}
