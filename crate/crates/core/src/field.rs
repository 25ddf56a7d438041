//! External field H(x, δ) = c · h(x) · δ^p · g(δ).

use serde::{Deserialize, Serialize};

use crate::domain::DiscreteDomain;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldProfile {
    Constant { h: f64 },
    /// h(x, y) = c0 + cx·x + cy·y
    Affine { c0: f64, cx: f64, cy: f64 },
}

impl FieldProfile {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match *self {
            FieldProfile::Constant { h } => h,
            FieldProfile::Affine { c0, cx, cy } => c0 + cx * p[0] + cy * p[1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "p", rename_all = "snake_case")]
pub enum Modifier {
    One,
    DeltaPow(f64),
    InvDeltaPow(f64),
}

impl Modifier {
    pub fn eval(&self, delta: f64) -> f64 {
        match *self {
            Modifier::One => 1.0,
            Modifier::DeltaPow(p) => delta.powf(p),
            Modifier::InvDeltaPow(p) => delta.powf(-p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub h: FieldProfile,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
    #[serde(default = "default_modifier")]
    pub modifier: Modifier,
    #[serde(default = "one")]
    pub c_sigma_inv: f64,
}

fn default_exponent() -> f64 {
    15.0 / 8.0
}
fn default_modifier() -> Modifier {
    Modifier::One
}
fn one() -> f64 {
    1.0
}

impl FieldSpec {
    pub fn zero() -> Self {
        FieldSpec::constant(0.0)
    }

    /// h constant, near-critical scaling δ^{15/8}.
    pub fn constant(h: f64) -> Self {
        FieldSpec { h: FieldProfile::Constant { h }, exponent: 15.0 / 8.0, modifier: Modifier::One, c_sigma_inv: 1.0 }
    }

    /// A lattice field H_x = value on every interior vertex, independent of δ.
    pub fn raw(value: f64) -> Self {
        FieldSpec { h: FieldProfile::Constant { h: value }, exponent: 0.0, modifier: Modifier::One, c_sigma_inv: 1.0 }
    }

    pub fn with_modifier(mut self, m: Modifier) -> Self {
        self.modifier = m;
        self
    }

    pub fn with_c_sigma(mut self, c_sigma: f64) -> Self {
        self.c_sigma_inv = 1.0 / c_sigma;
        self
    }

    /// Per-unit-h lattice scale c·δ^p·g(δ).
    pub fn scale(&self, delta: f64) -> f64 {
        self.c_sigma_inv * delta.powf(self.exponent) * self.modifier.eval(delta)
    }

    pub fn at(&self, p: [f64; 2], delta: f64) -> f64 {
        self.h.eval(p) * self.scale(delta)
    }

    pub fn is_zero(&self) -> bool {
        match self.h {
            FieldProfile::Constant { h } => h == 0.0,
            FieldProfile::Affine { c0, cx, cy } => c0 == 0.0 && cx == 0.0 && cy == 0.0,
        }
    }

    /// H on every domain vertex (interior first, boundary entries zero).
    pub fn per_vertex(&self, d: &DiscreteDomain) -> Vec<f64> {
        let mut out = vec![0.0; d.n_vertices()];
        for (k, s) in d.interior.iter().enumerate() {
            out[k] = self.at(d.pos(*s), d.delta);
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut f = self.clone();
        f.h = match f.h {
            FieldProfile::Constant { h } => FieldProfile::Constant { h: h * factor },
            FieldProfile::Affine { c0, cx, cy } => FieldProfile::Affine { c0: c0 * factor, cx: cx * factor, cy: cy * factor },
        };
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling() {
        let f = FieldSpec::constant(2.0).with_modifier(Modifier::InvDeltaPow(0.5));
        let d = 1.0 / 16.0;
        assert!((f.at([0.0, 0.0], d) - 2.0 * d.powf(15.0 / 8.0) * d.powf(-0.5)).abs() < 1e-15);
        let g = FieldSpec::constant(1.0).with_modifier(Modifier::DeltaPow(0.25)).with_c_sigma(0.5);
        assert!((g.at([0.3, 0.1], d) - 2.0 * d.powf(2.125)).abs() < 1e-15);
        assert!(FieldSpec::zero().is_zero());
    }

    #[test]
    fn toml_roundtrip() {
        let f = FieldSpec::constant(0.5).with_modifier(Modifier::DeltaPow(0.25));
        let s = toml::to_string(&f).unwrap();
        let g: FieldSpec = toml::from_str(&s).unwrap();
        assert_eq!(f, g);
    }
}
