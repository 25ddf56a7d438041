//! Small statistics toolbox used by the samplers and the experiments.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Estimate { value, stderr }
    }
    /// |self - other| measured in combined standard errors.
    pub fn z_diff(&self, other: &Estimate) -> f64 {
        let s = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        if s == 0.0 {
            if self.value == other.value { 0.0 } else { f64::INFINITY }
        } else {
            (self.value - other.value).abs() / s
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Mean with the naive iid standard error.
pub fn mean_iid(xs: &[f64]) -> Estimate {
    Estimate::new(mean(xs), (variance(xs) / xs.len().max(1) as f64).sqrt())
}

/// Batch-means estimate of the mean of a correlated series together with the
/// integrated autocorrelation time implied by the batch variance.
pub struct BatchMeans {
    pub estimate: Estimate,
    pub tau: f64,
    pub n_batches: usize,
}

pub fn batch_means(xs: &[f64]) -> BatchMeans {
    let n = xs.len();
    let m = mean(xs);
    let var = variance(xs);
    if n < 8 || var == 0.0 {
        return BatchMeans {
            estimate: Estimate::new(m, (var / n.max(1) as f64).sqrt()),
            tau: 1.0,
            n_batches: n,
        };
    }
    // sqrt(n) batches of sqrt(n) samples, at least 8 batches
    let nb = ((n as f64).sqrt().floor() as usize).clamp(8, n);
    let bs = n / nb;
    let means: Vec<f64> = (0..nb).map(|b| mean(&xs[b * bs..(b + 1) * bs])).collect();
    let vb = variance(&means);
    let se = (vb / nb as f64).sqrt();
    let tau = (bs as f64 * vb / var).max(0.5);
    BatchMeans { estimate: Estimate::new(m, se.max((var / n as f64).sqrt())), tau, n_batches: nb }
}

/// Delete-one-block jackknife for a scalar statistic of a sample. `stat`
/// receives the kept samples.
pub fn jackknife<F>(xs: &[f64], n_blocks: usize, stat: F) -> Estimate
where
    F: Fn(&[f64]) -> f64,
{
    let n = xs.len();
    let full = stat(xs);
    let nb = n_blocks.min(n).max(2);
    let bs = n / nb;
    if bs == 0 {
        return Estimate::new(full, f64::NAN);
    }
    let mut reps = Vec::with_capacity(nb);
    let mut buf = Vec::with_capacity(n);
    for b in 0..nb {
        buf.clear();
        buf.extend_from_slice(&xs[..b * bs]);
        buf.extend_from_slice(&xs[(b + 1) * bs..]);
        reps.push(stat(&buf));
    }
    let rm = mean(&reps);
    let v = reps.iter().map(|r| (r - rm).powi(2)).sum::<f64>() * (nb - 1) as f64 / nb as f64;
    Estimate::new(full, v.sqrt())
}

/// Block jackknife for statistics of several parallel per-sample arrays:
/// `stat` receives the list of kept sample indices. Blocks are contiguous so
/// autocorrelated chains are handled as long as blocks exceed the
/// correlation time.
pub fn jackknife_idx<F>(n: usize, n_blocks: usize, stat: F) -> Estimate
where
    F: Fn(&[usize]) -> f64,
{
    let all: Vec<usize> = (0..n).collect();
    let full = stat(&all);
    let nb = n_blocks.min(n).max(2);
    let bs = n / nb;
    if bs == 0 {
        return Estimate::new(full, f64::NAN);
    }
    let mut reps = Vec::with_capacity(nb);
    let mut keep = Vec::with_capacity(n);
    for b in 0..nb {
        keep.clear();
        keep.extend((0..n).filter(|&i| i < b * bs || i >= (b + 1) * bs));
        reps.push(stat(&keep));
    }
    let rm = mean(&reps);
    let v = reps.iter().map(|r| (r - rm).powi(2)).sum::<f64>() * (nb - 1) as f64 / nb as f64;
    Estimate::new(full, v.sqrt())
}

/// Wilson score interval for a binomial proportion at z standard deviations.
pub fn wilson(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

pub fn proportion(successes: usize, n: usize) -> Estimate {
    let p = successes as f64 / n.max(1) as f64;
    Estimate::new(p, (p * (1.0 - p) / n.max(1) as f64).sqrt())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_se: f64,
    pub slope_se: f64,
    pub residual_rms: f64,
}

/// Weighted least squares y = a + b x. Weights are inverse variances; pass
/// all ones for an unweighted fit. Standard errors come from the residual
/// scatter when there are more than two points.
pub fn fit_line(x: &[f64], y: &[f64], w: &[f64]) -> LineFit {
    line_fit(x, y, w, false)
}

/// Like [`fit_line`] for weights that are genuine inverse variances: the
/// residual scale is floored at 1, so a few points that happen to lie on a
/// line do not shrink the errors below what the per-point errors imply.
pub fn fit_line_inv_var(x: &[f64], y: &[f64], w: &[f64]) -> LineFit {
    line_fit(x, y, w, true)
}

fn line_fit(x: &[f64], y: &[f64], w: &[f64], floor: bool) -> LineFit {
    assert!(x.len() == y.len() && x.len() == w.len() && x.len() >= 2);
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let xm = sx / sw;
    let ym = sy / sw;
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - xm).powi(2)).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let n = x.len();
    let rss: f64 = w
        .iter()
        .zip(x)
        .zip(y)
        .map(|((w, x), y)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let s2 = if n > 2 { rss / (n - 2) as f64 } else { 0.0 };
    let s2 = if floor { s2.max(1.0) } else { s2 };
    LineFit {
        intercept,
        slope,
        slope_se: (s2 / sxx).sqrt(),
        intercept_se: (s2 * (1.0 / sw + xm * xm / sxx)).sqrt(),
        residual_rms: (rss / sw).sqrt(),
    }
}

/// Line fit through the origin, y = b x.
pub fn fit_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    let sxx: f64 = x.iter().map(|x| x * x).sum();
    let sxy: f64 = x.iter().zip(y).map(|(x, y)| x * y).sum();
    let b = sxy / sxx;
    let n = x.len();
    let rss: f64 = x.iter().zip(y).map(|(x, y)| (y - b * x).powi(2)).sum();
    let se = if n > 1 { (rss / (n - 1) as f64 / sxx).sqrt() } else { 0.0 };
    (b, se)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let v = a[i].min(b[j]);
        while i < na && a[i] <= v {
            i += 1;
        }
        while j < nb && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&x, &y, &[1.0; 4]);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_se < 1e-12);
    }

    #[test]
    fn wilson_contains_p() {
        let (lo, hi) = wilson(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!((lo - 0.2189).abs() < 1e-3 && (hi - 0.3958).abs() < 1e-3);
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let (d, p) = ks_two_sample(&a, &a);
        assert!(d < 1e-12 && p > 0.99);
        let b: Vec<f64> = a.iter().map(|x| x + 0.3).collect();
        let (_, p) = ks_two_sample(&a, &b);
        assert!(p < 1e-6);
        // Q(1.36) is the classic 5% point
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn jackknife_mean_matches_iid() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64).collect();
        let j = jackknife(&xs, 100, mean);
        let m = mean_iid(&xs);
        assert!((j.stderr - m.stderr).abs() < 1e-10);
    }
}
