//! The experiment catalogue. Every experiment turns a validated config into
//! a [`Report`] whose checks are the in-run assertions.

mod exponents;
mod oracles;
mod regimes;
mod weights;

use std::sync::Arc;

use magsle_core::domain::{arc_neighborhood, build_domain, ArcSide, DiscreteDomain};
use magsle_core::field::FieldSpec;
use magsle_core::interface::{extract_interface, LatticePath};
use magsle_core::ising::{BoundaryCondition, IsingChain, IsingSystem};
use magsle_core::rng::derive_seed;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::pool::par_map;
use crate::report::{sha256_hex, Report};

/// Independent chains an ensemble is split over. Fixed, so results do not
/// depend on the thread count.
pub const CELLS: usize = 4;

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    sha256_hex(cfg.to_toml().as_bytes())
}

pub(crate) struct Run<'a> {
    pub cfg: &'a ExperimentConfig,
    pub threads: usize,
}

impl Run<'_> {
    pub fn seed(&self, tag: &str, k: u64) -> u64 {
        derive_seed(self.cfg.seed, tag, k)
    }

    pub fn domain(&self, delta: f64) -> Result<DiscreteDomain> {
        Ok(build_domain(&self.cfg.domain, delta)?)
    }

    /// `n` Dobrushin interfaces at the given field, `spacing` sweeps apart,
    /// from `CELLS` independent chains.
    pub fn interfaces(&self, d: &DiscreteDomain, field: &FieldSpec, n: usize, seed: u64) -> Result<Vec<LatticePath>> {
        let sys = Arc::new(IsingSystem::on_domain(d, BoundaryCondition::Dobrushin, field)?);
        let cells: Vec<usize> = (0..CELLS).map(|c| n / CELLS + usize::from(c < n % CELLS)).collect();
        let spacing = self.cfg.spacing;
        let parts = par_map(self.threads, &cells, |c, &m| -> Result<Vec<LatticePath>> {
            let mut ch = IsingChain::new(sys.clone(), seed, c as u64);
            ch.equilibrate();
            let mut out = Vec::with_capacity(m);
            let mut first_err = None;
            ch.run(m, spacing, |ch| match extract_interface(d, &ch.config(BoundaryCondition::Dobrushin)) {
                Ok(p) => out.push(p),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            });
            match first_err {
                Some(e) => Err(e.into()),
                None => Ok(out),
            }
        });
        let mut all = Vec::with_capacity(n);
        for p in parts {
            all.extend(p?);
        }
        Ok(all)
    }
}

/// Interior vertices within η of the minus arc, as a mask.
pub(crate) fn minus_neighbourhood(d: &DiscreteDomain, eta: f64) -> Vec<bool> {
    let mut near = vec![false; d.n_interior()];
    for k in arc_neighborhood(d, ArcSide::Minus, eta) {
        near[k] = true;
    }
    near
}

/// Does the curve visit a vertex farther than η from the minus arc?
pub(crate) fn exits(path: &LatticePath, near: &[bool]) -> bool {
    path.v_left.iter().chain(&path.v_right).any(|&k| k < near.len() && !near[k])
}

/// Run one experiment. The config is validated first.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<Report> {
    cfg.validate()?;
    let mut r = Report::new(&cfg.experiment, &config_hash(cfg), cfg.seed);
    let run = Run { cfg, threads: threads.max(1) };
    match cfg.experiment.as_str() {
        "driving_variance" => regimes::driving_variance(&run, &mut r)?,
        "small_field_ks" => regimes::small_field_ks(&run, &mut r)?,
        "large_field_degeneration" => regimes::large_field_degeneration(&run, &mut r)?,
        "h_limit_trend" => regimes::h_limit_trend(&run, &mut r)?,
        "interface_magnetization" => regimes::interface_magnetization(&run, &mut r)?,
        "arm_exponents" => exponents::arm_exponents(&run, &mut r)?,
        "c_sigma_calibration" => exponents::c_sigma_calibration(&run, &mut r)?,
        "rn_importance" => weights::rn_importance(&run, &mut r)?,
        "covariance_check" => weights::covariance_check(&run, &mut r)?,
        "es_exact" => oracles::es_exact(&run, &mut r)?,
        "loewner_oracles" => oracles::loewner_oracles(&run, &mut r)?,
        "kernel_oracles" => oracles::kernel_oracles(&run, &mut r)?,
        "inequality_suite" => oracles::inequality_suite(&run, &mut r)?,
        _ => unreachable!("validate rejects unknown ids"),
    }
    Ok(r)
}
