use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C;
use serde_json::json;

use magsle_core::correlation::{estimate_c_sigma, kernel, series_const, series_integral, Kernel};
use magsle_core::domain::{build_domain, DiscreteDomain};
use magsle_core::fk::{sample_fk, FkBoundary};
use magsle_core::harmonic::{slit_context, Component, HarmonicContext};
use magsle_core::interface::{extract_interface, LatticePath};
use magsle_core::ising::{sample_ising, BoundaryCondition};
use magsle_core::loewner::extract_driving;
use magsle_core::rn::{discrete_rn, intensity, rn_full, RnParams};
use magsle_core::snapshot::{write_edges, write_spins, SnapshotHeader, SnapshotKind};

use magsle_lab::config::ExperimentConfig;
use magsle_lab::plot::emit_plotdata;
use magsle_lab::pool::resolve_threads;
use magsle_lab::report::{blob_hash, sha256_hex, write_report, InputHash, Manifest};
use magsle_lab::{run_experiment, LabError, Result};

#[derive(Parser)]
#[command(name = "magsle", version, about = "Near-critical Ising interfaces and massive SLE3 experiments")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: MAGSLE_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default: MAGSLE_OUT, then the config, then out/<experiment>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpinBc {
    Dobrushin,
    Plus,
    Minus,
    Free,
}

#[derive(Clone, Copy, ValueEnum)]
enum FkBc {
    Free,
    Wired,
    TwoWired,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sign {
    Plus,
    Minus,
}

#[derive(Subcommand)]
enum Cmd {
    /// Discretize the config domain at the finest mesh and write its vertex list.
    Domain,
    /// Write one Ising snapshot.
    SampleIsing {
        #[arg(long, value_enum, default_value = "dobrushin")]
        bc: SpinBc,
        #[arg(long, default_value_t = 200)]
        sweeps: usize,
    },
    /// Write one FK snapshot (with ghost flags when the field is nonzero).
    SampleFk {
        #[arg(long, value_enum, default_value = "wired")]
        bc: FkBc,
        #[arg(long, default_value_t = 400)]
        sweeps: usize,
    },
    /// Sample a Dobrushin interface at the config field and write it as CSV.
    Interface {
        #[arg(long, default_value_t = 200)]
        sweeps: usize,
    },
    /// Driving function of a saved interface, or of a freshly sampled one.
    Driving {
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Print f^{(±,k)} at the given points of the config domain.
    KernelProbe {
        /// Points as x,y separated by ';', e.g. "0.1,0.2;-0.3,0".
        #[arg(long, allow_hyphen_values = true)]
        points: String,
        #[arg(long, value_enum, default_value = "plus")]
        sign: Sign,
    },
    /// Correlation series in the domain, or in a slit component of a saved curve.
    Series {
        #[arg(long, value_enum, default_value = "plus")]
        sign: Sign,
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Radon-Nikodym weights of saved curves (CSV files in DIR) or fresh H = 0 curves.
    Rn {
        #[arg(long)]
        paths: Option<PathBuf>,
        /// Also compute the continuum rn_full estimate.
        #[arg(long)]
        full: bool,
    },
    /// Run the experiment named in the config and write its report.
    Experiment,
    /// Fit C_σ over the config meshes.
    Calibrate,
}

fn load(cli: &Cli) -> Result<(ExperimentConfig, Vec<InputHash>)> {
    let p = cli.config.as_ref().ok_or_else(|| LabError::Parse("--config is required".into()))?;
    let text = fs::read_to_string(p)?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok((cfg, vec![InputHash { name: p.display().to_string(), blob: blob_hash(text.as_bytes()) }]))
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig, default: &str) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("MAGSLE_OUT").map(PathBuf::from))
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(default))
}

fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let p = dir.join(name);
    fs::write(&p, bytes)?;
    println!("wrote {}", p.display());
    Ok(p)
}

fn parse_points(s: &str) -> Result<Vec<C>> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let xy: Vec<f64> = t.split(',').map(|v| v.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| LabError::Parse(format!("point {t:?}: {e}")))?;
            match xy[..] {
                [x, y] => Ok(C::new(x, y)),
                _ => Err(LabError::Parse(format!("point {t:?} needs two coordinates"))),
            }
        })
        .collect()
}

fn fresh_interface(d: &DiscreteDomain, cfg: &ExperimentConfig, sweeps: usize) -> Result<LatticePath> {
    let s = sample_ising(d, BoundaryCondition::Dobrushin, &cfg.field.spec(), sweeps, cfg.seed)?;
    Ok(extract_interface(d, &s)?)
}

fn read_path(d: &DiscreteDomain, p: &Path) -> Result<LatticePath> {
    Ok(LatticePath::from_csv(d, &fs::read_to_string(p)?)?)
}

/// Returns whether every in-run assertion passed.
fn run(cli: &Cli) -> Result<bool> {
    let (cfg, inputs) = load(cli)?;
    let threads = resolve_threads(cli.threads);
    let delta = cfg.finest();
    match &cli.cmd {
        Cmd::Domain => {
            let d = build_domain(&cfg.domain, delta)?;
            let dir = out_dir(cli, &cfg, "domain");
            write(&dir, "domain.csv", d.to_csv())?;
            let info = json!({
                "delta": d.delta, "interior": d.n_interior(), "boundary": d.boundary.len(),
                "arc_minus": d.arc_minus.len(), "arc_plus": d.arc_plus.len(), "hash": d.hash(),
                "hull_hausdorff": d.hull_hausdorff(400),
            });
            println!("{}", serde_json::to_string_pretty(&info).unwrap());
        }
        Cmd::SampleIsing { bc, sweeps } => {
            let d = build_domain(&cfg.domain, delta)?;
            let bc = match bc {
                SpinBc::Dobrushin => BoundaryCondition::Dobrushin,
                SpinBc::Plus => BoundaryCondition::Plus,
                SpinBc::Minus => BoundaryCondition::Minus,
                SpinBc::Free => BoundaryCondition::Free,
            };
            let field = cfg.field.spec();
            let s = sample_ising(&d, bc, &field, *sweeps, cfg.seed)?;
            let header = SnapshotHeader { kind: SnapshotKind::Spins { bc }, domain_hash: d.hash(), field, seed: cfg.seed, sweeps: *sweeps as u64, n_vertices: d.n_vertices(), n_edges: d.edges().len() };
            let mut buf = Vec::new();
            write_spins(&mut buf, &header, &s)?;
            write(&out_dir(cli, &cfg, "snapshots"), "spins.snap", buf)?;
        }
        Cmd::SampleFk { bc, sweeps } => {
            let d = build_domain(&cfg.domain, delta)?;
            let bc = match bc {
                FkBc::Free => FkBoundary::Free,
                FkBc::Wired => FkBoundary::Wired,
                FkBc::TwoWired => FkBoundary::TwoWired,
            };
            let field = cfg.field.spec();
            let e = sample_fk(&d, bc, &field, *sweeps, cfg.seed)?;
            let header = SnapshotHeader { kind: SnapshotKind::Edges { bc }, domain_hash: d.hash(), field, seed: cfg.seed, sweeps: *sweeps as u64, n_vertices: d.n_vertices(), n_edges: d.edges().len() };
            let mut buf = Vec::new();
            write_edges(&mut buf, &header, &e)?;
            write(&out_dir(cli, &cfg, "snapshots"), "edges.snap", buf)?;
            println!("clusters: {}", e.n_clusters());
        }
        Cmd::Interface { sweeps } => {
            let d = build_domain(&cfg.domain, delta)?;
            let p = fresh_interface(&d, &cfg, *sweeps)?;
            write(&out_dir(cli, &cfg, "interface"), &format!("{}.csv", &p.hash()[..16]), p.to_csv())?;
            println!("{} steps, turns {}", p.len(), p.turn_codes());
        }
        Cmd::Driving { path } => {
            let d = build_domain(&cfg.domain, delta)?;
            let p = match path {
                Some(f) => read_path(&d, f)?,
                None => fresh_interface(&d, &cfg, 200)?,
            };
            let (w, _) = extract_driving(&p, &d)?;
            write(&out_dir(cli, &cfg, "driving"), &format!("{}_driving.csv", &p.hash()[..16]), w.to_csv())?;
            println!("capacity {:.6}, {} samples, max jump {:.3e}", w.total_capacity, w.samples.len(), w.max_jump);
        }
        Cmd::KernelProbe { points, sign } => {
            let ctx = HarmonicContext::for_shape(&cfg.domain)?;
            let pts = parse_points(points)?;
            let which = match sign {
                Sign::Plus => Kernel::Plus,
                Sign::Minus => Kernel::Minus,
            };
            println!("{}", kernel(&ctx, which, &pts)?);
        }
        Cmd::Series { sign, path } => {
            let which = match sign {
                Sign::Plus => Kernel::Plus,
                Sign::Minus => Kernel::Minus,
            };
            let field = cfg.field.spec();
            let s = match path {
                None => series_const(&HarmonicContext::for_shape(&cfg.domain)?, cfg.field.h, which, cfg.order, cfg.n_mc, cfg.seed)?,
                Some(f) => {
                    let d = build_domain(&cfg.domain, delta)?;
                    let p = read_path(&d, f)?;
                    let side = if matches!(which, Kernel::Plus) { Component::LeftOfCurve } else { Component::RightOfCurve };
                    series_integral(&slit_context(&d, &p, side)?, &intensity(&field), which, cfg.order, cfg.n_mc, cfg.seed)?
                }
            };
            println!("{}", serde_json::to_string_pretty(&s.to_json(cfg.field.h)).unwrap());
        }
        Cmd::Rn { paths, full } => {
            let d = build_domain(&cfg.domain, delta)?;
            let field = cfg.field.spec();
            let curves: Vec<LatticePath> = match paths {
                Some(dir) => {
                    let mut files: Vec<PathBuf> = fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "csv")).collect();
                    files.sort();
                    files.iter().map(|f| read_path(&d, f)).collect::<Result<_>>()?
                }
                None => (0..cfg.samples.min(20))
                    .map(|k| {
                        let s = sample_ising(&d, BoundaryCondition::Dobrushin, &magsle_core::field::FieldSpec::zero(), 200, cfg.seed.wrapping_add(k as u64))?;
                        Ok(extract_interface(&d, &s)?)
                    })
                    .collect::<Result<_>>()?,
            };
            let p = RnParams { order: cfg.order, n_mc: cfg.n_mc, n_samples: cfg.conditional_samples, seed: cfg.seed };
            let dir = out_dir(cli, &cfg, "rn");
            let mut summary = String::from("curve,discrete_rn,discrete_rn_se,rn_full,rn_full_se\n");
            let rows = magsle_lab::pool::par_map(threads, &curves, |_, c| -> Result<_> {
                let a = discrete_rn(c, &d, &field, &p)?;
                let b = if *full { Some(rn_full(c, &d, &field, &p)?) } else { None };
                Ok((a, b))
            });
            for (c, row) in curves.iter().zip(rows) {
                let (a, b) = row?;
                let id = &c.hash()[..16];
                write(&dir, &format!("{id}.json"), serde_json::to_string_pretty(&json!({"curve": c.hash(), "discrete_rn": a, "rn_full": b})).unwrap())?;
                let (fv, fs_) = b.map_or((f64::NAN, f64::NAN), |w| (w.value, w.stderr));
                summary.push_str(&format!("{id},{},{},{fv},{fs_}\n", a.value.value, a.value.stderr));
            }
            write(&dir, "summary.csv", summary)?;
        }
        Cmd::Experiment => {
            let t0 = Instant::now();
            let r = run_experiment(&cfg, threads)?;
            let m = Manifest::for_report(&r, inputs, threads, t0.elapsed().as_secs_f64());
            let dir = out_dir(cli, &cfg, &cfg.experiment);
            for p in write_report(&dir, &r, &m)?.into_iter().chain(emit_plotdata(&r, &dir)?) {
                println!("wrote {}", p.display());
            }
            for c in &r.checks {
                println!("{} {}: {} (target {}) {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.target, c.detail);
            }
            println!("report {}", m.report_hash);
            return Ok(r.passed());
        }
        Cmd::Calibrate => {
            let fit = estimate_c_sigma(&cfg.meshes, cfg.samples, cfg.seed)?;
            let text = serde_json::to_string_pretty(&fit).unwrap();
            write(&out_dir(cli, &cfg, "calibrate"), "c_sigma.json", &text)?;
            println!("C_sigma = {:.5} [{:.5}, {:.5}] (config {})", fit.c_sigma, fit.ci.0, fit.ci.1, sha256_hex(cfg.to_toml().as_bytes()));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
