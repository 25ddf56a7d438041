//! Exact and closed-form oracle suites, and the inequality suite.

use num_complex::Complex64 as C;

use magsle_core::conformal::HalfPlaneMap;
use magsle_core::correlation::f_plus_k;
use magsle_core::domain::{DiscreteDomain, ShapeSpec, Site};
use magsle_core::fk::{exact, fk_marginal_log_weight, EdgeConfig, FkBoundary, SpinRouteFk};
use magsle_core::graph::SiteGraph;
use magsle_core::harmonic::HarmonicContext;
use magsle_core::interface::cluster_extents;
use magsle_core::ising::{bc_domination_test, fkg_inequality_test, sample_observables, BoundaryCondition, ExactTable, InequalityReport, IsingSystem, BETA_C};
use magsle_core::loewner::{peel_points, sle_steps, trace_from_steps, PeelOptions};
use magsle_core::rng::{self, Rng};
use magsle_core::stats::{self, Estimate};

use super::Run;
use crate::error::Result;
use crate::report::{Check, Report, Table};

pub fn es_exact(_run: &Run, r: &mut Report) -> Result<()> {
    let (mut tv, mut literal, mut gap): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut cases = 0;
    let mut tab = Table::new("cases", &["polyomino", "h0", "wired", "tv", "reweight_gap"]);
    for (p, cells) in exact::polyominoes(4).iter().enumerate() {
        let (g, _) = SiteGraph::from_sites(cells);
        for h0 in [0.0, 0.15, 0.7] {
            // uneven on purpose, to catch per-vertex bookkeeping errors
            let h: Vec<f64> = (0..g.n).map(|v| if g.interior[v] { h0 * (1.0 + 0.3 * v as f64) } else { 0.0 }).collect();
            for bc in [FkBoundary::Free, FkBoundary::Wired] {
                let fixed = (0..g.n).map(|v| (bc == FkBoundary::Wired && !g.interior[v]).then_some(1)).collect();
                let t = ExactTable::from_system(&IsingSystem::new(g.clone(), fixed, h.clone(), BETA_C)?)?;
                let (law, _) = exact::pipeline_spin_law(&g, bc, &h)?;
                let d = t.total_variation(&law);
                tv = tv.max(d);
                if bc == FkBoundary::Free && g.n <= 8 {
                    literal = literal.max(t.total_variation(&exact::pipeline_spin_law_literal(&g, &h)?));
                }
                let a = exact::reweighted_law(&g, bc, &h)?;
                let b = exact::ghost_marginal(&g, bc, &h)?;
                let gp = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                gap = gap.max(gp);
                tab.push(vec![p as f64, h0, f64::from(u8::from(bc == FkBoundary::Wired)), d, gp]);
                cases += 1;
            }
        }
    }
    r.tables.push(tab);
    r.tolerance("tv", 1e-10);
    r.tolerance("reweight", 1e-12);
    r.check(Check::new("es_pipeline_tv", tv < 1e-10, tv, "< 1e-10", format!("{cases} cases over {} graphs", exact::polyominoes(4).len())));
    r.check(Check::new("es_literal_tv", literal < 1e-10, literal, "< 1e-10", "literal (ω, flags, coins) enumeration, free bc"));
    r.check(Check::new("cosh_reweighting", gap < 1e-12, gap, "< 1e-12", "∏cosh-reweighted FK law against the ghost ω-marginal"));
    Ok(())
}

fn vertical(y: f64, n: usize) -> Vec<C> {
    (1..=n).map(|k| C::new(0.0, y * k as f64 / n as f64)).collect()
}

pub fn loewner_oracles(run: &Run, r: &mut Report) -> Result<()> {
    let mut tab = Table::new("vertical_slit", &["height", "sup_driving", "hcap", "hcap_over_quarter_square"]);
    let (mut sup, mut rel): (f64, f64) = (0.0, 0.0);
    for y in [0.25, 0.7, 1.0, 2.0] {
        let (df, _) = peel_points(&vertical(y, 400), PeelOptions::default())?;
        let s = df.samples.iter().map(|x| x.1.abs()).fold(0.0, f64::max);
        let q = df.total_capacity / (y * y / 4.0);
        sup = sup.max(s);
        rel = rel.max((q - 1.0).abs());
        tab.push(vec![y, s, df.total_capacity, q]);
    }
    r.tables.push(tab);
    r.check(Check::new("vertical_slit_driving", sup < 1e-3, sup, "sup |W| < 1e-3", "400-point slits of heights 0.25 to 2"));
    r.check(Check::new("vertical_slit_hcap", rel < 0.01, rel, "hcap = y²/4 within 1%", ""));

    // zip a Brownian driving function into a trace, unzip it, zip again
    let mut worst: f64 = 0.0;
    for k in 0..3 {
        let steps = sle_steps(3.0, 1.0, 2e-3, run.seed("sle", k));
        let trace = trace_from_steps(&steps);
        let (_, back) = peel_points(&trace, PeelOptions::default())?;
        let again = trace_from_steps(&back);
        let scale = trace.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let dev = if again.len() == trace.len() {
            trace.iter().zip(&again).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale
        } else {
            f64::INFINITY
        };
        worst = worst.max(dev);
    }
    r.tolerance("roundtrip_rel", 1e-2);
    r.check(Check::new("zip_unzip_roundtrip", worst < 1e-2, worst, "< 1e-2 relative", "three SLE_3 traces, 500 steps each"));
    Ok(())
}

fn in_disk(g: &mut rng::ChainRng, rmax: f64) -> C {
    C::from_polar(rmax * g.random::<f64>().sqrt(), std::f64::consts::TAU * g.random::<f64>())
}

pub fn kernel_oracles(run: &Run, r: &mut Report) -> Result<()> {
    let disk_spec = ShapeSpec::unit_disk([-1.0, 0.0], [1.0, 0.0]);
    let disk = HarmonicContext::Disk { center: C::new(0.0, 0.0), radius: 1.0 };
    let mapped_disk = HarmonicContext::Mapped { shape: disk_spec.clone(), map: HalfPlaneMap::for_shape(&disk_spec)? };
    let square_spec = ShapeSpec::unit_square([0.0, 0.0], [1.0, 0.0]);
    let square = HarmonicContext::for_shape(&square_spec)?;
    let mut g = rng::stream(run.seed("points", 0), 0);

    // two-point kernel against CR^{-1/8} CR^{-1/8} √(2 cosh(G/2))
    let mut worst: f64 = 0.0;
    for ctx in [&disk, &square] {
        for _ in 0..100 {
            let (x, y) = match ctx {
                HarmonicContext::Disk { .. } => (in_disk(&mut g, 0.95), in_disk(&mut g, 0.95)),
                _ => (C::new(g.random_range(0.02..0.98), g.random_range(0.02..0.98)), C::new(g.random_range(0.02..0.98), g.random_range(0.02..0.98))),
            };
            let f = f_plus_k(ctx, &[x, y])?;
            let want = (ctx.conformal_radius(x)? * ctx.conformal_radius(y)?).powf(-0.125) * (2.0 * (ctx.green(x, y)? / 2.0).cosh()).sqrt();
            worst = worst.max((f - want).abs() / want);
        }
    }
    r.tolerance("kernel2_rel", 1e-12);
    r.check(Check::new("two_point_kernel", worst < 1e-12, worst, "< 1e-12 relative", "100 pairs each on the disk and the square"));

    // Möbius route to the disk against the closed forms
    let mut dev: f64 = 0.0;
    for _ in 0..100 {
        let (x, y) = (in_disk(&mut g, 0.95), in_disk(&mut g, 0.95));
        dev = dev.max((disk.green(x, y)? - mapped_disk.green(x, y)?).abs());
        dev = dev.max((disk.conformal_radius(x)? - mapped_disk.conformal_radius(x)?).abs());
    }
    r.tolerance("disk_closed_form", 1e-8);
    r.check(Check::new("disk_closed_forms", dev < 1e-8, dev, "< 1e-8", "Green's function and CR at 100 points"));

    // Koebe: dist ≤ CR ≤ 4·dist
    let mut bad = 0;
    let mut tab = Table::new("koebe", &["dist", "cr"]);
    for k in 0..100 {
        let (ctx, spec, x) = if k % 2 == 0 {
            (&disk, &disk_spec, in_disk(&mut g, 0.99))
        } else {
            (&square, &square_spec, C::new(g.random_range(0.005..0.995), g.random_range(0.005..0.995)))
        };
        let dist = spec.boundary_distance([x.re, x.im]);
        let cr = ctx.conformal_radius(x)?;
        if !(dist <= cr * (1.0 + 1e-12) && cr <= 4.0 * dist * (1.0 + 1e-12)) {
            bad += 1;
        }
        tab.push(vec![dist, cr]);
    }
    r.tables.push(tab);
    r.check(Check::new("koebe", bad == 0, bad as f64, "0 violations", "100 points, disk and square"));
    Ok(())
}

fn centre_pair(d: &DiscreteDomain) -> (usize, usize) {
    let me = Site::new((0.5 / d.delta).round() as i32, (0.5 / d.delta).round() as i32);
    let x = d.index(me).expect("centre vertex");
    let y = d.index(me.offset((4, 0))).expect("neighbour of the centre");
    (x, y)
}

/// Is there an open cluster touching both the leftmost and rightmost columns?
fn left_right_crossing(d: &DiscreteDomain, cfg: &EdgeConfig, cols: (i32, i32)) -> bool {
    cluster_extents(d, cfg).iter().any(|e| e[0] == cols.0 && e[2] == cols.1)
}

fn record(r: &mut Report, name: &str, rep: &InequalityReport, what: &str) {
    r.check(Check::new(
        name,
        rep.pass,
        rep.z,
        "lhs ≥ rhs − 3σ",
        format!("{what}: {:.5} ± {:.5} vs {:.5} ± {:.5}", rep.lhs.value, rep.lhs.stderr, rep.rhs.value, rep.rhs.stderr),
    ));
}

pub fn inequality_suite(run: &Run, r: &mut Report) -> Result<()> {
    let cfg = run.cfg;
    let d = run.domain(cfg.meshes[0])?;
    let field = cfg.field.spec();
    let n = cfg.samples;
    let (x, y) = centre_pair(&d);
    let sx = move |s: &[i8]| f64::from(s[x]);
    let sy = move |s: &[i8]| f64::from(s[y]);

    let fkg = fkg_inequality_test(&d, BoundaryCondition::Plus, &field, sx, sy, n, run.seed("fkg", 0))?;
    record(r, "fkg", &fkg, "E⁺_H[σ_xσ_y] ≥ E⁺_H[σ_x]E⁺_H[σ_y]");

    let dom = bc_domination_test(&d, (BoundaryCondition::Plus, &field), (BoundaryCondition::Free, &field), sx, n, run.seed("dom", 0))?;
    record(r, "plus_dominates_free", &dom, "E⁺_H[σ_x] ≥ E^free_H[σ_x]");

    let zero = magsle_core::field::FieldSpec::zero();
    let rows = |bc, s| sample_observables(&d, bc, &zero, n, s, |c: &[i8]| vec![sx(c), sx(c) * sy(c)]);
    let plus = rows(BoundaryCondition::Plus, run.seed("plus", 0))?;
    let dob = rows(BoundaryCondition::Dobrushin, run.seed("dobrushin", 0))?;
    for (k, name) in [(0, "dobrushin_bounded_1pt"), (1, "dobrushin_bounded_2pt")] {
        let col = |rows: &[Vec<f64>]| -> Estimate {
            let xs: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            stats::jackknife(&xs, 50, stats::mean)
        };
        let (a, b) = (col(&plus), col(&dob));
        let b_abs = Estimate::new(b.value.abs(), b.stderr);
        let rep = InequalityReport::new(a, b_abs, (a.stderr.powi(2) + b.stderr.powi(2)).sqrt());
        record(r, name, &rep, if k == 0 { "E⁺[σ_x] ≥ |E^±[σ_x]|" } else { "E⁺[σ_xσ_y] ≥ |E^±[σ_xσ_y]|" });
    }

    // Q_{δ,H} ⪰ P^{FK,free} on the increasing event of a left-right crossing
    let cols = d.interior.iter().chain(&d.boundary).fold((i32::MAX, i32::MIN), |c, s| (c.0.min(s.i), c.1.max(s.i)));
    let h = field.per_vertex(&d);
    let mut fk = SpinRouteFk::new(&d, FkBoundary::Free, &zero, run.seed("fk_free", 0), 0)?;
    let (mut ind, mut lw) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let c = fk.next(1)?;
        ind.push(f64::from(u8::from(left_right_crossing(&d, &c, cols))));
        lw.push(fk_marginal_log_weight(&c, &h));
    }
    let mx = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|l| (l - mx).exp()).collect();
    let nb = 50;
    let reweighted = stats::jackknife_idx(n, nb, |idx| idx.iter().map(|&i| w[i] * ind[i]).sum::<f64>() / idx.iter().map(|&i| w[i]).sum::<f64>());
    let plain = stats::jackknife(&ind, nb, stats::mean);
    let diff = stats::jackknife_idx(n, nb, |idx| {
        let k = idx.len() as f64;
        idx.iter().map(|&i| w[i] * ind[i]).sum::<f64>() / idx.iter().map(|&i| w[i]).sum::<f64>() - idx.iter().map(|&i| ind[i]).sum::<f64>() / k
    });
    let rep = InequalityReport::new(reweighted, plain, diff.stderr);
    record(r, "q_dominates_fk_free_reweighted", &rep, "∏cosh-reweighted crossing ≥ FK-free crossing");

    let mut q = SpinRouteFk::new(&d, FkBoundary::Free, &field, run.seed("fk_field", 0), 0)?;
    let direct: Vec<f64> = (0..n).map(|_| q.next(1).map(|c| f64::from(u8::from(left_right_crossing(&d, &c, cols))))).collect::<std::result::Result<_, _>>()?;
    let qe = stats::jackknife(&direct, nb, stats::mean);
    let rep = InequalityReport::new(qe, plain, (qe.stderr.powi(2) + plain.stderr.powi(2)).sqrt());
    record(r, "q_dominates_fk_free_direct", &rep, "crossing under the field coupling ≥ FK-free crossing");

    r.note("lattice_field", field.at([0.5, 0.5], d.delta));
    r.note("samples", n);
    r.tolerance("one_sided_sigmas", 3.0);
    Ok(())
}
