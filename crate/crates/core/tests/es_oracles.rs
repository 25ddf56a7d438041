use magsle_core::fk::{exact, FkBoundary};
use magsle_core::graph::SiteGraph;
use magsle_core::ising::{ExactTable, IsingSystem, BETA_C};

fn cases() -> Vec<(SiteGraph, Vec<f64>)> {
    let mut out = Vec::new();
    for cells in exact::polyominoes(4) {
        let (g, _) = SiteGraph::from_sites(&cells);
        for h0 in [0.0, 0.15, 0.7] {
            // uneven field to catch per-vertex bookkeeping errors
            let h = (0..g.n).map(|v| if g.interior[v] { h0 * (1.0 + 0.3 * v as f64) } else { 0.0 }).collect();
            out.push((g.clone(), h));
        }
    }
    out
}

#[test]
fn there_are_28_small_polyominoes() {
    assert_eq!(exact::polyominoes(4).len(), 28);
}

#[test]
fn pipeline_spin_law_equals_ising() {
    let mut worst: f64 = 0.0;
    for (g, h) in cases() {
        for bc in [FkBoundary::Free, FkBoundary::Wired] {
            let fixed = (0..g.n)
                .map(|v| if bc == FkBoundary::Wired && !g.interior[v] { Some(1) } else { None })
                .collect();
            let sys = IsingSystem::new(g.clone(), fixed, h.clone(), BETA_C).unwrap();
            let t = ExactTable::from_system(&sys).unwrap();
            let (law, free) = exact::pipeline_spin_law(&g, bc, &h).unwrap();
            assert_eq!(free.iter().map(|&v| v as u32).collect::<Vec<_>>(), t.free);
            let tv = t.total_variation(&law);
            worst = worst.max(tv);
        }
    }
    assert!(worst < 1e-10, "worst TV {worst:e}");
}

#[test]
fn cosh_reweighting_equals_ghost_marginal() {
    let mut worst: f64 = 0.0;
    for (g, h) in cases() {
        for bc in [FkBoundary::Free, FkBoundary::Wired] {
            let a = exact::reweighted_law(&g, bc, &h).unwrap();
            let b = exact::ghost_marginal(&g, bc, &h).unwrap();
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    assert!(worst < 1e-12, "worst gap {worst:e}");
}
