use num_complex::Complex64 as C;
use proptest::prelude::*;

use magsle_core::conformal::{slit_forward, slit_inverse, DiskAutomorphism, HalfPlaneMap};
use magsle_core::correlation::{f_minus_k, f_plus_k};
use magsle_core::domain::{build_domain, ShapeSpec};
use magsle_core::field::FieldSpec;
use magsle_core::harmonic::HarmonicContext;
use magsle_core::interface::{adjacency_counts, extract_interface, split_components, LatticePath};
use magsle_core::ising::{sample_ising, BoundaryCondition};
use magsle_core::loewner::{peel_points, trace_from_steps, PeelOptions, SlitStep};
use magsle_core::rng;
use magsle_core::snapshot::{read_spins, write_spins, SnapshotHeader, SnapshotKind};
use magsle_core::sparse::{BandCholesky, Csr};
use magsle_core::stats::wilson;

fn disk() -> HarmonicContext {
    HarmonicContext::Disk { center: C::new(0.0, 0.0), radius: 1.0 }
}

fn in_disk(r: f64, th: f64) -> C {
    C::from_polar(r, th)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slit_map_roundtrip(x in -2.0..2.0f64, tau in 1e-4..1.0f64, re in -3.0..3.0f64, im in 1e-3..3.0f64) {
        let z = C::new(re, im);
        let (w, _) = slit_forward(x, tau, z);
        prop_assert!(w.im > 0.0);
        prop_assert!((slit_inverse(x, tau, w) - z).norm() < 1e-9 * (1.0 + z.norm()));
    }

    #[test]
    fn peeling_a_trace_returns_its_steps(xs in prop::collection::vec(-0.05..0.05f64, 2..30)) {
        let steps: Vec<SlitStep> = xs.iter().scan(0.0, |w, dx| { *w += dx; Some(SlitStep { x: *w, tau: 1e-3 }) }).collect();
        let tr = trace_from_steps(&steps);
        let (df, back) = peel_points(&tr, PeelOptions::default()).unwrap();
        prop_assert_eq!(back.len(), steps.len());
        for (a, b) in back.iter().zip(&steps) {
            prop_assert!((a.x - b.x).abs() < 1e-8 && (a.tau - b.tau).abs() < 1e-10);
        }
        prop_assert!((df.total_capacity - 1e-3 * steps.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn kernel_positive_symmetric_covariant(
        pts in prop::collection::vec((0.0..0.9f64, 0.0..6.283f64), 1..6),
        seed in 0u64..1000,
    ) {
        let g = disk();
        let z: Vec<C> = pts.iter().map(|&(r, t)| in_disk(r, t)).collect();
        prop_assume!(z.iter().enumerate().all(|(j, a)| z[..j].iter().all(|b| (a - b).norm() > 1e-6)));
        let f = f_plus_k(&g, &z).unwrap();
        prop_assert!(f > 0.0);
        let mut rz = z.clone();
        rz.rotate_left(1);
        prop_assert!((f_plus_k(&g, &rz).unwrap() - f).abs() <= 1e-12 * f);
        let sign = if z.len() % 2 == 1 { -1.0 } else { 1.0 };
        prop_assert_eq!(f_minus_k(&g, &z).unwrap(), sign * f);
        let psi = DiskAutomorphism::random(&mut rng::stream(seed, 0), 0.6);
        let img: Vec<C> = z.iter().map(|&x| psi.apply(x)).collect();
        let jac: f64 = z.iter().map(|&x| psi.deriv(x).norm().powf(0.125)).product();
        prop_assert!((jac * f_plus_k(&g, &img).unwrap() - f).abs() < 1e-5 * f);
    }

    #[test]
    fn disk_green_symmetric_positive(r1 in 0.0..0.95f64, t1 in 0.0..6.283f64, r2 in 0.0..0.95f64, t2 in 0.0..6.283f64) {
        let (x, y) = (in_disk(r1, t1), in_disk(r2, t2));
        prop_assume!((x - y).norm() > 1e-6);
        let g = disk();
        let a = g.green(x, y).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - g.green(y, x).unwrap()).abs() < 1e-10);
        let cr = g.conformal_radius(x).unwrap();
        let dist = 1.0 - x.norm();
        prop_assert!(cr / 4.0 <= dist + 1e-12 && dist <= cr + 1e-12);
    }

    #[test]
    fn square_map_inverse(re in 0.02..0.98f64, im in 0.02..0.98f64) {
        let m = HalfPlaneMap::for_shape(&ShapeSpec::unit_square([0.0, 0.5], [1.0, 0.5])).unwrap();
        let z = C::new(re, im);
        let w = m.map(z);
        prop_assert!(w.im > 0.0);
        prop_assert!((m.inverse(w) - z).norm() < 1e-8);
    }

    #[test]
    fn band_cholesky_solves_random_regions(mask in prop::collection::vec(any::<bool>(), 49), rhs in prop::collection::vec(-1.0..1.0f64, 49)) {
        // a random subset of a 7×7 block with Dirichlet outside
        let keep: Vec<usize> = (0..49).filter(|&k| mask[k]).collect();
        prop_assume!(!keep.is_empty());
        let pos = |k: usize| keep.iter().position(|&x| x == k);
        let rows = keep.iter().map(|&k| {
            let (i, j) = (k / 7, k % 7);
            let mut r = vec![(pos(k).unwrap(), 4.0)];
            for (di, dj) in [(1i32, 0i32), (-1, 0), (0, 1), (0, -1)] {
                let (a, b) = (i as i32 + di, j as i32 + dj);
                if (0..7).contains(&a) && (0..7).contains(&b) {
                    if let Some(m) = pos((a * 7 + b) as usize) {
                        r.push((m, -1.0));
                    }
                }
            }
            r
        }).collect();
        let a = Csr::from_rows(rows);
        let b: Vec<f64> = keep.iter().map(|&k| rhs[k]).collect();
        let x = BandCholesky::factor(&a).unwrap().solve(&b);
        prop_assert!(a.residual_inf(&x, &b) < 1e-12);
    }

    #[test]
    fn wilson_interval_brackets_estimate(s in 0usize..200, extra in 0usize..200) {
        let n = s + extra + 1;
        let (lo, hi) = wilson(s, n, 1.96);
        let p = s as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn interface_invariants_and_snapshot_roundtrip(seed in 0u64..10_000, h in 0.0..2.0f64) {
        let d = build_domain(&ShapeSpec::unit_disk([0.0, -1.0], [0.0, 1.0]), 1.0 / 10.0).unwrap();
        let f = FieldSpec::constant(h);
        let cfg = sample_ising(&d, BoundaryCondition::Dobrushin, &f, 10, seed).unwrap();
        let p = extract_interface(&d, &cfg).unwrap();
        prop_assert_eq!(p.points[0], d.a_junction.corner);
        prop_assert_eq!(*p.points.last().unwrap(), d.b_junction.corner);
        let (l, r, _) = adjacency_counts(&p);
        let reg = split_components(&d, &p).unwrap();
        prop_assert_eq!(reg.left.len() + reg.right.len() + l + r, d.n_interior());
        prop_assert_eq!(LatticePath::from_points(&d, p.points.clone()).unwrap(), p);
        let head = SnapshotHeader {
            kind: SnapshotKind::Spins { bc: cfg.bc },
            domain_hash: d.hash(),
            field: f,
            seed,
            sweeps: 10,
            n_vertices: cfg.spins.len(),
            n_edges: 0,
        };
        let mut buf = Vec::new();
        write_spins(&mut buf, &head, &cfg).unwrap();
        let (h2, c2) = read_spins(&buf[..]).unwrap();
        prop_assert_eq!(h2, head);
        prop_assert_eq!(c2, cfg);
    }
}
