use std::f64::consts::PI;

use qgdirac::eigen::{dense_generalized, eigendecompose, EigenWindow};
use qgdirac::fem::{assemble_dirac, lp_norm, make_space, SpinorField};
use qgdirac::graph::{box_window, build_chain, build_ladder, build_square_lattice, circle, path, unroll, PeriodicGraph};
use qgdirac::spectral::{
    bloch_fiber, compute_bands, graph_norm, spectral_split, split_norms, square_identity_defect, theta_grid,
    verify_gap, verify_square_identity,
};
use qgdirac::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// ±√((θ + 2πn)²/ℓ² + 1), n ∈ ℤ, for a chain of unit mass and speed.
fn chain_dispersion(theta: f64, len: f64, cap: f64) -> Vec<f64> {
    let mut v = Vec::new();
    for n in -20i32..=20 {
        let k = (theta + 2.0 * PI * n as f64) / len;
        let l = (k * k + 1.0).sqrt();
        if l <= cap {
            v.push(l);
            v.push(-l);
        }
    }
    v.sort_by(f64::total_cmp);
    v
}

fn fiber_values(pg: &PeriodicGraph, theta: &[f64], h: f64, m: f64, c: f64, cap: f64) -> Vec<f64> {
    let f = bloch_fiber(pg, theta, h, m, c).unwrap();
    let mut v: Vec<f64> = dense_generalized(&f.op, &f.mass).unwrap().into_iter().filter(|l| l.abs() <= cap).collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn chain_fibers_follow_plane_waves() {
    let pg = build_chain(2.0 * PI).unwrap();
    let got = fiber_values(&pg, &[0.0], 2.0 * PI / 256.0, 1.0, 1.0, 3.0);
    let want = chain_dispersion(0.0, 2.0 * PI, 3.0);
    assert_eq!(got.len(), want.len());
    for (a, b) in got.iter().zip(&want) {
        assert!(((a - b) / b).abs() < 1e-3);
    }

    let pg = build_chain(1.0).unwrap();
    for theta in [0.3, 1.0, 2.5, 5.9] {
        let got = fiber_values(&pg, &[theta], 1.0 / 128.0, 1.0, 1.0, 15.0);
        let want = chain_dispersion(theta, 1.0, 15.0);
        assert_eq!(got.len(), want.len(), "θ = {theta}");
        for (a, b) in got.iter().zip(&want) {
            assert!(((a - b) / b).abs() < 2e-3, "θ = {theta}: {a} vs {b}");
        }
    }
}

#[test]
fn gap_scales_with_mass_and_speed() {
    let chain = build_chain(1.0).unwrap();
    let grid = theta_grid(1, 16);
    let b = compute_bands(&chain, &grid, 4, 1.0 / 32.0, 2.0, 1.0).unwrap();
    let rep = verify_gap(&b, 2.0, 1.0, 1e-2);
    assert!(rep.pass);
    assert!((rep.min_abs - 2.0).abs() < 1e-6);

    let ladder = build_ladder().unwrap();
    let b = compute_bands(&ladder, &grid, 4, 1.0 / 32.0, 1.0, 2.0).unwrap();
    let rep = verify_gap(&b, 1.0, 2.0, 1e-2);
    assert!(rep.pass);
    assert!((rep.gap_hi - 4.0).abs() < 1e-6 && (rep.gap_lo + 4.0).abs() < 1e-6);

    let b = compute_bands(&chain, &grid, 4, 1.0 / 32.0, 0.0, 1.0).unwrap();
    let rep = verify_gap(&b, 0.0, 1.0, 0.5);
    assert!(rep.min_abs < 1e-8);
    assert!(!verify_gap(&b, 1.0, 1.0, 0.5).pass);
}

#[test]
fn bands_are_chiral() {
    // Flat bands sit exactly at ±mc² on graphs with several edges; they are
    // excluded from the pairing check.
    for pg in [build_chain(1.0).unwrap(), build_ladder().unwrap(), build_square_lattice().unwrap()] {
        for theta in theta_grid(pg.rank(), 3) {
            let v = fiber_values(&pg, &theta, 1.0 / 16.0, 1.0, 1.0, 6.0);
            let pos: Vec<f64> = v.iter().cloned().filter(|&l| l > 1.0 + 1e-9).collect();
            let mut neg: Vec<f64> = v.iter().cloned().filter(|&l| l < -1.0 - 1e-9).map(|l| -l).collect();
            neg.sort_by(f64::total_cmp);
            let n = pos.len().min(neg.len());
            assert!(pos.len().abs_diff(neg.len()) <= 1, "θ = {theta:?}");
            for (a, b) in pos.iter().zip(&neg).take(n.saturating_sub(1)) {
                assert!((a - b).abs() < 1e-8, "θ = {theta:?}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn reorientation_leaves_fibers_unchanged() {
    let pg = build_ladder().unwrap();
    let flipped_cell = pg.cell().reoriented(&[false, false, true]);
    let flipped = PeriodicGraph::new(flipped_cell, 1, pg.gluings().to_vec()).unwrap();
    for theta in [0.0, 1.3, 4.0] {
        let a = fiber_values(&pg, &[theta], 1.0 / 16.0, 1.0, 1.0, 1e9);
        let b = fiber_values(&flipped, &[theta], 1.0 / 16.0, 1.0, 1.0, 1e9);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9 * x.abs());
        }
    }
}

#[test]
fn square_identity_examples() {
    let c = make_space(&circle(2.0 * PI).unwrap(), 2.0 * PI / 128.0).unwrap();
    assert!(verify_square_identity(&c, 1.0, 1.0).unwrap() < 1e-2);
    let e = make_space(&path(1, 1.0).unwrap(), 1.0 / 64.0).unwrap();
    assert!(verify_square_identity(&e, 1.0, 1.0).unwrap() < 5e-3);
    let pg = build_ladder().unwrap();
    let d: Vec<f64> = [16.0, 32.0, 64.0]
        .iter()
        .map(|n| square_identity_defect(&make_space(pg.cell(), 1.0 / n).unwrap(), 1.0, 1.0, 3.0).unwrap())
        .collect();
    let order = (d[0] / d[2]).ln() / 4f64.ln();
    assert!(order > 1.8, "defects {d:?}");
}

#[test]
fn spectral_calculus() {
    let pg = build_chain(1.0).unwrap();
    let un = unroll(&pg, &box_window(&[(0, 4)])).unwrap();
    let s = make_space(&un.graph, 0.1).unwrap();
    let (h, m) = assemble_dirac(&s, 1.0, 1.0).unwrap();
    let spec = eigendecompose(&h, &m, EigenWindow::All).unwrap();
    assert!(spec.residuals().iter().all(|&r| r <= 1e-10));

    let k = spec.values().iter().position(|&l| l > 0.0).unwrap() + 3;
    let lam = spec.values()[k];
    let v = SpinorField::new(s.clone(), spec.vector(k).to_vec()).unwrap();
    let (plus, minus) = spectral_split(&spec, &v).unwrap();
    assert!(lp_norm(&minus, 2.0).unwrap() < 1e-10);
    assert!(lp_norm(&plus.sub(&v).unwrap(), 2.0).unwrap() < 1e-10);
    assert!((graph_norm(&spec, &v).unwrap().powi(2) - lam).abs() < 1e-9 * lam);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u = SpinorField::random(s.clone(), &mut rng);
    let (p, q) = spectral_split(&spec, &u).unwrap();
    assert!(lp_norm(&p.add(&q).unwrap().sub(&u).unwrap(), 2.0).unwrap() < 1e-10 * lp_norm(&u, 2.0).unwrap());
    let (pp, pq) = spectral_split(&spec, &p).unwrap();
    assert!(lp_norm(&pp.sub(&p).unwrap(), 2.0).unwrap() < 1e-10 * lp_norm(&p, 2.0).unwrap());
    assert!(lp_norm(&pq, 2.0).unwrap() < 1e-10 * lp_norm(&p, 2.0).unwrap());
    let g = |f: &SpinorField| graph_norm(&spec, f).unwrap().powi(2);
    assert!((g(&u) - g(&p) - g(&q)).abs() < 1e-9 * g(&u));
    let n = split_norms(&spec, &u).unwrap();
    let cross: C64 = p.values().iter().zip(m.apply(q.values())).map(|(a, b)| a.conj() * b).sum();
    assert!(cross.norm() < 1e-10 * (n[2] + n[3]));
}

#[test]
fn bands_csv_layout() {
    let pg = build_chain(1.0).unwrap();
    let b = compute_bands(&pg, &theta_grid(1, 4), 2, 0.1, 1.0, 1.0).unwrap();
    let mut out = Vec::new();
    b.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta0,band,lambda"));
    assert_eq!(lines.count(), 8);
}
