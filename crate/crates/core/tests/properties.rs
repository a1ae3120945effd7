use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use qgdirac::concentration::{brezis_lieb_defect, cell_masses, concentration_profile, sech_bump};
use qgdirac::eigen::{dense_generalized, eigendecompose, EigenWindow};
use qgdirac::fem::{
    assemble_anti_kirchhoff, assemble_dirac, assemble_kirchhoff, lp_norm, make_space, DiscreteSpace, SpinorField,
};
use qgdirac::graph::{box_window, build_chain, build_ladder, translate_field, unroll, Edge, LatticeShift, MetricGraph, Unrolled};
use qgdirac::nlde::{fhat_integral, geometric_distinctness, reference_model, residual};
use qgdirac::spectral::split_norms;
use qgdirac::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Ring of `lens.len()` edges plus a chord between vertices 0 and n/2.
fn ring_with_chord(lens: &[f64], chord: f64) -> MetricGraph {
    let n = lens.len();
    let labels = (0..n).map(|i| format!("v{i}")).collect();
    let mut edges: Vec<Edge> = lens.iter().enumerate().map(|(i, &l)| Edge { tail: i, head: (i + 1) % n, length: l }).collect();
    edges.push(Edge { tail: n / 2, head: 0, length: chord });
    MetricGraph::new(labels, edges).unwrap()
}

fn graph_strategy() -> impl Strategy<Value = MetricGraph> {
    (prop::collection::vec(0.3f64..1.5, 2..5), 0.3f64..1.5).prop_map(|(l, c)| ring_with_chord(&l, c))
}

fn ladder_window(cells: i64) -> (Unrolled, Arc<DiscreteSpace>) {
    let pg = build_ladder().unwrap();
    let un = unroll(&pg, &box_window(&[(0, cells - 1)])).unwrap();
    let s = make_space(&un.graph, 0.25).unwrap();
    (un, s)
}

/// Random field vanishing on cells outside `[lo, hi]`.
fn supported_field(un: &Unrolled, s: &Arc<DiscreteSpace>, lo: usize, hi: usize, seed: u64) -> SpinorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = SpinorField::random(s.clone(), &mut rng);
    let inside = |cell: usize| (lo..=hi).contains(&cell);
    let mut keep = vec![false; s.n_dofs()];
    for (e, grid) in s.edge_grids().iter().enumerate() {
        if inside(un.edge_cell[e]) {
            grid.node_dofs.iter().chain(&grid.mid_dofs).for_each(|&d| keep[d] = true);
        }
    }
    for v in 0..un.graph.n_vertices() {
        let all_inside = un.graph.incidence(v).iter().all(|&(e, _)| inside(un.edge_cell[e]));
        keep[s.vertex_dof(v)] = all_inside;
    }
    for (d, z) in u.values_mut().iter_mut().enumerate() {
        if !keep[d] {
            *z = C64::new(0.0, 0.0);
        }
    }
    u
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn dirac_hermitian_with_gap(g in graph_strategy(), m in 0.5f64..2.0, c in 0.5f64..2.0) {
        let s = make_space(&g, 0.2).unwrap();
        let (h, mass) = assemble_dirac(&s, m, c).unwrap();
        prop_assert_eq!(h.hermitian_defect(), 0.0);
        let vals = dense_generalized(&h, &mass).unwrap();
        let mc2 = m * c * c;
        let min = vals.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
        prop_assert!(min >= mc2 * (1.0 - 1e-10), "min |λ| = {} < mc² = {}", min, mc2);
    }

    #[test]
    fn laplacians_nonnegative(g in graph_strategy()) {
        let s = make_space(&g, 0.2).unwrap();
        for (a, m) in [assemble_kirchhoff(&s), assemble_anti_kirchhoff(&s)] {
            prop_assert_eq!(a.hermitian_defect(), 0.0);
            let vals = dense_generalized(&a, &m).unwrap();
            prop_assert!(vals.iter().all(|&v| v > -1e-9));
        }
    }

    #[test]
    fn spectrum_independent_of_orientation(g in graph_strategy(), flips in prop::collection::vec(any::<bool>(), 6)) {
        let flip: Vec<bool> = (0..g.n_edges()).map(|i| flips[i % flips.len()]).collect();
        let r = g.reoriented(&flip);
        let s1 = make_space(&g, 0.25).unwrap();
        let s2 = make_space(&r, 0.25).unwrap();
        let (h1, m1) = assemble_dirac(&s1, 1.0, 1.0).unwrap();
        let (h2, m2) = assemble_dirac(&s2, 1.0, 1.0).unwrap();
        let a = dense_generalized(&h1, &m1).unwrap();
        let b = dense_generalized(&h2, &m2).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn translation_composes(a in -2i64..=2, b in -2i64..=2, seed in any::<u64>()) {
        let (un, s) = ladder_window(11);
        let u = supported_field(&un, &s, 4, 6, seed);
        let ka = LatticeShift(vec![a]);
        let kb = LatticeShift(vec![b]);
        let two = translate_field(&translate_field(&u, &un, &ka).unwrap(), &un, &kb).unwrap();
        let one = translate_field(&u, &un, &(&ka + &kb)).unwrap();
        prop_assert_eq!(two.values(), one.values());
        let back = translate_field(&translate_field(&u, &un, &ka).unwrap(), &un, &(-&ka)).unwrap();
        prop_assert_eq!(back.values(), u.values());
        prop_assert!((lp_norm(&one, 2.0).unwrap() - lp_norm(&u, 2.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn translates_are_not_distinct(k in -3i64..=3, seed in any::<u64>()) {
        let (un, s) = ladder_window(11);
        let u = supported_field(&un, &s, 4, 6, seed);
        let t = translate_field(&u, &un, &LatticeShift(vec![k])).unwrap();
        prop_assert!(!geometric_distinctness(&u, &t, &un, 1e-8).unwrap());
        prop_assert!(geometric_distinctness(&u, &u.scaled_re(2.0), &un, 1e-8).unwrap());
    }

    #[test]
    fn concentration_profile_invariants(seed in any::<u64>(), k in -2i64..=2) {
        let (un, s) = ladder_window(9);
        let u = supported_field(&un, &s, 3, 5, seed);
        let radii = [0.25, 0.5, 1.0, 2.0, 4.0];
        let p = concentration_profile(&u, &un, &radii).unwrap();
        let total = lp_norm(&u, 2.0).unwrap().powi(2);
        prop_assert!(p.rho.windows(2).all(|w| w[0] <= w[1] + 1e-14));
        prop_assert!(p.rho.iter().all(|&r| r <= total * (1.0 + 1e-12)));
        let sum: f64 = cell_masses(&u, &un).iter().sum();
        prop_assert!((sum - total).abs() <= 1e-12 * total);
        let t = translate_field(&u, &un, &LatticeShift(vec![k])).unwrap();
        let q = concentration_profile(&t, &un, &radii).unwrap();
        for (a, b) in p.rho.iter().zip(&q.rho) {
            prop_assert!((a - b).abs() <= 1e-12 * total);
        }
    }

    #[test]
    fn gauge_covariance(seed in any::<u64>(), b in 1.5f64..5.0, omega in -0.8f64..0.8) {
        let (_, s) = ladder_window(3);
        let (h, mass) = assemble_dirac(&s, 1.0, 1.0).unwrap();
        let model = reference_model(b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = SpinorField::random(s.clone(), &mut rng);
        let phase = C64::from_polar(1.0, PI / 3.0);
        let r = residual(&h, &mass, &u, omega, model.as_ref()).unwrap();
        let rr = residual(&h, &mass, &u.scaled(phase), omega, model.as_ref()).unwrap();
        let scale = r.values().iter().map(|z| z.norm()).fold(1.0, f64::max);
        for (x, y) in rr.values().iter().zip(r.values()) {
            prop_assert!((x - phase * y).norm() <= 1e-12 * scale);
        }
        prop_assert!(fhat_integral(&u, model.as_ref()) >= 0.0);
    }

    #[test]
    fn spectral_split_is_orthogonal(seed in any::<u64>()) {
        let pg = build_chain(1.0).unwrap();
        let un = unroll(&pg, &box_window(&[(0, 3)])).unwrap();
        let s = make_space(&un.graph, 0.125).unwrap();
        let (h, mass) = assemble_dirac(&s, 1.0, 1.0).unwrap();
        let spec = eigendecompose(&h, &mass, EigenWindow::All).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = SpinorField::random(s.clone(), &mut rng);
        let n = split_norms(&spec, &u).unwrap();
        let l2 = lp_norm(&u, 2.0).unwrap().powi(2);
        prop_assert!((n[2] + n[3] - l2).abs() <= 1e-10 * l2);
        prop_assert!(n[0] + n[1] >= l2 * (1.0 - 1e-10));
    }

    #[test]
    fn brezis_lieb_identity_cases(seed in any::<u64>(), p in 1.2f64..6.0) {
        let (un, s) = ladder_window(5);
        let u = supported_field(&un, &s, 1, 3, seed);
        prop_assert!(brezis_lieb_defect(&u, &u, p).unwrap() <= 1e-12 * lp_norm(&u, p).unwrap().powf(p));
        let zero = SpinorField::zeros(s.clone());
        prop_assert_eq!(brezis_lieb_defect(&u, &zero, p).unwrap(), 0.0);
    }
}

#[test]
fn separated_bumps_split_exactly() {
    let pg = build_chain(1.0).unwrap();
    let un = unroll(&pg, &box_window(&[(-20, 20)])).unwrap();
    let s = make_space(&un.graph, 0.125).unwrap();
    let pos = |k: i64| un.cell_position(&LatticeShift(vec![k])).unwrap();
    let u = sech_bump(&s, &un, pos(-8), 0, 0.4, 1.0).unwrap();
    let v = sech_bump(&s, &un, pos(8), 0, 0.4, 1.0).unwrap();
    let d = brezis_lieb_defect(&u.add(&v).unwrap(), &u, 4.0).unwrap();
    assert!(d < 1e-12, "defect {d:e}");
}
