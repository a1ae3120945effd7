use std::f64::consts::PI;

use qgdirac::eigen::{dense_generalized, eigendecompose, EigenWindow};
use qgdirac::fem::{
    assemble_anti_kirchhoff, assemble_dirac, assemble_kirchhoff, embedding_ratio, inner, linfty_embedding_check,
    lp_norm, make_space, SpinorField,
};
use qgdirac::graph::{box_window, build_chain, build_ladder, circle, path, unroll};
use qgdirac::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

#[test]
fn grid_counts() {
    let s = make_space(&path(1, 1.0).unwrap(), 0.25).unwrap();
    let g = s.edge_grid(0);
    assert_eq!(g.n_cells(), 4);
    assert_eq!(g.node_dofs.len(), 5);
    assert_eq!(g.mid_dofs.len(), 4);

    let pg = build_chain(1.0).unwrap();
    let un = unroll(&pg, &box_window(&[(0, 1)])).unwrap();
    let s = make_space(&un.graph, 0.5).unwrap();
    let shared = un.vertex_of(1, 0);
    assert_eq!(s.edge_grid(0).node_dofs.last(), Some(&s.vertex_dof(shared)));
    assert_eq!(s.edge_grid(1).node_dofs.first(), Some(&s.vertex_dof(shared)));
    assert_eq!(s.constraint_rows().len(), un.graph.n_vertices());

    let ladder = make_space(build_ladder().unwrap().cell(), 0.1).unwrap();
    assert!(ladder.edge_grids().iter().all(|g| g.n_cells() == 10));
    assert!(make_space(&path(1, 1.0).unwrap(), 0.0).is_err());
}

fn circle_values(n: usize) -> Vec<f64> {
    let s = make_space(&circle(2.0 * PI).unwrap(), 2.0 * PI / n as f64).unwrap();
    let (h, m) = assemble_dirac(&s, 1.0, 1.0).unwrap();
    eigendecompose(&h, &m, EigenWindow::Interval { lo: -3.0, hi: 3.0 }).unwrap().values().to_vec()
}

#[test]
fn circle_second_order() {
    let exact = 5f64.sqrt();
    let errs: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let v = circle_values(n);
            assert_eq!(v.len(), 10);
            (v[9] - exact).abs()
        })
        .collect();
    let order = ((errs[0] / errs[2]).ln() / 4f64.ln()).abs();
    assert!(order >= 1.9, "observed order {order}, errors {errs:?}");
    let smallest = circle_values(128).iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
    assert!((smallest - 1.0).abs() < 1e-12);
}

#[test]
fn degree_two_vertices_are_transparent() {
    let whole = make_space(&path(1, 1.0).unwrap(), 0.05).unwrap();
    let split = make_space(&path(2, 0.5).unwrap(), 0.05).unwrap();
    let (h1, m1) = assemble_dirac(&whole, 1.0, 1.0).unwrap();
    let (h2, m2) = assemble_dirac(&split, 1.0, 1.0).unwrap();
    let a = dense_generalized(&h1, &m1).unwrap();
    let b = dense_generalized(&h2, &m2).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn dirac_is_self_adjoint() {
    let s = make_space(build_ladder().unwrap().cell(), 0.1).unwrap();
    let (h, m) = assemble_dirac(&s, 1.3, 0.7).unwrap();
    assert_eq!(h.hermitian_defect(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = SpinorField::random(s.clone(), &mut rng);
    let v = SpinorField::random(s.clone(), &mut rng);
    let hu = h.mul_vec(u.values());
    let hv = h.mul_vec(v.values());
    let a: C64 = hu.iter().zip(v.values()).map(|(x, y)| x.conj() * y).sum();
    let b: C64 = u.values().iter().zip(&hv).map(|(x, y)| x.conj() * y).sum();
    assert!((a - b).norm() < 1e-10 * a.norm().max(1.0));
    assert!(m.diagonal().unwrap().iter().all(|&w| w > 0.0));
    assert!(assemble_dirac(&s, 0.0, 1.0).is_err());
    assert!(assemble_dirac(&s, 1.0, -1.0).is_err());
}

#[test]
fn kirchhoff_examples() {
    let s = make_space(build_ladder().unwrap().cell(), 0.1).unwrap();
    let (k, mk) = assemble_kirchhoff(&s);
    let ones = vec![one(); k.nrows()];
    assert!(k.mul_vec(&ones).iter().all(|z| z.norm() < 1e-12));
    let vals = dense_generalized(&k, &mk).unwrap();
    assert!(vals[0].abs() < 1e-10);
    assert!(vals[1] > 1e-3);

    // Kirchhoff on the loop of length 2π: eigenvalues n².
    let c = make_space(&circle(2.0 * PI).unwrap(), 2.0 * PI / 128.0).unwrap();
    let (k, mk) = assemble_kirchhoff(&c);
    let vals = dense_generalized(&k, &mk).unwrap();
    let want = [0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0];
    for (v, w) in vals.iter().zip(want) {
        assert!((v - w).abs() < 1e-2 * w.max(1.0), "{v} vs {w}");
    }
}

#[test]
fn laplacian_forms_nonnegative() {
    let pg = build_ladder().unwrap();
    let un = unroll(&pg, &box_window(&[(0, 2)])).unwrap();
    let s = make_space(&un.graph, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (a, _) in [assemble_kirchhoff(&s), assemble_anti_kirchhoff(&s)] {
        for _ in 0..50 {
            let f: Vec<C64> = (0..a.nrows()).map(|_| C64::new(rand::Rng::gen::<f64>(&mut rng) - 0.5, 0.0)).collect();
            let q: C64 = f.iter().zip(a.mul_vec(&f)).map(|(x, y)| x.conj() * y).sum();
            assert!(q.re >= -1e-12);
        }
    }
}

#[test]
fn norms() {
    let pg = build_ladder().unwrap();
    let s = make_space(pg.cell(), 0.1).unwrap();
    let total = s.graph().total_length();
    let n1 = s.n1();
    let e1 = SpinorField::from_fn(s.clone(), |c, _| if c == 0 { one() } else { C64::new(0.0, 0.0) });
    assert!((lp_norm(&e1, 2.0).unwrap().powi(2) - total).abs() < 1e-12);
    assert!((embedding_ratio(&e1) - 1.0 / total.sqrt()).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = SpinorField::random(s.clone(), &mut rng);
    let mut a = u.clone();
    a.values_mut()[n1..].iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    let b = u.sub(&a).unwrap();
    let sq = |f: &SpinorField| lp_norm(f, 2.0).unwrap().powi(2);
    assert!((sq(&u) - sq(&a) - sq(&b)).abs() < 1e-12 * sq(&u));
    assert!(sq(&u) <= lp_norm(&u, 1.0).unwrap() * lp_norm(&u, f64::INFINITY).unwrap() * (1.0 + 1e-12));
    assert!((inner(&u, &u).unwrap().re - sq(&u)).abs() < 1e-12 * sq(&u));
    assert!(lp_norm(&u, 0.5).is_err());
}

#[test]
fn embedding_constant() {
    // H¹(0,1) → L^∞: sup_x G(x,x) = coth(1) for −u'' + u with free ends.
    let analytic = (1.0f64 / 1.0f64.tanh()).sqrt();
    let s = make_space(&path(1, 1.0).unwrap(), 1.0 / 64.0).unwrap();
    let r = linfty_embedding_check(&s, 16, 0).unwrap();
    assert!(r <= analytic * (1.0 + 1e-3), "{r} vs {analytic}");
    assert!(r >= analytic * 0.99);

    let cell = build_ladder().unwrap();
    let rs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&h| linfty_embedding_check(&make_space(cell.cell(), h).unwrap(), 16, 0).unwrap())
        .collect();
    let (lo, hi) = rs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 1.05, "{rs:?}");
}
