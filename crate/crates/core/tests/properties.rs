mod common;

use common::*;
use defbench::analytic1d::{
    det_term_scale, det_transmission, eigenfunction_jet, polish_eigenvalue, taylor_coefficients,
    transmission_matrix_with_roots, wave_numbers, Contour, ModelParams,
};
use defbench::cases::{self, CaseId};
use defbench::eigensolve::{eigs_near, pair_residual, DEFAULT_TOL};
use defbench::fem::{assemble_interval, assemble_tensor, assemble_triangles, Coefficient2D};
use defbench::meshing::{initial_square_triangulation, nvb_refine, uniform_interval_mesh};
use defbench::C64;
use proptest::prelude::*;
use rand::Rng;
use std::collections::BTreeSet;
use std::f64::consts::PI;

fn det2(m: [[C64; 2]; 2]) -> C64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn laplace(b: f64) -> ModelParams {
    ModelParams::new(b, C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap()
}

fn complex_in(r: f64) -> impl Strategy<Value = C64> {
    (-r..r, -r..r).prop_map(|(x, y)| C64::new(x, y))
}

fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (0.1f64..0.9, 0.2f64..3.0, -1.0f64..1.0, -3.0f64..3.0, -3.0f64..3.0)
        .prop_map(|(b, ar, ai, cr, ci)| ModelParams::new(b, C64::new(ar, ai), C64::new(cr, ci)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn branch_flip_negates_det(p in params_strategy(), lam in complex_in(60.0)) {
        let (ml, mr) = wave_numbers(&p, lam);
        let d = det2(transmission_matrix_with_roots(&p, ml, mr));
        let scale = det_term_scale(&p, lam).max(1e-300);
        let dl = det2(transmission_matrix_with_roots(&p, -ml, mr));
        let dr = det2(transmission_matrix_with_roots(&p, ml, -mr));
        prop_assert!((dl + d).norm() <= 1e-12 * scale);
        prop_assert!((dr + d).norm() <= 1e-12 * scale);
        prop_assert!((det_transmission(&p, lam) - d).norm() <= 1e-12 * scale);
    }

    #[test]
    fn cauchy_coefficients_agree_across_radii(p in params_strategy(), lam in complex_in(30.0)) {
        prop_assume!(lam.norm() > 1.0);
        let c = Contour::default_for(lam);
        let g1 = taylor_coefficients(&p, lam, 4, c.radius, c.nodes).unwrap();
        let g2 = taylor_coefficients(&p, lam, 4, c.radius / 2.0, c.nodes).unwrap();
        let big = g1.iter().enumerate().map(|(k, g)| g.norm() * c.radius.powi(k as i32)).fold(0.0, f64::max)
            .max(1e-16 * det_term_scale(&p, lam));
        for l in 0..=4 {
            prop_assert!((g1[l] - g2[l]).norm() * c.radius.powi(l as i32) <= 1e-7 * big, "l={l}");
        }
    }

    #[test]
    fn complex_symmetry_of_1d_assembly(p in params_strategy(), n in 3usize..40, deg in 1usize..=3, aligned: bool) {
        let mesh = uniform_interval_mesh(n, aligned.then_some(p.b)).unwrap();
        let pen = assemble_interval(&mesh, &p, deg).unwrap();
        prop_assert!(pen.a.is_symmetric());
        prop_assert!(pen.b.is_symmetric());
        let t = assemble_tensor(&pen, 2).unwrap();
        prop_assert!(t.a.is_symmetric() && t.b.is_symmetric());
    }

    #[test]
    fn complex_symmetry_of_triangle_assembly(p in params_strategy(), deg in 1usize..=2, seed: u64) {
        let mut r = rng(seed);
        let mut mesh = initial_square_triangulation(2).unwrap();
        for _ in 0..3 {
            let marked: BTreeSet<usize> = (0..mesh.num_triangles()).filter(|_| r.gen_bool(0.3)).collect();
            mesh = nvb_refine(&mesh, &marked).unwrap();
        }
        let pen = assemble_triangles(&mesh, &Coefficient2D::from_params(&p), deg).unwrap();
        prop_assert!(pen.a.is_symmetric());
        prop_assert!(pen.b.is_symmetric());
    }
}

#[test]
fn closed_form_determinant_on_random_points() {
    let p = laplace(0.5);
    let mut r = rng(7);
    for _ in 0..100 {
        let lam = loop {
            let z = C64::new(r.gen_range(-100.0..100.0), r.gen_range(-100.0..100.0));
            if z.norm() <= 100.0 {
                break z;
            }
        };
        let want = lam * lam.sqrt().cos();
        let got = det_transmission(&p, lam);
        assert!((got - want).norm() <= 1e-12 * det_term_scale(&p, lam).max(want.norm()), "λ={lam}: {got} vs {want}");
    }
}

#[test]
fn first_taylor_coefficient_at_simple_root() {
    let p = laplace(0.5);
    let z = C64::new(PI * PI / 4.0, 0.0);
    let c = Contour::default_for(z);
    let g = taylor_coefficients(&p, z, 3, c.radius, c.nodes).unwrap();
    assert!((g[1] - C64::new(-PI / 4.0, 0.0)).norm() <= 1e-10, "{}", g[1]);
}

#[test]
fn polishing_returns_published_values() {
    for cfg in [cases::regular_config(), cases::reduced_config()] {
        let z = polish_eigenvalue(&cfg.params, cfg.lambda).unwrap();
        assert!(rel(z, cfg.lambda) <= 1e-10, "{z} vs {}", cfg.lambda);
        let rough = polish_eigenvalue(&cfg.params, cfg.lambda * C64::new(1.0 + 2e-3, -1e-3)).unwrap();
        assert!(rel(rough, cfg.lambda) <= 1e-9, "{rough} vs {}", cfg.lambda);
    }
}

#[test]
fn jet_satisfies_the_ode_chain() {
    let cfg = cases::regular_config();
    let p = cfg.params;
    let jet = eigenfunction_jet(&p, cfg.lambda, 3).unwrap();
    let h = 1e-3;
    let second = |l: usize, x: f64| {
        let d = |t: f64| jet.eval(l, t).1;
        (-d(x + 2.0 * h) + 8.0 * d(x + h) - 8.0 * d(x - h) + d(x - 2.0 * h)) / (12.0 * h)
    };
    // Interior points of both pieces, clear of the jump and the stencil reach.
    let mut xs = Vec::new();
    for (lo, hi) in [(0.0, p.b), (p.b, 1.0)] {
        for k in 0..50 {
            let t = lo + (hi - lo) * (k as f64 + 0.5) / 50.0;
            if (t - p.b).abs() > 3.0 * h && t > 3.0 * h && t < 1.0 - 3.0 * h {
                xs.push(t);
            }
        }
    }
    for l in 1..=3 {
        let scale = xs.iter().map(|&x| jet.eval(l, x).0.norm()).fold(0.0, f64::max) * cfg.lambda.norm();
        let tol = if l == 1 { 1e-8 } else { 1e-6 };
        for &x in &xs {
            let a = p.coefficient(x);
            // -(a w_l')' - λ w_l = (l-1) w_{l-1}
            let mut res = -a * second(l, x) - cfg.lambda * jet.eval(l, x).0;
            if l > 1 {
                res -= (l - 1) as f64 * jet.eval(l - 1, x).0;
            }
            assert!(res.norm() <= tol * scale, "x={x} l={l}: {:.3e}", res.norm() / scale);
        }
    }
    let (u0, _) = jet.eval(1, 0.0);
    assert!(u0.norm() <= 1e-12 * jet.eval(1, 0.5).0.norm());
}

#[test]
fn mass_matrices_are_positive() {
    let mut r = rng(11);
    for case in [CaseId::Regular1d, CaseId::Reduced1d] {
        let p = case.base_config().params;
        for deg in 1..=3 {
            let mesh = uniform_interval_mesh(24, case.is_regular().then_some(p.b)).unwrap();
            let pen = assemble_interval(&mesh, &p, deg).unwrap();
            for _ in 0..100 {
                let x: Vec<C64> = (0..pen.n()).map(|_| C64::new(r.gen_range(-1.0..1.0), 0.0)).collect();
                let q: C64 = pen.b.matvec(&x).iter().zip(&x).map(|(bx, xi)| bx * xi).sum();
                assert!(q.re > 0.0 && q.im.abs() <= 1e-14 * q.re);
            }
        }
    }
    let mesh = nvb_refine(&initial_square_triangulation(4).unwrap(), &(0..32).collect()).unwrap();
    let pen = assemble_triangles(&mesh, &Coefficient2D::from_params(&cases::regular_config().params), 2).unwrap();
    for _ in 0..100 {
        let x: Vec<C64> = (0..pen.n()).map(|_| C64::new(r.gen_range(-1.0..1.0), 0.0)).collect();
        let q: C64 = pen.b.matvec(&x).iter().zip(&x).map(|(bx, xi)| bx * xi).sum();
        assert!(q.re > 0.0);
    }
}

#[test]
fn selfadjoint_parameters_give_real_spectrum() {
    let mut r = rng(3);
    for _ in 0..8 {
        let p = ModelParams::new(r.gen_range(0.2..0.8), C64::new(r.gen_range(0.3..3.0), 0.0), C64::new(r.gen_range(0.0..4.0), 0.0))
            .unwrap();
        let mesh = uniform_interval_mesh(64, Some(p.b)).unwrap();
        let pen = assemble_interval(&mesh, &p, 2).unwrap();
        let s = eigs_near(&pen, C64::new(20.0, 1.0), 6, DEFAULT_TOL).unwrap();
        for l in &s.values {
            assert!(l.im.abs() <= 1e-9 * l.norm(), "{l}");
        }
    }
}

#[test]
fn tensor_pencil_is_a_kronecker_sum() {
    let p = cases::regular_config().params;
    let mesh = uniform_interval_mesh(4, Some(p.b)).unwrap();
    let one = assemble_interval(&mesh, &p, 1).unwrap();
    let two = assemble_tensor(&one, 2).unwrap();
    assert_eq!(two.n(), 16);
    let a = one.a.kron(&one.b).add_scaled(C64::new(1.0, 0.0), &one.b.kron(&one.a));
    let b = one.b.kron(&one.b);
    let (da, db, ta, tb) = (a.to_dense(), b.to_dense(), two.a.to_dense(), two.b.to_dense());
    for i in 0..16 {
        for j in 0..16 {
            assert!((da[(i, j)] - ta[(i, j)]).norm() <= 1e-14 * a.norm1());
            assert!((db[(i, j)] - tb[(i, j)]).norm() <= 1e-14 * b.norm1());
        }
    }
    let s1 = eigs_near(&one, C64::new(0.0, 0.0), 4, DEFAULT_TOL).unwrap();
    let s2 = eigs_near(&two, C64::new(0.0, 0.0), 16, DEFAULT_TOL).unwrap();
    let sums: Vec<C64> = s1.values.iter().flat_map(|x| s1.values.iter().map(move |y| x + y)).collect();
    assert!(match_sets(&s2.values, &sums) <= 1e-10);
}

#[test]
fn adjoint_pairs_are_conjugates() {
    let p = cases::regular_config().params;
    let mesh = uniform_interval_mesh(64, Some(p.b)).unwrap();
    let pen = assemble_interval(&mesh, &p, 2).unwrap();
    let s = eigs_near(&pen, C64::new(30.0, 10.0), 4, DEFAULT_TOL).unwrap();
    let scale = pen.a.norm1() + 60.0 * pen.b.norm1();
    for (l, v) in s.values.iter().zip(&s.vectors) {
        let w: Vec<C64> = v.iter().map(|z| z.conj()).collect();
        let aw = pen.a.matvec_adjoint(&w);
        let bw = pen.b.matvec_adjoint(&w);
        let r: f64 = aw.iter().zip(&bw).map(|(x, y)| (x - l.conj() * y).norm_sqr()).sum::<f64>().sqrt();
        let nv: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(r <= 1e-9 * scale * nv);
    }
}

#[test]
fn eigensolver_matches_dense_oracle() {
    let mut r = rng(2024);
    for n in [3usize, 5, 8, 12] {
        for _ in 0..3 {
            let (a, b) = random_pencil(&mut r, n);
            let want = dense_eigenvalues(&a, &b);
            let pen = dense_pencil(&a, &b);
            let got = eigs_near(&pen, C64::new(0.013, 0.021), n, 1e-11).unwrap();
            assert!(match_sets(&got.values, &want) <= 1e-8, "n={n}: {:?} vs {want:?}", got.values);
        }
    }
}

#[test]
fn eigensolver_is_shift_independent_and_deterministic() {
    let cfg = cases::reduced_config();
    let mesh = uniform_interval_mesh(200, None).unwrap();
    let pen = assemble_interval(&mesh, &cfg.params, 2).unwrap();
    let s1 = eigs_near(&pen, C64::new(25.0, 2.0), 5, DEFAULT_TOL).unwrap();
    let lam = s1.values[0];
    let s2 = eigs_near(&pen, lam + 0.05 * lam.norm() * C64::new(0.6, -0.8), 5, DEFAULT_TOL).unwrap();
    assert!(s2.values.iter().any(|z| rel(*z, lam) <= 1e-8));
    let again = eigs_near(&pen, C64::new(25.0, 2.0), 5, DEFAULT_TOL).unwrap();
    assert_eq!(s1, again);
    let norms = (pen.a.norm1(), pen.b.norm1());
    for (l, v) in s1.values.iter().zip(&s1.vectors) {
        assert!(pair_residual(&pen, norms, *l, v) <= DEFAULT_TOL);
    }
}
