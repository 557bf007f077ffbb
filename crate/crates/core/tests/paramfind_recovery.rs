use defbench::analytic1d::ascent_of;
use defbench::cases;
use defbench::paramfind::solve_defect_system;
use defbench::C64;

fn perturb(z: C64) -> C64 {
    z + C64::new(1e-3, -1e-3) * z.norm()
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn perturbed_published_sets_are_recovered() {
    for cfg in [cases::regular_config(), cases::reduced_config()] {
        let p = cfg.params;
        let init = (perturb(p.a_r), perturb(p.c), perturb(cfg.lambda));
        let rep = solve_defect_system(p.b, 3, init).unwrap();
        let s = &rep.solution;
        println!("b={} iters={} res={:.3e} hist={:?}", p.b, rep.iterations, rep.residual_norm, rep.history);
        assert!(rel(s.params.a_r, p.a_r) < 1e-8, "{} vs {}", s.params.a_r, p.a_r);
        assert!(rel(s.params.c, p.c) < 1e-8, "{} vs {}", s.params.c, p.c);
        assert!(rel(s.lambda, cfg.lambda) < 1e-8, "{} vs {}", s.lambda, cfg.lambda);
        assert_eq!(rep.certified_ascent, 3);
        assert_eq!(ascent_of(&s.params, s.lambda).unwrap(), 3);

        // Superlinear tail over the last three iterates.
        let h = &rep.history;
        if h.len() >= 3 {
            for w in h[h.len() - 3..].windows(2) {
                assert!(w[1] <= 1e6 * w[0].powf(1.5) || w[1] <= 1e-10, "{w:?}");
            }
        }
    }
}

#[test]
fn solves_are_reproducible() {
    let cfg = cases::regular_config();
    let p = cfg.params;
    let init = (perturb(p.a_r), perturb(p.c), perturb(cfg.lambda));
    let a = solve_defect_system(p.b, 3, init).unwrap();
    let b = solve_defect_system(p.b, 3, init).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
