mod common;

use common::*;
use defbench::analytic1d::{
    det_term_scale, det_transmission, taylor_coefficients, transmission_matrix_with_roots, wave_numbers, Contour,
    ModelParams,
};
use defbench::bench::*;
use defbench::cases::{self, CaseId};
use defbench::eigensolve::{eigs_near, DEFAULT_TOL};
use defbench::fem::{assemble_interval, assemble_tensor, assemble_triangles, Coefficient2D};
use defbench::meshing::{initial_square_triangulation, nvb_refine_uniform, uniform_interval_mesh};
use defbench::paramfind::verify_configuration;
use defbench::C64;
use rand::Rng;
use std::f64::consts::PI;
use std::thread;
use std::time::Instant;

const SLOPE_TOL: f64 = 0.12;

/// Criteria expected to fail in double precision; see the README.
const KNOWN_LIMITS: &[&str] = &["3c"];

struct Line {
    id: &'static str,
    pass: bool,
    text: String,
}

fn line(id: &'static str, pass: bool, text: String) -> Line {
    Line { id, pass, text }
}

fn near(x: Option<f64>, want: f64, tol: f64) -> bool {
    x.is_some_and(|x| (x - want).abs() <= tol)
}

fn fmt(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |x| format!("{x:.3}"))
}

fn window(t: &ConvergenceTable) -> String {
    let ok: Vec<&ConvergenceRow> = t.rows.iter().filter(|r| r.ok()).collect();
    let k = K_LAST.min(ok.len());
    match (ok.get(ok.len() - k), ok.last()) {
        (Some(a), Some(b)) => format!("last {k} of {} levels, N {}..{}", t.rows.len(), a.n_dofs, b.n_dofs),
        _ => "no successful levels".into(),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed().as_secs_f64())
}

fn criterion1() -> Vec<Line> {
    [("1a", cases::regular_config()), ("1b", cases::reduced_config())]
        .into_iter()
        .map(|(id, cfg)| {
            let rep = verify_configuration(&cfg);
            let r = &rep.solution.residuals;
            let pass = rep.failure.is_none() && rep.certified_ascent == 3 && r.len() >= 3 && r[..3].iter().all(|g| *g <= 1e-6);
            line(id, pass, format!("b={:.4}: ascent {}, scaled |gamma_0..2| = {:.2e} {:.2e} {:.2e} (<= 1e-6)", cfg.params.b, rep.certified_ascent, r[0], r[1], r[2]))
        })
        .collect()
}

fn criterion2() -> Vec<Line> {
    let p = ModelParams::new(0.5, C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let lam = C64::new(r.gen_range(-100.0..100.0), r.gen_range(-100.0..100.0));
        let want = lam * lam.sqrt().cos();
        worst = worst.max((det_transmission(&p, lam) - want).norm() / det_term_scale(&p, lam).max(want.norm()));
    }
    let z = C64::new(PI * PI / 4.0, 0.0);
    let c = Contour::default_for(z);
    let g1 = taylor_coefficients(&p, z, 3, c.radius, c.nodes).map(|g| g[1]);
    let e1 = g1.map(|g| (g - C64::new(-PI / 4.0, 0.0)).norm()).unwrap_or(f64::INFINITY);
    vec![
        line("2a", worst <= 1e-12, format!("det M = lambda cos sqrt(lambda) on 100 random points: worst scaled deviation {worst:.2e} (<= 1e-12)")),
        line("2b", e1 <= 1e-10, format!("gamma_1 at (pi/2)^2 deviates from -pi/4 by {e1:.2e} (<= 1e-10)")),
    ]
}

fn rate_line(id: &'static str, label: &str, t: &ConvergenceTable, idx_want: f64, mean_want: f64, secs: f64) -> Line {
    let idx = t.index_rates();
    let mean = t.rate("mean");
    let pass = !idx.is_empty() && idx.iter().all(|s| (s - idx_want).abs() <= SLOPE_TOL) && near(mean, mean_want, SLOPE_TOL);
    let shown: Vec<String> = idx.iter().map(|s| format!("{s:.3}")).collect();
    line(
        id,
        pass,
        format!(
            "{label}: per-eigenvalue slopes [{}] (want {idx_want:.3} +- {SLOPE_TOL}), mean slope {} (want {mean_want:.3} +- {SLOPE_TOL}); {}; {secs:.1}s",
            shown.join(", "),
            fmt(mean),
            window(t)
        ),
    )
}

fn criterion3() -> Vec<Line> {
    let case = BenchmarkCase::new(CaseId::Regular1d);
    let (t1, s1) = timed(|| run_convergence(&case, 1, 13).unwrap());
    let (t2, s2) = timed(|| run_convergence(&case, 2, 7).unwrap());
    let (t3, s3) = timed(|| run_convergence(&case, 2, 12).unwrap());
    vec![
        rate_line("3a", "regular1d p=1 to N=2^14", &t1, -2.0 / 3.0, -2.0, s1),
        rate_line("3b", "regular1d p=2 to N=2^9 (before the rounding floor)", &t2, -4.0 / 3.0, -4.0, s2),
        rate_line("3c", "regular1d p=2 to N=2^14", &t3, -4.0 / 3.0, -4.0, s3),
    ]
}

fn criterion4() -> Vec<Line> {
    let case = BenchmarkCase::new(CaseId::Reduced1d);
    [("4a", 1usize), ("4b", 2)]
        .into_iter()
        .map(|(id, p)| {
            let (t, s) = timed(|| run_convergence(&case, p, 7).unwrap());
            rate_line(id, &format!("reduced1d p={p}"), &t, -1.0 / 3.0, -1.0, s)
        })
        .collect()
}

fn criterion5() -> Vec<Line> {
    let case = BenchmarkCase::new(CaseId::Regular1d);
    let (runs, secs) = timed(|| sensitivity_study(&case, &[1e-2, 1e-6], 1, 13).unwrap());
    let wide = &runs[0];
    let stagnation = wide.table.rate("mean");
    let narrow = &runs[1];
    let mean = narrow.table.mean_column();
    let half = mean.len().div_ceil(2);
    let coarse = fit_rate(&mean[..half], half, 0.0).ok();
    let fine = narrow.table.index_rates();
    let shown: Vec<String> = fine.iter().map(|s| format!("{s:.3}")).collect();
    vec![
        line(
            "5a",
            wide.separation > 2.0 && stagnation.is_some_and(|s| s.abs() <= 0.25),
            format!(
                "delta=1e-2: cluster separation {:.3} (> 2), mean error vs defective lambda slope {} (stagnation, |slope| <= 0.25); {secs:.1}s",
                wide.separation,
                fmt(stagnation)
            ),
        ),
        line(
            "5b",
            coarse.is_some_and(|s| s <= -0.5) && fine.len() == 3 && fine.iter().all(|s| *s <= -1.7),
            format!(
                "delta=1e-6: mean slope over coarse {half} levels {} (<= -0.5), per-eigenvalue slopes on finest levels [{}] (<= -1.7); {}",
                fmt(coarse),
                shown.join(", "),
                window(&narrow.table)
            ),
        ),
    ]
}

fn criterion6() -> Vec<Line> {
    let case = BenchmarkCase::new(CaseId::Regular2dTri);
    let (t1, s1) = timed(|| run_convergence(&case, 1, 7).unwrap());
    let (t2, s2) = timed(|| run_convergence(&case, 2, 6).unwrap());
    let summary = |t: &ConvergenceTable| {
        let idx = t.index_rates();
        let worst = idx.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best = idx.iter().copied().fold(f64::INFINITY, f64::min);
        (idx, worst, best)
    };
    let (idx1, worst1, best1) = summary(&t1);
    let outliers = idx1.iter().filter(|s| **s <= -0.8).count();
    let mean1 = t1.rate("mean");
    let (_, worst2, _) = summary(&t2);
    let mean2 = t2.rate("mean");
    vec![
        line(
            "6a",
            idx1.len() == 9 && (-0.30..=-0.14).contains(&worst1) && near(mean1, -1.0, 0.15) && best1 <= -0.35 && outliers <= 1,
            format!(
                "regular2d_tri p=1: worst slope {worst1:.3} (in [-0.30, -0.14]), steepest {best1:.3} (<= -0.35), optimal-rate outliers {outliers} (<= 1), mean {} (-1 +- 0.15); {}; {s1:.1}s",
                fmt(mean1),
                window(&t1)
            ),
        ),
        line(
            "6b",
            (worst2 + 0.4).abs() <= SLOPE_TOL && near(mean2, -2.0, 0.25),
            format!(
                "regular2d_tri p=2: worst slope {worst2:.3} (-0.4 +- {SLOPE_TOL}), mean {} (-2 +- 0.25); {}; {s2:.1}s",
                fmt(mean2),
                window(&t2)
            ),
        ),
    ]
}

fn criterion7() -> Vec<Line> {
    let two = BenchmarkCase::new(CaseId::Regular2dTensor);
    let three = BenchmarkCase::new(CaseId::Regular3dTensor);
    let (d2, s2) = timed(|| (0..=4).map(|l| tensor_cross_check(&two, 1, l).unwrap_or(f64::INFINITY)).fold(0.0, f64::max));
    let (d3, s3) = timed(|| (0..=2).map(|l| tensor_cross_check(&three, 1, l).unwrap_or(f64::INFINITY)).fold(0.0, f64::max));
    let (t, st) = timed(|| run_convergence(&two, 1, 7).unwrap());
    let worst = t.index_rates().into_iter().fold(f64::NEG_INFINITY, f64::max);
    vec![
        line("7a", d2 <= 1e-10, format!("2D tensor spectra vs pairwise 1D sums, levels 0..4: {d2:.2e} (<= 1e-10); {s2:.1}s")),
        line("7b", d3 <= 1e-10, format!("3D tensor spectra vs triple 1D sums, levels 0..2: {d3:.2e} (<= 1e-10); {s3:.1}s")),
        line(
            "7c",
            t.index_rates().len() == 9 && worst < -0.25,
            format!("regular2d_tensor p=1: shallowest per-eigenvalue slope {worst:.3} (< -0.25); {}; {st:.1}s", window(&t)),
        ),
    ]
}

fn criterion8() -> Vec<Line> {
    let case = BenchmarkCase::new(CaseId::Reduced2dTri);
    let (t, s) = timed(|| adaptive_loop(&case, 1, 0.5, 200_000).unwrap());
    let mean = t.rate("mean");
    vec![line(
        "8",
        near(mean, -1.0, 0.2),
        format!("adaptive reduced2d_tri theta=0.5: mean slope {} (-1 +- 0.2), {} iterations; {}; {s:.1}s", fmt(mean), t.rows.len(), window(&t)),
    )]
}

fn criterion9() -> Vec<Line> {
    let mut failures = Vec::new();
    let mut r = rng(9);
    let reg = cases::regular_config().params;
    let red = cases::reduced_config().params;

    let mut symmetric = true;
    for (p, aligned) in [(reg, true), (red, false)] {
        for deg in 1..=3 {
            let mesh = uniform_interval_mesh(17, aligned.then_some(p.b)).unwrap();
            let pen = assemble_interval(&mesh, &p, deg).unwrap();
            let t2 = assemble_tensor(&pen, 2).unwrap();
            symmetric &= pen.a.is_symmetric() && pen.b.is_symmetric() && t2.a.is_symmetric() && t2.b.is_symmetric();
            if deg <= 2 {
                let mut tri = initial_square_triangulation(4).unwrap();
                tri = nvb_refine_uniform(&nvb_refine_uniform(&tri));
                let t = assemble_triangles(&tri, &Coefficient2D::from_params(&p), deg).unwrap();
                symmetric &= t.a.is_symmetric() && t.b.is_symmetric();
            }
        }
    }
    if !symmetric {
        failures.push("complex symmetry");
    }

    let mesh = uniform_interval_mesh(32, Some(reg.b)).unwrap();
    let pen = assemble_interval(&mesh, &reg, 2).unwrap();
    let positive = (0..100).all(|_| {
        let x: Vec<C64> = (0..pen.n()).map(|_| C64::new(r.gen_range(-1.0..1.0), 0.0)).collect();
        pen.b.matvec(&x).iter().zip(&x).map(|(a, b)| a * b).sum::<C64>().re > 0.0
    });
    if !positive {
        failures.push("mass positivity");
    }

    let s = eigs_near(&pen, C64::new(30.0, 10.0), 4, DEFAULT_TOL).unwrap();
    let conj_ok = s.values.iter().zip(&s.vectors).all(|(l, v)| {
        let w: Vec<C64> = v.iter().map(|z| z.conj()).collect();
        let (aw, bw) = (pen.a.matvec_adjoint(&w), pen.b.matvec_adjoint(&w));
        let res: f64 = aw.iter().zip(&bw).map(|(a, b)| (a - l.conj() * b).norm_sqr()).sum::<f64>().sqrt();
        let nw: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        res <= 1e-9 * (pen.a.norm1() + l.norm() * pen.b.norm1()) * nw
    });
    if !conj_ok {
        failures.push("adjoint conjugacy");
    }

    let branch_ok = (0..50).all(|_| {
        let lam = C64::new(r.gen_range(-50.0..50.0), r.gen_range(-50.0..50.0));
        let (ml, mr) = wave_numbers(&red, lam);
        let d = |a: C64, b: C64| {
            let m = transmission_matrix_with_roots(&red, a, b);
            m[0][0] * m[1][1] - m[0][1] * m[1][0]
        };
        let s = det_term_scale(&red, lam);
        (d(-ml, mr) + d(ml, mr)).norm() <= 1e-12 * s && (d(ml, -mr) + d(ml, mr)).norm() <= 1e-12 * s
    });
    if !branch_ok {
        failures.push("branch invariance");
    }

    let small = assemble_interval(&uniform_interval_mesh(4, Some(reg.b)).unwrap(), &reg, 1).unwrap();
    let kron = assemble_tensor(&small, 2).unwrap();
    let e1 = eigs_near(&small, C64::new(0.0, 0.0), 4, DEFAULT_TOL).unwrap().values;
    let e2 = eigs_near(&kron, C64::new(0.0, 0.0), 16, DEFAULT_TOL).unwrap().values;
    let sums: Vec<C64> = e1.iter().flat_map(|a| e1.iter().map(move |b| a + b)).collect();
    if match_sets(&e2, &sums) > 1e-10 {
        failures.push("Kronecker identity");
    }

    let mut dense_worst = 0.0f64;
    for n in [4usize, 7, 12] {
        let (a, b) = random_pencil(&mut r, n);
        let want = dense_eigenvalues(&a, &b);
        let got = eigs_near(&dense_pencil(&a, &b), C64::new(0.013, 0.021), n, 1e-11).unwrap();
        dense_worst = dense_worst.max(match_sets(&got.values, &want));
    }
    if dense_worst > 1e-8 {
        failures.push("dense oracle");
    }

    let sa = ModelParams::new(0.4, C64::new(2.0, 0.0), C64::new(1.5, 0.0)).unwrap();
    let spen = assemble_interval(&uniform_interval_mesh(64, Some(sa.b)).unwrap(), &sa, 2).unwrap();
    let real = eigs_near(&spen, C64::new(20.0, 1.0), 6, DEFAULT_TOL).unwrap().values.iter().all(|l| l.im.abs() <= 1e-9 * l.norm());
    if !real {
        failures.push("selfadjoint degeneration");
    }

    vec![line(
        "9",
        failures.is_empty(),
        format!(
            "symmetry, mass positivity, adjoint conjugacy, branch invariance, Kronecker, dense oracle (worst {dense_worst:.1e}), selfadjoint: {}",
            if failures.is_empty() { "all hold".to_string() } else { format!("failed {}", failures.join(", ")) }
        ),
    )]
}

fn criterion10() -> Vec<Line> {
    let case = BenchmarkCase::new(CaseId::Regular1d);
    [("10a", 1usize, 11usize), ("10b", 2, 9)]
        .into_iter()
        .map(|(id, p, levels)| {
            let (t, s) = timed(|| eigenfunction_convergence(&case, p, levels).unwrap());
            let slope = t.rates.iter().find(|r| r.column == "h1_jet").map(|r| r.slope);
            let last = t.rows.last().unwrap();
            line(
                id,
                near(slope, -(p as f64), 0.15),
                format!(
                    "eigenfunction p={p}: H1 distance to jet span slope {} (-{p} +- 0.15), last 4 of {levels} levels to N={}; {s:.1}s",
                    fmt(slope),
                    last.n_dofs
                ),
            )
        })
        .collect()
}

fn main() {
    let started = Instant::now();
    let heavy: Vec<thread::JoinHandle<Vec<Line>>> =
        vec![thread::spawn(criterion8), thread::spawn(criterion6), thread::spawn(criterion3), thread::spawn(criterion5)];
    let mut lines = Vec::new();
    lines.extend(criterion1());
    lines.extend(criterion2());
    lines.extend(criterion4());
    lines.extend(criterion7());
    lines.extend(criterion9());
    lines.extend(criterion10());
    for h in heavy {
        lines.extend(h.join().expect("criterion panicked"));
    }
    let key = |id: &str| {
        let digits: String = id.chars().take_while(|c| c.is_ascii_digit()).collect();
        (digits.parse::<u32>().unwrap_or(0), id.to_string())
    };
    lines.sort_by_key(|l| key(l.id));

    let mut unexpected = Vec::new();
    for l in &lines {
        let known = KNOWN_LIMITS.contains(&l.id);
        let tag = match (l.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known limit)",
            (false, false) => "FAIL",
        };
        println!("[{tag}] {:>3} {}", l.id, l.text);
        if !l.pass && !known {
            unexpected.push(l.id);
        }
    }
    let passed = lines.iter().filter(|l| l.pass).count();
    println!("acceptance: {passed}/{} passed in {:.1}s", lines.len(), started.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
