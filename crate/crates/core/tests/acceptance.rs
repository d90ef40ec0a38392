//! Acceptance suite: every criterion at its stated tolerance, one PASS/FAIL
//! line each. Runs as a plain program so the lines are always visible.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};

use robin_coupling::diagnostics::{zs_functionals, ConvergenceTable, LevelPair};
use robin_coupling::experiments::{convergence, ExperimentConfig, Sweep};
use robin_coupling::fem::{self, FeSpace};
use robin_coupling::manufactured::{case_by_name, case_zero};
use robin_coupling::mesh::{build_two_domain_mesh, Subdomain};
use robin_coupling::schemes::{
    residual, run_in_context, step_original_with_loads, DiscreteState, Retention, SchemeConfig,
    SchemeContext, Variant,
};
use robin_coupling::sparse::{factorize, SparseMatrix, TripletBuilder};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn sweep(case: &str, variant: Variant, kmin: u32, kmax: u32) -> Sweep {
    let cfg = ExperimentConfig {
        case: case.into(),
        variant: variant.name().into(),
        kmin,
        kmax,
        ..Default::default()
    };
    let s = convergence(&cfg, variant).expect("valid configuration");
    assert!(s.failure.is_none(), "{case} {variant}: {:?}", s.failure);
    s
}

fn order_at_last(t: &ConvergenceTable, col: &str) -> f64 {
    t.last_order(col).unwrap_or(f64::NAN)
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn fmt_orders(t: &ConvergenceTable, col: &str) -> String {
    t.orders(col)
        .iter()
        .map(|o| o.map_or("-".into(), |v| format!("{v:.2}")))
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_1(ex1: &Sweep, secs: f64) -> Outcome {
    let t = ex1.final_table();
    let targets = [("e_u", 1.23), ("e_du", 2.23), ("e_dw", 2.33), ("e_gdu", 2.22)];
    let mut ok = secs < 120.0;
    let mut detail = Vec::new();
    for (c, target) in targets {
        let o = order_at_last(&t, c);
        ok &= within(o, target, 0.3);
        detail.push(format!("{c} {o:.2} (ref {target})"));
    }
    outcome(ok, format!("k=6 orders: {}; sweep {secs:.1}s", detail.join(", ")))
}

fn criterion_2(ex1: &Sweep) -> Outcome {
    let t = ex1.sums_table(1);
    let reference = [
        ("e_gdus", 1.72, [7.37e-2, 4.07e-2, 1.53e-2, 4.64e-3]),
        ("e_gdws", 1.73, [9.42e-2, 5.20e-2, 1.92e-2, 5.77e-3]),
        ("e_gdu2s", 2.76, [4.58e-2, 1.18e-2, 2.09e-3, 3.08e-4]),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (c, target, values) in reference {
        let orders: Vec<f64> = t.orders(c).iter().skip(1).map(|o| o.unwrap_or(f64::NAN)).collect();
        let last = *orders.last().unwrap();
        let increasing = orders.windows(2).all(|w| w[1] > w[0]);
        let ratios: Vec<f64> = t.values(c).iter().zip(values).map(|(a, b)| a / b).collect();
        let close = ratios.iter().all(|r| (1.0 / 3.0..=3.0).contains(r));
        ok &= within(last, target, 0.3) && increasing && close;
        detail.push(format!(
            "{c} orders [{}] (ref {target}), ratio to table {:.2}..{:.2}",
            fmt_orders(&t, c),
            ratios.iter().cloned().fold(f64::INFINITY, f64::min),
            ratios.iter().cloned().fold(0.0, f64::max)
        ));
    }
    outcome(ok, detail.join("; "))
}

fn criterion_3(ex2: &Sweep) -> Outcome {
    let du = order_at_last(&ex2.final_table(), "e_du");
    let g2 = order_at_last(&ex2.sums_table(2), "e_gdu2s");
    outcome(
        within(du, 2.0, 0.15) && g2 >= 2.3,
        format!("e_du order {du:.2} (2.0±0.15), e_gdu2s order {g2:.2} (≥2.3)"),
    )
}

fn criterion_4(ex3: &Sweep) -> Outcome {
    let f = ex3.final_table();
    let u = order_at_last(&f, "e_u");
    let gdu = order_at_last(&f, "e_gdu");
    let g2 = order_at_last(&ex3.sums_table(2), "e_gdu2s");
    outcome(
        within(u, 1.0, 0.1) && within(gdu, 1.99, 0.15) && g2 >= 2.6,
        format!("e_u {u:.2} (1.00±0.1), e_gdu {gdu:.2} (1.99±0.15), e_gdu2s {g2:.2} (≥2.6)"),
    )
}

fn criterion_5(ex1: &Sweep, orig: &Sweep) -> Outcome {
    let imp = order_at_last(&ex1.sums_table(1), "e_gdu2s");
    let org = order_at_last(&orig.sums_table(1), "e_gdu2s");
    outcome(
        imp - org >= 0.4,
        format!("e_gdu2s order at k=6: improved {imp:.2}, original {org:.2}"),
    )
}

fn random_state(ctx: &SchemeContext, rng: &mut impl Rng) -> DiscreteState {
    let sp = &ctx.spaces;
    let mut s = DiscreteState::zeros(0, sp);
    for (v, &m) in s.u.iter_mut().zip(&sp.fluid.dirichlet_mask) {
        *v = if m { 0.0 } else { rng.gen_range(-1.0..1.0) };
    }
    for (v, &m) in s.w.iter_mut().zip(&sp.solid.dirichlet_mask) {
        *v = if m { 0.0 } else { rng.gen_range(-1.0..1.0) };
    }
    for v in s.lambda.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    s
}

fn criterion_6() -> Outcome {
    let case = case_zero();
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for trial in 0..20 {
        let order = 1 + trial % 2;
        let level = 2 + (trial % 3) as u32;
        let alpha = [4.0, 1.0, 10.0][trial % 3];
        let cfg = SchemeConfig::for_level(&case, Variant::Original, level, alpha, 0.25, order);
        let mut ctx = SchemeContext::new(&case, &cfg).unwrap();
        let zs = vec![0.0; ctx.spaces.solid.ndofs()];
        let zf = vec![0.0; ctx.spaces.fluid.ndofs()];
        let mut state = random_state(&ctx, &mut rng);
        for _ in 0..ctx.n_steps {
            let next = step_original_with_loads(&mut ctx, &state, &zs, &zf).unwrap();
            let zsf = |a: &DiscreteState, b: &DiscreteState| {
                zs_functionals(
                    LevelPair {
                        solid: (&a.w, &b.w),
                        fluid: (&a.u, &b.u),
                        trace: (&a.lambda, &b.lambda),
                    },
                    cfg.alpha,
                    cfg.dt,
                    &ctx.spaces,
                    &ctx.ops,
                )
            };
            let (z0, _) = zsf(&state, &state);
            let (z1, s1) = zsf(&state, &next);
            worst = worst.max((z1 + s1 - z0).abs() / z0);
            checked += 1;
            state = next;
        }
    }
    outcome(
        worst <= 1e-10,
        format!("20 random states, {checked} steps, worst relative defect {worst:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_block = 0.0f64;
    let mut steps = 0;
    for name in ["example1", "example2", "example3"] {
        let case = case_by_name(name).unwrap();
        for variant in Variant::ALL {
            for (level, order) in [(3, 1), (3, 2), (4, 1)] {
                let cfg = SchemeConfig::for_level(&case, variant, level, 4.0, 0.25, order);
                let mut ctx = SchemeContext::new(&case, &cfg).unwrap();
                let traj = run_in_context(&mut ctx, Retention::All, &mut |_, _| Ok(())).unwrap();
                let st = traj.states();
                let start = if variant == Variant::Improved {
                    let block = [st[1].clone(), st[2].clone(), st[3].clone()];
                    let r = residual::first_block(&ctx, &block).unwrap();
                    worst_block = r.into_iter().fold(worst_block, f64::max);
                    3
                } else {
                    0
                };
                for w in st[start..].windows(2) {
                    let r = match variant {
                        Variant::Monolithic => residual::monolithic_step(&ctx, &w[0], &w[1]).unwrap().to_vec(),
                        _ => residual::original_step(&ctx, &w[0], &w[1]).unwrap().to_vec(),
                    };
                    worst = r.into_iter().fold(worst, f64::max);
                    steps += 1;
                }
            }
        }
    }
    outcome(
        worst <= 1e-9 && worst_block <= 1e-9,
        format!("{steps} steps, worst step residual {worst:.2e}, worst first-block equation {worst_block:.2e}"),
    )
}

fn criterion_8(mono: &Sweep, ex1: &Sweep, orig: &Sweep) -> Outcome {
    let t = mono.final_table();
    let orders: Vec<f64> = t.orders("e_u").iter().skip(1).map(|o| o.unwrap_or(f64::NAN)).collect();
    let order_ok = orders.iter().all(|&o| within(o, 1.0, 0.1));
    let m = t.values("e_u");
    let mut ratio_max = 0.0f64;
    for s in [ex1, orig] {
        for (a, b) in s.final_table().values("e_u").iter().zip(&m) {
            ratio_max = ratio_max.max((a / b).max(b / a));
        }
    }
    outcome(
        order_ok && ratio_max <= 5.0,
        format!(
            "monolithic e_u orders [{}] (1.0±0.1); Robin-Robin/monolithic e_u ratio ≤ {ratio_max:.2} (≤5)",
            fmt_orders(&t, "e_u")
        ),
    )
}

fn space(nx: usize, side: Subdomain, order: usize) -> FeSpace {
    FeSpace::new(&build_two_domain_mesh(nx, 0.75).unwrap(), side, order).unwrap()
}

fn criterion_9() -> Outcome {
    let mut failures = Vec::new();

    // mass sums to the subdomain area
    for order in [1, 2] {
        for (side, area) in [(Subdomain::Fluid, 0.75), (Subdomain::Solid, 0.25)] {
            let m = fem::assemble_mass(&space(8, side, order));
            let total: f64 = m.triplets().map(|(_, _, v)| v).sum();
            if (total - area).abs() > 1e-12 {
                failures.push(format!("mass sum P{order} {side:?}: {total}"));
            }
        }
    }

    // stiffness annihilates constants
    for order in [1, 2] {
        let sp = space(8, Subdomain::Fluid, order);
        let k = fem::assemble_stiffness(&sp, 1.7);
        let r = k.mul_vec(&vec![1.0; sp.ndofs()]);
        if r.iter().any(|v| v.abs() > 1e-12) {
            failures.push(format!("stiffness nullspace P{order}"));
        }
    }

    // P1 element matrices on right isosceles triangles with legs h
    {
        let sp = space(4, Subdomain::Fluid, 1);
        let h = 0.25;
        let m = fem::assemble_mass(&sp).to_dense();
        let k = fem::assemble_stiffness(&sp, 1.0).to_dense();
        // vertex (0,0) touches two triangles of area h²/2: diagonal 2·(h²/2)/6
        let corner = sp
            .dof_coords
            .iter()
            .position(|p| p[0] == 0.0 && p[1] == 0.0)
            .unwrap();
        let expect_m = 2.0 * (h * h / 2.0) / 6.0;
        // cotangent formula: ½(cot 90° + cot 45°) from each of the two triangles
        let expect_k = 0.5 + 0.5;
        if (m[corner][corner] - expect_m).abs() > 1e-14 || (k[corner][corner] - expect_k).abs() > 1e-14 {
            failures.push(format!(
                "reference element: mass {} vs {expect_m}, stiffness {} vs {expect_k}",
                m[corner][corner], k[corner][corner]
            ));
        }
    }

    // manufactured forcing equals u_t − ν Δu
    for name in ["example1", "example2", "example3"] {
        let case = case_by_name(name).unwrap();
        for (field, nu) in [(&case.fluid, case.nu_f), (&case.solid, case.nu_s)] {
            for i in 0..50 {
                let t = 0.02 * i as f64;
                let p = [(0.37 * i as f64).fract(), (0.61 * i as f64 + 0.1).fract()];
                let h = (field.hessian)(t, p);
                let r = (field.forcing)(t, p) - ((field.time_derivative)(t, p) - nu * (h[0] + h[2]));
                // independent second-derivative oracle for cos(πx)sin(πy) profiles
                let lap = -2.0 * PI * PI * (field.value)(t, p);
                if r.abs() > 1e-10 || (h[0] + h[2] - lap).abs() > 1e-10 * (1.0 + lap.abs()) {
                    failures.push(format!("{name} consistency at t={t}"));
                    break;
                }
            }
        }
    }

    // sparse LU against dense Gaussian elimination
    {
        let n = 40;
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j || rng.gen_bool(0.15) {
                    dense[i][j] = rng.gen_range(-1.0..1.0);
                }
            }
            dense[i][i] += n as f64 * 0.2;
        }
        let mut b = TripletBuilder::new(n, n);
        for (i, row) in dense.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                b.push(i, j, v);
            }
        }
        let a: SparseMatrix = b.build();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let x = factorize(&a).unwrap().solve(&rhs).unwrap();
        let y = dense_solve(dense, rhs);
        let err = x.iter().zip(&y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if err > 1e-10 {
            failures.push(format!("sparse vs dense {err:.2e}"));
        }
    }

    if failures.is_empty() {
        outcome(true, "mass/area, stiffness nullspace, reference element, PDE consistency, sparse vs dense")
    } else {
        outcome(false, failures.join("; "))
    }
}

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--nocapture`; only a
    // `--list` request needs an answer.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }

    let start = Instant::now();
    let ex1 = sweep("example1", Variant::Improved, 3, 6);
    let ex1_secs = start.elapsed().as_secs_f64();
    let orig = sweep("example1", Variant::Original, 3, 6);
    let mono = sweep("example1", Variant::Monolithic, 3, 5);
    let ex2 = sweep("example2", Variant::Improved, 3, 6);
    let ex3 = sweep("example3", Variant::Improved, 3, 6);

    let results = [
        ("1 example 1 final-time orders", criterion_1(&ex1, ex1_secs)),
        ("2 example 1 summed orders and magnitudes", criterion_2(&ex1)),
        ("3 example 2 orders", criterion_3(&ex2)),
        ("4 example 3 orders", criterion_4(&ex3)),
        ("5 original vs improved contrast", criterion_5(&ex1, &orig)),
        ("6 energy identity", criterion_6()),
        ("7 weak residuals", criterion_7()),
        ("8 monolithic oracle", criterion_8(&mono, &ex1, &orig)),
        ("9 unit oracles", criterion_9()),
    ];

    let mut failed = 0;
    for (name, r) in &results {
        println!("{} criterion {name}: {}", if r.passed { "PASS" } else { "FAIL" }, r.detail);
        failed += usize::from(!r.passed);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
