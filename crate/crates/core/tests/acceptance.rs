//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 6 7`.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use brls::experiments::classification::{run_classification, ClassificationConfig};
use brls::experiments::phase::{run_phase, PhaseConfig};
use brls::experiments::{random_noise_matrix, NoiseShape};
use brls::inner::{brute_force_max, double_greedy_traced, mincut_supermodular_max, orthogonal_closed_form};
use brls::io::{save_csv_matrix, save_csv_vector};
use brls::lovasz::{lovasz_eval, lovasz_saddle_check, value_functions_agree};
use brls::modularity::{classify_default, verify_modularity_bruteforce};
use brls::oracle::{minimax_bruteforce, phi_bruteforce, saddle_check, GridSpec};
use brls::outer::{check_approx_minimax, iteration_count, moreau_grad_estimate, pg_linear, pg_nonlinear};
use brls::{BrlsInstance, FeasibleSet, HrlsInstance, LinearRunConfig, Matrix, NonlinearRunConfig, ResidualMap, Verdict};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use common::*;

type Outcome = Result<String, String>;
type Snapshot = (Vec<u8>, BTreeMap<PathBuf, Vec<u8>>);

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Draws until the noise matrix has exactly the requested class (a single
/// column is always orthogonal).
fn strict_instance(shape: NoiseShape, m: usize, n: usize, r: usize, c_scale: f64, g: &mut ChaCha8Rng) -> BrlsInstance<f64> {
    loop {
        let inst = affine_instance(shape, m, n, r, c_scale, g);
        if n < 2 || classify_default(inst.noise()).unwrap().verdict == shape.verdict() {
            return inst;
        }
    }
}

fn grid_for(inst: &BrlsInstance<f64>) -> GridSpec<f64> {
    let pitch = if inst.m() == 1 { 1e-3 } else { 2e-2 };
    GridSpec::covering(inst.feasible(), pitch).unwrap()
}

fn c1_modularity_verdicts() -> Outcome {
    let mut g = rng(1);
    let mut failures = 0;
    let mut checked = 0;
    for shape in [NoiseShape::Acute, NoiseShape::Obtuse] {
        for _ in 0..200 {
            let n = g.random_range(2..=6);
            let r = n + g.random_range(0..=2);
            let inst = strict_instance(shape, 2, n, r, 1.0, &mut g);
            let expected = classify_default(inst.noise()).unwrap().verdict.predicted_shape();
            for _ in 0..20 {
                let x = point_in_cube(2, &mut g);
                checked += 1;
                if verify_modularity_bruteforce(&inst, &x).unwrap() != expected {
                    failures += 1;
                }
            }
        }
    }
    ensure(failures == 0, || format!("{failures} of {checked} verdicts disagree"))?;
    Ok(format!("{checked} (matrix, x) pairs agree"))
}

fn c2_mincut_oracle() -> Outcome {
    let mut g = rng(2);
    let mut worst: f64 = 0.0;
    for k in 0..500 {
        let n = 1 + k % 14;
        let r = g.random_range(2..=8);
        let inst = strict_instance(NoiseShape::Acute, 2, n, r, 1.0, &mut g);
        let x = point_in_cube(2, &mut g);
        let cut = mincut_supermodular_max(&inst, &x).map_err(|e| e.to_string())?;
        let bf = brute_force_max(&inst, &x).unwrap();
        worst = worst.max((cut.value - bf.value).abs());
    }
    ensure(worst <= 1e-9, || format!("largest gap {worst:.3e}"))?;
    Ok(format!("500 instances, n ≤ 14, largest gap {worst:.1e}"))
}

fn c3_double_greedy() -> Outcome {
    let mut g = rng(3);
    let mut violations = 0;
    let mut worst_ratio = f64::INFINITY;
    let mut worst_step = f64::INFINITY;
    for k in 0..500 {
        let n = 2 + k % 11;
        let inst = strict_instance(NoiseShape::Obtuse, 2, n, n + g.random_range(0..=2), 1.0, &mut g);
        let class = classify_default(inst.noise()).unwrap();
        let x = point_in_cube(2, &mut g);
        let (sol, steps) = double_greedy_traced(&inst, &x, &class).unwrap();
        let phi = phi_bruteforce(&inst, &x).unwrap();
        if sol.value < phi / 3.0 {
            violations += 1;
        }
        worst_ratio = worst_ratio.min(sol.value / phi);
        // roundoff scale of the accumulated gains
        let scale = inst.gram().as_slice().iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        for s in steps {
            let sum = s.a + s.b;
            worst_step = worst_step.min(sum);
            if sum < -1e-12 * scale {
                violations += 1;
            }
        }
    }
    let mut worst_orth: f64 = 0.0;
    for k in 0..200 {
        let n = 1 + k % 12;
        let inst = strict_instance(NoiseShape::Orthogonal, 2, n, n + g.random_range(0..=2), 1.0, &mut g);
        let class = classify_default(inst.noise()).unwrap();
        let x = point_in_cube(2, &mut g);
        let sol = double_greedy_traced(&inst, &x, &class).unwrap().0;
        worst_orth = worst_orth.max((sol.value - phi_bruteforce(&inst, &x).unwrap()).abs());
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    ensure(worst_orth <= 1e-9, || format!("orthogonal gap {worst_orth:.3e}"))?;
    Ok(format!(
        "obtuse: worst value/oracle {worst_ratio:.3}, smallest a+b {worst_step:.2e}; orthogonal: largest gap {worst_orth:.1e}"
    ))
}

fn c4_closed_form() -> Outcome {
    let mut g = rng(4);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let n = 1 + k % 10;
        let base = strict_instance(NoiseShape::Orthogonal, 2, n, n + g.random_range(0..=2), 1.0, &mut g);
        let delta = g.random_range(0.01..1.0);
        let h = HrlsInstance::new(base.residual().clone(), base.noise().clone(), delta, base.feasible().clone()).unwrap();
        let b = h.to_brls().unwrap();
        for _ in 0..5 {
            let x = point_in_cube(2, &mut g);
            let closed = orthogonal_closed_form(&h, &x).unwrap();
            worst = worst.max((closed - phi_bruteforce(&b, &x).unwrap()).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("largest gap {worst:.3e}"))?;
    Ok(format!("200 instances × 5 points, largest gap {worst:.1e}"))
}

fn c5_lovasz() -> Outcome {
    let mut g = rng(5);
    let shapes = [NoiseShape::Acute, NoiseShape::Obtuse, NoiseShape::Orthogonal, NoiseShape::General];
    let mut vertex_gap: f64 = 0.0;
    for n in 1..=10 {
        for shape in shapes {
            let inst = affine_instance(shape, 2, n, n + 1, 1.0, &mut g);
            let x = point_in_cube(2, &mut g);
            for mask in 0usize..1 << n {
                let y = mask_to_y(mask, n);
                let yr: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
                let a = lovasz_eval(&inst, &x, &yr).unwrap();
                let b = inst.theta_binary(&x, &y).unwrap();
                vertex_gap = vertex_gap.max((a - b).abs() / b.abs().max(1.0));
            }
        }
    }
    // floating-point roundoff only: the chain sum and C·y accumulate differently
    ensure(vertex_gap <= 1e-12, || format!("vertex gap {vertex_gap:.3e}"))?;

    let mut secant_failures = 0;
    for _ in 0..50 {
        let n = g.random_range(2..=8);
        let inst = strict_instance(NoiseShape::Acute, 2, n, g.random_range(2..=6), 1.0, &mut g);
        let x = point_in_cube(2, &mut g);
        for _ in 0..40 {
            let p: Vec<f64> = (0..n).map(|_| g.random::<f64>()).collect();
            let q: Vec<f64> = (0..n).map(|_| g.random::<f64>()).collect();
            let t = g.random::<f64>();
            let z: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            let (fp, fq, fz) = (
                lovasz_eval(&inst, &x, &p).unwrap(),
                lovasz_eval(&inst, &x, &q).unwrap(),
                lovasz_eval(&inst, &x, &z).unwrap(),
            );
            if fz < (1.0 - t) * fp + t * fq - 1e-9 {
                secant_failures += 1;
            }
        }
    }
    ensure(secant_failures == 0, || format!("{secant_failures} concavity secant failures"))?;

    let mut agreement_failures = 0;
    for k in 0..20 {
        let n = 2 + k % 7;
        let inst = affine_instance(shapes[k % 4], 2, n, n + 1, 1.0, &mut g);
        let x = point_in_cube(2, &mut g);
        let a = value_functions_agree(&inst, &x, 10_000, &mut g).unwrap();
        if !a.holds(1e-9 * a.phi.abs().max(1.0)) {
            agreement_failures += 1;
        }
    }
    ensure(agreement_failures == 0, || format!("{agreement_failures} value-function disagreements"))?;
    Ok(format!(
        "vertex gap {vertex_gap:.1e}; 2000 secant checks; 20 instances × 10⁴ relaxed samples"
    ))
}

fn example_3_1() -> BrlsInstance<f64> {
    let s = std::f64::consts::SQRT_2;
    BrlsInstance::new(
        ResidualMap::affine(Matrix::from_rows(&[vec![s]]).unwrap(), vec![s]).unwrap(),
        Matrix::from_rows(&[vec![2.0 * s]]).unwrap(),
        FeasibleSet::cube(1, -1.0, 1.0).unwrap(),
    )
    .unwrap()
}

fn c6_two_point_example() -> Outcome {
    let inst = example_3_1();
    let grid = GridSpec::covering(inst.feasible(), 1e-3).unwrap();
    let mm = minimax_bruteforce(&inst, &grid).unwrap();
    ensure(mm.x[0].abs() <= 1e-3, || format!("grid minimizer at {}", mm.x[0]))?;
    ensure((mm.value - 1.0).abs() <= 2e-3, || format!("grid minimax {}", mm.value))?;

    let rep = pg_linear(&inst, &LinearRunConfig::new(0.05)).map_err(|e| e.to_string())?;
    let phi = phi_bruteforce(&inst, &rep.x_hat).unwrap();
    ensure(phi <= 1.05, || format!("φ(x̂) = {phi}"))?;

    let points = grid.points(inst.feasible()).unwrap();
    for x in &points {
        for y in [false, true] {
            ensure(!saddle_check(&inst, x, &[y], &grid, 1e-9).unwrap(), || {
                format!("binary saddle at x = {}, y = {y}", x[0])
            })?;
        }
    }
    ensure(lovasz_saddle_check(&inst, &[0.0], &[0.5], &grid, 1e-9).unwrap(), || {
        "relaxed saddle at (0, ½) rejected".into()
    })?;
    Ok(format!(
        "grid x* = {:.1e}, value {:.6}; pg_linear φ(x̂) = {phi:.4} after {} iterations; no binary saddle on {} points",
        mm.x[0],
        mm.value,
        rep.iterations,
        points.len()
    ))
}

fn c7_linear_end_to_end() -> Outcome {
    let mut g = rng(7);
    let mut worst_margin = f64::INFINITY;
    let mut max_k = 0;
    for k in 0..20 {
        let m = 1 + k % 2;
        let n = g.random_range(2..=8);
        let r = g.random_range(2..=6);
        let inst = strict_instance(NoiseShape::Acute, m, n, r, 0.5, &mut g);
        let eps = 0.1;
        let rep = pg_linear(&inst, &LinearRunConfig::new(eps)).map_err(|e| e.to_string())?;
        max_k = max_k.max(rep.iterations);
        let phi = phi_bruteforce(&inst, &rep.x_hat).unwrap();
        let grid = grid_for(&inst);
        let mm = minimax_bruteforce(&inst, &grid).unwrap().value;
        let (l, _) = inst.lipschitz_estimates().unwrap();
        let bound = mm + eps + l * grid.covering_radius();
        ensure(phi <= bound, || format!("instance {k}: φ(x̂) = {phi} > {bound}"))?;
        worst_margin = worst_margin.min(mm + eps - phi);
    }
    Ok(format!(
        "20 instances, K ≤ {max_k}; smallest (grid minimax + ε − φ(x̂)) = {worst_margin:.4}"
    ))
}

fn c8_obtuse_end_to_end() -> Outcome {
    let mut g = rng(8);
    let mut max_k = 0;
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let m = 1 + k % 2;
        let n = g.random_range(2..=6);
        let inst = strict_instance(NoiseShape::Obtuse, m, n, n + g.random_range(0..=2), 0.5, &mut g);
        let eps = 0.1;
        let rep = pg_linear(&inst, &LinearRunConfig::new(eps)).map_err(|e| e.to_string())?;
        let (l, _) = inst.lipschitz_estimates().unwrap();
        let k_nine = iteration_count(eps, inst.feasible().diameter(), l, 1.0 / 3.0).unwrap();
        ensure(rep.iterations == k_nine, || {
            format!("instance {k}: ran {} iterations, expected {k_nine}", rep.iterations)
        })?;
        max_k = max_k.max(rep.iterations);
        let cert = check_approx_minimax(&inst, &rep.x_hat, &rep.y_hat, 1.0 / 3.0, eps, &grid_for(&inst)).unwrap();
        ensure(cert.passed, || format!("instance {k}: {cert:?}"))?;
        worst = worst.max(cert.value / cert.upper);
    }
    Ok(format!("20 certificates pass, K ≤ {max_k}; largest Θ(x̂,ŷ)/upper = {worst:.3}"))
}

fn phase_toy() -> BrlsInstance<f64> {
    let a = Matrix::from_rows(&[vec![0.8, 0.3], vec![-0.2, 0.7], vec![0.5, -0.4]]).unwrap();
    let x_true = [0.6, -0.3];
    let b: Vec<f64> = a.matvec(&x_true).iter().map(|v| v * v).collect();
    let c = Matrix::from_rows(&[vec![0.2, 0.1, 0.0], vec![0.0, 0.15, 0.1], vec![0.05, 0.0, 0.2]]).unwrap();
    BrlsInstance::new(
        ResidualMap::phase_retrieval(a, b).unwrap(),
        c,
        FeasibleSet::cube(2, -1.0, 1.0).unwrap(),
    )
    .unwrap()
}

fn c9_stationarity() -> Outcome {
    let inst = phase_toy();
    if classify_default(inst.noise()).unwrap().verdict != Verdict::Acute {
        return Err("toy noise matrix is not acute".into());
    }
    let (_, ell) = inst.lipschitz_estimates().unwrap();
    let eps = 0.5;
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    let mut iterations = 0;
    let seeds = 30;
    for seed in 0..seeds {
        let mut cfg = NonlinearRunConfig::new(eps, seed);
        cfg.x0 = Some(vec![0.5, 0.5]);
        cfg.record_trace = false;
        let rep = pg_nonlinear(&inst, &cfg).map_err(|e| e.to_string())?;
        iterations = rep.iterations;
        let est = moreau_grad_estimate(&inst, &rep.x_hat, ell).unwrap();
        total += est.value;
        worst = worst.max(est.value);
    }
    let mean = total / seeds as f64;
    ensure(mean <= 2.0 * eps, || format!("mean Moreau gradient {mean:.4} > {}", 2.0 * eps))?;
    Ok(format!("K = {iterations}; mean Moreau gradient {mean:.4}, largest {worst:.4} over {seeds} seeds"))
}

fn c10_phase_signs() -> Outcome {
    let cfg = PhaseConfig::default();
    let out = run_phase(&cfg, false).map_err(|e| e.to_string())?;
    let t = &out.table;
    ensure(t.errors().count() == 0, || format!("{} error rows", t.errors().count()))?;
    let mut checked = 0;
    let mut notes = Vec::new();
    for shape in [NoiseShape::Acute, NoiseShape::Obtuse] {
        for delta in [1e-2, 1e-1] {
            for &lambda in cfg.lambdas.iter().filter(|&&l| l >= delta) {
                let param = brls::experiments::phase::phase_param(shape, delta, lambda);
                for model in ["LS", "LASSO"] {
                    let d = t
                        .get(model, &param, "delta_vs_rls")
                        .ok_or_else(|| format!("missing {model} {param}"))?;
                    ensure(d > 0.0, || format!("{model} {param}: Δ = {d}"))?;
                    checked += 1;
                }
            }
            let fp_param = format!("shape={shape};delta={delta}");
            for model in ["LS", "LASSO"] {
                let first = t.get(model, &fp_param, "first_positive_lambda");
                let before = first.is_some_and(|l| l < delta);
                notes.push(format!(
                    "{model}/{shape}/δ={delta}: first positive λ {} ({})",
                    first.map_or("none".to_string(), |l| l.to_string()),
                    if before { "before δ" } else { "not before δ" }
                ));
            }
        }
    }
    for n in &notes {
        println!("    {n}");
    }
    Ok(format!("{checked} mean differences positive"))
}

fn c11_classification_order() -> Outcome {
    let cfg = ClassificationConfig {
        rhos: vec![0.3, 0.4, 0.5],
        ..Default::default()
    };
    ensure(cfg.r == 500 && cfg.m == 20 && cfg.repeats == 5, || "unexpected defaults".into())?;
    let t = run_classification(&cfg).map_err(|e| e.to_string())?;
    ensure(t.errors().count() == 0, || format!("{} error rows", t.errors().count()))?;
    let [ls, _, full, partial] = brls::experiments::classification::model_names(&cfg);
    let mut parts = Vec::new();
    for rho in &cfg.rhos {
        let param = format!("rho={rho}");
        let acc = |model: &str| t.get(model, &param, "accuracy").ok_or_else(|| format!("missing {model} {param}"));
        let (a_ls, a_full, a_partial) = (acc(&ls)?, acc(&full)?, acc(&partial)?);
        ensure(a_full >= a_ls, || format!("ρ = {rho}: RLS {a_full} < LS {a_ls}"))?;
        if *rho == 0.3 {
            ensure((a_partial - a_full).abs() <= 0.05, || {
                format!("ρ = 0.3: partial {a_partial} vs full {a_full}")
            })?;
        }
        parts.push(format!("ρ={rho}: LS {a_ls:.3}, full {a_full:.3}, partial {a_partial:.3}"));
    }
    Ok(parts.join("; "))
}

fn brls_bin() -> &'static str {
    env!("CARGO_BIN_EXE_brls")
}

/// Runs the CLI and returns stdout plus the bytes of every file under `out`.
fn snapshot(args: &[&str], out: &Path) -> Result<Snapshot, String> {
    let o = Command::new(brls_bin()).args(args).output().map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!(
            "`brls {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&o.stderr)
        ));
    }
    let mut files = BTreeMap::new();
    let mut stack = vec![out.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let p = entry.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.clone(), fs::read(&p).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok((o.stdout, files))
}

fn c12_cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let inputs = dir.join("inputs");
    let out = dir.join("out");
    fs::create_dir_all(&inputs).unwrap();
    fs::create_dir_all(&out).unwrap();

    let mut g = rng(12);
    let acute = strict_instance(NoiseShape::Acute, 2, 4, 3, 0.5, &mut g);
    let brls::ResidualMap::Affine { a, offset } = acute.residual() else {
        unreachable!()
    };
    save_csv_matrix(a, &inputs.join("a.csv")).unwrap();
    save_csv_vector(offset, &inputs.join("b0.csv")).unwrap();
    save_csv_matrix(acute.noise(), &inputs.join("c.csv")).unwrap();
    save_csv_vector(&[0.3, -0.2], &inputs.join("x.csv")).unwrap();
    fs::write(
        inputs.join("affine.toml"),
        "variant = \"affine\"\na = \"a.csv\"\nb0 = \"b0.csv\"\nc = \"c.csv\"\n[feasible]\nkind = \"box\"\nlo = -1\nhi = 1\n",
    )
    .unwrap();
    let toy = phase_toy();
    let brls::ResidualMap::PhaseRetrieval { a, intensities } = toy.residual() else {
        unreachable!()
    };
    save_csv_matrix(a, &inputs.join("pa.csv")).unwrap();
    save_csv_vector(intensities, &inputs.join("pb.csv")).unwrap();
    save_csv_matrix(toy.noise(), &inputs.join("pc.csv")).unwrap();
    fs::write(
        inputs.join("phase.toml"),
        "variant = \"phase\"\na = \"pa.csv\"\nb = \"pb.csv\"\nc = \"pc.csv\"\ndelta = 0.05\n[feasible]\nkind = \"ball\"\ncenter = [0.5, 0]\nradius = 1\n",
    )
    .unwrap();
    let obtuse = random_noise_matrix(NoiseShape::Obtuse, 5, 4, 1.0, &mut g).unwrap();
    save_csv_matrix(&obtuse, &inputs.join("obtuse.csv")).unwrap();
    fs::write(
        inputs.join("cls.toml"),
        "seed = 3\nr = 120\nr_test = 200\nrhos = [0.3]\nrepeats = 2\niterations = 500\n",
    )
    .unwrap();
    fs::write(
        inputs.join("phase_exp.toml"),
        "seed = 4\ntrials = 2\ndeltas = [0.01]\nlambdas = [0.0, 0.05]\nrls_iterations = 200\nbaseline_iterations = 300\n",
    )
    .unwrap();

    let affine = p("inputs/affine.toml");
    let phase = p("inputs/phase.toml");
    let commands: Vec<Vec<String>> = vec![
        vec!["classify".into(), p("inputs/obtuse.csv")],
        vec!["inner".into(), "--manifest".into(), affine.clone(), "--x".into(), p("inputs/x.csv")],
        vec![
            "inner".into(),
            "--manifest".into(),
            affine.clone(),
            "--x".into(),
            p("inputs/x.csv"),
            "--method".into(),
            "double-greedy".into(),
        ],
        vec![
            "solve".into(),
            "--manifest".into(),
            affine.clone(),
            "--eps".into(),
            "0.2".into(),
            "--trace".into(),
            p("out/linear_trace.csv"),
            "--report".into(),
            p("out/linear_report.txt"),
        ],
        vec![
            "solve".into(),
            "--manifest".into(),
            phase.clone(),
            "--algorithm".into(),
            "nonlinear".into(),
            "--eps".into(),
            "0.5".into(),
            "--iterations".into(),
            "3000".into(),
            "--mu".into(),
            "0.01".into(),
            "--seed".into(),
            "9".into(),
            "--trace".into(),
            p("out/nonlinear_trace.csv"),
        ],
        vec!["verify".into(), "--manifest".into(), affine.clone()],
        vec!["verify".into(), "--manifest".into(), phase.clone(), "--seed".into(), "2".into()],
        vec![
            "classify-exp".into(),
            "--config".into(),
            p("inputs/cls.toml"),
            "--out".into(),
            p("out/cls"),
        ],
        vec![
            "phase-exp".into(),
            "--config".into(),
            p("inputs/phase_exp.toml"),
            "--out".into(),
            p("out/phase"),
            "--trace".into(),
        ],
    ];
    let mut first = Vec::new();
    for c in &commands {
        let args: Vec<&str> = c.iter().map(String::as_str).collect();
        first.push(snapshot(&args, &out)?);
    }
    let files = first.last().map_or(0, |s| s.1.len());
    let csv_files = first.last().map_or(0, |s| s.1.keys().filter(|k| k.extension().is_some_and(|e| e == "csv")).count());
    for (c, before) in commands.iter().zip(&first) {
        let args: Vec<&str> = c.iter().map(String::as_str).collect();
        let after = snapshot(&args, &out)?;
        ensure(after.0 == before.0, || format!("stdout of `brls {}` changed on rerun", c[0]))?;
        for (path, bytes) in &before.1 {
            ensure(after.1.get(path) == Some(bytes), || {
                format!("{} changed after rerunning `brls {}`", path.display(), c[0])
            })?;
        }
    }
    Ok(format!(
        "{} commands rerun; stdout and {files} output files ({csv_files} CSV) byte-identical",
        commands.len()
    ))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, title: "modularity verdicts match enumeration", budget: Duration::from_secs(30), run: c1_modularity_verdicts },
        Criterion { id: 2, title: "min-cut equals enumeration on acute instances", budget: Duration::from_secs(60), run: c2_mincut_oracle },
        Criterion { id: 3, title: "double greedy guarantees and step invariant", budget: Duration::from_secs(60), run: c3_double_greedy },
        Criterion { id: 4, title: "orthogonal closed form equals enumeration", budget: Duration::from_secs(10), run: c4_closed_form },
        Criterion { id: 5, title: "Lovász extension properties", budget: Duration::from_secs(30), run: c5_lovasz },
        Criterion { id: 6, title: "two-point example", budget: Duration::from_secs(20), run: c6_two_point_example },
        Criterion { id: 7, title: "linear solver reaches the grid minimax on acute instances", budget: Duration::from_secs(300), run: c7_linear_end_to_end },
        Criterion { id: 8, title: "(1/3, ε) certificates on obtuse instances", budget: Duration::from_secs(300), run: c8_obtuse_end_to_end },
        Criterion { id: 9, title: "nonlinear solver stationarity on a phase retrieval toy", budget: Duration::from_secs(600), run: c9_stationarity },
        Criterion { id: 10, title: "phase retrieval worst-case error signs", budget: Duration::from_secs(600), run: c10_phase_signs },
        Criterion { id: 11, title: "classification accuracy ordering", budget: Duration::from_secs(600), run: c11_classification_order },
        Criterion { id: 12, title: "CLI reruns are byte-identical", budget: Duration::from_secs(600), run: c12_cli_determinism },
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > c.budget => Err(format!("took {:.1}s, budget {}s", elapsed.as_secs_f64(), c.budget.as_secs())),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {:>2} [{:.1}s] {}: {detail}", c.id, elapsed.as_secs_f64(), c.title);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
