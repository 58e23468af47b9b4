//! Phase retrieval under bounded structured noise.
//!
//! Each trial draws a Gaussian `A`, a sparse `x_true`, a noise matrix `C` of
//! the requested class and intensities `b = (A x_true)² + e + C z̄` with
//! small Gaussian `e` and `z̄` uniform in `[−δ, δ]^n`. Least squares, LASSO
//! and the robust model (hypercube radius `δ`) are fitted on the same data
//! and compared through the worst-case error
//! `E_λ(x) = max_{z∈[−λ,λ]^n} ½‖(Ax)² − b − Cz‖²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generators::{gaussian_matrix, random_noise_matrix, NoiseShape};
use crate::error::{Error, Result};
use crate::inner::{solve_inner, InnerPolicy};
use crate::io::ResultTable;
use crate::linalg::{distance, norm_inf, norm_sq, symmetric_eigen, Matrix};
use crate::modularity::classify_default;
use crate::outer::{pg_nonlinear, NonlinearRunConfig, TraceEntry};
use crate::problem::{FeasibleSet, HrlsInstance, ResidualMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    pub seed: u64,
    pub m: usize,
    pub r: usize,
    pub n: usize,
    /// Nonzeros in `x_true`.
    pub sparsity: usize,
    pub deltas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub c_shapes: Vec<NoiseShape>,
    pub trials: usize,
    /// Half-width of `X = [−R, R]^m`; `10‖x_true‖∞` when unset.
    pub box_radius: Option<f64>,
    /// Standard deviation of the unstructured measurement noise.
    pub noise_std: f64,
    /// Column scale of `C`.
    pub c_scale: f64,
    pub lasso_weight: f64,
    /// Iteration budget of the least-squares and LASSO solvers.
    pub baseline_iterations: usize,
    /// `K` of the robust solve.
    pub rls_iterations: u64,
    /// Fixed step `μ` of the robust solve; `0.5 / ‖J(x_ls)‖²` when unset.
    pub rls_step: Option<f64>,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            m: 20,
            r: 40,
            n: 10,
            sparsity: 5,
            deltas: vec![1e-3, 1e-2, 1e-1],
            lambdas: vec![0.0, 0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2],
            c_shapes: vec![NoiseShape::Acute, NoiseShape::Obtuse],
            trials: 10,
            box_radius: None,
            noise_std: 1e-3,
            c_scale: 1.0,
            lasso_weight: 1.0,
            baseline_iterations: 5000,
            rls_iterations: 2000,
            rls_step: None,
        }
    }
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.m == 0 || self.r == 0 {
            return bad("m and r must be positive");
        }
        if self.sparsity == 0 || self.sparsity > self.m {
            return bad("sparsity must lie in 1..=m");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.deltas.iter().any(|&d| !(d > 0.0)) {
            return bad("every delta must be positive");
        }
        if self.lambdas.iter().any(|&l| !(l >= 0.0)) || self.lambdas.windows(2).any(|w| w[0] >= w[1]) {
            return bad("lambdas must be nonnegative and strictly ascending");
        }
        if self.box_radius.is_some_and(|r| !(r > 0.0)) {
            return bad("box_radius must be positive");
        }
        if !(self.noise_std >= 0.0 && self.c_scale > 0.0 && self.lasso_weight >= 0.0) {
            return bad("noise_std, c_scale and lasso_weight must be nonnegative (c_scale positive)");
        }
        if self.rls_step.is_some_and(|s| !(s > 0.0)) {
            return bad("rls_step must be positive");
        }
        Ok(())
    }
}

/// Data of one trial.
#[derive(Clone, Debug)]
pub struct PhaseData {
    pub a: Matrix<f64>,
    pub intensities: Vec<f64>,
    pub c: Matrix<f64>,
    pub x_true: Vec<f64>,
    pub feasible: FeasibleSet<f64>,
}

impl PhaseData {
    /// `F̂(x) = (Ax)² − b`.
    pub fn residual(&self) -> Result<ResidualMap<f64>> {
        ResidualMap::phase_retrieval(self.a.clone(), self.intensities.clone())
    }
}

pub fn gen_phase<R: Rng + ?Sized>(cfg: &PhaseConfig, shape: NoiseShape, delta: f64, rng: &mut R) -> Result<PhaseData> {
    let a = gaussian_matrix(cfg.r, cfg.m, 1.0, rng);
    let mut x_true = vec![0.0; cfg.m];
    for i in rand::seq::index::sample(rng, cfg.m, cfg.sparsity) {
        x_true[i] = super::generators::gaussian_vector(1, 1.0, rng)[0];
    }
    let c = random_noise_matrix(shape, cfg.r, cfg.n, cfg.c_scale, rng)?;
    let z: Vec<f64> = (0..cfg.n).map(|_| rng.random_range(-delta..=delta)).collect();
    let e = super::generators::gaussian_vector(cfg.r, cfg.noise_std, rng);
    let cz = c.matvec(&z);
    let intensities: Vec<f64> = a
        .matvec(&x_true)
        .iter()
        .enumerate()
        .map(|(i, v)| v * v + e[i] + cz[i])
        .collect();
    let radius = cfg
        .box_radius
        .unwrap_or_else(|| 10.0 * norm_inf(&x_true))
        .max(f64::MIN_POSITIVE);
    Ok(PhaseData {
        a,
        intensities,
        c,
        x_true,
        feasible: FeasibleSet::cube(cfg.m, -radius, radius)?,
    })
}

/// `E_λ(x) = max_{z∈[−λ,λ]^n} ½‖F̂(x) − Cz‖²`, exactly: min-cut for acute or
/// orthogonal `C`, enumeration otherwise (`n ≤ 25`).
pub fn worst_case_error(residual: &ResidualMap<f64>, c: &Matrix<f64>, x: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Invalid(format!("λ must be nonnegative, got {lambda}")));
    }
    if lambda == 0.0 || c.cols() == 0 {
        return Ok(0.5 * norm_sq(&residual.eval(x)));
    }
    let m = residual.input_dim();
    let h = HrlsInstance::new(residual.clone(), c.clone(), lambda, FeasibleSet::cube(m, -1.0, 1.0)?)?;
    let inst = h.to_brls()?;
    let class = classify_default(inst.noise())?;
    let sol = solve_inner(&inst, x, &class, InnerPolicy::Exact).map_err(|e| match e {
        Error::TooLarge { n, limit } => Error::Unsupported(format!(
            "worst-case error needs an exact inner solve; {n} noise columns exceed the enumeration limit {limit} for {} C",
            class.verdict
        )),
        e => e,
    })?;
    Ok(sol.value)
}

/// Leading eigenvector of `(1/r) Σ b_i a_i a_iᵀ`, scaled by `√mean(b)`.
pub fn spectral_init(a: &Matrix<f64>, b: &[f64]) -> Vec<f64> {
    let (r, m) = (a.rows(), a.cols());
    let mut y = Matrix::zeros(m, m);
    for i in 0..r {
        let row = a.row(i);
        for p in 0..m {
            for q in 0..m {
                y.set(p, q, y.get(p, q) + b[i] * row[p] * row[q] / r as f64);
            }
        }
    }
    let (vals, vecs) = symmetric_eigen(&y);
    let top = (0..m).fold(0, |best, k| if vals[k] > vals[best] { k } else { best });
    let scale = (b.iter().sum::<f64>() / r as f64).max(0.0).sqrt();
    vecs.column(top).iter().map(|v| v * scale).collect()
}

/// Projected (proximal, when `l1 > 0`) gradient with backtracking on
/// `½‖F̂(x)‖² + l1·‖x‖₁` over a box symmetric about 0.
pub fn fit_phase_baseline(
    residual: &ResidualMap<f64>,
    feasible: &FeasibleSet<f64>,
    x0: &[f64],
    l1: f64,
    max_iter: usize,
) -> Vec<f64> {
    let objective = |x: &[f64]| 0.5 * norm_sq(&residual.eval(x)) + l1 * x.iter().map(|v| v.abs()).sum::<f64>();
    let prox = |v: Vec<f64>, t: f64| -> Vec<f64> {
        let shrunk: Vec<f64> = v.iter().map(|&x| x.signum() * (x.abs() - t * l1).max(0.0)).collect();
        feasible.project(&shrunk)
    };
    let mut x = feasible.project(x0);
    let mut t = 1.0;
    let mut fx = objective(&x);
    for _ in 0..max_iter {
        let f = residual.eval(&x);
        let g = residual.jacobian_tr_times(&x, &f);
        let smooth = 0.5 * norm_sq(&f);
        let mut accepted = None;
        for _ in 0..60 {
            let cand = prox(x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect(), t);
            let d: Vec<f64> = cand.iter().zip(&x).map(|(c, xi)| c - xi).collect();
            let model = smooth + d.iter().zip(&g).map(|(di, gi)| di * gi).sum::<f64>() + norm_sq(&d) / (2.0 * t);
            if 0.5 * norm_sq(&residual.eval(&cand)) <= model {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let Some(cand) = accepted else { break };
        let moved = distance(&cand, &x);
        let fc = objective(&cand);
        x = cand;
        fx = fx.min(fc);
        if moved / t <= 1e-10 * (1.0 + fx) {
            break;
        }
        t *= 1.5;
    }
    x
}

#[derive(Clone, Debug)]
pub struct PhaseTrial {
    pub x_ls: Vec<f64>,
    pub x_lasso: Vec<f64>,
    pub x_rls: Vec<f64>,
    /// `E_λ` of LS, LASSO and RLS per grid `λ`.
    pub errors: Vec<[f64; 3]>,
    pub trace: Vec<TraceEntry<f64>>,
}

/// One trial: fits the three models and evaluates them on the `λ` grid.
pub fn run_phase_trial(
    cfg: &PhaseConfig,
    shape: NoiseShape,
    delta: f64,
    seed: u64,
    stream: u64,
    record_trace: bool,
) -> Result<PhaseTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let data = gen_phase(cfg, shape, delta, &mut rng)?;
    let residual = data.residual()?;
    let x_init = spectral_init(&data.a, &data.intensities);
    let x_ls = fit_phase_baseline(&residual, &data.feasible, &x_init, 0.0, cfg.baseline_iterations);
    let x_lasso = fit_phase_baseline(&residual, &data.feasible, &x_init, cfg.lasso_weight, cfg.baseline_iterations);

    let h = HrlsInstance::new(residual.clone(), data.c.clone(), delta, data.feasible.clone())?;
    let inst = h.to_brls()?;
    let step = match cfg.rls_step {
        Some(s) => s,
        None => {
            let j = inst.residual().jacobian(&x_ls).spectral_norm_bound();
            if j > 0.0 {
                0.5 / (j * j)
            } else {
                1e-3
            }
        }
    };
    let mut run = NonlinearRunConfig::new(delta, seed ^ stream);
    run.iterations = Some(cfg.rls_iterations);
    run.step = Some(step);
    run.delta = Some(0.0);
    run.x0 = Some(x_ls.clone());
    run.inner = InnerPolicy::Exact;
    run.record_trace = record_trace;
    let rep = pg_nonlinear(&inst, &run)?;
    let x_rls = rep.x_hat;

    let errors = cfg
        .lambdas
        .iter()
        .map(|&l| {
            Ok([
                worst_case_error(&residual, &data.c, &x_ls, l)?,
                worst_case_error(&residual, &data.c, &x_lasso, l)?,
                worst_case_error(&residual, &data.c, &x_rls, l)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseTrial {
        x_ls,
        x_lasso,
        x_rls,
        errors,
        trace: rep.trace,
    })
}

/// `param` string of one `(shape, δ, λ)` cell.
pub fn phase_param(shape: NoiseShape, delta: f64, lambda: f64) -> String {
    format!("shape={shape};delta={delta};lambda={lambda}")
}

/// Output of [`run_phase`]: the table plus per-trial traces when requested,
/// keyed `(shape, delta, trial)`.
pub type TraceKey = (NoiseShape, f64, usize);

#[derive(Clone, Debug)]
pub struct PhaseOutput {
    pub table: ResultTable,
    pub traces: Vec<(TraceKey, Vec<TraceEntry<f64>>)>,
}

/// Runs all trials for every shape and `δ` and tabulates, per grid `λ`,
/// the mean of `E_λ` for each model and the mean differences
/// `Δ_ls = E_λ(x_ls) − E_λ(x_rls)` and `Δ_lasso = E_λ(x_lasso) − E_λ(x_rls)`.
///
/// Trial `t` of cell `(s, d)` uses seed `seed ^ t` and ChaCha stream
/// `s·|deltas| + d`.
pub fn run_phase(cfg: &PhaseConfig, record_trace: bool) -> Result<PhaseOutput> {
    cfg.validate()?;
    let nd = cfg.deltas.len();
    let jobs: Vec<(usize, usize, usize)> = (0..cfg.c_shapes.len())
        .flat_map(|s| (0..nd).flat_map(move |d| (0..cfg.trials).map(move |t| (s, d, t))))
        .collect();
    let trials: Vec<Result<PhaseTrial>> = jobs
        .par_iter()
        .map(|&(s, d, t)| {
            run_phase_trial(
                cfg,
                cfg.c_shapes[s],
                cfg.deltas[d],
                cfg.seed ^ t as u64,
                (s * nd + d) as u64,
                record_trace,
            )
        })
        .collect();

    let mut table = ResultTable::default();
    let mut traces = Vec::new();
    for (s, &shape) in cfg.c_shapes.iter().enumerate() {
        for (d, &delta) in cfg.deltas.iter().enumerate() {
            let base = (s * nd + d) * cfg.trials;
            let cell = &trials[base..base + cfg.trials];
            let ok: Vec<&PhaseTrial> = cell.iter().filter_map(|t| t.as_ref().ok()).collect();
            for (t, res) in cell.iter().enumerate() {
                if let Err(e) = res {
                    table.push_error("RLS", &format!("shape={shape};delta={delta};trial={t}"), &e.to_string());
                }
            }
            if record_trace {
                for (t, res) in cell.iter().enumerate() {
                    if let Ok(tr) = res {
                        traces.push(((shape, delta, t), tr.trace.clone()));
                    }
                }
            }
            if ok.is_empty() {
                continue;
            }
            let count = ok.len() as f64;
            let mut first_positive = [None, None];
            for (li, &lambda) in cfg.lambdas.iter().enumerate() {
                let param = phase_param(shape, delta, lambda);
                let mean = |f: &dyn Fn(&[f64; 3]) -> f64| ok.iter().map(|t| f(&t.errors[li])).sum::<f64>() / count;
                let e = [mean(&|e| e[0]), mean(&|e| e[1]), mean(&|e| e[2])];
                let d_ls = mean(&|e| e[0] - e[2]);
                let d_lasso = mean(&|e| e[1] - e[2]);
                table.push("LS", &param, "worst_case_error", e[0]);
                table.push("LASSO", &param, "worst_case_error", e[1]);
                table.push("RLS", &param, "worst_case_error", e[2]);
                table.push("LS", &param, "delta_vs_rls", d_ls);
                table.push("LASSO", &param, "delta_vs_rls", d_lasso);
                for (k, v) in [d_ls, d_lasso].into_iter().enumerate() {
                    if v > 0.0 && first_positive[k].is_none() {
                        first_positive[k] = Some(lambda);
                    }
                }
            }
            let param = format!("shape={shape};delta={delta}");
            for (k, model) in ["LS", "LASSO"].into_iter().enumerate() {
                if let Some(l) = first_positive[k] {
                    table.push(model, &param, "first_positive_lambda", l);
                }
            }
            table.push("RLS", &param, "trials", count);
        }
    }
    Ok(PhaseOutput { table, traces })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_case_error_without_noise_budget() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let f = ResidualMap::phase_retrieval(a, vec![1.0, 0.0, 2.0]).unwrap();
        let c = Matrix::identity(3);
        let x = [0.5, -0.3];
        let v = worst_case_error(&f, &c, &x, 0.0).unwrap();
        assert!((v - 0.5 * norm_sq(&f.eval(&x))).abs() < 1e-15);
    }

    #[test]
    fn worst_case_error_orthogonal_closed_form() {
        let a = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let f = ResidualMap::phase_retrieval(a, vec![1.0, 0.4, 2.0]).unwrap();
        let c = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5], vec![0.0, 0.0]]).unwrap();
        let x = [0.7, -0.2];
        for lambda in [0.01, 0.1, 0.2] {
            let h = HrlsInstance::new(f.clone(), c.clone(), lambda, FeasibleSet::cube(2, -1.0, 1.0).unwrap()).unwrap();
            let closed = crate::inner::orthogonal_closed_form(&h, &x).unwrap();
            assert!((worst_case_error(&f, &c, &x, lambda).unwrap() - closed).abs() < 1e-9);
        }
    }

    #[test]
    fn spectral_init_recovers_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian_matrix(400, 4, 1.0, &mut rng);
        let x = [1.0, -0.5, 0.0, 0.3];
        let b: Vec<f64> = a.matvec(&x).iter().map(|v| v * v).collect();
        let x0 = spectral_init(&a, &b);
        let cos = crate::linalg::dot(&x0, &x).abs() / (crate::linalg::norm(&x0) * crate::linalg::norm(&x));
        assert!(cos > 0.9, "{cos}");
    }
}
