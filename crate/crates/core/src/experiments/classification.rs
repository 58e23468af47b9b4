//! Classification under corrupted labels: least squares, LASSO and the
//! robust model with full or partial knowledge of the corrupted indices.
//!
//! Data come from a planted linear model. Features are `s·z` with
//! `z ~ N(0, I)` plus a constant bias column `s_b`; the true label is
//! `1{zᵀw > 0}` for a Gaussian `w`, so `x_true = (w/s, 0.5/s_b)` reproduces
//! it by thresholding `A x_true` at 0.5. Points closer than `margin` (in
//! units of `‖w‖`) to the decision boundary are redrawn, so the clean
//! problem is separable with a gap.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generators::gaussian_vector;
use crate::error::{Error, Result};
use crate::inner::InnerPolicy;
use crate::io::ResultTable;
use crate::linalg::{cholesky_solve, dot, norm, Matrix};
use crate::outer::{pg_linear, LinearRunConfig};
use crate::problem::{FeasibleSet, LabelUncertaintyModel, ResidualMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassificationConfig {
    pub seed: u64,
    /// Number of training points.
    pub r: usize,
    /// Number of features, bias column included.
    pub m: usize,
    pub rhos: Vec<f64>,
    /// Fraction of the flipped indices the partial-knowledge model is told
    /// about.
    pub frac_known: f64,
    pub r_test: usize,
    /// Target accuracy of the robust solves; only used when `iterations`
    /// is unset.
    pub eps: f64,
    /// Iteration count of the robust solves.
    pub iterations: Option<u64>,
    /// Independent repetitions, with seeds `seed ^ repeat`.
    pub repeats: usize,
    pub lasso_weight: f64,
    pub feature_scale: f64,
    pub bias_scale: f64,
    pub margin: f64,
    /// Half-width of the box `X = [−R, R]^m` of the robust models.
    pub box_radius: f64,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            r: 500,
            m: 20,
            rhos: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            frac_known: 0.7,
            r_test: 1000,
            eps: 0.1,
            iterations: Some(20_000),
            repeats: 5,
            lasso_weight: 1.0,
            feature_scale: 0.1,
            bias_scale: 0.15,
            margin: 0.1,
            box_radius: 100.0,
        }
    }
}

impl ClassificationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.m < 2 {
            return bad("m must be at least 2 (features plus bias)");
        }
        if self.r == 0 || self.r_test == 0 {
            return bad("r and r_test must be positive");
        }
        if self.rhos.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return bad("every rho must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.frac_known) {
            return bad("frac_known must lie in [0, 1]");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if !(self.feature_scale > 0.0 && self.bias_scale > 0.0 && self.box_radius > 0.0) {
            return bad("feature_scale, bias_scale and box_radius must be positive");
        }
        if !(0.0..3.0).contains(&self.margin) {
            return bad("margin must lie in [0, 3)");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ClassificationData {
    pub a: Matrix<f64>,
    /// Observed (possibly flipped) training labels.
    pub labels: Vec<bool>,
    pub labels_clean: Vec<bool>,
    /// Sorted indices of the flipped labels.
    pub flipped: Vec<usize>,
    /// Sorted subset of `flipped` known to the partial-knowledge model.
    pub known: Vec<usize>,
    pub a_test: Matrix<f64>,
    pub labels_test: Vec<bool>,
    pub x_true: Vec<f64>,
}

/// `⌈ρ r⌉`, robust to `ρ r` landing a rounding error above an integer.
pub fn flip_count(rho: f64, r: usize) -> usize {
    let v = rho * r as f64;
    ((v - 1e-9 * v.max(1.0)).ceil().max(0.0) as usize).min(r)
}

fn draw_points<R: Rng + ?Sized>(
    count: usize,
    w: &[f64],
    cfg: &ClassificationConfig,
    rng: &mut R,
) -> (Matrix<f64>, Vec<bool>) {
    let wn = norm(w);
    let mut data = Vec::with_capacity(count * cfg.m);
    let mut labels = Vec::with_capacity(count);
    while labels.len() < count {
        let z = gaussian_vector(w.len(), 1.0, rng);
        let s = dot(&z, w);
        if s.abs() < cfg.margin * wn {
            continue;
        }
        data.extend(z.iter().map(|v| cfg.feature_scale * v));
        data.push(cfg.bias_scale);
        labels.push(s > 0.0);
    }
    (Matrix::from_vec(count, cfg.m, data).expect("sizes match"), labels)
}

/// Training and test data for one noise ratio. Deterministic in
/// `(cfg, rho, seed)`.
pub fn gen_classification(cfg: &ClassificationConfig, rho: f64, seed: u64) -> Result<ClassificationData> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Config(format!("rho must lie in [0, 1], got {rho}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = gaussian_vector(cfg.m - 1, 1.0, &mut rng);
    let (a, labels_clean) = draw_points(cfg.r, &w, cfg, &mut rng);
    let (a_test, labels_test) = draw_points(cfg.r_test, &w, cfg, &mut rng);

    let flips = flip_count(rho, cfg.r);
    let mut flipped = sample(&mut rng, cfg.r, flips).into_vec();
    let n_known = (cfg.frac_known * flips as f64).round() as usize;
    let mut known: Vec<usize> = sample(&mut rng, flips, n_known)
        .into_iter()
        .map(|k| flipped[k])
        .collect();
    flipped.sort_unstable();
    known.sort_unstable();
    let mut labels = labels_clean.clone();
    for &i in &flipped {
        labels[i] = !labels[i];
    }
    let mut x_true: Vec<f64> = w.iter().map(|v| v / cfg.feature_scale).collect();
    x_true.push(0.5 / cfg.bias_scale);
    Ok(ClassificationData {
        a,
        labels,
        labels_clean,
        flipped,
        known,
        a_test,
        labels_test,
        x_true,
    })
}

fn as_real(labels: &[bool]) -> Vec<f64> {
    labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Least squares by the normal equations.
pub fn fit_least_squares(a: &Matrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    cholesky_solve(&a.gram(), &a.tr_matvec(b))
        .ok_or_else(|| Error::Invalid("normal equations are singular".into()))
}

/// LASSO `½‖Ax − b‖² + λ‖x‖₁` by proximal gradient, stopped when the
/// gradient-map norm drops to `tol`.
pub fn fit_lasso(a: &Matrix<f64>, b: &[f64], lambda: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let lip = a.spectral_norm_bound().powi(2);
    if lip == 0.0 {
        return Ok(vec![0.0; a.cols()]);
    }
    let t = 1.0 / lip;
    let mut x = vec![0.0; a.cols()];
    for _ in 0..max_iter {
        let mut resid = a.matvec(&x);
        for (ri, bi) in resid.iter_mut().zip(b) {
            *ri -= bi;
        }
        let g = a.tr_matvec(&resid);
        let next: Vec<f64> = x
            .iter()
            .zip(&g)
            .map(|(xi, gi)| {
                let v = xi - t * gi;
                v.signum() * (v.abs() - t * lambda).max(0.0)
            })
            .collect();
        let step: f64 = x.iter().zip(&next).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt() / t;
        x = next;
        if step <= tol {
            return Ok(x);
        }
    }
    Err(Error::Invalid(format!(
        "LASSO did not reach gradient-map norm {tol:e} in {max_iter} iterations"
    )))
}

/// Robust fit with the given indices declared as possibly flipped.
pub fn fit_robust(
    data: &ClassificationData,
    suspects: &[usize],
    cfg: &ClassificationConfig,
) -> Result<Vec<f64>> {
    let m = data.a.cols();
    let model = LabelUncertaintyModel {
        prediction: ResidualMap::affine(data.a.clone(), vec![0.0; data.a.rows()])?,
        labels: data.labels.clone(),
        suspects: suspects.to_vec(),
        feasible: FeasibleSet::cube(m, -cfg.box_radius, cfg.box_radius)?,
    };
    let inst = model.to_brls()?;
    let mut run = LinearRunConfig::new(cfg.eps);
    run.iterations = cfg.iterations;
    run.inner = InnerPolicy::Auto;
    run.record_trace = false;
    Ok(pg_linear(&inst, &run)?.x_hat)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn accuracy(&self) -> f64 {
        let total = self.tp + self.fp + self.tn + self.fn_;
        if total == 0 {
            return 1.0;
        }
        (self.tp + self.tn) as f64 / total as f64
    }
}

/// Thresholds `A x` at 0.5.
pub fn predict(a: &Matrix<f64>, x: &[f64]) -> Vec<bool> {
    a.matvec(x).into_iter().map(|v| v > 0.5).collect()
}

pub fn confusion(pred: &[bool], truth: &[bool]) -> Confusion {
    let mut c = Confusion::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

pub fn model_names(cfg: &ClassificationConfig) -> [String; 4] {
    [
        "LS".into(),
        "LASSO".into(),
        "RLS(100%C)".into(),
        format!("RLS({}%C)", (cfg.frac_known * 100.0).round()),
    ]
}

type Outcome = Vec<Result<Confusion>>;

fn run_one(cfg: &ClassificationConfig, rho: f64, seed: u64) -> Result<Outcome> {
    let data = gen_classification(cfg, rho, seed)?;
    let b = as_real(&data.labels);
    let eval = |x: Result<Vec<f64>>| x.map(|x| confusion(&predict(&data.a_test, &x), &data.labels_test));
    Ok(vec![
        eval(fit_least_squares(&data.a, &b)),
        eval(fit_lasso(&data.a, &b, cfg.lasso_weight, 1e-8, 2_000_000)),
        eval(fit_robust(&data, &data.flipped, cfg)),
        eval(fit_robust(&data, &data.known, cfg)),
    ])
}

/// Runs every `(rho, repeat)` pair and tabulates test accuracy and confusion
/// counts per model: one row per repeat (`param = rho=…;repeat=…`) and the
/// mean accuracy and summed counts per `rho` (`param = rho=…`).
pub fn run_classification(cfg: &ClassificationConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.rhos.len())
        .flat_map(|i| (0..cfg.repeats).map(move |k| (i, k)))
        .collect();
    let outcomes: Vec<Result<Outcome>> = jobs
        .par_iter()
        .map(|&(i, k)| run_one(cfg, cfg.rhos[i], cfg.seed ^ k as u64))
        .collect();
    let names = model_names(cfg);
    let mut table = ResultTable::default();
    for (i, &rho) in cfg.rhos.iter().enumerate() {
        let param = format!("rho={rho}");
        for (mi, name) in names.iter().enumerate() {
            let mut sum = Confusion::default();
            let mut acc = 0.0;
            let mut ok = 0usize;
            for k in 0..cfg.repeats {
                let rep_param = format!("{param};repeat={k}");
                let res = match &outcomes[i * cfg.repeats + k] {
                    Ok(models) => models[mi].as_ref().map_err(|e| e.to_string()),
                    Err(e) => Err(e.to_string()),
                };
                match res {
                    Ok(c) => {
                        table.push(name, &rep_param, "accuracy", c.accuracy());
                        sum.tp += c.tp;
                        sum.fp += c.fp;
                        sum.tn += c.tn;
                        sum.fn_ += c.fn_;
                        acc += c.accuracy();
                        ok += 1;
                    }
                    Err(e) => table.push_error(name, &rep_param, &e),
                }
            }
            if ok > 0 {
                table.push(name, &param, "accuracy", acc / ok as f64);
                table.push(name, &param, "tp", sum.tp as f64);
                table.push(name, &param, "fp", sum.fp as f64);
                table.push(name, &param, "tn", sum.tn as f64);
                table.push(name, &param, "fn", sum.fn_ as f64);
            }
        }
    }
    Ok(table)
}
