//! Outer minimization loops and solution certificates.
//!
//! [`pg_linear`] runs projected subgradient steps of size `K^{-1/2}` on
//! `x ↦ Θ(x, y_k)` and returns the averaged iterate; [`pg_nonlinear`] uses a
//! fixed step `μ` and returns an iterate drawn uniformly at random.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inner::{solve_inner, InnerMethod, InnerPolicy, InnerSolution};
use crate::linalg::{axpy, distance, norm};
use crate::modularity::{classify_default, ModularityClass, Verdict};
use crate::oracle::{self, GridSpec};
use crate::problem::BrlsInstance;
use crate::scalar::Scalar;

/// Largest iteration count derived from theory that a run will accept;
/// beyond this the caller has to pass an explicit count.
pub const MAX_DERIVED_ITERATIONS: u64 = 1 << 40;

#[derive(Clone, Debug)]
pub struct LinearRunConfig<T> {
    pub eps: T,
    /// `K`; derived by [`iteration_count`] when `None`.
    pub iterations: Option<u64>,
    /// Starting point; the center of `X` when `None`.
    pub x0: Option<Vec<T>>,
    pub inner: InnerPolicy,
    /// Keep the per-iteration trace in the report.
    pub record_trace: bool,
}

impl<T: Scalar> LinearRunConfig<T> {
    pub fn new(eps: T) -> Self {
        Self {
            eps,
            iterations: None,
            x0: None,
            inner: InnerPolicy::Auto,
            record_trace: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NonlinearRunConfig<T> {
    pub eps: T,
    /// `Δ ≥ φ(x0) − min φ`; `φ(x0)` when `None`.
    pub delta: Option<T>,
    /// Fixed step `μ`; `√(Δ / (L²ℓ(K+1)))` when `None`.
    pub step: Option<T>,
    /// `K`; `⌊64 L²ℓΔ / ε⁴⌋` when `None`.
    pub iterations: Option<u64>,
    pub seed: u64,
    pub x0: Option<Vec<T>>,
    /// Must resolve to an exact solver; `Auto` is treated as `Exact`.
    pub inner: InnerPolicy,
    pub record_trace: bool,
}

impl<T: Scalar> NonlinearRunConfig<T> {
    pub fn new(eps: T, seed: u64) -> Self {
        Self {
            eps,
            delta: None,
            step: None,
            iterations: None,
            seed,
            x0: None,
            inner: InnerPolicy::Exact,
            record_trace: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry<T> {
    pub k: u64,
    /// `Θ(x_k, y_k)`.
    pub theta: T,
    /// `φ(x_k)`, known when the inner solver is exact.
    pub phi: Option<T>,
}

/// Quality statement backed by theory for a run with default parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Guarantee<T> {
    /// `(x̂, ŷ)` is an `(α, ε)`-approximate minimax point.
    Minimax { alpha: T, eps: T },
    /// `E‖∇φ_{1/2ℓ}(x̂)‖ ≤ ε`.
    ExpectedStationarity { eps: T },
}

#[derive(Clone, Debug)]
pub struct OuterReport<T> {
    pub x_hat: Vec<T>,
    pub y_hat: Vec<bool>,
    /// `Θ(x̂, ŷ)`; equals `φ(x̂)` when the inner solver is exact.
    pub phi_estimate: T,
    pub inner_method: InnerMethod,
    pub trace: Vec<TraceEntry<T>>,
    pub quality: Option<Guarantee<T>>,
    pub rng_seed: Option<u64>,
    /// Index of the returned iterate (nonlinear runs).
    pub sampled_index: Option<u64>,
    pub iterations: u64,
    pub step: T,
    pub warnings: Vec<String>,
}

/// `K = ⌈((D² + L²) / (2ε))²⌉` for `γ = 1` and nine times that for
/// `γ = 1/3`, at least 1.
pub fn iteration_count<T: Scalar>(eps: T, d: T, l: T, gamma: T) -> Result<u64> {
    if !(eps > T::zero()) || !(d >= T::zero()) || !(l >= T::zero()) {
        return Err(Error::Invalid(format!(
            "iteration count needs eps > 0 and D, L ≥ 0 (got eps={eps}, D={d}, L={l})"
        )));
    }
    let g = gamma.to_f64_lossy();
    let factor = if (g - 1.0).abs() < 1e-12 {
        1.0
    } else if (g - 1.0 / 3.0).abs() < 1e-12 {
        9.0
    } else {
        return Err(Error::Invalid(format!(
            "no iteration rule for approximation factor {gamma}; expected 1 or 1/3"
        )));
    };
    let (eps, d, l) = (eps.to_f64_lossy(), d.to_f64_lossy(), l.to_f64_lossy());
    let base = (d * d + l * l) / (2.0 * eps);
    let v = factor * base * base;
    // absorb rounding in the operands so exact integers are not bumped up
    let k = (v * (1.0 - 1e-12)).ceil();
    if !k.is_finite() || k > MAX_DERIVED_ITERATIONS as f64 {
        return Err(Error::Invalid(format!(
            "derived iteration count {v:.3e} is too large; pass an explicit count"
        )));
    }
    Ok((k as u64).max(1))
}

/// Approximation factor the dispatch will deliver, if any.
fn planned_guarantee<T: Scalar>(class: &ModularityClass<T>, policy: InnerPolicy) -> Option<T> {
    let supermodular = matches!(class.verdict, Verdict::Acute | Verdict::Orthogonal);
    let third = T::one() / T::lit(3.0);
    match policy {
        InnerPolicy::BruteForce | InnerPolicy::Exact | InnerPolicy::MinCut => Some(T::one()),
        InnerPolicy::Auto if supermodular || class.verdict == Verdict::General => Some(T::one()),
        InnerPolicy::Auto => Some(third),
        InnerPolicy::DoubleGreedy => match class.verdict {
            Verdict::Orthogonal => Some(T::one()),
            Verdict::Obtuse => Some(third),
            _ => None,
        },
    }
}

fn start_point<T: Scalar>(inst: &BrlsInstance<T>, x0: &Option<Vec<T>>, warnings: &mut Vec<String>) -> Result<Vec<T>> {
    let set = inst.feasible();
    let Some(x0) = x0 else {
        return Ok(set.center());
    };
    if x0.len() != inst.m() {
        return Err(Error::Dimension(format!(
            "x0 has length {}, expected {}",
            x0.len(),
            inst.m()
        )));
    }
    let scale = T::one().max(set.max_norm());
    if set.contains(x0, T::lit(1e-12) * scale) {
        Ok(set.project(x0))
    } else {
        let p = set.project(x0);
        warnings.push(format!(
            "x0 lies outside X (distance {:.3e}); projected",
            distance(x0, &p).to_f64_lossy()
        ));
        Ok(p)
    }
}

fn trace_entry<T: Scalar>(k: u64, s: &InnerSolution<T>) -> TraceEntry<T> {
    TraceEntry {
        k,
        theta: s.value,
        phi: s.is_exact().then_some(s.value),
    }
}

/// Projected subgradient method for affine `F`:
/// `x_{k+1} = Proj_X(x_k − K^{-1/2} ∇_x Θ(x_k, y_k))` with `y_k` from the inner
/// solver, `x̂ = (1/K) Σ_{k<K} x_k` and `ŷ` from one inner solve at `x̂`.
pub fn pg_linear<T: Scalar>(inst: &BrlsInstance<T>, cfg: &LinearRunConfig<T>) -> Result<OuterReport<T>> {
    if !inst.residual().is_affine() {
        return Err(Error::Unsupported(
            "pg_linear needs an affine residual map; use pg_nonlinear".into(),
        ));
    }
    let class = classify_default(inst.noise())?;
    let gamma = planned_guarantee(&class, cfg.inner);
    let iterations = match cfg.iterations {
        Some(0) => return Err(Error::Invalid("iteration count must be positive".into())),
        Some(k) => k,
        None => {
            let gamma = gamma.ok_or_else(|| {
                Error::Unsupported(format!(
                    "no iteration rule for double greedy on {} noise; pass an explicit count",
                    class.verdict
                ))
            })?;
            let (l, _) = inst.lipschitz_estimates()?;
            iteration_count(cfg.eps, inst.feasible().diameter(), l, gamma)?
        }
    };
    let mut warnings = Vec::new();
    let mut x = start_point(inst, &cfg.x0, &mut warnings)?;
    let step = T::one() / T::from_u64(iterations).unwrap().sqrt();
    let m = inst.m();
    // Kahan-compensated running sum of the iterates
    let mut sum = vec![T::zero(); m];
    let mut comp = vec![T::zero(); m];
    let mut trace = Vec::with_capacity(if cfg.record_trace { iterations as usize } else { 0 });
    for k in 0..iterations {
        let sol = solve_inner(inst, &x, &class, cfg.inner)?;
        if cfg.record_trace {
            trace.push(trace_entry(k, &sol));
        }
        for i in 0..m {
            let yk = x[i] - comp[i];
            let t = sum[i] + yk;
            comp[i] = (t - sum[i]) - yk;
            sum[i] = t;
        }
        let g = inst.grad_x_binary(&x, &sol.y)?;
        axpy(-step, &g, &mut x);
        x = inst.feasible().project(&x);
    }
    let kf = T::from_u64(iterations).unwrap();
    let x_hat = inst.feasible().project(&sum.iter().map(|&s| s / kf).collect::<Vec<_>>());
    let sol = solve_inner(inst, &x_hat, &class, cfg.inner)?;
    let quality = match (cfg.iterations, gamma) {
        (None, Some(alpha)) => Some(Guarantee::Minimax { alpha, eps: cfg.eps }),
        _ => None,
    };
    Ok(OuterReport {
        x_hat,
        y_hat: sol.y,
        phi_estimate: sol.value,
        inner_method: sol.method,
        trace,
        quality,
        rng_seed: None,
        sampled_index: None,
        iterations,
        step,
        warnings,
    })
}

/// Projected gradient method with fixed step for differentiable `F`: runs
/// `x_0 … x_K` and returns an iterate drawn uniformly from them together
/// with its exact inner maximizer.
///
/// The draw is the `(K+2)`-th output of a `ChaCha8` stream seeded with
/// `cfg.seed`, so it does not depend on anything else the run does.
pub fn pg_nonlinear<T: Scalar>(inst: &BrlsInstance<T>, cfg: &NonlinearRunConfig<T>) -> Result<OuterReport<T>> {
    let policy = match cfg.inner {
        InnerPolicy::DoubleGreedy => {
            return Err(Error::Unsupported(
                "pg_nonlinear needs an exact inner solver; double greedy is not accepted".into(),
            ))
        }
        InnerPolicy::Auto => InnerPolicy::Exact,
        p => p,
    };
    if !(cfg.eps > T::zero()) {
        return Err(Error::Invalid(format!("eps must be positive, got {}", cfg.eps)));
    }
    let class = classify_default(inst.noise())?;
    let mut warnings = Vec::new();
    let x0 = start_point(inst, &cfg.x0, &mut warnings)?;
    let defaults_used = cfg.delta.is_none() && cfg.step.is_none() && cfg.iterations.is_none();
    let constants = if cfg.step.is_some() && cfg.iterations.is_some() {
        None
    } else {
        Some(inst.lipschitz_estimates()?)
    };
    let delta = match cfg.delta {
        Some(d) if d >= T::zero() => d,
        Some(d) => return Err(Error::Invalid(format!("Δ must be nonnegative, got {d}"))),
        None => solve_inner(inst, &x0, &class, policy)?.value,
    };
    let iterations = match cfg.iterations {
        Some(k) => k,
        None => {
            let (l, ell) = constants.unwrap();
            let v = (T::lit(64.0) * l * l * ell * delta / cfg.eps.powi(4)).floor().to_f64_lossy();
            if !v.is_finite() || v > MAX_DERIVED_ITERATIONS as f64 {
                return Err(Error::Invalid(format!(
                    "derived iteration count {v:.3e} is too large; pass an explicit count"
                )));
            }
            v as u64
        }
    };
    let step = match cfg.step {
        Some(mu) if mu > T::zero() => mu,
        Some(mu) => return Err(Error::Invalid(format!("step must be positive, got {mu}"))),
        None => {
            let (l, ell) = constants.unwrap();
            let denom = l * l * ell * T::from_u64(iterations + 1).unwrap();
            if denom > T::zero() {
                (delta / denom).sqrt()
            } else {
                T::zero()
            }
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_word_pos(2 * (iterations as u128 + 1));
    let index = rng.random_range(0..=iterations);

    let mut x = x0;
    let mut picked = None;
    let mut trace = Vec::with_capacity(if cfg.record_trace { iterations as usize + 1 } else { 0 });
    for k in 0..=iterations {
        // iterates past the sampled one matter only for the trace
        if !cfg.record_trace && k > index {
            break;
        }
        let sol = solve_inner(inst, &x, &class, policy)?;
        if cfg.record_trace {
            trace.push(trace_entry(k, &sol));
        }
        if k < iterations {
            let g = inst.grad_x_binary(&x, &sol.y)?;
            let next = {
                let mut v = x.clone();
                axpy(-step, &g, &mut v);
                inst.feasible().project(&v)
            };
            if k == index {
                picked = Some((x, sol));
            }
            x = next;
        } else if k == index {
            picked = Some((x.clone(), sol));
        }
    }
    let (x_hat, sol) = picked.expect("sampled index lies in 0..=K");
    Ok(OuterReport {
        x_hat,
        y_hat: sol.y,
        phi_estimate: sol.value,
        inner_method: sol.method,
        trace,
        quality: defaults_used.then_some(Guarantee::ExpectedStationarity { eps: cfg.eps }),
        rng_seed: Some(cfg.seed),
        sampled_index: Some(index),
        iterations,
        step,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoreauEstimate<T> {
    /// `2ℓ‖x − prox(x)‖`.
    pub value: T,
    pub prox: Vec<T>,
    /// Final compass step of the proximal sub-solve; the computed prox is
    /// a local minimizer of the proximal objective up to this resolution.
    pub residual: T,
}

/// Estimates `‖∇φ_{1/2ℓ}(x)‖ = 2ℓ‖x − prox(x)‖` with
/// `prox(x) = argmin_{w∈X} φ(w) + ℓ‖w − x‖²`.
///
/// The proximal objective is strongly convex for `ℓ` at least the weak
/// convexity modulus of `φ`. It is minimized by projected subgradient
/// steps with weighted averaging from several starts, followed by a
/// compass search along coordinate and diagonal directions. `φ` is
/// evaluated exactly, so the instance must admit an exact inner solver.
pub fn moreau_grad_estimate<T: Scalar>(inst: &BrlsInstance<T>, x: &[T], ell: T) -> Result<MoreauEstimate<T>> {
    if !(ell > T::zero()) {
        return Err(Error::Invalid(format!("ℓ must be positive, got {ell}")));
    }
    if x.len() != inst.m() {
        return Err(Error::Dimension(format!(
            "x has length {}, expected {}",
            x.len(),
            inst.m()
        )));
    }
    let class = classify_default(inst.noise())?;
    let set = inst.feasible();
    let two = T::lit(2.0);
    let phi = |w: &[T]| solve_inner(inst, w, &class, InnerPolicy::Exact);
    let objective = |w: &[T]| -> Result<T> {
        let d = distance(w, x);
        Ok(phi(w)?.value + ell * d * d)
    };

    const SUBGRADIENT_STEPS: usize = 2000;
    let mut starts = vec![set.project(x), set.center()];
    starts.dedup();
    let mut best: Option<(T, Vec<T>)> = None;
    for start in starts {
        let mut w = start;
        let mut avg = w.clone();
        let mut weight = T::zero();
        for k in 0..SUBGRADIENT_STEPS {
            let sol = phi(&w)?;
            let mut g = inst.grad_x_binary(&w, &sol.y)?;
            for i in 0..g.len() {
                g[i] = g[i] + two * ell * (w[i] - x[i]);
            }
            let kf = T::from_usize(k).unwrap();
            let step = two / (ell * (kf + two));
            axpy(-step, &g, &mut w);
            w = set.project(&w);
            // weights proportional to k + 1
            let wk = kf + T::one();
            weight = weight + wk;
            for i in 0..w.len() {
                avg[i] = avg[i] + (w[i] - avg[i]) * wk / weight;
            }
        }
        for cand in [avg, w] {
            let v = objective(&cand)?;
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, cand));
            }
        }
    }
    let (mut value, mut w) = best.expect("at least one start");

    let m = w.len();
    let mut dirs: Vec<Vec<T>> = Vec::new();
    for i in 0..m {
        let mut e = vec![T::zero(); m];
        e[i] = T::one();
        dirs.push(e);
        for j in i + 1..m {
            for s in [T::one(), -T::one()] {
                let mut e = vec![T::zero(); m];
                e[i] = T::lit(std::f64::consts::FRAC_1_SQRT_2);
                e[j] = s * T::lit(std::f64::consts::FRAC_1_SQRT_2);
                dirs.push(e);
            }
        }
    }
    let scale = T::one().max(norm(&w));
    let mut h = T::lit(0.1) * scale.max(distance(&w, x));
    let floor = T::lit(1e-11) * scale;
    while h > floor {
        let mut improved = false;
        for d in &dirs {
            for s in [T::one(), -T::one()] {
                let mut cand = w.clone();
                axpy(s * h, d, &mut cand);
                let cand = set.project(&cand);
                let v = objective(&cand)?;
                if v < value {
                    value = v;
                    w = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            h = h / two;
        }
    }
    Ok(MoreauEstimate {
        value: two * ell * distance(x, &w),
        prox: w,
        residual: h,
    })
}

/// Grid-based certificate for `α·φ(x̂) ≤ Θ(x̂, ŷ) ≤ (1/α)·min_x φ(x) + ε`.
#[derive(Clone, Debug)]
pub struct Certificate<T> {
    pub alpha: T,
    pub eps: T,
    /// `α·φ(x̂)`.
    pub lower: T,
    /// `Θ(x̂, ŷ)`.
    pub value: T,
    /// `(1/α)·grid minimax + ε`.
    pub upper: T,
    pub grid_minimax: T,
    pub pitch: T,
    /// `L × covering radius`: the grid minimax exceeds the true minimax
    /// value by at most this much.
    pub grid_error: T,
    pub passed: bool,
}

/// Evaluates both inequalities of an `(α, ε)`-approximate minimax point with
/// `φ` by enumeration and `min φ` on `grid`. Desk scale only: `n ≤ 20`,
/// `m ≤ 3`.
pub fn check_approx_minimax<T: Scalar>(
    inst: &BrlsInstance<T>,
    x_hat: &[T],
    y_hat: &[bool],
    alpha: T,
    eps: T,
    grid: &GridSpec<T>,
) -> Result<Certificate<T>> {
    const MAX_M: usize = 3;
    if inst.m() > MAX_M {
        return Err(Error::TooLarge { n: inst.m(), limit: MAX_M });
    }
    if inst.n() > oracle::GRID_ENUM_LIMIT {
        return Err(Error::TooLarge {
            n: inst.n(),
            limit: oracle::GRID_ENUM_LIMIT,
        });
    }
    if !(alpha > T::zero() && alpha <= T::one()) || eps < T::zero() {
        return Err(Error::Invalid(format!("need 0 < α ≤ 1 and ε ≥ 0 (got α={alpha}, ε={eps})")));
    }
    let phi = oracle::phi_bruteforce(inst, x_hat)?;
    let value = inst.theta_binary(x_hat, y_hat)?;
    let mm = oracle::minimax_bruteforce(inst, grid)?;
    let grid_error = match inst.lipschitz_estimates() {
        Ok((l, _)) => l * grid.covering_radius(),
        Err(_) => T::infinity(),
    };
    let lower = alpha * phi;
    let upper = mm.value / alpha + eps;
    let slack = T::lit(64.0) * T::epsilon() * T::one().max(phi.abs()).max(mm.value.abs());
    Ok(Certificate {
        alpha,
        eps,
        lower,
        value,
        upper,
        grid_minimax: mm.value,
        pitch: grid.pitch,
        grid_error,
        passed: lower <= value + slack && value <= upper + slack,
    })
}
