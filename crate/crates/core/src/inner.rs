//! Inner maximization `max_{y∈{0,1}^n} Θ(x, y)`.
//!
//! All solvers work on the quadratic form `½yᵀΣy − uᵀy + c0` and report the
//! value of the returned `y` recomputed from the residual, so
//! `solution.value == Θ(x, solution.y)` up to rounding.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{norm_l1, norm_sq, Matrix};
use crate::maxflow::FlowNetwork;
use crate::modularity::{classify_default, ModularityClass, Verdict};
use crate::problem::{BrlsInstance, HrlsInstance};
use crate::scalar::Scalar;

/// Largest `n` for exhaustive enumeration.
pub const BRUTE_FORCE_LIMIT: usize = 25;

/// Relative saturation threshold of the max-flow solver.
const CUT_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerMethod {
    BruteForce,
    MinCut,
    DoubleGreedy,
    OrthogonalClosedForm,
}

impl fmt::Display for InnerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BruteForce => "brute-force",
            Self::MinCut => "min-cut",
            Self::DoubleGreedy => "double-greedy",
            Self::OrthogonalClosedForm => "orthogonal-closed-form",
        })
    }
}

/// How [`solve_inner`] picks a method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InnerPolicy {
    /// Min-cut for acute/orthogonal `C`, double greedy for obtuse, brute
    /// force otherwise.
    #[default]
    Auto,
    /// Like `Auto`, but brute force instead of double greedy: always exact.
    Exact,
    BruteForce,
    MinCut,
    DoubleGreedy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolution<T> {
    pub y: Vec<bool>,
    pub value: T,
    pub method: InnerMethod,
    /// Approximation factor `γ` backed by theory for this method and class;
    /// `None` when none applies (double greedy on non-obtuse `C`).
    pub guarantee: Option<T>,
}

impl<T: Scalar> InnerSolution<T> {
    pub fn is_exact(&self) -> bool {
        self.guarantee == Some(T::one())
    }

    pub fn y_real(&self) -> Vec<T> {
        crate::problem::to_real(&self.y)
    }
}

fn finish<T: Scalar>(
    inst: &BrlsInstance<T>,
    x: &[T],
    y: Vec<bool>,
    method: InnerMethod,
    guarantee: Option<T>,
) -> Result<InnerSolution<T>> {
    let value = inst.theta_binary(x, &y)?;
    Ok(InnerSolution {
        y,
        value,
        method,
        guarantee,
    })
}

/// Exhaustive maximization by a Gray-code walk with `O(n)` incremental
/// updates. Ties go to the smallest `y` read as an integer with `y_1` the
/// least significant bit.
pub fn brute_force_max<T: Scalar>(inst: &BrlsInstance<T>, x: &[T]) -> Result<InnerSolution<T>> {
    let n = inst.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let q = Terms::new(inst, x)?;
    let y = gray_code_argmax(&q);
    finish(inst, x, y, InnerMethod::BruteForce, Some(T::one()))
}

/// `Σ`, `u` and `c0` of `Θ(x, ·)`, borrowing the cached Gram matrix.
struct Terms<'a, T> {
    sigma: &'a Matrix<T>,
    u: Vec<T>,
    c0: T,
}

impl<'a, T: Scalar> Terms<'a, T> {
    fn new(inst: &'a BrlsInstance<T>, x: &[T]) -> Result<Self> {
        if x.len() != inst.m() {
            return Err(Error::Dimension(format!(
                "x has length {}, expected {}",
                x.len(),
                inst.m()
            )));
        }
        let f = inst.residual().eval(x);
        Ok(Self {
            sigma: inst.gram(),
            u: inst.noise().tr_matvec(&f),
            c0: T::lit(0.5) * norm_sq(&f),
        })
    }

    fn dim(&self) -> usize {
        self.u.len()
    }

    fn value_binary(&self, y: &[bool]) -> T {
        let mut v = self.c0;
        for i in (0..y.len()).filter(|&i| y[i]) {
            let row = self.sigma.row(i);
            let quad: T = (0..y.len()).filter(|&j| y[j]).map(|j| row[j]).sum();
            v = v + T::lit(0.5) * quad - self.u[i];
        }
        v
    }
}

fn gray_code_argmax<T: Scalar>(q: &Terms<'_, T>) -> Vec<bool> {
    let n = q.dim();
    let half = T::lit(0.5);
    let mut y = vec![false; n];
    // sy = Σ y
    let mut sy = vec![T::zero(); n];
    let mut mask = 0u64;
    let mut value = q.c0;
    let (mut best_value, mut best_mask) = (value, 0u64);
    for step in 1u64..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        let sii = q.sigma.get(i, i);
        let sign = if y[i] {
            value = value - sy[i] + half * sii + q.u[i];
            -T::one()
        } else {
            value = value + sy[i] + half * sii - q.u[i];
            T::one()
        };
        y[i] = !y[i];
        mask ^= 1 << i;
        for (s, &c) in sy.iter_mut().zip(q.sigma.row(i)) {
            *s = *s + sign * c;
        }
        if step % 4096 == 0 {
            value = q.value_binary(&y);
        }
        if value > best_value || (value == best_value && mask < best_mask) {
            best_value = value;
            best_mask = mask;
        }
    }
    (0..n).map(|j| best_mask >> j & 1 == 1).collect()
}

/// Exact maximization for acute (or orthogonal) `C` via an s-t minimum cut.
///
/// Maximizing `Θ(x, ·)` is minimizing
/// `f(y) = Σ_i (u_i − ½Σ_ii) y_i − Σ_{i<j} Σ_ij y_i y_j`,
/// a submodular quadratic when every `Σ_ij ≥ 0`. Node `i` on the source side
/// of the cut means `y_i = 1`.
pub fn mincut_supermodular_max<T: Scalar>(inst: &BrlsInstance<T>, x: &[T]) -> Result<InnerSolution<T>> {
    let class = classify_default(inst.noise())?;
    mincut_with_class(inst, x, &class)
}

fn mincut_with_class<T: Scalar>(
    inst: &BrlsInstance<T>,
    x: &[T],
    class: &ModularityClass<T>,
) -> Result<InnerSolution<T>> {
    if !matches!(class.verdict, Verdict::Acute | Verdict::Orthogonal) {
        return Err(Error::Unsupported(format!(
            "min-cut needs an acute noise matrix, got {}; use double greedy or brute force",
            class.verdict
        )));
    }
    let q = Terms::new(inst, x)?;
    let y = mincut_argmax(&q);
    finish(inst, x, y, InnerMethod::MinCut, Some(T::one()))
}

fn mincut_argmax<T: Scalar>(q: &Terms<'_, T>) -> Vec<bool> {
    let n = q.dim();
    if n == 0 {
        return Vec::new();
    }
    let (s, t) = (n, n + 1);
    let mut net = FlowNetwork::new(n + 2);
    let mut unary: Vec<f64> = (0..n)
        .map(|i| q.u[i].to_f64_lossy() - 0.5 * q.sigma.get(i, i).to_f64_lossy())
        .collect();
    for i in 0..n {
        let row = q.sigma.row(i);
        for j in i + 1..n {
            let w = row[j].to_f64_lossy();
            if w > 0.0 {
                // −w y_i y_j = −w y_i + w y_i (1 − y_j)
                unary[i] -= w;
                net.add_edge(i, j, w);
            }
        }
    }
    for (i, &a) in unary.iter().enumerate() {
        if a > 0.0 {
            net.add_edge(i, t, a);
        } else if a < 0.0 {
            net.add_edge(s, i, -a);
        }
    }
    net.max_flow(s, t, CUT_EPS);
    let side = net.source_side(s);
    side[..n].to_vec()
}

/// One step of the double greedy pass: marginal gains `a` (raise the lower
/// iterate) and `b` (lower the upper iterate) at coordinate `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreedyStep<T> {
    pub k: usize,
    pub a: T,
    pub b: T,
}

/// Deterministic double greedy in natural coordinate order; `a ≥ b` sets the
/// coordinate to 1.
pub fn double_greedy<T: Scalar>(inst: &BrlsInstance<T>, x: &[T]) -> Result<InnerSolution<T>> {
    let class = classify_default(inst.noise())?;
    Ok(double_greedy_traced(inst, x, &class)?.0)
}

/// [`double_greedy`] returning the per-step gains as well.
pub fn double_greedy_traced<T: Scalar>(
    inst: &BrlsInstance<T>,
    x: &[T],
    class: &ModularityClass<T>,
) -> Result<(InnerSolution<T>, Vec<GreedyStep<T>>)> {
    let q = Terms::new(inst, x)?;
    let (y, steps) = greedy_pass(&q);
    let guarantee = match class.verdict {
        Verdict::Orthogonal => Some(T::one()),
        Verdict::Obtuse => Some(T::one() / T::lit(3.0)),
        _ => None,
    };
    Ok((finish(inst, x, y, InnerMethod::DoubleGreedy, guarantee)?, steps))
}

fn greedy_pass<T: Scalar>(q: &Terms<'_, T>) -> (Vec<bool>, Vec<GreedyStep<T>>) {
    let n = q.dim();
    let half = T::lit(0.5);
    // lower iterate starts at 0, upper at 1; track Σ·lower and Σ·upper
    let mut s_lo = vec![T::zero(); n];
    let mut s_hi: Vec<T> = (0..n).map(|i| q.sigma.row(i).iter().copied().sum()).collect();
    let mut y = vec![false; n];
    let mut steps = Vec::with_capacity(n);
    for k in 0..n {
        let skk = q.sigma.get(k, k);
        let a = s_lo[k] + half * skk - q.u[k];
        let b = -s_hi[k] + half * skk + q.u[k];
        steps.push(GreedyStep { k, a, b });
        let col = q.sigma.row(k);
        if a >= b {
            y[k] = true;
            for (s, &c) in s_lo.iter_mut().zip(col) {
                *s = *s + c;
            }
        } else {
            for (s, &c) in s_hi.iter_mut().zip(col) {
                *s = *s - c;
            }
        }
    }
    (y, steps)
}

/// `max_{z∈[−δ,δ]^n} ½‖F̂(x) − Ĉz‖² = ½‖F̂(x)‖² + δ‖ĈᵀF̂(x)‖₁ + ½δ²‖Ĉ‖_F²`
/// for column-orthogonal `Ĉ`.
pub fn orthogonal_closed_form<T: Scalar>(h: &HrlsInstance<T>, x: &[T]) -> Result<T> {
    let class = classify_default(&h.noise)?;
    if class.verdict != Verdict::Orthogonal {
        return Err(Error::Unsupported(format!(
            "closed form needs column-orthogonal noise, got {}",
            class.verdict
        )));
    }
    if x.len() != h.residual.input_dim() {
        return Err(Error::Dimension(format!(
            "x has length {}, expected {}",
            x.len(),
            h.residual.input_dim()
        )));
    }
    let f = h.residual.eval(x);
    let half = T::lit(0.5);
    let frob = h.noise.frobenius_norm();
    Ok(half * norm_sq(&f) + h.delta * norm_l1(&h.noise.tr_matvec(&f)) + half * h.delta * h.delta * frob * frob)
}

/// Dispatches to a solver according to `class` and `policy`.
pub fn solve_inner<T: Scalar>(
    inst: &BrlsInstance<T>,
    x: &[T],
    class: &ModularityClass<T>,
    policy: InnerPolicy,
) -> Result<InnerSolution<T>> {
    let supermodular = matches!(class.verdict, Verdict::Acute | Verdict::Orthogonal);
    match policy {
        InnerPolicy::BruteForce => brute_force_max(inst, x),
        InnerPolicy::MinCut => mincut_with_class(inst, x, class),
        InnerPolicy::DoubleGreedy => Ok(double_greedy_traced(inst, x, class)?.0),
        InnerPolicy::Auto | InnerPolicy::Exact if supermodular => mincut_with_class(inst, x, class),
        InnerPolicy::Auto if class.verdict == Verdict::Obtuse => {
            Ok(double_greedy_traced(inst, x, class)?.0)
        }
        InnerPolicy::Auto | InnerPolicy::Exact => brute_force_max(inst, x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modularity::classify_default;
    use crate::oracle;
    use crate::problem::{FeasibleSet, ResidualMap};

    fn instance(cols: &[Vec<f64>]) -> BrlsInstance<f64> {
        let c = Matrix::from_columns(cols[0].len(), cols).unwrap();
        let m = c.rows();
        BrlsInstance::new(ResidualMap::identity(m), c, FeasibleSet::cube(m, -2.0, 2.0).unwrap()).unwrap()
    }

    #[test]
    fn brute_force_examples() {
        let inst = instance(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let s = brute_force_max(&inst, &[0.6, 0.2]).unwrap();
        assert_eq!(s.y, vec![false, true]);
        assert!((s.value - 0.5).abs() < 1e-15);

        let inst = instance(&[vec![1.0, 0.0], vec![1.0, 1.0]]);
        let s = brute_force_max(&inst, &[1.0, 1.0]).unwrap();
        assert_eq!(s.y, vec![false, false]);
        assert!((s.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn brute_force_without_noise() {
        let inst = BrlsInstance::new(
            ResidualMap::identity(2),
            Matrix::zeros(2, 0),
            FeasibleSet::cube(2, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let s = brute_force_max(&inst, &[0.6, 0.2]).unwrap();
        assert!(s.y.is_empty());
        assert!(f64::abs(s.value - 0.2) < 1e-15);
    }

    #[test]
    fn brute_force_tie_prefers_smallest_integer() {
        // Θ(x, y) = ½(x − y₁ − y₂)² at x = 1: y = (1,0) and (0,1) tie at 0 … and
        // y = (0,0), (1,1) tie at ½. Smallest integer among the maxima is 0.
        let inst = BrlsInstance::new(
            ResidualMap::identity(1),
            Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(),
            FeasibleSet::cube(1, -2.0, 2.0).unwrap(),
        )
        .unwrap();
        let s = brute_force_max(&inst, &[1.0]).unwrap();
        assert_eq!(s.y, vec![false, false]);
    }

    #[test]
    fn mincut_examples() {
        let inst = instance(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((mincut_supermodular_max(&inst, &[0.6, 0.2]).unwrap().value - 0.5).abs() < 1e-15);
        let inst = instance(&[vec![1.0, 0.0], vec![1.0, 1.0]]);
        assert!((mincut_supermodular_max(&inst, &[1.0, 1.0]).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mincut_refuses_obtuse() {
        let inst = instance(&[vec![1.0, 0.0], vec![-1.0, 1.0]]);
        assert!(matches!(mincut_supermodular_max(&inst, &[0.0, 0.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn mincut_picks_all_ones_when_every_marginal_is_nonnegative() {
        // u = CᵀF(x) ≤ 0 with nonnegative Σ: every marginal gain is ≥ 0
        let inst = instance(&[vec![1.0, 0.5, 0.0], vec![0.2, 1.0, 0.3], vec![0.0, 0.4, 1.0]]);
        let x = [-0.5, -0.4, -0.6];
        let s = mincut_supermodular_max(&inst, &x).unwrap();
        assert_eq!(s.y, vec![true; 3]);
        assert!((s.value - oracle::phi_bruteforce(&inst, &x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn double_greedy_hand_trace() {
        let inst = instance(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let class = classify_default(inst.noise()).unwrap();
        let (s, steps) = double_greedy_traced(&inst, &[0.6, 0.2], &class).unwrap();
        assert_eq!(s.y, vec![false, true]);
        assert!((s.value - 0.5).abs() < 1e-15);
        assert!((steps[0].a + 0.1).abs() < 1e-15 && (steps[0].b - 0.1).abs() < 1e-15);
        assert!((steps[1].a - 0.3).abs() < 1e-15 && (steps[1].b + 0.3).abs() < 1e-15);
        assert_eq!(s.guarantee, Some(1.0));
    }

    #[test]
    fn double_greedy_tie_sets_one() {
        // F(x) = x, C = I₁, x = ½: a = ½ − ½ = 0 and b = −1 + ½ + ½ = 0
        let inst = instance(&[vec![1.0]]);
        let s = double_greedy(&inst, &[0.5]).unwrap();
        assert_eq!(s.y, vec![true]);
    }

    #[test]
    fn double_greedy_obtuse_third_guarantee() {
        let inst = instance(&[vec![1.0, 0.0], vec![-1.0, 0.5]]);
        let mut state = 12345u64;
        for _ in 0..100 {
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
            };
            let x = [next(), next()];
            let s = double_greedy(&inst, &x).unwrap();
            assert_eq!(s.guarantee, Some(1.0 / 3.0));
            assert!(s.value >= oracle::phi_bruteforce(&inst, &x).unwrap() / 3.0);
        }
    }

    #[test]
    fn closed_form_example() {
        let h = HrlsInstance::new(
            ResidualMap::identity(2),
            Matrix::identity(2),
            0.1,
            FeasibleSet::cube(2, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let v = orthogonal_closed_form(&h, &[0.6, 0.2]).unwrap();
        assert!(f64::abs(v - 0.29) < 1e-15);
        let b = h.to_brls().unwrap();
        assert!(f64::abs(oracle::phi_bruteforce(&b, &[0.6, 0.2]).unwrap() - 0.29) < 1e-15);
    }

    #[test]
    fn closed_form_zero_residual() {
        let c = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]]).unwrap();
        let h = HrlsInstance::new(ResidualMap::identity(2), c, 0.3, FeasibleSet::cube(2, -1.0, 1.0).unwrap()).unwrap();
        let v = orthogonal_closed_form(&h, &[0.0, 0.0]).unwrap();
        assert!(f64::abs(v - 0.5 * 4.25 * 0.09) < 1e-15);
    }

    #[test]
    fn closed_form_refuses_non_orthogonal() {
        let c = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let h = HrlsInstance::new(ResidualMap::identity(2), c, 0.3, FeasibleSet::cube(2, -1.0, 1.0).unwrap()).unwrap();
        assert!(matches!(orthogonal_closed_form(&h, &[0.0, 0.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn dispatch_rules() {
        let acute = instance(&[vec![1.0, 0.0], vec![1.0, 1.0]]);
        let class = classify_default(acute.noise()).unwrap();
        let s = solve_inner(&acute, &[0.1, 0.2], &class, InnerPolicy::Auto).unwrap();
        assert_eq!((s.method, s.guarantee), (InnerMethod::MinCut, Some(1.0)));

        let obtuse = instance(&[vec![1.0, 0.0], vec![-1.0, 1.0]]);
        let class = classify_default(obtuse.noise()).unwrap();
        let s = solve_inner(&obtuse, &[0.1, 0.2], &class, InnerPolicy::Auto).unwrap();
        assert_eq!((s.method, s.guarantee), (InnerMethod::DoubleGreedy, Some(1.0 / 3.0)));
        let s = solve_inner(&obtuse, &[0.1, 0.2], &class, InnerPolicy::Exact).unwrap();
        assert_eq!(s.method, InnerMethod::BruteForce);

        let cols: Vec<Vec<f64>> = (0..30)
            .map(|j| (0..3).map(|i| if (i + j) % 3 == 0 { -1.0 } else { 1.0 + j as f64 }).collect())
            .collect();
        let general = instance(&cols);
        let class = classify_default(general.noise()).unwrap();
        assert_eq!(class.verdict, Verdict::General);
        assert!(matches!(
            solve_inner(&general, &[0.0; 3], &class, InnerPolicy::Auto),
            Err(Error::TooLarge { n: 30, .. })
        ));
    }
}
