//! Problem family: residual maps, feasible sets and the BRLS instance with its
//! derived models (hypercube noise, uncertain binary labels).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm, norm_sq, Matrix};
use crate::scalar::Scalar;

/// A user-supplied differentiable map `ℝ^m → ℝ^r`.
pub trait DifferentiableMap<T>: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &[T]) -> Vec<T>;
    /// Jacobian of shape `output_dim × input_dim`.
    fn jacobian(&self, x: &[T]) -> Matrix<T>;
}

/// Residual map `F: ℝ^m → ℝ^r`.
#[derive(Clone)]
pub enum ResidualMap<T> {
    /// `F(x) = A x + offset`.
    Affine { a: Matrix<T>, offset: Vec<T> },
    /// `F(x) = (A x)² − intensities`, squared elementwise.
    PhaseRetrieval { a: Matrix<T>, intensities: Vec<T> },
    /// `F(x) = map(x) + shift`.
    Custom {
        map: Arc<dyn DifferentiableMap<T>>,
        shift: Vec<T>,
    },
}

impl<T: fmt::Debug> fmt::Debug for ResidualMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Affine { a, offset } => f
                .debug_struct("Affine")
                .field("a", a)
                .field("offset", offset)
                .finish(),
            Self::PhaseRetrieval { a, intensities } => f
                .debug_struct("PhaseRetrieval")
                .field("a", a)
                .field("intensities", intensities)
                .finish(),
            Self::Custom { map, shift } => f
                .debug_struct("Custom")
                .field("input_dim", &map.input_dim())
                .field("output_dim", &map.output_dim())
                .field("shift", shift)
                .finish(),
        }
    }
}

impl<T: Scalar> ResidualMap<T> {
    pub fn affine(a: Matrix<T>, offset: Vec<T>) -> Result<Self> {
        if offset.len() != a.rows() {
            return Err(Error::Dimension(format!(
                "affine offset has length {}, matrix has {} rows",
                offset.len(),
                a.rows()
            )));
        }
        Ok(Self::Affine { a, offset })
    }

    /// `F(x) = x` on `ℝ^m`.
    pub fn identity(m: usize) -> Self {
        Self::Affine {
            a: Matrix::identity(m),
            offset: vec![T::zero(); m],
        }
    }

    pub fn phase_retrieval(a: Matrix<T>, intensities: Vec<T>) -> Result<Self> {
        if intensities.len() != a.rows() {
            return Err(Error::Dimension(format!(
                "intensity vector has length {}, matrix has {} rows",
                intensities.len(),
                a.rows()
            )));
        }
        Ok(Self::PhaseRetrieval { a, intensities })
    }

    pub fn custom(map: Arc<dyn DifferentiableMap<T>>) -> Self {
        let shift = vec![T::zero(); map.output_dim()];
        Self::Custom { map, shift }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Self::Affine { a, .. } | Self::PhaseRetrieval { a, .. } => a.cols(),
            Self::Custom { map, .. } => map.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Self::Affine { a, .. } | Self::PhaseRetrieval { a, .. } => a.rows(),
            Self::Custom { map, .. } => map.output_dim(),
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, Self::Affine { .. })
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        match self {
            Self::Affine { a, offset } => linalg::add(&a.matvec(x), offset),
            Self::PhaseRetrieval { a, intensities } => a
                .matvec(x)
                .iter()
                .zip(intensities)
                .map(|(&v, &b)| v * v - b)
                .collect(),
            Self::Custom { map, shift } => linalg::add(&map.eval(x), shift),
        }
    }

    pub fn jacobian(&self, x: &[T]) -> Matrix<T> {
        match self {
            Self::Affine { a, .. } => a.clone(),
            Self::PhaseRetrieval { a, .. } => {
                let ax = a.matvec(x);
                Matrix::from_fn(a.rows(), a.cols(), |i, j| T::lit(2.0) * ax[i] * a.get(i, j))
            }
            Self::Custom { map, .. } => map.jacobian(x),
        }
    }

    /// `J_F(x)ᵀ w` without materialising the Jacobian where possible.
    pub fn jacobian_tr_times(&self, x: &[T], w: &[T]) -> Vec<T> {
        match self {
            Self::Affine { a, .. } => a.tr_matvec(w),
            Self::PhaseRetrieval { a, .. } => {
                let ax = a.matvec(x);
                let scaled: Vec<T> = ax
                    .iter()
                    .zip(w)
                    .map(|(&v, &wi)| T::lit(2.0) * v * wi)
                    .collect();
                a.tr_matvec(&scaled)
            }
            Self::Custom { map, .. } => map.jacobian(x).tr_matvec(w),
        }
    }

    /// The map `x ↦ F(x) + v`.
    pub fn shifted(&self, v: &[T]) -> Self {
        match self {
            Self::Affine { a, offset } => Self::Affine {
                a: a.clone(),
                offset: linalg::add(offset, v),
            },
            Self::PhaseRetrieval { a, intensities } => Self::PhaseRetrieval {
                a: a.clone(),
                intensities: linalg::sub(intensities, v),
            },
            Self::Custom { map, shift } => Self::Custom {
                map: Arc::clone(map),
                shift: linalg::add(shift, v),
            },
        }
    }
}

/// Convex compact feasible set `X`.
#[derive(Clone, Debug, PartialEq)]
pub enum FeasibleSet<T> {
    Box { lo: Vec<T>, hi: Vec<T> },
    Ball { center: Vec<T>, radius: T },
}

impl<T: Scalar> FeasibleSet<T> {
    pub fn new_box(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension(format!(
                "box bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i]) || !hi[i].is_finite()) {
            return Err(Error::Invalid(format!(
                "box bound {i} is empty or unbounded: [{}, {}]",
                lo[i], hi[i]
            )));
        }
        Ok(Self::Box { lo, hi })
    }

    /// `[lo, hi]^m`.
    pub fn cube(m: usize, lo: T, hi: T) -> Result<Self> {
        Self::new_box(vec![lo; m], vec![hi; m])
    }

    pub fn new_ball(center: Vec<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::Invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Box { lo, .. } => lo.len(),
            Self::Ball { center, .. } => center.len(),
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[T]) -> Vec<T> {
        match self {
            Self::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&v, (&l, &h))| v.max(l).min(h))
                .collect(),
            Self::Ball { center, radius } => {
                let d = linalg::sub(x, center);
                let len = norm(&d);
                if len <= *radius {
                    x.to_vec()
                } else {
                    let s = *radius / len;
                    center.iter().zip(&d).map(|(&c, &di)| c + s * di).collect()
                }
            }
        }
    }

    pub fn contains(&self, x: &[T], tol: T) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            Self::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol),
            Self::Ball { center, radius } => linalg::distance(x, center) <= *radius + tol,
        }
    }

    /// Diameter `D`: `‖hi − lo‖` for a box, `2·radius` for a ball.
    pub fn diameter(&self) -> T {
        match self {
            Self::Box { lo, hi } => linalg::distance(hi, lo),
            Self::Ball { radius, .. } => T::lit(2.0) * *radius,
        }
    }

    /// `max_{x∈X} ‖x‖`.
    pub fn max_norm(&self) -> T {
        match self {
            Self::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| {
                    let v = l.abs().max(h.abs());
                    v * v
                })
                .sum::<T>()
                .sqrt(),
            Self::Ball { center, radius } => norm(center) + *radius,
        }
    }

    /// `max_{x∈X} |⟨a, x⟩|`.
    pub fn max_abs_linear(&self, a: &[T]) -> T {
        match self {
            Self::Box { lo, hi } => a
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&ai, (&l, &h))| (ai * l).abs().max((ai * h).abs()))
                .sum(),
            Self::Ball { center, radius } => dot(a, center).abs() + *radius * norm(a),
        }
    }

    /// A point of the set: box midpoint or ball center.
    pub fn center(&self) -> Vec<T> {
        match self {
            Self::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| (l + h) / T::lit(2.0))
                .collect(),
            Self::Ball { center, .. } => center.clone(),
        }
    }
}

/// `Θ(x, y) = ½yᵀΣy − uᵀy + c0` for a fixed `x`.
#[derive(Clone, Debug)]
pub struct InnerQuadratic<T> {
    pub sigma: Matrix<T>,
    pub u: Vec<T>,
    pub c0: T,
}

impl<T: Scalar> InnerQuadratic<T> {
    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn value(&self, y: &[T]) -> T {
        let sy = self.sigma.matvec(y);
        T::lit(0.5) * dot(y, &sy) - dot(&self.u, y) + self.c0
    }

    pub fn value_binary(&self, y: &[bool]) -> T {
        let n = y.len();
        let mut quad = T::zero();
        let mut lin = T::zero();
        for i in (0..n).filter(|&i| y[i]) {
            lin = lin + self.u[i];
            let row = self.sigma.row(i);
            quad = quad + T::lit(0.5) * row[i];
            for j in (i + 1..n).filter(|&j| y[j]) {
                quad = quad + row[j];
            }
        }
        quad - lin + self.c0
    }
}

/// A binary robust least squares instance `min_{x∈X} max_{y∈{0,1}^n} ½‖F(x) − Cy‖²`.
#[derive(Clone, Debug)]
pub struct BrlsInstance<T> {
    residual: ResidualMap<T>,
    noise: Matrix<T>,
    gram: Matrix<T>,
    feasible: FeasibleSet<T>,
    lipschitz: Option<(T, T)>,
}

impl<T: Scalar> BrlsInstance<T> {
    pub fn new(residual: ResidualMap<T>, noise: Matrix<T>, feasible: FeasibleSet<T>) -> Result<Self> {
        if noise.rows() != residual.output_dim() {
            return Err(Error::Dimension(format!(
                "noise matrix has {} rows, residual map has {} outputs",
                noise.rows(),
                residual.output_dim()
            )));
        }
        if feasible.dim() != residual.input_dim() {
            return Err(Error::Dimension(format!(
                "feasible set lives in dimension {}, residual map takes {} inputs",
                feasible.dim(),
                residual.input_dim()
            )));
        }
        if let Some(j) = (0..noise.cols()).find(|&j| (0..noise.rows()).all(|i| noise.get(i, j) == T::zero())) {
            return Err(Error::ZeroColumn(j));
        }
        let gram = noise.gram();
        Ok(Self {
            residual,
            noise,
            gram,
            feasible,
            lipschitz: None,
        })
    }

    /// Attaches user-supplied Lipschitz constants `(L, ℓ)` of `Θ(·, y)` and
    /// `∇_x Θ(·, y)`; required for custom residual maps.
    pub fn with_lipschitz(mut self, l: T, ell: T) -> Self {
        self.lipschitz = Some((l, ell));
        self
    }

    pub fn residual(&self) -> &ResidualMap<T> {
        &self.residual
    }

    pub fn noise(&self) -> &Matrix<T> {
        &self.noise
    }

    /// `CᵀC`, cached at construction.
    pub fn gram(&self) -> &Matrix<T> {
        &self.gram
    }

    pub fn feasible(&self) -> &FeasibleSet<T> {
        &self.feasible
    }

    /// Number of binary noise variables.
    pub fn n(&self) -> usize {
        self.noise.cols()
    }

    /// Dimension of the decision variable.
    pub fn m(&self) -> usize {
        self.residual.input_dim()
    }

    /// Number of residuals.
    pub fn r(&self) -> usize {
        self.residual.output_dim()
    }

    fn check_x(&self, x: &[T]) -> Result<()> {
        if x.len() != self.m() {
            return Err(Error::Dimension(format!(
                "x has length {}, expected {}",
                x.len(),
                self.m()
            )));
        }
        Ok(())
    }

    fn check_y(&self, y: &[T]) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::Dimension(format!(
                "y has length {}, expected {}",
                y.len(),
                self.n()
            )));
        }
        Ok(())
    }

    /// `F(x) − C y`.
    pub fn residual_vector(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        self.check_x(x)?;
        self.check_y(y)?;
        let mut f = self.residual.eval(x);
        let cy = self.noise.matvec(y);
        for (fi, ci) in f.iter_mut().zip(cy) {
            *fi = *fi - ci;
        }
        Ok(f)
    }

    /// `Θ(x, y) = ½‖F(x) − C y‖²` for any real `y` (binary or relaxed).
    pub fn theta(&self, x: &[T], y: &[T]) -> Result<T> {
        Ok(T::lit(0.5) * norm_sq(&self.residual_vector(x, y)?))
    }

    /// `Θ(x, y)` for a binary `y`.
    pub fn theta_binary(&self, x: &[T], y: &[bool]) -> Result<T> {
        self.theta(x, &to_real(y))
    }

    /// `∇_x Θ(x, y) = J_F(x)ᵀ (F(x) − C y)`.
    pub fn grad_x(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        let w = self.residual_vector(x, y)?;
        Ok(self.residual.jacobian_tr_times(x, &w))
    }

    pub fn grad_x_binary(&self, x: &[T], y: &[bool]) -> Result<Vec<T>> {
        self.grad_x(x, &to_real(y))
    }

    /// Quadratic form of `Θ(x, ·)`: `Σ = CᵀC`, `u = CᵀF(x)`, `c0 = ½‖F(x)‖²`.
    pub fn inner_quadratic(&self, x: &[T]) -> Result<InnerQuadratic<T>> {
        self.check_x(x)?;
        let f = self.residual.eval(x);
        Ok(InnerQuadratic {
            sigma: self.gram.clone(),
            u: self.noise.tr_matvec(&f),
            c0: T::lit(0.5) * norm_sq(&f),
        })
    }

    /// Certified upper bounds `(L, ℓ)` on the Lipschitz constants of
    /// `Θ(·, y)` and `∇_x Θ(·, y)` over `X`, uniform in `y ∈ {0,1}^n`.
    pub fn lipschitz_estimates(&self) -> Result<(T, T)> {
        if let Some(c) = self.lipschitz {
            return Ok(c);
        }
        let n_sqrt = T::from_usize(self.n()).unwrap().sqrt();
        let c_norm = self.noise.spectral_norm_bound();
        match &self.residual {
            ResidualMap::Affine { a, offset } => {
                let a_norm = a.spectral_norm_bound();
                let radius = self.feasible.max_norm();
                let l = a_norm * (a_norm * radius + norm(offset) + c_norm * n_sqrt);
                Ok((l, a_norm * a_norm))
            }
            ResidualMap::PhaseRetrieval { a, intensities } => {
                // ‖Ax‖_∞ ≤ mx on X; |F_i − (Cy)_i| ≤ mx² + |b_i| + Σ_j |C_ij|.
                let mx = (0..a.rows())
                    .map(|i| self.feasible.max_abs_linear(a.row(i)))
                    .fold(T::zero(), T::max);
                let a_norm = a.spectral_norm_bound();
                let ax_norm = (a_norm * self.feasible.max_norm())
                    .min(mx * T::from_usize(a.rows()).unwrap().sqrt());
                let resid_norm = mx * ax_norm + norm(intensities) + c_norm * n_sqrt;
                let l = T::lit(2.0) * mx * a_norm * resid_norm;
                let resid_inf = mx * mx
                    + linalg::norm_inf(intensities)
                    + self.noise.max_row_abs_sum();
                let ell = a_norm * a_norm * (T::lit(4.0) * mx * mx + T::lit(2.0) * resid_inf);
                Ok((l, ell))
            }
            ResidualMap::Custom { .. } => Err(Error::Unsupported(
                "custom residual maps must supply Lipschitz constants via with_lipschitz".into(),
            )),
        }
    }
}

pub(crate) fn to_real<T: Scalar>(y: &[bool]) -> Vec<T> {
    y.iter()
        .map(|&b| if b { T::one() } else { T::zero() })
        .collect()
}

/// Hypercube-noise robust least squares `min_x max_{z∈[−δ,δ]^n} ½‖F̂(x) − Ĉz‖²`.
#[derive(Clone, Debug)]
pub struct HrlsInstance<T> {
    pub residual: ResidualMap<T>,
    pub noise: Matrix<T>,
    pub delta: T,
    pub feasible: FeasibleSet<T>,
}

impl<T: Scalar> HrlsInstance<T> {
    pub fn new(
        residual: ResidualMap<T>,
        noise: Matrix<T>,
        delta: T,
        feasible: FeasibleSet<T>,
    ) -> Result<Self> {
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(Error::Invalid(format!("hypercube half-width must be positive, got {delta}")));
        }
        Ok(Self {
            residual,
            noise,
            delta,
            feasible,
        })
    }

    /// `½‖F̂(x) − Ĉz‖²`.
    pub fn objective(&self, x: &[T], z: &[T]) -> Result<T> {
        if z.len() != self.noise.cols() || x.len() != self.residual.input_dim() {
            return Err(Error::Dimension("hypercube objective arguments".into()));
        }
        let f = self.residual.eval(x);
        let cz = self.noise.matvec(z);
        Ok(T::lit(0.5) * norm_sq(&linalg::sub(&f, &cz)))
    }

    /// Binary reformulation: `F = F̂ + δĈ1`, `C = 2δĈ`, with `y = z/(2δ) + ½·1`.
    pub fn to_brls(&self) -> Result<BrlsInstance<T>> {
        let ones = vec![T::one(); self.noise.cols()];
        let shift: Vec<T> = self.noise.matvec(&ones).iter().map(|&v| self.delta * v).collect();
        BrlsInstance::new(
            self.residual.shifted(&shift),
            self.noise.scaled(T::lit(2.0) * self.delta),
            self.feasible.clone(),
        )
    }

    /// `y = z/(2δ) + ½·1`.
    pub fn z_to_y(&self, z: &[T]) -> Vec<T> {
        let two_delta = T::lit(2.0) * self.delta;
        z.iter().map(|&v| v / two_delta + T::lit(0.5)).collect()
    }
}

/// Binary classification with possibly mislabeled observations.
#[derive(Clone, Debug)]
pub struct LabelUncertaintyModel<T> {
    pub prediction: ResidualMap<T>,
    pub labels: Vec<bool>,
    /// Zero-based indices of labels that may be flipped.
    pub suspects: Vec<usize>,
    pub feasible: FeasibleSet<T>,
}

impl<T: Scalar> LabelUncertaintyModel<T> {
    /// Diagonal of the label-flip matrix: `1 − 2b_i` on suspects, `0` elsewhere.
    pub fn flip_diagonal(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.labels.len()];
        for &i in &self.suspects {
            d[i] = if self.labels[i] { -T::one() } else { T::one() };
        }
        d
    }

    /// `F(x) = F̂(x) − b`, `C` = the nonzero columns of the flip diagonal, in
    /// ascending index order. Columns of unsuspected labels are dropped.
    pub fn to_brls(&self) -> Result<BrlsInstance<T>> {
        let r = self.labels.len();
        if self.prediction.output_dim() != r {
            return Err(Error::Dimension(format!(
                "prediction map has {} outputs for {r} labels",
                self.prediction.output_dim()
            )));
        }
        let mut suspects = self.suspects.clone();
        suspects.sort_unstable();
        suspects.dedup();
        if let Some(&bad) = suspects.iter().find(|&&i| i >= r) {
            return Err(Error::IndexOutOfRange { index: bad, len: r });
        }
        let d = self.flip_diagonal();
        let noise = Matrix::from_fn(r, suspects.len(), |i, j| {
            if i == suspects[j] {
                d[i]
            } else {
                T::zero()
            }
        });
        let b: Vec<T> = to_real::<T>(&self.labels).iter().map(|&v| -v).collect();
        BrlsInstance::new(self.prediction.shifted(&b), noise, self.feasible.clone())
    }
}
