//! Binary robust least squares.
//!
//! Solvers and verification tooling for the minimax problem
//!
//! ```text
//! min_{x in X} max_{y in {0,1}^n} Θ(x, y) = ½‖F(x) − C y‖²
//! ```
//!
//! where `F` is a residual map, `C` a noise propagation matrix and `X` a box
//! or a Euclidean ball. The sign pattern of the column inner products of `C`
//! decides whether `Θ(x, ·)` is supermodular (acute `C`), submodular (obtuse
//! `C`) or modular (orthogonal `C`), and the inner maximization is solved
//! accordingly:
//!
//! - acute / orthogonal: exact maximization through an s-t minimum cut,
//! - obtuse: deterministic double greedy with a 1/3 guarantee,
//! - anything else: exhaustive enumeration at small `n`.
//!
//! The outer loops are a projected (sub)gradient method with an averaged
//! iterate for affine `F` ([`outer::pg_linear`]) and a fixed-step variant
//! returning a uniformly sampled iterate for differentiable `F`
//! ([`outer::pg_nonlinear`]).
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below name the `f64` instantiations used by the CLI and the
//! experiment drivers.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiments;
pub mod inner;
pub mod io;
pub mod linalg;
pub mod lovasz;
mod maxflow;
pub mod modularity;
pub mod oracle;
pub mod outer;
pub mod problem;
pub mod verify;
mod scalar;

pub use error::{Error, Result};
pub use inner::{InnerMethod, InnerPolicy, InnerSolution};
pub use linalg::Matrix;
pub use modularity::{ModularityClass, Verdict};
pub use outer::{LinearRunConfig, NonlinearRunConfig, OuterReport};
pub use problem::{
    BrlsInstance, FeasibleSet, HrlsInstance, InnerQuadratic, LabelUncertaintyModel, ResidualMap,
};
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Instance64 = BrlsInstance<f64>;
pub type Hrls64 = HrlsInstance<f64>;
pub type FeasibleSet64 = FeasibleSet<f64>;
pub type ResidualMap64 = ResidualMap<f64>;
pub type Report64 = OuterReport<f64>;

pub type Matrix32 = Matrix<f32>;
pub type Instance32 = BrlsInstance<f32>;
