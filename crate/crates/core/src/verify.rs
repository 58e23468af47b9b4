//! Oracle suite run against a single instance: every property that can be
//! checked by enumeration at the instance's size.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::inner::{orthogonal_closed_form, solve_inner, InnerPolicy};
use crate::lovasz::{lovasz_eval, value_functions_agree};
use crate::modularity::{classify_default, verify_modularity_bruteforce, Verdict, MODULARITY_ENUM_LIMIT};
use crate::oracle::{self, GridSpec};
use crate::problem::{to_real, BrlsInstance, FeasibleSet, HrlsInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
    Info,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Skip => "SKIP",
            Self::Info => "INFO",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.status, self.name, self.detail)
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Random points of `X` checked in addition to its center.
    pub points: usize,
    pub seed: u64,
    /// Grid pitch of the minimax oracle; chosen for about 10⁴ points when
    /// unset.
    pub pitch: Option<f64>,
    pub lovasz_samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            points: 5,
            seed: 0,
            pitch: None,
            lovasz_samples: 1000,
        }
    }
}

/// Uniform point of the bounding box of `X`, projected onto `X`.
pub fn sample_point<R: Rng + ?Sized>(set: &FeasibleSet<f64>, rng: &mut R) -> Vec<f64> {
    let p: Vec<f64> = match set {
        FeasibleSet::Box { lo, hi } => lo.iter().zip(hi).map(|(&l, &h)| l + (h - l) * rng.random::<f64>()).collect(),
        FeasibleSet::Ball { center, radius } => center
            .iter()
            .map(|&c| c + radius * (2.0 * rng.random::<f64>() - 1.0))
            .collect(),
    };
    set.project(&p)
}

fn check(name: &'static str, ok: bool, detail: String) -> Check {
    Check {
        name,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn skip(name: &'static str, detail: impl Into<String>) -> Check {
    Check {
        name,
        status: Status::Skip,
        detail: detail.into(),
    }
}

pub fn run_suite(inst: &BrlsInstance<f64>, hrls: Option<&HrlsInstance<f64>>, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let set = inst.feasible();
    let mut points = vec![set.center()];
    points.extend((0..opts.points).map(|_| sample_point(set, &mut rng)));
    let n = inst.n();
    let class = classify_default(inst.noise())?;
    let mut out = vec![Check {
        name: "classification",
        status: Status::Info,
        detail: format!(
            "{} (off-diagonal inner products in [{:.6e}, {:.6e}])",
            class.verdict, class.min_inner, class.max_inner
        ),
    }];

    out.push(if n > MODULARITY_ENUM_LIMIT {
        skip("modularity", format!("n = {n} exceeds {MODULARITY_ENUM_LIMIT}"))
    } else {
        let expected = class.verdict.predicted_shape();
        let mut bad = Vec::new();
        for (k, x) in points.iter().enumerate() {
            let shape = verify_modularity_bruteforce(inst, x)?;
            if shape != expected {
                bad.push(format!("point {k}: {shape:?}"));
            }
        }
        check(
            "modularity",
            bad.is_empty(),
            if bad.is_empty() {
                format!("expected {expected:?} at {} points", points.len())
            } else {
                format!("expected {expected:?}, got {}", bad.join("; "))
            },
        )
    });

    out.push(if n > oracle::PHI_ENUM_LIMIT {
        skip("inner-solver", format!("n = {n} exceeds {}", oracle::PHI_ENUM_LIMIT))
    } else {
        let mut worst: f64 = 0.0;
        let mut ok = true;
        let mut method = String::new();
        for x in &points {
            let sol = solve_inner(inst, x, &class, InnerPolicy::Auto)?;
            let phi = oracle::phi_bruteforce(inst, x)?;
            let tol = 1e-9 * phi.abs().max(1.0);
            method = sol.method.to_string();
            match sol.guarantee {
                Some(1.0) => {
                    worst = worst.max((sol.value - phi).abs());
                    ok &= (sol.value - phi).abs() <= tol;
                }
                Some(g) => ok &= sol.value >= g * phi - tol,
                None => {}
            }
        }
        check("inner-solver", ok, format!("{method} against enumeration, largest gap {worst:.3e}"))
    });

    out.push(if n > 10 {
        skip("lovasz-vertices", format!("n = {n} exceeds 10"))
    } else {
        let mut worst: f64 = 0.0;
        for x in &points {
            for mask in 0usize..1 << n {
                let y: Vec<bool> = (0..n).map(|j| mask >> j & 1 == 1).collect();
                let a = lovasz_eval(inst, x, &to_real(&y))?;
                let b = inst.theta_binary(x, &y)?;
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
        }
        check("lovasz-vertices", worst <= 1e-12, format!("largest relative gap {worst:.3e}"))
    });

    out.push(if n > oracle::GRID_ENUM_LIMIT {
        skip("value-functions", format!("n = {n} exceeds {}", oracle::GRID_ENUM_LIMIT))
    } else {
        let mut ok = true;
        for x in &points {
            let a = value_functions_agree(inst, x, opts.lovasz_samples, &mut rng)?;
            ok &= a.holds(1e-9 * a.phi.abs().max(1.0));
        }
        check(
            "value-functions",
            ok,
            format!("{} relaxed samples per point never exceed the binary maximum", opts.lovasz_samples),
        )
    });

    out.push(match hrls {
        None => skip("closed-form", "instance is not in hypercube form"),
        Some(h) if classify_default(&h.noise)?.verdict != Verdict::Orthogonal => {
            skip("closed-form", "hypercube matrix is not orthogonal")
        }
        Some(_) if n > oracle::PHI_ENUM_LIMIT => skip("closed-form", format!("n = {n} too large")),
        Some(h) => {
            let mut worst: f64 = 0.0;
            for x in &points {
                let a = orthogonal_closed_form(h, x)?;
                let b = oracle::phi_bruteforce(inst, x)?;
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
            check("closed-form", worst <= 1e-9, format!("largest relative gap {worst:.3e}"))
        }
    });

    out.push(if !inst.residual().is_affine() {
        skip("phi-convexity", "residual map is not affine")
    } else if n > oracle::PHI_ENUM_LIMIT {
        skip("phi-convexity", format!("n = {n} too large"))
    } else {
        let mut ok = true;
        for w in points.windows(2) {
            let (p, q) = (&w[0], &w[1]);
            let (fp, fq) = (oracle::phi_bruteforce(inst, p)?, oracle::phi_bruteforce(inst, q)?);
            for t in [0.25, 0.5, 0.75] {
                let z: Vec<f64> = p.iter().zip(q).map(|(a, b)| (1.0 - t) * a + t * b).collect();
                let fz = oracle::phi_bruteforce(inst, &z)?;
                ok &= fz <= (1.0 - t) * fp + t * fq + 1e-9 * fp.abs().max(fq.abs()).max(1.0);
            }
        }
        check("phi-convexity", ok, "secant inequality along segments between sample points".into())
    });

    if inst.m() > 3 || n > oracle::GRID_ENUM_LIMIT {
        out.push(skip("minimax-grid", "needs m ≤ 3 and n ≤ 20"));
    } else {
        let bounds = GridSpec::covering(set, 1.0)?;
        let pitch = opts.pitch.unwrap_or_else(|| {
            let widest = bounds
                .lower
                .iter()
                .zip(&bounds.upper)
                .map(|(l, u)| u - l)
                .fold(0.0, f64::max);
            let per_axis = 1e4f64.powf(1.0 / inst.m() as f64).floor().max(1.0);
            (widest / per_axis).max(1e-12)
        });
        let grid = GridSpec::covering(set, pitch)?;
        let mm = oracle::minimax_bruteforce(inst, &grid)?;
        let saddle = oracle::saddle_check(inst, &mm.x, &mm.y, &grid, 1e-9)?;
        out.push(Check {
            name: "minimax-grid",
            status: Status::Info,
            detail: format!(
                "grid minimax {:.9e} at x = {:?} (pitch {pitch:.3e}); binary saddle point at the grid minimizer: {}",
                mm.value,
                mm.x,
                if saddle { "yes" } else { "no" }
            ),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problem::ResidualMap;

    #[test]
    fn suite_passes_on_small_acute_instance() {
        let a = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let c = Matrix::from_rows(&[vec![1.0, 0.5, 0.0], vec![0.0, 1.0, 0.2], vec![0.3, 0.0, 1.0]]).unwrap();
        let inst = BrlsInstance::new(
            ResidualMap::affine(a, vec![0.1, -0.2, 0.3]).unwrap(),
            c,
            FeasibleSet::cube(2, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let checks = run_suite(&inst, None, &VerifyOptions::default()).unwrap();
        assert!(checks.iter().all(|c| c.status != Status::Fail), "{checks:#?}");
        assert_eq!(checks.iter().filter(|c| c.status == Status::Pass).count(), 5);
    }
}
