//! Communication kernels and their decreasing envelopes.
//!
//! Every interaction weight used by the agent and hydrodynamic solvers comes
//! from a [`KernelSpec`]. Scalar families return `phi(|x - y|)`; the matrix
//! family returns a symmetric positive-definite matrix weight. The
//! [`decreasing envelope`](KernelSpec::decreasing_envelope) `k(r)` is the
//! running minimum of the radial profile and is the quantity every decay
//! monitor consumes.

use crate::linalg::{self, SymMat, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("invalid kernel parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("non-finite evaluation point")]
    NonFiniteInput,
    #[error("operation requires family {expected}, kernel has {actual}")]
    WrongFamily {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("anisotropy profile is not symmetric positive-definite")]
    NotSpd,
    #[error("matrix kernels are defined for alignment exponent p = 1 only (got p = {0})")]
    MatrixRequiresPureAlignment(f64),
    #[error("tabulated profile: {0}")]
    BadTable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    HeavyTail,
    SingularHeavyTail,
    Matrix,
    Tabulated,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::HeavyTail => "heavy_tail",
            KernelFamily::SingularHeavyTail => "singular_heavy_tail",
            KernelFamily::Matrix => "matrix",
            KernelFamily::Tabulated => "tabulated",
        }
    }
}

/// A communication kernel: tail order `beta`, tail amplitude `c_k`, crossover
/// scale `r_scale`, and (for the singular family) head order `s` paired with
/// the alignment exponent `p`, giving the head law `r^-(d + 2 s p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    beta: f64,
    c_k: f64,
    r_scale: f64,
    s: f64,
    p: f64,
    dim: usize,
    /// Regularization floor for the singular head.
    eps_sing: f64,
    aniso: Option<SymMat>,
    phi_plus: f64,
    lambda_min: f64,
    /// `(r, phi(r))` samples, strictly increasing in `r`.
    table: Vec<(f64, f64)>,
}

fn check(cond: bool, name: &'static str, reason: &str) -> Result<(), KernelError> {
    if cond {
        Ok(())
    } else {
        Err(KernelError::InvalidParameter {
            name,
            reason: reason.to_string(),
        })
    }
}

impl KernelSpec {
    /// Global heavy-tail profile `c_k (1 + r)^-beta`.
    pub fn heavy_tail(beta: f64, c_k: f64, r_scale: f64, dim: usize) -> Result<Self, KernelError> {
        check(beta.is_finite() && beta >= 0.0, "beta", "must be >= 0")?;
        check(c_k.is_finite() && c_k > 0.0, "c_k", "must be > 0")?;
        check(
            r_scale.is_finite() && r_scale > 0.0,
            "r_scale",
            "must be > 0",
        )?;
        check((1..=3).contains(&dim), "dim", "must be 1, 2 or 3")?;
        Ok(KernelSpec {
            family: KernelFamily::HeavyTail,
            beta,
            c_k,
            r_scale,
            s: 0.0,
            p: 1.0,
            dim,
            eps_sing: 0.0,
            aniso: None,
            phi_plus: c_k,
            lambda_min: 1.0,
            table: Vec::new(),
        })
    }

    /// Singular head `r^-(d + 2 s p)` for `r <= r_scale`, heavy tail beyond.
    ///
    /// The tail amplitude is derived so the profile is continuous at the
    /// crossover: `c_k = r_scale^-(d + 2 s p) * (1 + r_scale)^beta`. The head
    /// then dominates the tail law everywhere whenever `beta <= d + 2 s p`.
    /// Evaluation floors the head at `eps_sing`.
    pub fn singular(
        s: f64,
        p: f64,
        beta: f64,
        r_scale: f64,
        dim: usize,
        eps_sing: f64,
    ) -> Result<Self, KernelError> {
        check(
            s.is_finite() && s > 0.0 && s < 1.0,
            "s",
            "must lie in (0, 1)",
        )?;
        check(
            p.is_finite() && p >= 1.0,
            "p",
            "must be >= 1 for singular kernels",
        )?;
        check(beta.is_finite() && beta >= 0.0, "beta", "must be >= 0")?;
        check(
            r_scale.is_finite() && r_scale > 0.0,
            "r_scale",
            "must be > 0",
        )?;
        check((1..=3).contains(&dim), "dim", "must be 1, 2 or 3")?;
        check(
            eps_sing.is_finite() && eps_sing > 0.0 && eps_sing < r_scale,
            "eps_sing",
            "must satisfy 0 < eps_sing < r_scale",
        )?;
        let alpha = dim as f64 + 2.0 * s * p;
        check(
            beta <= alpha,
            "beta",
            "must not exceed d + 2sp, otherwise the head cannot dominate the tail",
        )?;
        let c_k = r_scale.powf(-alpha) * (1.0 + r_scale).powf(beta);
        Ok(KernelSpec {
            family: KernelFamily::SingularHeavyTail,
            beta,
            c_k,
            r_scale,
            s,
            p,
            dim,
            eps_sing,
            aniso: None,
            phi_plus: f64::INFINITY,
            lambda_min: 1.0,
            table: Vec::new(),
        })
    }

    /// Matrix kernel `Phi(x, y) = c_k (1 + |x - y|)^-beta A` with SPD `A`.
    ///
    /// Only defined for pure alignment (`p = 1`). The quadratic-form bounds
    /// are `c_k lambda_min(A) (1+r)^-beta |w|^2 <= w.Phi w <= phi_plus |w|^2`
    /// with `phi_plus = c_k lambda_max(A)`.
    pub fn matrix(
        beta: f64,
        c_k: f64,
        aniso: SymMat,
        p: f64,
        dim: usize,
    ) -> Result<Self, KernelError> {
        check(beta.is_finite() && beta >= 0.0, "beta", "must be >= 0")?;
        check(c_k.is_finite() && c_k > 0.0, "c_k", "must be > 0")?;
        check((1..=3).contains(&dim), "dim", "must be 1, 2 or 3")?;
        check(aniso.dim == dim, "aniso", "dimension must match kernel dim")?;
        if p != 1.0 {
            return Err(KernelError::MatrixRequiresPureAlignment(p));
        }
        if !aniso.is_spd() {
            return Err(KernelError::NotSpd);
        }
        let (lo, hi) = aniso.eigen_range();
        Ok(KernelSpec {
            family: KernelFamily::Matrix,
            beta,
            c_k,
            r_scale: 1.0,
            s: 0.0,
            p: 1.0,
            dim,
            eps_sing: 0.0,
            aniso: Some(aniso),
            phi_plus: c_k * hi,
            lambda_min: lo,
            table: Vec::new(),
        })
    }

    /// Profile interpolated from `(r, phi(r))` samples with strictly
    /// increasing `r` and positive values; clamped beyond the sampled range.
    pub fn tabulated(table: Vec<(f64, f64)>, dim: usize) -> Result<Self, KernelError> {
        check((1..=3).contains(&dim), "dim", "must be 1, 2 or 3")?;
        if table.len() < 2 {
            return Err(KernelError::BadTable("need at least two samples".into()));
        }
        for w in table.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(KernelError::BadTable(format!(
                    "r values must be strictly increasing (r = {} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(r, v) in &table {
            if !(r.is_finite() && r >= 0.0 && v.is_finite() && v > 0.0) {
                return Err(KernelError::BadTable(format!(
                    "samples must be finite with r >= 0 and phi > 0 (got ({r}, {v}))"
                )));
            }
        }
        let c_k = table.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
        Ok(KernelSpec {
            family: KernelFamily::Tabulated,
            beta: 0.0,
            c_k,
            r_scale: table.last().unwrap().0.max(1.0),
            s: 0.0,
            p: 1.0,
            dim,
            eps_sing: 0.0,
            aniso: None,
            phi_plus: table.iter().map(|&(_, v)| v).fold(0.0, f64::max),
            lambda_min: 1.0,
            table,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn c_k(&self) -> f64 {
        self.c_k
    }
    pub fn r_scale(&self) -> f64 {
        self.r_scale
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn eps_sing(&self) -> f64 {
        self.eps_sing
    }
    pub fn phi_plus(&self) -> f64 {
        self.phi_plus
    }
    pub fn aniso(&self) -> Option<&SymMat> {
        self.aniso.as_ref()
    }

    /// Head exponent `d + 2 s p` of the singular family.
    pub fn head_exponent(&self) -> f64 {
        self.dim as f64 + 2.0 * self.s * self.p
    }

    pub fn is_scalar(&self) -> bool {
        self.family != KernelFamily::Matrix
    }

    /// Radial profile `phi(r)` of a scalar kernel, `r >= 0`.
    #[inline]
    pub fn profile(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::HeavyTail => self.c_k * (1.0 + r).powf(-self.beta),
            KernelFamily::SingularHeavyTail => {
                if r <= self.r_scale {
                    r.max(self.eps_sing).powf(-self.head_exponent())
                } else {
                    self.c_k * (1.0 + r).powf(-self.beta)
                }
            }
            KernelFamily::Tabulated => self.interp(r),
            KernelFamily::Matrix => f64::NAN,
        }
    }

    fn interp(&self, r: f64) -> f64 {
        let t = &self.table;
        if r <= t[0].0 {
            return t[0].1;
        }
        if r >= t[t.len() - 1].0 {
            return t[t.len() - 1].1;
        }
        let idx = t.partition_point(|&(rs, _)| rs <= r);
        let (r0, v0) = t[idx - 1];
        let (r1, v1) = t[idx];
        v0 + (v1 - v0) * (r - r0) / (r1 - r0)
    }

    /// `phi(x, y)` for scalar families; symmetric in its arguments because it
    /// depends on the separation only.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        if self.family == KernelFamily::Matrix {
            return Err(KernelError::WrongFamily {
                expected: "scalar family",
                actual: self.family.name(),
            });
        }
        let r = separation(x, y, self.dim)?;
        Ok(self.profile(r))
    }

    /// `Phi(x, y)` for the matrix family.
    pub fn evaluate_matrix(&self, x: &[f64], y: &[f64]) -> Result<SymMat, KernelError> {
        let aniso = self.aniso.ok_or(KernelError::WrongFamily {
            expected: "matrix",
            actual: self.family.name(),
        })?;
        let r = separation(x, y, self.dim)?;
        Ok(aniso.scaled(self.c_k * (1.0 + r).powf(-self.beta)))
    }

    /// Matrix profile at separation `r` (matrix family only).
    #[inline]
    pub fn matrix_profile(&self, r: f64) -> SymMat {
        self.aniso
            .expect("matrix_profile requires matrix family")
            .scaled(self.c_k * (1.0 + r).powf(-self.beta))
    }

    /// Decreasing envelope `k(r) = min { phi(r') : r' <= r }`.
    ///
    /// The built-in scalar profiles are already nonincreasing, so the envelope
    /// coincides with the profile; tabulated profiles take a running minimum;
    /// the matrix family uses its quadratic-form lower bound
    /// `c_k lambda_min(A) (1 + r)^-beta`.
    pub fn decreasing_envelope(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        match self.family {
            KernelFamily::HeavyTail => self.profile(r),
            KernelFamily::SingularHeavyTail => self.profile(r),
            KernelFamily::Matrix => self.c_k * self.lambda_min * (1.0 + r).powf(-self.beta),
            KernelFamily::Tabulated => {
                let mut m = self.interp(r);
                for &(rs, v) in &self.table {
                    if rs > r {
                        break;
                    }
                    m = m.min(v);
                }
                m
            }
        }
    }

    /// Kernel lower bound used by the decay monitors.
    ///
    /// For the singular family the entropic-pressure closure and the
    /// fluctuation estimates are driven by the head law `r^-(d + 2 s p)`
    /// (which the full profile dominates); all other families use the
    /// decreasing envelope.
    pub fn decay_bound_envelope(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::SingularHeavyTail => r.max(self.eps_sing).powf(-self.head_exponent()),
            _ => self.decreasing_envelope(r),
        }
    }
}

fn separation(x: &[f64], y: &[f64], dim: usize) -> Result<f64, KernelError> {
    if x.len() < dim || y.len() < dim {
        return Err(KernelError::InvalidParameter {
            name: "point",
            reason: format!("need {dim} coordinates"),
        });
    }
    let mut s = 0.0;
    for i in 0..dim {
        if !x[i].is_finite() || !y[i].is_finite() {
            return Err(KernelError::NonFiniteInput);
        }
        let d = x[i] - y[i];
        s += d * d;
    }
    Ok(s.sqrt())
}

/// Pair weight on padded 3-vectors, bypassing input validation; callers
/// guarantee finite points (states are validated at the boundary).
#[inline]
pub fn pair_weight(spec: &KernelSpec, x: Vec3, y: Vec3) -> f64 {
    spec.profile(linalg::norm(linalg::sub(x, y)))
}
