use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Real;

/// Largest tolerated asymmetry of a covariance matrix before it is rejected.
const SYMMETRY_TOL: f64 = 1e-12;

/// Gaussian parameter: scalar width `s` or covariance-like matrix `Σ`.
///
/// The scalar form stores `s²` separately so that widths such as `√2` are
/// represented exactly through their square.
#[derive(Clone, Debug, PartialEq)]
pub enum GaussianParam<T> {
    Scalar { s: T, s_sq: T },
    Matrix(MatrixParam<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixParam<T> {
    sigma: Matrix<T>,
    sigma_inv: Matrix<T>,
    inv_sqrt: Matrix<T>,
    lambda_min: T,
    lambda_max: T,
}

impl<T: Real> MatrixParam<T> {
    pub fn sigma(&self) -> &Matrix<T> {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &Matrix<T> {
        &self.sigma_inv
    }

    /// `Σ^{-1/2}`, the positive definite inverse square root.
    pub fn inv_sqrt(&self) -> &Matrix<T> {
        &self.inv_sqrt
    }

    pub fn lambda_min(&self) -> T {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> T {
        self.lambda_max
    }
}

/// What the summation engine needs to know about a parameter. With
/// `q(w) = wᵀ M w` (`M = I` when `metric` is `None`) the weight is
/// `exp(−π q(w)/scale)`.
#[derive(Clone, Debug)]
pub(crate) struct MetricInfo {
    pub metric: Option<Vec<Vec<f64>>>,
    pub scale: f64,
    /// `‖w‖² ≤ lambda · q(w)/scale`
    pub lambda: f64,
    /// Bound on `‖M‖₂`, used in rounding analysis.
    pub m_norm: f64,
    /// Absolute error of the computed `M` entries relative to the exact parameter, as an operator-norm bound.
    pub m_err: f64,
    /// `‖M‖₂ / scale`
    pub m_op: f64,
}

impl<T: Real> GaussianParam<T> {
    pub fn scalar(s: T) -> Result<Self> {
        if !(s > T::zero()) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!("s must be positive and finite, got {s}")));
        }
        Ok(Self::Scalar { s, s_sq: s * s })
    }

    /// Scalar parameter given by its square `s²`.
    pub fn from_variance(s_sq: T) -> Result<Self> {
        if !(s_sq > T::zero()) || !s_sq.is_finite() {
            return Err(Error::InvalidParameter(format!("s² must be positive and finite, got {s_sq}")));
        }
        Ok(Self::Scalar { s: s_sq.sqrt(), s_sq })
    }

    /// Matrix parameter. Matrices asymmetric by at most `1e-12` are symmetrized.
    pub fn matrix(sigma: Vec<Vec<T>>) -> Result<Self> {
        let n = sigma.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty Σ".into()));
        }
        for row in &sigma {
            if row.len() != n {
                return Err(Error::NotSquare { rows: n, cols: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("Σ has non-finite entries".into()));
            }
        }
        let asym = linalg::max_asymmetry(&sigma).to_f64_lossy();
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidParameter(format!("Σ is not symmetric (asymmetry {asym:e})")));
        }
        let sigma = linalg::symmetrize(&sigma);
        let s64 = to_f64(&sigma);
        if linalg::cholesky(&s64).is_none() {
            return Err(Error::InvalidParameter("Σ is not positive definite".into()));
        }
        let (vals, _) = linalg::symmetric_eigen(&s64);
        let (lmin, lmax) = (vals[0], vals[n - 1]);
        if !(lmin > 0.0) {
            return Err(Error::InvalidParameter("Σ is not positive definite".into()));
        }
        let inv = linalg::symmetrize(&linalg::inverse(&s64).ok_or(Error::InvalidParameter("Σ is singular".into()))?);
        let inv_sqrt = linalg::symmetric_function(&s64, |x| 1.0 / x.sqrt());
        Ok(Self::Matrix(MatrixParam {
            sigma,
            sigma_inv: from_f64(&inv),
            inv_sqrt: from_f64(&inv_sqrt),
            lambda_min: T::lit(lmin),
            lambda_max: T::lit(lmax),
        }))
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Self::Scalar { .. })
    }

    pub fn s(&self) -> Option<T> {
        match self {
            Self::Scalar { s, .. } => Some(*s),
            Self::Matrix(_) => None,
        }
    }

    /// Dimension fixed by a matrix parameter; scalars fit every dimension.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Scalar { .. } => None,
            Self::Matrix(m) => Some(m.sigma.len()),
        }
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        match self.dim() {
            Some(d) if d != n => Err(Error::DimensionMismatch { expected: n, got: d }),
            _ => Ok(()),
        }
    }

    /// `s ↦ c·s`, `Σ ↦ c²·Σ`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        self.with_variance_factor(c * c)
    }

    /// `s² ↦ f·s²`, `Σ ↦ f·Σ`; exact when `f` is a power of two.
    pub fn with_variance_factor(&self, f: T) -> Result<Self> {
        match self {
            Self::Scalar { s_sq, .. } => Self::from_variance(*s_sq * f),
            Self::Matrix(m) => Self::matrix(m.sigma.iter().map(|r| r.iter().map(|v| *v * f).collect()).collect()),
        }
    }

    /// `q(w)/scale` in this parameter's own precision; the Gaussian is `exp(−π·that)`.
    pub fn quadratic(&self, w: &[T]) -> T {
        match self {
            Self::Scalar { s_sq, .. } => linalg::dot(w, w) / *s_sq,
            Self::Matrix(m) => linalg::dot(w, &linalg::mat_vec(&m.sigma_inv, w)),
        }
    }

    /// Metric `M/scale` such that the weight is `exp(−π wᵀ(M/scale)w)`, as a matrix.
    pub fn precision_matrix(&self, n: usize) -> Matrix<T> {
        match self {
            Self::Scalar { s_sq, .. } => {
                let mut m = linalg::eye(n);
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = T::one() / *s_sq;
                }
                m
            }
            Self::Matrix(m) => m.sigma_inv.clone(),
        }
    }

    pub(crate) fn metric_info(&self) -> MetricInfo {
        let u = f64::EPSILON / 2.0;
        match self {
            Self::Scalar { s_sq, .. } => {
                let s2 = s_sq.to_f64_lossy();
                MetricInfo { metric: None, scale: s2, lambda: s2, m_norm: 1.0, m_err: 0.0, m_op: 1.0 / s2 }
            }
            Self::Matrix(m) => {
                let n = m.sigma.len() as f64;
                let inv = to_f64(&m.sigma_inv);
                let lmin = m.lambda_min.to_f64_lossy();
                let lmax = m.lambda_max.to_f64_lossy();
                let op = 1.0 / lmin;
                // inverse of a symmetric matrix: relative error ~ n·κ·u, generously padded
                let cond = lmax / lmin;
                let t_u = T::unit_roundoff().to_f64_lossy();
                let m_err = op * (8.0 * (n + 1.0) * cond * u + 4.0 * t_u * cond);
                MetricInfo {
                    metric: Some(inv),
                    scale: 1.0,
                    lambda: lmax * (1.0 + 1e-10),
                    m_norm: op * (1.0 + 1e-10),
                    m_err,
                    m_op: op * (1.0 + 1e-10),
                }
            }
        }
    }

    /// Key identifying the parameter bit-exactly, for memoization.
    pub(crate) fn cache_key(&self) -> Vec<u64> {
        let tag = std::mem::size_of::<T>() as u64;
        match self {
            Self::Scalar { s_sq, .. } => vec![tag, 0, s_sq.to_f64_lossy().to_bits()],
            Self::Matrix(m) => {
                let mut k = vec![tag, 1];
                k.extend(m.sigma.iter().flatten().map(|v| v.to_f64_lossy().to_bits()));
                k
            }
        }
    }

    /// `{"s": …}` or `{"sigma": [[…]]}`.
    pub fn to_json(&self) -> Value {
        match self {
            Self::Scalar { s, s_sq } => {
                let s64 = s.to_f64_lossy();
                if (s64 * s64) == s_sq.to_f64_lossy() {
                    serde_json::json!({ "s": s64 })
                } else {
                    serde_json::json!({ "s_sq": s_sq.to_f64_lossy() })
                }
            }
            Self::Matrix(m) => serde_json::json!({ "sigma": to_f64(&m.sigma) }),
        }
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let num = |x: &Value| x.as_f64().ok_or_else(|| Error::Parse(format!("expected a number, got {x}")));
        if let Some(s) = v.get("s") {
            return Self::scalar(T::lit(num(s)?));
        }
        if let Some(s2) = v.get("s_sq") {
            return Self::from_variance(T::lit(num(s2)?));
        }
        if let Some(rows) = v.get("sigma").and_then(Value::as_array) {
            let m = rows
                .iter()
                .map(|r| {
                    r.as_array()
                        .ok_or_else(|| Error::Parse("sigma rows must be arrays".into()))?
                        .iter()
                        .map(|x| num(x).map(T::lit))
                        .collect::<Result<Vec<T>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::matrix(m);
        }
        Err(Error::Parse("param must be {\"s\": …} or {\"sigma\": [[…]]}".into()))
    }
}

fn to_f64<T: Real>(m: &[Vec<T>]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(|v| v.to_f64_lossy()).collect()).collect()
}

fn from_f64<T: Real>(m: &[Vec<f64>]) -> Vec<Vec<T>> {
    m.iter().map(|r| r.iter().map(|&v| T::lit(v)).collect()).collect()
}
