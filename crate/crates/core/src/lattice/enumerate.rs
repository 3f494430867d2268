//! Fincke–Pohst enumeration of coset points inside an ellipsoid.

use num_bigint::BigInt;
use num_traits::Zero;

use super::{Coset, Lattice};
use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::linalg;
use crate::scalar::Real;

pub const DEFAULT_POINT_CAP: u64 = 10_000_000;

/// Relative guard band around `R²` inside which float norms are re-checked exactly.
const GUARD: f64 = 1e-9;

/// A positive definite form `q(w) = wᵀ M w` pulled back to coefficient space,
/// `Q = B M Bᵀ` (rows of `B` are basis vectors). `M = I` when `metric` is `None`.
#[derive(Clone, Debug)]
///
/// Enumeration runs in LLL-reduced coordinates `k′` with `k = Uᵀk′`; `chol` and
/// `coeff_gram` describe the reduced form `U Q Uᵀ`.
pub(crate) struct QuadForm {
    metric_f64: Option<Vec<Vec<f64>>>,
    chol: Vec<Vec<f64>>,
    coeff_gram: Vec<Vec<f64>>,
    u: Vec<Vec<i64>>,
    u_inv: Vec<Vec<i64>>,
}

impl QuadForm {
    pub(crate) fn from_gram(metric_f64: Option<Vec<Vec<f64>>>, coeff_gram: Vec<Vec<f64>>) -> Result<Self> {
        linalg::cholesky(&coeff_gram).ok_or(Error::SingularBasis)?;
        let (u, u_inv) = lll(&coeff_gram);
        let reduced = transform_gram(&coeff_gram, &u);
        let chol = linalg::cholesky(&reduced).ok_or(Error::SingularBasis)?;
        Ok(Self { metric_f64, chol, coeff_gram: reduced, u, u_inv })
    }

    /// Form for a symmetric positive definite metric `M`.
    pub(crate) fn with_metric(lattice: &Lattice, metric: &[Vec<f64>]) -> Result<Self> {
        let b = lattice.basis_f64();
        let q = linalg::symmetrize(&linalg::mul(&linalg::mul(b, metric), &linalg::transpose(b)));
        Self::from_gram(Some(metric.to_vec()), q)
    }

    pub(crate) fn chol_diag_sq(&self) -> Vec<f64> {
        self.chol.iter().enumerate().map(|(i, r)| r[i] * r[i]).collect()
    }

    pub(crate) fn eval_f64(&self, w: &[f64]) -> f64 {
        match &self.metric_f64 {
            None => linalg::dot(w, w),
            Some(m) => linalg::dot(w, &linalg::mat_vec(m, w)),
        }
    }

    /// Half the diameter of the fundamental cell in this form, used to pad
    /// volume-based count predictions.
    fn cell_radius(&self) -> f64 {
        0.5 * (0..self.coeff_gram.len()).map(|i| self.coeff_gram[i][i]).sum::<f64>().sqrt()
    }

    /// Predicted number of coefficient vectors with `q ≤ R²`.
    pub(crate) fn predicted_count(&self, radius: f64) -> f64 {
        let n = self.chol.len();
        let sqrt_det: f64 = self.chol.iter().enumerate().map(|(i, r)| r[i]).product();
        unit_ball_volume(n) * (radius + self.cell_radius()).powi(n as i32) / sqrt_det
    }
}

/// `U G Uᵀ`
fn transform_gram(g: &[Vec<f64>], u: &[Vec<i64>]) -> Vec<Vec<f64>> {
    let n = g.len();
    let uf: Vec<Vec<f64>> = u.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    linalg::symmetrize(&linalg::mul(&linalg::mul(&uf, g), &linalg::transpose(&uf)))
        .into_iter()
        .take(n)
        .collect()
}

/// LLL reduction (δ = 0.99) of a Gram matrix, returning a unimodular `U`
/// (rows are the new basis in old coordinates) and its inverse. Any unimodular
/// pair is correct; reduction only affects speed.
fn lll(g: &[Vec<f64>]) -> (Vec<Vec<i64>>, Vec<Vec<i64>>) {
    let n = g.len();
    let id = |_: ()| (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect::<Vec<i64>>()).collect::<Vec<_>>();
    let (mut u, mut ui) = (id(()), id(()));
    const LIMIT: i64 = 1 << 40;
    let mut k = 1;
    let mut steps = 0;
    while k < n && steps < 10_000 {
        steps += 1;
        let gc = transform_gram(g, &u);
        let Some(l) = linalg::cholesky(&gc) else { break };
        // μ_{k,j} = L[k][j]/L[j][j]
        let mut changed = false;
        for j in (0..k).rev() {
            let l = linalg::cholesky(&transform_gram(g, &u)).expect("reduced forms stay definite");
            let mu = l[k][j] / l[j][j];
            let r = mu.round();
            if r != 0.0 && r.abs() < LIMIT as f64 {
                let r = r as i64;
                // b_k ← b_k − r b_j; inverse: column j ← column j + r column k
                for c in 0..n {
                    u[k][c] -= r * u[j][c];
                    ui[c][j] += r * ui[c][k];
                }
                changed = true;
            }
        }
        let l = if changed { linalg::cholesky(&transform_gram(g, &u)).expect("definite") } else { l };
        let bk = l[k][k] * l[k][k];
        let bk1 = l[k - 1][k - 1] * l[k - 1][k - 1];
        let mu = l[k][k - 1] / l[k - 1][k - 1];
        if bk + mu * mu * bk1 < 0.99 * bk1 {
            u.swap(k, k - 1);
            for row in ui.iter_mut() {
                row.swap(k, k - 1);
            }
            k = (k - 1).max(1);
        } else {
            k += 1;
        }
        if u.iter().flatten().chain(ui.iter().flatten()).any(|v| v.abs() > LIMIT) {
            return (id(()), id(()));
        }
    }
    (u, ui)
}

/// Volume of the unit ball in `Rⁿ`.
pub(crate) fn unit_ball_volume(n: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_n = 2π/n · V_{n−2}
    let mut v = [1.0f64, 2.0];
    for k in 2..=n {
        let next = 2.0 * std::f64::consts::PI / k as f64 * v[k % 2];
        v[k % 2] = next;
    }
    v[n % 2]
}

#[derive(Clone, Debug)]
pub(crate) struct RawPoint {
    pub coeffs: Vec<i64>,
    /// Ambient point `Σ kᵢ bᵢ + x`.
    pub w: Vec<f64>,
    /// `q(w)` in floating point.
    pub q: f64,
}

/// Enumerates `{k : q(Bᵀk + x) ≤ R²}`, sorted by `(q, k)`.
///
/// With `exact_ties` (Euclidean forms only) the boundary is decided exactly
/// (points with norm exactly `R` included); otherwise points inside the guard band are kept, so the result
/// is a superset of the exact ball and a subset of the ball of radius
/// `R·(1 + GUARD)`.
pub(crate) fn enumerate_raw(
    lattice: &Lattice,
    form: &QuadForm,
    shift: &[f64],
    radius: f64,
    cap: u64,
    exact_ties: bool,
) -> Result<Vec<RawPoint>> {
    let n = lattice.dim();
    if shift.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: shift.len() });
    }
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be finite and nonnegative, got {radius}")));
    }
    debug_assert!(!exact_ties || form.metric_f64.is_none());
    let predicted = form.predicted_count(radius);
    if predicted > cap as f64 {
        return Err(Error::BudgetExceeded { predicted: predicted.min(u64::MAX as f64) as u64, cap });
    }

    let r2 = radius * radius;
    let band = GUARD * r2.max(1e-300) + 64.0 * f64::EPSILON * r2;
    let search = r2 + 2.0 * band;
    // coefficient-space center: Bᵀ t = −x, then t′ = U⁻ᵀ t
    let t0: Vec<f64> = linalg::mat_vec(lattice.coeff_map_f64(), shift).iter().map(|v| -v).collect();
    let t: Vec<f64> = (0..n).map(|j| (0..n).map(|i| form.u_inv[i][j] as f64 * t0[i]).sum()).collect();
    let l = &form.chol;

    let mut found: Vec<Vec<i64>> = Vec::new();
    let mut k = vec![0i64; n];
    let node_cap = cap.saturating_mul(20).saturating_add(1_000_000);
    let mut nodes = 0u64;
    let mut state = Search { n, l, t: &t, k: &mut k, found: &mut found, nodes: &mut nodes, node_cap, cap, search };
    state.descend(n, 0.0)?;

    let basis = lattice.basis_f64();
    let mut out: Vec<RawPoint> = found
        .into_iter()
        .map(|kr| {
            let coeffs: Vec<i64> = (0..n).map(|i| (0..n).map(|j| kr[j] * form.u[j][i]).sum()).collect();
            let w: Vec<f64> = (0..n)
                .map(|c| coeffs.iter().zip(basis).fold(shift[c], |acc, (&ki, row)| acc + ki as f64 * row[c]))
                .collect();
            let q = form.eval_f64(&w);
            RawPoint { coeffs, w, q }
        })
        .collect();

    let shift_exact: Option<Vec<Rational>> =
        if exact_ties { Some(shift.iter().map(|&v| exact::rat_from_f64(v)).collect::<Result<_>>()?) } else { None };
    let r2_exact = if exact_ties { Some(exact::rat_from_f64(radius)?.pow(2)) } else { None };
    out.retain(|p| {
        if p.q < r2 - band {
            return true;
        }
        if p.q > r2 + band {
            return false;
        }
        match (&shift_exact, &r2_exact) {
            (Some(x), Some(r2e)) => {
                let pt = lattice.point(&p.coeffs.iter().map(|&c| BigInt::from(c)).collect::<Vec<_>>());
                let w: Vec<Rational> = pt.into_iter().zip(x).map(|(a, b)| a + b).collect();
                w.iter().fold(Rational::zero(), |acc, v| acc + v * v) <= *r2e
            }
            _ => true,
        }
    });
    out.sort_by(|a, b| a.q.total_cmp(&b.q).then_with(|| a.coeffs.cmp(&b.coeffs)));
    Ok(out)
}

struct Search<'a> {
    n: usize,
    l: &'a [Vec<f64>],
    t: &'a [f64],
    k: &'a mut [i64],
    found: &'a mut Vec<Vec<i64>>,
    nodes: &'a mut u64,
    node_cap: u64,
    cap: u64,
    search: f64,
}

impl Search<'_> {
    /// Fix coordinate `level − 1` given `k[level..]` and the partial form value.
    fn descend(&mut self, level: usize, partial: f64) -> Result<()> {
        if level == 0 {
            if self.found.len() as u64 >= self.cap {
                return Err(Error::BudgetExceeded { predicted: self.found.len() as u64 + 1, cap: self.cap });
            }
            self.found.push(self.k.to_vec());
            return Ok(());
        }
        let i = level - 1;
        *self.nodes += 1;
        if *self.nodes > self.node_cap {
            return Err(Error::BudgetExceeded { predicted: *self.nodes, cap: self.cap });
        }
        let lii = self.l[i][i];
        let mut shift = 0.0;
        for j in level..self.n {
            shift += self.l[j][i] * (self.k[j] as f64 - self.t[j]);
        }
        let center = self.t[i] - shift / lii;
        let rem = (self.search - partial).max(0.0);
        let half = rem.sqrt() / lii;
        let lo = (center - half).ceil();
        let hi = (center + half).floor();
        if !(lo.is_finite() && hi.is_finite()) || hi.abs() > 9.0e15 || lo.abs() > 9.0e15 {
            return Err(Error::Overflow("enumeration coefficient out of range".into()));
        }
        let (lo, hi) = (lo as i64, hi as i64);
        for ki in lo..=hi {
            let d = lii * (ki as f64 - center);
            let next = partial + d * d;
            if next > self.search {
                continue;
            }
            self.k[i] = ki;
            self.descend(i, next)?;
        }
        self.k[i] = 0;
        Ok(())
    }
}

/// All points of a coset with Euclidean norm at most `R`.
#[derive(Clone, Debug)]
pub struct PointList<T> {
    pub coset: Coset<T>,
    pub radius: T,
    /// Points in increasing norm order (ties broken by coefficient vector).
    pub points: Vec<Vec<T>>,
    /// Basis coefficients `k` with `w = Σ kᵢ bᵢ + x`.
    pub coeffs: Vec<Vec<i64>>,
}

impl<T> PointList<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn enumerate_points<T: Real>(coset: &Coset<T>, radius: T) -> Result<PointList<T>> {
    enumerate_points_capped(coset, radius, DEFAULT_POINT_CAP)
}

pub fn enumerate_points_capped<T: Real>(coset: &Coset<T>, radius: T, cap: u64) -> Result<PointList<T>> {
    let shift: Vec<f64> = coset.shift.iter().map(|v| v.to_f64_lossy()).collect();
    let raw = enumerate_raw(&coset.lattice, coset.lattice.euclidean_form(), &shift, radius.to_f64_lossy(), cap, true)?;
    let (points, coeffs) = raw.into_iter().map(|p| (p.w.into_iter().map(T::lit).collect(), p.coeffs)).unzip();
    Ok(PointList { coset: coset.clone(), radius, points, coeffs })
}

/// Exact squared Euclidean norm of a coset point; used by tests and callers who
/// need the tie rule spelled out.
pub fn exact_norm_sq<T: Real>(coset: &Coset<T>, coeffs: &[i64]) -> Rational {
    coset.point_exact(coeffs).iter().fold(Rational::zero(), |acc, v| acc + v * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio;

    #[test]
    fn small_balls_in_z2() {
        let z2 = Coset::origin(Lattice::integer(2));
        assert_eq!(enumerate_points(&z2, 1.0f64).unwrap().len(), 5);
        let pl = enumerate_points(&z2, 1.5f64).unwrap();
        assert_eq!(pl.len(), 9);
        assert_eq!(pl.points[0], vec![0.0, 0.0]);
    }

    #[test]
    fn half_shift_in_z() {
        let c = Coset::new(Lattice::integer(1), vec![0.5f64]).unwrap();
        let pl = enumerate_points(&c, 2.0).unwrap();
        let mut xs: Vec<f64> = pl.points.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, vec![-1.5, -0.5, 0.5, 1.5]);
    }

    #[test]
    fn ties_on_the_sphere_are_included() {
        // (3,4) has norm exactly 5
        let z2 = Coset::origin(Lattice::integer(2));
        let pl = enumerate_points(&z2, 5.0f64).unwrap();
        assert!(pl.coeffs.contains(&vec![3, 4]));
        assert!(pl.coeffs.contains(&vec![-5, 0]));
        for k in &pl.coeffs {
            assert!(exact_norm_sq(&z2, k) <= ratio(25, 1));
        }
        assert_eq!(pl.len(), 81);
    }

    #[test]
    fn budget_is_enforced() {
        let z3 = Coset::origin(Lattice::integer(3));
        assert!(matches!(enumerate_points_capped(&z3, 50.0f64, 1000), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn skewed_bases_enumerate_the_same_points() {
        let good = Lattice::from_i64(&[vec![2, 0], vec![1, 3]]).unwrap();
        let bad = Lattice::from_i64(&[vec![207, 15], vec![41, 3]]).unwrap();
        assert!(good.same_points(&bad));
        let a = enumerate_points(&Coset::new(good, vec![0.3, -0.2]).unwrap(), 6.0).unwrap();
        let b = enumerate_points(&Coset::new(bad.clone(), vec![0.3, -0.2]).unwrap(), 6.0).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!(p.iter().zip(q).all(|(x, y): (&f64, &f64)| (x - y).abs() < 1e-9));
        }
        let (u, ui) = lll(&exact::to_f64_matrix(bad.gram()));
        for i in 0..2 {
            for j in 0..2 {
                let v: i64 = (0..2).map(|k| u[i][k] * ui[k][j]).sum();
                assert_eq!(v, i64::from(i == j));
            }
        }
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }
}
