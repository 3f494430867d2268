//! Means, second moments, gradients and Hessians of lattice Gaussian sums, and
//! the fourth-moment quadratic forms.

use serde::{Deserialize, Serialize};

use crate::certified::CertifiedValue;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::lattice::{Coset, Lattice};
use crate::mass::engine::{mass_lower_bound, prepare, weighted_sums, Prepared, Target};
use crate::mass::{periodic_gaussian, GaussianParam};
use crate::scalar::Real;

/// Moments of `D_{L+x,p}` with per-entry absolute error bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentReport<T> {
    pub mean: Vec<T>,
    pub mean_err: Vec<T>,
    /// `E[wwᵀ]`
    pub second: Vec<Vec<T>>,
    pub second_err: Vec<Vec<T>>,
    /// `E[wwᵀ] − E[w]E[w]ᵀ`
    pub covariance: Vec<Vec<T>>,
    pub covariance_err: Vec<Vec<T>>,
    /// The normalizing mass `ρ(L+x)`; absent for empirical reports.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<CertifiedValue<T>>,
}

impl<T: Real> MomentReport<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean_interval(&self, i: usize) -> Interval<T> {
        Interval::around(self.mean[i], self.mean_err[i])
    }

    pub fn second_interval(&self, i: usize, j: usize) -> Interval<T> {
        Interval::around(self.second[i][j], self.second_err[i][j])
    }

    pub fn covariance_interval(&self, i: usize, j: usize) -> Interval<T> {
        Interval::around(self.covariance[i][j], self.covariance_err[i][j])
    }

    /// Largest per-entry error over mean, second moment and covariance.
    pub fn max_err(&self) -> T {
        let m = self.mean_err.iter().copied().fold(T::zero(), T::max);
        let s = self.second_err.iter().flatten().copied().fold(T::zero(), T::max);
        let c = self.covariance_err.iter().flatten().copied().fold(T::zero(), T::max);
        m.max(s).max(c)
    }
}

/// Value, gradient and Hessian of `f_{L,p}` at `x`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativeReport<T> {
    pub f: CertifiedValue<T>,
    pub grad: Vec<T>,
    pub grad_err: Vec<T>,
    pub hess: Vec<Vec<T>>,
    pub hess_err: Vec<Vec<T>>,
}

impl<T: Real> DerivativeReport<T> {
    pub fn grad_interval(&self, i: usize) -> Interval<T> {
        Interval::around(self.grad[i], self.grad_err[i])
    }

    pub fn hess_interval(&self, i: usize, j: usize) -> Interval<T> {
        Interval::around(self.hess[i][j], self.hess_err[i][j])
    }
}

/// Raw sums `S₀ = Σρ`, `S₁ = Σwρ`, `S₂ = Σwwᵀρ` over a coset.
pub(crate) struct RawMoments<T> {
    pub s0: CertifiedValue<T>,
    pub s1: Vec<CertifiedValue<T>>,
    pub s2: Vec<Vec<CertifiedValue<T>>>,
}

pub(crate) fn raw_moments<T: Real>(
    lattice: &Lattice,
    prep: &Prepared,
    shift: &[T],
    eps: f64,
) -> Result<RawMoments<T>> {
    let n = lattice.dim();
    let tu = T::unit_roundoff().to_f64_lossy();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let mut targets = vec![Target::plain(eps)];
    targets.extend((0..n).map(|_| Target { order: 1, coef: 1.0, eps }));
    targets.extend(pairs.iter().map(|_| Target { order: 2, coef: 1.0, eps }));
    let out = weighted_sums(lattice, prep, shift, &targets, |w: &[T], dw, v, e| {
        v[0] = T::one();
        e[0] = 0.0;
        for i in 0..n {
            v[1 + i] = w[i];
            e[1 + i] = dw;
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let p = w[i] * w[j];
            v[1 + n + k] = p;
            let (a, b) = (w[i].to_f64_lossy().abs(), w[j].to_f64_lossy().abs());
            e[1 + n + k] = (a + b) * dw + dw * dw + tu * a * b;
        }
    })?;
    let mut vals = out.values.into_iter();
    let s0 = vals.next().expect("mass term");
    let s1: Vec<_> = (0..n).map(|_| vals.next().expect("first moments")).collect();
    let mut s2 = vec![vec![CertifiedValue::exact(T::zero()); n]; n];
    for &(i, j) in &pairs {
        let v = vals.next().expect("second moments");
        s2[j][i] = v.clone();
        s2[i][j] = v;
    }
    Ok(RawMoments { s0, s1, s2 })
}

fn finish<T: Real>(raw: RawMoments<T>) -> MomentReport<T> {
    let n = raw.s1.len();
    let mean_c: Vec<_> = raw.s1.iter().map(|s| CertifiedValue::quotient(s, &raw.s0)).collect();
    let second_c: Vec<Vec<_>> =
        raw.s2.iter().map(|row| row.iter().map(|s| CertifiedValue::quotient(s, &raw.s0)).collect()).collect();
    let mut cov = vec![vec![T::zero(); n]; n];
    let mut cov_err = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let iv = second_c[i][j].interval().sub(mean_c[i].interval().mul(mean_c[j].interval()));
            let v = second_c[i][j].value - mean_c[i].value * mean_c[j].value;
            let c = CertifiedValue::centered(v, iv, T::zero());
            cov[i][j] = c.value;
            cov_err[i][j] = c.err;
        }
    }
    MomentReport {
        mean: mean_c.iter().map(|c| c.value).collect(),
        mean_err: mean_c.iter().map(|c| c.err).collect(),
        second: second_c.iter().map(|r| r.iter().map(|c| c.value).collect()).collect(),
        second_err: second_c.iter().map(|r| r.iter().map(|c| c.err).collect()).collect(),
        covariance: cov,
        covariance_err: cov_err,
        mass: Some(raw.s0),
    }
}

fn check_eps<T: Real>(eps: T) -> Result<f64> {
    let e = eps.to_f64_lossy();
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::InvalidParameter(format!("eps must be positive and finite, got {eps}")));
    }
    Ok(e)
}

/// Mean, second moment and covariance of `D_{L+x,p}`, each entry with absolute
/// error at most `eps` (one automatic refinement if the first pass misses).
pub fn moment_report<T: Real>(c: &Coset<T>, p: &GaussianParam<T>, eps: T) -> Result<MomentReport<T>> {
    let e = check_eps(eps)?;
    let prep = prepare(&c.lattice, p)?;
    let lb = mass_lower_bound(&c.lattice, &prep, &c.shift)?;
    let mut sum_eps = e * lb / 4.0;
    let mut report = finish(raw_moments(&c.lattice, &prep, &c.shift, sum_eps)?);
    let worst = report.max_err().to_f64_lossy();
    if worst > e && worst.is_finite() {
        sum_eps *= 0.5 * e / worst;
        report = finish(raw_moments(&c.lattice, &prep, &c.shift, sum_eps)?);
    }
    Ok(report)
}

/// `E[‖w‖]` under `D_{L+x,p}` with absolute error at most `eps`. Exploratory
/// output only: whether this is minimized at `x = 0` is an open question and no
/// check relies on it.
pub fn mean_norm<T: Real>(c: &Coset<T>, p: &GaussianParam<T>, eps: T) -> Result<CertifiedValue<T>> {
    let e = check_eps(eps)?;
    let prep = prepare(&c.lattice, p)?;
    let lb = mass_lower_bound(&c.lattice, &prep, &c.shift)?;
    let n = c.dim() as f64;
    let tu = T::unit_roundoff().to_f64_lossy();
    let run = |sum_eps: f64| -> Result<CertifiedValue<T>> {
        let targets = [Target::plain(sum_eps), Target { order: 1, coef: 1.0, eps: sum_eps }];
        let out = weighted_sums(&c.lattice, &prep, &c.shift, &targets, |w: &[T], dw, v, er| {
            let norm = w.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
            v[0] = T::one();
            er[0] = 0.0;
            v[1] = norm;
            er[1] = n.sqrt() * dw + (n + 2.0) * tu * norm.to_f64_lossy();
        })?;
        Ok(CertifiedValue::quotient(&out.values[1], &out.values[0]))
    };
    let mut sum_eps = e * lb / 4.0;
    let mut v = run(sum_eps)?;
    let err = v.err.to_f64_lossy();
    if err > e && err.is_finite() {
        sum_eps *= 0.5 * e / err;
        v = run(sum_eps)?;
    }
    Ok(v)
}

pub(crate) type IMat<T> = Vec<Vec<Interval<T>>>;

pub(crate) fn imat_mul<T: Real>(a: &IMat<T>, b: &IMat<T>) -> IMat<T> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).fold(Interval::point(T::zero()), |acc, k| acc.add(a[i][k].mul(b[k][j]))))
                .collect()
        })
        .collect()
}

/// Enclosure of the exact precision matrix (`I/s²` or `Σ⁻¹`).
pub(crate) fn precision_intervals<T: Real>(p: &GaussianParam<T>, n: usize) -> IMat<T> {
    let m = p.precision_matrix(n);
    let tu = T::unit_roundoff();
    let pad = match p {
        GaussianParam::Scalar { .. } => T::lit(2.0) * tu,
        GaussianParam::Matrix(mp) => {
            let cond = mp.lambda_max() / mp.lambda_min();
            T::lit(8.0 * (n as f64 + 1.0)) * cond * tu
        }
    };
    let scale = m.iter().flatten().fold(T::zero(), |a, v| a.max(v.abs()));
    m.iter()
        .map(|r| {
            r.iter()
                .map(|&v| match p {
                    GaussianParam::Scalar { .. } => Interval::around(v, v.abs() * pad),
                    GaussianParam::Matrix(_) => Interval::around(v, scale * pad),
                })
                .collect()
        })
        .collect()
}

fn split<T: Real>(iv: &[Interval<T>], center: &[T]) -> (Vec<T>, Vec<T>) {
    let errs = iv
        .iter()
        .zip(center)
        .map(|(i, &c)| (i.hi - c).max(c - i.lo).max(T::zero()).round_up_bound())
        .collect();
    (center.to_vec(), errs)
}

fn derivative_from_sums<T: Real>(
    p: &GaussianParam<T>,
    at_x: &RawMoments<T>,
    at_zero: &CertifiedValue<T>,
    x_in_lattice: bool,
) -> DerivativeReport<T> {
    let n = at_x.s1.len();
    let m = precision_intervals(p, n);
    let mc = p.precision_matrix(n);
    let two_pi = T::lit(2.0) * T::PI();
    let two_pi_i = Interval::around(two_pi, two_pi * T::lit(2.0) * T::unit_roundoff());
    let four_pi2_i = two_pi_i.sqr();
    let den = at_zero.interval();
    let f = if x_in_lattice { CertifiedValue::exact(T::one()) } else { CertifiedValue::quotient(&at_x.s0, at_zero) };

    // grad = −2π M S₁ / ρ(L)
    let s1: Vec<Interval<T>> = at_x.s1.iter().map(|c| c.interval()).collect();
    let grad_iv: Vec<Interval<T>> = (0..n)
        .map(|i| {
            let ms1 = (0..n).fold(Interval::point(T::zero()), |acc, k| acc.add(m[i][k].mul(s1[k])));
            ms1.mul(two_pi_i).neg().div(den)
        })
        .collect();
    let grad_c: Vec<T> = (0..n)
        .map(|i| {
            let ms1 = (0..n).fold(T::zero(), |acc, k| acc + mc[i][k] * at_x.s1[k].value);
            -(two_pi * ms1) / at_zero.value
        })
        .collect();
    let (mut grad, mut grad_err) = split(&grad_iv, &grad_c);
    if x_in_lattice {
        grad = vec![T::zero(); n];
        grad_err = vec![T::zero(); n];
    }

    // hess = (4π² M S₂ M − 2π M S₀) / ρ(L)
    let s2: IMat<T> = at_x.s2.iter().map(|r| r.iter().map(|c| c.interval()).collect()).collect();
    let msm = imat_mul(&imat_mul(&m, &s2), &m);
    let s0 = at_x.s0.interval();
    let mut hess = vec![vec![T::zero(); n]; n];
    let mut hess_err = vec![vec![T::zero(); n]; n];
    let s2c: Vec<Vec<T>> = at_x.s2.iter().map(|r| r.iter().map(|c| c.value).collect()).collect();
    let msm_c = crate::linalg::mul(&crate::linalg::mul(&mc, &s2c), &mc);
    for i in 0..n {
        for j in 0..n {
            let iv = msm[i][j].mul(four_pi2_i).sub(m[i][j].mul(two_pi_i).mul(s0)).div(den);
            let c = (T::lit(4.0) * T::PI() * T::PI() * msm_c[i][j] - two_pi * mc[i][j] * at_x.s0.value) / at_zero.value;
            let cv = CertifiedValue::centered(c, iv, T::zero());
            hess[i][j] = cv.value;
            hess_err[i][j] = cv.err;
        }
    }
    // exact symmetry
    for i in 0..n {
        for j in 0..i {
            let v = (hess[i][j] + hess[j][i]) * T::lit(0.5);
            let e = hess_err[i][j].max(hess_err[j][i]) + (hess[i][j] - hess[j][i]).abs();
            hess[i][j] = v;
            hess[j][i] = v;
            hess_err[i][j] = e;
            hess_err[j][i] = e;
        }
    }
    DerivativeReport { f, grad, grad_err, hess, hess_err }
}

/// `f_{L,p}(x)`, `∇f` and `Hf`, each entry with absolute error at most about `eps`.
pub fn derivative_report<T: Real>(
    lattice: &Lattice,
    p: &GaussianParam<T>,
    x: &[T],
    eps: T,
) -> Result<DerivativeReport<T>> {
    let e = check_eps(eps)?;
    let c = Coset::new(lattice.clone(), x.to_vec())?;
    let prep = prepare(lattice, p)?;
    let n = lattice.dim();
    let mnorm = p.precision_matrix(n).iter().flatten().fold(0.0f64, |a, v| a.max(v.to_f64_lossy().abs()));
    // ρ(L) ≥ 1; the Hessian multiplies sums by up to 4π²·n²·‖M‖²
    let amp = 4.0 * std::f64::consts::PI.powi(2) * (n * n) as f64 * mnorm * mnorm + 2.0 * std::f64::consts::PI * n as f64 * mnorm + 1.0;
    let mut sum_eps = e / (4.0 * amp);
    let trivial = c.is_trivial();
    let zero = vec![T::zero(); n];
    let mut report = {
        let rx = raw_moments(lattice, &prep, x, sum_eps)?;
        let r0 = weighted_sums(lattice, &prep, &zero, &[Target::plain(sum_eps)], |_: &[T], _, v, er| {
            v[0] = T::one();
            er[0] = 0.0;
        })?;
        derivative_from_sums(p, &rx, &r0.values[0], trivial)
    };
    let worst = report.hess_err.iter().flatten().chain(&report.grad_err).fold(0.0f64, |a, v| a.max(v.to_f64_lossy()));
    if worst > e && worst.is_finite() {
        sum_eps *= 0.5 * e / worst;
        let rx = raw_moments(lattice, &prep, x, sum_eps)?;
        let r0 = weighted_sums(lattice, &prep, &zero, &[Target::plain(sum_eps)], |_: &[T], _, v, er| {
            v[0] = T::one();
            er[0] = 0.0;
        })?;
        report = derivative_from_sums(p, &rx, &r0.values[0], trivial);
    }
    Ok(report)
}

/// Both sides of the fourth-moment inequality over `y ∼ D_{L,p}`:
/// `lhs = E[⟨y,u⟩²⟨y,v⟩²]`, `rhs = E[⟨y,u⟩²]E[⟨y,v⟩²] + 2E[⟨y,u⟩⟨y,v⟩]²`.
pub fn fourth_moment_form<T: Real>(
    lattice: &Lattice,
    u: &[T],
    v: &[T],
    p: &GaussianParam<T>,
    eps: T,
) -> Result<(CertifiedValue<T>, CertifiedValue<T>)> {
    let e = check_eps(eps)?;
    let n = lattice.dim();
    for w in [u, v] {
        if w.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: w.len() });
        }
        if w.iter().all(|t| *t == T::zero()) {
            return Err(Error::InvalidParameter("u and v must be nonzero".into()));
        }
    }
    let prep = prepare(lattice, p)?;
    let norm = |w: &[T]| w.iter().map(|t| t.to_f64_lossy().powi(2)).sum::<f64>().sqrt();
    let (nu, nv) = (norm(u), norm(v));
    let ua: f64 = u.iter().map(|t| t.to_f64_lossy().abs()).sum();
    let va: f64 = v.iter().map(|t| t.to_f64_lossy().abs()).sum();
    let tu = T::unit_roundoff().to_f64_lossy();
    let compute = |se: f64| -> Result<(CertifiedValue<T>, CertifiedValue<T>)> {
        let targets = [
            Target::plain(se),
            Target { order: 4, coef: nu * nu * nv * nv, eps: se },
            Target { order: 2, coef: nu * nu, eps: se },
            Target { order: 2, coef: nv * nv, eps: se },
            Target { order: 2, coef: nu * nv, eps: se },
        ];
        let out = weighted_sums(lattice, &prep, &vec![T::zero(); n], &targets, |w: &[T], dw, val, er| {
            let a = w.iter().zip(u).fold(T::zero(), |s, (&p, &q)| s + p * q);
            let b = w.iter().zip(v).fold(T::zero(), |s, (&p, &q)| s + p * q);
            let wa: f64 = w.iter().zip(u).map(|(p, q)| (p.to_f64_lossy() * q.to_f64_lossy()).abs()).sum();
            let wb: f64 = w.iter().zip(v).map(|(p, q)| (p.to_f64_lossy() * q.to_f64_lossy()).abs()).sum();
            let ea = (n as f64 + 1.0) * tu * wa + ua * dw;
            let eb = (n as f64 + 1.0) * tu * wb + va * dw;
            let (fa, fb) = (a.to_f64_lossy().abs(), b.to_f64_lossy().abs());
            // error of a product xy given errors of x and y
            let prod = |x: f64, ex: f64, y: f64, ey: f64| x * ey + y * ex + ex * ey + 2.0 * tu * x * y;
            val[0] = T::one();
            er[0] = 0.0;
            let (a2, ea2) = (fa * fa, prod(fa, ea, fa, ea));
            let (b2, eb2) = (fb * fb, prod(fb, eb, fb, eb));
            val[1] = a * a * b * b;
            er[1] = prod(a2, ea2, b2, eb2) + 2.0 * tu * a2 * b2;
            val[2] = a * a;
            er[2] = ea2;
            val[3] = b * b;
            er[3] = eb2;
            val[4] = a * b;
            er[4] = prod(fa, ea, fb, eb);
        })?;
        let q = |i: usize| CertifiedValue::quotient(&out.values[i], &out.values[0]);
        let lhs = q(1);
        let (eu, ev, euv) = (q(2), q(3), q(4));
        let iv = eu.interval().mul(ev.interval()).add(euv.interval().sqr().scale(T::lit(2.0)));
        let c = eu.value * ev.value + T::lit(2.0) * euv.value * euv.value;
        let rhs = CertifiedValue::centered(c, iv, lhs.radius_used);
        Ok((lhs, rhs))
    };
    // ρ(L) ≥ 1; products of expectations of size up to E[⟨y,u⟩²] amplify errors
    let (mut lhs, mut rhs) = compute(e / 8.0)?;
    let worst = lhs.err.max(rhs.err).to_f64_lossy();
    if worst > e && worst.is_finite() {
        (lhs, rhs) = compute((e / 8.0 * 0.5 * e / worst).max(f64::MIN_POSITIVE))?;
    }
    Ok((lhs, rhs))
}

/// Central finite differences of `f_{L,p}` at `x` with step `h`: gradient and
/// Hessian. Validation only; the truncation error of the difference quotients
/// is not part of any certificate.
pub fn finite_difference_derivatives<T: Real>(
    lattice: &Lattice,
    p: &GaussianParam<T>,
    x: &[T],
    h: T,
    eps: T,
) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let n = x.len();
    let f = |d: &[(usize, T)]| -> Result<T> {
        let mut y = x.to_vec();
        for &(i, s) in d {
            y[i] = y[i] + s;
        }
        Ok(periodic_gaussian(lattice, p, &y, eps)?.value)
    };
    let two = T::lit(2.0);
    let f0 = f(&[])?;
    let mut grad = vec![T::zero(); n];
    let mut hess = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        let fp = f(&[(i, h)])?;
        let fm = f(&[(i, -h)])?;
        grad[i] = (fp - fm) / (two * h);
        hess[i][i] = (fp - two * f0 + fm) / (h * h);
        for j in 0..i {
            let pp = f(&[(i, h), (j, h)])?;
            let pm = f(&[(i, h), (j, -h)])?;
            let mp = f(&[(i, -h), (j, h)])?;
            let mm = f(&[(i, -h), (j, -h)])?;
            let v = (pp - pm - mp + mm) / (T::lit(4.0) * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    Ok((grad, hess))
}

/// Hessian of the product `f·g` from the two reports:
/// `f·Hg + g·Hf + ∇f∇gᵀ + ∇g∇fᵀ`, with an entrywise error bound.
pub fn hessian_of_product<T: Real>(a: &DerivativeReport<T>, b: &DerivativeReport<T>) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
    let n = a.grad.len();
    let mut h = vec![vec![T::zero(); n]; n];
    let mut e = vec![vec![T::zero(); n]; n];
    let fa = a.f.interval();
    let fb = b.f.interval();
    for i in 0..n {
        for j in 0..n {
            let iv = fa
                .mul(b.hess_interval(i, j))
                .add(fb.mul(a.hess_interval(i, j)))
                .add(a.grad_interval(i).mul(b.grad_interval(j)))
                .add(b.grad_interval(i).mul(a.grad_interval(j)));
            let c = a.f.value * b.hess[i][j]
                + b.f.value * a.hess[i][j]
                + a.grad[i] * b.grad[j]
                + b.grad[i] * a.grad[j];
            let cv = CertifiedValue::centered(c, iv, T::zero());
            h[i][j] = cv.value;
            e[i][j] = cv.err;
        }
    }
    (h, e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_norm_on_the_integers() {
        // E|w| over D_{Z+1/2} and D_Z at s = 1, 30-digit direct sums
        let p = GaussianParam::scalar(1.0f64).unwrap();
        let h = mean_norm(&Coset::new(Lattice::integer(1), vec![0.5]).unwrap(), &p, 1e-13).unwrap();
        let z = mean_norm(&Coset::origin(Lattice::integer(1)), &p, 1e-13).unwrap();
        assert!((h.value - 0.50186397487805530).abs() < 1e-12, "{h:?}");
        assert!((z.value - 0.079564631957610251).abs() < 1e-12, "{z:?}");
    }

    fn s1() -> GaussianParam<f64> {
        GaussianParam::scalar(1.0).unwrap()
    }

    #[test]
    fn second_moment_of_integers() {
        let r = moment_report(&Coset::origin(Lattice::integer(1)), &s1(), 1e-12).unwrap();
        assert!(r.mean[0].abs() <= r.mean_err[0]);
        assert!((r.second[0][0] - 1.0 / (4.0 * std::f64::consts::PI)).abs() <= r.second_err[0][0] + 1e-16);
        assert!(r.second_err[0][0] <= 1e-12);
    }

    #[test]
    fn shifted_moments() {
        let r = moment_report(&Coset::new(Lattice::integer(1), vec![0.25]).unwrap(), &s1(), 1e-12).unwrap();
        assert!((r.mean[0] - 0.08642843933550576).abs() <= r.mean_err[0] + 1e-16);
        assert!((r.second[0][0] - 0.15918284202533127).abs() <= r.second_err[0][0] + 1e-16);
        let r = moment_report(&Coset::new(Lattice::integer(1), vec![0.5]).unwrap(), &s1(), 1e-12).unwrap();
        assert!((r.second[0][0] - 0.25372796275665728).abs() <= r.second_err[0][0] + 1e-16);
    }

    #[test]
    fn derivatives_at_zero_and_quarter() {
        let z = Lattice::integer(1);
        let d = derivative_report(&z, &s1(), &[0.0], 1e-10).unwrap();
        assert_eq!(d.grad, vec![0.0]);
        assert!((d.hess[0][0] + std::f64::consts::PI).abs() <= d.hess_err[0][0] + 1e-15);
        let d = derivative_report(&z, &s1(), &[0.25], 1e-10).unwrap();
        assert!((d.grad[0] + 0.49983865297441621).abs() <= d.grad_err[0] + 1e-15);
    }

    #[test]
    fn kurtosis_of_integers() {
        let (l, r) = fourth_moment_form(&Lattice::integer(1), &[1.0], &[1.0], &s1(), 1e-12).unwrap();
        assert!((l.value - 0.07965450911080122).abs() <= l.err + 1e-16);
        assert!((r.value - 0.018997721932938332).abs() <= r.err + 1e-16);
        assert!(fourth_moment_form(&Lattice::integer(1), &[0.0], &[1.0], &s1(), 1e-12).is_err());
    }

    #[test]
    fn finite_differences_agree() {
        let l = Lattice::from_i64(&[vec![1, 1], vec![0, 2]]).unwrap();
        let x = [0.2, -0.35];
        let d = derivative_report(&l, &s1(), &x, 1e-13).unwrap();
        let (g, h) = finite_difference_derivatives(&l, &s1(), &x, 1e-4, 1e-15).unwrap();
        for i in 0..2 {
            assert!((g[i] - d.grad[i]).abs() <= 1e-6 * d.grad[i].abs().max(1e-3));
            for j in 0..2 {
                assert!((h[i][j] - d.hess[i][j]).abs() <= 1e-4 * d.hess[i][j].abs().max(1e-2));
            }
        }
    }
}
