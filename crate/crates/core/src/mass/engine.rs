//! Truncated Gaussian-weighted lattice sums with rigorous error bounds.
//!
//! A sum `Σ_{w ∈ L+x} g(w)·exp(−π q̃(w))` is truncated at a radius chosen from
//! a Banaszczyk-type tail estimate, accumulated in increasing-norm order with
//! compensated summation, and validated by a doubling pass at twice the radius.

use std::f64::consts::{E, PI};

use rayon::prelude::*;

use super::param::{GaussianParam, MetricInfo};
use crate::certified::CertifiedValue;
use crate::error::{Error, Result};
use crate::lattice::{enumerate_raw, Lattice, QuadForm, RawPoint, DEFAULT_POINT_CAP};
use crate::scalar::Real;
use crate::summation::CompensatedSum;

const U64: f64 = f64::EPSILON / 2.0;
/// Width ratio `s′/s` used for weighted tails.
const WIDEN: f64 = 1.1;
const GUARD: f64 = 1e-9;
const PAR_THRESHOLD: usize = 4096;

/// One requested output: `|g(w)| ≤ coef·‖w‖^order`, target absolute error `eps`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Target {
    pub order: u32,
    pub coef: f64,
    pub eps: f64,
}

impl Target {
    pub fn plain(eps: f64) -> Self {
        Self { order: 0, coef: 1.0, eps }
    }
}

/// `ln(c·√(2πe)·e^{−πc²})`
fn ln_banaszczyk(c: f64) -> f64 {
    c.ln() + 0.5 * (2.0 * PI * E).ln() - PI * c * c
}

/// Bound on `Σ_{‖w‖ > R̃} coef·‖w‖^k ρ(w)` over any coset, in scaled units.
fn tail_bound(t: &Target, rt: f64, n: usize, lambda: f64, upper: f64) -> f64 {
    if t.coef == 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    let v = if t.order == 0 {
        let c = rt / nf.sqrt();
        if c < 1.0 / (2.0 * PI).sqrt() {
            return f64::INFINITY;
        }
        (2f64.ln() + nf * ln_banaszczyk(c) + upper.ln()).exp()
    } else {
        let k = t.order as f64;
        let c = rt / (WIDEN * nf.sqrt());
        if c < 1.0 / (2.0 * PI).sqrt() {
            return f64::INFINITY;
        }
        let beta = PI * (1.0 - 1.0 / (WIDEN * WIDEN));
        let ln_ck = 0.5 * k * (k / (2.0 * beta * E)).ln();
        (0.5 * k * lambda.ln() + ln_ck + 2f64.ln() + nf * ln_banaszczyk(c) + nf * WIDEN.ln() + upper.ln()).exp()
    };
    t.coef * v * (1.0 + 1e-12)
}

/// Smallest scaled radius (on a fixed bisection grid, so the result is monotone
/// in `eps`) whose tail bound is at most `eps/2`.
fn solve_radius(t: &Target, n: usize, lambda: f64, upper: f64) -> f64 {
    let lo = if t.order == 0 { 1.0 } else { WIDEN } * (n as f64).sqrt();
    let ok = |r: f64| tail_bound(t, r, n, lambda, upper) <= 0.5 * t.eps;
    if ok(lo) {
        return lo;
    }
    let (mut a, mut b) = (lo, 1.0e4);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if ok(m) {
            b = m;
        } else {
            a = m;
        }
    }
    b
}

pub(crate) struct Prepared {
    pub metric: MetricInfo,
    pub form: Option<QuadForm>,
    /// Upper bound on `ρ(L)` for this parameter.
    pub upper: f64,
}

impl Prepared {
    pub fn form<'a>(&'a self, lattice: &'a Lattice) -> &'a QuadForm {
        self.form.as_ref().unwrap_or_else(|| lattice.euclidean_form())
    }
}

pub(crate) fn prepare<T: Real>(lattice: &Lattice, param: &GaussianParam<T>) -> Result<Prepared> {
    param.check_dim(lattice.dim())?;
    let metric = param.metric_info();
    let form = match &metric.metric {
        None => None,
        Some(m) => Some(QuadForm::with_metric(lattice, m)?),
    };
    let mut p = Prepared { metric, form, upper: 0.0 };
    let key = param.cache_key();
    p.upper = match lattice.cached_mass_bound(&key) {
        Some(u) => u,
        None => {
            let u = lattice_mass_upper(lattice, &p)?;
            lattice.store_mass_bound(key, u);
            u
        }
    };
    Ok(p)
}

/// `ρ(L) ≤ S + ½ρ(L)` where `S` sums the ball on which the tail bound is `½`.
fn lattice_mass_upper(lattice: &Lattice, prep: &Prepared) -> Result<f64> {
    let n = lattice.dim() as f64;
    let target = (0.25f64).ln() / n;
    let (mut a, mut b) = (1.0 / (2.0 * PI).sqrt(), 10.0);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if ln_banaszczyk(m) <= target {
            b = m;
        } else {
            a = m;
        }
    }
    let scale = prep.metric.scale;
    let r = b * n.sqrt() * scale.sqrt();
    let zero = vec![0.0; lattice.dim()];
    let pts = enumerate_raw(lattice, prep.form(lattice), &zero, r, DEFAULT_POINT_CAP, false)?;
    let mut s = CompensatedSum::new();
    let mut qmax: f64 = 0.0;
    for p in &pts {
        let qt = p.q / scale;
        qmax = qmax.max(qt);
        s.add((-PI * qt).exp());
    }
    let rel = 1e-12 + PI * qmax * 1e-12;
    Ok(2.0 * (s.value() + s.rounding_bound()) * (1.0 + rel))
}

/// A positive lower bound on `ρ(L + x)`: the partial sum over a ball that is
/// guaranteed to contain a coset point.
pub(crate) fn mass_lower_bound<T: Real>(lattice: &Lattice, prep: &Prepared, shift: &[T]) -> Result<f64> {
    let form = prep.form(lattice);
    let r = 0.5 * form.chol_diag_sq().iter().sum::<f64>().sqrt() * (1.0 + 1e-9);
    let shift64: Vec<f64> = shift.iter().map(|v| v.to_f64_lossy()).collect();
    let pts = enumerate_raw(lattice, form, &shift64, r, DEFAULT_POINT_CAP, false)?;
    let scale = prep.metric.scale;
    let mut s = CompensatedSum::new();
    let mut qmax: f64 = 0.0;
    for p in &pts {
        let qt = p.q / scale;
        qmax = qmax.max(qt);
        s.add((-PI * qt).exp());
    }
    let lb = (s.value() - s.rounding_bound()) * (1.0 - 1e-10 - PI * qmax * 1e-12);
    if !(lb > 0.0) {
        return Err(Error::Overflow("Gaussian mass underflows double precision".into()));
    }
    Ok(lb)
}

/// Enumeration radius (in metric units) whose unweighted tail over any coset is
/// at most `abs_tail`, together with the tail bound actually achieved.
pub(crate) fn support_radius(n: usize, prep: &Prepared, abs_tail: f64) -> (f64, f64) {
    let t = Target::plain(2.0 * abs_tail);
    let rt = solve_radius(&t, n, prep.metric.lambda, prep.upper);
    (rt * prep.metric.scale.sqrt(), tail_bound(&t, rt, n, prep.metric.lambda, prep.upper))
}

/// Sensitivity `sup_z |∂ρ(L + z)/∂z|` of any coset mass to its shift.
pub(crate) fn shift_sensitivity(n: usize, prep: &Prepared) -> f64 {
    let beta = PI * (1.0 - 1.0 / (WIDEN * WIDEN));
    let c1 = (1.0 / (2.0 * beta * E)).sqrt();
    2.0 * PI * prep.metric.m_op * prep.metric.lambda.sqrt() * c1 * WIDEN.powi(n as i32) * prep.upper * (1.0 + 1e-12)
}

/// Per-point evaluation: given `w` and a bound on the absolute error of each
/// coordinate of `w`, write `g_j(w)` and bounds on their absolute errors.
pub(crate) trait TermFn<T>: Fn(&[T], f64, &mut [T], &mut [f64]) + Sync {}
impl<T, F: Fn(&[T], f64, &mut [T], &mut [f64]) + Sync> TermFn<T> for F {}

/// Term function that also sees the integer coefficients of the point.
pub(crate) trait CoeffTermFn<T>: Fn(&[i64], &[T], f64, &mut [T], &mut [f64]) + Sync {}
impl<T, F: Fn(&[i64], &[T], f64, &mut [T], &mut [f64]) + Sync> CoeffTermFn<T> for F {}

pub(crate) struct SumsOutput<T> {
    pub values: Vec<CertifiedValue<T>>,
}

/// Evaluates `Σ_{w ∈ L+x} g_j(w)·ρ(w)` for each target `j`.
pub(crate) fn weighted_sums<T: Real, F: TermFn<T>>(
    lattice: &Lattice,
    prep: &Prepared,
    shift: &[T],
    targets: &[Target],
    eval: F,
) -> Result<SumsOutput<T>> {
    weighted_sums_coeffs(lattice, prep, shift, targets, |_: &[i64], w: &[T], dw, v: &mut [T], e: &mut [f64]| {
        eval(w, dw, v, e)
    })
}

/// As [`weighted_sums`], with `g_j` allowed to depend on the coefficients `k`
/// of `w = Σ kᵢbᵢ + x`.
pub(crate) fn weighted_sums_coeffs<T: Real, F: CoeffTermFn<T>>(
    lattice: &Lattice,
    prep: &Prepared,
    shift: &[T],
    targets: &[Target],
    eval: F,
) -> Result<SumsOutput<T>> {
    let n = lattice.dim();
    if shift.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: shift.len() });
    }
    if shift.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("shift must be finite".into()));
    }
    for t in targets {
        if !(t.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {}", t.eps)));
        }
    }
    let m = &prep.metric;
    let rt = targets.iter().map(|t| solve_radius(t, n, m.lambda, prep.upper)).fold(0.0, f64::max);
    let r = rt * m.scale.sqrt();
    let shift64: Vec<f64> = shift.iter().map(|v| v.to_f64_lossy()).collect();
    let pts = enumerate_raw(lattice, prep.form(lattice), &shift64, 2.0 * r, DEFAULT_POINT_CAP, false)?;
    let cut = r * r * (1.0 + GUARD);
    let inner = pts.partition_point(|p| p.q <= cut);

    let k = targets.len();
    let ctx = PointCtx::new::<T>(lattice, m, &shift64);
    let terms: Vec<(Vec<T>, Vec<f64>)> = if pts.len() >= PAR_THRESHOLD {
        pts.par_iter().map(|p| ctx.term(p, k, &eval)).collect()
    } else {
        pts.iter().map(|p| ctx.term(p, k, &eval)).collect()
    };

    let tu = T::unit_roundoff().to_f64_lossy();
    let mut values = Vec::with_capacity(k);
    for (j, t) in targets.iter().enumerate() {
        let mut sum = CompensatedSum::<T>::new();
        let mut term_err = 0.0f64;
        for (vals, errs) in &terms[..inner] {
            sum.add(vals[j]);
            term_err += errs[j];
        }
        let at_r = sum.value();
        let rounding_r = sum.rounding_bound().to_f64_lossy();
        let mut wide = sum;
        let mut wide_err = term_err;
        for (vals, errs) in &terms[inner..] {
            wide.add(vals[j]);
            wide_err += errs[j];
        }
        let tail = tail_bound(t, rt, n, m.lambda, prep.upper);
        let mut err = (tail + term_err * (1.0 + 4.0 * (pts.len() as f64 + 2.0) * U64) + rounding_r) * (1.0 + 1e-12);
        let mut warnings = Vec::new();
        let moved = (wide.value() - at_r).abs().to_f64_lossy();
        if moved > err {
            err = (moved + wide_err + wide.rounding_bound().to_f64_lossy() + rounding_r) * (1.0 + 1e-12);
            warnings.push(format!("doubling pass moved the value by {moved:e}; error bound inflated"));
        }
        if err > t.eps {
            warnings.push(format!("error bound {err:e} exceeds the requested {:e} in this precision", t.eps));
        }
        let err_t = T::lit(err).round_up_bound() + T::lit(err * 4.0 * tu);
        values.push(CertifiedValue::new(at_r, err_t, T::lit(r)).with_warnings(warnings));
    }
    Ok(SumsOutput { values })
}

struct PointCtx<'a> {
    n: usize,
    basis: &'a [Vec<f64>],
    shift: &'a [f64],
    m: &'a MetricInfo,
    tu: f64,
}

impl<'a> PointCtx<'a> {
    fn new<T: Real>(lattice: &'a Lattice, m: &'a MetricInfo, shift: &'a [f64]) -> Self {
        Self { n: lattice.dim(), basis: lattice.basis_f64(), shift, m, tu: T::unit_roundoff().to_f64_lossy() }
    }

    fn term<T: Real, F: CoeffTermFn<T>>(&self, p: &RawPoint, k: usize, eval: &F) -> (Vec<T>, Vec<f64>) {
        let n = self.n;
        let nf = n as f64;
        let tu = self.tu;
        // coordinate error of w: basis rounding and accumulation in f64, then conversion to T
        let mut aw: f64 = 0.0;
        let mut wmax: f64 = 0.0;
        for c in 0..n {
            let a = p.coeffs.iter().zip(self.basis).map(|(&ki, row)| (ki as f64 * row[c]).abs()).sum::<f64>()
                + self.shift[c].abs();
            aw = aw.max(a);
            wmax = wmax.max(p.w[c].abs());
        }
        let dw = (nf + 3.0) * U64 * aw + tu * wmax;
        let wn2 = p.w.iter().map(|v| v * v).sum::<f64>();
        let wn = wn2.sqrt();
        let m = self.m;
        let dq = m.m_norm * (2.0 * wn * nf.sqrt() * dw + nf * dw * dw + (2.0 * nf + 2.0) * U64 * wn2) + m.m_err * wn2;
        let qt = p.q / m.scale;
        let dqt = dq / m.scale + 2.0 * U64 * qt;
        let tau = (PI * (dqt + 3.0 * tu * qt) + 2.0 * tu) * 1.01;

        let w: Vec<T> = p.w.iter().map(|&v| T::lit(v)).collect();
        let rho = (-(T::PI() * T::lit(qt))).exp();
        let rho64 = rho.to_f64_lossy();
        let mut vals = vec![T::zero(); k];
        let mut errs = vec![0.0f64; k];
        eval(&p.coeffs, &w, dw, &mut vals, &mut errs);
        // covers weights that underflow to zero
        let tiny = T::min_positive_value().to_f64_lossy();
        let mut out = Vec::with_capacity(k);
        let mut out_err = Vec::with_capacity(k);
        for j in 0..k {
            let t = vals[j] * rho;
            let g = vals[j].to_f64_lossy().abs();
            out.push(t);
            out_err.push(
                g * rho64 * tau + errs[j] * rho64 * (1.0 + tau) + t.to_f64_lossy().abs() * tu + (g + errs[j]) * tiny,
            );
        }
        (out, out_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_is_monotone_in_eps() {
        let mut last = f64::INFINITY;
        for e in [1e-14, 1e-12, 1e-10, 1e-6, 1e-2] {
            let r = solve_radius(&Target::plain(e), 2, 1.0, 1.2);
            assert!(r <= last);
            last = r;
        }
    }

    #[test]
    fn weighted_tails_need_larger_radius() {
        let t0 = Target::plain(1e-12);
        let t4 = Target { order: 4, coef: 1.0, eps: 1e-12 };
        assert!(solve_radius(&t4, 3, 4.0, 2.0) > solve_radius(&t0, 3, 4.0, 2.0));
    }
}
