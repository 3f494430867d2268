//! Certified Gaussian masses, periodic Gaussians, the dual (Poisson) form and
//! the coset split identity over `L/2L`.

pub(crate) mod engine;
mod param;

use serde::{Deserialize, Serialize};

use crate::certified::CertifiedValue;
use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::interval::Interval;
use crate::lattice::{quotient_reps, sublattice, Coset, Lattice};
use crate::scalar::Real;
use engine::{prepare, weighted_sums, Target};

pub use param::{GaussianParam, MatrixParam};

/// `exp(−π q(x))`: `exp(−π‖x‖²/s²)` or `exp(−π xᵀΣ⁻¹x)`.
pub fn rho_point<T: Real>(x: &[T], p: &GaussianParam<T>) -> Result<T> {
    p.check_dim(x.len())?;
    Ok((-(T::PI() * p.quadratic(x))).exp())
}

fn eps_f64<T: Real>(eps: T) -> Result<f64> {
    let e = eps.to_f64_lossy();
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::InvalidParameter(format!("eps must be positive and finite, got {eps}")));
    }
    Ok(e)
}

fn unit<T: Real>(_: &[T], _: f64, v: &mut [T], e: &mut [f64]) {
    v[0] = T::one();
    e[0] = 0.0;
}

/// `ρ(L + x)` with absolute error at most `eps`.
pub fn mass<T: Real>(c: &Coset<T>, p: &GaussianParam<T>, eps: T) -> Result<CertifiedValue<T>> {
    let e = eps_f64(eps)?;
    let prep = prepare(&c.lattice, p)?;
    Ok(weighted_sums(&c.lattice, &prep, &c.shift, &[Target::plain(e)], unit)?.values.remove(0))
}

/// `ρ(L + x)` with error at most `rel` times the value.
pub fn mass_relative<T: Real>(c: &Coset<T>, p: &GaussianParam<T>, rel: T) -> Result<CertifiedValue<T>> {
    let r = eps_f64(rel)?;
    let prep = prepare(&c.lattice, p)?;
    let lb = engine::mass_lower_bound(&c.lattice, &prep, &c.shift)?;
    Ok(weighted_sums(&c.lattice, &prep, &c.shift, &[Target::plain(r * lb)], unit)?.values.remove(0))
}

/// `ρ(L + z)` where the coset actually wanted is `L + z′` with `‖z − z′‖ ≤ shift_err`
/// (for instance a shift that was rounded when formed as `x + y`). The error
/// bound covers the displacement.
pub fn mass_with_shift_error<T: Real>(
    c: &Coset<T>,
    p: &GaussianParam<T>,
    eps: T,
    shift_err: f64,
) -> Result<CertifiedValue<T>> {
    let mut e = eps_f64(eps)?;
    let prep = prepare(&c.lattice, p)?;
    if shift_err > 0.0 {
        e *= 0.5;
    }
    let mut v = weighted_sums(&c.lattice, &prep, &c.shift, &[Target::plain(e)], unit)?.values.remove(0);
    if shift_err > 0.0 {
        let extra = engine::shift_sensitivity(c.dim(), &prep) * shift_err;
        v.err = (v.err + T::lit(extra)).round_up_bound();
    }
    Ok(v)
}

/// `f_{L,p}(x) = ρ_p(L + x)/ρ_p(L)` with absolute error at most `eps`.
pub fn periodic_gaussian<T: Real>(lat: &Lattice, p: &GaussianParam<T>, x: &[T], eps: T) -> Result<CertifiedValue<T>> {
    let e = eps_f64(eps)?;
    let num = Coset::new(lat.clone(), x.to_vec())?;
    p.check_dim(lat.dim())?;
    if num.is_trivial() {
        return Ok(CertifiedValue::exact(T::one()));
    }
    // ρ(L) ≥ 1, so a quarter of eps on each mass keeps the quotient error below eps
    let part = T::lit(e / 4.0);
    let top = mass(&num, p, part)?;
    let bottom = mass(&Coset::origin(lat.clone()), p, part)?;
    Ok(CertifiedValue::quotient(&top, &bottom))
}

/// One point of an `f_{L,s}(x)` curve family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvePoint<T> {
    pub x: Vec<T>,
    pub s: T,
    pub f: CertifiedValue<T>,
}

/// `f_{L,s}(x)` over the product of `x_grid` and `s_list`, ordered by `s` and
/// then by position in `x_grid`.
pub fn curve_family<T: Real>(lat: &Lattice, x_grid: &[Vec<T>], s_list: &[T], eps: T) -> Result<Vec<CurvePoint<T>>> {
    if x_grid.is_empty() || s_list.is_empty() {
        return Err(Error::InvalidParameter("curve grids must be nonempty".into()));
    }
    let mut out = Vec::with_capacity(x_grid.len() * s_list.len());
    for &s in s_list {
        let p = GaussianParam::scalar(s)?;
        for x in x_grid {
            out.push(CurvePoint { x: x.clone(), s, f: periodic_gaussian(lat, &p, x, eps)? });
        }
    }
    Ok(out)
}

/// `ρ_s(L + x)` evaluated through Poisson summation over the dual lattice:
/// `(sⁿ/det L)·Σ_{w ∈ L*} ρ_{1/s}(w)·cos(2π⟨w, x⟩)`.
pub fn dual_mass<T: Real>(c: &Coset<T>, p: &GaussianParam<T>, eps: T) -> Result<CertifiedValue<T>> {
    let e = eps_f64(eps)?;
    let GaussianParam::Scalar { s, s_sq } = p else {
        return Err(Error::InvalidParameter("dual_mass needs a scalar parameter".into()));
    };
    let n = c.dim();
    let tu = T::unit_roundoff().to_f64_lossy();
    let dual = c.lattice.dual();
    let dp = GaussianParam::from_variance(T::one() / *s_sq)?;
    let factor = {
        let half = s.to_f64_lossy().powi(n as i32);
        T::lit(half / c.lattice.determinant_f64())
    };
    let factor_rel = (n as f64 + 6.0) * tu + 4.0 * f64::EPSILON;
    let f64factor = factor.to_f64_lossy() * (1.0 + factor_rel);
    let prep = prepare(&dual, &dp)?;
    let x = c.shift.clone();
    let xabs: f64 = x.iter().map(|v| v.to_f64_lossy().abs()).sum();
    let s2d = dp_scale(&dp);
    let targets = [
        Target::plain(e / (2.0 * f64factor)),
        // Σ q̃ρ, to bound the effect of rounding 1/s² in the dual parameter
        Target { order: 2, coef: 1.0 / s2d, eps: 1.0 },
    ];
    let out = weighted_sums(&dual, &prep, &vec![T::zero(); n], &targets, |w: &[T], dw, v, er| {
        let (c, ce) = cos_term(w, &x, xabs, dw);
        v[0] = c;
        er[0] = ce;
        v[1] = w.iter().fold(T::zero(), |a, &t| a + t * t) / T::lit(s2d);
        let wn2: f64 = w.iter().map(|t| t.to_f64_lossy().powi(2)).sum();
        er[1] = (wn2 * (n as f64 + 3.0) * tu + 2.0 * wn2.sqrt() * dw * (n as f64).sqrt()) / s2d;
    })?;
    let sum = &out.values[0];
    let qsum = out.values[1].upper().to_f64_lossy().max(0.0);
    let param_err = std::f64::consts::PI * 2.0 * tu * qsum;
    let value = factor * sum.value;
    let err = f64factor * (sum.err.to_f64_lossy() + param_err) + value.to_f64_lossy().abs() * factor_rel;
    Ok(CertifiedValue::new(value, T::lit(err).round_up_bound(), sum.radius_used).with_warnings(sum.warnings.clone()))
}

fn dp_scale<T: Real>(p: &GaussianParam<T>) -> f64 {
    match p {
        GaussianParam::Scalar { s_sq, .. } => s_sq.to_f64_lossy(),
        GaussianParam::Matrix(_) => 1.0,
    }
}

/// `cos(2π⟨w, x⟩)` and a bound on its absolute error given a per-coordinate
/// error `dw` in `w`.
pub(crate) fn cos_term<T: Real>(w: &[T], x: &[T], xabs: f64, dw: f64) -> (T, f64) {
    let (a, ae) = angle(w, x, xabs, dw);
    (a.cos(), ae + 2.0 * T::unit_roundoff().to_f64_lossy())
}

pub(crate) fn sin_term<T: Real>(w: &[T], x: &[T], xabs: f64, dw: f64) -> (T, f64) {
    let (a, ae) = angle(w, x, xabs, dw);
    (a.sin(), ae + 2.0 * T::unit_roundoff().to_f64_lossy())
}

fn angle<T: Real>(w: &[T], x: &[T], xabs: f64, dw: f64) -> (T, f64) {
    let tu = T::unit_roundoff().to_f64_lossy();
    let n = w.len() as f64;
    let ip = w.iter().zip(x).fold(T::zero(), |a, (&p, &q)| a + p * q);
    let ip_abs: f64 = w.iter().zip(x).map(|(p, q)| (p.to_f64_lossy() * q.to_f64_lossy()).abs()).sum();
    let arg = T::lit(2.0) * T::PI() * ip;
    let two_pi = 2.0 * std::f64::consts::PI;
    let err = two_pi * ((n + 2.0) * tu * ip_abs + dw * xabs) + 3.0 * tu * arg.to_f64_lossy().abs();
    (arg, err)
}

/// The four expectations under `D_{L,p}` used by the cosine-correlation forms.
#[derive(Clone, Debug, Serialize)]
pub struct CosineMoments<T> {
    /// `E[cos 2π⟨w,x⟩]`
    pub cos_x: CertifiedValue<T>,
    /// `E[cos 2π⟨w,y⟩]`
    pub cos_y: CertifiedValue<T>,
    /// `E[cos 2π⟨w,x⟩·cos 2π⟨w,y⟩]`
    pub cos_cos: CertifiedValue<T>,
    /// `E[sin 2π⟨w,x⟩·sin 2π⟨w,y⟩]`
    pub sin_sin: CertifiedValue<T>,
}

/// Expectations of `cos`/`sin` products over `w ∼ D_{L,p}`, each with absolute
/// error at most `eps`.
pub fn cosine_moments<T: Real>(
    lat: &Lattice,
    x: &[T],
    y: &[T],
    p: &GaussianParam<T>,
    eps: T,
) -> Result<CosineMoments<T>> {
    let e = eps_f64(eps)?;
    let n = lat.dim();
    for v in [x, y] {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    let prep = prepare(lat, p)?;
    let xa: f64 = x.iter().map(|v| v.to_f64_lossy().abs()).sum();
    let ya: f64 = y.iter().map(|v| v.to_f64_lossy().abs()).sum();
    let tu = T::unit_roundoff().to_f64_lossy();
    let part = e / 4.0;
    let targets = [Target::plain(part); 5];
    let out = weighted_sums(lat, &prep, &vec![T::zero(); n], &targets, |w: &[T], dw, v, er| {
        let (cx, cxe) = cos_term(w, x, xa, dw);
        let (cy, cye) = cos_term(w, y, ya, dw);
        let (sx, sxe) = sin_term(w, x, xa, dw);
        let (sy, sye) = sin_term(w, y, ya, dw);
        v[0] = T::one();
        er[0] = 0.0;
        v[1] = cx;
        er[1] = cxe;
        v[2] = cy;
        er[2] = cye;
        v[3] = cx * cy;
        er[3] = cxe + cye + cxe * cye + tu;
        v[4] = sx * sy;
        er[4] = sxe + sye + sxe * sye + tu;
    })?;
    let den = &out.values[0];
    let q = |i: usize| CertifiedValue::quotient(&out.values[i], den);
    Ok(CosineMoments { cos_x: q(1), cos_y: q(2), cos_cos: q(3), sin_sin: q(4) })
}

/// Both sides of the coset split identity over `L/2L`.
#[derive(Clone, Debug, Serialize)]
pub struct SplitReport<T> {
    /// `ρ(L+x)·ρ(L+y)`
    pub lhs: CertifiedValue<T>,
    /// Per coset `c ∈ L/2L`: `(ρ_{√2}(2L+c+x+y), ρ_{√2}(2L+c+x−y))`.
    pub terms: Vec<(CertifiedValue<T>, CertifiedValue<T>)>,
    /// `Σ_c` of the products.
    pub rhs: CertifiedValue<T>,
}

impl<T: Real> SplitReport<T> {
    /// `|lhs − rhs| ≤ lhs.err + rhs.err`
    pub fn consistent(&self) -> bool {
        (self.lhs.value - self.rhs.value).abs() <= self.lhs.err + self.rhs.err
    }
}

/// `v` as an exact rational vector.
pub(crate) fn exact_vec<T: Real>(v: &[T]) -> Result<Vec<Rational>> {
    v.iter().map(|x| exact::rat_from_f64(x.to_f64_lossy())).collect()
}

/// Rounds an exact vector to `T`, returning the Euclidean norm of the rounding
/// error (rounded up).
pub(crate) fn round_vec<T: Real>(v: &[Rational]) -> (Vec<T>, f64) {
    let mut err2 = Rational::from_integer(0.into());
    let mut out = Vec::with_capacity(v.len());
    for r in v {
        let f = T::lit(exact::rat_to_f64(r));
        let back = exact::rat_from_f64(f.to_f64_lossy()).expect("finite");
        let d = &back - r;
        err2 += &d * &d;
        out.push(f);
    }
    let e = exact::rat_to_f64(&err2).sqrt();
    (out, if e == 0.0 { 0.0 } else { e * (1.0 + 1e-12) + f64::MIN_POSITIVE })
}

/// Evaluates both sides of `ρ(L+x)ρ(L+y) = Σ_{c ∈ L/2L} ρ_{√2}(2L+c+x+y)·ρ_{√2}(2L+c+x−y)`
/// (for a matrix parameter `Σ`, the right side uses `2Σ`).
pub fn theta_split_identity<T: Real>(
    lat: &Lattice,
    x: &[T],
    y: &[T],
    p: &GaussianParam<T>,
    eps: T,
) -> Result<SplitReport<T>> {
    let e = eps_f64(eps)?;
    let n = lat.dim();
    let cx = Coset::new(lat.clone(), x.to_vec())?;
    let cy = Coset::new(lat.clone(), y.to_vec())?;
    let two = sublattice(lat, &exact::int_from_i64(&(0..n).map(|i| (0..n).map(|j| if i == j { 2 } else { 0 }).collect()).collect::<Vec<_>>()))?;
    let reps = quotient_reps(lat, &two)?;
    let p2 = p.with_variance_factor(T::lit(2.0))?;

    let u1 = prepare(lat, p)?.upper.max(1.0);
    let u2 = prepare(&two.lattice, &p2)?.upper.max(1.0);
    let e_lhs = T::lit(e / (4.0 * u1));
    let e_rhs = T::lit(e / (4.0 * (1u64 << n) as f64 * u2));

    let lhs = CertifiedValue::product(&mass(&cx, p, e_lhs)?, &mass(&cy, p, e_lhs)?);
    let xe = exact_vec(x)?;
    let ye = exact_vec(y)?;
    let mut terms = Vec::with_capacity(reps.len());
    let mut acc = Interval::point(T::zero());
    let mut acc_val = crate::summation::CompensatedSum::new();
    let mut radius = T::zero();
    for c in &reps.reps {
        let plus: Vec<Rational> = (0..n).map(|i| &c[i] + &xe[i] + &ye[i]).collect();
        let minus: Vec<Rational> = (0..n).map(|i| &c[i] + &xe[i] - &ye[i]).collect();
        let (sp, ep) = round_vec::<T>(&plus);
        let (sm, em) = round_vec::<T>(&minus);
        let a = mass_with_shift_error(&Coset::new(two.lattice.clone(), sp)?, &p2, e_rhs, ep)?;
        let b = mass_with_shift_error(&Coset::new(two.lattice.clone(), sm)?, &p2, e_rhs, em)?;
        let prod = CertifiedValue::product(&a, &b);
        acc = acc.add(prod.interval());
        acc_val.add(prod.value);
        radius = radius.max(prod.radius_used);
        terms.push((a, b));
    }
    let rhs = CertifiedValue::centered(acc_val.value(), acc, radius);
    Ok(SplitReport { lhs, terms, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(n: usize) -> Lattice {
        Lattice::integer(n)
    }

    fn s1() -> GaussianParam<f64> {
        GaussianParam::scalar(1.0).unwrap()
    }

    #[test]
    fn curve_family_values() {
        let rows = curve_family(&z(1), &[vec![0.0], vec![0.25], vec![0.5]], &[1.0, 2.0], 1e-12).unwrap();
        let f: Vec<f64> = rows.iter().map(|r| r.f.value).collect();
        for (got, want) in f.iter().zip([1.0, 0.9204354, 0.8408964, 1.0, 0.9999930, 0.9999861]) {
            assert!((got - want).abs() < 1e-7, "{f:?}");
        }
        assert_eq!(rows[4].s, 2.0);
        assert!(curve_family::<f64>(&z(1), &[], &[1.0], 1e-9).is_err());
    }

    #[test]
    fn rho_point_values() {
        assert_eq!(rho_point(&[0.0f64, 0.0], &s1()).unwrap(), 1.0);
        assert!((rho_point(&[1.0f64], &s1()).unwrap() - (-std::f64::consts::PI).exp()).abs() < 1e-17);
        let sig = GaussianParam::matrix(vec![vec![1.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let v = rho_point(&[1.0f64, 1.0], &sig).unwrap();
        assert!((v - (-1.25 * std::f64::consts::PI).exp()).abs() < 1e-16);
        assert!(rho_point(&[1.0f64], &sig).is_err());
    }

    #[test]
    fn mass_of_integers() {
        let m = mass(&Coset::origin(z(1)), &s1(), 1e-12).unwrap();
        assert!((m.value - 1.0864348112133080).abs() <= m.err + 1e-15);
        assert!(m.err <= 1e-12);
        let h = mass(&Coset::new(z(1), vec![0.5]).unwrap(), &s1(), 1e-12).unwrap();
        assert!((h.value - 0.9135791381561168).abs() <= h.err + 1e-15);
    }

    #[test]
    fn looser_eps_never_grows_the_radius() {
        let c = Coset::new(Lattice::from_i64(&[vec![2, 1], vec![0, 3]]).unwrap(), vec![0.3, -0.2]).unwrap();
        let mut last = f64::INFINITY;
        for e in [1e-14, 1e-10, 1e-6, 1e-3] {
            let m = mass(&c, &s1(), e).unwrap();
            assert!(m.radius_used <= last);
            last = m.radius_used;
        }
    }

    #[test]
    fn periodic_gaussian_basics() {
        let f = periodic_gaussian(&z(2), &s1(), &[0.0, 0.0], 1e-10).unwrap();
        assert_eq!((f.value, f.err), (1.0, 0.0));
        let f = periodic_gaussian(&z(1), &s1(), &[0.5], 1e-10).unwrap();
        assert!((f.value - 0.8408964152537145).abs() <= f.err + 1e-15);
        assert!(f.err <= 1e-10);
    }

    #[test]
    fn dual_form_matches() {
        let c = Coset::new(z(1), vec![0.5]).unwrap();
        let d = dual_mass(&c, &s1(), 1e-12).unwrap();
        assert!((d.value - 0.9135791381561168).abs() <= d.err + 1e-15);
        let c = Coset::new(Lattice::from_i64(&[vec![1, 1], vec![1, -1]]).unwrap(), vec![0.3, 0.1]).unwrap();
        let p = GaussianParam::scalar(1.3f64).unwrap();
        let a = mass(&c, &p, 1e-12).unwrap();
        let b = dual_mass(&c, &p, 1e-12).unwrap();
        assert!((a.value - b.value).abs() <= a.err + b.err);
        let sig = GaussianParam::matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(dual_mass(&c, &sig, 1e-12).is_err());
    }

    #[test]
    fn cosine_moments_basics() {
        let m = cosine_moments(&z(1), &[0.0], &[0.0], &s1(), 1e-10).unwrap();
        assert!((m.cos_x.value - 1.0).abs() <= m.cos_x.err + 1e-15);
        assert!(m.sin_sin.value.abs() <= m.sin_sin.err);
        let m = cosine_moments(&z(1), &[0.5], &[0.5], &s1(), 1e-10).unwrap();
        assert!((m.cos_x.value - 0.8408964152537145).abs() <= m.cos_x.err + 1e-15);
        assert!(m.sin_sin.value.abs() <= m.sin_sin.err + 1e-15);
    }

    #[test]
    fn split_identity_on_integers() {
        let r = theta_split_identity(&z(1), &[0.0], &[0.0], &s1(), 1e-10).unwrap();
        assert_eq!(r.terms.len(), 2);
        assert!(r.consistent());
        assert!((r.lhs.value - 1.1803405990160962).abs() < 1e-10);
        assert!((r.terms[0].0.value.powi(2) - 1.0074837203450847).abs() < 1e-10);
        let r = theta_split_identity(&z(2), &[0.25, 0.0], &[0.1, 0.3], &s1(), 1e-10).unwrap();
        assert_eq!(r.terms.len(), 4);
        assert!(r.consistent());
    }
}
