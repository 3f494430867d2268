//! Interval-safe checks of the Gaussian-mass inequalities and seeded
//! random-instance campaigns.
//!
//! Mass-based checks read `eps` as a relative accuracy for each mass;
//! moment-based checks read it as an absolute accuracy scaled by the
//! parameter. A verdict that is inconclusive is retried at `eps/100` twice,
//! then, where one exists, in a difference form whose value is the gap itself.

mod campaign;
mod forms;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::certified::CertifiedValue;
use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::interval::Interval;
use crate::lattice::{intersect, sublattice, Coset, Lattice, SublatticeRep};
use crate::linalg;
use crate::mass::{cosine_moments, dual_mass, exact_vec, mass, theta_split_identity, GaussianParam};
use crate::moments::{fourth_moment_form, imat_mul, moment_report, precision_intervals, IMat, MomentReport};

pub use campaign::{
    run_campaign, splitmix64, CampaignSummary, CheckKind, CheckSummary, EnsembleKind, Instance, InstanceEnsemble,
    TrialError,
};

type I = Interval<f64>;
type Param = GaussianParam<f64>;

const TIGHTEN: [f64; 3] = [1.0, 1e-2, 1e-4];
const U: f64 = f64::EPSILON / 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Holds,
    Inconclusive,
    Violated,
}

impl Status {
    fn severity(self) -> u8 {
        match self {
            Status::Holds => 0,
            Status::Inconclusive => 1,
            Status::Violated => 2,
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Holds => "HOLDS",
            Status::Inconclusive => "INCONCLUSIVE",
            Status::Violated => "VIOLATED",
        })
    }
}

/// Outcome of one check. For a claim `lhs ≤ rhs`: HOLDS iff `lhs.hi ≤ rhs.lo`,
/// VIOLATED iff `lhs.lo > rhs.hi`. Claims of the form `a ≥ b` are stored as
/// `b ≤ a`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    pub lhs: I,
    pub rhs: I,
    /// `rhs.lo − lhs.hi`
    pub margin: f64,
    /// How the two sides were obtained: `direct`, `exact`, `psd`,
    /// `consistency`, or one of the gap forms `lagrange`, `dual-difference`,
    /// `centered`, `coset-split`, `inclusion-exclusion` (possibly prefixed
    /// `primal-` when taken from an equivalent primal check).
    pub form: String,
    pub eps_used: f64,
    pub instance: Value,
}

impl Verdict {
    pub fn compare(name: &str, lhs: I, rhs: I, form: &str, eps: f64, instance: Value) -> Self {
        let status = if lhs.hi <= rhs.lo {
            Status::Holds
        } else if lhs.lo > rhs.hi {
            Status::Violated
        } else {
            Status::Inconclusive
        };
        Self {
            name: name.into(),
            status,
            lhs,
            rhs,
            margin: rhs.lo - lhs.hi,
            form: form.into(),
            eps_used: eps,
            instance,
        }
    }

    /// Exact equality established structurally (e.g. a shift in the lattice).
    pub fn exact(name: &str, value: f64, eps: f64, instance: Value) -> Self {
        Self::compare(name, I::point(value), I::point(value), "exact", eps, instance)
    }

    /// Claim `gap > 0` for an enclosure of `rhs − lhs`: HOLDS needs a strictly
    /// positive lower end.
    fn gap(name: &str, gap: I, form: &str, eps: f64, instance: Value) -> Self {
        let status = if gap.lo > 0.0 {
            Status::Holds
        } else if gap.hi < 0.0 {
            Status::Violated
        } else {
            Status::Inconclusive
        };
        Self {
            name: name.into(),
            status,
            lhs: I::point(0.0),
            rhs: gap,
            margin: gap.lo,
            form: form.into(),
            eps_used: eps,
            instance,
        }
    }

    /// PSD claim from the smallest eigenvalue and its tolerance.
    fn psd(name: &str, lambda_min: f64, tol: f64, eps: f64, instance: Value) -> Self {
        let mut v = Self::compare(name, I::point(0.0), I::point(lambda_min + tol), "psd", eps, instance);
        v.margin = lambda_min + tol;
        v
    }

    /// Agreement of two certified evaluations of the same quantity.
    fn consistency(name: &str, a: &CertifiedValue<f64>, b: &CertifiedValue<f64>, eps: f64, instance: Value) -> Self {
        let diff = (a.value - b.value).abs();
        let tol = a.err + b.err;
        Self {
            name: name.into(),
            status: if diff <= tol { Status::Holds } else { Status::Violated },
            lhs: a.interval(),
            rhs: b.interval(),
            margin: tol - diff,
            form: "consistency".into(),
            eps_used: eps,
            instance,
        }
    }

    pub fn holds(&self) -> bool {
        self.status == Status::Holds
    }

    fn worse_than(&self, other: &Verdict) -> bool {
        (self.status.severity(), -self.margin) > (other.status.severity(), -other.margin)
    }
}

/// Keeps the most severe of several sub-verdicts, renamed to `name`.
fn worst(name: &str, parts: Vec<Verdict>) -> Verdict {
    let mut it = parts.into_iter();
    let mut w = it.next().expect("at least one sub-verdict");
    for v in it {
        if v.worse_than(&w) {
            w = v;
        }
    }
    w.name = name.into();
    w
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("eps must be positive and finite, got {eps}")));
    }
    Ok(())
}

/// Runs `f` at `eps`, `eps/100`, `eps/10⁴` until the verdict is decided.
fn tightened(eps: f64, mut f: impl FnMut(f64) -> Result<Verdict>) -> Result<Verdict> {
    let mut last = None;
    for t in TIGHTEN {
        let v = f(eps * t)?;
        if v.status != Status::Inconclusive {
            return Ok(v);
        }
        last = Some(v);
    }
    Ok(last.expect("at least one attempt"))
}

fn vec_json(v: &[f64]) -> Value {
    json!(v)
}

fn base_instance(lat: &Lattice, p: &Param) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("lattice".into(), lat.to_json());
    m.insert("param".into(), p.to_json());
    m
}

fn exact_shift(v: &[f64]) -> Result<Vec<Rational>> {
    exact_vec(v)
}

fn zero_vec(n: usize) -> Vec<Rational> {
    vec![Rational::from_integer(0.into()); n]
}

fn check_dims(lat: &Lattice, vs: &[&[f64]]) -> Result<()> {
    for v in vs {
        if v.len() != lat.dim() {
            return Err(Error::DimensionMismatch { expected: lat.dim(), got: v.len() });
        }
    }
    Ok(())
}

/// `ρ(L+x)²ρ(L+y)² ≤ ρ(L)²ρ(L+x+y)ρ(L+x−y)`, reported in the normalized form
/// `f(x)²f(y)² ≤ f(x+y)f(x−y)`.
pub fn check_main_inequality(lat: &Lattice, x: &[f64], y: &[f64], p: &Param, eps: f64) -> Result<Verdict> {
    product_form("main-inequality", lat, x, y, p, eps)
}

fn two_shift_instance(lat: &Lattice, x: &[f64], y: &[f64], p: &Param) -> Value {
    let mut m = base_instance(lat, p);
    m.insert("x".into(), vec_json(x));
    m.insert("y".into(), vec_json(y));
    Value::Object(m)
}

/// Shared by the main inequality and its doubling special case.
fn product_form(name: &str, lat: &Lattice, x: &[f64], y: &[f64], p: &Param, eps: f64) -> Result<Verdict> {
    check_eps(eps)?;
    check_dims(lat, &[x, y])?;
    p.check_dim(lat.dim())?;
    let inst = two_shift_instance(lat, x, y, p);
    let xe = exact_shift(x)?;
    let ye = exact_shift(y)?;
    // x ∈ L or y ∈ L: both sides coincide by symmetry of ρ
    if lat.contains(&xe) || lat.contains(&ye) {
        return Ok(Verdict::exact(name, rel_f_value(lat, p, if lat.contains(&xe) { &ye } else { &xe })?.powi(2), eps, inst));
    }
    let plus: Vec<Rational> = xe.iter().zip(&ye).map(|(a, b)| a + b).collect();
    let minus: Vec<Rational> = xe.iter().zip(&ye).map(|(a, b)| a - b).collect();
    let zero = zero_vec(lat.dim());
    let direct = tightened(eps, |e| {
        let m0 = forms::rel_mass(lat, p, &zero, e)?;
        let mx = forms::rel_mass(lat, p, &xe, e)?;
        let my = forms::rel_mass(lat, p, &ye, e)?;
        let ma = forms::rel_mass(lat, p, &plus, e)?;
        let mb = forms::rel_mass(lat, p, &minus, e)?;
        let norm = 1.0 / m0.value.powi(4);
        let lhs = mx.interval().sqr().mul(my.interval().sqr()).scale(norm);
        let rhs = m0.interval().sqr().mul(ma.interval()).mul(mb.interval()).scale(norm);
        Ok(Verdict::compare(name, lhs, rhs, "direct", e, inst.clone()))
    })?;
    if direct.status != Status::Inconclusive {
        return Ok(direct);
    }
    let fine = eps * TIGHTEN[2];
    if let Some(v) = dual_fallback(name, lat, p, x, y, fine, &inst, |d| {
        // (1−c)(1−d) − (1−a)²(1−b)², using c + d = 2a + 2b − 2q termwise
        let (a, b) = (d.a, d.b);
        d.q.scale(2.0)
            .add(d.c.mul(d.d))
            .sub(a.sqr())
            .sub(b.sqr())
            .sub(a.mul(b).scale(4.0))
            .add(a.sqr().mul(b).scale(2.0))
            .add(a.mul(b.sqr()).scale(2.0))
            .sub(a.sqr().mul(b.sqr()))
    })? {
        return Ok(v);
    }
    let (ha, hb) = forms::h_vectors(lat, p, &plus, &minus, fine)?;
    let m0 = forms::rel_mass(lat, p, &zero, fine)?;
    let g = forms::lagrange_gap(&ha, &hb).scale(1.0 / m0.value.powi(4));
    let v = Verdict::gap(name, g, "lagrange", fine, inst);
    Ok(if v.status == Status::Inconclusive { direct } else { v })
}

fn rel_f_value(lat: &Lattice, p: &Param, z: &[Rational]) -> Result<f64> {
    Ok(forms::rel_f(lat, p, z, 1e-12)?.mid())
}

/// Dual difference form, attempted only where `f` is close to 1 on the four
/// shifts (the regime in which the direct form loses relative accuracy).
fn dual_fallback(
    name: &str,
    lat: &Lattice,
    p: &Param,
    x: &[f64],
    y: &[f64],
    rel: f64,
    inst: &Value,
    gap: impl Fn(&forms::DualDefects) -> I,
) -> Result<Option<Verdict>> {
    let d = match forms::dual_defects(lat, p, x, y, rel) {
        Ok(d) => d,
        Err(Error::BudgetExceeded { .. }) | Err(Error::Overflow(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    if [d.a, d.b, d.c, d.d].iter().any(|v| v.hi > 0.5) {
        return Ok(None);
    }
    let v = Verdict::gap(name, gap(&d), "dual-difference", rel, inst.clone());
    Ok(if v.status == Status::Inconclusive { None } else { Some(v) })
}

/// The five corollary forms, in order: periodic product, doubling, additive,
/// strong cosine correlation, cosine correlation.
pub fn check_corollaries(lat: &Lattice, x: &[f64], y: &[f64], p: &Param, eps: f64) -> Result<Vec<Verdict>> {
    check_eps(eps)?;
    check_dims(lat, &[x, y])?;
    p.check_dim(lat.dim())?;
    let product = product_form("periodic-product", lat, x, y, p, eps)?;
    let doubling = product_form("doubling", lat, x, x, p, eps)?;
    let additive = additive_form(lat, x, y, p, eps)?;
    let cos = cosine_forms(lat, x, y, p, eps, &product, &additive)?;
    let mut out = vec![product, doubling, additive];
    out.extend(cos);
    Ok(out)
}

/// `f(x)f(y) ≤ (f(x+y) + f(x−y))/2`
fn additive_form(lat: &Lattice, x: &[f64], y: &[f64], p: &Param, eps: f64) -> Result<Verdict> {
    let name = "additive";
    let inst = two_shift_instance(lat, x, y, p);
    let xe = exact_shift(x)?;
    let ye = exact_shift(y)?;
    let plus: Vec<Rational> = xe.iter().zip(&ye).map(|(a, b)| a + b).collect();
    let minus: Vec<Rational> = xe.iter().zip(&ye).map(|(a, b)| a - b).collect();
    if lat.contains(&xe) && lat.contains(&ye) {
        return Ok(Verdict::exact(name, 1.0, eps, inst));
    }
    let zero = zero_vec(lat.dim());
    let direct = tightened(eps, |e| {
        let m0 = forms::rel_mass(lat, p, &zero, e)?;
        let mx = forms::rel_mass(lat, p, &xe, e)?;
        let my = forms::rel_mass(lat, p, &ye, e)?;
        let ma = forms::rel_mass(lat, p, &plus, e)?;
        let mb = forms::rel_mass(lat, p, &minus, e)?;
        let norm = 1.0 / m0.value.powi(2);
        let lhs = mx.interval().mul(my.interval()).scale(norm);
        let rhs = m0.interval().mul(ma.interval().add(mb.interval())).scale(0.5 * norm);
        Ok(Verdict::compare(name, lhs, rhs, "direct", e, inst.clone()))
    })?;
    if direct.status != Status::Inconclusive {
        return Ok(direct);
    }
    let fine = eps * TIGHTEN[2];
    if let Some(v) = dual_fallback(name, lat, p, x, y, fine, &inst, |d| d.q.sub(d.a.mul(d.b)))? {
        return Ok(v);
    }
    let (ha, hb) = forms::h_vectors(lat, p, &plus, &minus, fine)?;
    let m0 = forms::rel_mass(lat, p, &zero, fine)?;
    let g = forms::half_distance_sq(&ha, &hb).scale(1.0 / m0.value.powi(2));
    let v = Verdict::gap(name, g, "lagrange", fine, inst);
    Ok(if v.status == Status::Inconclusive { direct } else { v })
}

/// The dual-expectation forms under `w ∼ D_{L*,p'}`:
/// `E[cos x]²E[cos y]² + E[sin x sin y]² ≤ E[cos x cos y]²` and
/// `E[cos x]E[cos y] ≤ E[cos x cos y]`.
///
/// Both are evaluated from one set of dual sums per eps. Since
/// `E[cos x cos y] ± E[sin x sin y] = f(x ∓ y)` and `E[cos z] = f(z)`, the first
/// is the periodic-product form and the second the additive form; when the
/// dual sums cannot decide (all expectations tiny, or near-tight), those
/// verdicts are reused under the primal evaluation.
fn cosine_forms(
    lat: &Lattice,
    x: &[f64],
    y: &[f64],
    p: &Param,
    eps: f64,
    product: &Verdict,
    additive: &Verdict,
) -> Result<Vec<Verdict>> {
    let inst = two_shift_instance(lat, x, y, p);
    let dual = lat.dual();
    let dp = match p {
        GaussianParam::Scalar { s_sq, .. } => GaussianParam::from_variance(1.0 / s_sq)?,
        GaussianParam::Matrix(mp) => GaussianParam::matrix(mp.sigma_inv().clone())?,
    };
    let mut strong: Option<Verdict> = None;
    let mut weak: Option<Verdict> = None;
    for t in TIGHTEN {
        let e = eps * t;
        let cm = cosine_moments(&dual, x, y, &dp, e)?;
        let lhs = cm.cos_x.interval().sqr().mul(cm.cos_y.interval().sqr()).add(cm.sin_sin.interval().sqr());
        let s = Verdict::compare("strong-cosine", lhs, cm.cos_cos.interval().sqr(), "direct", e, inst.clone());
        let lhs = cm.cos_x.interval().mul(cm.cos_y.interval());
        let w = Verdict::compare("cosine", lhs, cm.cos_cos.interval(), "direct", e, inst.clone());
        if strong.as_ref().is_none_or(|v| v.status == Status::Inconclusive) {
            strong = Some(s);
        }
        if weak.as_ref().is_none_or(|v| v.status == Status::Inconclusive) {
            weak = Some(w);
        }
        // remaining rounds shrink the enclosures by at most `t/TIGHTEN[2]`
        let left = TIGHTEN[TIGHTEN.len() - 1] / t;
        let open = |v: &Option<Verdict>| {
            v.as_ref().is_some_and(|v| {
                let width = v.lhs.hi - v.lhs.lo + v.rhs.hi - v.rhs.lo;
                v.status == Status::Inconclusive && (v.rhs.mid() - v.lhs.mid()).abs() > width * left
            })
        };
        // at the rounding floor a smaller eps changes nothing
        let floored = [&cm.cos_x, &cm.cos_y, &cm.cos_cos, &cm.sin_sin].iter().any(|c| !c.warnings.is_empty());
        if floored || (!open(&strong) && !open(&weak)) {
            break;
        }
    }
    let primal = |v: Verdict, from: &Verdict, name: &str| {
        if v.status != Status::Inconclusive || from.status == Status::Inconclusive {
            return v;
        }
        let mut alt = from.clone();
        alt.name = name.into();
        alt.form = format!("primal-{}", from.form);
        alt
    };
    Ok(vec![
        primal(strong.expect("one attempt"), product, "strong-cosine"),
        primal(weak.expect("one attempt"), additive, "cosine"),
    ])
}

/// Typical squared length scale of the parameter (`s²` or `λ_max(Σ)`).
fn param_scale(p: &Param) -> f64 {
    match p {
        GaussianParam::Scalar { s_sq, .. } => *s_sq,
        GaussianParam::Matrix(mp) => mp.lambda_max(),
    }
}

/// PSD verdict on a matrix enclosure: smallest eigenvalue of the symmetrized
/// midpoint with tolerance `n·max_err` plus the eigen-solver's rounding.
fn psd_verdict(name: &str, m: &IMat<f64>, eps: f64, inst: Value) -> Verdict {
    let n = m.len();
    let mid: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| v.mid()).collect()).collect();
    let mid = linalg::symmetrize(&mid);
    let err = m.iter().flatten().map(|v| v.radius()).fold(0.0, f64::max);
    let fro = mid.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let lam = linalg::min_eigenvalue(&mid);
    let tol = n as f64 * err * (1.0 + 1e-12) + 16.0 * (n * n) as f64 * U * fro;
    Verdict::psd(name, lam, tol, eps, inst)
}

fn second_iv(r: &MomentReport<f64>) -> IMat<f64> {
    let n = r.dim();
    (0..n).map(|i| (0..n).map(|j| r.second_interval(i, j)).collect()).collect()
}

fn moments_at(lat: &Lattice, p: &Param, x: &[f64], eps: f64) -> Result<MomentReport<f64>> {
    moment_report(&Coset::new(lat.clone(), x.to_vec())?, p, eps * param_scale(p).max(1.0))
}

/// `covariance(D_{L+x}) − second(D_L) ⪰ 0`.
pub fn check_covariance_domination(lat: &Lattice, x: &[f64], p: &Param, eps: f64) -> Result<Verdict> {
    check_eps(eps)?;
    check_dims(lat, &[x])?;
    let mut inst = base_instance(lat, p);
    inst.insert("x".into(), vec_json(x));
    let inst = Value::Object(inst);
    let n = lat.dim();
    if lat.contains(&exact_shift(x)?) {
        return Ok(Verdict::psd("covariance-domination", 0.0, 0.0, eps, inst));
    }
    let rx = moments_at(lat, p, x, eps)?;
    let r0 = moments_at(lat, p, &vec![0.0; n], eps)?;
    let diff: IMat<f64> =
        (0..n).map(|i| (0..n).map(|j| rx.covariance_interval(i, j).sub(r0.second_interval(i, j))).collect()).collect();
    Ok(psd_verdict("covariance-domination", &diff, eps, inst))
}

/// `Hf(x)/f(x) ⪰ Hf(0) + ∇f(x)∇f(x)ᵀ/f(x)²`, with each term assembled from
/// the normalized moments: `Hf(x)/f(x) = 4π²M E_x[wwᵀ] M − 2πM` and
/// `∇f(x)/f(x) = −2πM E_x[w]`.
pub fn check_hessian_domination(lat: &Lattice, x: &[f64], p: &Param, eps: f64) -> Result<Verdict> {
    check_eps(eps)?;
    check_dims(lat, &[x])?;
    let mut inst = base_instance(lat, p);
    inst.insert("x".into(), vec_json(x));
    let inst = Value::Object(inst);
    let n = lat.dim();
    if lat.contains(&exact_shift(x)?) {
        return Ok(Verdict::psd("hessian-domination", 0.0, 0.0, eps, inst));
    }
    let rx = moments_at(lat, p, x, eps)?;
    let r0 = moments_at(lat, p, &vec![0.0; n], eps)?;
    let m = precision_intervals(p, n);
    let two_pi = I::around(2.0 * std::f64::consts::PI, 4.0 * U * std::f64::consts::PI);
    let four_pi2 = two_pi.sqr();
    let hess_over_f = |r: &MomentReport<f64>| -> IMat<f64> {
        let msm = imat_mul(&imat_mul(&m, &second_iv(r)), &m);
        (0..n).map(|i| (0..n).map(|j| msm[i][j].mul(four_pi2).sub(m[i][j].mul(two_pi))).collect()).collect()
    };
    let hx = hess_over_f(&rx);
    let h0 = hess_over_f(&r0);
    let g: Vec<I> = (0..n)
        .map(|i| {
            (0..n)
                .fold(I::point(0.0), |acc, k| acc.add(m[i][k].mul(rx.mean_interval(k))))
                .mul(two_pi)
                .neg()
        })
        .collect();
    let diff: IMat<f64> = (0..n).map(|i| (0..n).map(|j| hx[i][j].sub(h0[i][j]).sub(g[i].mul(g[j]))).collect()).collect();
    Ok(psd_verdict("hessian-domination", &diff, eps, inst))
}

/// `E[⟨y,u⟩²⟨y,v⟩²] ≥ E[⟨y,u⟩²]E[⟨y,v⟩²] + 2E[⟨y,u⟩⟨y,v⟩]²` over `y ∼ D_{L,p}`.
pub fn check_fourth_moment(lat: &Lattice, u: &[f64], v: &[f64], p: &Param, eps: f64) -> Result<Verdict> {
    check_eps(eps)?;
    check_dims(lat, &[u, v])?;
    let mut inst = base_instance(lat, p);
    inst.insert("u".into(), vec_json(u));
    inst.insert("v".into(), vec_json(v));
    let inst = Value::Object(inst);
    let nu: f64 = u.iter().map(|t| t * t).sum();
    let nv: f64 = v.iter().map(|t| t * t).sum();
    let scale = (param_scale(p).max(1.0)).powi(2) * nu * nv;
    let direct = tightened(eps, |e| {
        let (l, r) = fourth_moment_form(lat, u, v, p, e * scale)?;
        Ok(Verdict::compare("fourth-moment", r.interval(), l.interval(), "direct", e, inst.clone()))
    })?;
    if direct.status != Status::Inconclusive {
        return Ok(direct);
    }
    // D_L concentrated at the origin: both sides are tiny, so target an error
    // relative to the fourth moment, which is positive for any full-rank L
    let mut abs = eps * TIGHTEN[2] * scale;
    let (mut l, mut r) = fourth_moment_form(lat, u, v, p, abs)?;
    while !(l.lower() > 0.0) && abs > 1e-290 {
        abs *= 1e-8;
        (l, r) = fourth_moment_form(lat, u, v, p, abs)?;
    }
    let rel = eps * TIGHTEN[2];
    if l.lower() > 0.0 && rel * l.value < abs {
        (l, r) = fourth_moment_form(lat, u, v, p, (rel * l.value).max(1e-300))?;
    }
    let alt = Verdict::compare("fourth-moment", r.interval(), l.interval(), "relative", rel, inst.clone());
    if alt.status != Status::Inconclusive {
        return Ok(alt);
    }
    // near-Gaussian regime: the gap through the dual lattice
    let g = match forms::fourth_moment_dual_gap(lat, u, v, p, rel) {
        Ok(g) => g,
        Err(Error::BudgetExceeded { .. }) | Err(Error::Overflow(_)) => return Ok(direct),
        Err(e) => return Err(e),
    };
    let dual = Verdict::gap("fourth-moment", g, "dual-difference", rel, inst);
    Ok(if dual.status == Status::Inconclusive { direct } else { dual })
}

/// `f_a(x) ≤ f_b(x)` for two parameters or lattices, directly and, when
/// inconclusive, through `1 − f_b(x) ≤ 1 − f_a(x)` on the dual side.
fn f_leq(
    name: &str,
    a: (&Lattice, &Param),
    b: (&Lattice, &Param),
    x: &[f64],
    eps: f64,
    inst: &Value,
) -> Result<Verdict> {
    let xe = exact_shift(x)?;
    let direct = tightened(eps, |e| {
        let fa = forms::rel_f(a.0, a.1, &xe, e)?;
        let fb = forms::rel_f(b.0, b.1, &xe, e)?;
        Ok(Verdict::compare(name, fa, fb, "direct", e, inst.clone()))
    })?;
    if direct.status != Status::Inconclusive {
        return Ok(direct);
    }
    let fine = eps * TIGHTEN[2];
    let da = forms::one_minus_f(a.0, a.1, x, fine);
    let db = forms::one_minus_f(b.0, b.1, x, fine);
    match (da, db) {
        (Ok(da), Ok(db)) => {
            let v = Verdict::compare(name, db, da, "dual-difference", fine, inst.clone());
            Ok(if v.status == Status::Inconclusive { direct } else { v })
        }
        (Err(Error::BudgetExceeded { .. }), _) | (_, Err(Error::BudgetExceeded { .. })) => Ok(direct),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

/// `f_{L,s}(x)` is non-decreasing along `s_grid`, and at every grid point
/// `(d/ds f)/f ≥ (s/2π)‖∇f‖²/f²`, i.e. `E_{L+x}[‖w‖²] − E_L[‖w‖²] ≥ ‖E_{L+x}[w]‖²`.
pub fn check_monotone_s(lat: &Lattice, x: &[f64], s_grid: &[f64], eps: f64) -> Result<Verdict> {
    check_eps(eps)?;
    check_dims(lat, &[x])?;
    if s_grid.len() < 2 {
        return Err(Error::InvalidParameter("s_grid needs at least two points".into()));
    }
    if s_grid.windows(2).any(|w| !(w[0] < w[1])) || !(s_grid[0] > 0.0) {
        return Err(Error::InvalidParameter("s_grid must be positive and strictly increasing".into()));
    }
    let mut inst = serde_json::Map::new();
    inst.insert("lattice".into(), lat.to_json());
    inst.insert("x".into(), vec_json(x));
    inst.insert("s_grid".into(), vec_json(s_grid));
    let inst = Value::Object(inst);
    let n = lat.dim();
    if lat.contains(&exact_shift(x)?) {
        return Ok(Verdict::exact("monotone-s", 1.0, eps, inst));
    }
    let params: Vec<Param> = s_grid.iter().map(|&s| GaussianParam::scalar(s)).collect::<Result<_>>()?;
    let mut parts = Vec::new();
    for w in params.windows(2) {
        parts.push(f_leq("monotone-s", (lat, &w[0]), (lat, &w[1]), x, eps, &inst)?);
    }
    for (p, &s) in params.iter().zip(s_grid) {
        let k = 2.0 * std::f64::consts::PI / (s * s * s);
        let direct = tightened(eps, |e| {
            let rx = moments_at(lat, p, x, e)?;
            let r0 = moments_at(lat, p, &vec![0.0; n], e)?;
            let mean_sq = (0..n).fold(I::point(0.0), |acc, i| acc.add(rx.mean_interval(i).sqr()));
            let tr = |r: &MomentReport<f64>| (0..n).fold(I::point(0.0), |acc, i| acc.add(r.second_interval(i, i)));
            let lhs = mean_sq.scale(k);
            let rhs = tr(&rx).sub(tr(&r0)).scale(k);
            Ok(Verdict::compare("monotone-s", lhs, rhs, "direct", e, inst.clone()))
        })?;
        if direct.status != Status::Inconclusive {
            parts.push(direct);
            continue;
        }
        // rhs − lhs = (2π/s³)(tr Cov(D_{L+x}) − E_L[‖w‖²])
        let fine = eps * TIGHTEN[2];
        let alt = match forms::covariance_trace_dual_gap(lat, x, s, fine) {
            Ok(g) => Verdict::gap("monotone-s", g.scale(k), "dual-difference", fine, inst.clone()),
            Err(Error::BudgetExceeded { .. }) | Err(Error::Overflow(_)) => direct.clone(),
            Err(e) => return Err(e),
        };
        if alt.status != Status::Inconclusive {
            parts.push(alt);
            continue;
        }
        let alt = match forms::covariance_trace_centered_gap(lat, x, s, fine) {
            Ok(g) => Verdict::gap("monotone-s", g.scale(k), "centered", fine, inst.clone()),
            Err(Error::BudgetExceeded { .. }) | Err(Error::Overflow(_)) => direct.clone(),
            Err(e) => return Err(e),
        };
        parts.push(if alt.status == Status::Inconclusive { direct } else { alt });
    }
    Ok(worst("monotone-s", parts))
}

/// `Σ′ ⪯ Σ ⇒ f_{L,Σ′}(x) ≤ f_{L,Σ}(x)`.
pub fn check_monotone_sigma(
    lat: &Lattice,
    x: &[f64],
    sigma_small: &[Vec<f64>],
    sigma_big: &[Vec<f64>],
    eps: f64,
) -> Result<Verdict> {
    check_eps(eps)?;
    check_dims(lat, &[x])?;
    let n = lat.dim();
    if sigma_small.len() != n || sigma_big.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sigma_small.len().min(sigma_big.len()) });
    }
    let ps = GaussianParam::matrix(sigma_small.to_vec())?;
    let pb = GaussianParam::matrix(sigma_big.to_vec())?;
    let diff: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| sigma_big[i][j] - sigma_small[i][j]).collect()).collect();
    let lam = linalg::min_eigenvalue(&linalg::symmetrize(&diff));
    if lam < -1e-12 {
        return Err(Error::NotComparable(lam));
    }
    let mut inst = serde_json::Map::new();
    inst.insert("lattice".into(), lat.to_json());
    inst.insert("x".into(), vec_json(x));
    inst.insert("sigma_small".into(), json!(sigma_small));
    inst.insert("sigma_big".into(), json!(sigma_big));
    let inst = Value::Object(inst);
    if sigma_small == sigma_big || lat.contains(&exact_shift(x)?) {
        let v = forms::rel_f(lat, &pb, &exact_shift(x)?, 1e-12)?.mid();
        return Ok(Verdict::exact("monotone-sigma", v, eps, inst));
    }
    f_leq("monotone-sigma", (lat, &ps), (lat, &pb), x, eps, &inst)
}

/// The coefficient representation of `m` inside `l`.
fn as_sublattice(l: &Lattice, m: &Lattice) -> Result<SublatticeRep> {
    if l.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: l.dim(), got: m.dim() });
    }
    if !l.contains_lattice(m) {
        return Err(Error::ParentMismatch);
    }
    let rows: Vec<Vec<Rational>> = m.basis().iter().map(|b| l.coefficients(b)).collect();
    let cols = exact::transpose(&rows);
    let x: Vec<Vec<num_bigint::BigInt>> = cols.iter().map(|r| r.iter().map(|c| c.to_integer()).collect()).collect();
    sublattice(l, &x)
}

/// `f_M(x) ≤ f_L(x)` for a sublattice `M ⊆ L`.
pub fn check_sublattice_monotone(l: &Lattice, m: &Lattice, x: &[f64], p: &Param, eps: f64) -> Result<Verdict> {
    check_eps(eps)?;
    check_dims(l, &[x])?;
    as_sublattice(l, m)?;
    let mut inst = base_instance(l, p);
    inst.insert("sublattice".into(), m.to_json());
    inst.insert("x".into(), vec_json(x));
    let inst = Value::Object(inst);
    let xe = exact_shift(x)?;
    if m.contains(&xe) {
        return Ok(Verdict::exact("sublattice-monotone", 1.0, eps, inst));
    }
    if l.same_points(m) {
        let v = forms::rel_f(l, p, &xe, 1e-12)?.mid();
        return Ok(Verdict::exact("sublattice-monotone", v, eps, inst));
    }
    let v = f_leq("sublattice-monotone", (m, p), (l, p), x, eps, &inst)?;
    if v.status != Status::Inconclusive {
        return Ok(v);
    }
    let fine = eps * TIGHTEN[2];
    let g = sublattice_gap(l, m, x, p, fine)?;
    let alt = Verdict::gap("sublattice-monotone", g, "coset-split", fine, inst);
    Ok(if alt.status == Status::Inconclusive { v } else { alt })
}

/// `f_L(x) − f_M(x) = (ρ((L∖M)+x)·ρ(M) − ρ(M+x)·ρ(L∖M)) / (ρ(L)ρ(M))`, every
/// mass a sum of positive terms.
fn sublattice_gap(l: &Lattice, m: &Lattice, x: &[f64], p: &Param, rel: f64) -> Result<I> {
    let mem = forms::Membership::new(l, m)?;
    let inside = |k: &[i64]| mem.contains(k);
    let outside = |k: &[i64]| !mem.contains(k);
    let sx = forms::masked_sums(l, p, x, &[&inside, &outside], &[true, true], rel)?;
    let s0 = forms::masked_sums(l, p, &vec![0.0; l.dim()], &[&inside, &outside], &[true, true], rel)?;
    let (mx, rx) = (sx[0].interval(), sx[1].interval());
    let (m0, r0) = (s0[0].interval(), s0[1].interval());
    let gap = rx.mul(m0).sub(mx.mul(r0));
    Ok(gap.div(m0.add(r0).mul(m0)))
}

/// `(ρ(M)/ρ(L))·(ρ(N)/ρ(L)) ≤ ρ(M∩N)/ρ(L)` for sublattices `M, N ⊆ L`.
pub fn check_positive_correlation(l: &Lattice, m: &Lattice, nl: &Lattice, p: &Param, eps: f64) -> Result<Verdict> {
    check_eps(eps)?;
    let ms = as_sublattice(l, m)?;
    let ns = as_sublattice(l, nl)?;
    let mn = intersect(&ms, &ns)?;
    let mut inst = base_instance(l, p);
    inst.insert("m".into(), m.to_json());
    inst.insert("n".into(), nl.to_json());
    inst.insert("intersection".into(), mn.lattice.to_json());
    let inst = Value::Object(inst);
    let zero = zero_vec(l.dim());
    if l.same_points(m) || l.same_points(nl) {
        let other = if l.same_points(m) { nl } else { m };
        let v = forms::rel_mass(other, p, &zero, 1e-12)?.value / forms::rel_mass(l, p, &zero, 1e-12)?.value;
        return Ok(Verdict::exact("positive-correlation", v, eps, inst));
    }
    let direct = tightened(eps, |e| {
        let rl = forms::rel_mass(l, p, &zero, e)?;
        let rm = forms::rel_mass(m, p, &zero, e)?;
        let rn = forms::rel_mass(nl, p, &zero, e)?;
        let rmn = forms::rel_mass(&mn.lattice, p, &zero, e)?;
        let norm = 1.0 / (rl.value * rl.value);
        let lhs = rm.interval().mul(rn.interval()).scale(norm);
        let rhs = rmn.interval().mul(rl.interval()).scale(norm);
        Ok(Verdict::compare("positive-correlation", lhs, rhs, "direct", e, inst.clone()))
    })?;
    if direct.status != Status::Inconclusive {
        return Ok(direct);
    }
    // splitting each mass over M∩N, M∖N, N∖M and L∖(M∪N):
    // ρ(M∩N)ρ(L) − ρ(M)ρ(N) = ρ(M∩N)·ρ(L∖(M∪N)) − ρ(M∖N)·ρ(N∖M)
    let fine = eps * TIGHTEN[2];
    let (im, inn) = (forms::Membership::new(l, m)?, forms::Membership::new(l, nl)?);
    let masks: [forms::Mask; 4] = [
        &|k| im.contains(k) && inn.contains(k),
        &|k| im.contains(k) && !inn.contains(k),
        &|k| !im.contains(k) && inn.contains(k),
        &|k| !im.contains(k) && !inn.contains(k),
    ];
    let v = forms::masked_sums(l, p, &vec![0.0; l.dim()], &masks, &[true, false, false, true], fine)?;
    let a: Vec<I> = v.iter().map(|c| c.interval()).collect();
    let gap = a[0].mul(a[3]).sub(a[1].mul(a[2]));
    let rl = a.iter().fold(I::point(0.0), |acc, t| acc.add(*t));
    let alt = Verdict::gap("positive-correlation", gap.div(rl.sqr()), "inclusion-exclusion", fine, inst);
    Ok(if alt.status == Status::Inconclusive { direct } else { alt })
}

/// Both sides of the coset split identity agree within their error bounds.
pub fn check_split_identity(lat: &Lattice, x: &[f64], y: &[f64], p: &Param, eps: f64) -> Result<Verdict> {
    check_eps(eps)?;
    let r = theta_split_identity(lat, x, y, p, eps)?;
    Ok(Verdict::consistency("split-identity", &r.lhs, &r.rhs, eps, two_shift_instance(lat, x, y, p)))
}

/// Direct and dual (Poisson) evaluations of `ρ(L+x)` agree within their error bounds.
pub fn check_poisson(c: &Coset<f64>, p: &Param, eps: f64) -> Result<Verdict> {
    check_eps(eps)?;
    let a = mass(c, p, eps)?;
    let b = dual_mass(c, p, eps)?;
    let mut inst = base_instance(&c.lattice, p);
    inst.insert("x".into(), vec_json(&c.shift));
    Ok(Verdict::consistency("poisson", &a, &b, eps, Value::Object(inst)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Param {
        GaussianParam::scalar(v).unwrap()
    }

    #[test]
    fn main_inequality_examples() {
        let z = Lattice::integer(1);
        let v = check_main_inequality(&z, &[0.25], &[0.25], &s(1.0), 1e-10).unwrap();
        assert!(v.holds());
        assert!((v.lhs.mid() - 0.71774998637753754).abs() < 1e-9);
        assert!((v.rhs.mid() - 0.84089641525371454).abs() < 1e-9);
        let v = check_main_inequality(&z, &[0.5], &[0.5], &s(1.0), 1e-10).unwrap();
        assert!(v.holds());
        assert!((v.lhs.mid() - 0.8408964152537145f64.powi(4)).abs() < 1e-9);
        assert!((v.rhs.mid() - 1.0).abs() < 1e-9);
        let v = check_main_inequality(&z, &[0.0], &[0.0], &s(1.0), 1e-10).unwrap();
        assert!(v.holds() && v.margin == 0.0 && v.form == "exact");
    }

    #[test]
    fn near_tight_instances_use_difference_forms() {
        let z = Lattice::integer(1);
        // f ≈ 1 − 1e−22: the direct form cannot separate the sides
        let v = check_main_inequality(&z, &[0.3], &[0.2], &s(4.0), 1e-10).unwrap();
        assert!(v.holds(), "{v:?}");
        assert_eq!(v.form, "dual-difference");
    }

    #[test]
    fn corollary_examples() {
        let z = Lattice::integer(1);
        let vs = check_corollaries(&z, &[0.5], &[0.5], &s(1.0), 1e-10).unwrap();
        assert_eq!(vs.len(), 5);
        assert!(vs.iter().all(|v| v.status != Status::Violated), "{vs:?}");
        assert!(vs[1].holds());
        assert!((vs[1].rhs.mid() - 1.0).abs() < 1e-9);
        let vs = check_corollaries(&z, &[0.0], &[0.0], &s(1.0), 1e-10).unwrap();
        assert!(vs.iter().all(|v| v.status != Status::Violated));
    }

    #[test]
    fn psd_checks() {
        let z = Lattice::integer(1);
        for x in [0.25, 0.5] {
            assert!(check_covariance_domination(&z, &[x], &s(1.0), 1e-10).unwrap().holds());
            assert!(check_hessian_domination(&z, &[x], &s(1.0), 1e-10).unwrap().holds());
        }
        let z2 = Lattice::integer(2);
        assert!(check_hessian_domination(&z2, &[0.25, 0.0], &s(1.0), 1e-10).unwrap().holds());
        assert!(check_covariance_domination(&z2, &[0.0, 0.0], &s(1.0), 1e-10).unwrap().holds());
    }

    #[test]
    fn fourth_moment_examples() {
        let v = check_fourth_moment(&Lattice::integer(1), &[1.0], &[1.0], &s(1.0), 1e-10).unwrap();
        assert!(v.holds());
        let w = check_fourth_moment(&Lattice::integer(1), &[2.0], &[1.0], &s(1.0), 1e-10).unwrap();
        assert!(w.holds());
        assert!((w.rhs.mid() / v.rhs.mid() - 4.0).abs() < 1e-9);
        let e = check_fourth_moment(&Lattice::integer(2), &[1.0, 0.0], &[0.0, 1.0], &s(1.0), 1e-10).unwrap();
        assert_ne!(e.status, Status::Violated);
        assert!((e.lhs.mid() - e.rhs.mid()).abs() <= e.lhs.radius() + e.rhs.radius() + 1e-15);
    }

    #[test]
    fn monotone_examples() {
        let z = Lattice::integer(1);
        let v = check_monotone_s(&z, &[0.5], &[1.0, 2.0], 1e-10).unwrap();
        assert_ne!(v.status, Status::Violated);
        assert!(check_monotone_s(&z, &[0.5], &[2.0, 1.0], 1e-10).is_err());
        let v = check_monotone_sigma(&z, &[0.5], &[vec![1.0]], &[vec![4.0]], 1e-10).unwrap();
        assert!(v.holds());
        assert!(matches!(
            check_monotone_sigma(&z, &[0.5], &[vec![4.0]], &[vec![1.0]], 1e-10),
            Err(Error::NotComparable(_))
        ));
        let z2 = Lattice::integer(2);
        let v = check_monotone_sigma(
            &z2,
            &[0.5, 0.0],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[vec![4.0, 0.0], vec![0.0, 1.0]],
            1e-10,
        )
        .unwrap();
        assert!(v.holds());
    }

    #[test]
    fn sublattice_examples() {
        let z = Lattice::integer(1);
        let two = Lattice::from_i64(&[vec![2]]).unwrap();
        let three = Lattice::from_i64(&[vec![3]]).unwrap();
        let v = check_sublattice_monotone(&z, &two, &[0.5], &s(1.0), 1e-10).unwrap();
        assert!(v.holds());
        assert!((v.lhs.mid() - 0.45678638313705510).abs() < 1e-9);
        let v = check_positive_correlation(&z, &two, &three, &s(1.0), 1e-10).unwrap();
        assert!(v.holds());
        assert!((v.lhs.mid() - 0.84721899383902027).abs() < 1e-9);
        assert!((v.rhs.mid() - 0.92044178783559098).abs() < 1e-9);
        assert!(check_sublattice_monotone(&two, &z, &[0.5], &s(1.0), 1e-10).is_err());
    }
}
