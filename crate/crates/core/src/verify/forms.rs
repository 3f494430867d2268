//! Evaluation forms used by the checks: masses with relative error, the
//! `L/2L` vectors `h(z)_c = ρ_{√2}(2L + c + z)` and dual-side defects `1 − f`.

use crate::certified::CertifiedValue;
use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::interval::Interval;
use crate::lattice::{enumerate_points, quotient_reps, sublattice, Coset, Lattice};
use crate::mass::engine::{mass_lower_bound, prepare, weighted_sums, weighted_sums_coeffs, Target};
use crate::mass::{mass, mass_with_shift_error, round_vec, GaussianParam};

type I = Interval<f64>;
const U: f64 = f64::EPSILON / 2.0;

/// `ρ(L + z)` for an exact shift, with error at most `rel` times a lower bound
/// on the value (plus the effect of rounding `z` to `f64`).
pub(crate) fn rel_mass(lat: &Lattice, p: &GaussianParam<f64>, z: &[Rational], rel: f64) -> Result<CertifiedValue<f64>> {
    let (zf, zerr) = round_vec::<f64>(z);
    let prep = prepare(lat, p)?;
    let lb = mass_lower_bound(lat, &prep, &zf)?;
    let c = Coset::new(lat.clone(), zf)?;
    if zerr > 0.0 {
        mass_with_shift_error(&c, p, rel * lb, zerr)
    } else {
        mass(&c, p, rel * lb)
    }
}

/// `f_{L,p}(z)` as an interval, exactly `1` when `z ∈ L`.
pub(crate) fn rel_f(lat: &Lattice, p: &GaussianParam<f64>, z: &[Rational], rel: f64) -> Result<I> {
    if lat.contains(z) {
        return Ok(I::point(1.0));
    }
    let zero = vec![Rational::from_integer(0.into()); lat.dim()];
    let top = rel_mass(lat, p, z, rel)?;
    let bottom = rel_mass(lat, p, &zero, rel)?;
    Ok(top.interval().div(bottom.interval()))
}

/// `(h(a), h(b))` over a fixed ordering of `L/2L`.
pub(crate) fn h_vectors(
    lat: &Lattice,
    p: &GaussianParam<f64>,
    a: &[Rational],
    b: &[Rational],
    rel: f64,
) -> Result<(Vec<I>, Vec<I>)> {
    let n = lat.dim();
    let two: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 2 } else { 0 }).collect()).collect();
    let sub = sublattice(lat, &exact::int_from_i64(&two))?;
    let reps = quotient_reps(lat, &sub)?;
    let p2 = p.with_variance_factor(2.0)?;
    let mut ha = Vec::with_capacity(reps.len());
    let mut hb = Vec::with_capacity(reps.len());
    for c in &reps.reps {
        let za: Vec<Rational> = c.iter().zip(a).map(|(u, v)| u + v).collect();
        let zb: Vec<Rational> = c.iter().zip(b).map(|(u, v)| u + v).collect();
        ha.push(rel_mass(&sub.lattice, &p2, &za, rel)?.interval());
        hb.push(rel_mass(&sub.lattice, &p2, &zb, rel)?.interval());
    }
    Ok((ha, hb))
}

/// `‖h_a‖²‖h_b‖² − ⟨h_a, h_b⟩² = Σ_{i<j} (h_{a,i}h_{b,j} − h_{a,j}h_{b,i})²`
pub(crate) fn lagrange_gap(ha: &[I], hb: &[I]) -> I {
    let mut acc = I::point(0.0);
    for i in 0..ha.len() {
        for j in i + 1..ha.len() {
            acc = acc.add(ha[i].mul(hb[j]).sub(ha[j].mul(hb[i])).sqr());
        }
    }
    acc
}

/// `½‖h_a − h_b‖²`
pub(crate) fn half_distance_sq(ha: &[I], hb: &[I]) -> I {
    ha.iter().zip(hb).fold(I::point(0.0), |acc, (a, b)| acc.add(a.sub(*b).sqr())).scale(0.5)
}

/// The dual parameter `ρ'(w) = exp(−π wᵀΣw)` (scalar: `exp(−π s²‖w‖²)`) and a
/// bound on the relative error of its quadratic form.
fn dual_param(p: &GaussianParam<f64>, n: usize) -> Result<(GaussianParam<f64>, f64)> {
    match p {
        GaussianParam::Scalar { s_sq, .. } => Ok((GaussianParam::from_variance(1.0 / s_sq)?, 4.0 * U)),
        GaussianParam::Matrix(mp) => {
            let cond = mp.lambda_max() / mp.lambda_min();
            Ok((GaussianParam::matrix(mp.sigma_inv().clone())?, 16.0 * (n as f64 + 1.0) * cond * cond * U))
        }
    }
}

/// Normalized dual defects under `w ∼ D_{L*,p'}`:
/// `a = 1 − f(x)`, `b = 1 − f(y)`, `c = 1 − f(x+y)`, `d = 1 − f(x−y)` and
/// `q = E[(1 − cos 2π⟨w,x⟩)(1 − cos 2π⟨w,y⟩)]`. All are sums of nonnegative
/// terms, so each is computed to relative accuracy.
#[derive(Clone, Copy, Debug)]
pub(crate) struct DualDefects {
    pub a: I,
    pub b: I,
    pub c: I,
    pub d: I,
    pub q: I,
}

fn ip_with_err(w: &[f64], x: &[f64], dw: f64) -> (f64, f64) {
    let n = w.len() as f64;
    let ip: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
    let abs: f64 = w.iter().zip(x).map(|(a, b)| (a * b).abs()).sum();
    let xa: f64 = x.iter().map(|v| v.abs()).sum();
    (ip, (n + 2.0) * U * abs + dw * xa)
}

/// `1 − cos θ = 2 sin²(θ/2)` with `θ/2 = π·t`, given an absolute error `te` of `t`.
fn defect(t: f64, te: f64) -> (f64, f64) {
    let half = std::f64::consts::PI * t;
    let he = std::f64::consts::PI * te + 4.0 * U * half.abs();
    let s = half.sin();
    let v = 2.0 * s * s;
    (v, 4.0 * s.abs() * he + 2.0 * he * he + 6.0 * U * v + 4.0 * U * s.abs())
}

fn dual_sums(
    lat: &Lattice,
    p: &GaussianParam<f64>,
    x: &[f64],
    y: &[f64],
    eps: f64,
) -> Result<Vec<CertifiedValue<f64>>> {
    let n = lat.dim();
    let dual = lat.dual();
    let (dp, dq) = dual_param(p, n)?;
    let prep = prepare(&dual, &dp)?;
    let targets = [
        Target::plain(eps),
        Target { order: 0, coef: 2.0, eps },
        Target { order: 0, coef: 2.0, eps },
        Target { order: 0, coef: 2.0, eps },
        Target { order: 0, coef: 2.0, eps },
        Target { order: 0, coef: 4.0, eps },
    ];
    let out = weighted_sums(&dual, &prep, &vec![0.0; n], &targets, |w: &[f64], dw, v, e| {
        let (tx, ex) = ip_with_err(w, x, dw);
        let (ty, ey) = ip_with_err(w, y, dw);
        let (gx, gxe) = defect(tx, ex);
        let (gy, gye) = defect(ty, ey);
        let (gp, gpe) = defect(tx + ty, ex + ey + U * (tx + ty).abs());
        let (gm, gme) = defect(tx - ty, ex + ey + U * (tx - ty).abs());
        let q = gx * gy;
        let qe = gx * gye + gy * gxe + gxe * gye + 2.0 * U * q;
        v[..6].copy_from_slice(&[1.0, gx, gy, gp, gm, q]);
        e[..6].copy_from_slice(&[0.0, gxe, gye, gpe, gme, qe]);
        // the dual parameter is itself rounded
        let rel = std::f64::consts::PI * dp.quadratic(w).abs() * dq * 1.01;
        for j in 0..6 {
            e[j] += v[j].abs() * rel;
        }
    })?;
    Ok(out.values)
}

/// Which of `a, b, c, d, q` are nonzero; `1 − f(u)` vanishes exactly when `u ∈ L`.
fn live_defects(lat: &Lattice, x: &[f64], y: &[f64]) -> [bool; 5] {
    let exact = |v: &[f64]| v.iter().map(|t| exact::rat_from_f64(*t)).collect::<Result<Vec<Rational>>>();
    let (Ok(xe), Ok(ye)) = (exact(x), exact(y)) else { return [true; 5] };
    let sum: Vec<Rational> = xe.iter().zip(&ye).map(|(a, b)| a + b).collect();
    let diff: Vec<Rational> = xe.iter().zip(&ye).map(|(a, b)| a - b).collect();
    let (lx, ly) = (!lat.contains(&xe), !lat.contains(&ye));
    [lx, ly, !lat.contains(&sum), !lat.contains(&diff), lx && ly]
}

pub(crate) fn dual_defects(lat: &Lattice, p: &GaussianParam<f64>, x: &[f64], y: &[f64], rel: f64) -> Result<DualDefects> {
    // lower the absolute target until the defect sums are certified positive,
    // then refine relative to the smallest of them
    let live = live_defects(lat, x, y);
    let mut eps = rel * 1e-3;
    let mut vals = dual_sums(lat, p, x, y, eps)?;
    while live.iter().zip(&vals[1..]).any(|(l, v)| *l && !(v.lower() > 0.0)) && eps > 1e-200 {
        eps *= 1e-8;
        vals = dual_sums(lat, p, x, y, eps)?;
    }
    let smallest = vals[1..].iter().map(|v| v.value).filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let target = (rel * 1e-2 * smallest).max(1e-300);
    if smallest.is_finite() && target < eps {
        vals = dual_sums(lat, p, x, y, target)?;
    }
    let d = &vals[0];
    if !(d.lower() > 0.0) {
        return Err(Error::Overflow("dual normalizer is not certified positive".into()));
    }
    let q = |i: usize| vals[i].interval().div(d.interval());
    Ok(DualDefects { a: q(1), b: q(2), c: q(3), d: q(4), q: q(5) })
}

/// `1 − f_{L,p}(x)` to relative accuracy through the dual sum.
pub(crate) fn one_minus_f(lat: &Lattice, p: &GaussianParam<f64>, x: &[f64], rel: f64) -> Result<I> {
    let zero = vec![0.0; x.len()];
    Ok(dual_defects(lat, p, x, &zero, rel)?.a)
}

/// The fourth-moment gap `E[a²b²] − E[a²]E[b²] − 2E[ab]²` (`a = ⟨y,u⟩`,
/// `b = ⟨y,v⟩`, `y ∼ D_{L,p}`) through Poisson summation: with
/// `α = ⟨Σu, z⟩`, `β = ⟨Σv, z⟩` and weights `exp(−π zᵀΣz)` over `z ∈ L*`, it
/// equals `(Q·D − A₂B₂ − 2·AB²)/D²` where `D = Σ1`, `A₂ = Σα²`, `B₂ = Σβ²`,
/// `AB = Σαβ`, `Q = Σα²β²`. The Gaussian parts cancel exactly, so the gap is
/// resolved to relative accuracy when `D_{L*}` is concentrated.
pub(crate) fn fourth_moment_dual_gap(lat: &Lattice, u: &[f64], v: &[f64], p: &GaussianParam<f64>, rel: f64) -> Result<I> {
    let n = lat.dim();
    let dual = lat.dual();
    let (dp, dq) = dual_param(p, n)?;
    let prep = prepare(&dual, &dp)?;
    // Σu, Σv with componentwise error
    let apply = |x: &[f64]| -> (Vec<f64>, Vec<f64>) {
        match p {
            GaussianParam::Scalar { s_sq, .. } => {
                (x.iter().map(|t| t * s_sq).collect(), x.iter().map(|t| (t * s_sq).abs() * U).collect())
            }
            GaussianParam::Matrix(mp) => {
                let sig = mp.sigma();
                let y: Vec<f64> = (0..n).map(|i| (0..n).map(|j| sig[i][j] * x[j]).sum()).collect();
                let e: Vec<f64> = (0..n)
                    .map(|i| (n as f64 + 1.0) * U * (0..n).map(|j| (sig[i][j] * x[j]).abs()).sum::<f64>())
                    .collect();
                (y, e)
            }
        }
    };
    let (su, sue) = apply(u);
    let (sv, sve) = apply(v);
    let norm = |x: &[f64], e: &[f64]| x.iter().zip(e).map(|(a, b)| (a.abs() + b).powi(2)).sum::<f64>().sqrt();
    let (nu, nv) = (norm(&su, &sue), norm(&sv, &sve));
    let lin = |w: &[f64], dw: f64, s: &[f64], se: &[f64]| -> (f64, f64) {
        let val: f64 = w.iter().zip(s).map(|(a, b)| a * b).sum();
        let abs: f64 = w.iter().zip(s).map(|(a, b)| (a * b).abs()).sum();
        let err = (n as f64 + 1.0) * U * abs
            + dw * s.iter().map(|t| t.abs()).sum::<f64>()
            + w.iter().zip(se).map(|(a, b)| (a.abs() + dw) * b).sum::<f64>();
        (val, err)
    };
    let sums = |eps: f64| -> Result<Vec<CertifiedValue<f64>>> {
        let targets = [
            Target::plain(eps),
            Target { order: 2, coef: nu * nu, eps },
            Target { order: 2, coef: nv * nv, eps },
            Target { order: 2, coef: nu * nv, eps },
            Target { order: 4, coef: nu * nu * nv * nv, eps },
        ];
        let out = weighted_sums(&dual, &prep, &vec![0.0; n], &targets, |w: &[f64], dw, val, er| {
            let (a, ea) = lin(w, dw, &su, &sue);
            let (b, eb) = lin(w, dw, &sv, &sve);
            let prod = |x: f64, ex: f64, y: f64, ey: f64| x.abs() * ey + y.abs() * ex + ex * ey + 2.0 * U * (x * y).abs();
            let (a2, ea2) = (a * a, prod(a, ea, a, ea));
            let (b2, eb2) = (b * b, prod(b, eb, b, eb));
            val[..5].copy_from_slice(&[1.0, a2, b2, a * b, a2 * b2]);
            er[..5].copy_from_slice(&[0.0, ea2, eb2, prod(a, ea, b, eb), prod(a2, ea2, b2, eb2)]);
            let r = std::f64::consts::PI * dp.quadratic(w).abs() * dq * 1.01;
            for j in 0..5 {
                er[j] += val[j].abs() * r;
            }
        })?;
        Ok(out.values)
    };
    let mut eps = rel * 1e-3;
    let mut vals = sums(eps)?;
    let live = [1usize, 2, 4];
    while live.iter().any(|&j| !(vals[j].lower() > 0.0)) && eps > 1e-290 {
        eps *= 1e-8;
        vals = sums(eps)?;
    }
    let smallest = live.iter().map(|&j| vals[j].value).filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let target = (rel * smallest).max(1e-300);
    if smallest.is_finite() && target < eps {
        vals = sums(target)?;
    }
    let iv: Vec<I> = vals.iter().map(|c| c.interval()).collect();
    let d = iv[0];
    if !(d.lo > 0.0) {
        return Err(Error::Overflow("dual normalizer is not certified positive".into()));
    }
    let gap = iv[4].mul(d).sub(iv[1].mul(iv[2])).sub(iv[3].sqr().scale(2.0));
    Ok(gap.div(d.sqr()))
}

/// `tr Cov(D_{L+x,s}) − E_{D_{L,s}}[‖w‖²]` through the dual lattice: with
/// `φ(z) = exp(−π s²‖z‖²)` over `z ∈ L*`, `D₀ = Σφ`, `G = Σφ·2sin²(π⟨z,x⟩)`,
/// `H = Σφ‖z‖²·2sin²(π⟨z,x⟩)`, `T = Σφ‖z‖²`, `V = Σφ·z·sin(2π⟨z,x⟩)` and
/// `Dₓ = D₀ − G`, it equals `s⁴[(H·D₀ − T·G)/(D₀Dₓ) − ‖V‖²/Dₓ²]`.
pub(crate) fn covariance_trace_dual_gap(lat: &Lattice, x: &[f64], s: f64, rel: f64) -> Result<I> {
    let n = lat.dim();
    let p = GaussianParam::scalar(s)?;
    let dual = lat.dual();
    let (dp, dq) = dual_param(&p, n)?;
    let prep = prepare(&dual, &dp)?;
    let sums = |eps: f64| -> Result<Vec<CertifiedValue<f64>>> {
        let mut targets = vec![
            Target::plain(eps),
            Target { order: 0, coef: 2.0, eps },
            Target { order: 2, coef: 2.0, eps },
            Target { order: 2, coef: 1.0, eps },
        ];
        targets.extend((0..n).map(|_| Target { order: 1, coef: 1.0, eps }));
        let out = weighted_sums(&dual, &prep, &vec![0.0; n], &targets, |w: &[f64], dw, val, er| {
            let (t, te) = ip_with_err(w, x, dw);
            let (g, ge) = defect(t, te);
            let z2: f64 = w.iter().map(|v| v * v).sum();
            let wn = z2.sqrt();
            let z2e = 2.0 * wn * dw * (n as f64).sqrt() + n as f64 * dw * dw + (n as f64 + 1.0) * U * z2;
            let ang = 2.0 * std::f64::consts::PI * t;
            let sn = ang.sin();
            let sne = 2.0 * std::f64::consts::PI * te + 4.0 * U * ang.abs() + U;
            val[0] = 1.0;
            er[0] = 0.0;
            val[1] = g;
            er[1] = ge;
            val[2] = z2 * g;
            er[2] = z2 * ge + g * z2e + ge * z2e + U * z2 * g;
            val[3] = z2;
            er[3] = z2e;
            for i in 0..n {
                val[4 + i] = w[i] * sn;
                er[4 + i] = w[i].abs() * sne + dw * (sn.abs() + sne) + U * (w[i] * sn).abs();
            }
            let r = std::f64::consts::PI * dp.quadratic(w).abs() * dq * 1.01;
            for j in 0..4 + n {
                er[j] += val[j].abs() * r;
            }
        })?;
        Ok(out.values)
    };
    // G, H and T vanish only for x ∈ L (excluded by the caller)
    let live = [1usize, 2, 3];
    let mut eps = rel * 1e-3;
    let mut vals = sums(eps)?;
    while live.iter().any(|&j| !(vals[j].lower() > 0.0)) && eps > 1e-290 {
        eps *= 1e-8;
        vals = sums(eps)?;
    }
    let smallest = live.iter().map(|&j| vals[j].value).filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let target = (rel * smallest).max(1e-300);
    if smallest.is_finite() && target < eps {
        vals = sums(target)?;
    }
    let iv: Vec<I> = vals.iter().map(|c| c.interval()).collect();
    let (d0, g, h, t) = (iv[0], iv[1], iv[2], iv[3]);
    let dx = d0.sub(g);
    if !(dx.lo > 0.0) {
        return Err(Error::Overflow("dual normalizer is not certified positive".into()));
    }
    let v2 = iv[4..].iter().fold(I::point(0.0), |acc, v| acc.add(v.sqr()));
    let s4 = I::point(s * s).sqr();
    let gap = h.mul(d0).sub(t.mul(g)).div(d0.mul(dx)).sub(v2.div(dx.sqr()));
    Ok(gap.mul(s4))
}

/// The same gap on the primal side, centred at a nearest coset point `c`:
/// `tr Cov(D_{L+x}) = E‖w−c‖² − ‖E(w−c)‖²` holds for any fixed `c`, and centring
/// removes the `‖c‖²` that both terms share when the coset mass sits near `c`.
pub(crate) fn covariance_trace_centered_gap(lat: &Lattice, x: &[f64], s: f64, rel: f64) -> Result<I> {
    let n = lat.dim();
    let p = GaussianParam::scalar(s)?;
    let coset = Coset::new(lat.clone(), x.to_vec())?;
    let mut r = 0.5 * lat.gram_schmidt_norms_sq().iter().sum::<f64>().sqrt() * (1.0 + 1e-9) + 1e-9;
    let (near, kc) = loop {
        let pts = enumerate_points(&coset, r)?;
        if let Some(c) = pts.points.first() {
            break (c.clone(), pts.coeffs[0].clone());
        }
        r *= 2.0;
    };
    let b = lat.basis_f64();
    let cn = near.iter().map(|v| v * v).sum::<f64>().sqrt();
    let prep = prepare(lat, &p)?;
    let sums = |eps: f64| -> Result<(Vec<CertifiedValue<f64>>, Vec<CertifiedValue<f64>>)> {
        let mut targets = vec![
            Target::plain(eps),
            Target { order: 2, coef: 2.0, eps },
            Target { order: 0, coef: (2.0 * cn * cn).max(cn), eps },
        ];
        targets.extend((0..n).map(|_| Target { order: 1, coef: 1.0, eps }));
        let mut cs = weighted_sums_coeffs(lat, &prep, x, &targets, |k: &[i64], _w: &[f64], _dw, val, er| {
            // w − c from the integer coefficient difference, so the centre term is exactly zero
            let mut d = vec![0.0; n];
            let mut mag = 0.0f64;
            for (j, row) in b.iter().enumerate() {
                let dk = (k[j] - kc[j]) as f64;
                for i in 0..n {
                    d[i] += dk * row[i];
                    mag = mag.max((dk * row[i]).abs());
                }
            }
            let de = 2.0 * (n as f64 + 1.0) * U * mag * n as f64;
            let d2: f64 = d.iter().map(|v| v * v).sum();
            let dn = d2.sqrt();
            val[0] = 1.0;
            er[0] = 0.0;
            val[1] = d2;
            er[1] = (n as f64).sqrt() * (2.0 * dn * de + de * de) + (n as f64 + 1.0) * U * d2;
            val[2] = 0.0;
            er[2] = 0.0;
            for i in 0..n {
                val[3 + i] = d[i];
                er[3 + i] = de;
            }
        })?
        .values;
        let tail = cs[2].err;
        cs[1].err += tail;
        for v in cs[3..].iter_mut() {
            v.err += tail;
        }
        let ls = weighted_sums(
            lat,
            &prep,
            &vec![0.0; n],
            &[Target::plain(eps), Target { order: 2, coef: 1.0, eps }],
            |w: &[f64], dw, val, er| {
                let w2: f64 = w.iter().map(|v| v * v).sum();
                let wn = w2.sqrt();
                val[0] = 1.0;
                er[0] = 0.0;
                val[1] = w2;
                er[1] = (n as f64).sqrt() * (2.0 * wn * dw + dw * dw) + (n as f64 + 1.0) * U * w2;
            },
        )?
        .values;
        Ok((cs, ls))
    };
    let mut eps = rel * mass_lower_bound(lat, &prep, x)?;
    let (mut cs, mut ls) = sums(eps)?;
    while !(cs[1].lower() > 0.0 && ls[1].lower() > 0.0) && eps > 1e-290 {
        eps *= 1e-8;
        (cs, ls) = sums(eps)?;
    }
    let smallest = cs[1].value.min(ls[1].value);
    let target = (rel * smallest).max(1e-300);
    if smallest > 0.0 && target < eps {
        (cs, ls) = sums(target)?;
    }
    let m0 = cs[0].interval();
    let m2 = cs[1].interval();
    let m1 = cs[3..].iter().fold(I::point(0.0), |acc, v| acc.add(v.interval().sqr()));
    let (r0, t0) = (ls[0].interval(), ls[1].interval());
    Ok(m2.div(m0).sub(m1.div(m0.sqr())).sub(t0.div(r0)))
}

/// Membership of coefficient vectors (relative to the parent basis) in a
/// sublattice: `k ∈ Zⁿ X` iff `k·(d X⁻¹) ≡ 0 (mod d)`.
pub(crate) struct Membership {
    a: Vec<Vec<i128>>,
    d: i128,
}

impl Membership {
    pub fn new(parent: &Lattice, sub: &Lattice) -> Result<Self> {
        let x: Vec<Vec<Rational>> = sub.basis().iter().map(|b| parent.coefficients(b)).collect();
        if !x.iter().flatten().all(exact::is_integral) {
            return Err(Error::ParentMismatch);
        }
        let inv = exact::inverse(&x)?.ok_or(Error::SingularCoefficients)?;
        let d = inv.iter().flatten().fold(num_bigint::BigInt::from(1), |acc, r| num_integer::Integer::lcm(&acc, r.denom()));
        let to = |v: &num_bigint::BigInt| -> Result<i128> {
            i128::try_from(v).map_err(|_| Error::Overflow("sublattice membership matrix".into()))
        };
        let a = inv
            .iter()
            .map(|row| row.iter().map(|r| to(&(r * Rational::from_integer(d.clone())).to_integer())).collect())
            .collect::<Result<_>>()?;
        Ok(Self { a, d: to(&d)? })
    }

    pub fn contains(&self, k: &[i64]) -> bool {
        (0..self.a.len()).all(|c| k.iter().zip(&self.a).map(|(&ki, row)| ki as i128 * row[c]).sum::<i128>() % self.d == 0)
    }
}

pub(crate) type Mask<'a> = &'a (dyn Fn(&[i64]) -> bool + Sync);

/// `Σ_{w ∈ L+z, mask_j(k)} ρ(w)` for each mask, each to relative accuracy `rel`
/// once the sums flagged `live` are certified positive (sums that underflow
/// stay absolute).
pub(crate) fn masked_sums(
    lat: &Lattice,
    p: &GaussianParam<f64>,
    z: &[f64],
    masks: &[Mask],
    live: &[bool],
    rel: f64,
) -> Result<Vec<CertifiedValue<f64>>> {
    let prep = prepare(lat, p)?;
    let k = masks.len();
    let run = |eps: f64| -> Result<Vec<CertifiedValue<f64>>> {
        let targets = vec![Target::plain(eps); k];
        let out = weighted_sums_coeffs(lat, &prep, z, &targets, |c: &[i64], _: &[f64], _, v: &mut [f64], e: &mut [f64]| {
            for j in 0..k {
                v[j] = if masks[j](c) { 1.0 } else { 0.0 };
                e[j] = 0.0;
            }
        })?;
        Ok(out.values)
    };
    let mut eps = rel * mass_lower_bound(lat, &prep, z)?;
    let mut vals = run(eps)?;
    while live.iter().zip(&vals).any(|(l, v)| *l && !(v.lower() > 0.0)) && eps > 1e-290 {
        eps *= 1e-8;
        vals = run(eps)?;
    }
    let smallest = live.iter().zip(&vals).filter(|(l, _)| **l).map(|(_, v)| v.value).fold(f64::INFINITY, f64::min);
    let target = (rel * smallest).max(1e-300);
    if smallest.is_finite() && smallest > 0.0 && target < eps {
        vals = run(target)?;
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio;

    fn s1() -> GaussianParam<f64> {
        GaussianParam::scalar(1.0).unwrap()
    }

    #[test]
    fn fourth_moment_gap_on_integers() {
        let z = Lattice::integer(1);
        let g = fourth_moment_dual_gap(&z, &[1.0], &[1.0], &s1(), 1e-12).unwrap();
        let want = 0.07965450911080122 - 0.018997721932938332;
        assert!(g.lo <= want + 1e-12 && want - 1e-12 <= g.hi, "{g:?}");
    }

    #[test]
    fn covariance_trace_gaps_agree() {
        let z = Lattice::integer(1);
        for (s, x, want) in [(1.0, 0.3, 0.099910342799265524), (0.6, 0.45, 0.2075277402609790855), (2.5, 0.2, 1.6028953844228341e-7)] {
            let a = covariance_trace_dual_gap(&z, &[x], s, 1e-10).unwrap();
            let b = covariance_trace_centered_gap(&z, &[x], s, 1e-10).unwrap();
            for g in [a, b] {
                assert!((g.mid() - want).abs() <= 1e-8 * want + 1e-15, "{s} {x}: {g:?}");
                assert!(g.lo <= want * (1.0 + 1e-12) && want * (1.0 - 1e-12) <= g.hi);
            }
        }
    }

    #[test]
    fn defects_match_direct_values() {
        let z = Lattice::integer(1);
        let d = dual_defects(&z, &s1(), &[0.25], &[0.25], 1e-12).unwrap();
        assert!(d.a.contains(1.0 - 0.9204353680443247) || (d.a.mid() - (1.0 - 0.9204353680443247)).abs() < 1e-14);
        assert!((d.c.mid() - (1.0 - 0.8408964152537145)).abs() < 1e-14);
        assert!(d.d.contains(0.0) || d.d.hi < 1e-300);
        // gap of the periodic-product form, against the direct difference
        let g = d.q.scale(2.0).add(d.c.mul(d.d)).sub(d.a.sqr()).sub(d.b.sqr()).sub(d.a.mul(d.b).scale(4.0));
        let g = g.add(d.a.sqr().mul(d.b).scale(2.0)).add(d.a.mul(d.b.sqr()).scale(2.0)).sub(d.a.sqr().mul(d.b.sqr()));
        assert!((g.mid() - (0.84089641525371454 - 0.71774998637753754)).abs() < 1e-12);
    }

    #[test]
    fn lagrange_gap_matches_direct_difference() {
        let z = Lattice::integer(1);
        let (x, y) = (ratio(1, 4), ratio(1, 4));
        let (ha, hb) = h_vectors(&z, &s1(), &[&x + &y], &[&x - &y], 1e-13).unwrap();
        let rho0 = 1.0864348112133080f64;
        let g = lagrange_gap(&ha, &hb).scale(1.0 / rho0.powi(4));
        assert!((g.mid() - (0.84089641525371454 - 0.71774998637753754)).abs() < 1e-11);
    }

    #[test]
    fn relative_masses_resolve_tiny_values() {
        let z = Lattice::integer(1);
        let p = GaussianParam::scalar(0.25).unwrap();
        let m = rel_mass(&z, &p, &[ratio(1, 2)], 1e-10).unwrap();
        assert!(m.value < 1e-5 && m.err <= 1.1e-10 * m.value);
    }
}
