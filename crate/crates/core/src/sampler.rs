//! Exact sampling from the discrete Gaussian `D_{L+x,p}` over a truncated support.
//!
//! The generator is ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64`. An index into the alias table is drawn as
//! `(next_u64 · m) >> 64` and the coin as `(next_u64 >> 11) · 2⁻⁵³`, so batches
//! are identical on every platform.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};

use crate::certified::CertifiedValue;
use crate::error::{Error, Result};
use crate::lattice::{enumerate_raw, Coset, Lattice, DEFAULT_POINT_CAP};
use crate::mass::engine::{mass_lower_bound, prepare, support_radius};
use crate::mass::GaussianParam;
use crate::moments::MomentReport;
use crate::scalar::Real;
use crate::summation::CompensatedSum;

/// Walker/Vose alias table.
#[derive(Clone, Debug)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    /// Builds the table from nonnegative weights with a positive sum.
    pub fn new(weights: &[f64]) -> Result<Self> {
        let m = weights.len();
        if m == 0 {
            return Err(Error::InvalidParameter("alias table needs at least one weight".into()));
        }
        let mut total = CompensatedSum::<f64>::new();
        for &w in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!("invalid weight {w}")));
            }
            total.add(w);
        }
        let total = total.value();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * m as f64 / total).collect();
        let mut prob = vec![1.0; m];
        let mut alias: Vec<usize> = (0..m).collect();
        let mut small = Vec::new();
        let mut large = Vec::new();
        for (i, &p) in scaled.iter().enumerate() {
            if p < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are 1 up to rounding
        for i in small.into_iter().chain(large) {
            prob[i] = 1.0;
        }
        Ok(Self { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn draw(&self, rng: &mut impl RngCore) -> usize {
        let m = self.prob.len() as u128;
        let i = ((rng.next_u64() as u128 * m) >> 64) as usize;
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        if u < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// Truncated support of `D_{L+x,p}` with its alias table.
#[derive(Clone, Debug)]
pub struct SamplerTable<T> {
    pub coset: Coset<T>,
    pub param: GaussianParam<T>,
    /// Integer coefficients of each support point.
    pub coeffs: Vec<Vec<i64>>,
    pub points: Vec<Vec<T>>,
    /// Normalized probabilities over the truncated support.
    pub probabilities: Vec<f64>,
    /// Bound on the total-variation distance to the untruncated distribution.
    pub tv_bound: f64,
    table: AliasTable,
}

impl<T: Real> SamplerTable<T> {
    pub fn new(c: &Coset<T>, p: &GaussianParam<T>, tv_eps: f64) -> Result<Self> {
        if !(tv_eps > 0.0 && tv_eps < 1.0) {
            return Err(Error::InvalidParameter(format!("tv_eps must lie in (0, 1), got {tv_eps}")));
        }
        let lat = &c.lattice;
        let prep = prepare(lat, p)?;
        let lb = mass_lower_bound(lat, &prep, &c.shift)?;
        // half the budget for the tail, the rest covers weight rounding
        let (r, tail) = support_radius(lat.dim(), &prep, 0.5 * tv_eps * lb);
        let shift64: Vec<f64> = c.shift.iter().map(|v| v.to_f64_lossy()).collect();
        let pts = enumerate_raw(lat, prep.form(lat), &shift64, r, DEFAULT_POINT_CAP, false)?;
        let scale = prep.metric.scale;
        let weights: Vec<f64> = pts.iter().map(|q| (-PI * q.q / scale).exp()).collect();
        let table = AliasTable::new(&weights)?;
        let mut total = CompensatedSum::<f64>::new();
        for &w in &weights {
            total.add(w);
        }
        let total = total.value();
        let m = weights.len() as f64;
        // relative weight error from the quadratic form and exp, plus the alias coin grid
        let qmax = pts.last().map(|q| q.q / scale).unwrap_or(0.0);
        let rounding = (PI * qmax * 8.0 + 8.0) * f64::EPSILON + m * 4.0 * f64::EPSILON + m * 2f64.powi(-53);
        let tv_bound = tail / lb + rounding;
        if tv_bound > tv_eps {
            return Err(Error::InvalidParameter(format!(
                "cannot reach total-variation bound {tv_eps:e} in double precision (achieved {tv_bound:e})"
            )));
        }
        Ok(Self {
            coset: c.clone(),
            param: p.clone(),
            coeffs: pts.iter().map(|q| q.coeffs.clone()).collect(),
            points: pts.iter().map(|q| q.w.iter().map(|&v| T::lit(v)).collect()).collect(),
            probabilities: weights.iter().map(|w| w / total).collect(),
            tv_bound,
            table,
        })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn draw_index(&self, rng: &mut impl RngCore) -> usize {
        self.table.draw(rng)
    }

    /// Draws `count` samples with a fresh generator seeded by `seed`.
    pub fn batch(&self, count: usize, seed: u64) -> Result<SampleBatch<T>> {
        if count == 0 {
            return Err(Error::InvalidParameter("count must be at least 1".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let indices: Vec<usize> = (0..count).map(|_| self.draw_index(&mut rng)).collect();
        Ok(SampleBatch {
            coset: self.coset.clone(),
            param: self.param.clone(),
            seed,
            count,
            tv_bound: self.tv_bound,
            samples: indices.iter().map(|&i| self.points[i].clone()).collect(),
            coeffs: indices.iter().map(|&i| self.coeffs[i].clone()).collect(),
            indices,
        })
    }
}

/// A batch of samples from `D_{L+x,p}`.
#[derive(Clone, Debug)]
pub struct SampleBatch<T> {
    pub coset: Coset<T>,
    pub param: GaussianParam<T>,
    pub seed: u64,
    pub count: usize,
    pub tv_bound: f64,
    pub samples: Vec<Vec<T>>,
    /// Lattice coefficients `k` with sample `= Bᵀk + x`.
    pub coeffs: Vec<Vec<i64>>,
    /// Index of each sample in the support of the [`SamplerTable`] that drew it.
    pub indices: Vec<usize>,
}

/// Draws `count` samples of `D_{L+x,p}` within total-variation distance `tv_eps`.
pub fn sample<T: Real>(
    c: &Coset<T>,
    p: &GaussianParam<T>,
    count: usize,
    seed: u64,
    tv_eps: f64,
) -> Result<SampleBatch<T>> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    SamplerTable::new(c, p, tv_eps)?.batch(count, seed)
}

impl<T: Real> SampleBatch<T> {
    /// Exact coordinates of sample `i`.
    pub fn exact_sample(&self, i: usize) -> Vec<crate::exact::Rational> {
        self.coset.point_exact(&self.coeffs[i])
    }

    pub fn header(&self) -> Value {
        json!({
            "lattice": self.coset.lattice.to_json(),
            "shift": self.coset.shift.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(),
            "param": self.param.to_json(),
            "seed": self.seed,
            "count": self.count,
            "tv_bound": self.tv_bound,
        })
    }

    /// JSON header line, then one sample per row.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", self.header())?;
        for s in &self.samples {
            let row: Vec<String> = s.iter().map(|v| format!("{:.16e}", v.to_f64_lossy())).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads what [`SampleBatch::write_csv`] wrote. Lattice coefficients are
    /// recovered exactly from the coordinates.
    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines();
        let head = lines
            .next()
            .ok_or_else(|| Error::Parse("empty sample file".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let h: Value = serde_json::from_str(&head).map_err(|e| Error::Parse(e.to_string()))?;
        let lattice = Lattice::from_json(&h["lattice"])?;
        let shift: Vec<T> = parse_f64_list(&h["shift"])?.into_iter().map(T::lit).collect();
        let coset = Coset::new(lattice, shift)?;
        let param = GaussianParam::from_json(&h["param"])?;
        let field = |k: &str| h[k].as_u64().ok_or_else(|| Error::Parse(format!("missing {k}")));
        let seed = field("seed")?;
        let count = field("count")? as usize;
        let tv_bound = h["tv_bound"].as_f64().ok_or_else(|| Error::Parse("missing tv_bound".into()))?;
        let n = coset.dim();
        let shift_exact = coset.shift_exact();
        let mut samples = Vec::with_capacity(count);
        let mut coeffs = Vec::with_capacity(count);
        for line in lines {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                .collect::<Result<_>>()?;
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            let w: Vec<crate::exact::Rational> = row.iter().map(|&v| crate::exact::rat_from_f64(v)).collect::<Result<_>>()?;
            let diff: Vec<_> = w.iter().zip(&shift_exact).map(|(a, b)| a - b).collect();
            let k: Vec<i64> = coset
                .lattice
                .coefficients(&diff)
                .iter()
                .map(|c| crate::exact::rat_to_f64(&c.round()) as i64)
                .collect();
            samples.push(row.into_iter().map(T::lit).collect());
            coeffs.push(k);
        }
        if samples.len() != count {
            return Err(Error::Parse(format!("header says {count} samples, found {}", samples.len())));
        }
        Ok(Self { coset, param, seed, count, tv_bound, samples, coeffs, indices: Vec::new() })
    }
}

fn parse_f64_list(v: &Value) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::Parse("expected an array".into()))?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| Error::Parse(format!("not a number: {x}"))))
        .collect()
}

/// Sample mean, second moment and covariance; the error fields hold standard errors.
pub fn empirical_moments<T: Real>(b: &SampleBatch<T>) -> Result<MomentReport<T>> {
    let count = b.samples.len();
    if count < 2 {
        return Err(Error::InvalidParameter("empirical moments need at least two samples".into()));
    }
    let n = b.coset.dim();
    let nf = count as f64;
    let data: Vec<Vec<f64>> = b.samples.iter().map(|s| s.iter().map(|v| v.to_f64_lossy()).collect()).collect();
    let avg = |f: &dyn Fn(&[f64]) -> f64| -> (f64, f64) {
        let mut s = CompensatedSum::<f64>::new();
        for row in &data {
            s.add(f(row));
        }
        let m = s.value() / nf;
        let mut v = CompensatedSum::<f64>::new();
        for row in &data {
            v.add((f(row) - m).powi(2));
        }
        let var = v.value() / (nf - 1.0);
        (m, (var / nf).sqrt())
    };
    let mut mean = vec![0.0; n];
    let mut mean_err = vec![0.0; n];
    for i in 0..n {
        (mean[i], mean_err[i]) = avg(&|r| r[i]);
    }
    let mut second = vec![vec![0.0; n]; n];
    let mut second_err = vec![vec![0.0; n]; n];
    let mut cov = vec![vec![0.0; n]; n];
    let mut cov_err = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let (s, se) = avg(&|r| r[i] * r[j]);
            let (mi, mj) = (mean[i], mean[j]);
            let (c, ce) = avg(&|r| (r[i] - mi) * (r[j] - mj));
            for (a, b) in [(i, j), (j, i)] {
                second[a][b] = s;
                second_err[a][b] = se;
                cov[a][b] = c * nf / (nf - 1.0);
                cov_err[a][b] = ce;
            }
        }
    }
    let conv = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
    let conv2 = |m: Vec<Vec<f64>>| m.into_iter().map(conv).collect::<Vec<_>>();
    Ok(MomentReport {
        mean: conv(mean),
        mean_err: conv(mean_err),
        second: conv2(second),
        second_err: conv2(second_err),
        covariance: conv2(cov),
        covariance_err: conv2(cov_err),
        mass: None::<CertifiedValue<T>>,
    })
}
