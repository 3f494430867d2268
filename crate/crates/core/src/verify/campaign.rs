//! Seeded random-instance campaigns.

use std::collections::BTreeMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::*;
use crate::exact::{rat, RatMatrix};

/// Shift coefficients are drawn on this dyadic grid so that `x ± y` stays exact
/// for integer bases.
const SHIFT_BITS: u32 = 40;
/// A shift whose coefficients are all within this distance of integers is redrawn.
const MIN_SHIFT: f64 = 0.05;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn trial_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(seed ^ splitmix64(trial))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    IntegerBasis,
    Diagonal,
    RotatedInteger,
}

impl std::str::FromStr for EnsembleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integer-basis" => Ok(Self::IntegerBasis),
            "diagonal" => Ok(Self::Diagonal),
            "rotated-integer" => Ok(Self::RotatedInteger),
            _ => Err(Error::Parse(format!("unknown ensemble kind {s:?}"))),
        }
    }
}

/// Distribution of random instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceEnsemble {
    pub kind: EnsembleKind,
    /// Dimensions drawn uniformly.
    pub dims: Vec<usize>,
    /// Basis entries lie in `[−B, B]` (diagonal entries in `[1, B]`).
    pub entry_bound: i64,
    /// Scalar parameter range `[lo, hi]`.
    pub s_range: (f64, f64),
    /// Largest sublattice index for the sublattice checks.
    pub max_index: u64,
    pub seed: u64,
}

impl InstanceEnsemble {
    /// Integer bases with entries in `[−5, 5]`, `n ∈ {1, 2, 3}`, `s ∈ [1/2, 4]`.
    pub fn default_campaign(seed: u64) -> Self {
        Self { kind: EnsembleKind::IntegerBasis, dims: vec![1, 2, 3], entry_bound: 5, s_range: (0.5, 4.0), max_index: 16, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.iter().any(|&d| d == 0 || d > 8) {
            return Err(Error::InvalidParameter("dims must be nonempty with entries in 1..=8".into()));
        }
        if self.entry_bound < 1 {
            return Err(Error::InvalidParameter("entry_bound must be at least 1".into()));
        }
        let (lo, hi) = self.s_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidParameter("s_range must satisfy 0 < lo ≤ hi".into()));
        }
        if self.max_index < 1 {
            return Err(Error::InvalidParameter("max_index must be at least 1".into()));
        }
        Ok(())
    }
}

/// The checks a campaign can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Main,
    Corollaries,
    Hessian,
    Covariance,
    FourthMoment,
    MonotoneS,
    MonotoneSigma,
    Sublattice,
    Correlation,
    Split,
    Poisson,
}

impl CheckKind {
    pub const ALL: [CheckKind; 11] = [
        CheckKind::Main,
        CheckKind::Corollaries,
        CheckKind::Hessian,
        CheckKind::Covariance,
        CheckKind::FourthMoment,
        CheckKind::MonotoneS,
        CheckKind::MonotoneSigma,
        CheckKind::Sublattice,
        CheckKind::Correlation,
        CheckKind::Split,
        CheckKind::Poisson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Main => "main",
            CheckKind::Corollaries => "corollaries",
            CheckKind::Hessian => "hessian",
            CheckKind::Covariance => "covariance",
            CheckKind::FourthMoment => "fourth-moment",
            CheckKind::MonotoneS => "monotone-s",
            CheckKind::MonotoneSigma => "monotone-sigma",
            CheckKind::Sublattice => "sublattice",
            CheckKind::Correlation => "correlation",
            CheckKind::Split => "split",
            CheckKind::Poisson => "poisson",
        }
    }
}

impl std::str::FromStr for CheckKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CheckKind::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown check {s:?}")))
    }
}

/// One random instance; every field is drawn whether or not a check uses it,
/// so instances do not depend on the selected checks.
#[derive(Clone, Debug)]
pub struct Instance {
    pub trial: u64,
    pub seed: u64,
    pub lattice: Lattice,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub sigma_small: Vec<Vec<f64>>,
    pub sigma_big: Vec<Vec<f64>>,
    pub m: Lattice,
    pub n: Lattice,
}

struct Draw(ChaCha20Rng);

impl Draw {
    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in `[lo, hi]`.
    fn int(&mut self, lo: i64, hi: i64) -> i64 {
        let span = (hi - lo + 1) as u128;
        lo + ((self.0.next_u64() as u128 * span) >> 64) as i64
    }

    fn dyadic(&mut self) -> f64 {
        (self.0.next_u64() >> (64 - SHIFT_BITS)) as f64 / (1u64 << SHIFT_BITS) as f64
    }
}

/// Rational rotation `(I − A)(I + A)⁻¹` from a skew-symmetric integer `A`.
fn cayley(d: &mut Draw, n: usize) -> RatMatrix {
    let mut a = vec![vec![rat(0); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rat(d.int(-2, 2));
            a[j][i] = -v.clone();
            a[i][j] = v;
        }
    }
    let id = exact::identity(n);
    let minus: RatMatrix = (0..n).map(|i| (0..n).map(|j| &id[i][j] - &a[i][j]).collect()).collect();
    let plus: RatMatrix = (0..n).map(|i| (0..n).map(|j| &id[i][j] + &a[i][j]).collect()).collect();
    let inv = exact::inverse(&plus).ok().flatten().expect("I + A is invertible for skew-symmetric A");
    exact::mat_mul(&minus, &inv)
}

fn random_basis(d: &mut Draw, kind: EnsembleKind, n: usize, b: i64) -> Result<Lattice> {
    loop {
        let rows: Vec<Vec<i64>> = match kind {
            EnsembleKind::Diagonal => (0..n).map(|i| (0..n).map(|j| if i == j { d.int(1, b) } else { 0 }).collect()).collect(),
            _ => (0..n).map(|_| (0..n).map(|_| d.int(-b, b)).collect()).collect(),
        };
        let m = exact::int_to_rat(&exact::int_from_i64(&rows));
        if exact::determinant(&m)? == rat(0) {
            continue;
        }
        let m = if kind == EnsembleKind::RotatedInteger { exact::mat_mul(&m, &cayley(d, n)) } else { m };
        return Lattice::new(m);
    }
}

/// A shift `Bᵀt` with `t` on the dyadic grid, away from the lattice.
fn random_shift(d: &mut Draw, lat: &Lattice) -> Vec<f64> {
    let n = lat.dim();
    loop {
        let t: Vec<f64> = (0..n).map(|_| d.dyadic()).collect();
        if t.iter().all(|v| (v - v.round()).abs() < MIN_SHIFT) {
            continue;
        }
        let te: Vec<Rational> = t.iter().map(|&v| exact::rat_from_f64(v).expect("finite")).collect();
        let basis = lat.basis();
        return (0..n)
            .map(|c| {
                let s = (0..n).fold(rat(0), |acc, i| acc + &te[i] * &basis[i][c]);
                exact::rat_to_f64(&s)
            })
            .collect();
    }
}

fn random_direction(d: &mut Draw, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| d.range(-1.0, 1.0)).collect();
        if v.iter().map(|t| t * t).sum::<f64>() > 0.01 {
            return v;
        }
    }
}

fn random_spd(d: &mut Draw, n: usize, scale: f64) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| d.range(-1.0, 1.0)).collect()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let g: f64 = (0..n).map(|k| a[i][k] * a[j][k]).sum::<f64>() / n as f64;
                    scale * (g + if i == j { 0.25 } else { 0.0 })
                })
                .collect()
        })
        .collect()
}

/// Triangular coefficient matrix with index at most `max_index`.
fn random_sublattice(d: &mut Draw, lat: &Lattice, max_index: u64) -> Result<Lattice> {
    let n = lat.dim();
    let mut left = max_index as i64;
    let mut x = vec![vec![0i64; n]; n];
    for i in 0..n {
        let di = d.int(1, left.max(1));
        left /= di;
        x[i][i] = di;
        for j in 0..i {
            x[j][i] = d.int(0, di - 1);
        }
    }
    Ok(sublattice(lat, &exact::int_from_i64(&x))?.lattice)
}

impl InstanceEnsemble {
    /// The instance for trial `trial`; a pure function of `(seed, trial)`.
    pub fn generate(&self, trial: u64) -> Result<Instance> {
        self.validate()?;
        let seed = trial_seed(self.seed, trial);
        let mut d = Draw(ChaCha20Rng::seed_from_u64(seed));
        let n = self.dims[d.int(0, self.dims.len() as i64 - 1) as usize];
        let lattice = random_basis(&mut d, self.kind, n, self.entry_bound)?;
        let x = random_shift(&mut d, &lattice);
        let y = random_shift(&mut d, &lattice);
        let s = d.range(self.s_range.0, self.s_range.1);
        let u = random_direction(&mut d, n);
        let v = random_direction(&mut d, n);
        let r1 = d.range(1.05, 1.5);
        let r2 = d.range(1.05, 1.5);
        let s_grid = vec![s, s * r1, s * r1 * r2];
        let sigma_small = random_spd(&mut d, n, s * s);
        let grow = d.range(0.0, 1.0);
        let extra = random_spd(&mut d, n, s * s * grow);
        let sigma_big = (0..n).map(|i| (0..n).map(|j| sigma_small[i][j] + extra[i][j]).collect()).collect();
        let m = random_sublattice(&mut d, &lattice, self.max_index)?;
        let nl = random_sublattice(&mut d, &lattice, self.max_index)?;
        Ok(Instance { trial, seed, lattice, x, y, s, u, v, s_grid, sigma_small, sigma_big, m, n: nl })
    }
}

impl Instance {
    pub fn param(&self) -> Param {
        GaussianParam::scalar(self.s).expect("positive s")
    }

    /// Runs one check on this instance.
    pub fn run(&self, check: CheckKind, eps: f64) -> Result<Vec<Verdict>> {
        let p = self.param();
        let l = &self.lattice;
        let one = |v: Result<Verdict>| v.map(|v| vec![v]);
        match check {
            CheckKind::Main => one(check_main_inequality(l, &self.x, &self.y, &p, eps)),
            CheckKind::Corollaries => check_corollaries(l, &self.x, &self.y, &p, eps),
            CheckKind::Hessian => one(check_hessian_domination(l, &self.x, &p, eps)),
            CheckKind::Covariance => one(check_covariance_domination(l, &self.x, &p, eps)),
            CheckKind::FourthMoment => one(check_fourth_moment(l, &self.u, &self.v, &p, eps)),
            CheckKind::MonotoneS => one(check_monotone_s(l, &self.x, &self.s_grid, eps)),
            CheckKind::MonotoneSigma => one(check_monotone_sigma(l, &self.x, &self.sigma_small, &self.sigma_big, eps)),
            CheckKind::Sublattice => one(check_sublattice_monotone(l, &self.m, &self.x, &p, eps)),
            CheckKind::Correlation => one(check_positive_correlation(l, &self.m, &self.n, &p, eps)),
            CheckKind::Split => one(check_split_identity(l, &self.x, &self.y, &p, eps)),
            CheckKind::Poisson => one(check_poisson(&Coset::new(l.clone(), self.x.clone())?, &p, eps)),
        }
    }
}

/// Forms that certify a gap directly rather than comparing two sides.
const DIFFERENCE_FORMS: [&str; 5] = ["lagrange", "dual-difference", "centered", "coset-split", "inclusion-exclusion"];

/// Per-verdict-name tallies.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub holds: usize,
    pub inconclusive: usize,
    pub violated: usize,
    pub errors: usize,
    /// HOLDS obtained by the direct form at the requested eps, without tightening.
    pub holds_direct: usize,
    /// HOLDS obtained through a difference form.
    pub holds_difference: usize,
    pub worst_margin: f64,
    /// `(inconclusive + errors) / total`
    pub inconclusive_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialError {
    pub trial: u64,
    pub seed: u64,
    pub check: String,
    pub message: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub ensemble: InstanceEnsemble,
    pub trials: u64,
    pub eps: f64,
    pub inconclusive_threshold: f64,
    pub checks: BTreeMap<String, CheckSummary>,
    pub violated: usize,
    /// Zero VIOLATED, no errors and every inconclusive rate below the threshold.
    pub passed: bool,
    /// Every verdict that is not HOLDS, with its instance.
    pub non_holding: Vec<Verdict>,
    pub errors: Vec<TrialError>,
}

/// Default threshold on the INCONCLUSIVE rate.
pub const INCONCLUSIVE_THRESHOLD: f64 = 0.01;

/// Runs `checks` on `trials` instances. Trials run in parallel; results depend
/// only on `(ensemble, trials, checks, eps)`.
pub fn run_campaign(e: &InstanceEnsemble, trials: u64, checks: &[CheckKind], eps: f64) -> Result<CampaignSummary> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    if checks.is_empty() {
        return Err(Error::InvalidParameter("no checks selected".into()));
    }
    check_eps(eps)?;
    e.validate()?;
    let mut checks = checks.to_vec();
    checks.sort();
    checks.dedup();
    let results: Vec<(u64, u64, Vec<(CheckKind, Result<Vec<Verdict>>)>)> = (0..trials)
        .into_par_iter()
        .map(|t| match e.generate(t) {
            Ok(inst) => {
                let out = checks.iter().map(|&c| (c, inst.run(c, eps))).collect();
                (t, inst.seed, out)
            }
            Err(err) => (t, trial_seed(e.seed, t), checks.iter().map(|&c| (c, Err(err.clone()))).collect()),
        })
        .collect();

    let mut table: BTreeMap<String, CheckSummary> = BTreeMap::new();
    let mut non_holding = Vec::new();
    let mut errors = Vec::new();
    for (trial, seed, outs) in results {
        for (check, res) in outs {
            match res {
                Ok(vs) => {
                    for mut v in vs {
                        let entry = table
                            .entry(v.name.clone())
                            .or_insert_with(|| CheckSummary { worst_margin: f64::INFINITY, ..Default::default() });
                        match v.status {
                            Status::Holds => {
                                entry.holds += 1;
                                if v.form == "direct" && v.eps_used == eps {
                                    entry.holds_direct += 1;
                                }
                                if DIFFERENCE_FORMS.iter().any(|f| v.form.ends_with(f)) {
                                    entry.holds_difference += 1;
                                }
                            }
                            Status::Inconclusive => entry.inconclusive += 1,
                            Status::Violated => entry.violated += 1,
                        }
                        entry.worst_margin = entry.worst_margin.min(v.margin);
                        if v.status != Status::Holds {
                            if let Value::Object(m) = &mut v.instance {
                                m.insert("trial".into(), json!(trial));
                                m.insert("seed".into(), json!(seed));
                            }
                            non_holding.push(v);
                        }
                    }
                }
                Err(err) => {
                    table
                        .entry(check.name().to_string())
                        .or_insert_with(|| CheckSummary { worst_margin: f64::INFINITY, ..Default::default() })
                        .errors += 1;
                    errors.push(TrialError { trial, seed, check: check.name().into(), message: err.to_string() });
                }
            }
        }
    }
    let mut violated = 0;
    let mut rates_ok = true;
    for s in table.values_mut() {
        let total = s.holds + s.inconclusive + s.violated + s.errors;
        s.inconclusive_rate = (s.inconclusive + s.errors) as f64 / total.max(1) as f64;
        violated += s.violated;
        rates_ok &= s.inconclusive_rate < INCONCLUSIVE_THRESHOLD;
    }
    Ok(CampaignSummary {
        ensemble: e.clone(),
        trials,
        eps,
        inconclusive_threshold: INCONCLUSIVE_THRESHOLD,
        checks: table,
        violated,
        passed: violated == 0 && errors.is_empty() && rates_ok,
        non_holding,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let e = InstanceEnsemble::default_campaign(7);
        let a = e.generate(3).unwrap();
        let b = e.generate(3).unwrap();
        assert_eq!(a.lattice, b.lattice);
        assert_eq!(a.x, b.x);
        assert_ne!(e.generate(4).unwrap().x, a.x);
    }

    #[test]
    fn shifts_are_away_from_the_lattice_and_sums_exact() {
        let e = InstanceEnsemble::default_campaign(11);
        for t in 0..50 {
            let inst = e.generate(t).unwrap();
            let xe = exact::rat_from_f64(inst.x[0]).unwrap();
            let ye = exact::rat_from_f64(inst.y[0]).unwrap();
            assert_eq!(exact::rat_from_f64(inst.x[0] + inst.y[0]).unwrap(), &xe + &ye);
            assert!(!inst.lattice.contains(&exact::rat_from_f64(inst.x[0]).map(|v| {
                let mut z = vec![v];
                z.extend(inst.x[1..].iter().map(|t| exact::rat_from_f64(*t).unwrap()));
                z
            }).unwrap()));
            assert!(inst.lattice.contains_lattice(&inst.m));
        }
    }

    #[test]
    fn rotated_bases_are_rational_and_same_volume() {
        let mut e = InstanceEnsemble::default_campaign(5);
        e.kind = EnsembleKind::RotatedInteger;
        e.dims = vec![3];
        let inst = e.generate(0).unwrap();
        assert!(inst.lattice.determinant() > &rat(0));
    }

    #[test]
    fn rejects_zero_trials() {
        let e = InstanceEnsemble::default_campaign(1);
        assert!(run_campaign(&e, 0, &[CheckKind::Main], 1e-10).is_err());
    }

    #[test]
    fn small_campaign_is_clean_and_reproducible() {
        let e = InstanceEnsemble::default_campaign(7);
        let a = run_campaign(&e, 20, &[CheckKind::Main, CheckKind::Corollaries], 1e-10).unwrap();
        assert_eq!(a.violated, 0);
        let b = run_campaign(&e, 20, &[CheckKind::Main, CheckKind::Corollaries], 1e-10).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
