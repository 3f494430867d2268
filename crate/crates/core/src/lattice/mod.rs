//! Exact lattices, cosets, sublattices and bounded point enumeration.
//!
//! A lattice is stored by its basis vectors (one per row) over the rationals.
//! All structural questions (membership, duals, intersections, quotients) are
//! answered in exact arithmetic; floating point only enters when points are
//! enumerated and weighted.

mod enumerate;
mod sublattice;

use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exact::{self, RatMatrix, Rational};
use crate::linalg;
use crate::scalar::Real;

pub use enumerate::{enumerate_points, enumerate_points_capped, exact_norm_sq, PointList, DEFAULT_POINT_CAP};
pub(crate) use enumerate::{enumerate_raw, QuadForm, RawPoint};
pub use sublattice::{intersect, quotient_reps, sublattice, CosetReps, SublatticeRep};

struct LatticeData {
    basis: RatMatrix,
    gram: RatMatrix,
    det: Rational,
    /// `k = coeff_map · w` recovers coefficients; its rows are the dual basis.
    coeff_map: RatMatrix,
    basis_f64: Vec<Vec<f64>>,
    coeff_map_f64: Vec<Vec<f64>>,
    euclidean: QuadForm,
    /// Memoized upper bounds on the total Gaussian mass, keyed by parameter bits.
    mass_bounds: Mutex<Vec<(Vec<u64>, f64)>>,
}

/// A full-rank lattice in `Rⁿ`, cheap to clone and safe to share.
#[derive(Clone)]
pub struct Lattice {
    inner: Arc<LatticeData>,
}

impl Lattice {
    /// Builds a lattice from basis vectors given as rows.
    pub fn new(basis: RatMatrix) -> Result<Self> {
        let n = basis.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty basis".into()));
        }
        for row in &basis {
            if row.len() != n {
                return Err(Error::NotSquare { rows: n, cols: row.len() });
            }
        }
        let det = exact::determinant(&basis)?;
        if det.is_zero() {
            return Err(Error::SingularBasis);
        }
        let gram = exact::mat_mul(&basis, &exact::transpose(&basis));
        let coeff_map = exact::transpose(&exact::inverse(&basis)?.ok_or(Error::SingularBasis)?);
        let basis_f64 = exact::to_f64_matrix(&basis);
        let coeff_map_f64 = exact::to_f64_matrix(&coeff_map);
        let euclidean = QuadForm::from_gram(None, exact::to_f64_matrix(&gram))?;
        Ok(Self {
            inner: Arc::new(LatticeData {
                basis,
                gram,
                det: det.abs(),
                coeff_map,
                basis_f64,
                coeff_map_f64,
                euclidean,
                mass_bounds: Mutex::new(Vec::new()),
            }),
        })
    }

    pub fn from_i64(rows: &[Vec<i64>]) -> Result<Self> {
        Self::new(rows.iter().map(|r| r.iter().map(|&x| exact::rat(x)).collect()).collect())
    }

    /// Basis from floats, each taken at its exact binary value.
    pub fn from_f64(rows: &[Vec<f64>]) -> Result<Self> {
        let basis = rows
            .iter()
            .map(|r| r.iter().map(|&x| exact::rat_from_f64(x)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(basis)
    }

    /// The integer lattice `Zⁿ`.
    pub fn integer(n: usize) -> Self {
        Self::new(exact::identity(n)).expect("identity is nonsingular")
    }

    pub fn dim(&self) -> usize {
        self.inner.basis.len()
    }

    pub fn basis(&self) -> &RatMatrix {
        &self.inner.basis
    }

    pub fn gram(&self) -> &RatMatrix {
        &self.inner.gram
    }

    /// `|det B|`, exact.
    pub fn determinant(&self) -> &Rational {
        &self.inner.det
    }

    pub fn determinant_f64(&self) -> f64 {
        exact::rat_to_f64(&self.inner.det)
    }

    pub fn basis_f64(&self) -> &[Vec<f64>] {
        &self.inner.basis_f64
    }

    pub fn basis_as<T: Real>(&self) -> Vec<Vec<T>> {
        self.inner.basis_f64.iter().map(|r| r.iter().map(|&x| T::lit(x)).collect()).collect()
    }

    pub(crate) fn coeff_map_f64(&self) -> &[Vec<f64>] {
        &self.inner.coeff_map_f64
    }

    pub(crate) fn euclidean_form(&self) -> &QuadForm {
        &self.inner.euclidean
    }

    /// Exact point `Σ kᵢ bᵢ`.
    pub fn point(&self, coeffs: &[BigInt]) -> Vec<Rational> {
        let n = self.dim();
        (0..n)
            .map(|c| {
                coeffs.iter().zip(&self.inner.basis).fold(Rational::zero(), |acc, (k, row)| {
                    acc + Rational::from_integer(k.clone()) * &row[c]
                })
            })
            .collect()
    }

    pub fn point_i64(&self, coeffs: &[i64]) -> Vec<Rational> {
        self.point(&coeffs.iter().map(|&k| BigInt::from(k)).collect::<Vec<_>>())
    }

    /// Coordinates of `w` in this basis (rational in general).
    pub fn coefficients(&self, w: &[Rational]) -> Vec<Rational> {
        exact::mat_vec(&self.inner.coeff_map, w)
    }

    pub fn contains(&self, w: &[Rational]) -> bool {
        w.len() == self.dim() && self.coefficients(w).iter().all(exact::is_integral)
    }

    /// Exact membership test for a floating-point vector.
    pub fn contains_real<T: Real>(&self, w: &[T]) -> bool {
        let exact: Option<Vec<Rational>> = w.iter().map(|x| exact::rat_from_f64(x.to_f64_lossy()).ok()).collect();
        exact.is_some_and(|w| self.contains(&w))
    }

    /// The dual lattice, basis `B^{-T}`.
    pub fn dual(&self) -> Lattice {
        Self::new(self.inner.coeff_map.clone()).expect("inverse transpose of a basis is a basis")
    }

    /// `c·L`
    pub fn scaled(&self, c: &Rational) -> Result<Lattice> {
        Self::new(self.inner.basis.iter().map(|r| r.iter().map(|x| x * c).collect()).collect())
    }

    /// True when every basis vector of `other` lies in `self`.
    pub fn contains_lattice(&self, other: &Lattice) -> bool {
        other.dim() == self.dim() && other.basis().iter().all(|b| self.contains(b))
    }

    /// Point-set equality.
    pub fn same_points(&self, other: &Lattice) -> bool {
        self.contains_lattice(other) && other.contains_lattice(self)
    }

    pub(crate) fn same_basis(&self, other: &Lattice) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.basis == other.inner.basis
    }

    pub(crate) fn cached_mass_bound(&self, key: &[u64]) -> Option<f64> {
        let guard = self.inner.mass_bounds.lock().expect("mass bound cache poisoned");
        guard.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub(crate) fn store_mass_bound(&self, key: Vec<u64>, value: f64) {
        let mut guard = self.inner.mass_bounds.lock().expect("mass bound cache poisoned");
        if guard.len() > 64 {
            guard.clear();
        }
        if !guard.iter().any(|(k, _)| *k == key) {
            guard.push((key, value));
        }
    }

    /// Serializable form `{"basis": [[...], ...]}`.
    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> =
            self.inner.basis.iter().map(|r| Value::Array(r.iter().map(exact::rational_to_json).collect())).collect();
        serde_json::json!({ "basis": rows })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let rows = v
            .get("basis")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing \"basis\" array".into()))?;
        Self::new(parse_matrix(rows)?)
    }

    /// Squared Gram–Schmidt norms of the basis (in the given order).
    pub fn gram_schmidt_norms_sq(&self) -> Vec<f64> {
        let g = exact::to_f64_matrix(self.gram());
        let l = linalg::cholesky(&g).expect("basis Gram matrix is positive definite");
        l.iter().enumerate().map(|(i, r)| r[i] * r[i]).collect()
    }

    /// Euclidean length of the longest basis vector, in floating point.
    pub fn max_basis_norm(&self) -> f64 {
        self.inner.basis_f64.iter().map(|r| linalg::dot(r, r).sqrt()).fold(0.0, f64::max)
    }
}

pub(crate) fn parse_matrix(rows: &[Value]) -> Result<RatMatrix> {
    rows.iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| Error::Parse("matrix rows must be arrays".into()))?
                .iter()
                .map(exact::parse_rational)
                .collect()
        })
        .collect()
}

impl fmt::Debug for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lattice({})", self.to_json()["basis"])
    }
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.same_basis(other)
    }
}

impl Serialize for Lattice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Lattice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Lattice::from_json(&v).map_err(D::Error::custom)
    }
}

/// A translate `L + x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coset<T> {
    pub lattice: Lattice,
    pub shift: Vec<T>,
}

impl<T: Real> Coset<T> {
    pub fn new(lattice: Lattice, shift: Vec<T>) -> Result<Self> {
        if shift.len() != lattice.dim() {
            return Err(Error::DimensionMismatch { expected: lattice.dim(), got: shift.len() });
        }
        if shift.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("shift must be finite".into()));
        }
        Ok(Self { lattice, shift })
    }

    /// The lattice itself (zero shift).
    pub fn origin(lattice: Lattice) -> Self {
        let n = lattice.dim();
        Self { lattice, shift: vec![T::zero(); n] }
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn shift_exact(&self) -> Vec<Rational> {
        self.shift.iter().map(|x| exact::rat_from_f64(x.to_f64_lossy()).expect("finite shift")).collect()
    }

    /// True when the shift lies in the lattice, i.e. the coset is the lattice itself.
    pub fn is_trivial(&self) -> bool {
        self.lattice.contains(&self.shift_exact())
    }

    /// Exact membership of `w` in `L + x`.
    pub fn contains_exact(&self, w: &[Rational]) -> bool {
        let shift = self.shift_exact();
        let diff: Vec<Rational> = w.iter().zip(&shift).map(|(a, b)| a - b).collect();
        self.lattice.contains(&diff)
    }

    /// The point `Σ kᵢ bᵢ + x`, exact.
    pub fn point_exact(&self, coeffs: &[i64]) -> Vec<Rational> {
        let p = self.lattice.point_i64(coeffs);
        p.into_iter().zip(self.shift_exact()).map(|(a, b)| a + b).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{rat, ratio};

    #[test]
    fn identity_lattice() {
        let l = Lattice::integer(2);
        assert_eq!(*l.determinant(), rat(1));
        assert_eq!(*l.gram(), exact::identity(2));
    }

    #[test]
    fn rotated_square_lattice_has_det_two() {
        let l = Lattice::from_i64(&[vec![1, 1], vec![1, -1]]).unwrap();
        assert_eq!(*l.determinant(), rat(2));
    }

    #[test]
    fn rank_deficient_basis_is_rejected() {
        assert_eq!(Lattice::from_i64(&[vec![1, 0], vec![2, 0]]).unwrap_err(), Error::SingularBasis);
        assert!(matches!(Lattice::new(vec![vec![rat(1), rat(2)]]), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn duals() {
        assert!(Lattice::integer(3).dual().same_points(&Lattice::integer(3)));
        let d = Lattice::from_i64(&[vec![2, 0], vec![0, 1]]).unwrap().dual();
        assert_eq!(d.basis()[0], vec![ratio(1, 2), rat(0)]);
        assert_eq!(d.basis()[1], vec![rat(0), rat(1)]);
        let d = Lattice::from_i64(&[vec![1, 1], vec![1, -1]]).unwrap().dual();
        assert_eq!(*d.determinant(), ratio(1, 2));
        // inner products of primal and dual basis vectors are integers
        let l = Lattice::from_i64(&[vec![3, 1, 0], vec![1, -2, 4], vec![0, 5, 1]]).unwrap();
        let ld = l.dual();
        for b in l.basis() {
            for d in ld.basis() {
                let ip: Rational = b.iter().zip(d).map(|(x, y)| x * y).sum();
                assert!(ip.is_integer());
            }
        }
        assert!(ld.dual().same_points(&l));
    }

    #[test]
    fn membership() {
        let l = Lattice::from_i64(&[vec![1, 1], vec![1, -1]]).unwrap();
        assert!(l.contains(&[rat(2), rat(0)]));
        assert!(!l.contains(&[rat(1), rat(0)]));
        assert!(l.contains_real(&[0.0f64, 2.0]));
        let c = Coset::new(l, vec![0.5f64, 0.5]).unwrap();
        assert!(c.contains_exact(&[ratio(5, 2), ratio(1, 2)]));
        assert!(!c.contains_exact(&[ratio(3, 2), ratio(1, 2)]));
        assert!(!c.is_trivial());
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let l = Lattice::new(vec![vec![ratio(1, 3), rat(2)], vec![rat(0), ratio(-7, 5)]]).unwrap();
        let j = l.to_json();
        assert_eq!(j, serde_json::json!({"basis": [["1/3", 2], [0, "-7/5"]]}));
        let back = Lattice::from_json(&j).unwrap();
        assert_eq!(back.basis(), l.basis());
        let parsed: Lattice = serde_json::from_str(r#"{"basis": [["0.5", 1], [0, "3/4"]]}"#).unwrap();
        assert_eq!(parsed.basis()[0][0], ratio(1, 2));
        assert!(Lattice::from_json(&serde_json::json!({"basis": [[1, "x"], [0, 1]]})).is_err());
    }

    #[test]
    fn shift_length_must_match() {
        assert!(matches!(
            Coset::new(Lattice::integer(2), vec![0.0f64]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }
}
