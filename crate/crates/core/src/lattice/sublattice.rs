//! Sublattices `M = L·X`, their intersections, and quotient groups `L/M`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use super::Lattice;
use crate::error::{Error, Result};
use crate::exact::{self, IntMatrix, Rational};
use crate::scalar::Real;

/// Quotients larger than this are refused rather than enumerated.
const MAX_QUOTIENT: u64 = 10_000_000;

/// A sublattice of `parent` whose j-th basis vector is `Σᵢ X[i][j]·bᵢ`.
#[derive(Clone, Debug)]
pub struct SublatticeRep {
    pub parent: Lattice,
    pub coeffs: IntMatrix,
    pub index: BigInt,
    pub lattice: Lattice,
}

impl SublatticeRep {
    pub fn index_u64(&self) -> Option<u64> {
        self.index.to_u64()
    }

    /// Whether a parent point with integer coordinates `z` lies in the sublattice.
    pub fn contains_coeffs(&self, z: &[BigInt]) -> bool {
        let zr: Vec<Rational> = z.iter().map(|v| Rational::from_integer(v.clone())).collect();
        let inv = exact::inverse(&exact::int_to_rat(&self.coeffs)).expect("square").expect("nonsingular");
        exact::mat_vec(&inv, &zr).iter().all(exact::is_integral)
    }

    /// Point-set equality of two sublattices of the same parent.
    pub fn same_points(&self, other: &SublatticeRep) -> bool {
        self.lattice.same_points(&other.lattice)
    }
}

pub fn sublattice(parent: &Lattice, x: &IntMatrix) -> Result<SublatticeRep> {
    let n = parent.dim();
    if x.len() != n || x.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let det = exact::int_determinant(x)?;
    if det.is_zero() {
        return Err(Error::SingularCoefficients);
    }
    let rows = exact::mat_mul(&exact::transpose(&exact::int_to_rat(x)), parent.basis());
    let lattice = Lattice::new(rows)?;
    Ok(SublatticeRep { parent: parent.clone(), coeffs: x.clone(), index: det.abs(), lattice })
}

/// `M ∩ N` as a sublattice of the common parent, in column Hermite form.
pub fn intersect(m: &SublatticeRep, n: &SublatticeRep) -> Result<SublatticeRep> {
    if !m.parent.same_basis(&n.parent) {
        return Err(Error::ParentMismatch);
    }
    let d = m.parent.dim();
    // [X | −Y]·(a; b) = 0  ⇔  X a = Y b, a common point
    let block: IntMatrix = (0..d)
        .map(|i| m.coeffs[i].iter().cloned().chain(n.coeffs[i].iter().map(|v| -v.clone())).collect())
        .collect();
    let kernel = exact::integer_kernel(&block);
    if kernel.len() != d {
        return Err(Error::Overflow(format!("intersection kernel has rank {} instead of {d}", kernel.len())));
    }
    // columns a_k of the kernel's first block
    let a: IntMatrix = (0..d).map(|i| kernel.iter().map(|kv| kv[i].clone()).collect()).collect();
    let c = exact::int_mat_mul(&m.coeffs, &a);
    let (h, _) = exact::hermite_columns(&c);
    sublattice(&m.parent, &h)
}

/// Coset representatives of `L/M` from the Smith form `U·X·V = D`.
#[derive(Clone, Debug)]
pub struct CosetReps {
    pub parent: Lattice,
    pub sub: SublatticeRep,
    /// Invariant factors `d₁ | d₂ | …`.
    pub diag: Vec<BigInt>,
    u: IntMatrix,
    /// Parent coordinates `z` of each representative.
    pub coeffs: Vec<Vec<BigInt>>,
    /// The representatives themselves, exact.
    pub reps: Vec<Vec<Rational>>,
}

impl CosetReps {
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn reps_as<T: Real>(&self) -> Vec<Vec<T>> {
        self.reps.iter().map(|r| r.iter().map(|v| T::lit(exact::rat_to_f64(v))).collect()).collect()
    }

    /// Index of the representative congruent to the parent point with
    /// coordinates `z`.
    pub fn class_of(&self, z: &[BigInt]) -> usize {
        let a = exact::int_mat_vec(&self.u, z);
        let mut idx = 0usize;
        let mut stride = 1usize;
        for (ai, di) in a.iter().zip(&self.diag) {
            let d = di.to_usize().expect("quotient size checked at construction");
            let r = ai.mod_floor(di).to_usize().unwrap_or(0);
            idx += r * stride;
            stride *= d;
        }
        idx
    }

    /// Exact test of `z₁ ≡ z₂ (mod M)`.
    pub fn equivalent(&self, z1: &[BigInt], z2: &[BigInt]) -> bool {
        let diff: Vec<BigInt> = z1.iter().zip(z2).map(|(a, b)| a - b).collect();
        self.sub.contains_coeffs(&diff)
    }
}

/// Representatives of `L/M`, ordered with the first Smith coordinate varying fastest.
pub fn quotient_reps(parent: &Lattice, sub: &SublatticeRep) -> Result<CosetReps> {
    if !parent.same_basis(&sub.parent) {
        return Err(Error::ParentMismatch);
    }
    let count = sub.index.to_u64().filter(|&c| c <= MAX_QUOTIENT);
    let Some(count) = count else {
        return Err(Error::BudgetExceeded { predicted: sub.index.to_u64().unwrap_or(u64::MAX), cap: MAX_QUOTIENT });
    };
    let s = exact::smith(&sub.coeffs)?;
    let u_inv = exact::unimodular_inverse(&s.u);
    let dims: Vec<u64> = s.diag.iter().map(|d| d.to_u64().expect("bounded by index")).collect();
    let n = parent.dim();
    let mut coeffs = Vec::with_capacity(count as usize);
    let mut reps = Vec::with_capacity(count as usize);
    let mut a = vec![0u64; n];
    for _ in 0..count {
        let av: Vec<BigInt> = a.iter().map(|&v| BigInt::from(v)).collect();
        let z = exact::int_mat_vec(&u_inv, &av);
        reps.push(parent.point(&z));
        coeffs.push(z);
        for (ai, &d) in a.iter_mut().zip(&dims) {
            *ai += 1;
            if *ai < d {
                break;
            }
            *ai = 0;
        }
    }
    Ok(CosetReps { parent: parent.clone(), sub: sub.clone(), diag: s.diag, u: s.u, coeffs, reps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int_from_i64, rat};

    fn reps_i64(r: &CosetReps) -> Vec<Vec<i64>> {
        r.reps.iter().map(|p| p.iter().map(|v| v.to_integer().to_i64().unwrap()).collect()).collect()
    }

    #[test]
    fn indices() {
        let z = Lattice::integer(1);
        assert_eq!(sublattice(&z, &int_from_i64(&[vec![2]])).unwrap().index, BigInt::from(2));
        let z2 = Lattice::integer(2);
        let m = sublattice(&z2, &int_from_i64(&[vec![2, 0], vec![0, 2]])).unwrap();
        assert_eq!(m.index, BigInt::from(4));
        let m = sublattice(&z2, &int_from_i64(&[vec![1, 0], vec![0, 3]])).unwrap();
        assert_eq!(m.index, BigInt::from(3));
        assert_eq!(m.lattice.basis()[1], vec![rat(0), rat(3)]);
        assert!(matches!(sublattice(&z2, &int_from_i64(&[vec![1, 2], vec![2, 4]])), Err(Error::SingularCoefficients)));
    }

    #[test]
    fn intersections() {
        let z = Lattice::integer(1);
        let m2 = sublattice(&z, &int_from_i64(&[vec![2]])).unwrap();
        let m3 = sublattice(&z, &int_from_i64(&[vec![3]])).unwrap();
        let i = intersect(&m2, &m3).unwrap();
        assert_eq!(i.index, BigInt::from(6));
        assert_eq!(intersect(&m2, &m2).unwrap().index, BigInt::from(2));
        let z2 = Lattice::integer(2);
        let a = sublattice(&z2, &int_from_i64(&[vec![1, 0], vec![0, 2]])).unwrap();
        let b = sublattice(&z2, &int_from_i64(&[vec![2, 0], vec![0, 1]])).unwrap();
        let i = intersect(&a, &b).unwrap();
        assert_eq!(i.index, BigInt::from(4));
        assert!(i.lattice.same_points(&Lattice::from_i64(&[vec![2, 0], vec![0, 2]]).unwrap()));
        let other = sublattice(&Lattice::integer(1), &int_from_i64(&[vec![2]])).unwrap();
        assert!(matches!(intersect(&a, &other), Err(Error::ParentMismatch)));
    }

    #[test]
    fn quotients() {
        let z = Lattice::integer(1);
        let m3 = sublattice(&z, &int_from_i64(&[vec![3]])).unwrap();
        assert_eq!(reps_i64(&quotient_reps(&z, &m3).unwrap()), vec![vec![0], vec![1], vec![2]]);
        let z2 = Lattice::integer(2);
        let two = sublattice(&z2, &int_from_i64(&[vec![2, 0], vec![0, 2]])).unwrap();
        assert_eq!(
            reps_i64(&quotient_reps(&z2, &two).unwrap()),
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]
        );
        let m = sublattice(&z2, &int_from_i64(&[vec![1, 0], vec![0, 3]])).unwrap();
        assert_eq!(reps_i64(&quotient_reps(&z2, &m).unwrap()), vec![vec![0, 0], vec![0, 1], vec![0, 2]]);
    }

    #[test]
    fn class_map_is_consistent() {
        let l = Lattice::from_i64(&[vec![1, 2], vec![0, 3]]).unwrap();
        let m = sublattice(&l, &int_from_i64(&[vec![2, 1], vec![-1, 3]])).unwrap();
        let q = quotient_reps(&l, &m).unwrap();
        assert_eq!(q.len(), 7);
        for (i, z) in q.coeffs.iter().enumerate() {
            assert_eq!(q.class_of(z), i);
            for (j, w) in q.coeffs.iter().enumerate() {
                assert_eq!(q.equivalent(z, w), i == j);
            }
        }
        let z: Vec<BigInt> = vec![BigInt::from(5), BigInt::from(-4)];
        let c = q.class_of(&z);
        assert!(q.equivalent(&z, &q.coeffs[c]));
    }
}
