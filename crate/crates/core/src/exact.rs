//! Exact rational and integer matrix arithmetic.
//!
//! Matrices are plain `Vec<Vec<_>>` in row-major order. Dimensions are small
//! (desk scale), so straightforward Gaussian elimination is used throughout.

use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::Value;

use crate::error::{Error, Result};

pub type Rational = BigRational;
pub type RatMatrix = Vec<Vec<Rational>>;
pub type IntMatrix = Vec<Vec<BigInt>>;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Exact rational value of a finite float.
pub fn rat_from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::InvalidParameter(format!("non-finite value {x}")))
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    match r.to_f64() {
        Some(v) => v,
        None => {
            // numerator/denominator too large for a direct conversion
            let n = r.numer().to_f64().unwrap_or(f64::NAN);
            let d = r.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

/// Parses an integer, a decimal string (optionally with exponent), a `"p/q"`
/// string, or a JSON number (taken at its exact binary value).
pub fn parse_rational_str(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(if all.is_empty() { "0" } else { &all }).map_err(|_| bad())?;
    if neg {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

pub fn parse_rational(v: &Value) -> Result<Rational> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(rat(i))
            } else if let Some(u) = n.as_u64() {
                Ok(Rational::from_integer(BigInt::from(u)))
            } else {
                rat_from_f64(n.as_f64().ok_or_else(|| Error::Parse(format!("bad number {n}")))?)
            }
        }
        Value::String(s) => parse_rational_str(s),
        other => Err(Error::Parse(format!("expected a number or rational string, got {other}"))),
    }
}

/// Integers become JSON integers when they fit in an `i64`; everything else is a
/// `"p/q"` (or big integer) string, so values round-trip exactly.
pub fn rational_to_json(r: &Rational) -> Value {
    if r.is_integer() {
        if let Some(i) = r.numer().to_i64() {
            return Value::from(i);
        }
        return Value::String(r.numer().to_string());
    }
    Value::String(format!("{}/{}", r.numer(), r.denom()))
}

pub fn is_integral(r: &Rational) -> bool {
    r.is_integer()
}

pub fn identity(n: usize) -> RatMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
        .collect()
}

pub fn transpose<T: Clone>(a: &[Vec<T>]) -> Vec<Vec<T>> {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j].clone()).collect()).collect()
}

pub fn mat_mul(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> RatMatrix {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    let mut acc = Rational::zero();
                    for k in 0..inner {
                        if !row[k].is_zero() && !b[k][j].is_zero() {
                            acc += &row[k] * &b[k][j];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

pub fn mat_vec(a: &[Vec<Rational>], v: &[Rational]) -> Vec<Rational> {
    a.iter()
        .map(|row| row.iter().zip(v).fold(Rational::zero(), |acc, (x, y)| acc + x * y))
        .collect()
}

pub fn int_to_rat(a: &[Vec<BigInt>]) -> RatMatrix {
    a.iter().map(|r| r.iter().map(|x| Rational::from_integer(x.clone())).collect()).collect()
}

pub fn int_from_i64(a: &[Vec<i64>]) -> IntMatrix {
    a.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
}

pub fn to_f64_matrix(a: &[Vec<Rational>]) -> Vec<Vec<f64>> {
    a.iter().map(|r| r.iter().map(rat_to_f64).collect()).collect()
}

fn check_square<T>(a: &[Vec<T>]) -> Result<usize> {
    let n = a.len();
    for row in a {
        if row.len() != n {
            return Err(Error::NotSquare { rows: n, cols: row.len() });
        }
    }
    Ok(n)
}

/// Signed determinant by fraction-based elimination.
pub fn determinant(a: &[Vec<Rational>]) -> Result<Rational> {
    let n = check_square(a)?;
    let mut m = a.to_vec();
    let mut det = Rational::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return Ok(Rational::zero());
        };
        if p != col {
            m.swap(p, col);
            det = -det;
        }
        let pivot = m[col][col].clone();
        det *= &pivot;
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = &m[r][col] / &pivot;
            for c in col..n {
                let delta = &factor * &m[col][c];
                m[r][c] -= delta;
            }
        }
    }
    Ok(det)
}

/// Exact inverse; `None` when singular.
pub fn inverse(a: &[Vec<Rational>]) -> Result<Option<RatMatrix>> {
    let n = check_square(a)?;
    let mut m: RatMatrix = a.to_vec();
    let mut inv = identity(n);
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return Ok(None);
        };
        m.swap(p, col);
        inv.swap(p, col);
        let pivot = m[col][col].clone();
        for c in 0..n {
            m[col][c] /= &pivot;
            inv[col][c] /= &pivot;
        }
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let factor = m[r][col].clone();
            for c in 0..n {
                let d1 = &factor * &m[col][c];
                m[r][c] -= d1;
                let d2 = &factor * &inv[col][c];
                inv[r][c] -= d2;
            }
        }
    }
    Ok(Some(inv))
}

pub fn int_determinant(a: &[Vec<BigInt>]) -> Result<BigInt> {
    let d = determinant(&int_to_rat(a))?;
    debug_assert!(d.is_integer());
    Ok(d.to_integer())
}

/// Inverse of a unimodular integer matrix.
pub fn unimodular_inverse(a: &[Vec<BigInt>]) -> IntMatrix {
    let inv = inverse(&int_to_rat(a)).expect("square").expect("unimodular matrix is invertible");
    inv.into_iter()
        .map(|r| {
            r.into_iter()
                .map(|x| {
                    debug_assert!(x.is_integer());
                    x.to_integer()
                })
                .collect()
        })
        .collect()
}

pub fn int_mat_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> IntMatrix {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).fold(BigInt::zero(), |acc, k| acc + &row[k] * &b[k][j]))
                .collect()
        })
        .collect()
}

pub fn int_mat_vec(a: &[Vec<BigInt>], v: &[BigInt]) -> Vec<BigInt> {
    a.iter().map(|row| row.iter().zip(v).fold(BigInt::zero(), |acc, (x, y)| acc + x * y)).collect()
}

// ---------------------------------------------------------------------------
// Integer normal forms. Column operations act on the right (A·U), row operations
// on the left (U·A); all transforms are unimodular.
// ---------------------------------------------------------------------------

fn col_swap(a: &mut [Vec<BigInt>], i: usize, j: usize) {
    for row in a.iter_mut() {
        row.swap(i, j);
    }
}

/// col_j -= q * col_i
fn col_axpy(a: &mut [Vec<BigInt>], j: usize, i: usize, q: &BigInt) {
    for row in a.iter_mut() {
        let delta = &row[i] * q;
        row[j] -= delta;
    }
}

fn col_negate(a: &mut [Vec<BigInt>], j: usize) {
    for row in a.iter_mut() {
        row[j] = -row[j].clone();
    }
}

/// Column echelon form: returns `(h, u, pivots)` with `a·u = h`, `u` unimodular,
/// and `pivots[k] = (row, col)` of the k-th pivot; columns `pivots.len()..` of
/// `h` are zero.
pub fn column_echelon(a: &[Vec<BigInt>]) -> (IntMatrix, IntMatrix, Vec<(usize, usize)>) {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut h = a.to_vec();
    let mut u: IntMatrix = (0..cols)
        .map(|i| (0..cols).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut p = 0;
    for r in 0..rows {
        if p == cols {
            break;
        }
        loop {
            let best = (p..cols).filter(|&j| !h[r][j].is_zero()).min_by(|&x, &y| {
                h[r][x].abs().cmp(&h[r][y].abs()).then(x.cmp(&y))
            });
            let Some(j) = best else { break };
            if j != p {
                col_swap(&mut h, p, j);
                col_swap(&mut u, p, j);
            }
            let mut clean = true;
            for j in p + 1..cols {
                if h[r][j].is_zero() {
                    continue;
                }
                let q = h[r][j].div_floor(&h[r][p]);
                col_axpy(&mut h, j, p, &q);
                col_axpy(&mut u, j, p, &q);
                if !h[r][j].is_zero() {
                    clean = false;
                }
            }
            if clean {
                break;
            }
        }
        if !h[r][p].is_zero() {
            if h[r][p].is_negative() {
                col_negate(&mut h, p);
                col_negate(&mut u, p);
            }
            pivots.push((r, p));
            p += 1;
        }
    }
    (h, u, pivots)
}

/// Column-style Hermite normal form of a nonsingular square integer matrix:
/// lower triangular, positive diagonal, and entries left of each diagonal entry
/// reduced into `[0, diag)`. Returns `(h, u)` with `a·u = h`.
pub fn hermite_columns(a: &[Vec<BigInt>]) -> (IntMatrix, IntMatrix) {
    let (mut h, mut u, pivots) = column_echelon(a);
    for (k, &(r, p)) in pivots.iter().enumerate() {
        debug_assert_eq!(k, p);
        for j in 0..p {
            let q = h[r][j].div_floor(&h[r][p]);
            if !q.is_zero() {
                col_axpy(&mut h, j, p, &q);
                col_axpy(&mut u, j, p, &q);
            }
        }
    }
    (h, u)
}

/// Basis of the integer kernel `{z : a·z = 0}`, one vector per entry.
pub fn integer_kernel(a: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let cols = if a.is_empty() { 0 } else { a[0].len() };
    let (_, u, pivots) = column_echelon(a);
    (pivots.len()..cols).map(|j| u.iter().map(|row| row[j].clone()).collect()).collect()
}

/// Smith normal form `u·a·v = diag(d)` with `d[i] | d[i+1]`, `d[i] >= 0`.
#[derive(Debug, Clone)]
pub struct Smith {
    pub diag: Vec<BigInt>,
    pub u: IntMatrix,
    pub v: IntMatrix,
}

pub fn smith(a: &[Vec<BigInt>]) -> Result<Smith> {
    let n = check_square(a)?;
    let mut m = a.to_vec();
    let eye = |n: usize| -> IntMatrix {
        (0..n).map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect()
    };
    let mut u = eye(n);
    let mut v = eye(n);
    for t in 0..n {
        loop {
            // smallest nonzero entry of the trailing block
            let mut best: Option<(usize, usize)> = None;
            for i in t..n {
                for j in t..n {
                    if m[i][j].is_zero() {
                        continue;
                    }
                    if best.is_none_or(|(bi, bj)| m[i][j].abs() < m[bi][bj].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else { break };
            if pi != t {
                m.swap(pi, t);
                u.swap(pi, t);
            }
            if pj != t {
                col_swap(&mut m, pj, t);
                col_swap(&mut v, pj, t);
            }
            let mut clean = true;
            for i in t + 1..n {
                if m[i][t].is_zero() {
                    continue;
                }
                let q = m[i][t].div_floor(&m[t][t]);
                for c in 0..n {
                    let d1 = &m[t][c] * &q;
                    m[i][c] -= d1;
                    let d2 = &u[t][c] * &q;
                    u[i][c] -= d2;
                }
                if !m[i][t].is_zero() {
                    clean = false;
                }
            }
            for j in t + 1..n {
                if m[t][j].is_zero() {
                    continue;
                }
                let q = m[t][j].div_floor(&m[t][t]);
                col_axpy(&mut m, j, t, &q);
                col_axpy(&mut v, j, t, &q);
                if !m[t][j].is_zero() {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            // divisibility of the trailing block by the pivot
            let offending = (t + 1..n).find(|&i| (t + 1..n).any(|j| !m[i][j].is_multiple_of(&m[t][t])));
            match offending {
                Some(i) => {
                    for c in 0..n {
                        let a1 = m[i][c].clone();
                        m[t][c] += a1;
                        let a2 = u[i][c].clone();
                        u[t][c] += a2;
                    }
                }
                None => break,
            }
        }
        if m[t][t].is_negative() {
            for c in 0..n {
                m[t][c] = -m[t][c].clone();
                u[t][c] = -u[t][c].clone();
            }
        }
    }
    let diag = (0..n).map(|i| m[i][i].clone()).collect();
    Ok(Smith { diag, u, v })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn im(rows: &[&[i64]]) -> IntMatrix {
        rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
    }

    #[test]
    fn parses_all_number_forms() {
        assert_eq!(parse_rational_str("3").unwrap(), rat(3));
        assert_eq!(parse_rational_str("-1/2").unwrap(), ratio(-1, 2));
        assert_eq!(parse_rational_str("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse_rational_str("-1.5e2").unwrap(), rat(-150));
        assert_eq!(parse_rational_str("2.5E-1").unwrap(), ratio(1, 4));
        assert_eq!(parse_rational(&serde_json::json!(0.5)).unwrap(), ratio(1, 2));
        assert!(parse_rational_str("1/0").is_err());
        assert!(parse_rational_str("abc").is_err());
        assert!(parse_rational_str("").is_err());
    }

    #[test]
    fn rational_json_is_lossless() {
        for r in [rat(7), ratio(-3, 8), ratio(1, 3)] {
            assert_eq!(parse_rational(&rational_to_json(&r)).unwrap(), r);
        }
        assert_eq!(rational_to_json(&rat(4)), serde_json::json!(4));
        assert_eq!(rational_to_json(&ratio(1, 3)), serde_json::json!("1/3"));
    }

    #[test]
    fn determinant_and_inverse() {
        let a = vec![vec![rat(1), rat(1)], vec![rat(1), rat(-1)]];
        assert_eq!(determinant(&a).unwrap(), rat(-2));
        let inv = inverse(&a).unwrap().unwrap();
        assert_eq!(mat_mul(&a, &inv), identity(2));
        let sing = vec![vec![rat(1), rat(0)], vec![rat(2), rat(0)]];
        assert!(inverse(&sing).unwrap().is_none());
        assert!(determinant(&sing).unwrap().is_zero());
    }

    #[test]
    fn smith_of_diagonal_is_untouched() {
        let s = smith(&im(&[&[1, 0], &[0, 3]])).unwrap();
        assert_eq!(s.diag, vec![BigInt::from(1), BigInt::from(3)]);
        assert_eq!(s.u, im(&[&[1, 0], &[0, 1]]));
    }

    #[test]
    fn smith_reconstructs() {
        let a = im(&[&[2, 4, 4], &[-6, 6, 12], &[10, -4, -16]]);
        let s = smith(&a).unwrap();
        let d = int_mat_mul(&int_mat_mul(&s.u, &a), &s.v);
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    assert_eq!(d[i][j], s.diag[i]);
                } else {
                    assert!(d[i][j].is_zero());
                }
            }
        }
        assert_eq!(s.diag, vec![BigInt::from(2), BigInt::from(6), BigInt::from(12)]);
        assert_eq!(int_determinant(&s.u).unwrap().abs(), BigInt::one());
    }

    #[test]
    fn kernel_of_stacked_blocks() {
        // [2 | -3]: kernel spanned by (3, 2)
        let k = integer_kernel(&im(&[&[2, -3]]));
        assert_eq!(k.len(), 1);
        let v = &k[0];
        assert_eq!(&v[0] * BigInt::from(2) - &v[1] * BigInt::from(3), BigInt::zero());
        assert_eq!(v[0].abs(), BigInt::from(3));
    }

    #[test]
    fn hermite_is_canonical() {
        let a = im(&[&[2, 1], &[0, 3]]);
        let b = im(&[&[3, 4], &[3, 6]]); // a times the unimodular [[1,1],[1,2]]
        assert_eq!(hermite_columns(&a).0, hermite_columns(&b).0);
        let (h, _) = hermite_columns(&a);
        assert!(h[0][1].is_zero());
        assert!(h[0][0].is_positive() && h[1][1].is_positive());
    }
}
