//! Small dense floating-point linear algebra (n is at most a handful).

use crate::scalar::Real;

pub type Matrix<T> = Vec<Vec<T>>;

pub fn zeros<T: Real>(r: usize, c: usize) -> Matrix<T> {
    vec![vec![T::zero(); c]; r]
}

pub fn eye<T: Real>(n: usize) -> Matrix<T> {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub fn mul<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> Matrix<T> {
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| (0..cols).map(|j| row.iter().zip(b).fold(T::zero(), |acc, (x, brow)| acc + *x * brow[j])).collect())
        .collect()
}

pub fn mat_vec<T: Real>(a: &[Vec<T>], v: &[T]) -> Vec<T> {
    a.iter().map(|row| dot(row, v)).collect()
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

pub fn transpose<T: Real>(a: &[Vec<T>]) -> Matrix<T> {
    crate::exact::transpose(a)
}

pub fn symmetrize<T: Real>(a: &[Vec<T>]) -> Matrix<T> {
    let n = a.len();
    let half = T::lit(0.5);
    (0..n).map(|i| (0..n).map(|j| (a[i][j] + a[j][i]) * half).collect()).collect()
}

pub fn max_asymmetry<T: Real>(a: &[Vec<T>]) -> T {
    let n = a.len();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((a[i][j] - a[j][i]).abs());
        }
    }
    worst
}

/// Lower-triangular `l` with `a = l·lᵀ`; `None` unless `a` is positive definite.
pub fn cholesky<T: Real>(a: &[Vec<T>]) -> Option<Matrix<T>> {
    let n = a.len();
    let mut l = zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Inverse by Gauss–Jordan with partial pivoting; `None` when numerically singular.
pub fn inverse<T: Real>(a: &[Vec<T>]) -> Option<Matrix<T>> {
    let n = a.len();
    let mut m = a.to_vec();
    let mut inv = eye(n);
    for col in 0..n {
        let p = (col..n).max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())?;
        if m[p][col] == T::zero() {
            return None;
        }
        m.swap(p, col);
        inv.swap(p, col);
        let pivot = m[col][col];
        for c in 0..n {
            m[col][c] = m[col][c] / pivot;
            inv[col][c] = inv[col][c] / pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r][col];
            if f == T::zero() {
                continue;
            }
            for c in 0..n {
                m[r][c] = m[r][c] - f * m[col][c];
                inv[r][c] = inv[r][c] - f * inv[col][c];
            }
        }
    }
    Some(inv)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order and the matching eigenvectors as columns.
pub fn symmetric_eigen<T: Real>(a: &[Vec<T>]) -> (Vec<T>, Matrix<T>) {
    let n = a.len();
    let mut m = symmetrize(a);
    let mut v = eye(n);
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut scale = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off + m[i][j] * m[i][j];
                }
                scale = scale + m[i][j] * m[i][j];
            }
        }
        if off <= scale * T::epsilon() * T::epsilon() || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == T::zero() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (two * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&i| v[r][i]).collect()).collect();
    (values, vectors)
}

pub fn min_eigenvalue<T: Real>(a: &[Vec<T>]) -> T {
    symmetric_eigen(a).0.first().copied().unwrap_or_else(T::zero)
}

pub fn max_eigenvalue<T: Real>(a: &[Vec<T>]) -> T {
    symmetric_eigen(a).0.last().copied().unwrap_or_else(T::zero)
}

/// `f(a)` for symmetric `a` through its eigen-decomposition.
pub fn symmetric_function<T: Real>(a: &[Vec<T>], f: impl Fn(T) -> T) -> Matrix<T> {
    let n = a.len();
    let (vals, vecs) = symmetric_eigen(a);
    let fv: Vec<T> = vals.into_iter().map(f).collect();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).fold(T::zero(), |acc, k| acc + vecs[i][k] * fv[k] * vecs[j][k])).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_roundtrip_and_rejection() {
        let a = vec![vec![4.0f64, 2.0], vec![2.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let back = mul(&l, &transpose(&l));
        for i in 0..2 {
            for j in 0..2 {
                assert!((back[i][j] - a[i][j]).abs() < 1e-14);
            }
        }
        assert!(cholesky(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_none());
    }

    #[test]
    fn jacobi_eigenvalues() {
        let a = vec![vec![2.0f64, 1.0, 0.0], vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 5.0]];
        let (vals, vecs) = symmetric_eigen(&a);
        let expect = [1.0, 3.0, 5.0];
        for (v, e) in vals.iter().zip(expect) {
            assert!((v - e).abs() < 1e-13);
        }
        // a·v = λ v
        for k in 0..3 {
            let col: Vec<f64> = (0..3).map(|r| vecs[r][k]).collect();
            let av = mat_vec(&a, &col);
            for r in 0..3 {
                assert!((av[r] - vals[k] * col[r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_square_root() {
        let a = vec![vec![4.0f64, 0.0], vec![0.0, 9.0]];
        let r = symmetric_function(&a, |x| 1.0 / x.sqrt());
        assert!((r[0][0] - 0.5).abs() < 1e-15 && (r[1][1] - 1.0 / 3.0).abs() < 1e-15);
        let inv = inverse(&a).unwrap();
        assert!((inv[1][1] - 1.0 / 9.0).abs() < 1e-16);
    }
}
