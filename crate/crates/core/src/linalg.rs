//! Fixed-size linear algebra: vectors of R^5, symmetric eigenproblems of
//! size 2 and 3, Gram-Schmidt with complement completion.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec5(pub [f64; 5]);

impl Vec5 {
    pub const ZERO: Vec5 = Vec5([0.0; 5]);

    pub fn basis(i: usize) -> Self {
        let mut v = Self::ZERO;
        v.0[i] = 1.0;
        v
    }

    #[inline]
    pub fn dot(&self, other: &Vec5) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(&self) -> Vec5 {
        *self * (1.0 / self.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Component of `self` orthogonal to the orthonormal set `basis`.
    pub fn reject(&self, basis: &[Vec5]) -> Vec5 {
        let mut r = *self;
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for b in basis {
                r = r - *b * r.dot(b);
            }
        }
        r
    }
}

impl Index<usize> for Vec5 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec5 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for Vec5 {
    type Output = Vec5;
    fn add(self, rhs: Vec5) -> Vec5 {
        Vec5(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

impl AddAssign for Vec5 {
    fn add_assign(&mut self, rhs: Vec5) {
        *self = *self + rhs;
    }
}

impl Sub for Vec5 {
    type Output = Vec5;
    fn sub(self, rhs: Vec5) -> Vec5 {
        Vec5(std::array::from_fn(|i| self.0[i] - rhs.0[i]))
    }
}

impl Mul<f64> for Vec5 {
    type Output = Vec5;
    fn mul(self, s: f64) -> Vec5 {
        Vec5(self.0.map(|x| x * s))
    }
}

impl Neg for Vec5 {
    type Output = Vec5;
    fn neg(self) -> Vec5 {
        self * -1.0
    }
}

/// Determinant of the 5x5 matrix whose rows are `rows`.
pub fn det5(rows: &[Vec5; 5]) -> f64 {
    let mut m: [[f64; 5]; 5] = std::array::from_fn(|i| rows[i].0);
    let mut det = 1.0;
    for col in 0..5 {
        let pivot = (col..5)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..5 {
            let factor = m[row][col] / m[col][col];
            for k in col..5 {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    det
}

/// Eigen decomposition of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen<const N: usize> {
    /// Sorted descending.
    pub values: [f64; N],
    /// `vectors[i]` is the unit eigenvector of `values[i]`.
    pub vectors: [[f64; N]; N],
}

impl<const N: usize> SymEigen<N> {
    /// Reassembles `V diag(values) V^T`.
    pub fn reconstruct(&self) -> [[f64; N]; N] {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                (0..N)
                    .map(|k| self.values[k] * self.vectors[k][i] * self.vectors[k][j])
                    .sum()
            })
        })
    }
}

/// Symmetric eigensolver by cyclic Jacobi rotations.
///
/// Eigenvalues come out descending; each eigenvector is signed so that its
/// first component with magnitude above 1e-12 is positive.
pub fn sym_eigen<const N: usize>(matrix: &[[f64; N]; N]) -> SymEigen<N> {
    let mut a = *matrix;
    // symmetrize; callers guarantee symmetry to round-off
    for i in 0..N {
        for j in i + 1..N {
            let m = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = m;
            a[j][i] = m;
        }
    }
    let mut v = [[0.0; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for _sweep in 0..64 {
        let off: f64 = (0..N)
            .flat_map(|i| (i + 1..N).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..N).map(|i| a[i][i] * a[i][i]).sum();
        if off == 0.0 || off <= f64::EPSILON * f64::EPSILON * 1e-4 * diag {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order: [usize; N] = std::array::from_fn(|i| i);
    // stable sort keeps degenerate eigenpairs in a deterministic order
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.map(|k| a[k][k]);
    let vectors = order.map(|k| {
        let mut col: [f64; N] = std::array::from_fn(|i| v[i][k]);
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
        }
        col
    });
    SymEigen { values, vectors }
}

/// Gram-Schmidt orthonormalization of `vectors`, optionally completed to an
/// orthonormal basis of R^5.
///
/// Completion vectors are the normalized projections of `seed_complement`
/// onto the remaining orthogonal complement, in order, falling back to the
/// standard basis when the seeds do not span it.
pub fn orthonormalize(
    vectors: &[Vec5],
    seed_complement: Option<&[Vec5]>,
    gram_det_tol: f64,
) -> Result<Vec<Vec5>> {
    if vectors.len() > 5 {
        return Err(Error::Rank { gram_det: 0.0 });
    }
    let mut out: Vec<Vec5> = Vec::with_capacity(5);
    let mut gram_det = 1.0;
    for v in vectors {
        let r = v.reject(&out);
        let n2 = r.dot(&r);
        gram_det *= n2;
        if !(n2 > 0.0) {
            return Err(Error::Rank { gram_det: 0.0 });
        }
        out.push(r * (1.0 / n2.sqrt()));
    }
    if !(gram_det > gram_det_tol) {
        return Err(Error::Rank { gram_det });
    }
    if let Some(seeds) = seed_complement {
        let fallback = (0..5).map(Vec5::basis);
        for s in seeds.iter().copied().chain(fallback) {
            if out.len() == 5 {
                break;
            }
            let r = s.reject(&out);
            let n = r.norm();
            if n > 1e-8 * s.norm().max(1.0) {
                out.push(r * (1.0 / n));
            }
        }
    }
    Ok(out)
}

/// Solves the 3x3 system `m x = b` by Cramer's rule.
pub fn solve3(m: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let det = det3(m);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some(std::array::from_fn(|k| {
        let mut mk = *m;
        for i in 0..3 {
            mk[i][k] = b[i];
        }
        det3(&mk) / det
    }))
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn inverse3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = det3(m);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let c = |i: usize, j: usize| {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
        m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]
    };
    // inverse is the transposed cofactor matrix over det
    Some(std::array::from_fn(|i| std::array::from_fn(|j| c(j, i) / det)))
}
