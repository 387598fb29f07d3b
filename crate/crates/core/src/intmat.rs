//! Dense exact-integer matrices and the mod-q linear algebra the lifting
//! pipeline needs.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::residue::Residue;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IntMatError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("determinant is {det_mod_q} mod {q}, expected 1")]
    NotInvertible { det_mod_q: BigInt, q: u64 },
    #[error("expected shape {expected}, got {rows}x{cols}")]
    BadShape {
        expected: String,
        rows: usize,
        cols: usize,
    },
    #[error("rows are linearly dependent (singular Gram matrix)")]
    DependentRows,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, IntMatError>;

/// Row-major matrix of arbitrary-precision integers.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<BigInt>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(IntMatError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Panics on ragged or empty input.
    pub fn from_rows<T: Into<BigInt> + Copy>(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flatten().map(|&x| x.into()).collect();
        Self::new(rows.len(), cols, data).expect("non-empty matrix")
    }

    pub fn from_i64(rows: usize, cols: usize, data: &[i64]) -> Self {
        Self::new(rows, cols, data.iter().map(|&x| BigInt::from(x)).collect())
            .expect("shape matches data")
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[BigInt] {
        &self.data
    }

    pub fn row_vecs(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j).clone();
            }
        }
        t
    }

    pub fn mul(&self, rhs: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != rhs.rows {
            return Err(IntMatError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Appends `v` as a new last row.
    pub fn stack_row(&self, v: &[BigInt]) -> Result<IntMatrix> {
        if v.len() != self.cols {
            return Err(IntMatError::DimensionMismatch(format!(
                "row of length {} onto {} columns",
                v.len(),
                self.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(v);
        IntMatrix::new(self.rows + 1, self.cols, data)
    }

    /// The first `k` rows.
    pub fn top_rows(&self, k: usize) -> IntMatrix {
        assert!(k >= 1 && k <= self.rows);
        IntMatrix {
            rows: k,
            cols: self.cols,
            data: self.data[..k * self.cols].to_vec(),
        }
    }

    pub fn remove_col(&self, col: usize) -> IntMatrix {
        let data = (0..self.rows)
            .flat_map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(move |&(j, _)| j != col)
                    .map(|(_, x)| x.clone())
            })
            .collect();
        IntMatrix {
            rows: self.rows,
            cols: self.cols - 1,
            data,
        }
    }

    /// Deletes row `i` and column `j`.
    pub fn minor(&self, i: usize, j: usize) -> IntMatrix {
        let mut data = Vec::with_capacity((self.rows - 1) * (self.cols - 1));
        for r in (0..self.rows).filter(|&r| r != i) {
            for c in (0..self.cols).filter(|&c| c != j) {
                data.push(self.get(r, c).clone());
            }
        }
        IntMatrix {
            rows: self.rows - 1,
            cols: self.cols - 1,
            data,
        }
    }

    /// Entrywise canonical representatives in `[0, q)`.
    pub fn reduce_mod(&self, q: u64) -> IntMatrix {
        let q = BigInt::from(q);
        IntMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.mod_floor(&q)).collect(),
        }
    }

    /// Entrywise signed lifts (least absolute value, `+q/2` on ties).
    pub fn signed_mod(&self, q: u64) -> IntMatrix {
        IntMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| signed_lift_big(x, q)).collect(),
        }
    }

    /// Whether `self ≡ other mod q` entrywise.
    pub fn congruent(&self, other: &IntMatrix, q: u64) -> bool {
        let q = BigInt::from(q);
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| (a - b).mod_floor(&q).is_zero())
    }

    /// Maximum absolute entry.
    pub fn max_norm(&self) -> BigInt {
        max_abs(&self.data)
    }

    pub fn norm_report(&self) -> NormReport {
        NormReport {
            max_norm: self.max_norm(),
            op_norm_estimate: self.spectral_norm_estimate(),
        }
    }

    /// Largest singular value by power iteration on `MᵀM`, in `f64`.
    /// Informational only.
    pub fn spectral_norm_estimate(&self) -> f64 {
        let a: Vec<f64> = self
            .data
            .iter()
            .map(|x| x.to_f64().unwrap_or(f64::INFINITY))
            .collect();
        let (r, c) = (self.rows, self.cols);
        if a.iter().all(|&x| x == 0.0) {
            return 0.0;
        }
        // deterministic start vector away from any special subspace
        let mut v: Vec<f64> = (0..c).map(|j| 1.0 + 0.1 * (j as f64 + 1.0).sqrt()).collect();
        let mut sigma = 0.0f64;
        for _ in 0..10_000 {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            let av: Vec<f64> = (0..r)
                .map(|i| (0..c).map(|j| a[i * c + j] * v[j]).sum())
                .collect();
            let next_sigma = av.iter().map(|x| x * x).sum::<f64>().sqrt();
            let atav: Vec<f64> = (0..c)
                .map(|j| (0..r).map(|i| a[i * c + j] * av[i]).sum())
                .collect();
            let converged = (next_sigma - sigma).abs() <= 1e-13 * next_sigma;
            sigma = next_sigma;
            if converged || atav.iter().all(|&x| x == 0.0) {
                break;
            }
            v = atav;
        }
        sigma
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> Result<BigInt> {
        if !self.is_square() {
            return Err(IntMatError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(bareiss_det(self.data.clone(), self.rows))
    }

    /// Integer adjugate: `M · adj(M) = det(M) · I`.
    pub fn adjugate(&self) -> Result<IntMatrix> {
        if !self.is_square() {
            return Err(IntMatError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        if n == 1 {
            return Ok(IntMatrix::identity(1));
        }
        let mut adj = IntMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let cof = self.minor(i, j).det()?;
                let signed = if (i + j) % 2 == 0 { cof } else { -cof };
                adj.set(j, i, signed);
            }
        }
        Ok(adj)
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Wire format: rows separated by `;`, entries by `,`.
impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            if i > 0 {
                f.write_str(";")?;
            }
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{x}")?;
            }
        }
        Ok(())
    }
}

/// Serialized as nested arrays of decimal strings.
impl Serialize for IntMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = (0..self.rows)
            .map(|i| self.row(i).iter().map(ToString::to_string).collect())
            .collect();
        rows.serialize(serializer)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormReport {
    #[serde(serialize_with = "crate::serialize_bigint")]
    pub max_norm: BigInt,
    pub op_norm_estimate: f64,
}

pub fn max_abs(v: &[BigInt]) -> BigInt {
    v.iter().map(|x| x.abs()).max().unwrap_or_default()
}

pub fn signed_lift_big(x: &BigInt, q: u64) -> BigInt {
    let qb = BigInt::from(q);
    let r = x.mod_floor(&qb);
    if &r * 2 > qb {
        r - qb
    } else {
        r
    }
}

pub fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn bareiss_det(mut a: Vec<BigInt>, n: usize) -> BigInt {
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k * n + k].is_zero() {
            let Some(swap) = (k + 1..n).find(|&r| !a[r * n + k].is_zero()) else {
                return BigInt::zero();
            };
            for j in 0..n {
                a.swap(k * n + j, swap * n + j);
            }
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i * n + j] * &a[k * n + k] - &a[i * n + k] * &a[k * n + j];
                a[i * n + j] = v / &prev;
            }
        }
        prev = a[k * n + k].clone();
    }
    sign * &a[n * n - 1]
}

/// Inverse of `m` modulo `q`, as its adjugate reduced into `[0, q)`.
/// Requires `det(m) ≡ 1 mod q`.
pub fn adjugate_mod(m: &IntMatrix, q: u64) -> Result<IntMatrix> {
    let det = m.det()?;
    let det_mod_q = det.mod_floor(&BigInt::from(q));
    if !(det_mod_q.is_one() || q == 1) {
        return Err(IntMatError::NotInvertible { det_mod_q, q });
    }
    Ok(m.adjugate()?.reduce_mod(q))
}

/// Signed cofactor vector `c` of an `(n−1)×n` matrix, so that
/// `det(stack(b, v)) = ⟨v, c⟩` for every row vector `v`.
pub fn maximal_minors(b: &IntMatrix) -> Result<Vec<BigInt>> {
    let n = b.cols();
    if b.rows() + 1 != n {
        return Err(IntMatError::BadShape {
            expected: format!("{}x{n}", n.saturating_sub(1)),
            rows: b.rows(),
            cols: n,
        });
    }
    (0..n)
        .map(|i| {
            let d = b.remove_col(i).det()?;
            // (−1)^{n+i} with 1-based indices
            Ok(if (n + i + 1).is_multiple_of(2) { d } else { -d })
        })
        .collect()
}

/// Coefficients `α` with `Σ α_i · row_i(a) ≡ w mod q`, i.e. `α = w · a⁻¹`.
pub fn solve_mod(a: &IntMatrix, w: &[BigInt], q: u64) -> Result<Vec<Residue>> {
    if w.len() != a.rows() {
        return Err(IntMatError::DimensionMismatch(format!(
            "vector of length {} against {} rows",
            w.len(),
            a.rows()
        )));
    }
    let inv = adjugate_mod(a, q)?;
    let qb = BigInt::from(q);
    Ok((0..a.cols())
        .map(|j| {
            let s: BigInt = (0..a.rows()).map(|i| &w[i] * inv.get(i, j)).sum();
            let v = s.mod_floor(&qb).to_u64().expect("reduced below q");
            Residue::from_u64(v, q)
        })
        .collect())
}

/// Subtracts from `v` the nearest-integer rounding of its orthogonal
/// projection coefficients onto the row space of `b`.
///
/// The coefficients solve `G α = b vᵀ` with `G = b bᵀ`, in exact rationals.
/// Rounding is to the nearest integer, halves upward.
pub fn size_reduce(v: &[BigInt], b: &IntMatrix) -> Result<Vec<BigInt>> {
    if v.len() != b.cols() {
        return Err(IntMatError::DimensionMismatch(format!(
            "vector of length {} against {} columns",
            v.len(),
            b.cols()
        )));
    }
    let k = b.rows();
    let gram = b.mul(&b.transpose())?;
    let rhs: Vec<BigInt> = (0..k).map(|i| dot(b.row(i), v)).collect();
    let alpha = solve_rational(&gram, &rhs).ok_or(IntMatError::DependentRows)?;
    let mut out = v.to_vec();
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    for (i, a) in alpha.iter().enumerate() {
        let rounded = (a + &half).floor().to_integer();
        if rounded.is_zero() {
            continue;
        }
        for (o, x) in out.iter_mut().zip(b.row(i)) {
            *o -= &rounded * x;
        }
    }
    Ok(out)
}

/// Gauss–Jordan over Q; `None` when singular.
fn solve_rational(m: &IntMatrix, rhs: &[BigInt]) -> Option<Vec<BigRational>> {
    let n = m.rows();
    let mut a: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            let mut row: Vec<BigRational> = m
                .row(i)
                .iter()
                .map(|x| BigRational::from_integer(x.clone()))
                .collect();
            row.push(BigRational::from_integer(rhs[i].clone()));
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let p = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x /= &p;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in col..=n {
                    let delta = &f * &a[col][c];
                    a[r][c] -= delta;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n].clone()).collect())
}
