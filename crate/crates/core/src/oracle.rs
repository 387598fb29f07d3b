//! Exhaustive enumeration of bounded-height elements of SL_n(Z).
//!
//! Every entry ranges over its residue ladder: the integers in
//! `[−cap_i, cap_i]` congruent to the target entry mod `q` (all of them when
//! there is no congruence). The top `n−1` rows are enumerated in full and
//! skipped unless their cofactor vector `c` is primitive. The last row is
//! enumerated except for its final entry, which is solved from
//! `⟨v, c⟩ = 1`; if that cofactor is zero the entry is enumerated instead.
//!
//! Work is split across threads on the first entry's ladder.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::intmat::IntMatrix;

/// Default cap on candidate evaluations.
pub const DEFAULT_BUDGET: u128 = 1_000_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("candidate space of {candidates} exceeds the budget of {budget}")]
    BudgetExceeded { candidates: u128, budget: u128 },
    #[error("invalid enumeration spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, OracleError>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnumSpec {
    pub n: usize,
    /// 0 means no congruence constraint.
    pub q: u64,
    pub target: Option<IntMatrix>,
    /// Max absolute entry, per row.
    pub caps: Vec<u64>,
}

impl EnumSpec {
    /// All of `F_T`.
    pub fn uniform(n: usize, t: u64) -> Self {
        Self {
            n,
            q: 0,
            target: None,
            caps: vec![t; n],
        }
    }

    /// Lifts of `x` modulo `q` with every entry at most `t` in absolute value.
    pub fn lifts(x: &IntMatrix, q: u64, t: u64) -> Self {
        Self {
            n: x.rows(),
            q,
            target: Some(x.clone()),
            caps: vec![t; x.rows()],
        }
    }

    pub fn with_caps(mut self, caps: Vec<u64>) -> Self {
        self.caps = caps;
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(OracleError::InvalidSpec(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.caps.len() != self.n {
            return bad(format!("{} caps for n = {}", self.caps.len(), self.n));
        }
        if self.caps.iter().any(|&c| c > i32::MAX as u64) {
            return bad("cap too large".into());
        }
        if let Some(x) = &self.target {
            if x.rows() != self.n || x.cols() != self.n {
                return bad(format!("target is {}x{}, expected n = {}", x.rows(), x.cols(), self.n));
            }
            if self.q > 0 {
                let det = x.det().expect("square").mod_floor(&BigInt::from(self.q));
                if self.q > 1 && det != BigInt::from(1) {
                    return bad(format!("target has det {det} mod {}", self.q));
                }
            }
        }
        Ok(())
    }
}

struct Plan {
    n: usize,
    q: u64,
    caps: Vec<i64>,
    residues: Vec<i64>,
    ladders: Vec<Vec<i64>>,
}

impl Plan {
    fn new(spec: &EnumSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n;
        let q = if spec.target.is_some() { spec.q } else { 0 };
        let mut residues = vec![0i64; n * n];
        let mut ladders = Vec::with_capacity(n * n);
        for i in 0..n {
            let cap = spec.caps[i] as i64;
            for j in 0..n {
                let ladder: Vec<i64> = if q <= 1 {
                    (-cap..=cap).collect()
                } else {
                    let x = spec.target.as_ref().unwrap().get(i, j);
                    let r = x.mod_floor(&BigInt::from(q)).to_i64().unwrap();
                    residues[i * n + j] = r;
                    let q = q as i64;
                    // least value ≥ −cap in r + qZ
                    let start = -cap + (r + cap).rem_euclid(q);
                    (start..=cap).step_by(q as usize).collect()
                };
                ladders.push(ladder);
            }
        }
        Ok(Self {
            n,
            q,
            caps: spec.caps.iter().map(|&c| c as i64).collect(),
            residues,
            ladders,
        })
    }

    /// Evaluations charged against the budget: all free entries.
    fn candidates(&self) -> u128 {
        let free = self.n * self.n - 1;
        self.ladders[..free]
            .iter()
            .fold(1u128, |acc, l| acc.saturating_mul(l.len() as u128))
    }

    fn run<A, I, V, M>(&self, budget: u128, init: I, visit: V, merge: M) -> Result<A>
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        V: Fn(&mut A, &[i64]) + Sync,
        M: Fn(A, A) -> A + Sync + Send,
    {
        let candidates = self.candidates();
        if candidates > budget {
            return Err(OracleError::BudgetExceeded { candidates, budget });
        }
        let n = self.n;
        if n == 1 {
            let mut acc = init();
            if self.ladders[0].contains(&1) {
                visit(&mut acc, &[1]);
            }
            return Ok(acc);
        }
        Ok(self.ladders[0]
            .par_iter()
            .map(|&v0| {
                let mut acc = init();
                let mut buf = vec![0i64; n * n];
                buf[0] = v0;
                self.walk_top(1, &mut buf, &mut acc, &visit);
                acc
            })
            .reduce(&init, &merge))
    }

    fn walk_top<A, V: Fn(&mut A, &[i64])>(&self, idx: usize, buf: &mut [i64], acc: &mut A, visit: &V) {
        let n = self.n;
        if idx == (n - 1) * n {
            let c = cofactors(&buf[..idx], n);
            if c.iter().fold(0i128, |g, &x| g.gcd(&x)) != 1 {
                return;
            }
            self.walk_last(idx, 0, &c, buf, acc, visit);
            return;
        }
        for &v in &self.ladders[idx] {
            buf[idx] = v;
            self.walk_top(idx + 1, buf, acc, visit);
        }
    }

    fn walk_last<A, V: Fn(&mut A, &[i64])>(
        &self,
        idx: usize,
        partial: i128,
        c: &[i128],
        buf: &mut [i64],
        acc: &mut A,
        visit: &V,
    ) {
        let n = self.n;
        let col = idx - (n - 1) * n;
        if col == n - 1 {
            let cn = c[n - 1];
            let rhs = 1 - partial;
            if cn == 0 {
                if rhs == 0 {
                    for &v in &self.ladders[idx] {
                        buf[idx] = v;
                        visit(acc, buf);
                    }
                }
                return;
            }
            if rhs % cn != 0 {
                return;
            }
            let v = rhs / cn;
            if v.abs() > self.caps[n - 1] as i128 {
                return;
            }
            let v = v as i64;
            if self.q > 1 && (v - self.residues[idx]).rem_euclid(self.q as i64) != 0 {
                return;
            }
            buf[idx] = v;
            visit(acc, buf);
            return;
        }
        for &v in &self.ladders[idx] {
            buf[idx] = v;
            self.walk_last(idx + 1, partial + c[col] * v as i128, c, buf, acc, visit);
        }
    }
}

/// `c_i = (−1)^{n+i} det(B without column i)` for the `(n−1)×n` matrix in
/// `top` (row-major), 1-based `i`.
fn cofactors(top: &[i64], n: usize) -> Vec<i128> {
    let k = n - 1;
    (0..n)
        .map(|skip| {
            let sub: Vec<i128> = (0..k)
                .flat_map(|r| (0..n).filter(move |&j| j != skip).map(move |j| (r, j)))
                .map(|(r, j)| top[r * n + j] as i128)
                .collect();
            let d = small_det(&sub, k);
            if (n + skip + 1).is_multiple_of(2) {
                d
            } else {
                -d
            }
        })
        .collect()
}

fn small_det(m: &[i128], k: usize) -> i128 {
    match k {
        0 => 1,
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => {
            let mut total = 0i128;
            for j in 0..k {
                if m[j] == 0 {
                    continue;
                }
                let minor: Vec<i128> = (1..k)
                    .flat_map(|r| (0..k).filter(move |&c| c != j).map(move |c| (r, c)))
                    .map(|(r, c)| m[r * k + c])
                    .collect();
                let term = m[j] * small_det(&minor, k - 1);
                total += if j % 2 == 0 { term } else { -term };
            }
            total
        }
    }
}

fn max_abs(v: &[i64]) -> u64 {
    v.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0)
}

/// Calls `visit` on every matrix matched by `spec`, folding per worker and
/// merging with `merge`. `merge` must be associative and commutative for
/// the result to be independent of scheduling.
pub fn fold_lifts<A, I, V, M>(spec: &EnumSpec, budget: u128, init: I, visit: V, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    V: Fn(&mut A, &[i64]) + Sync,
    M: Fn(A, A) -> A + Sync + Send,
{
    Plan::new(spec)?.run(budget, init, visit, merge)
}

/// Size of the candidate space for `spec` (product of free ladder lengths).
pub fn candidate_space(spec: &EnumSpec) -> Result<u128> {
    Ok(Plan::new(spec)?.candidates())
}

/// Exact number of matrices matched by `spec`.
pub fn count_sl(spec: &EnumSpec, budget: u128) -> Result<u64> {
    fold_lifts(spec, budget, || 0u64, |acc, _| *acc += 1, |a, b| a + b)
}

/// Every matrix matched by `spec` in row-major form, sorted.
pub fn collect_lifts(spec: &EnumSpec, budget: u128) -> Result<Vec<Vec<i64>>> {
    let mut all = fold_lifts(
        spec,
        budget,
        Vec::new,
        |acc: &mut Vec<Vec<i64>>, m| acc.push(m.to_vec()),
        |mut a, mut b| {
            a.append(&mut b);
            a
        },
    )?;
    all.sort_unstable();
    Ok(all)
}

/// The least-norm matrix matched by `spec`; ties go to the lexicographically
/// smallest entry vector.
pub fn min_norm_in(spec: &EnumSpec, budget: u128) -> Result<Option<(u64, Vec<i64>)>> {
    fold_lifts(
        spec,
        budget,
        || None,
        |acc: &mut Option<(u64, Vec<i64>)>, m| {
            let cand = (max_abs(m), m);
            if acc.as_ref().is_none_or(|(nb, wb)| (cand.0, cand.1) < (*nb, wb.as_slice())) {
                *acc = Some((cand.0, cand.1.to_vec()));
            }
        },
        |a, b| match (a, b) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, None) => a,
            (None, b) => b,
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MinNorm {
    Found { norm: u64, witness: IntMatrix },
    Unbounded { t_max: u64 },
}

impl MinNorm {
    pub fn norm(&self) -> Option<u64> {
        match self {
            MinNorm::Found { norm, .. } => Some(*norm),
            MinNorm::Unbounded { .. } => None,
        }
    }
}

/// Least max-norm of `γ ∈ SL_n(Z)` with `γ ≡ x (mod q)`, searched up to
/// `t_max`.
///
/// The cap starts at the smallest value every entry can reach and doubles;
/// the first cap with any solution gives the exact minimum.
pub fn min_lift_norm(x: &IntMatrix, q: u64, t_max: u64, budget: u128) -> Result<MinNorm> {
    if q == 0 {
        return Err(OracleError::InvalidSpec("q must be positive".into()));
    }
    let qb = BigInt::from(q);
    let floor = x
        .entries()
        .iter()
        .map(|e| {
            let r = e.mod_floor(&qb).to_u64().unwrap();
            r.min(q - r)
        })
        .max()
        .unwrap_or(0)
        .max(1);
    let mut t = floor.min(t_max);
    loop {
        if let Some((norm, w)) = min_norm_in(&EnumSpec::lifts(x, q, t), budget)? {
            let n = x.rows();
            return Ok(MinNorm::Found {
                norm,
                witness: IntMatrix::from_i64(n, n, &w),
            });
        }
        if t >= t_max {
            return Ok(MinNorm::Unbounded { t_max });
        }
        t = t.saturating_mul(2).min(t_max);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DrsRow {
    pub t: u64,
    pub count: u64,
    /// `count / T^{n²−n}`; absent at `T = 0`.
    pub ratio: Option<f64>,
}

/// `|F_T|` for each `T` in `ts` from one pass at the largest `T`,
/// histogramming by max-norm.
pub fn drs_table(n: usize, ts: &[u64], budget: u128) -> Result<Vec<DrsRow>> {
    let Some(&t_max) = ts.iter().max() else {
        return Ok(Vec::new());
    };
    let len = t_max as usize + 1;
    let hist = fold_lifts(
        &EnumSpec::uniform(n, t_max),
        budget,
        || vec![0u64; len],
        |h: &mut Vec<u64>, m| h[max_abs(m) as usize] += 1,
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    )?;
    let mut cumulative = vec![0u64; len];
    let mut running = 0;
    for (c, h) in cumulative.iter_mut().zip(&hist) {
        running += h;
        *c = running;
    }
    let exp = (n * n - n) as i32;
    Ok(ts
        .iter()
        .map(|&t| DrsRow {
            t,
            count: cumulative[t as usize],
            ratio: (t > 0).then(|| cumulative[t as usize] as f64 / (t as f64).powi(exp)),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkewedRow {
    pub t: u64,
    pub count: u64,
    /// `count / (T³ log₂(T+1))`.
    pub normalized: f64,
}

/// Elements of SL_2(Z) with first row at most `T` and second row at most
/// `T²`, for each `T` in `ts`.
pub fn skewed_counts(ts: &[u64], budget: u128) -> Result<Vec<SkewedRow>> {
    ts.iter()
        .map(|&t| {
            let count = count_sl(&EnumSpec::uniform(2, t).with_caps(vec![t, t * t]), budget)?;
            let denom = (t as f64).powi(3) * ((t + 1) as f64).log2();
            Ok(SkewedRow {
                t,
                count,
                normalized: if t == 0 { 0.0 } else { count as f64 / denom },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intmat::adjugate_mod;
    use proptest::prelude::*;

    const B: u128 = DEFAULT_BUDGET;

    fn naive_count(n: usize, caps: &[i64], q: u64, x: Option<&[i64]>) -> u64 {
        let total = n * n;
        let mut buf = vec![0i64; total];
        let mut count = 0;
        fn rec(idx: usize, n: usize, caps: &[i64], q: u64, x: Option<&[i64]>, buf: &mut Vec<i64>, count: &mut u64) {
            if idx == n * n {
                let m = IntMatrix::from_i64(n, n, buf);
                if m.det().unwrap() == BigInt::from(1) {
                    *count += 1;
                }
                return;
            }
            let cap = caps[idx / n];
            for v in -cap..=cap {
                if let Some(x) = x {
                    if q > 1 && (v - x[idx]).rem_euclid(q as i64) != 0 {
                        continue;
                    }
                }
                buf[idx] = v;
                rec(idx + 1, n, caps, q, x, buf, count);
            }
        }
        rec(0, n, caps, q, x, &mut buf, &mut count);
        count
    }

    #[test]
    fn f1_has_twenty() {
        assert_eq!(count_sl(&EnumSpec::uniform(2, 1), B).unwrap(), 20);
        assert_eq!(count_sl(&EnumSpec::uniform(2, 2), B).unwrap(), 52);
    }

    #[test]
    fn congruence_filter_mod_2() {
        let spec = EnumSpec::lifts(&IntMatrix::identity(2), 2, 1);
        assert_eq!(count_sl(&spec, B).unwrap(), 2);
    }

    #[test]
    fn zero_caps_admit_nothing() {
        for n in 1..=3 {
            assert_eq!(count_sl(&EnumSpec::uniform(n, 0), B).unwrap(), 0);
        }
    }

    #[test]
    fn n1_is_trivial() {
        assert_eq!(count_sl(&EnumSpec::uniform(1, 5), B).unwrap(), 1);
    }

    #[test]
    fn matches_naive_scan() {
        for (n, caps) in [(2usize, vec![2i64, 2]), (2, vec![1, 3]), (3, vec![1, 1, 1])] {
            let spec = EnumSpec::uniform(n, 0).with_caps(caps.iter().map(|&c| c as u64).collect());
            assert_eq!(count_sl(&spec, B).unwrap(), naive_count(n, &caps, 0, None));
        }
        let x = [3i64, 1, 2, 1];
        let spec = EnumSpec::lifts(&IntMatrix::from_i64(2, 2, &x), 5, 6);
        assert_eq!(count_sl(&spec, B).unwrap(), naive_count(2, &[6, 6], 5, Some(&x)));
    }

    #[test]
    fn min_lift_examples() {
        let cases: [(u64, [i64; 4], u64); 3] = [
            (8, [5, 0, 0, 5], 13),
            (4, [0, 3, 1, 0], 1),
            (7, [1, 0, 0, 1], 1),
        ];
        for (q, x, expected) in cases {
            let x = IntMatrix::from_i64(2, 2, &x);
            let r = min_lift_norm(&x, q, 64, B).unwrap();
            let MinNorm::Found { norm, witness } = r else {
                panic!("unbounded for q = {q}");
            };
            assert_eq!(norm, expected);
            assert!(witness.det().unwrap() == BigInt::from(1));
            assert!(witness.congruent(&x, q));
            assert_eq!(witness.max_norm(), BigInt::from(norm));
        }
    }

    #[test]
    fn min_lift_reports_unbounded() {
        let x = IntMatrix::from_i64(2, 2, &[5, 0, 0, 5]);
        assert_eq!(
            min_lift_norm(&x, 8, 12, B).unwrap(),
            MinNorm::Unbounded { t_max: 12 }
        );
    }

    #[test]
    fn budget_is_enforced() {
        let err = count_sl(&EnumSpec::uniform(3, 10), 1000).unwrap_err();
        assert!(matches!(err, OracleError::BudgetExceeded { budget: 1000, .. }));
    }

    #[test]
    fn drs_rows() {
        let rows = drs_table(2, &[0, 1, 2], B).unwrap();
        assert_eq!(rows[0], DrsRow { t: 0, count: 0, ratio: None });
        assert_eq!(rows[1], DrsRow { t: 1, count: 20, ratio: Some(20.0) });
        assert_eq!(rows[2], DrsRow { t: 2, count: 52, ratio: Some(13.0) });
        let direct: Vec<u64> = (1..=6)
            .map(|t| count_sl(&EnumSpec::uniform(2, t), B).unwrap())
            .collect();
        let table: Vec<u64> = drs_table(2, &[1, 2, 3, 4, 5, 6], B)
            .unwrap()
            .iter()
            .map(|r| r.count)
            .collect();
        assert_eq!(direct, table);
    }

    #[test]
    fn skewed_matches_naive() {
        for t in 1..=3u64 {
            let row = &skewed_counts(&[t], B).unwrap()[0];
            let t = t as i64;
            assert_eq!(row.count, naive_count(2, &[t, t * t], 0, None));
        }
    }

    #[test]
    fn cofactor_convention() {
        // det(stack(B, v)) = ⟨v, c⟩
        assert_eq!(cofactors(&[3, 5], 2), vec![-5, 3]);
        assert_eq!(cofactors(&[1, 0, 0, 0, 1, 0], 3), vec![0, 0, 1]);
    }

    fn transpose_inverse_mod(x: &IntMatrix, q: u64) -> IntMatrix {
        adjugate_mod(x, q).unwrap().transpose().reduce_mod(q)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn transpose_inverse_symmetry(seed in any::<u64>(), qi in 0usize..3, t in 3u64..10) {
            use rand::SeedableRng;
            let q = [3u64, 4, 6][qi];
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = crate::lifting::random_sl(&mut rng, 2, q);
            let y = transpose_inverse_mod(&x, q);
            let a = count_sl(&EnumSpec::lifts(&x, q, t), B).unwrap();
            let b = count_sl(&EnumSpec::lifts(&y, q, t), B).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn min_norm_is_monotone(seed in any::<u64>(), q in 2u64..7) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = crate::lifting::random_sl(&mut rng, 2, q);
            let big = min_lift_norm(&x, q, 64, B).unwrap();
            let norm = big.norm().unwrap();
            prop_assert_eq!(min_lift_norm(&x, q, norm, B).unwrap().norm(), Some(norm));
            if norm > 1 {
                prop_assert_eq!(
                    min_lift_norm(&x, q, norm - 1, B).unwrap(),
                    MinNorm::Unbounded { t_max: norm - 1 }
                );
            }
        }
    }
}
