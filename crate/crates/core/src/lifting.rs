//! Constructive lift of `x ∈ SL_n(Z/qZ)` to `γ ∈ SL_n(Z)`.
//!
//! Three stages:
//!
//! 1. [`lift_rows`]: perturb the signed lift of the top `n−1` rows by `qX`
//!    with `X` of size `O(log q)` until the rows are primitive (extendable).
//! 2. [`complete_rows`]: find an integral last row with determinant 1 and
//!    size-reduce it against the top rows, giving entries `≤ (n/2)T + 1`.
//! 3. Correct that last row modulo `q` by adding a combination of the top
//!    rows with coefficients of absolute value `≤ q/2`.
//!
//! The result has top rows `O(q log q)` and last row `O(q² log q)`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::intmat::{self, maximal_minors, signed_lift_big, size_reduce, solve_mod, IntMatError, IntMatrix};
use crate::residue::{crt, gcd, inv_mod, is_prime, Residue};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftError {
    #[error("rows are not extendable to SL_n(Z/{q}Z): gcd of maximal minors with q is {gcd}")]
    NotExtendableModQ { q: u64, gcd: BigInt },
    #[error("row search exhausted after {trials} trials for q = {q}")]
    SearchExhausted { q: u64, trials: u64 },
    #[error("rows are not primitive: gcd of maximal minors is {0}")]
    NotExtendable(BigInt),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Matrix(#[from] IntMatError),
}

pub type Result<T> = std::result::Result<T, LiftError>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiftConfig {
    /// The constant `C` in the perturbation bound `C · log₂(q + 2)`.
    pub c: f64,
    /// Random perturbations tried at each doubling level.
    pub trials_per_level: u64,
    /// Escalating prime cutoffs `K` for the deterministic fallback; the
    /// product of primes below the largest must fit in a `u64`.
    pub fallback_k: Vec<u64>,
    /// Second-stage perturbations tried per cutoff.
    pub fallback_trials: u64,
}

impl Default for LiftConfig {
    fn default() -> Self {
        Self {
            c: 16.0,
            trials_per_level: 32,
            fallback_k: vec![8, 16, 32, 48],
            fallback_trials: 4096,
        }
    }
}

impl LiftConfig {
    /// `⌊C · log₂(q + 2)⌋`, at least 1.
    pub fn perturbation_bound(&self, q: u64) -> u64 {
        ((self.c * ((q as f64) + 2.0).log2()).floor() as u64).max(1)
    }
}

/// A verified lift together with the per-row sizes it achieves.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiftCertificate {
    pub gamma: IntMatrix,
    pub q: u64,
    pub n: usize,
    #[serde(serialize_with = "crate::serialize_bigint")]
    pub first_rows_max: BigInt,
    #[serde(serialize_with = "crate::serialize_bigint")]
    pub last_row_max: BigInt,
    pub trials_used: u64,
    pub used_fallback: bool,
    pub seed: u64,
}

/// Top rows `b = a₀ + qX` found by [`lift_rows`].
#[derive(Clone, Debug, PartialEq)]
pub struct RowLift {
    pub rows: IntMatrix,
    pub perturbation: IntMatrix,
    pub trials: u64,
    pub used_fallback: bool,
}

fn gcd_all(v: &[BigInt]) -> BigInt {
    v.iter().fold(BigInt::zero(), |g, x| g.gcd(x))
}

/// Whether `b` (of shape `(n−1)×n`) is the top of some `SL_n(Z)` matrix,
/// i.e. its maximal minors are coprime.
pub fn is_extendable(b: &IntMatrix) -> bool {
    maximal_minors(b).is_ok_and(|c| gcd_all(&c).is_one())
}

/// Lifts the `(n−1)×n` rows `a` (entries mod `q`) to integer rows that
/// extend to `SL_n(Z)`.
///
/// Tries `X = 0`, then `X` uniform in `[0, M)` with `M` doubling from 2 up to
/// the configured bound. If that fails, falls back to forcing the rows to the
/// top of the identity modulo every prime `p < K` not dividing `q` (one CRT
/// per entry) and searching `a₀ + qX¹ + PqX²` with `X²` in the same bound.
pub fn lift_rows(a: &IntMatrix, q: u64, seed: u64, config: &LiftConfig) -> Result<RowLift> {
    let (k, n) = (a.rows(), a.cols());
    if k + 1 != n {
        return Err(IntMatError::BadShape {
            expected: format!("{}x{n}", n - 1),
            rows: k,
            cols: n,
        }
        .into());
    }
    let a0 = a.signed_mod(q);
    let qb = BigInt::from(q);
    let minor_gcd = gcd_all(&maximal_minors(&a0)?).gcd(&qb);
    if !minor_gcd.is_one() {
        return Err(LiftError::NotExtendableModQ { q, gcd: minor_gcd });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = config.perturbation_bound(q);
    let mut trials = 0u64;
    let attempt = |x: &[u64], base: &IntMatrix, step: &BigInt| -> IntMatrix {
        let data = base
            .entries()
            .iter()
            .zip(x)
            .map(|(b, &xi)| b + step * BigInt::from(xi))
            .collect();
        IntMatrix::new(k, n, data).expect("same shape")
    };

    let mut levels = Vec::new();
    let mut m = 1u64;
    while m < bound {
        m = (m * 2).min(bound);
        levels.push(m);
    }
    trials += 1;
    if is_extendable(&a0) {
        return Ok(RowLift {
            rows: a0,
            perturbation: IntMatrix::zeros(k, n),
            trials,
            used_fallback: false,
        });
    }
    for &m in &levels {
        for _ in 0..config.trials_per_level {
            let x: Vec<u64> = (0..k * n).map(|_| rng.gen_range(0..m)).collect();
            trials += 1;
            let b = attempt(&x, &a0, &qb);
            if is_extendable(&b) {
                return Ok(RowLift {
                    rows: b,
                    perturbation: IntMatrix::from_i64(
                        k,
                        n,
                        &x.iter().map(|&v| v as i64).collect::<Vec<_>>(),
                    ),
                    trials,
                    used_fallback: false,
                });
            }
        }
    }

    for &cutoff in &config.fallback_k {
        let primes: Vec<u64> = (2..cutoff).filter(|&p| is_prime(p) && !q.is_multiple_of(p)).collect();
        let modulus: u64 = primes.iter().product();
        // X¹ entry by entry: a₀ + qX¹ ≡ δ_ij mod p for every p.
        let mut x1 = Vec::with_capacity(k * n);
        for i in 0..k {
            for j in 0..n {
                let target = i64::from(i == j);
                let cong: Vec<(u64, u64)> = primes
                    .iter()
                    .map(|&p| {
                        let a = a0.get(i, j).mod_floor(&BigInt::from(p)).to_u64().unwrap();
                        let want = (target as u64 + p - a) % p;
                        let inv = inv_mod(q % p, p).expect("p does not divide q");
                        (want * inv % p, p)
                    })
                    .collect();
                x1.push(crt(&cong).expect("distinct primes").value());
            }
        }
        let base = attempt(&x1, &a0, &qb);
        let step = &qb * BigInt::from(modulus);
        for _ in 0..config.fallback_trials {
            let x2: Vec<u64> = (0..k * n).map(|_| rng.gen_range(0..=bound)).collect();
            trials += 1;
            let b = attempt(&x2, &base, &step);
            if is_extendable(&b) {
                let x: Vec<BigInt> = x1
                    .iter()
                    .zip(&x2)
                    .map(|(&u, &v)| BigInt::from(u) + BigInt::from(modulus) * BigInt::from(v))
                    .collect();
                return Ok(RowLift {
                    rows: b,
                    perturbation: IntMatrix::new(k, n, x)?,
                    trials,
                    used_fallback: true,
                });
            }
        }
    }
    Err(LiftError::SearchExhausted { q, trials })
}

/// A last row `v` with `det(stack(b, v)) = 1` and
/// `max|v_i| ≤ (n/2)·max|b_ij| + 1`.
pub fn complete_rows(b: &IntMatrix) -> Result<Vec<BigInt>> {
    let c = maximal_minors(b)?;
    let n = c.len();
    // iterated extended gcd: ⟨v₀, c⟩ = g
    let mut g = BigInt::zero();
    let mut v0 = vec![BigInt::zero(); n];
    for (i, ci) in c.iter().enumerate() {
        let e = g.extended_gcd(ci);
        for x in v0[..i].iter_mut() {
            *x *= &e.x;
        }
        v0[i] = e.y;
        g = e.gcd;
    }
    if g.is_negative() {
        g = -g;
        v0.iter_mut().for_each(|x| *x = -x.clone());
    }
    if !g.is_one() {
        return Err(LiftError::NotExtendable(g));
    }
    let v = size_reduce(&v0, b)?;
    debug_assert!(intmat::dot(&v, &c).is_one());
    Ok(v)
}

/// Lifts `x ∈ SL_n(Z/qZ)` to `SL_n(Z)`. Deterministic in `(x, q, seed)`.
pub fn lift(x: &IntMatrix, q: u64, seed: u64, config: &LiftConfig) -> Result<LiftCertificate> {
    if !x.is_square() {
        return Err(IntMatError::NotSquare {
            rows: x.rows(),
            cols: x.cols(),
        }
        .into());
    }
    if q == 0 {
        return Err(LiftError::InvalidInput("modulus must be positive".into()));
    }
    let n = x.rows();
    let qb = BigInt::from(q);
    let det = x.det()?.mod_floor(&qb);
    if !(det.is_one() || q == 1) {
        return Err(LiftError::InvalidInput(format!(
            "det(x) ≡ {det} mod {q}, expected 1"
        )));
    }
    if q == 1 || n == 1 {
        return Ok(certificate(IntMatrix::identity(n), q, 1, false, seed));
    }
    let xr = x.reduce_mod(q);
    let top = lift_rows(&xr.top_rows(n - 1), q, seed, config)?;
    let b = top.rows;
    let v = complete_rows(&b)?;

    let w: Vec<BigInt> = xr.row(n - 1).iter().zip(&v).map(|(a, vi)| a - vi).collect();
    // rows of b agree with xr mod q, so solving against xr is the same system
    let alpha = solve_mod(&xr, &w, q)?;
    if alpha[n - 1].value() != 0 {
        return Err(LiftError::Inconsistent(format!(
            "last coefficient {} is nonzero",
            alpha[n - 1]
        )));
    }
    let mut last = v;
    for (i, a) in alpha[..n - 1].iter().enumerate() {
        let coeff = BigInt::from(a.signed_lift());
        for (l, bij) in last.iter_mut().zip(b.row(i)) {
            *l += &coeff * bij;
        }
    }
    let gamma = b.stack_row(&last)?;
    if !gamma.det()?.is_one() || !gamma.congruent(&xr, q) {
        return Err(LiftError::Inconsistent("lift failed verification".into()));
    }
    Ok(certificate(gamma, q, top.trials, top.used_fallback, seed))
}

fn certificate(gamma: IntMatrix, q: u64, trials: u64, fallback: bool, seed: u64) -> LiftCertificate {
    let n = gamma.rows();
    let first_rows_max = if n > 1 {
        gamma.top_rows(n - 1).max_norm()
    } else {
        BigInt::zero()
    };
    let last_row_max = intmat::max_abs(gamma.row(n - 1));
    LiftCertificate {
        gamma,
        q,
        n,
        first_rows_max,
        last_row_max,
        trials_used: trials,
        used_fallback: fallback,
        seed,
    }
}

/// Uniform element of `SL_n(Z/qZ)`, entries in `[0, q)`.
///
/// Draws uniform matrices until the determinant is a unit, then scales the
/// first row by its inverse.
pub fn random_sl<R: Rng>(rng: &mut R, n: usize, q: u64) -> IntMatrix {
    if q == 1 {
        return IntMatrix::zeros(n, n);
    }
    let qb = BigInt::from(q);
    loop {
        let data: Vec<BigInt> = (0..n * n).map(|_| BigInt::from(rng.gen_range(0..q))).collect();
        let mut m = IntMatrix::new(n, n, data).expect("n ≥ 1");
        let det = m.det().expect("square").mod_floor(&qb).to_u64().unwrap();
        if gcd(det, q) != 1 {
            continue;
        }
        let inv = BigInt::from(Residue::from_u64(det, q).inverse().unwrap().value());
        for j in 0..n {
            let v = (m.get(0, j) * &inv).mod_floor(&qb);
            m.set(0, j, v);
        }
        return m;
    }
}

/// Signed lift of a whole vector, used when reporting coefficients.
pub fn signed_vector(v: &[BigInt], q: u64) -> Vec<BigInt> {
    v.iter().map(|x| signed_lift_big(x, q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn big(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn extendable_examples() {
        assert!(is_extendable(&IntMatrix::from_i64(2, 3, &[1, 0, 0, 0, 1, 0])));
        assert!(!is_extendable(&IntMatrix::from_i64(1, 2, &[2, 4])));
        assert!(is_extendable(&IntMatrix::from_i64(1, 2, &[3, 5])));
        assert!(!is_extendable(&IntMatrix::identity(3)));
    }

    #[test]
    fn lift_rows_identity_top_needs_no_perturbation() {
        for q in [2u64, 7, 1024] {
            let a = IntMatrix::identity(4).top_rows(3);
            let r = lift_rows(&a, q, 0, &LiftConfig::default()).unwrap();
            assert_eq!(r.rows, a);
            assert_eq!(r.perturbation, IntMatrix::zeros(3, 4));
        }
    }

    #[test]
    fn lift_rows_coprime_pair_mod_5() {
        let a = IntMatrix::from_i64(1, 2, &[2, 4]);
        for seed in 0..20 {
            let r = lift_rows(&a, 5, seed, &LiftConfig::default()).unwrap();
            assert!(r.rows.congruent(&a, 5));
            assert!(r.rows.get(0, 0).gcd(r.rows.get(0, 1)).is_one());
        }
    }

    #[test]
    fn lift_rows_rejects_rows_singular_mod_q() {
        let a = IntMatrix::from_i64(1, 2, &[2, 4]);
        assert!(matches!(
            lift_rows(&a, 6, 0, &LiftConfig::default()),
            Err(LiftError::NotExtendableModQ { .. })
        ));
    }

    #[test]
    fn lift_rows_fallback_path() {
        // (2, 5) lifts to (2, −2); with no random trials, so the CRT fallback runs
        let config = LiftConfig {
            trials_per_level: 0,
            ..LiftConfig::default()
        };
        let a = IntMatrix::from_i64(1, 2, &[2, 5]);
        let r = lift_rows(&a, 7, 3, &config).unwrap();
        assert!(r.used_fallback);
        assert!(r.rows.congruent(&a, 7));
        assert!(is_extendable(&r.rows));
        let config = LiftConfig {
            trials_per_level: 0,
            fallback_k: vec![],
            ..LiftConfig::default()
        };
        assert!(matches!(
            lift_rows(&a, 7, 3, &config),
            Err(LiftError::SearchExhausted { q: 7, .. })
        ));
    }

    #[test]
    fn complete_rows_examples() {
        assert_eq!(
            complete_rows(&IntMatrix::identity(3).top_rows(2)).unwrap(),
            big(&[0, 0, 1])
        );
        assert_eq!(
            complete_rows(&IntMatrix::from_i64(1, 2, &[3, 5])).unwrap(),
            big(&[1, 2])
        );
        assert!(matches!(
            complete_rows(&IntMatrix::from_i64(1, 2, &[2, 4])),
            Err(LiftError::NotExtendable(_))
        ));
    }

    #[test]
    fn lift_identity_and_degenerate_modulus() {
        for q in [1u64, 2, 16, 101] {
            let cert = lift(&IntMatrix::identity(3), q, 0, &LiftConfig::default()).unwrap();
            assert!(cert.gamma.det().unwrap().is_one());
            assert!(cert.gamma.congruent(&IntMatrix::identity(3), q));
        }
        let any = IntMatrix::from_i64(2, 2, &[7, 3, 2, 9]);
        let cert = lift(&any, 1, 0, &LiftConfig::default()).unwrap();
        assert_eq!(cert.gamma, IntMatrix::identity(2));
    }

    #[test]
    fn lift_sarnak_diagonal_mod_8() {
        let x = IntMatrix::from_i64(2, 2, &[5, 0, 0, 5]);
        let cert = lift(&x, 8, 1, &LiftConfig::default()).unwrap();
        assert!(cert.gamma.congruent(&x, 8));
        assert!(cert.gamma.det().unwrap().is_one());
        // the exhaustive minimum over all lifts is 13
        assert!(cert.gamma.max_norm() >= BigInt::from(13));
    }

    #[test]
    fn lift_rejects_bad_determinant() {
        let x = IntMatrix::from_i64(2, 2, &[1, 0, 0, 2]);
        assert!(matches!(
            lift(&x, 8, 0, &LiftConfig::default()),
            Err(LiftError::InvalidInput(_))
        ));
    }

    #[test]
    fn random_sl_is_special() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for q in [2u64, 12, 101] {
            for n in 1..=4 {
                let m = random_sl(&mut rng, n, q);
                assert!((m.det().unwrap() - BigInt::one()).mod_floor(&BigInt::from(q)).is_zero());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lift_is_sound(n in 2usize..=4, qi in 0usize..4, seed in any::<u64>()) {
            let q = [7u64, 16, 101, 360][qi];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_sl(&mut rng, n, q);
            let cert = lift(&x, q, seed, &LiftConfig::default()).unwrap();
            prop_assert!(cert.gamma.det().unwrap().is_one());
            prop_assert!(cert.gamma.congruent(&x, q));
            let t = cert.gamma.top_rows(n - 1).max_norm();
            let bound = BigInt::from(q) * BigInt::from(LiftConfig::default().perturbation_bound(q) + 1);
            prop_assert!(t <= bound);
        }

        #[test]
        fn completion_meets_bound(n in 2usize..=5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // a random unimodular matrix's top rows are extendable
            let g = random_unimodular(&mut rng, n);
            let b = g.top_rows(n - 1);
            let v = complete_rows(&b).unwrap();
            prop_assert!(b.stack_row(&v).unwrap().det().unwrap().is_one());
            let t = b.max_norm();
            prop_assert!(intmat::max_abs(&v) * 2 <= t * n + 2);
        }
    }

    fn random_unimodular(rng: &mut ChaCha8Rng, n: usize) -> IntMatrix {
        let mut g = IntMatrix::identity(n);
        for _ in 0..3 * n {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if i == j {
                continue;
            }
            let k = BigInt::from(rng.gen_range(-3i64..=3));
            for c in 0..n {
                let v = g.get(i, c) + &k * g.get(j, c);
                g.set(i, c, v);
            }
        }
        g
    }
}
