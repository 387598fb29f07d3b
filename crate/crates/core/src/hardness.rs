//! Elements of SL_n(Z/qZ) whose every lift is large.
//!
//! If `β^n = α` modulo `q²` with `α` a small unit and `nβ` large, then
//! `x = diag(β·α⁻¹, β, …, β)` lies in SL_n(Z/qZ) and the diagonal `a_i` of any
//! lift satisfies `α·a₁ + a₂ + … + a_n ≡ nβ (mod q²)`. Some diagonal entry
//! therefore has absolute value at least `|nβ| / (n|α|)`.

use std::cmp::Ordering;
use std::collections::HashSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::intmat::IntMatrix;
use crate::residue::{
    self, factorize, gcd, is_nth_power_residue, is_prime, Factorization, Residue, ResidueError,
    RootConfig, RootFinder,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HardnessError {
    #[error("no admissible unit alpha with |alpha| <= {budget} modulo {q}")]
    NoUnitAlpha { q: u64, budget: u64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("sieve exhausted below {limit}: found {found} of {wanted} pairs")]
    SieveExhausted { limit: u64, found: usize, wanted: usize },
    #[error(transparent)]
    Residue(#[from] ResidueError),
}

pub type Result<T> = std::result::Result<T, HardnessError>;

/// `β^n = α` modulo `q2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RootWitness {
    pub q2: u64,
    pub n: u32,
    pub alpha: Residue,
    pub beta: Residue,
    pub abs_alpha: u64,
    pub abs_n_beta: u64,
}

impl RootWitness {
    pub fn new(alpha: Residue, beta: Residue, n: u32) -> Self {
        Self {
            q2: alpha.modulus(),
            n,
            alpha,
            beta,
            abs_alpha: alpha.abs_value(),
            abs_n_beta: beta.scale(n as i64).abs_value(),
        }
    }

    /// Re-checks `β^n = α` and that `β` is a unit.
    pub fn is_valid(&self) -> bool {
        self.beta.is_unit()
            && self.beta.pow(self.n as u64) == self.alpha
            && self.alpha.modulus() == self.q2
            && self.abs_alpha == self.alpha.abs_value()
            && self.abs_n_beta == self.beta.scale(self.n as i64).abs_value()
    }

    /// `|nβ| / (n|α|)` as an exact fraction `(num, den)`.
    pub fn lower_bound(&self) -> (u64, u64) {
        (self.abs_n_beta, self.n as u64 * self.abs_alpha)
    }

    fn better_than(&self, other: &RootWitness) -> bool {
        match self.abs_n_beta.cmp(&other.abs_n_beta) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.beta.value() < other.beta.value(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RootSearchConfig {
    /// Also try `−a` for each `a` in the budget.
    pub include_negative: bool,
    pub roots: RootConfig,
}

impl Default for RootSearchConfig {
    fn default() -> Self {
        Self {
            include_negative: true,
            roots: RootConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootSearch {
    pub best: RootWitness,
    pub reached_target: bool,
    /// `n = 1`: the only root of `α` is `α` itself.
    pub degenerate: bool,
    pub alphas_tried: u64,
    /// α values skipped because their root set exceeded the cap.
    pub alphas_skipped: u64,
}

/// Unit α in order `1, −1, 2, −2, …` up to `|α| ≤ budget`, skipping
/// repeated residues.
fn alpha_candidates(q: u64, budget: u64, include_negative: bool) -> Vec<Residue> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for a in 1..=budget.min(q) {
        let signs: &[i128] = if include_negative { &[1, -1] } else { &[1] };
        for &s in signs {
            let r = Residue::new(s * a as i128, q);
            if r.is_unit() && r.abs_value() == a && seen.insert(r.value()) {
                out.push(r);
            }
        }
    }
    out
}

/// Searches units `α` with `|α| ≤ alpha_budget` for the n-th root `β`
/// maximizing `|nβ|` modulo `q`. Stops as soon as `|nβ| ≥ target`.
pub fn find_large_root(q: u64, n: u32, alpha_budget: u64, target: u64) -> Result<RootSearch> {
    find_large_root_with(q, n, alpha_budget, target, &RootSearchConfig::default())
}

pub fn find_large_root_with(
    q: u64,
    n: u32,
    alpha_budget: u64,
    target: u64,
    config: &RootSearchConfig,
) -> Result<RootSearch> {
    if q < 2 || alpha_budget == 0 || n == 0 {
        return Err(HardnessError::InvalidInput(format!(
            "need q >= 2, n >= 1, budget >= 1 (got q={q}, n={n}, budget={alpha_budget})"
        )));
    }
    let finder = RootFinder::with_config(q, n, config.roots)?;
    search_with(&finder, alpha_budget, target, config)
}

fn search_with(
    finder: &RootFinder,
    alpha_budget: u64,
    target: u64,
    config: &RootSearchConfig,
) -> Result<RootSearch> {
    let (q, n) = (finder.modulus(), finder.exponent());
    let mut best: Option<RootWitness> = None;
    let (mut tried, mut skipped) = (0u64, 0u64);
    for alpha in alpha_candidates(q, alpha_budget, config.include_negative) {
        tried += 1;
        let roots = match finder.roots(alpha) {
            Ok(r) => r,
            Err(ResidueError::TooManyRoots { cap }) => {
                log::warn!("skipping alpha = {alpha}: more than {cap} roots");
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for beta in roots {
            let w = RootWitness::new(alpha, beta, n);
            if best.as_ref().is_none_or(|b| w.better_than(b)) {
                best = Some(w);
            }
        }
        if best.is_some_and(|b| b.abs_n_beta >= target) {
            break;
        }
    }
    let best = best.ok_or(HardnessError::NoUnitAlpha {
        q,
        budget: alpha_budget,
    })?;
    Ok(RootSearch {
        reached_target: best.abs_n_beta >= target,
        degenerate: n == 1,
        best,
        alphas_tried: tried,
        alphas_skipped: skipped,
    })
}

fn is_p_prime(p: u64, n: u32) -> bool {
    gcd(p - 1, n as u64) > 1 && !(n as u64).is_multiple_of(p)
}

/// A root of unity `β` (so `α = 1`) that is `≡ 1` away from a small prime
/// power `p^m ∥ q` with `p^{mk} < q` and `gcd(p−1, n) > 1`, `p ∤ n`, and a
/// nontrivial n-th root of unity at `p^m`. Returns `None` if `q` has no such
/// factor. Among all candidates the one with the largest `|nβ|` is returned.
pub fn small_p_factor_root(q: u64, n: u32, k: u32) -> Result<Option<RootWitness>> {
    small_p_factor_root_in(&factorize(q)?, n, k)
}

pub fn small_p_factor_root_in(fact: &Factorization, n: u32, k: u32) -> Result<Option<RootWitness>> {
    let q = fact.value();
    if q < 2 || n == 0 || k == 0 {
        return Ok(None);
    }
    let mut best: Option<RootWitness> = None;
    for &(p, e) in fact.factors() {
        let pm = p.pow(e);
        let small = (pm as u128)
            .checked_pow(k)
            .is_some_and(|v| v < q as u128);
        if !small || !is_p_prime(p, n) {
            continue;
        }
        let rest = q / pm;
        for a in residue::nth_roots(Residue::one(pm), n)? {
            if a.value() == 1 {
                continue;
            }
            let beta = residue::crt(&[(1 % rest, rest), (a.value(), pm)])?;
            let w = RootWitness::new(Residue::one(q), beta, n);
            if best.as_ref().is_none_or(|b| w.better_than(b)) {
                best = Some(w);
            }
        }
    }
    Ok(best)
}

/// [`find_large_root`] with [`small_p_factor_root`] as a second candidate;
/// keeps whichever has the larger `|nβ|`.
pub fn root_with_fallback(q: u64, n: u32, alpha_budget: u64, k: u32) -> Result<RootWitness> {
    let fact = factorize(q)?;
    let finder = RootFinder::from_factorization(&fact, n, RootConfig::default())?;
    let search = search_with(&finder, alpha_budget, u64::MAX, &RootSearchConfig::default())?;
    let mut best = search.best;
    if let Some(w) = small_p_factor_root_in(&fact, n, k)? {
        if w.abs_n_beta > best.abs_n_beta {
            best = w;
        }
    }
    Ok(best)
}

/// One pair from [`small_nth_powers`]: `β^n ≡ α (mod q)` with `α` a
/// positive integer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerPair {
    #[serde(serialize_with = "crate::serialize_bigint")]
    pub alpha: BigInt,
    pub beta: Residue,
}

/// Whether the positive integer `a` is an exact n-th power.
pub fn is_perfect_power(a: &BigInt, n: u32) -> bool {
    if a.is_negative() {
        return n % 2 == 1 && is_perfect_power(&-a, n);
    }
    let r = a.nth_root(n);
    &r.pow(n) == a
}

/// Finds `count` pairs `(α_i, β_i)` with `β_i^n ≡ α_i (mod q)` and no ratio
/// `α_i / α_j` an n-th power in Q.
///
/// Primes `p ∈ P` not dividing `q` are sieved in order up to `prime_limit`
/// and sorted into classes of `(Z/qZ)^× / (Z/qZ)^{×n}`. The first prime `p₁`
/// gives `(p₁^n, p₁)`; each later prime `p_j` in the class of representative
/// `p_a` gives `α_j = p_j · p_a^{n−1}`.
pub fn small_nth_powers(q: u64, n: u32, count: usize, prime_limit: u64) -> Result<Vec<PowerPair>> {
    if q == 0 || n == 0 {
        return Err(HardnessError::InvalidInput("q and n must be positive".into()));
    }
    let finder = RootFinder::new(q, n)?;
    let mut reps: Vec<u64> = Vec::new();
    let mut out: Vec<PowerPair> = Vec::new();
    let accept = |out: &mut Vec<PowerPair>, alpha: BigInt| -> Result<()> {
        let a_mod = Residue::new(alpha.mod_floor(&BigInt::from(q)).to_i128().unwrap(), q);
        let Some(&beta) = finder.roots(a_mod)?.first() else {
            return Ok(());
        };
        let independent = out.iter().all(|prev| {
            // α/α' is an n-th power iff α·α'^{n−1} is
            !is_perfect_power(&(&alpha * prev.alpha.pow(n - 1)), n)
        });
        if independent {
            out.push(PowerPair { alpha, beta });
        }
        Ok(())
    };
    for p in 2..=prime_limit {
        if out.len() >= count {
            break;
        }
        if !is_prime(p) || q.is_multiple_of(p) || !is_p_prime(p, n) {
            continue;
        }
        if reps.is_empty() {
            reps.push(p);
            accept(&mut out, BigInt::from(p).pow(n))?;
            continue;
        }
        let pr = Residue::from_u64(p, q);
        let mut class = None;
        for &a in &reps {
            let ratio = pr * Residue::from_u64(a, q).inverse().expect("unit");
            if is_nth_power_residue(ratio, n)? {
                class = Some(a);
                break;
            }
        }
        match class {
            Some(a) => accept(&mut out, BigInt::from(p) * BigInt::from(a).pow(n - 1))?,
            None => reps.push(p),
        }
    }
    if out.len() < count {
        return Err(HardnessError::SieveExhausted {
            limit: prime_limit,
            found: out.len(),
            wanted: count,
        });
    }
    out.truncate(count);
    Ok(out)
}

/// What every lift of a [`HardInstance`] must satisfy.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Obstruction {
    /// `α·a₁ + a₂ + … + a_n ≡ nβ (mod q²)` on the diagonal.
    DiagonalCongruence { alpha: Residue, n_beta: Residue },
    /// `Tr(γ) ≡ residue (mod q²)`.
    Trace { residue: Residue },
}

impl Obstruction {
    pub fn holds(&self, gamma: &IntMatrix) -> bool {
        let n = gamma.rows();
        let diag = |i: usize| gamma.get(i, i).clone();
        match self {
            Obstruction::DiagonalCongruence { alpha, n_beta } => {
                let m = BigInt::from(alpha.modulus());
                let mut s = BigInt::from(alpha.value()) * diag(0);
                for i in 1..n {
                    s += diag(i);
                }
                (s - BigInt::from(n_beta.value())).mod_floor(&m).is_zero()
            }
            Obstruction::Trace { residue } => {
                let m = BigInt::from(residue.modulus());
                let t: BigInt = (0..n).map(diag).sum();
                (t - BigInt::from(residue.value())).mod_floor(&m).is_zero()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HardInstance {
    pub q: u64,
    pub n: usize,
    pub witness: Option<RootWitness>,
    /// Entries in `[0, q)`.
    pub x: IntMatrix,
    pub obstruction: Obstruction,
    /// Every lift has max-norm at least `num / den`.
    pub lower_bound_num: u64,
    pub lower_bound_den: u64,
    pub degenerate: bool,
}

impl HardInstance {
    /// `⌈num / den⌉`.
    pub fn lower_bound_ceil(&self) -> u64 {
        self.lower_bound_num.div_ceil(self.lower_bound_den)
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound_num as f64 / self.lower_bound_den as f64
    }

    /// The bound says nothing beyond `‖γ‖ ≥ 1`.
    pub fn is_vacuous(&self) -> bool {
        self.lower_bound_ceil() <= 1
    }
}

/// Diagonal instance from the better of [`find_large_root`] and
/// [`small_p_factor_root`] (with `k = 2`) modulo `q²`, compared by the exact
/// bound `|nβ| / (n|α|)`.
pub fn hard_instance(q: u64, n: u32, alpha_budget: u64) -> Result<HardInstance> {
    if q < 2 || n == 0 {
        return Err(HardnessError::InvalidInput(format!(
            "need q >= 2 and n >= 1 (got q={q}, n={n})"
        )));
    }
    let q2 = q
        .checked_mul(q)
        .filter(|&v| v <= residue::MAX_MODULUS)
        .ok_or_else(|| HardnessError::InvalidInput(format!("q = {q} too large: q² overflows")))?;
    let fact = factorize(q)?.squared();
    let finder = RootFinder::from_factorization(&fact, n, RootConfig::default())?;
    let search = search_with(&finder, alpha_budget, u64::MAX, &RootSearchConfig::default())?;
    let mut w = search.best;
    if let Some(c) = small_p_factor_root_in(&fact, n, 2)? {
        let (a, b) = w.lower_bound();
        let (c_num, c_den) = c.lower_bound();
        if (c_num as u128) * (b as u128) > (a as u128) * (c_den as u128) {
            w = c;
        }
    }
    debug_assert_eq!(w.q2, q2);
    let first = w.beta * w.alpha.inverse().expect("unit");
    let n_us = n as usize;
    let mut x = IntMatrix::zeros(n_us, n_us);
    x.set(0, 0, BigInt::from(first.reduce(q).value()));
    for i in 1..n_us {
        x.set(i, i, BigInt::from(w.beta.reduce(q).value()));
    }
    let (num, den) = w.lower_bound();
    let g = gcd(num, den).max(1);
    Ok(HardInstance {
        q,
        n: n_us,
        witness: Some(w),
        x,
        obstruction: Obstruction::DiagonalCongruence {
            alpha: w.alpha,
            n_beta: w.beta.scale(n as i64),
        },
        lower_bound_num: num / g,
        lower_bound_den: den / g,
        degenerate: n == 1,
    })
}

/// `x = diag(1 − 4m, 1 + 4m)` modulo `q = 8m`. Every lift has trace
/// `≡ 2 + 16m² (mod q²)`, forcing a diagonal entry of size at least `q²/8`.
pub fn sarnak_instance(m: u64) -> Result<HardInstance> {
    if m == 0 {
        return Err(HardnessError::InvalidInput("m must be positive".into()));
    }
    let q = m
        .checked_mul(8)
        .filter(|&q| q.checked_mul(q).is_some_and(|v| v <= residue::MAX_MODULUS))
        .ok_or_else(|| HardnessError::InvalidInput(format!("m = {m} too large")))?;
    let q2 = q * q;
    let a = Residue::new(1 - 4 * m as i128, q);
    let d = Residue::new(1 + 4 * m as i128, q);
    let mut x = IntMatrix::zeros(2, 2);
    x.set(0, 0, BigInt::from(a.value()));
    x.set(1, 1, BigInt::from(d.value()));
    let trace = Residue::new(2 + 16 * (m as i128) * (m as i128), q2);
    Ok(HardInstance {
        q,
        n: 2,
        witness: None,
        x,
        obstruction: Obstruction::Trace { residue: trace },
        lower_bound_num: q2 / 8,
        lower_bound_den: 1,
        degenerate: false,
    })
}

impl RootWitness {
    /// `|nβ|` relative to `q2^{1 − 1/k}`.
    pub fn ratio_to_power(&self, k: u32) -> f64 {
        self.abs_n_beta as f64 / (self.q2 as f64).powf(1.0 - 1.0 / k as f64)
    }
}
