//! Exact modular arithmetic on machine-word moduli.
//!
//! A [`Residue`] is an element of Z/mZ stored by its canonical representative
//! in `[0, m)`. Its signed lift is the representative of least absolute value,
//! which is what "small" means for ring elements throughout this crate.
//!
//! Moduli are bounded by `i64::MAX` so that every signed lift fits in an
//! `i64`; products are taken in `u128`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;
use thiserror::Error;

/// Largest supported modulus.
pub const MAX_MODULUS: u64 = i64::MAX as u64;

/// Root extraction scans (Z/pZ)^x exhaustively, so primes above this bound
/// are rejected unless the caller raises it.
pub const DEFAULT_PRIME_BOUND: u64 = 1_000_000;

/// Cap on the size of a root set assembled across CRT components.
pub const DEFAULT_MAX_ROOTS: usize = 1_000_000;

const TRIAL_DIVISION_LIMIT: u64 = 1_000_000;
const RHO_SEED: u64 = 0x005e_ed0f_5eed;
const RHO_MAX_ITERATIONS: u64 = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResidueError {
    #[error("modulus {0} outside 1..=2^63-1")]
    BadModulus(u64),
    #[error("moduli {0} and {1} are not coprime")]
    NotCoprime(u64, u64),
    #[error("{value} is not a unit modulo {modulus}")]
    NotUnit { value: u64, modulus: u64 },
    #[error("prime factor {prime} exceeds the root-extraction bound {bound}")]
    PrimeTooLarge { prime: u64, bound: u64 },
    #[error("factorization effort exhausted on cofactor {0}")]
    FactorLimitExceeded(u64),
    #[error("root set would exceed the cap of {cap} elements")]
    TooManyRoots { cap: usize },
    #[error("exponent must be positive")]
    ZeroExponent,
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),
    #[error("combined modulus overflows")]
    Overflow,
}

pub type Result<T> = std::result::Result<T, ResidueError>;

/// An element of Z/mZ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Residue {
    value: u64,
    modulus: u64,
}

impl Residue {
    /// Reduces `value` modulo `modulus`.
    ///
    /// Panics if `modulus` is zero or exceeds [`MAX_MODULUS`].
    pub fn new(value: i128, modulus: u64) -> Self {
        Self::try_new(value, modulus).expect("invalid modulus")
    }

    pub fn try_new(value: i128, modulus: u64) -> Result<Self> {
        if modulus == 0 || modulus > MAX_MODULUS {
            return Err(ResidueError::BadModulus(modulus));
        }
        let value = value.rem_euclid(modulus as i128) as u64;
        Ok(Self { value, modulus })
    }

    pub fn from_u64(value: u64, modulus: u64) -> Self {
        Self::new(value as i128, modulus)
    }

    pub fn one(modulus: u64) -> Self {
        Self::new(1, modulus)
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// The representative of least absolute value; `+m/2` on a tie.
    pub fn signed_lift(&self) -> i64 {
        if self.value > self.modulus / 2 {
            self.value as i64 - self.modulus as i64
        } else {
            self.value as i64
        }
    }

    /// `|a| = min{|a'| : a' ≡ a mod m}`.
    pub fn abs_value(&self) -> u64 {
        self.signed_lift().unsigned_abs()
    }

    pub fn is_unit(&self) -> bool {
        gcd(self.value, self.modulus) == 1
    }

    pub fn pow(&self, exp: u64) -> Self {
        Self {
            value: pow_mod(self.value, exp, self.modulus),
            modulus: self.modulus,
        }
    }

    pub fn inverse(&self) -> Option<Self> {
        inv_mod(self.value, self.modulus).map(|value| Self {
            value,
            modulus: self.modulus,
        })
    }

    /// Reduces to a modulus dividing the current one.
    pub fn reduce(&self, modulus: u64) -> Self {
        debug_assert_eq!(self.modulus % modulus, 0);
        Self::from_u64(self.value, modulus)
    }

    pub fn scale(&self, k: i64) -> Self {
        *self * Self::new(k as i128, self.modulus)
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}", self.value, self.modulus)
    }
}

impl Add for Residue {
    type Output = Residue;
    fn add(self, rhs: Residue) -> Residue {
        debug_assert_eq!(self.modulus, rhs.modulus);
        let sum = (self.value as u128 + rhs.value as u128) % self.modulus as u128;
        Residue {
            value: sum as u64,
            modulus: self.modulus,
        }
    }
}

impl Sub for Residue {
    type Output = Residue;
    fn sub(self, rhs: Residue) -> Residue {
        self + (-rhs)
    }
}

impl Neg for Residue {
    type Output = Residue;
    fn neg(self) -> Residue {
        let value = if self.value == 0 {
            0
        } else {
            self.modulus - self.value
        };
        Residue {
            value,
            modulus: self.modulus,
        }
    }
}

impl Mul for Residue {
    type Output = Residue;
    fn mul(self, rhs: Residue) -> Residue {
        debug_assert_eq!(self.modulus, rhs.modulus);
        Residue {
            value: mul_mod(self.value, rhs.value, self.modulus),
            modulus: self.modulus,
        }
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut result = 1u64;
    let mut base = base % m;
    while exp > 0 {
        if exp & 1 == 1 {
            result = mul_mod(result, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    result
}

/// Extended Euclid: returns `(g, s, t)` with `s·a + t·b = g = gcd(a, b) ≥ 0`.
pub fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let quot = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
        (old_t, t) = (t, old_t - quot * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (g, s, _) = ext_gcd(a as i128, m as i128);
    (g == 1).then(|| s.rem_euclid(m as i128) as u64)
}

/// Deterministic Miller–Rabin, exact for all `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in SMALL {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Prime factorization `∏ p_i^{e_i}` with strictly increasing primes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Factorization(Vec<(u64, u32)>);

impl Factorization {
    pub fn factors(&self) -> &[(u64, u32)] {
        &self.0
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.0.iter().map(|&(p, _)| p)
    }

    /// The prime powers `p_i^{e_i}`.
    pub fn prime_powers(&self) -> impl Iterator<Item = u64> + '_ {
        self.0.iter().map(|&(p, e)| p.pow(e))
    }

    pub fn value(&self) -> u64 {
        self.prime_powers().product()
    }

    /// Factorization of the square; the exponents double.
    pub fn squared(&self) -> Factorization {
        Factorization(self.0.iter().map(|&(p, e)| (p, 2 * e)).collect())
    }

    /// Euler's totient.
    pub fn totient(&self) -> u64 {
        self.0
            .iter()
            .map(|&(p, e)| p.pow(e - 1) * (p - 1))
            .product()
    }
}

/// Trial division below 10^6, then Pollard–Brent rho with a fixed seed.
pub fn factorize(m: u64) -> Result<Factorization> {
    if m == 0 {
        return Err(ResidueError::BadModulus(0));
    }
    let mut rest = m;
    let mut found: Vec<u64> = Vec::new();
    fn push(p: u64, rest: &mut u64, found: &mut Vec<u64>) {
        while (*rest).is_multiple_of(p) {
            *rest /= p;
            found.push(p);
        }
    }
    push(2, &mut rest, &mut found);
    let mut p = 3;
    while p < TRIAL_DIVISION_LIMIT && p * p <= rest {
        push(p, &mut rest, &mut found);
        p += 2;
    }
    if rest > 1 {
        let mut stack = vec![rest];
        while let Some(c) = stack.pop() {
            if c == 1 {
                continue;
            }
            if is_prime(c) {
                found.push(c);
                continue;
            }
            let d = rho_split(c).ok_or(ResidueError::FactorLimitExceeded(c))?;
            stack.push(d);
            stack.push(c / d);
        }
    }
    found.sort_unstable();
    let mut out: Vec<(u64, u32)> = Vec::new();
    for p in found {
        match out.last_mut() {
            Some((q, e)) if *q == p => *e += 1,
            _ => out.push((p, 1)),
        }
    }
    Ok(Factorization(out))
}

fn rho_split(n: u64) -> Option<u64> {
    if n.is_multiple_of(2) {
        return Some(2);
    }
    // splitmix-style constants give a reproducible sequence of (start, increment) pairs.
    let mut state = RHO_SEED;
    let mut next = || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    let mut spent = 0u64;
    while spent < RHO_MAX_ITERATIONS {
        let c = next() % (n - 1) + 1;
        let mut y = next() % n;
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut g, mut r, mut q) = (1u64, 1u64, 1u64);
        let mut x = y;
        let mut ys = y;
        const BATCH: u64 = 128;
        while g == 1 && spent < RHO_MAX_ITERATIONS {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..BATCH.min(r - k) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = gcd(q, n);
                k += BATCH;
            }
            spent += r;
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), n);
                if g > 1 {
                    break;
                }
            }
        }
        if g > 1 && g < n {
            return Some(g);
        }
    }
    None
}

/// Solves the congruences `x ≡ r_i mod m_i` for pairwise coprime `m_i`.
pub fn crt(congruences: &[(u64, u64)]) -> Result<Residue> {
    let mut x: u64 = 0;
    let mut modulus: u64 = 1;
    for &(r, m) in congruences {
        if m == 0 || m > MAX_MODULUS {
            return Err(ResidueError::BadModulus(m));
        }
        if gcd(modulus, m) != 1 {
            return Err(ResidueError::NotCoprime(modulus, m));
        }
        let combined = modulus
            .checked_mul(m)
            .filter(|&c| c <= MAX_MODULUS)
            .ok_or(ResidueError::Overflow)?;
        let inv = inv_mod(modulus % m, m).expect("coprime");
        let r = r % m;
        let delta = (r + m - x % m) % m;
        let t = mul_mod(delta, inv, m);
        x = ((x as u128 + modulus as u128 * t as u128) % combined as u128) as u64;
        modulus = combined;
    }
    Ok(Residue::from_u64(x, modulus))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RootConfig {
    pub prime_bound: u64,
    pub max_roots: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        Self {
            prime_bound: DEFAULT_PRIME_BOUND,
            max_roots: DEFAULT_MAX_ROOTS,
        }
    }
}

/// For each residue class mod p, the list of units whose n-th power lands
/// there (compressed-row layout).
#[derive(Clone, Debug)]
struct PowerIndex {
    offsets: Vec<u32>,
    preimages: Vec<u32>,
}

impl PowerIndex {
    fn build(p: u64, n: u64) -> Self {
        let powers: Vec<u32> = (0..p).map(|x| pow_mod(x, n, p) as u32).collect();
        let mut offsets = vec![0u32; p as usize + 1];
        for &v in &powers[1..] {
            offsets[v as usize + 1] += 1;
        }
        for i in 0..p as usize {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut preimages = vec![0u32; p as usize - 1];
        for (x, &v) in powers.iter().enumerate().skip(1) {
            preimages[fill[v as usize] as usize] = x as u32;
            fill[v as usize] += 1;
        }
        Self { offsets, preimages }
    }

    fn lookup(&self, a: u64) -> &[u32] {
        let a = a as usize;
        &self.preimages[self.offsets[a] as usize..self.offsets[a + 1] as usize]
    }
}

#[derive(Clone, Debug)]
struct Component {
    p: u64,
    e: u32,
    prime_power: u64,
    /// `(M / p^e) · ((M / p^e)^{-1} mod p^e)`, the CRT idempotent.
    idempotent: u64,
    index: PowerIndex,
}

/// Computes complete n-th root sets modulo a fixed modulus.
///
/// Roots modulo each prime come from an exhaustive scan of (Z/pZ)^x
/// (indexed once per prime), are extended to p^e through a lifting tree that
/// tries all p candidates per level, and are recombined by CRT.
#[derive(Clone, Debug)]
pub struct RootFinder {
    modulus: u64,
    n: u32,
    config: RootConfig,
    components: Vec<Component>,
}

impl RootFinder {
    pub fn new(modulus: u64, n: u32) -> Result<Self> {
        Self::with_config(modulus, n, RootConfig::default())
    }

    pub fn with_config(modulus: u64, n: u32, config: RootConfig) -> Result<Self> {
        if modulus == 0 || modulus > MAX_MODULUS {
            return Err(ResidueError::BadModulus(modulus));
        }
        Self::from_factorization(&factorize(modulus)?, n, config)
    }

    pub fn from_factorization(fact: &Factorization, n: u32, config: RootConfig) -> Result<Self> {
        if n == 0 {
            return Err(ResidueError::ZeroExponent);
        }
        let modulus = fact.value();
        if modulus > MAX_MODULUS {
            return Err(ResidueError::BadModulus(modulus));
        }
        let mut components = Vec::with_capacity(fact.factors().len());
        for &(p, e) in fact.factors() {
            if p > config.prime_bound {
                return Err(ResidueError::PrimeTooLarge {
                    prime: p,
                    bound: config.prime_bound,
                });
            }
            let prime_power = p.pow(e);
            let cofactor = modulus / prime_power;
            let inv = inv_mod(cofactor % prime_power, prime_power).expect("coprime");
            let idempotent = mul_mod(cofactor, inv, modulus);
            components.push(Component {
                p,
                e,
                prime_power,
                idempotent,
                index: PowerIndex::build(p, n as u64),
            });
        }
        Ok(Self {
            modulus,
            n,
            config,
            components,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn exponent(&self) -> u32 {
        self.n
    }

    fn check_unit(&self, alpha: Residue) -> Result<()> {
        if alpha.modulus() != self.modulus {
            return Err(ResidueError::ModulusMismatch(alpha.modulus(), self.modulus));
        }
        if !alpha.is_unit() {
            return Err(ResidueError::NotUnit {
                value: alpha.value(),
                modulus: self.modulus,
            });
        }
        Ok(())
    }

    fn component_roots(&self, c: &Component, alpha: u64) -> Vec<u64> {
        let n = self.n as u64;
        let a = alpha % c.prime_power;
        let mut roots: Vec<u64> = c.index.lookup(a % c.p).iter().map(|&x| x as u64).collect();
        let mut level = c.p;
        for _ in 1..c.e {
            let next_level = level * c.p;
            let target = a % next_level;
            let mut next = Vec::new();
            for &r in &roots {
                for t in 0..c.p {
                    let cand = r + t * level;
                    if pow_mod(cand, n, next_level) == target {
                        next.push(cand);
                    }
                }
            }
            roots = next;
            level = next_level;
            if roots.is_empty() {
                break;
            }
        }
        roots
    }

    /// Depth-first version of [`Self::component_roots`] that stops at the
    /// first root found.
    fn component_has_root(&self, c: &Component, alpha: u64) -> bool {
        let n = self.n as u64;
        let a = alpha % c.prime_power;
        let mut stack: Vec<(u64, u64)> = c
            .index
            .lookup(a % c.p)
            .iter()
            .map(|&x| (x as u64, c.p))
            .collect();
        while let Some((r, level)) = stack.pop() {
            if level == c.prime_power {
                return true;
            }
            let next_level = level * c.p;
            let target = a % next_level;
            for t in 0..c.p {
                let cand = r + t * level;
                if pow_mod(cand, n, next_level) == target {
                    stack.push((cand, next_level));
                }
            }
        }
        false
    }

    /// All `β ∈ (Z/mZ)^x` with `β^n = α`, ascending.
    pub fn roots(&self, alpha: Residue) -> Result<Vec<Residue>> {
        self.check_unit(alpha)?;
        let mut per_component = Vec::with_capacity(self.components.len());
        let mut total: usize = 1;
        for c in &self.components {
            let roots = self.component_roots(c, alpha.value());
            if roots.is_empty() {
                return Ok(Vec::new());
            }
            total = total
                .checked_mul(roots.len())
                .filter(|&t| t <= self.config.max_roots)
                .ok_or(ResidueError::TooManyRoots {
                    cap: self.config.max_roots,
                })?;
            per_component.push(roots);
        }
        let m = self.modulus;
        let mut acc: Vec<u64> = vec![0];
        for (c, roots) in self.components.iter().zip(&per_component) {
            let mut next = Vec::with_capacity(acc.len() * roots.len());
            for &x in &acc {
                for &r in roots {
                    next.push((x + mul_mod(r, c.idempotent, m)) % m);
                }
            }
            acc = next;
        }
        debug_assert!(acc.len() == total);
        acc.sort_unstable();
        Ok(acc.into_iter().map(|v| Residue::from_u64(v, m)).collect())
    }

    /// Whether some n-th root exists, without materializing the set.
    pub fn has_root(&self, alpha: Residue) -> Result<bool> {
        self.check_unit(alpha)?;
        Ok(self
            .components
            .iter()
            .all(|c| self.component_has_root(c, alpha.value())))
    }
}

/// The complete set of n-th roots of a unit `alpha`.
pub fn nth_roots(alpha: Residue, n: u32) -> Result<Vec<Residue>> {
    RootFinder::new(alpha.modulus(), n)?.roots(alpha)
}

/// Membership in `(Z/mZ)^{x n}`.
///
/// Odd prime powers use the cyclic-group criterion `a^{φ/g} = 1` with
/// `g = gcd(n, φ)`; the 2-part is decided by the lifting tree.
pub fn is_nth_power_residue(a: Residue, n: u32) -> Result<bool> {
    if n == 0 {
        return Err(ResidueError::ZeroExponent);
    }
    if !a.is_unit() {
        return Err(ResidueError::NotUnit {
            value: a.value(),
            modulus: a.modulus(),
        });
    }
    let fact = factorize(a.modulus())?;
    for &(p, e) in fact.factors() {
        let pe = p.pow(e);
        let ap = a.value() % pe;
        if p == 2 {
            let single = Factorization(vec![(2, e)]);
            let finder = RootFinder::from_factorization(&single, n, RootConfig::default())?;
            if !finder.has_root(Residue::from_u64(ap, pe))? {
                return Ok(false);
            }
        } else {
            let phi = p.pow(e - 1) * (p - 1);
            let g = gcd(n as u64, phi);
            if pow_mod(ap, phi / g, pe) != 1 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Units of Z/mZ in ascending order.
pub fn units(m: u64) -> impl Iterator<Item = u64> {
    let start = if m == 1 { 0 } else { 1 };
    (start..m.max(1)).filter(move |&x| gcd(x, m) == 1)
}
