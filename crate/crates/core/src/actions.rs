//! SL_n(Z) acting on primitive vectors mod `q`.
//!
//! `A_q` is the set of `x ∈ (Z/qZ)^n` with `gcd(q, x₁, …, x_n) = 1`, and
//! `P_q` is its quotient by unit scaling. The distance from `x` to `y` is
//! the least max-norm of `γ ∈ SL_n(Z)` with `γx ≡ y` (in `P_q`, up to a
//! unit). Distances are stored as norms and found by scanning `F_T` in
//! order of norm from each source.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::intmat::IntMatrix;
use crate::oracle::{collect_lifts, EnumSpec, OracleError};
use crate::residue::{gcd, units};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("{coords:?} is not primitive modulo {q}")]
    NotPrimitive { q: u64, coords: Vec<u64> },
    #[error("points live in different spaces")]
    Mismatch,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub type Result<T> = std::result::Result<T, ActionError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Space {
    Affine,
    Projective,
}

impl Serialize for Space {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            Space::Affine => "A",
            Space::Projective => "P",
        })
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Affine => "A",
            Space::Projective => "P",
        })
    }
}

fn primitive(q: u64, coords: &[u64]) -> bool {
    coords.iter().fold(q, |g, &c| gcd(g, c)) == 1
}

fn reduce(q: u64, coords: &[i64]) -> Vec<u64> {
    coords.iter().map(|&c| c.rem_euclid(q as i64) as u64).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct PointA {
    pub q: u64,
    pub coords: Vec<u64>,
}

impl PointA {
    pub fn new(q: u64, coords: &[i64]) -> Result<Self> {
        if q == 0 || coords.is_empty() {
            return Err(ActionError::InvalidInput("need q >= 1 and n >= 1".into()));
        }
        let coords = reduce(q, coords);
        if !primitive(q, &coords) {
            return Err(ActionError::NotPrimitive { q, coords });
        }
        Ok(Self { q, coords })
    }

    /// `e₁ = (1, 0, …, 0)`.
    pub fn basis(q: u64, n: usize) -> Self {
        let mut coords = vec![0; n];
        coords[0] = 1 % q;
        Self { q, coords }
    }
}

/// Lexicographically least element of `{u·v : u ∈ (Z/qZ)^×}`.
pub fn canonical(q: u64, v: &[u64]) -> Vec<u64> {
    units(q)
        .map(|u| v.iter().map(|&c| (c as u128 * u as u128 % q as u128) as u64).collect::<Vec<_>>())
        .min()
        .unwrap_or_else(|| v.to_vec())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct PointP {
    pub q: u64,
    /// Canonical representative, see [`canonical`].
    pub coords: Vec<u64>,
}

impl PointP {
    pub fn new(q: u64, coords: &[i64]) -> Result<Self> {
        let a = PointA::new(q, coords)?;
        Ok(Self {
            q,
            coords: canonical(q, &a.coords),
        })
    }
}

impl From<&PointA> for PointP {
    fn from(a: &PointA) -> Self {
        Self {
            q: a.q,
            coords: canonical(a.q, &a.coords),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Reach {
    Reached { norm: u64 },
    Unreached { t_max: u64 },
}

impl Reach {
    pub fn norm(&self) -> Option<u64> {
        match self {
            Reach::Reached { norm } => Some(*norm),
            Reach::Unreached { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceRecord {
    pub q: u64,
    pub x: Vec<u64>,
    pub y: Vec<u64>,
    pub reach: Reach,
    pub witness: Option<IntMatrix>,
    /// `log(norm) / log(q)`.
    pub log_q_exponent: Option<f64>,
}

fn exponent(norm: u64, q: u64) -> Option<f64> {
    (q > 1).then(|| (norm as f64).ln() / (q as f64).ln())
}

/// `F_T` sorted by (max-norm, entries).
struct Ball {
    n: usize,
    t: u64,
    items: Vec<(u64, Vec<i64>)>,
}

impl Ball {
    fn new(n: usize, t: u64, budget: u128) -> Result<Self> {
        let mut items: Vec<(u64, Vec<i64>)> = collect_lifts(&EnumSpec::uniform(n, t), budget)?
            .into_iter()
            .map(|m| (m.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0), m))
            .collect();
        items.sort_unstable();
        Ok(Self { n, t, items })
    }
}

fn apply(n: usize, q: u64, m: &[i64], x: &[u64]) -> Vec<u64> {
    let q = q as i128;
    (0..n)
        .map(|i| {
            let s: i128 = (0..n).map(|j| m[i * n + j] as i128 * x[j] as i128).sum();
            s.rem_euclid(q) as u64
        })
        .collect()
}

/// First hit (norm, matrix) for each key reached from `x`; stops once
/// `wanted` keys are found.
fn scan_from(
    ball: &Ball,
    space: Space,
    q: u64,
    x: &[u64],
    wanted: usize,
) -> HashMap<Vec<u64>, (u64, usize)> {
    let mut hits = HashMap::new();
    for (idx, (norm, m)) in ball.items.iter().enumerate() {
        let mut y = apply(ball.n, q, m, x);
        if space == Space::Projective {
            y = canonical(q, &y);
        }
        hits.entry(y).or_insert((*norm, idx));
        if hits.len() >= wanted {
            break;
        }
    }
    hits
}

fn distance(space: Space, q: u64, x: &[u64], y: &[u64], t_max: u64, budget: u128) -> Result<DistanceRecord> {
    if x.len() != y.len() {
        return Err(ActionError::Mismatch);
    }
    let n = x.len();
    let key = match space {
        Space::Affine => y.to_vec(),
        Space::Projective => canonical(q, y),
    };
    let mut t = 1u64;
    loop {
        let ball = Ball::new(n, t, budget)?;
        let mut found = None;
        for (norm, m) in &ball.items {
            let mut img = apply(n, q, m, x);
            if space == Space::Projective {
                img = canonical(q, &img);
            }
            if img == key {
                found = Some((*norm, IntMatrix::from_i64(n, n, m)));
                break;
            }
        }
        if let Some((norm, w)) = found {
            return Ok(DistanceRecord {
                q,
                x: x.to_vec(),
                y: key,
                reach: Reach::Reached { norm },
                witness: Some(w),
                log_q_exponent: exponent(norm, q),
            });
        }
        if ball.t >= t_max {
            return Ok(DistanceRecord {
                q,
                x: x.to_vec(),
                y: key,
                reach: Reach::Unreached { t_max },
                witness: None,
                log_q_exponent: None,
            });
        }
        t = (t * 2).min(t_max);
    }
}

/// Least max-norm `γ` with `γx ≡ y (mod q)`.
pub fn dist_affine(x: &PointA, y: &PointA, t_max: u64, budget: u128) -> Result<DistanceRecord> {
    if x.q != y.q {
        return Err(ActionError::Mismatch);
    }
    distance(Space::Affine, x.q, &x.coords, &y.coords, t_max, budget)
}

/// Least max-norm `γ` with `γx ≡ u·y (mod q)` for some unit `u`.
pub fn dist_projective(x: &PointP, y: &PointP, t_max: u64, budget: u128) -> Result<DistanceRecord> {
    if x.q != y.q {
        return Err(ActionError::Mismatch);
    }
    distance(Space::Projective, x.q, &x.coords, &y.coords, t_max, budget)
}

/// All points of the space, ascending.
pub fn points(space: Space, n: usize, q: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let total = (q as u128).pow(n as u32);
    for mut k in 0..total {
        let mut v = vec![0u64; n];
        for c in v.iter_mut().rev() {
            *c = (k % q as u128) as u64;
            k /= q as u128;
        }
        if !primitive(q, &v) {
            continue;
        }
        if space == Space::Projective && canonical(q, &v) != v {
            continue;
        }
        out.push(v);
    }
    out
}

/// Norms for every ordered pair; `None` means not reached within `t_max`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceTable {
    pub space: Space,
    pub n: usize,
    pub q: u64,
    pub t_max: u64,
    pub points: Vec<Vec<u64>>,
    pub norms: Vec<Vec<Option<u64>>>,
}

pub fn distance_table(space: Space, n: usize, q: u64, t_max: u64, budget: u128) -> Result<DistanceTable> {
    if n == 0 || q == 0 {
        return Err(ActionError::InvalidInput("need n >= 1 and q >= 1".into()));
    }
    let pts = points(space, n, q);
    let index: HashMap<&Vec<u64>, usize> = pts.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let mut norms = vec![vec![None; pts.len()]; pts.len()];
    let mut t = 1u64;
    let mut pending: Vec<usize> = (0..pts.len()).collect();
    loop {
        let ball = Ball::new(n, t, budget)?;
        let rows: Vec<(usize, HashMap<Vec<u64>, (u64, usize)>)> = pending
            .par_iter()
            .map(|&i| (i, scan_from(&ball, space, q, &pts[i], pts.len())))
            .collect();
        pending.clear();
        for (i, hits) in rows {
            for (y, (norm, _)) in hits {
                norms[i][index[&y]] = Some(norm);
            }
            if norms[i].iter().any(Option::is_none) {
                pending.push(i);
            }
        }
        if pending.is_empty() || t >= t_max {
            break;
        }
        t = (t * 2).min(t_max);
    }
    Ok(DistanceTable {
        space,
        n,
        q,
        t_max,
        points: pts,
        norms,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiameterProfile {
    pub space: Space,
    pub n: usize,
    pub q: u64,
    pub points: usize,
    pub pairs: usize,
    pub unreached: usize,
    /// `None` if some pair was not reached.
    pub diameter_norm: Option<u64>,
    /// Nearest-rank 50%, 90%, 99% quantiles over ordered pairs; `None` when
    /// the rank falls among unreached pairs.
    pub quantile_norms: [Option<u64>; 3],
    pub diameter_exponent: Option<f64>,
    pub quantile_exponents: [Option<f64>; 3],
}

pub const QUANTILES: [f64; 3] = [0.5, 0.9, 0.99];

impl DistanceTable {
    pub fn profile(&self) -> DiameterProfile {
        let mut all: Vec<Option<u64>> = self.norms.iter().flatten().copied().collect();
        // None sorts last
        all.sort_by_key(|v| v.map_or((1, 0), |x| (0, x)));
        let unreached = all.iter().filter(|v| v.is_none()).count();
        let pairs = all.len();
        let diameter_norm = if unreached == 0 { all.last().copied().flatten() } else { None };
        let quantile_norms = QUANTILES.map(|p| {
            let rank = ((p * pairs as f64).ceil() as usize).clamp(1, pairs.max(1));
            all.get(rank - 1).copied().flatten()
        });
        DiameterProfile {
            space: self.space,
            n: self.n,
            q: self.q,
            points: self.points.len(),
            pairs,
            unreached,
            diameter_norm,
            quantile_norms,
            diameter_exponent: diameter_norm.and_then(|d| exponent(d, self.q)),
            quantile_exponents: quantile_norms.map(|v| v.and_then(|d| exponent(d, self.q))),
        }
    }
}

pub fn diameter_profile(space: Space, n: usize, q: u64, t_max: u64, budget: u128) -> Result<DiameterProfile> {
    Ok(distance_table(space, n, q, t_max, budget)?.profile())
}

/// Distance in `P_q` from `e = (1, 0)` to `(1, q/2)`. Every unit fixes
/// `q/2`, so `γ` must keep the second coordinate `≡ q/2`.
pub fn projective_bad_pair(q: u64, t_max: u64, budget: u128) -> Result<DistanceRecord> {
    if q < 2 || !q.is_multiple_of(2) {
        return Err(ActionError::InvalidInput(format!("q = {q} must be even")));
    }
    let e = PointP::new(q, &[1, 0])?;
    let x = PointP::new(q, &[1, (q / 2) as i64])?;
    dist_projective(&e, &x, t_max, budget)
}
