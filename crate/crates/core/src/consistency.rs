//! Two-state causal consistency: the column-stochastic dynamics of the CTC
//! bit, its fixed points, and bounded-error verdicts over those fixed points.
//!
//! Orientation: entry `(i, j)` of a [`BitEvolution`] is the probability that
//! bit value `i` is sent to the past given that `j` was received. Writing the
//! matrix as `[[1-a, b], [a, 1-b]]`, `a` is the flip probability of the
//! 0-branch and `b` the flip probability of the 1-branch.

use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machines::BranchOutcome;
use crate::rational::{self, one, two_thirds, zero, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Bit {
    Zero,
    One,
}

impl From<Bit> for u8 {
    fn from(b: Bit) -> u8 {
        b as u8
    }
}

impl TryFrom<u8> for Bit {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Bit, String> {
        match v {
            0 => Ok(Bit::Zero),
            1 => Ok(Bit::One),
            _ => Err(format!("bit must be 0 or 1, got {v}")),
        }
    }
}

impl Bit {
    pub const BOTH: [Bit; 2] = [Bit::Zero, Bit::One];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Bit {
        if i == 0 {
            Bit::Zero
        } else {
            Bit::One
        }
    }

    pub fn flip(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// A distribution over the CTC bit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dist2 {
    p0: Rational,
    p1: Rational,
}

impl Dist2 {
    pub fn new(p0: Rational, p1: Rational) -> Result<Self> {
        if !rational::is_probability(&p0) || !rational::is_probability(&p1) || &p0 + &p1 != one() {
            return Err(Error::InvalidSpec(format!(
                "({}, {}) is not a distribution over one bit",
                rational::format(&p0),
                rational::format(&p1)
            )));
        }
        Ok(Dist2 { p0, p1 })
    }

    /// `(1 - p1, p1)`.
    pub fn with_p1(p1: Rational) -> Result<Self> {
        Dist2::new(one() - &p1, p1)
    }

    pub fn point(bit: Bit) -> Self {
        match bit {
            Bit::Zero => Dist2 { p0: one(), p1: zero() },
            Bit::One => Dist2 { p0: zero(), p1: one() },
        }
    }

    pub fn uniform() -> Self {
        Dist2 {
            p0: rational::half(),
            p1: rational::half(),
        }
    }

    pub fn p0(&self) -> &Rational {
        &self.p0
    }

    pub fn p1(&self) -> &Rational {
        &self.p1
    }

    pub fn get(&self, bit: Bit) -> &Rational {
        match bit {
            Bit::Zero => &self.p0,
            Bit::One => &self.p1,
        }
    }

    /// Exchange the roles of the two bit values.
    pub fn swapped(&self) -> Self {
        Dist2 {
            p0: self.p1.clone(),
            p1: self.p0.clone(),
        }
    }
}

impl fmt::Display for Dist2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", rational::format(&self.p0), rational::format(&self.p1))
    }
}

/// The 2x2 column-stochastic map the computation induces on the CTC bit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitEvolution {
    m: [[Rational; 2]; 2],
}

impl BitEvolution {
    pub fn new(m: [[Rational; 2]; 2]) -> Result<Self> {
        for j in 0..2 {
            for row in &m {
                if !rational::is_probability(&row[j]) {
                    return Err(Error::InvalidSpec(format!(
                        "evolution entry {} outside [0,1]",
                        rational::format(&row[j])
                    )));
                }
            }
            if &m[0][j] + &m[1][j] != one() {
                return Err(Error::InvalidSpec(format!("evolution column {j} does not sum to 1")));
            }
        }
        Ok(BitEvolution { m })
    }

    /// `[[1-a, b], [a, 1-b]]`.
    pub fn from_flips(a: Rational, b: Rational) -> Result<Self> {
        BitEvolution::new([[one() - &a, b.clone()], [a, one() - b]])
    }

    pub fn identity() -> Self {
        BitEvolution {
            m: [[one(), zero()], [zero(), one()]],
        }
    }

    pub fn from_rows(rows: &[Vec<Rational>]) -> Result<Self> {
        if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
            return Err(Error::Parse("bit evolution must be a 2x2 matrix".into()));
        }
        BitEvolution::new([
            [rows[0][0].clone(), rows[0][1].clone()],
            [rows[1][0].clone(), rows[1][1].clone()],
        ])
    }

    pub fn entry(&self, sent: Bit, received: Bit) -> &Rational {
        &self.m[sent.index()][received.index()]
    }

    pub fn rows(&self) -> &[[Rational; 2]; 2] {
        &self.m
    }

    /// Probability the 0-branch sends 1.
    pub fn flip0(&self) -> &Rational {
        &self.m[1][0]
    }

    /// Probability the 1-branch sends 0.
    pub fn flip1(&self) -> &Rational {
        &self.m[0][1]
    }

    pub fn is_identity(&self) -> bool {
        self.flip0().is_zero() && self.flip1().is_zero()
    }

    pub fn apply(&self, d: &Dist2) -> Dist2 {
        let p0 = &self.m[0][0] * d.p0() + &self.m[0][1] * d.p1();
        let p1 = &self.m[1][0] * d.p0() + &self.m[1][1] * d.p1();
        Dist2 { p0, p1 }
    }

    /// Conjugate by the bit relabeling 0 <-> 1.
    pub fn relabeled(&self) -> Self {
        let m = &self.m;
        BitEvolution {
            m: [[m[1][1].clone(), m[1][0].clone()], [m[0][1].clone(), m[0][0].clone()]],
        }
    }
}

impl fmt::Display for BitEvolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = |i: usize| {
            format!(
                "[{}, {}]",
                rational::format(&self.m[i][0]),
                rational::format(&self.m[i][1])
            )
        };
        write!(f, "[{}, {}]", r(0), r(1))
    }
}

/// Column 0 comes from the run with the bit fixed to 0, column 1 from the run
/// with the bit fixed to 1. Nonhalting mass assigns nothing, so it leaves the
/// bit where it was.
pub fn evolution_from_branches(b0: &BranchOutcome, b1: &BranchOutcome) -> BitEvolution {
    BitEvolution::from_flips(b0.p_send(Bit::One), b1.p_send(Bit::Zero))
        .expect("branch outcomes are distributions")
}

/// Fixed points of a bit evolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StationarySet {
    Unique(Dist2),
    /// Every distribution is stationary (the evolution is the identity).
    All,
}

impl StationarySet {
    /// The distributions a verdict must be checked at. For `All` the two
    /// extremes suffice because acceptance is affine in the distribution.
    pub fn extremes(&self) -> Vec<Dist2> {
        match self {
            StationarySet::Unique(d) => vec![d.clone()],
            StationarySet::All => vec![Dist2::point(Bit::Zero), Dist2::point(Bit::One)],
        }
    }

    pub fn contains(&self, d: &Dist2) -> bool {
        match self {
            StationarySet::Unique(u) => u == d,
            StationarySet::All => true,
        }
    }
}

impl fmt::Display for StationarySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StationarySet::Unique(d) => write!(f, "{d}"),
            StationarySet::All => f.write_str("all distributions"),
        }
    }
}

pub fn stationary(e: &BitEvolution) -> StationarySet {
    let a = e.flip0();
    let b = e.flip1();
    if a.is_zero() && b.is_zero() {
        return StationarySet::All;
    }
    let total = a + b;
    StationarySet::Unique(Dist2 {
        p0: b / &total,
        p1: a / &total,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Reject,
    Undefined,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
            Decision::Undefined => "undefined",
        })
    }
}

/// Closed interval of probabilities attained over a stationary set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub min: Rational,
    pub max: Rational,
}

impl Bounds {
    fn over(values: impl IntoIterator<Item = Rational>) -> Bounds {
        let mut it = values.into_iter();
        let first = it.next().expect("stationary sets are never empty");
        let (min, max) = it.fold((first.clone(), first), |(lo, hi), v| {
            (if v < lo { v.clone() } else { lo }, if v > hi { v } else { hi })
        });
        Bounds { min, max }
    }

    pub fn contains(&self, q: &Rational) -> bool {
        &self.min <= q && q <= &self.max
    }
}

/// Per-branch decision probabilities. `accept + reject <= 1`; the rest is
/// nonhalting mass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchDecision {
    pub accept: Rational,
    pub reject: Rational,
}

impl BranchDecision {
    pub fn new(accept: Rational, reject: Rational) -> Result<Self> {
        if !rational::is_probability(&accept) || !rational::is_probability(&reject) || &accept + &reject > one() {
            return Err(Error::InvalidSpec("branch accept + reject must lie in [0,1]".into()));
        }
        Ok(BranchDecision { accept, reject })
    }
}

/// A bounded-error verdict with the intermediate objects that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub decision: Decision,
    pub stationary: StationarySet,
    pub acceptance: Bounds,
    pub rejection: Bounds,
    /// Present when the verdict came from running a machine.
    pub evolution: Option<BitEvolution>,
}

impl Verdict {
    pub fn with_evolution(mut self, e: BitEvolution) -> Self {
        self.evolution = Some(e);
        self
    }
}

pub fn acceptance_at(d: &Dist2, branches: &[BranchDecision; 2]) -> Rational {
    d.p0() * &branches[0].accept + d.p1() * &branches[1].accept
}

pub fn rejection_at(d: &Dist2, branches: &[BranchDecision; 2]) -> Rational {
    d.p0() * &branches[0].reject + d.p1() * &branches[1].reject
}

/// Accept iff every stationary distribution accepts with probability at least
/// 2/3, reject iff every one rejects with probability at least 2/3.
pub fn verdict(s: &StationarySet, branches: &[BranchDecision; 2]) -> Verdict {
    let points = s.extremes();
    let acceptance = Bounds::over(points.iter().map(|d| acceptance_at(d, branches)));
    let rejection = Bounds::over(points.iter().map(|d| rejection_at(d, branches)));
    let threshold = two_thirds();
    let decision = if acceptance.min >= threshold {
        Decision::Accept
    } else if rejection.min >= threshold {
        Decision::Reject
    } else {
        Decision::Undefined
    };
    Verdict {
        decision,
        stationary: s.clone(),
        acceptance,
        rejection,
        evolution: None,
    }
}

/// Convenience form taking the four branch probabilities directly.
pub fn verdict_from(
    s: &StationarySet,
    acc0: Rational,
    rej0: Rational,
    acc1: Rational,
    rej1: Rational,
) -> Result<Verdict> {
    let branches = [BranchDecision::new(acc0, rej0)?, BranchDecision::new(acc1, rej1)?];
    Ok(verdict(s, &branches))
}
