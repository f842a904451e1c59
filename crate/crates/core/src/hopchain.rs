//! Fixed-range channels: a long backward jump rewritten as a chain of hops
//! of constant delay `k`, and the consistency conditions along the chain.

use std::fmt;

use crate::consistency::{stationary, verdict, Bit, BitEvolution, BranchDecision, Dist2, StationarySet, Verdict};
use crate::error::{Error, Result};
use crate::rational::{one, zero, Rational};

/// Receive/send positions of each hop in the rewritten trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HopSchedule {
    pub k: usize,
    /// Instructions of the original program.
    pub instructions: usize,
    /// Length of the rewritten trace, up to and including the last send.
    pub total_length: usize,
    /// `(r_i, s_i)` for each hop.
    pub positions: Vec<(usize, usize)>,
    /// Program instructions each segment can hold.
    pub segments: Vec<usize>,
    /// No-ops appended to the last segment.
    pub padding: usize,
}

impl HopSchedule {
    pub fn hops(&self) -> usize {
        self.positions.len()
    }
}

fn capacity(k: usize, hops: usize) -> usize {
    match hops {
        1 => k - 1,
        n => 2 * (k - 2) + (n - 2) * (k - 3),
    }
}

/// Spreads `instructions` over hops that receive every `k - 1` instructions
/// and send `k` instructions after receiving. The first and last segments
/// hold `k - 2` instructions, intermediate ones `k - 3`; the last segment is
/// padded with no-ops.
pub fn trace_rewrite(instructions: usize, k: usize) -> Result<HopSchedule> {
    if k <= 3 {
        return Err(Error::DelayTooShort(k));
    }
    let mut hops = 1;
    while capacity(k, hops) < instructions {
        hops += 1;
    }
    let positions: Vec<(usize, usize)> = (0..hops)
        .map(|i| {
            let r = i * (k - 1);
            (r, r + k)
        })
        .collect();
    let segments = match hops {
        1 => vec![k - 1],
        n => {
            let mut s = vec![k - 2];
            s.extend(std::iter::repeat_n(k - 3, n - 2));
            s.push(k - 2);
            s
        }
    };
    Ok(HopSchedule {
        k,
        instructions,
        total_length: positions.last().expect("at least one hop").1 + 1,
        positions,
        segments,
        padding: capacity(k, hops) - instructions,
    })
}

/// Probability that a branch's final send is 0, or a nonhalting marker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SendProb {
    Halts(Rational),
    NonHalting,
}

/// Send behaviour indexed by the bit read at the start of the program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchSendProfile {
    pub p0_send0: SendProb,
    pub p1_send0: SendProb,
}

impl BranchSendProfile {
    pub fn halting(p0_send0: Rational, p1_send0: Rational) -> Result<Self> {
        for p in [&p0_send0, &p1_send0] {
            if !crate::rational::is_probability(p) {
                return Err(Error::InvalidSpec("send probabilities must lie in [0,1]".into()));
            }
        }
        Ok(BranchSendProfile {
            p0_send0: SendProb::Halts(p0_send0),
            p1_send0: SendProb::Halts(p1_send0),
        })
    }

    fn halting_pair(&self) -> Result<[&Rational; 2]> {
        match (&self.p0_send0, &self.p1_send0) {
            (SendProb::Halts(a), SendProb::Halts(b)) => Ok([a, b]),
            _ => Err(Error::NonHaltingProfile),
        }
    }

    /// Variable-length single jump: column `j` is the send distribution of
    /// the branch that read `j`.
    pub fn single_hop_evolution(&self) -> Result<BitEvolution> {
        let [p0, p1] = self.halting_pair()?;
        BitEvolution::new([[p0.clone(), p1.clone()], [one() - p0, one() - p1]])
    }
}

/// What one hop's consistency condition forced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HopConstraint {
    pub hop: usize,
    pub evolution: [BitEvolution; 2],
    /// Distribution the hop carries, per initial branch.
    pub carried: [Dist2; 2],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainAnalysis {
    /// Relay hops `N, N-1, ..., 2`, in the order they are resolved.
    pub relays: Vec<HopConstraint>,
    /// Branch-selecting hop `(r_1, s_1)`.
    pub first: BitEvolution,
    pub stationary: StationarySet,
}

impl fmt::Display for ChainAnalysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for h in &self.relays {
            writeln!(f, "hop {}: carries {} / {} (branch 0 / branch 1)", h.hop, h.carried[0], h.carried[1])?;
        }
        writeln!(f, "hop 1 evolution: {}", self.first)?;
        write!(f, "stationary: {}", self.stationary)
    }
}

/// A relay hop sends back whatever arrives from the later hop, independent
/// of what it received itself: its evolution has two equal columns, so its
/// only fixed point is that column.
fn relay(d: &Dist2) -> BitEvolution {
    let (p, q) = (d.p0().clone(), d.p1().clone());
    BitEvolution::new([[p.clone(), p], [q.clone(), q]]).expect("columns are the distribution d")
}

/// Imposes consistency hop by hop, from the last relay back to the
/// branch-selecting hop, and returns the first hop's stationary set.
pub fn hop_chain_analysis(profile: &BranchSendProfile, hops: usize) -> Result<ChainAnalysis> {
    if hops == 0 {
        return Err(Error::Usage("a chain needs at least one hop".into()));
    }
    let [p0, p1] = profile.halting_pair()?;
    let mut carried = [Dist2::with_p1(one() - p0)?, Dist2::with_p1(one() - p1)?];
    let mut relays = Vec::new();
    for hop in (2..=hops).rev() {
        let evolution = carried.clone().map(|d| relay(&d));
        carried = evolution.clone().map(|e| match stationary(&e) {
            StationarySet::Unique(d) => d,
            StationarySet::All => unreachable!("relay evolutions have rank one"),
        });
        relays.push(HopConstraint {
            hop,
            evolution,
            carried: carried.clone(),
        });
    }
    let [c0, c1] = &carried;
    let first = BitEvolution::new([
        [c0.p0().clone(), c1.p0().clone()],
        [c0.p1().clone(), c1.p1().clone()],
    ])?;
    Ok(ChainAnalysis {
        relays,
        stationary: stationary(&first),
        first,
    })
}

pub fn hop_chain_consistency(profile: &BranchSendProfile, hops: usize) -> Result<StationarySet> {
    Ok(hop_chain_analysis(profile, hops)?.stationary)
}

/// Branch 0 never halts; branch 1 halts, sending 0 with probability
/// `p1_send0` and accepting/rejecting with the given probabilities. The
/// evolution is `[[1, p1], [0, 1 - p1]]`, so `(1, 0)` is always stationary,
/// and there the machine neither accepts nor rejects.
pub fn with_infinite_branch_deciding(
    p1_send0: Rational,
    p1_accept: Rational,
    p1_reject: Rational,
) -> Result<(StationarySet, Verdict)> {
    let e = BitEvolution::new([[one(), p1_send0.clone()], [zero(), one() - &p1_send0]])?;
    let s = stationary(&e);
    let branches = [BranchDecision::new(zero(), zero())?, BranchDecision::new(p1_accept, p1_reject)?];
    let v = verdict(&s, &branches).with_evolution(e);
    Ok((s, v))
}

/// As [`with_infinite_branch_deciding`] with a branch 1 that accepts surely.
pub fn with_infinite_branch(p1_send0: Rational) -> Result<(StationarySet, Verdict)> {
    with_infinite_branch_deciding(p1_send0, one(), zero())
}

/// Whether the stationary set contains the point selecting the looping
/// branch.
pub fn selects_loop(s: &StationarySet) -> bool {
    s.contains(&Dist2::point(Bit::Zero))
}
