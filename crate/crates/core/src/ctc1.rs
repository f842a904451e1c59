//! Acceptance semantics for machines with a one-bit CTC: run both bit
//! fixings, build the bit evolution, and quantify over its stationary set.

use num_traits::{One, Zero};

use crate::consistency::{
    evolution_from_branches, stationary, verdict, Bit, BranchDecision, Decision, Dist2, Verdict,
};
use crate::error::{Error, Result};
use crate::machines::{BranchOutcome, Family, MachineSpec, Symbol};

fn require_ctc(m: &MachineSpec) -> Result<()> {
    if !m.is_ctc() || m.family() != Family::Branch {
        return Err(Error::InvalidSpec(
            "CTC semantics needs a machine with CTC-indexed transitions and send roles".into(),
        ));
    }
    Ok(())
}

/// Both branch outcomes, bit 0 first.
pub fn branches(m: &MachineSpec, word: &[Symbol]) -> Result<[BranchOutcome; 2]> {
    require_ctc(m)?;
    let run = |bit| m.run(word, Some(bit))?.into_branch();
    Ok([run(Bit::Zero)?, run(Bit::One)?])
}

pub fn verdict_of_branches(b: &[BranchOutcome; 2]) -> Verdict {
    let e = evolution_from_branches(&b[0], &b[1]);
    let decisions = b.clone().map(|o| BranchDecision {
        accept: o.p_accept(),
        reject: o.p_reject(),
    });
    verdict(&stationary(&e), &decisions).with_evolution(e)
}

/// Full semantics. A nonhalting branch is only meaningful for pushdown
/// machines, where it is all-or-nothing; it sends nothing back, so the bit
/// keeps its value along that column of the evolution.
pub fn ctc_semantics(m: &MachineSpec, word: &[Symbol]) -> Result<Verdict> {
    let b = branches(m, word)?;
    if !matches!(m, MachineSpec::Dpda(_)) && b.iter().any(|o| !o.p_nonhalt.is_zero()) {
        return Err(Error::ProbabilisticNonHalting);
    }
    Ok(verdict_of_branches(&b))
}

/// Result of the two-run procedure for deterministic machines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoRun {
    pub decision: Decision,
    /// How many bit fixings were executed (1 or 2).
    pub runs: usize,
    /// The stationary distribution the procedure settled on; `None` when a
    /// nonhalting branch made the answer undefined.
    pub witness: Option<Dist2>,
}

enum Det {
    Halt { accept: bool, send: Bit },
    Loop,
}

fn deterministic_branch(m: &MachineSpec, word: &[Symbol], bit: Bit) -> Result<Det> {
    let o = m.run(word, Some(bit))?.into_branch()?;
    if o.p_nonhalt.is_one() {
        return Ok(Det::Loop);
    }
    let cells = [
        (&o.p_acc_send0, true, Bit::Zero),
        (&o.p_acc_send1, true, Bit::One),
        (&o.p_rej_send0, false, Bit::Zero),
        (&o.p_rej_send1, false, Bit::One),
    ];
    let found = cells.into_iter().find(|(p, _, _)| p.is_one());
    found
        .map(|(_, accept, send)| Det::Halt { accept, send })
        .ok_or_else(|| Error::Nondeterministic("branch outcome is not a point mass".into()))
}

fn decide(accept: bool) -> Decision {
    if accept {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

/// Runs with bit 0; if that run sends 0 the point (1,0) is stationary and its
/// decision stands. Otherwise the answer is the bit-1 run's decision: the
/// remaining candidates are (0,1) and (1/2,1/2), and under the latter the two
/// runs must agree for the input to have a defined verdict at all.
///
/// On inputs whose full verdict is undefined the procedure still returns the
/// bit-1 decision, as the original argument presupposes a defined verdict.
pub fn simulate_deterministic(m: &MachineSpec, word: &[Symbol]) -> Result<TwoRun> {
    require_ctc(m)?;
    let deterministic = match m {
        MachineSpec::Pfa(p) => p.is_deterministic(),
        MachineSpec::Dpda(_) => true,
        MachineSpec::Linear(_) => false,
    };
    if !deterministic {
        return Err(Error::Nondeterministic("two-run simulation needs a deterministic machine".into()));
    }
    let undefined = |runs| TwoRun {
        decision: Decision::Undefined,
        runs,
        witness: None,
    };
    match deterministic_branch(m, word, Bit::Zero)? {
        Det::Loop => return Ok(undefined(1)),
        Det::Halt { accept, send: Bit::Zero } => {
            return Ok(TwoRun {
                decision: decide(accept),
                runs: 1,
                witness: Some(Dist2::point(Bit::Zero)),
            })
        }
        Det::Halt { send: Bit::One, .. } => {}
    }
    match deterministic_branch(m, word, Bit::One)? {
        Det::Loop => Ok(undefined(2)),
        Det::Halt { accept, send } => Ok(TwoRun {
            decision: decide(accept),
            runs: 2,
            witness: Some(match send {
                Bit::One => Dist2::point(Bit::One),
                Bit::Zero => Dist2::uniform(),
            }),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::StationarySet;
    use crate::rational::{ratio, zero};
    use crate::zoo::{constant_ctc_pfa, grandfather};

    fn outcome(a0: (i64, i64), a1: (i64, i64), r0: (i64, i64), r1: (i64, i64)) -> BranchOutcome {
        BranchOutcome::new(ratio(a0.0, a0.1), ratio(a1.0, a1.1), ratio(r0.0, r0.1), ratio(r1.0, r1.1), zero()).unwrap()
    }

    #[test]
    fn worked_mixture_instance_is_undefined() {
        // bit 0: accept 3/4, send 1 w.p. 1/2; bit 1: accept 1/2, send 0 w.p. 1/4
        let b0 = outcome((1, 4), (1, 2), (1, 4), (0, 1));
        let b1 = outcome((1, 4), (1, 4), (0, 1), (1, 2));
        let m = MachineSpec::Pfa(constant_ctc_pfa(&['a'], &b0, &b1).unwrap());
        let v = ctc_semantics(&m, &['a']).unwrap();
        assert_eq!(v.stationary, StationarySet::Unique(Dist2::new(ratio(1, 3), ratio(2, 3)).unwrap()));
        assert_eq!(v.acceptance.min, ratio(7, 12));
        assert_eq!(v.rejection.min, ratio(5, 12));
        assert_eq!(v.decision, Decision::Undefined);
    }

    #[test]
    fn grandfather_is_undefined_at_half() {
        let m = MachineSpec::Pfa(grandfather());
        let v = ctc_semantics(&m, &[]).unwrap();
        assert_eq!(v.stationary, StationarySet::Unique(Dist2::uniform()));
        assert_eq!(v.acceptance.min, ratio(1, 2));
        assert_eq!(v.decision, Decision::Undefined);
    }

    #[test]
    fn report_bit_shape_accepts_at_two_thirds() {
        // accept & send 1 w.p. 1/2, reject & send 0 w.p. 1/4, else echo the bit
        let b0 = outcome((0, 1), (1, 2), (1, 2), (0, 1));
        let b1 = outcome((0, 1), (3, 4), (1, 4), (0, 1));
        let m = MachineSpec::Pfa(constant_ctc_pfa(&['a'], &b0, &b1).unwrap());
        let v = ctc_semantics(&m, &[]).unwrap();
        let e = v.evolution.clone().unwrap();
        assert_eq!(e.rows(), &[[ratio(1, 2), ratio(1, 4)], [ratio(1, 2), ratio(3, 4)]]);
        assert_eq!(v.acceptance.min, ratio(2, 3));
        assert_eq!(v.decision, Decision::Accept);
    }

    #[test]
    fn two_run_stages() {
        let acc0 = BranchOutcome::deterministic(true, Bit::Zero);
        let acc1 = BranchOutcome::deterministic(true, Bit::One);
        let rej0 = BranchOutcome::deterministic(false, Bit::Zero);
        let m = MachineSpec::Pfa(constant_ctc_pfa(&['a'], &acc0, &rej0).unwrap());
        let r = simulate_deterministic(&m, &[]).unwrap();
        assert_eq!((r.decision, r.runs), (Decision::Accept, 1));
        assert_eq!(r.witness, Some(Dist2::point(Bit::Zero)));

        let m = MachineSpec::Pfa(constant_ctc_pfa(&['a'], &acc1, &acc1).unwrap());
        let r = simulate_deterministic(&m, &[]).unwrap();
        assert_eq!((r.decision, r.runs), (Decision::Accept, 2));
        assert_eq!(r.witness, Some(Dist2::point(Bit::One)));
        assert_eq!(ctc_semantics(&m, &[]).unwrap().decision, Decision::Accept);

        // bit 0 sends 1, bit 1 sends 0, both accept: swap, (1/2,1/2)
        let m = MachineSpec::Pfa(constant_ctc_pfa(&['a'], &acc1, &acc0).unwrap());
        let r = simulate_deterministic(&m, &[]).unwrap();
        assert_eq!(r.witness, Some(Dist2::uniform()));
        assert_eq!(r.decision, ctc_semantics(&m, &[]).unwrap().decision);
    }

    #[test]
    fn relabeling_bits_preserves_verdict() {
        let b0 = outcome((1, 8), (1, 2), (1, 8), (1, 4));
        let b1 = outcome((1, 3), (1, 3), (0, 1), (1, 3));
        let swap = |o: &BranchOutcome| {
            BranchOutcome::new(
                o.p_acc_send1.clone(),
                o.p_acc_send0.clone(),
                o.p_rej_send1.clone(),
                o.p_rej_send0.clone(),
                zero(),
            )
            .unwrap()
        };
        let v = verdict_of_branches(&[b0.clone(), b1.clone()]);
        let w = verdict_of_branches(&[swap(&b1), swap(&b0)]);
        assert_eq!(v.decision, w.decision);
        assert_eq!(v.acceptance, w.acceptance);
        assert_eq!(v.evolution.unwrap().relabeled(), w.evolution.unwrap());
    }

    #[test]
    fn plain_machines_are_refused() {
        let m = MachineSpec::Pfa(crate::zoo::build_leq_postpfa());
        assert!(ctc_semantics(&m, &[]).is_err());
        assert!(simulate_deterministic(&m, &[]).is_err());
    }
}
