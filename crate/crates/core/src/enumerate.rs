//! Word enumeration and bulk classification, sequential or data-parallel.

use crate::consistency::Decision;
use crate::ctc1::ctc_semantics;
use crate::error::{Error, Result};
use crate::machines::{Family, MachineSpec, Outcome, Symbol};
use crate::rational::{one, two_thirds, zero, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Uses the rayon pool; falls back to sequential without the `parallel`
    /// feature.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Order-preserving map.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// All words of length at most `max_len`, shortest first, each length in
/// lexicographic order of the alphabet as given.
pub fn words(alphabet: &[Symbol], max_len: usize) -> Vec<Vec<Symbol>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w: &Vec<Symbol>| {
                alphabet.iter().map(move |&c| {
                    let mut v = w.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Decision and acceptance probability of one word under the machine's own
/// semantics: full CTC semantics for CTC machines, bounded error at 2/3 after
/// normalization for postselection machines, bounded error for plain ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordResult {
    pub decision: Decision,
    /// Minimum acceptance over the stationary set for CTC machines.
    pub acceptance: Rational,
}

fn bounded(accept: Rational, reject: &Rational) -> WordResult {
    let t = two_thirds();
    let decision = if accept >= t {
        Decision::Accept
    } else if *reject >= t {
        Decision::Reject
    } else {
        Decision::Undefined
    };
    WordResult { decision, acceptance: accept }
}

pub fn decide(m: &MachineSpec, word: &[Symbol]) -> Result<WordResult> {
    if m.is_ctc() {
        let v = ctc_semantics(m, word)?;
        return Ok(WordResult {
            decision: v.decision,
            acceptance: v.acceptance.min,
        });
    }
    if m.family() == Family::Branch {
        return Err(Error::MissingBit);
    }
    Ok(match m.run(word, None)? {
        Outcome::Post(p) => bounded(p.big_p_a, &p.big_p_r),
        Outcome::Plain(p) => bounded(p.p_accept, &p.p_reject),
        Outcome::Branch(_) => unreachable!("send-role machines handled above"),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub word: String,
    pub got: Decision,
    pub expected: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassifyReport {
    pub words: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub undefined: usize,
    pub mismatches: usize,
    /// First mismatch in enumeration order.
    pub first_mismatch: Option<Mismatch>,
    pub min_member_acceptance: Option<Rational>,
    pub max_nonmember_acceptance: Option<Rational>,
}

/// Compares the machine with `reference` on every word up to `max_len`. An
/// undefined verdict always counts as a mismatch.
pub fn classify<F>(m: &MachineSpec, max_len: usize, reference: F, exec: Exec) -> Result<ClassifyReport>
where
    F: Fn(&[Symbol]) -> bool + Sync + Send,
{
    let all = words(m.alphabet(), max_len);
    let results = map(exec, &all, |w| decide(m, w).map(|r| (reference(w), r)));
    let mut report = ClassifyReport {
        words: all.len(),
        accepted: 0,
        rejected: 0,
        undefined: 0,
        mismatches: 0,
        first_mismatch: None,
        min_member_acceptance: None,
        max_nonmember_acceptance: None,
    };
    for (w, r) in all.iter().zip(results) {
        let (expected, r) = r?;
        match r.decision {
            Decision::Accept => report.accepted += 1,
            Decision::Reject => report.rejected += 1,
            Decision::Undefined => report.undefined += 1,
        }
        let agrees = r.decision == if expected { Decision::Accept } else { Decision::Reject };
        if !agrees {
            report.mismatches += 1;
            report.first_mismatch.get_or_insert_with(|| Mismatch {
                word: w.iter().collect(),
                got: r.decision,
                expected,
            });
        }
        if expected {
            let lo = report.min_member_acceptance.get_or_insert_with(one);
            if r.acceptance < *lo {
                *lo = r.acceptance;
            }
        } else {
            let hi = report.max_nonmember_acceptance.get_or_insert_with(zero);
            if r.acceptance > *hi {
                *hi = r.acceptance;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn length_lex_order() {
        let w = words(&['a', 'b'], 2);
        let s: Vec<String> = w.iter().map(|w| w.iter().collect()).collect();
        assert_eq!(s, ["", "a", "b", "aa", "ab", "ba", "bb"]);
        assert_eq!(words(&['a', 'b'], 10).len(), 2047);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let m = MachineSpec::Pfa(zoo::build_leq_postpfa());
        let a = classify(&m, 6, zoo::is_leq, Exec::Sequential).unwrap();
        let b = classify(&m, 6, zoo::is_leq, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mismatches, 0);
    }

    #[test]
    fn corrupted_reference_reports_first_mismatch() {
        let m = MachineSpec::Pfa(zoo::build_leq_postpfa());
        let r = classify(&m, 4, |w: &[char]| !w.is_empty() && zoo::is_leq(w), Exec::default()).unwrap();
        assert_eq!(r.first_mismatch.unwrap().word, "");
        assert_eq!(r.mismatches, 1);
    }
}
