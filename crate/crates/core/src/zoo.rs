//! Concrete witness machines with reference membership predicates.

use std::collections::BTreeMap;

use crate::consistency::Bit;
use crate::dpda::{npda_branching2_to_ctc, DpdaSpec, Move, NpdaSpec};
use crate::error::{Error, Result};
use crate::format::Document;
use crate::machines::{table, BranchOutcome, LinearFaSpec, MachineSpec, PfaSpec, Role, State, Symbol, Transitions};
use crate::postselect::postselect_to_ctc;
use crate::rational::{int, one, ratio, zero, Rational};

fn diag_survival(keep: [Rational; 3]) -> Vec<Vec<Rational>> {
    // States A, R1, R2, D: each live state survives with its rate, the rest
    // falls into the dead state.
    let mut m = vec![vec![zero(); 4]; 4];
    for (i, k) in keep.into_iter().enumerate() {
        m[3][i] = one() - &k;
        m[i][i] = k;
    }
    m[3][3] = one();
    m
}

/// Postselection PFA for `{w in {a,b}* : |w|_a = |w|_b}`.
///
/// Three live branches start with weights 3/4 (A), 1/8 (R1), 1/8 (R2). A
/// survives each symbol with probability 1/64. R1 survives `a` with 1/4096
/// and `b` surely; R2 mirrors it. With `t = 64^(|w|_a - |w|_b)`,
/// `P_a = 6 / (6 + t + 1/t)`: 3/4 on members, at most 384/4481 otherwise.
pub fn build_leq_postpfa() -> PfaSpec {
    let states = vec![
        State::new("A", Role::PostAccept, true),
        State::new("R1", Role::PostReject, false),
        State::new("R2", Role::PostReject, false),
        State::new("D", Role::NonPost, false),
    ];
    let a = diag_survival([ratio(1, 64), ratio(1, 4096), one()]);
    let b = diag_survival([ratio(1, 64), one(), ratio(1, 4096)]);
    let end = diag_survival([one(), one(), one()]);
    let t = table(vec![('a', a), ('b', b), ('$', end)]).expect("square");
    PfaSpec::new(
        vec!['a', 'b'],
        states,
        vec![ratio(3, 4), ratio(1, 8), ratio(1, 8), zero()],
        Transitions::Plain(t),
    )
    .expect("valid L_eq machine")
}

/// Postselection linear machine for palindromes over `{a,b}`.
///
/// Components `(s, f, r, z)` start at `(1, 0, 0, 1)`; digit `d` (a=1, b=2)
/// updates `f <- 4f + d s`, `r <- r + d z`, `z <- 4z`, so `f` and `r` hold the
/// base-4 values of `w` and its reverse. The end-marker puts `s` on the
/// accept component and `2(f - r)` on the reject component.
pub fn build_lpal_postqfa() -> LinearFaSpec {
    let states = vec![
        State::new("s", Role::PostAccept, true),
        State::new("f", Role::PostReject, false),
        State::new("r", Role::NonPost, false),
        State::new("z", Role::NonPost, false),
    ];
    let digit = |d: i64| {
        vec![
            vec![int(1), int(0), int(0), int(0)],
            vec![int(d), int(4), int(0), int(0)],
            vec![int(0), int(0), int(1), int(d)],
            vec![int(0), int(0), int(0), int(4)],
        ]
    };
    let end = vec![
        vec![int(1), int(0), int(0), int(0)],
        vec![int(0), int(2), int(-2), int(0)],
        vec![int(0); 4],
        vec![int(0); 4],
    ];
    let t = table(vec![('a', digit(1)), ('b', digit(2)), ('$', end)]).expect("square");
    LinearFaSpec::new(
        vec!['a', 'b'],
        states,
        vec![int(1), int(0), int(0), int(1)],
        Transitions::Plain(t),
        int(6),
        None,
    )
    .expect("valid L_pal machine")
}

/// Branching-2 NPDA for `{a^i b^j c^k : i = j or i = k}`: one initial
/// epsilon choice between an `i = j` checker and an `i = k` checker.
pub fn build_union_ijk_npda() -> NpdaSpec {
    let names = ["start", "ij:a", "ij:b", "ij:c", "ik:a", "ik:b", "ik:c", "done"];
    let states: Vec<State> = names
        .iter()
        .map(|&n| State::new(n, Role::Normal, n == "done"))
        .collect();
    let q = |n: &str| names.iter().position(|&x| x == n).expect("known state");
    let mut moves: BTreeMap<(usize, Option<Symbol>, char), Vec<Move>> = BTreeMap::new();
    let mut add = |from: &str, input: Option<Symbol>, top: char, to: &str, push: &str| {
        moves.entry((q(from), input, top)).or_default().push(Move::new(q(to), push));
    };
    add("start", None, 'Z', "ij:a", "Z");
    add("start", None, 'Z', "ik:a", "Z");
    for p in ["ij:a", "ik:a"] {
        add(p, Some('a'), 'Z', p, "AZ");
        add(p, Some('a'), 'A', p, "AA");
    }
    // i = j: pop one A per b, then c's only with an empty stack.
    add("ij:a", Some('b'), 'A', "ij:b", "");
    add("ij:b", Some('b'), 'A', "ij:b", "");
    for p in ["ij:a", "ij:b", "ij:c"] {
        add(p, Some('c'), 'Z', "ij:c", "Z");
        add(p, Some('$'), 'Z', "done", "Z");
    }
    // i = k: skip b's, pop one A per c.
    for top in ['Z', 'A'] {
        let push = top.to_string();
        add("ik:a", Some('b'), top, "ik:b", &push);
        add("ik:b", Some('b'), top, "ik:b", &push);
    }
    for p in ["ik:a", "ik:b", "ik:c"] {
        add(p, Some('c'), 'A', "ik:c", "");
        add(p, Some('$'), 'Z', "done", "Z");
    }
    NpdaSpec::new(vec!['a', 'b', 'c'], vec!['Z', 'A'], 'Z', states, q("start"), moves, 2)
        .expect("valid union NPDA")
}

pub fn build_union_ijk_ctc_dpda() -> DpdaSpec {
    npda_branching2_to_ctc(&build_union_ijk_npda()).expect("branching 2")
}

/// CTC PFA that ignores its input and, with the bit fixed to `i`, ends with
/// the joint decision/send distribution `b_i`.
pub fn constant_ctc_pfa(alphabet: &[Symbol], b0: &BranchOutcome, b1: &BranchOutcome) -> Result<PfaSpec> {
    if [b0, b1].iter().any(|b| b.p_nonhalt != zero()) {
        return Err(Error::ProbabilisticNonHalting);
    }
    let states = vec![
        State::new("start", Role::Normal, false),
        State::new("acc/send0", Role::SendZero, true),
        State::new("acc/send1", Role::SendOne, true),
        State::new("rej/send0", Role::SendZero, false),
        State::new("rej/send1", Role::SendOne, false),
    ];
    let identity: Vec<Vec<Rational>> = (0..5)
        .map(|i| (0..5).map(|j| if i == j { one() } else { zero() }).collect())
        .collect();
    let end = |b: &BranchOutcome| {
        let mut m = identity.clone();
        m[0][0] = zero();
        for (i, p) in [&b.p_acc_send0, &b.p_acc_send1, &b.p_rej_send0, &b.p_rej_send1].into_iter().enumerate() {
            m[i + 1][0] = p.clone();
        }
        m
    };
    let build = |b: &BranchOutcome| {
        let mut entries: Vec<_> = alphabet.iter().map(|&c| (c, identity.clone())).collect();
        entries.push(('$', end(b)));
        table(entries)
    };
    let mut initial = vec![zero(); 5];
    initial[0] = one();
    PfaSpec::new(alphabet.to_vec(), states, initial, Transitions::Ctc([build(b0)?, build(b1)?]))
}

/// Bit 0: accept and send 1. Bit 1: reject and send 0.
pub fn grandfather() -> PfaSpec {
    constant_ctc_pfa(
        &['a'],
        &BranchOutcome::deterministic(true, Bit::One),
        &BranchOutcome::deterministic(false, Bit::Zero),
    )
    .expect("valid grandfather machine")
}

pub fn is_leq(w: &[Symbol]) -> bool {
    w.iter().filter(|&&c| c == 'a').count() == w.iter().filter(|&&c| c == 'b').count()
}

pub fn is_pal(w: &[Symbol]) -> bool {
    w.iter().eq(w.iter().rev())
}

pub fn is_union_ijk(w: &[Symbol]) -> bool {
    let run = |c: Symbol, from: usize| w[from..].iter().take_while(|&&x| x == c).count();
    let i = run('a', 0);
    let j = run('b', i);
    let k = run('c', i + j);
    i + j + k == w.len() && (i == j || i == k)
}

pub const CATALOG: &[(&str, &str)] = &[
    ("leq", "postselection PFA for equal numbers of a and b"),
    ("leq-ctc", "CTC PFA obtained from leq by the postselection-to-CTC conversion"),
    ("pal", "postselection linear machine for palindromes over {a,b}"),
    ("pal-ctc", "CTC linear machine obtained from pal"),
    ("union-ijk", "CTC DPDA for a^i b^j c^k with i = j or i = k"),
    ("union-ijk-npda", "branching-2 NPDA for the same language"),
    ("grandfather", "CTC PFA that sends back the negation of what it receives"),
];

pub fn build(name: &str) -> Result<Document> {
    Ok(match name {
        "leq" => Document::Machine(MachineSpec::Pfa(build_leq_postpfa())),
        "leq-ctc" => Document::Machine(postselect_to_ctc(&MachineSpec::Pfa(build_leq_postpfa()))?),
        "pal" => Document::Machine(MachineSpec::Linear(build_lpal_postqfa())),
        "pal-ctc" => Document::Machine(postselect_to_ctc(&MachineSpec::Linear(build_lpal_postqfa()))?),
        "union-ijk" => Document::Machine(MachineSpec::Dpda(build_union_ijk_ctc_dpda())),
        "union-ijk-npda" => Document::Npda(build_union_ijk_npda()),
        "grandfather" => Document::Machine(MachineSpec::Pfa(grandfather())),
        _ => return Err(Error::Usage(format!("unknown zoo machine {name:?}; try `zoo --list`"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::{Decision, Dist2, StationarySet};
    use crate::ctc1::ctc_semantics;
    use crate::machines::run_linear;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    /// Sums the weight of every surviving path branch by branch, the way one
    /// would by hand: weight times the product of per-symbol survival rates.
    fn leq_oracle(w: &[char]) -> (Rational, Rational) {
        let rate = |branch: usize, c: char| match (branch, c) {
            (0, _) => ratio(1, 64),
            (1, 'a') | (2, 'b') => ratio(1, 4096),
            _ => one(),
        };
        let weights = [ratio(3, 4), ratio(1, 8), ratio(1, 8)];
        let survive = |b: usize| w.iter().fold(weights[b].clone(), |acc, &c| acc * rate(b, c));
        (survive(0), survive(1) + survive(2))
    }

    #[test]
    fn leq_matches_oracle_and_closed_form() {
        let m = build_leq_postpfa();
        for w in ["", "a", "ab", "aab", "abba", "bbbaa", "aaaa"] {
            let w = chars(w);
            let o = m.run(&w, None).unwrap().into_post().unwrap();
            let (pa, pr) = leq_oracle(&w);
            assert_eq!((o.p_a.clone(), o.p_r.clone()), (pa, pr));
            let diff = w.iter().filter(|&&c| c == 'a').count() as i32 - w.iter().filter(|&&c| c == 'b').count() as i32;
            let t = num_traits::pow(ratio(64, 1), diff.unsigned_abs() as usize);
            let closed = int(6) / (int(6) + &t + one() / &t);
            assert_eq!(o.big_p_a, closed);
        }
        let ab = m.run(&chars("ab"), None).unwrap().into_post().unwrap();
        assert_eq!(ab.p_a, ratio(3, 4) * ratio(1, 4096));
        assert_eq!(ab.big_p_a, ratio(3, 4));
        let a = m.run(&chars("a"), None).unwrap().into_post().unwrap();
        assert_eq!(a.big_p_a, ratio(384, 4481));
    }

    #[test]
    fn lpal_examples() {
        let m = build_lpal_postqfa();
        assert_eq!(run_linear(&m, &chars("aba")).unwrap().big_p_a, int(1));
        assert_eq!(run_linear(&m, &chars("ab")).unwrap().big_p_a, ratio(1, 37));
        assert_eq!(run_linear(&m, &[]).unwrap().big_p_a, int(1));
    }

    #[test]
    fn union_examples() {
        let m = MachineSpec::Dpda(build_union_ijk_ctc_dpda());
        for (w, d) in [("aabbc", Decision::Accept), ("aabcc", Decision::Accept), ("aabbbccc", Decision::Reject)] {
            assert_eq!(ctc_semantics(&m, &chars(w)).unwrap().decision, d, "{w}");
        }
        let v = ctc_semantics(&m, &chars("aabbbccc")).unwrap();
        assert_eq!(v.stationary, StationarySet::Unique(Dist2::uniform()));
        assert!(ctc_semantics(&m, &chars("abc")).unwrap().evolution.unwrap().is_identity());
    }

    #[test]
    fn union_npda_reference_agrees() {
        let n = build_union_ijk_npda();
        for w in ["", "abc", "aabbc", "aabcc", "aabbbccc", "cba", "bc", "aaa", "abcc"] {
            let w = chars(w);
            let (accepted, truncated) = n.accepts_within(&w, 2, 200).unwrap();
            assert!(!truncated);
            assert_eq!(accepted, is_union_ijk(&w), "{w:?}");
        }
    }

    #[test]
    fn predicates() {
        assert!(is_union_ijk(&chars("")) && is_union_ijk(&chars("bbb")) && !is_union_ijk(&chars("acc")));
        assert!(is_union_ijk(&chars("ac")) && !is_union_ijk(&chars("aba")));
        assert!(is_pal(&chars("abba")) && !is_pal(&chars("ab")));
        assert!(is_leq(&chars("abab")) && !is_leq(&chars("aab")));
    }

    #[test]
    fn catalog_builds() {
        for (name, _) in CATALOG {
            build(name).unwrap();
        }
        assert!(build("nope").is_err());
    }
}
