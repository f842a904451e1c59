//! Deterministic pushdown automata, optionally with CTC-indexed moves.
//!
//! Conventions:
//! * The input is followed by the end-marker `$`, read like any other symbol.
//! * Each move pops the top symbol and pushes a string whose first character
//!   becomes the new top. The bottom marker is never popped: a move reading
//!   it must push a string ending in it.
//! * Acceptance is by final state. A run halts once the end-marker has been
//!   consumed and no move applies; if no move applies earlier the run is
//!   blocked.

use std::collections::{BTreeMap, BTreeSet};

use crate::consistency::Bit;
use crate::error::{Error, Result};
use crate::machines::{self, family_of, BranchOutcome, Family, Outcome, PlainOutcome, Role, State, Symbol, END_MARKER};
use crate::rational::{one, zero};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Move {
    pub to: usize,
    /// Replacement for the popped top; first character is the new top.
    pub push: Vec<char>,
}

impl Move {
    pub fn new(to: usize, push: &str) -> Self {
        Move {
            to,
            push: push.chars().collect(),
        }
    }
}

/// `input = None` is an epsilon move; `bit = None` applies to both bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MoveKey {
    pub state: usize,
    pub input: Option<Symbol>,
    pub top: char,
    pub bit: Option<Bit>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DpdaSpec {
    alphabet: Vec<Symbol>,
    stack_alphabet: Vec<char>,
    bottom: char,
    states: Vec<State>,
    initial: usize,
    ctc: bool,
    moves: BTreeMap<MoveKey, Move>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    Halted { state: usize },
    NonHalting,
    Blocked { state: usize, position: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DpdaRun {
    pub outcome: RunOutcome,
    pub steps_used: usize,
}

fn check_push(bottom: char, stack_alphabet: &[char], top: char, push: &[char]) -> Result<()> {
    if let Some(c) = push.iter().find(|c| !stack_alphabet.contains(c)) {
        return Err(Error::InvalidSpec(format!("pushed symbol {c:?} is not a stack symbol")));
    }
    let bottoms = push.iter().filter(|&&c| c == bottom).count();
    let ok = if top == bottom {
        bottoms == 1 && push.last() == Some(&bottom)
    } else {
        bottoms == 0
    };
    if !ok {
        return Err(Error::InvalidSpec(format!(
            "move on top {top:?} pushing {:?} would pop or duplicate the bottom marker",
            push.iter().collect::<String>()
        )));
    }
    Ok(())
}

fn check_common(
    alphabet: &[Symbol],
    stack_alphabet: &[char],
    bottom: char,
    states: &[State],
    initial: usize,
) -> Result<()> {
    machines::validate_alphabet(alphabet)?;
    machines::validate_states(states)?;
    if !stack_alphabet.contains(&bottom) {
        return Err(Error::InvalidSpec("bottom marker must be a stack symbol".into()));
    }
    if initial >= states.len() {
        return Err(Error::InvalidSpec("initial state out of range".into()));
    }
    if family_of(states)? == Family::Post {
        return Err(Error::RoleViolation("pushdown machines do not support postselection roles".into()));
    }
    Ok(())
}

fn check_key(
    alphabet: &[Symbol],
    stack_alphabet: &[char],
    n_states: usize,
    state: usize,
    input: Option<Symbol>,
    top: char,
    to: usize,
) -> Result<()> {
    if state >= n_states || to >= n_states {
        return Err(Error::InvalidSpec("move refers to an unknown state".into()));
    }
    if let Some(c) = input {
        if c != END_MARKER && !alphabet.contains(&c) {
            return Err(Error::InvalidSpec(format!("move reads unknown symbol {c:?}")));
        }
    }
    if !stack_alphabet.contains(&top) {
        return Err(Error::InvalidSpec(format!("move reads unknown stack symbol {top:?}")));
    }
    Ok(())
}

impl DpdaSpec {
    pub fn new(
        alphabet: Vec<Symbol>,
        stack_alphabet: Vec<char>,
        bottom: char,
        states: Vec<State>,
        initial: usize,
        ctc: bool,
        moves: BTreeMap<MoveKey, Move>,
    ) -> Result<Self> {
        check_common(&alphabet, &stack_alphabet, bottom, &states, initial)?;
        for (k, mv) in &moves {
            check_key(&alphabet, &stack_alphabet, states.len(), k.state, k.input, k.top, mv.to)?;
            check_push(bottom, &stack_alphabet, k.top, &mv.push)?;
            if k.bit.is_some() && !ctc {
                return Err(Error::UnexpectedBit);
            }
        }
        let spec = DpdaSpec {
            alphabet,
            stack_alphabet,
            bottom,
            states,
            initial,
            ctc,
            moves,
        };
        spec.check_determinism()?;
        let family = family_of(&spec.states)?;
        if ctc && family != Family::Branch {
            return Err(Error::RoleViolation("CTC-indexed machines must end in send-role states".into()));
        }
        if family == Family::Branch {
            spec.check_send_entry()?;
        }
        Ok(spec)
    }

    fn bits(&self) -> Vec<Option<Bit>> {
        if self.ctc {
            vec![Some(Bit::Zero), Some(Bit::One)]
        } else {
            vec![None]
        }
    }

    fn check_determinism(&self) -> Result<()> {
        for k in self.moves.keys() {
            if k.bit.is_some() {
                let shared = MoveKey { bit: None, ..*k };
                if self.moves.contains_key(&shared) {
                    return Err(Error::Nondeterministic(format!(
                        "state {:?} has both a shared and a bit-specific move on the same input",
                        self.states[k.state].name
                    )));
                }
            }
        }
        for bit in self.bits() {
            for (q, state) in self.states.iter().enumerate() {
                for &top in &self.stack_alphabet {
                    if self.lookup(q, None, top, bit).is_none() {
                        continue;
                    }
                    let reads = self
                        .alphabet
                        .iter()
                        .chain([&END_MARKER])
                        .any(|&c| self.lookup(q, Some(c), top, bit).is_some());
                    if reads {
                        return Err(Error::Nondeterministic(format!(
                            "state {:?} with top {top:?} has both an epsilon move and a reading move",
                            state.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Send states may only be entered once the end-marker has been read,
    /// and they are terminal.
    fn check_send_entry(&self) -> Result<()> {
        let sends = |q: usize| self.states[q].role.sends().is_some();
        let mut before = BTreeSet::from([self.initial]);
        loop {
            let grown: Vec<usize> = self
                .moves
                .iter()
                .filter(|(k, _)| before.contains(&k.state) && k.input != Some(END_MARKER))
                .map(|(_, m)| m.to)
                .filter(|to| !before.contains(to))
                .collect();
            if grown.is_empty() {
                break;
            }
            before.extend(grown);
        }
        if let Some(&q) = before.iter().find(|&&q| sends(q)) {
            return Err(Error::RoleViolation(format!(
                "send state {:?} can be entered before the end-marker",
                self.states[q].name
            )));
        }
        if let Some(k) = self.moves.keys().find(|k| sends(k.state)) {
            return Err(Error::RoleViolation(format!(
                "send state {:?} has outgoing moves",
                self.states[k.state].name
            )));
        }
        Ok(())
    }

    pub fn alphabet(&self) -> &[Symbol] {
        &self.alphabet
    }

    pub fn stack_alphabet(&self) -> &[char] {
        &self.stack_alphabet
    }

    pub fn bottom(&self) -> char {
        self.bottom
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn is_ctc(&self) -> bool {
        self.ctc
    }

    pub fn moves(&self) -> &BTreeMap<MoveKey, Move> {
        &self.moves
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    fn lookup(&self, state: usize, input: Option<Symbol>, top: char, bit: Option<Bit>) -> Option<&Move> {
        let key = MoveKey {
            state,
            input,
            top,
            bit: None,
        };
        self.moves
            .get(&key)
            .or_else(|| bit.and_then(|b| self.moves.get(&MoveKey { bit: Some(b), ..key })))
    }

    pub fn default_budget(&self, word_len: usize) -> usize {
        10 * (word_len + 1) * self.states.len() * self.stack_alphabet.len()
    }

    pub fn run(&self, word: &[Symbol], bit: Option<Bit>) -> Result<DpdaRun> {
        self.run_with_budget(word, bit, self.default_budget(word.len()))
    }

    pub fn run_with_budget(&self, word: &[Symbol], bit: Option<Bit>, budget: usize) -> Result<DpdaRun> {
        machines::check_word(&self.alphabet, word)?;
        match (self.ctc, bit) {
            (true, None) => return Err(Error::MissingBit),
            (false, Some(_)) => return Err(Error::UnexpectedBit),
            _ => {}
        }
        let input: Vec<Symbol> = word.iter().copied().chain([END_MARKER]).collect();
        let mut state = self.initial;
        let mut pos = 0;
        let mut stack = vec![self.bottom];
        // (state, top, height) for the epsilon configurations since the last
        // read, restricted to those whose stack below `height` is untouched.
        let mut guard: Vec<(usize, char, usize)> = Vec::new();
        let mut steps = 0;
        let finish = |outcome, steps_used| Ok(DpdaRun { outcome, steps_used });
        loop {
            if steps >= budget {
                return finish(RunOutcome::NonHalting, steps);
            }
            let top = *stack.last().expect("bottom marker is never popped");
            let height = stack.len();
            if let Some(mv) = self.lookup(state, None, top, bit) {
                while guard.last().is_some_and(|&(_, _, h)| h > height) {
                    guard.pop();
                }
                if guard.iter().any(|&(q, t, _)| q == state && t == top) {
                    return finish(RunOutcome::NonHalting, steps);
                }
                guard.push((state, top, height));
                stack.pop();
                stack.extend(mv.push.iter().rev());
                state = mv.to;
                steps += 1;
                continue;
            }
            if pos == input.len() {
                return finish(RunOutcome::Halted { state }, steps);
            }
            match self.lookup(state, Some(input[pos]), top, bit) {
                Some(mv) => {
                    stack.pop();
                    stack.extend(mv.push.iter().rev());
                    state = mv.to;
                    pos += 1;
                    steps += 1;
                    guard.clear();
                }
                None => return finish(RunOutcome::Blocked { state, position: pos }, steps),
            }
        }
    }

    /// Plain machines accept by halting in an accepting state; blocked and
    /// nonhalting runs reject.
    pub fn accepts(&self, word: &[Symbol]) -> Result<bool> {
        Ok(match self.run(word, None)?.outcome {
            RunOutcome::Halted { state } => self.states[state].accepting,
            _ => false,
        })
    }

    pub fn outcome(&self, word: &[Symbol], bit: Option<Bit>) -> Result<Outcome> {
        let run = self.run(word, bit)?;
        match family_of(&self.states)? {
            Family::Branch => match run.outcome {
                RunOutcome::Halted { state } => {
                    let s = &self.states[state];
                    let send = s.role.sends().ok_or_else(|| {
                        Error::RoleViolation(format!("run halted in non-send state {:?}", s.name))
                    })?;
                    Ok(Outcome::Branch(BranchOutcome::deterministic(s.accepting, send)))
                }
                RunOutcome::NonHalting => Ok(Outcome::Branch(BranchOutcome::nonhalting())),
                RunOutcome::Blocked { state, position } => Err(Error::Blocked {
                    state: self.states[state].name.clone(),
                    position,
                }),
            },
            _ => {
                let accept = matches!(run.outcome, RunOutcome::Halted { state } if self.states[state].accepting);
                Ok(Outcome::Plain(if accept {
                    PlainOutcome { p_accept: one(), p_reject: zero() }
                } else {
                    PlainOutcome { p_accept: zero(), p_reject: one() }
                }))
            }
        }
    }

    /// Plain machine with the bit fixed and a new accepting set.
    fn fixing(&self, bit: Bit, accepting: impl Fn(&State) -> bool) -> Result<DpdaSpec> {
        if !self.ctc {
            return Err(Error::InvalidSpec("machine has no CTC-indexed moves".into()));
        }
        let states = self
            .states
            .iter()
            .map(|s| State::new(s.name.clone(), Role::Normal, accepting(s)))
            .collect();
        let moves = self
            .moves
            .iter()
            .filter(|(k, _)| k.bit.is_none() || k.bit == Some(bit))
            .map(|(k, m)| (MoveKey { bit: None, ..*k }, m.clone()))
            .collect();
        DpdaSpec::new(
            self.alphabet.clone(),
            self.stack_alphabet.clone(),
            self.bottom,
            states,
            self.initial,
            false,
            moves,
        )
    }
}

/// Splits a CTC pushdown machine into three plain DPDAs with
/// `L = L1 ∪ (L2 ∩ L3)`:
/// * `A1`: bit 0, accept iff the run ends in an accepting send-0 state;
/// * `A2`: bit 0, accept iff the run ends in any send-1 state;
/// * `A3`: bit 1, original accepting states.
pub fn decompose_ctc_dpda(spec: &DpdaSpec) -> Result<(DpdaSpec, DpdaSpec, DpdaSpec)> {
    let a1 = spec.fixing(Bit::Zero, |s| s.role == Role::SendZero && s.accepting)?;
    let a2 = spec.fixing(Bit::Zero, |s| s.role == Role::SendOne)?;
    let a3 = spec.fixing(Bit::One, |s| s.accepting)?;
    Ok((a1, a2, a3))
}

pub fn run_dpda(spec: &DpdaSpec, word: &[Symbol], bit: Option<Bit>) -> Result<DpdaRun> {
    spec.run(word, bit)
}

/// Nondeterministic pushdown automaton with a declared branching bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NpdaSpec {
    alphabet: Vec<Symbol>,
    stack_alphabet: Vec<char>,
    bottom: char,
    states: Vec<State>,
    initial: usize,
    moves: BTreeMap<(usize, Option<Symbol>, char), Vec<Move>>,
    branching: u64,
}

impl NpdaSpec {
    pub fn new(
        alphabet: Vec<Symbol>,
        stack_alphabet: Vec<char>,
        bottom: char,
        states: Vec<State>,
        initial: usize,
        moves: BTreeMap<(usize, Option<Symbol>, char), Vec<Move>>,
        branching: u64,
    ) -> Result<Self> {
        check_common(&alphabet, &stack_alphabet, bottom, &states, initial)?;
        if family_of(&states)? != Family::Plain {
            return Err(Error::RoleViolation("nondeterministic machines use plain roles".into()));
        }
        for (&(q, input, top), targets) in &moves {
            for mv in targets {
                check_key(&alphabet, &stack_alphabet, states.len(), q, input, top, mv.to)?;
                check_push(bottom, &stack_alphabet, top, &mv.push)?;
            }
        }
        let spec = NpdaSpec {
            alphabet,
            stack_alphabet,
            bottom,
            states,
            initial,
            moves,
            branching,
        };
        let max = spec.max_move_branching();
        if branching != max {
            return Err(Error::InvalidSpec(format!(
                "declared branching {branching} differs from the maximum per-move branching {max}"
            )));
        }
        Ok(spec)
    }

    pub fn alphabet(&self) -> &[Symbol] {
        &self.alphabet
    }

    pub fn stack_alphabet(&self) -> &[char] {
        &self.stack_alphabet
    }

    pub fn bottom(&self) -> char {
        self.bottom
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn branching(&self) -> u64 {
        self.branching
    }

    pub fn moves(&self) -> &BTreeMap<(usize, Option<Symbol>, char), Vec<Move>> {
        &self.moves
    }

    /// Applicable moves in a fixed order: epsilon moves first, then moves
    /// reading `next`. `true` marks a move that consumes input.
    pub fn applicable(&self, state: usize, next: Option<Symbol>, top: char) -> Vec<(&Move, bool)> {
        let eps = self.moves.get(&(state, None, top)).into_iter().flatten().map(|m| (m, false));
        let reads = next
            .and_then(|c| self.moves.get(&(state, Some(c), top)))
            .into_iter()
            .flatten()
            .map(|m| (m, true));
        eps.chain(reads).collect()
    }

    fn max_move_branching(&self) -> u64 {
        let mut max = 1;
        for q in 0..self.states.len() {
            for &top in &self.stack_alphabet {
                let lookaheads = self.alphabet.iter().chain([&END_MARKER]).map(|&c| Some(c)).chain([None]);
                for next in lookaheads {
                    max = max.max(self.applicable(q, next, top).len() as u64);
                }
            }
        }
        max
    }

    /// Brute-force membership: is there an accepting halting path whose
    /// branching (product of per-move successor counts) is at most
    /// `max_branching`? Paths longer than `path_budget` moves are cut off;
    /// the second component reports whether that happened.
    pub fn accepts_within(&self, word: &[Symbol], max_branching: u64, path_budget: usize) -> Result<(bool, bool)> {
        machines::check_word(&self.alphabet, word)?;
        let input: Vec<Symbol> = word.iter().copied().chain([END_MARKER]).collect();
        let mut truncated = false;
        let mut frontier = vec![(self.initial, 0usize, vec![self.bottom], 1u64, 0usize)];
        let mut seen = BTreeSet::new();
        while let Some((q, pos, stack, branching, depth)) = frontier.pop() {
            if !seen.insert((q, pos, stack.clone(), branching)) {
                continue;
            }
            let top = *stack.last().expect("bottom marker is never popped");
            let moves = self.applicable(q, input.get(pos).copied(), top);
            if moves.is_empty() {
                if pos == input.len() && self.states[q].accepting {
                    return Ok((true, truncated));
                }
                continue;
            }
            if depth >= path_budget {
                truncated = true;
                continue;
            }
            let next_branching = branching * moves.len() as u64;
            if next_branching > max_branching {
                continue;
            }
            for (mv, reads) in moves {
                let mut s = stack.clone();
                s.pop();
                s.extend(mv.push.iter().rev());
                frontier.push((mv.to, pos + usize::from(reads), s, next_branching, depth + 1));
            }
        }
        Ok((false, truncated))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Lookahead {
    Empty,
    Sym(Symbol),
    Done,
}

/// Compiles a branching-2 NPDA into a CTC pushdown machine that follows move
/// `i` of the first binary choice when the CTC bit reads `i`.
///
/// Paths that would branch a second time, take a move with three or more
/// successors, or get stuck are diverted to a scan-to-end-and-reject state.
/// Because a DPDA cannot test for an epsilon move and a reading move at once,
/// the compiled machine first buffers the next input symbol in its finite
/// control and then simulates the NPDA moves as epsilon moves.
///
/// At the end the machine sends back its current branch name if it accepts
/// and the other branch name if it rejects.
pub fn npda_branching2_to_ctc(n: &NpdaSpec) -> Result<DpdaSpec> {
    if n.branching > 2 {
        return Err(Error::BranchingExceeded(n.branching));
    }
    let symbols: Vec<Symbol> = n.alphabet.iter().copied().chain([END_MARKER]).collect();
    let lookaheads: Vec<Lookahead> = [Lookahead::Empty]
        .into_iter()
        .chain(symbols.iter().map(|&c| Lookahead::Sym(c)))
        .chain([Lookahead::Done])
        .collect();

    let mut states = Vec::new();
    let mut sim = BTreeMap::new();
    for (q, s) in n.states.iter().enumerate() {
        for chosen in [false, true] {
            for &la in &lookaheads {
                let la_name = match la {
                    Lookahead::Empty => "_".to_string(),
                    Lookahead::Sym(c) => c.to_string(),
                    Lookahead::Done => "end".to_string(),
                };
                sim.insert((q, chosen, la), states.len());
                states.push(State::new(format!("{}|{}|{}", s.name, u8::from(chosen), la_name), Role::Normal, false));
            }
        }
    }
    let dead_scan = states.len();
    states.push(State::new("dead", Role::Normal, false));
    let dead_done = states.len();
    states.push(State::new("dead|end", Role::Normal, false));
    let fin = |accept: bool, send: Bit| dead_done + 1 + 2 * usize::from(!accept) + send.index();
    for accept in [true, false] {
        for send in Bit::BOTH {
            let name = format!("{}/send{}", if accept { "acc" } else { "rej" }, send);
            states.push(State::new(name, Role::send(send), accept));
        }
    }

    let mut moves = BTreeMap::new();
    let keep = |top: char| vec![top];
    for &top in &n.stack_alphabet {
        let mut add = |state: usize, input: Option<Symbol>, bit: Option<Bit>, mv: Move| {
            moves.insert(MoveKey { state, input, top, bit }, mv);
        };
        for q in 0..n.states.len() {
            for chosen in [false, true] {
                for &c in &symbols {
                    add(
                        sim[&(q, chosen, Lookahead::Empty)],
                        Some(c),
                        None,
                        Move { to: sim[&(q, chosen, Lookahead::Sym(c))], push: keep(top) },
                    );
                }
                for &la in &lookaheads[1..] {
                    let from = sim[&(q, chosen, la)];
                    let next = match la {
                        Lookahead::Sym(c) => Some(c),
                        _ => None,
                    };
                    let options = n.applicable(q, next, top);
                    let dead = if matches!(la, Lookahead::Sym(c) if c != END_MARKER) {
                        dead_scan
                    } else {
                        dead_done
                    };
                    let follow = |(mv, reads): (&Move, bool), chosen: bool| {
                        let la_after = match (la, reads) {
                            (_, false) => la,
                            (Lookahead::Sym(END_MARKER), true) => Lookahead::Done,
                            (_, true) => Lookahead::Empty,
                        };
                        Move { to: sim[&(mv.to, chosen, la_after)], push: mv.push.clone() }
                    };
                    match (options.len(), chosen) {
                        (0, _) if la == Lookahead::Done => {
                            let accept = n.states[q].accepting;
                            for bit in Bit::BOTH {
                                let send = if accept { bit } else { bit.flip() };
                                add(from, None, Some(bit), Move { to: fin(accept, send), push: keep(top) });
                            }
                        }
                        (1, _) => add(from, None, None, follow(options[0], chosen)),
                        (2, false) => {
                            for bit in Bit::BOTH {
                                add(from, None, Some(bit), follow(options[bit.index()], true));
                            }
                        }
                        _ => add(from, None, None, Move { to: dead, push: keep(top) }),
                    }
                }
            }
        }
        for &c in &n.alphabet {
            add(dead_scan, Some(c), None, Move { to: dead_scan, push: keep(top) });
        }
        add(dead_scan, Some(END_MARKER), None, Move { to: dead_done, push: keep(top) });
        for bit in Bit::BOTH {
            add(dead_done, None, Some(bit), Move { to: fin(false, bit.flip()), push: keep(top) });
        }
    }

    let initial = sim[&(n.initial, false, Lookahead::Empty)];
    DpdaSpec::new(
        n.alphabet.clone(),
        n.stack_alphabet.clone(),
        n.bottom,
        states,
        initial,
        true,
        moves,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    /// Textbook {a^n b^n}: push A per a, pop per b, accept on $ at bottom.
    pub(crate) fn anbn() -> DpdaSpec {
        let states = vec![
            State::new("push", Role::Normal, false),
            State::new("pop", Role::Normal, false),
            State::new("acc", Role::Normal, true),
        ];
        let mut m = BTreeMap::new();
        let mut add = |state, input, top, to, push: &str| {
            m.insert(MoveKey { state, input, top, bit: None }, Move::new(to, push));
        };
        add(0, Some('a'), 'Z', 0, "AZ");
        add(0, Some('a'), 'A', 0, "AA");
        add(0, Some('b'), 'A', 1, "");
        add(1, Some('b'), 'A', 1, "");
        add(0, Some('$'), 'Z', 2, "Z");
        add(1, Some('$'), 'Z', 2, "Z");
        DpdaSpec::new(chars("ab"), vec!['Z', 'A'], 'Z', states, 0, false, m).unwrap()
    }

    #[test]
    fn anbn_examples() {
        let m = anbn();
        assert!(m.accepts(&chars("aabb")).unwrap());
        assert!(m.accepts(&chars("")).unwrap());
        assert!(!m.accepts(&chars("aab")).unwrap());
        assert!(!m.accepts(&chars("abab")).unwrap());
        assert!(matches!(m.run(&chars("aab"), None).unwrap().outcome, RunOutcome::Blocked { .. }));
        assert!(matches!(
            m.run(&chars("aabb"), None).unwrap().outcome,
            RunOutcome::Halted { state: 2 }
        ));
    }

    #[test]
    fn epsilon_push_loop_is_nonhalting() {
        let states = vec![State::new("q", Role::Normal, false)];
        let mut m = BTreeMap::new();
        m.insert(MoveKey { state: 0, input: None, top: 'Z', bit: None }, Move::new(0, "AZ"));
        m.insert(MoveKey { state: 0, input: None, top: 'A', bit: None }, Move::new(0, "AA"));
        let d = DpdaSpec::new(chars("a"), vec!['Z', 'A'], 'Z', states, 0, false, m).unwrap();
        let run = d.run(&chars("a"), None).unwrap();
        assert_eq!(run.outcome, RunOutcome::NonHalting);
        // detected long before the budget
        assert!(run.steps_used < 5);
    }

    #[test]
    fn epsilon_pop_sequence_is_not_a_loop() {
        // Push three A's, then on $ pop them all with epsilon moves.
        let states = vec![
            State::new("read", Role::Normal, false),
            State::new("drain", Role::Normal, false),
            State::new("done", Role::Normal, true),
        ];
        let mut m = BTreeMap::new();
        let mut add = |state, input, top, to, push: &str| {
            m.insert(MoveKey { state, input, top, bit: None }, Move::new(to, push));
        };
        add(0, Some('a'), 'Z', 0, "AZ");
        add(0, Some('a'), 'A', 0, "AA");
        add(0, Some('$'), 'A', 1, "A");
        add(0, Some('$'), 'Z', 2, "Z");
        add(1, None, 'A', 1, "");
        add(1, None, 'Z', 2, "Z");
        let d = DpdaSpec::new(chars("a"), vec!['Z', 'A'], 'Z', states, 0, false, m).unwrap();
        assert!(d.accepts(&chars("aaa")).unwrap());
    }

    #[test]
    fn epsilon_cycle_through_states_is_nonhalting() {
        let states = vec![State::new("p", Role::Normal, false), State::new("q", Role::Normal, false)];
        let mut m = BTreeMap::new();
        m.insert(MoveKey { state: 0, input: None, top: 'Z', bit: None }, Move::new(1, "Z"));
        m.insert(MoveKey { state: 1, input: None, top: 'Z', bit: None }, Move::new(0, "Z"));
        let d = DpdaSpec::new(chars("a"), vec!['Z'], 'Z', states, 0, false, m).unwrap();
        assert_eq!(d.run(&[], None).unwrap().outcome, RunOutcome::NonHalting);
    }

    #[test]
    fn budget_backstop() {
        let m = anbn();
        let run = m.run_with_budget(&chars("aaaabbbb"), None, 3).unwrap();
        assert_eq!(run.outcome, RunOutcome::NonHalting);
    }

    #[test]
    fn determinism_violation_detected() {
        let states = vec![State::new("q", Role::Normal, false)];
        let mut m = BTreeMap::new();
        m.insert(MoveKey { state: 0, input: None, top: 'Z', bit: None }, Move::new(0, "Z"));
        m.insert(MoveKey { state: 0, input: Some('a'), top: 'Z', bit: None }, Move::new(0, "Z"));
        let r = DpdaSpec::new(chars("a"), vec!['Z'], 'Z', states, 0, false, m);
        assert!(matches!(r, Err(Error::Nondeterministic(_))));
    }

    #[test]
    fn bottom_marker_protected() {
        let states = vec![State::new("q", Role::Normal, false)];
        let mut m = BTreeMap::new();
        m.insert(MoveKey { state: 0, input: Some('a'), top: 'Z', bit: None }, Move::new(0, ""));
        assert!(DpdaSpec::new(chars("a"), vec!['Z'], 'Z', states, 0, false, m).is_err());
    }

    fn constant_ctc(accept: bool, send: Bit) -> DpdaSpec {
        let states = vec![
            State::new("scan", Role::Normal, false),
            State::new("end", Role::send(send), accept),
        ];
        let mut m = BTreeMap::new();
        m.insert(MoveKey { state: 0, input: Some('a'), top: 'Z', bit: None }, Move::new(0, "Z"));
        m.insert(MoveKey { state: 0, input: Some('b'), top: 'Z', bit: None }, Move::new(0, "Z"));
        m.insert(MoveKey { state: 0, input: Some('$'), top: 'Z', bit: None }, Move::new(1, "Z"));
        DpdaSpec::new(chars("ab"), vec!['Z'], 'Z', states, 0, true, m).unwrap()
    }

    fn decomposed_member(spec: &DpdaSpec, w: &[char]) -> bool {
        let (a1, a2, a3) = decompose_ctc_dpda(spec).unwrap();
        a1.accepts(w).unwrap() || (a2.accepts(w).unwrap() && a3.accepts(w).unwrap())
    }

    #[test]
    fn decompose_constant_machines() {
        let yes = constant_ctc(true, Bit::Zero);
        let no = constant_ctc(false, Bit::One);
        for w in ["", "a", "abba"] {
            let w = chars(w);
            let (a1, a2, a3) = decompose_ctc_dpda(&yes).unwrap();
            assert!(a1.accepts(&w).unwrap());
            assert!(!a2.accepts(&w).unwrap());
            assert!(decomposed_member(&yes, &w));
            let _ = a3;
            let (a1, a2, a3) = decompose_ctc_dpda(&no).unwrap();
            assert!(!a1.accepts(&w).unwrap());
            assert!(a2.accepts(&w).unwrap());
            assert!(!a3.accepts(&w).unwrap());
            assert!(!decomposed_member(&no, &w));
        }
        assert!(decompose_ctc_dpda(&anbn()).is_err());
    }

    #[test]
    fn send_state_entered_early_rejected() {
        let states = vec![State::new("scan", Role::Normal, false), State::new("end", Role::SendZero, true)];
        let mut m = BTreeMap::new();
        m.insert(MoveKey { state: 0, input: Some('a'), top: 'Z', bit: None }, Move::new(1, "Z"));
        let r = DpdaSpec::new(chars("a"), vec!['Z'], 'Z', states, 0, true, m);
        assert!(matches!(r, Err(Error::RoleViolation(_))));
    }

    #[test]
    fn ctc_run_requires_bit() {
        let m = constant_ctc(true, Bit::Zero);
        assert_eq!(m.run(&[], None), Err(Error::MissingBit));
        assert_eq!(anbn().run(&[], Some(Bit::One)), Err(Error::UnexpectedBit));
    }

    #[test]
    fn npda_branching_must_match() {
        let states = vec![State::new("q", Role::Normal, true)];
        let mut m = BTreeMap::new();
        m.insert((0, Some('a'), 'Z'), vec![Move::new(0, "Z"), Move::new(0, "Z")]);
        assert!(NpdaSpec::new(chars("a"), vec!['Z'], 'Z', states.clone(), 0, m.clone(), 1).is_err());
        let n = NpdaSpec::new(chars("a"), vec!['Z'], 'Z', states, 0, m, 2).unwrap();
        assert_eq!(n.branching(), 2);
    }

    #[test]
    fn compile_rejects_high_branching() {
        let states = vec![State::new("q", Role::Normal, true)];
        let mut m = BTreeMap::new();
        m.insert((0, Some('a'), 'Z'), vec![Move::new(0, "Z"); 3]);
        let n = NpdaSpec::new(chars("a"), vec!['Z'], 'Z', states, 0, m, 3).unwrap();
        assert_eq!(npda_branching2_to_ctc(&n), Err(Error::BranchingExceeded(3)));
    }
}
