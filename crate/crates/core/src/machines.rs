//! Real-time machine models: probabilistic finite automata and rational
//! linear-map automata read under squared-amplitude measurement.
//!
//! Both models read the input followed by the reserved end-marker `$`, then
//! aggregate the final mass by state role. A machine's *family* is decided by
//! the roles it uses:
//!
//! * `Post`: postselection roles. Runs yield a [`PostOutcome`].
//! * `Branch`: send roles. Runs yield a [`BranchOutcome`]. With CTC-indexed
//!   transitions this is a CTC machine; with plain transitions it is one of its
//!   bit fixings.
//! * `Plain`: only `Normal` states. Runs yield a [`PlainOutcome`].
//!
//! Linear machines carry a rational `scale_bound` `c` with `||M|| <= c` for
//! every transition matrix, so `M / c` is a contraction that dilates to a
//! unitary on a larger space. The mass lost to the dilation (the *residual*)
//! is tracked exactly: squared norms of rational vectors are rational.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::consistency::Bit;
use crate::dpda::DpdaSpec;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rational::{self, one, zero, Rational};

pub type Symbol = char;

/// Reserved right end-marker.
pub const END_MARKER: Symbol = '$';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Normal,
    SendZero,
    SendOne,
    PostAccept,
    PostReject,
    NonPost,
}

impl Role {
    pub fn sends(self) -> Option<Bit> {
        match self {
            Role::SendZero => Some(Bit::Zero),
            Role::SendOne => Some(Bit::One),
            _ => None,
        }
    }

    pub fn send(bit: Bit) -> Role {
        match bit {
            Bit::Zero => Role::SendZero,
            Bit::One => Role::SendOne,
        }
    }

    pub fn is_post(self) -> bool {
        matches!(self, Role::PostAccept | Role::PostReject | Role::NonPost)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub name: String,
    pub role: Role,
    #[serde(default)]
    pub accepting: bool,
}

impl State {
    pub fn new(name: impl Into<String>, role: Role, accepting: bool) -> Self {
        State {
            name: name.into(),
            role,
            accepting,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Plain,
    Branch,
    Post,
}

pub fn family_of(states: &[State]) -> Result<Family> {
    let sends = states.iter().any(|s| s.role.sends().is_some());
    let posts = states.iter().any(|s| s.role.is_post());
    match (sends, posts) {
        (true, true) => Err(Error::RoleViolation(
            "send roles and postselection roles cannot be mixed".into(),
        )),
        (true, false) => Ok(Family::Branch),
        (false, true) => Ok(Family::Post),
        (false, false) => Ok(Family::Plain),
    }
}

pub(crate) fn validate_states(states: &[State]) -> Result<()> {
    if states.is_empty() {
        return Err(Error::InvalidSpec("machine has no states".into()));
    }
    let mut seen = BTreeSet::new();
    for s in states {
        if !seen.insert(s.name.as_str()) {
            return Err(Error::InvalidSpec(format!("duplicate state name {:?}", s.name)));
        }
    }
    Ok(())
}

pub(crate) fn validate_alphabet(alphabet: &[Symbol]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &c in alphabet {
        if c == END_MARKER {
            return Err(Error::InvalidSpec("the end-marker '$' cannot be an input symbol".into()));
        }
        if !seen.insert(c) {
            return Err(Error::InvalidSpec(format!("duplicate input symbol {c:?}")));
        }
    }
    Ok(())
}

/// Checks every symbol of `word` against `alphabet`.
pub fn check_word(alphabet: &[Symbol], word: &[Symbol]) -> Result<()> {
    match word.iter().find(|c| !alphabet.contains(c)) {
        Some(&symbol) => Err(Error::SymbolNotInAlphabet { symbol }),
        None => Ok(()),
    }
}

/// Symbol-indexed transition tables, optionally indexed by the CTC bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transitions {
    Plain(BTreeMap<Symbol, Matrix>),
    Ctc([BTreeMap<Symbol, Matrix>; 2]),
}

impl Transitions {
    pub fn is_ctc(&self) -> bool {
        matches!(self, Transitions::Ctc(_))
    }

    pub fn table(&self, bit: Option<Bit>) -> Result<&BTreeMap<Symbol, Matrix>> {
        match (self, bit) {
            (Transitions::Plain(t), None) => Ok(t),
            (Transitions::Plain(_), Some(_)) => Err(Error::UnexpectedBit),
            (Transitions::Ctc(_), None) => Err(Error::MissingBit),
            (Transitions::Ctc(ts), Some(b)) => Ok(&ts[b.index()]),
        }
    }

    pub fn tables(&self) -> Vec<&BTreeMap<Symbol, Matrix>> {
        match self {
            Transitions::Plain(t) => vec![t],
            Transitions::Ctc(ts) => ts.iter().collect(),
        }
    }

    fn check_shape(&self, alphabet: &[Symbol], n: usize) -> Result<()> {
        let expected: BTreeSet<Symbol> = alphabet.iter().copied().chain([END_MARKER]).collect();
        for t in self.tables() {
            let keys: BTreeSet<Symbol> = t.keys().copied().collect();
            if keys != expected {
                return Err(Error::InvalidSpec(format!(
                    "transition symbols {keys:?} do not match alphabet plus end-marker {expected:?}"
                )));
            }
            if let Some((c, _)) = t.iter().find(|(_, m)| !m.is_square(n)) {
                return Err(Error::InvalidSpec(format!("matrix for {c:?} is not {n}x{n}")));
            }
        }
        Ok(())
    }
}

/// Joint distribution of (decision, bit sent back) from one run with the CTC
/// bit fixed, plus nonhalting mass.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BranchOutcome {
    pub p_acc_send0: Rational,
    pub p_acc_send1: Rational,
    pub p_rej_send0: Rational,
    pub p_rej_send1: Rational,
    pub p_nonhalt: Rational,
}

impl BranchOutcome {
    pub fn new(
        p_acc_send0: Rational,
        p_acc_send1: Rational,
        p_rej_send0: Rational,
        p_rej_send1: Rational,
        p_nonhalt: Rational,
    ) -> Result<Self> {
        let out = BranchOutcome {
            p_acc_send0,
            p_acc_send1,
            p_rej_send0,
            p_rej_send1,
            p_nonhalt,
        };
        let parts = out.parts();
        if parts.iter().any(|p| !rational::is_probability(p)) || parts.iter().copied().sum::<Rational>() != one() {
            return Err(Error::InvalidSpec("branch outcome is not a distribution".into()));
        }
        Ok(out)
    }

    fn parts(&self) -> [&Rational; 5] {
        [
            &self.p_acc_send0,
            &self.p_acc_send1,
            &self.p_rej_send0,
            &self.p_rej_send1,
            &self.p_nonhalt,
        ]
    }

    /// A halting run that decides `accept` and sends `send` with certainty.
    pub fn deterministic(accept: bool, send: Bit) -> Self {
        let mut cells = [[zero(), zero()], [zero(), zero()]];
        cells[usize::from(!accept)][send.index()] = one();
        let [[a0, a1], [r0, r1]] = cells;
        BranchOutcome {
            p_acc_send0: a0,
            p_acc_send1: a1,
            p_rej_send0: r0,
            p_rej_send1: r1,
            p_nonhalt: zero(),
        }
    }

    pub fn nonhalting() -> Self {
        BranchOutcome {
            p_acc_send0: zero(),
            p_acc_send1: zero(),
            p_rej_send0: zero(),
            p_rej_send1: zero(),
            p_nonhalt: one(),
        }
    }

    pub fn p_send(&self, bit: Bit) -> Rational {
        match bit {
            Bit::Zero => &self.p_acc_send0 + &self.p_rej_send0,
            Bit::One => &self.p_acc_send1 + &self.p_rej_send1,
        }
    }

    pub fn p_accept(&self) -> Rational {
        &self.p_acc_send0 + &self.p_acc_send1
    }

    pub fn p_reject(&self) -> Rational {
        &self.p_rej_send0 + &self.p_rej_send1
    }
}

/// Postselection masses before and after normalization.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PostOutcome {
    pub p_a: Rational,
    pub p_r: Rational,
    pub big_p_a: Rational,
    pub big_p_r: Rational,
}

impl PostOutcome {
    /// `None` when the postselected mass is zero.
    pub fn from_masses(p_a: Rational, p_r: Rational) -> Option<Self> {
        let total = &p_a + &p_r;
        if total.is_zero() {
            return None;
        }
        Some(PostOutcome {
            big_p_a: &p_a / &total,
            big_p_r: &p_r / &total,
            p_a,
            p_r,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PlainOutcome {
    pub p_accept: Rational,
    pub p_reject: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Branch(BranchOutcome),
    Post(PostOutcome),
    Plain(PlainOutcome),
}

impl Outcome {
    pub fn into_branch(self) -> Result<BranchOutcome> {
        match self {
            Outcome::Branch(b) => Ok(b),
            _ => Err(Error::RoleViolation("machine has no send roles".into())),
        }
    }

    pub fn into_post(self) -> Result<PostOutcome> {
        match self {
            Outcome::Post(p) => Ok(p),
            _ => Err(Error::RoleViolation("machine has no postselection roles".into())),
        }
    }
}

/// How a linear CTC machine treats mass that leaves the simulated block
/// through the dilation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualRule {
    /// Decide by the received bit (accept iff 1) and send that bit back.
    FollowBit,
    Fixed { send: Bit, accepting: bool },
}

impl ResidualRule {
    fn resolve(self, bit: Option<Bit>) -> Result<(Bit, bool)> {
        match (self, bit) {
            (ResidualRule::Fixed { send, accepting }, _) => Ok((send, accepting)),
            (ResidualRule::FollowBit, Some(b)) => Ok((b, b == Bit::One)),
            (ResidualRule::FollowBit, None) => Err(Error::MissingBit),
        }
    }

    fn fixed(self, bit: Bit) -> ResidualRule {
        let (send, accepting) = self.resolve(Some(bit)).expect("bit supplied");
        ResidualRule::Fixed { send, accepting }
    }
}

fn aggregate(
    states: &[State],
    masses: &[Rational],
    residual: &Rational,
    residual_rule: Option<ResidualRule>,
    bit: Option<Bit>,
    word: &[Symbol],
) -> Result<Outcome> {
    match family_of(states)? {
        Family::Post => {
            let mut p_a = zero();
            let mut p_r = zero();
            for (s, m) in states.iter().zip(masses) {
                match s.role {
                    Role::PostAccept => p_a += m,
                    Role::PostReject => p_r += m,
                    _ => {}
                }
            }
            PostOutcome::from_masses(p_a, p_r)
                .map(Outcome::Post)
                .ok_or_else(|| Error::PostselectionMassZero {
                    word: word.iter().collect(),
                })
        }
        Family::Branch => {
            let mut cells = [[zero(), zero()], [zero(), zero()]];
            for (s, m) in states.iter().zip(masses) {
                if m.is_zero() {
                    continue;
                }
                let send = s.role.sends().ok_or_else(|| {
                    Error::RoleViolation(format!("run ended with mass in non-send state {:?}", s.name))
                })?;
                cells[usize::from(!s.accepting)][send.index()] += m;
            }
            if !residual.is_zero() {
                let rule = residual_rule.ok_or_else(|| {
                    Error::RoleViolation("dilation residue present but no residual rule declared".into())
                })?;
                let (send, accepting) = rule.resolve(bit)?;
                cells[usize::from(!accepting)][send.index()] += residual;
            }
            let [[a0, a1], [r0, r1]] = cells;
            BranchOutcome::new(a0, a1, r0, r1, zero()).map(Outcome::Branch)
        }
        Family::Plain => {
            let p_accept: Rational = states
                .iter()
                .zip(masses)
                .filter(|(s, _)| s.accepting)
                .map(|(_, m)| m)
                .sum();
            let total: Rational = masses.iter().sum::<Rational>() + residual;
            Ok(Outcome::Plain(PlainOutcome {
                p_reject: total - &p_accept,
                p_accept,
            }))
        }
    }
}

/// Send-role states must be entered exactly at the end of execution.
fn check_send_entry(states: &[State], initial: &[Rational], transitions: &Transitions) -> Result<()> {
    let sends = |i: usize| states[i].role.sends().is_some();
    if let Some(i) = (0..states.len()).find(|&i| sends(i) && !initial[i].is_zero()) {
        return Err(Error::RoleViolation(format!(
            "send state {:?} has initial mass",
            states[i].name
        )));
    }
    // Only columns of non-send states matter: send states carry no mass
    // before the end-marker and nothing is read after it.
    for table in transitions.tables() {
        for (&c, m) in table {
            for j in (0..states.len()).filter(|&j| !sends(j)) {
                for (i, _) in m.column(j) {
                    if c == END_MARKER && !sends(*i) {
                        return Err(Error::RoleViolation(format!(
                            "state {:?} is entered on the end-marker but has no send role",
                            states[*i].name
                        )));
                    }
                    if c != END_MARKER && sends(*i) {
                        return Err(Error::RoleViolation(format!(
                            "send state {:?} is entered before the end-marker (on {c:?})",
                            states[*i].name
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

fn fix_bit_transitions(t: &Transitions, bit: Bit) -> Result<Transitions> {
    match t {
        Transitions::Ctc(ts) => Ok(Transitions::Plain(ts[bit.index()].clone())),
        Transitions::Plain(_) => Err(Error::InvalidSpec("machine has no CTC-indexed transitions".into())),
    }
}

/// Probabilistic finite automaton over exact rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PfaSpec {
    alphabet: Vec<Symbol>,
    states: Vec<State>,
    initial: Vec<Rational>,
    transitions: Transitions,
}

impl PfaSpec {
    pub fn new(
        alphabet: Vec<Symbol>,
        states: Vec<State>,
        initial: Vec<Rational>,
        transitions: Transitions,
    ) -> Result<Self> {
        validate_alphabet(&alphabet)?;
        validate_states(&states)?;
        let n = states.len();
        if initial.len() != n {
            return Err(Error::InvalidSpec("initial distribution has the wrong length".into()));
        }
        if initial.iter().any(|p| !rational::is_probability(p)) || initial.iter().sum::<Rational>() != one() {
            return Err(Error::InvalidSpec("initial distribution must be a probability vector".into()));
        }
        transitions.check_shape(&alphabet, n)?;
        for table in transitions.tables() {
            if let Some((c, _)) = table.iter().find(|(_, m)| !m.is_column_stochastic()) {
                return Err(Error::InvalidSpec(format!("matrix for {c:?} is not column-stochastic")));
            }
        }
        let family = family_of(&states)?;
        if transitions.is_ctc() && family != Family::Branch {
            return Err(Error::RoleViolation(
                "CTC-indexed machines must end in send-role states".into(),
            ));
        }
        if family == Family::Branch {
            check_send_entry(&states, &initial, &transitions)?;
        }
        Ok(PfaSpec {
            alphabet,
            states,
            initial,
            transitions,
        })
    }

    pub fn alphabet(&self) -> &[Symbol] {
        &self.alphabet
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn initial(&self) -> &[Rational] {
        &self.initial
    }

    pub fn transitions(&self) -> &Transitions {
        &self.transitions
    }

    pub fn family(&self) -> Family {
        family_of(&self.states).expect("validated")
    }

    pub fn is_ctc(&self) -> bool {
        self.transitions.is_ctc()
    }

    /// Point-mass start and 0/1 transition matrices.
    pub fn is_deterministic(&self) -> bool {
        let zero_one = |x: &Rational| x.is_zero() || x.is_one();
        self.initial.iter().all(zero_one)
            && self
                .transitions
                .tables()
                .iter()
                .all(|t| t.values().all(|m| m.rows().iter().flatten().all(zero_one)))
    }

    /// The machine with the CTC bit hard-wired to `bit`.
    pub fn fix_bit(&self, bit: Bit) -> Result<PfaSpec> {
        Ok(PfaSpec {
            alphabet: self.alphabet.clone(),
            states: self.states.clone(),
            initial: self.initial.clone(),
            transitions: fix_bit_transitions(&self.transitions, bit)?,
        })
    }

    /// State distribution after reading `word` and the end-marker.
    pub fn final_distribution(&self, word: &[Symbol], bit: Option<Bit>) -> Result<Vec<Rational>> {
        check_word(&self.alphabet, word)?;
        let table = self.transitions.table(bit)?;
        let mut dist = self.initial.clone();
        for c in word.iter().chain([&END_MARKER]) {
            dist = table[c].apply(&dist);
            debug_assert_eq!(dist.iter().sum::<Rational>(), one(), "distribution lost mass");
        }
        Ok(dist)
    }

    pub fn run(&self, word: &[Symbol], bit: Option<Bit>) -> Result<Outcome> {
        let dist = self.final_distribution(word, bit)?;
        aggregate(&self.states, &dist, &zero(), None, bit, word)
    }

    pub fn with_states(&self, states: Vec<State>) -> Result<PfaSpec> {
        PfaSpec::new(self.alphabet.clone(), states, self.initial.clone(), self.transitions.clone())
    }
}

/// Rational linear-map automaton with squared-amplitude measurement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearFaSpec {
    alphabet: Vec<Symbol>,
    states: Vec<State>,
    initial: Vec<Rational>,
    transitions: Transitions,
    scale_bound: Rational,
    residual: Option<ResidualRule>,
}

impl LinearFaSpec {
    pub fn new(
        alphabet: Vec<Symbol>,
        states: Vec<State>,
        initial: Vec<Rational>,
        transitions: Transitions,
        scale_bound: Rational,
        residual: Option<ResidualRule>,
    ) -> Result<Self> {
        validate_alphabet(&alphabet)?;
        validate_states(&states)?;
        let n = states.len();
        if initial.len() != n {
            return Err(Error::InvalidSpec("initial vector has the wrong length".into()));
        }
        if initial.iter().all(Zero::is_zero) {
            return Err(Error::InvalidSpec("initial vector is zero".into()));
        }
        if !scale_bound.is_positive() {
            return Err(Error::InvalidSpec("scale bound must be positive".into()));
        }
        transitions.check_shape(&alphabet, n)?;
        for table in transitions.tables() {
            if let Some((c, _)) = table.iter().find(|(_, m)| !m.norm_bounded_by(&scale_bound)) {
                return Err(Error::InvalidSpec(format!(
                    "matrix for {c:?} is not certified bounded by scale {}",
                    rational::format(&scale_bound)
                )));
            }
        }
        let family = family_of(&states)?;
        if transitions.is_ctc() && family != Family::Branch {
            return Err(Error::RoleViolation(
                "CTC-indexed machines must end in send-role states".into(),
            ));
        }
        if family == Family::Branch {
            check_send_entry(&states, &initial, &transitions)?;
        } else if residual.is_some() {
            return Err(Error::RoleViolation("residual rules apply only to send-role machines".into()));
        }
        Ok(LinearFaSpec {
            alphabet,
            states,
            initial,
            transitions,
            scale_bound,
            residual,
        })
    }

    pub fn alphabet(&self) -> &[Symbol] {
        &self.alphabet
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn initial(&self) -> &[Rational] {
        &self.initial
    }

    pub fn transitions(&self) -> &Transitions {
        &self.transitions
    }

    pub fn scale_bound(&self) -> &Rational {
        &self.scale_bound
    }

    pub fn residual(&self) -> Option<ResidualRule> {
        self.residual
    }

    pub fn family(&self) -> Family {
        family_of(&self.states).expect("validated")
    }

    pub fn is_ctc(&self) -> bool {
        self.transitions.is_ctc()
    }

    /// Every scaled transition matrix is an isometry, so no mass ever leaves
    /// through the dilation.
    pub fn is_norm_preserving(&self) -> bool {
        self.transitions
            .tables()
            .iter()
            .all(|t| t.values().all(|m| m.is_scaled_isometry(&self.scale_bound)))
    }

    pub fn fix_bit(&self, bit: Bit) -> Result<LinearFaSpec> {
        Ok(LinearFaSpec {
            alphabet: self.alphabet.clone(),
            states: self.states.clone(),
            initial: self.initial.clone(),
            transitions: fix_bit_transitions(&self.transitions, bit)?,
            scale_bound: self.scale_bound.clone(),
            residual: self.residual.map(|r| r.fixed(bit)),
        })
    }

    /// Unscaled final vector `M_$ M_{w_n} ... M_{w_1} v_0`.
    pub fn final_vector(&self, word: &[Symbol], bit: Option<Bit>) -> Result<Vec<Rational>> {
        check_word(&self.alphabet, word)?;
        let table = self.transitions.table(bit)?;
        let mut v = self.initial.clone();
        for c in word.iter().chain([&END_MARKER]) {
            v = table[c].apply(&v);
        }
        Ok(v)
    }

    /// Per-component probabilities of the normalized, dilated machine and the
    /// residual mass that left through the dilation.
    pub fn final_masses(&self, word: &[Symbol], bit: Option<Bit>) -> Result<(Vec<Rational>, Rational)> {
        let v = self.final_vector(word, bit)?;
        let norm0: Rational = self.initial.iter().map(|x| x * x).sum();
        let denom = norm0 * num_traits::pow(&self.scale_bound * &self.scale_bound, word.len() + 1);
        let masses: Vec<Rational> = v.iter().map(|x| x * x / &denom).collect();
        let residual = one() - masses.iter().sum::<Rational>();
        debug_assert!(!residual.is_negative(), "scale bound certificate violated");
        Ok((masses, residual))
    }

    pub fn run(&self, word: &[Symbol], bit: Option<Bit>) -> Result<Outcome> {
        let (masses, residual) = self.final_masses(word, bit)?;
        aggregate(&self.states, &masses, &residual, self.residual, bit, word)
    }

    pub fn with_states(&self, states: Vec<State>) -> Result<LinearFaSpec> {
        LinearFaSpec::new(
            self.alphabet.clone(),
            states,
            self.initial.clone(),
            self.transitions.clone(),
            self.scale_bound.clone(),
            self.residual,
        )
    }
}

/// Any machine the toolkit can load, run, or convert.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MachineSpec {
    Pfa(PfaSpec),
    Linear(LinearFaSpec),
    Dpda(DpdaSpec),
}

impl MachineSpec {
    pub fn alphabet(&self) -> &[Symbol] {
        match self {
            MachineSpec::Pfa(m) => m.alphabet(),
            MachineSpec::Linear(m) => m.alphabet(),
            MachineSpec::Dpda(m) => m.alphabet(),
        }
    }

    pub fn states(&self) -> &[State] {
        match self {
            MachineSpec::Pfa(m) => m.states(),
            MachineSpec::Linear(m) => m.states(),
            MachineSpec::Dpda(m) => m.states(),
        }
    }

    pub fn family(&self) -> Family {
        family_of(self.states()).expect("validated")
    }

    pub fn is_ctc(&self) -> bool {
        match self {
            MachineSpec::Pfa(m) => m.is_ctc(),
            MachineSpec::Linear(m) => m.is_ctc(),
            MachineSpec::Dpda(m) => m.is_ctc(),
        }
    }

    pub fn model_name(&self) -> &'static str {
        match self {
            MachineSpec::Pfa(_) => "pfa",
            MachineSpec::Linear(_) => "linear",
            MachineSpec::Dpda(_) => "dpda",
        }
    }

    pub fn run(&self, word: &[Symbol], bit: Option<Bit>) -> Result<Outcome> {
        match self {
            MachineSpec::Pfa(m) => m.run(word, bit),
            MachineSpec::Linear(m) => m.run(word, bit),
            MachineSpec::Dpda(m) => m.outcome(word, bit),
        }
    }
}

impl fmt::Display for MachineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} machine, {} states, alphabet {:?}{}",
            self.model_name(),
            self.states().len(),
            self.alphabet().iter().collect::<String>(),
            if self.is_ctc() { ", CTC-indexed" } else { "" }
        )
    }
}

pub fn run_pfa(spec: &PfaSpec, word: &[Symbol], bit: Option<Bit>) -> Result<Outcome> {
    spec.run(word, bit)
}

pub fn run_linear(spec: &LinearFaSpec, word: &[Symbol]) -> Result<PostOutcome> {
    if spec.family() != Family::Post {
        return Err(Error::RoleViolation("run_linear expects postselection roles".into()));
    }
    spec.run(word, None)?.into_post()
}

/// Kronecker product of two machines. Product state `k` pairs left state
/// `k / n_right` with right state `k % n_right`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Product {
    pub machine: MachineSpec,
    pub left: Vec<State>,
    pub right: Vec<State>,
}

impl Product {
    pub fn pair(&self, k: usize) -> (&State, &State) {
        let n = self.right.len();
        (&self.left[k / n], &self.right[k % n])
    }

    pub fn len(&self) -> usize {
        self.left.len() * self.right.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total final mass on pair states satisfying `pred`.
    pub fn mass_where(&self, masses: &[Rational], pred: impl Fn(&State, &State) -> bool) -> Rational {
        (0..self.len())
            .filter(|&k| {
                let (l, r) = self.pair(k);
                pred(l, r)
            })
            .map(|k| &masses[k])
            .sum()
    }

    /// Per-state final masses of the product on `word`.
    pub fn final_masses(&self, word: &[Symbol]) -> Result<Vec<Rational>> {
        match &self.machine {
            MachineSpec::Pfa(m) => m.final_distribution(word, None),
            MachineSpec::Linear(m) => Ok(m.final_masses(word, None)?.0),
            MachineSpec::Dpda(_) => unreachable!("pushdown machines have no tensor product"),
        }
    }

    /// Assigns each pair state a role and accepting flag.
    pub fn with_roles(&self, f: impl Fn(&State, &State) -> (Role, bool)) -> Result<MachineSpec> {
        let states = (0..self.len())
            .map(|k| {
                let (l, r) = self.pair(k);
                let (role, accepting) = f(l, r);
                State::new(format!("({},{})", l.name, r.name), role, accepting)
            })
            .collect();
        match &self.machine {
            MachineSpec::Pfa(m) => m.with_states(states).map(MachineSpec::Pfa),
            MachineSpec::Linear(m) => m.with_states(states).map(MachineSpec::Linear),
            MachineSpec::Dpda(_) => unreachable!("pushdown machines have no tensor product"),
        }
    }
}

fn product_states(a: &[State], b: &[State]) -> Vec<State> {
    a.iter()
        .flat_map(|l| {
            b.iter()
                .map(move |r| State::new(format!("({},{})", l.name, r.name), Role::Normal, l.accepting && r.accepting))
        })
        .collect()
}

fn kron_tables(a: &Transitions, b: &Transitions) -> Result<Transitions> {
    match (a, b) {
        (Transitions::Plain(ta), Transitions::Plain(tb)) => Ok(Transitions::Plain(
            ta.iter().map(|(c, m)| (*c, m.kron(&tb[c]))).collect(),
        )),
        _ => Err(Error::Incompatible("tensor factors must have their CTC bit fixed".into())),
    }
}

fn kron_vec(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

pub fn tensor(a: &MachineSpec, b: &MachineSpec) -> Result<Product> {
    if a.alphabet() != b.alphabet() {
        return Err(Error::Incompatible("alphabets differ".into()));
    }
    let machine = match (a, b) {
        (MachineSpec::Pfa(x), MachineSpec::Pfa(y)) => MachineSpec::Pfa(PfaSpec::new(
            x.alphabet.clone(),
            product_states(&x.states, &y.states),
            kron_vec(&x.initial, &y.initial),
            kron_tables(&x.transitions, &y.transitions)?,
        )?),
        (MachineSpec::Linear(x), MachineSpec::Linear(y)) => {
            for m in [x, y] {
                if m.residual.is_some() && !m.is_norm_preserving() {
                    return Err(Error::Incompatible(
                        "a factor routes dilation residue to send roles; its product is not exact".into(),
                    ));
                }
            }
            MachineSpec::Linear(LinearFaSpec::new(
                x.alphabet.clone(),
                product_states(&x.states, &y.states),
                kron_vec(&x.initial, &y.initial),
                kron_tables(&x.transitions, &y.transitions)?,
                &x.scale_bound * &y.scale_bound,
                None,
            )?)
        }
        _ => {
            return Err(Error::Incompatible(format!(
                "cannot tensor a {} machine with a {} machine",
                a.model_name(),
                b.model_name()
            )))
        }
    };
    Ok(Product {
        machine,
        left: a.states().to_vec(),
        right: b.states().to_vec(),
    })
}

fn prefixed(prefix: &str, states: &[State]) -> Vec<State> {
    states
        .iter()
        .map(|s| State::new(format!("{prefix}{}", s.name), s.role, s.accepting))
        .collect()
}

fn sum_tables(a: &Transitions, b: &Transitions) -> Result<Transitions> {
    match (a, b) {
        (Transitions::Plain(ta), Transitions::Plain(tb)) => Ok(Transitions::Plain(
            ta.iter().map(|(c, m)| (*c, m.direct_sum(&tb[c]))).collect(),
        )),
        _ => Err(Error::Incompatible("mixture components must have plain transitions".into())),
    }
}

/// Runs `a` or `b` with probability 1/2 each. Linear machines realize this
/// as a direct-sum initial vector with amplitude weight 1/sqrt(2) per block,
/// which requires both blocks to start with the same squared norm.
pub fn half_mixture(a: &MachineSpec, b: &MachineSpec) -> Result<MachineSpec> {
    if a.alphabet() != b.alphabet() {
        return Err(Error::Incompatible("alphabets differ".into()));
    }
    let mut states = prefixed("L:", a.states());
    states.extend(prefixed("R:", b.states()));
    match (a, b) {
        (MachineSpec::Pfa(x), MachineSpec::Pfa(y)) => {
            let h = rational::half();
            let initial = x.initial.iter().chain(&y.initial).map(|p| p * &h).collect();
            PfaSpec::new(x.alphabet.clone(), states, initial, sum_tables(&x.transitions, &y.transitions)?)
                .map(MachineSpec::Pfa)
        }
        (MachineSpec::Linear(x), MachineSpec::Linear(y)) => {
            let norm = |v: &[Rational]| v.iter().map(|q| q * q).sum::<Rational>();
            if norm(&x.initial) != norm(&y.initial) {
                return Err(Error::Incompatible("mixture blocks must have equal initial norm".into()));
            }
            if x.scale_bound != y.scale_bound {
                return Err(Error::Incompatible("mixture blocks must share a scale bound".into()));
            }
            LinearFaSpec::new(
                x.alphabet.clone(),
                states,
                x.initial.iter().chain(&y.initial).cloned().collect(),
                sum_tables(&x.transitions, &y.transitions)?,
                x.scale_bound.clone(),
                None,
            )
            .map(MachineSpec::Linear)
        }
        _ => Err(Error::Incompatible("mixture components must be the same model".into())),
    }
}

/// Helper for building a transition table from `(symbol, rows)` pairs.
pub fn table(entries: Vec<(Symbol, Vec<Vec<Rational>>)>) -> Result<BTreeMap<Symbol, Matrix>> {
    entries
        .into_iter()
        .map(|(c, rows)| Matrix::from_rows(rows).map(|m| (c, m)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    fn coin(accept_role: Role) -> PfaSpec {
        // start, heads, tails; the end-marker flips a fair coin.
        let h = ratio(1, 2);
        let states = vec![
            State::new("s", Role::Normal, false),
            State::new("h", accept_role, true),
            State::new("t", accept_role, false),
        ];
        let id = vec![
            vec![int(1), int(0), int(0)],
            vec![int(0), int(1), int(0)],
            vec![int(0), int(0), int(1)],
        ];
        let flip = vec![
            vec![int(0), int(0), int(0)],
            vec![h.clone(), int(1), int(0)],
            vec![h, int(0), int(1)],
        ];
        PfaSpec::new(
            vec!['a'],
            states,
            vec![int(1), int(0), int(0)],
            Transitions::Plain(table(vec![('a', id), ('$', flip)]).unwrap()),
        )
        .unwrap()
    }

    fn always_send_one() -> PfaSpec {
        let states = vec![State::new("s", Role::Normal, false), State::new("f", Role::SendOne, true)];
        let stay = vec![vec![int(1), int(0)], vec![int(0), int(1)]];
        let end = vec![vec![int(0), int(0)], vec![int(1), int(1)]];
        let t = table(vec![('a', stay.clone()), ('b', stay), ('$', end)]).unwrap();
        PfaSpec::new(
            vec!['a', 'b'],
            states,
            vec![int(1), int(0)],
            Transitions::Ctc([t.clone(), t]),
        )
        .unwrap()
    }

    #[test]
    fn always_accepting_send_one() {
        let m = always_send_one();
        for w in ["", "a", "abba"] {
            let w: Vec<char> = w.chars().collect();
            for bit in Bit::BOTH {
                let b = m.run(&w, Some(bit)).unwrap().into_branch().unwrap();
                assert_eq!(b.p_acc_send1, int(1));
            }
        }
    }

    #[test]
    fn bit_presence_is_checked() {
        let m = always_send_one();
        assert_eq!(m.run(&[], None), Err(Error::MissingBit));
        let c = coin(Role::Normal);
        assert_eq!(c.run(&[], Some(Bit::Zero)), Err(Error::UnexpectedBit));
        assert_eq!(c.run(&['z'], None), Err(Error::SymbolNotInAlphabet { symbol: 'z' }));
    }

    #[test]
    fn send_states_entered_early_are_rejected() {
        let states = vec![State::new("s", Role::Normal, false), State::new("f", Role::SendOne, true)];
        let to_f = vec![vec![int(0), int(0)], vec![int(1), int(1)]];
        let t = table(vec![('a', to_f.clone()), ('$', to_f)]).unwrap();
        let err = PfaSpec::new(vec!['a'], states, vec![int(1), int(0)], Transitions::Ctc([t.clone(), t]));
        assert!(matches!(err, Err(Error::RoleViolation(_))));
    }

    #[test]
    fn normal_state_on_end_marker_is_rejected() {
        let states = vec![State::new("s", Role::Normal, false), State::new("f", Role::SendOne, true)];
        let id = vec![vec![int(1), int(0)], vec![int(0), int(1)]];
        let t = table(vec![('a', id.clone()), ('$', id)]).unwrap();
        let err = PfaSpec::new(vec!['a'], states, vec![int(1), int(0)], Transitions::Ctc([t.clone(), t]));
        assert!(matches!(err, Err(Error::RoleViolation(_))));
    }

    #[test]
    fn invalid_specs() {
        let states = vec![State::new("s", Role::Normal, true)];
        let bad = table(vec![('a', vec![vec![ratio(1, 2)]]), ('$', vec![vec![int(1)]])]).unwrap();
        assert!(PfaSpec::new(vec!['a'], states.clone(), vec![int(1)], Transitions::Plain(bad)).is_err());
        let ok = table(vec![('a', vec![vec![int(1)]]), ('$', vec![vec![int(1)]])]).unwrap();
        assert!(PfaSpec::new(vec!['$'], states.clone(), vec![int(1)], Transitions::Plain(ok.clone())).is_err());
        assert!(PfaSpec::new(vec!['a', 'b'], states.clone(), vec![int(1)], Transitions::Plain(ok.clone())).is_err());
        assert!(PfaSpec::new(vec!['a'], states, vec![ratio(1, 2)], Transitions::Plain(ok)).is_err());
    }

    #[test]
    fn linear_identity_accepts_everything() {
        let states = vec![State::new("acc", Role::PostAccept, true), State::new("rej", Role::PostReject, false)];
        let id = Matrix::identity(2);
        let t: BTreeMap<_, _> = [('a', id.clone()), ('b', id.clone()), ('$', id)].into_iter().collect();
        let m = LinearFaSpec::new(vec!['a', 'b'], states, vec![int(1), int(0)], Transitions::Plain(t), int(1), None).unwrap();
        for w in ["", "ab", "bbb"] {
            let w: Vec<char> = w.chars().collect();
            assert_eq!(run_linear(&m, &w).unwrap().big_p_a, int(1));
        }
    }

    #[test]
    fn linear_zero_mass_is_an_error() {
        let states = vec![State::new("acc", Role::PostAccept, true), State::new("x", Role::NonPost, false)];
        let id = Matrix::identity(2);
        let t: BTreeMap<_, _> = [('a', id.clone()), ('$', id)].into_iter().collect();
        let m = LinearFaSpec::new(vec!['a'], states, vec![int(0), int(1)], Transitions::Plain(t), int(1), None).unwrap();
        assert!(matches!(run_linear(&m, &['a']), Err(Error::PostselectionMassZero { .. })));
    }

    #[test]
    fn linear_scale_bound_is_enforced() {
        let states = vec![State::new("acc", Role::PostAccept, true)];
        let t = table(vec![('a', vec![vec![int(3)]]), ('$', vec![vec![int(1)]])]).unwrap();
        let r = LinearFaSpec::new(vec!['a'], states.clone(), vec![int(1)], Transitions::Plain(t.clone()), int(2), None);
        assert!(r.is_err());
        assert!(LinearFaSpec::new(vec!['a'], states, vec![int(1)], Transitions::Plain(t), int(3), None).is_ok());
    }

    #[test]
    fn tensor_with_trivial_machine_projects_back() {
        let m = MachineSpec::Pfa(coin(Role::Normal));
        let trivial = PfaSpec::new(
            vec!['a'],
            vec![State::new("u", Role::Normal, true)],
            vec![int(1)],
            Transitions::Plain(table(vec![('a', vec![vec![int(1)]]), ('$', vec![vec![int(1)]])]).unwrap()),
        )
        .unwrap();
        let p = tensor(&m, &MachineSpec::Pfa(trivial)).unwrap();
        for w in [vec![], vec!['a'], vec!['a', 'a']] {
            let joint = p.final_masses(&w).unwrap();
            let acc = p.mass_where(&joint, |l, _| l.accepting);
            match m.run(&w, None).unwrap() {
                Outcome::Plain(o) => assert_eq!(acc, o.p_accept),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn tensor_of_independent_coins() {
        let c = MachineSpec::Pfa(coin(Role::Normal));
        let p = tensor(&c, &c).unwrap();
        let joint = p.final_masses(&['a']).unwrap();
        assert_eq!(p.mass_where(&joint, |l, r| l.accepting && r.accepting), ratio(1, 4));
        assert_eq!(p.mass_where(&joint, |l, _| l.accepting), ratio(1, 2));
    }

    #[test]
    fn tensor_rejects_mismatches() {
        let c = MachineSpec::Pfa(coin(Role::Normal));
        let s = MachineSpec::Pfa(always_send_one());
        assert!(matches!(tensor(&c, &s), Err(Error::Incompatible(_))));
    }

    fn random_pfa(n: usize, entries: Vec<u8>) -> PfaSpec {
        // Column-stochastic matrices from small weights; entries are recycled.
        let mut it = entries.into_iter().cycle();
        let mut column = |n: usize| -> Vec<Rational> {
            let w: Vec<i64> = (0..n).map(|_| i64::from(it.next().unwrap() % 4)).collect();
            let total: i64 = w.iter().sum();
            if total == 0 {
                let mut v = vec![int(0); n];
                v[0] = int(1);
                v
            } else {
                w.iter().map(|&x| ratio(x, total)).collect()
            }
        };
        let mut matrix = || {
            let cols: Vec<Vec<Rational>> = (0..n).map(|_| column(n)).collect();
            (0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect::<Vec<_>>()
        };
        let t = table(vec![('a', matrix()), ('b', matrix()), ('$', matrix())]).unwrap();
        let initial = column(n);
        let states = (0..n).map(|i| State::new(format!("q{i}"), Role::Normal, i % 2 == 0)).collect();
        PfaSpec::new(vec!['a', 'b'], states, initial, Transitions::Plain(t)).unwrap()
    }

    proptest! {
        #[test]
        fn pfa_mass_is_conserved(n in 1usize..4, entries in proptest::collection::vec(any::<u8>(), 8..40), w in "[ab]{0,6}") {
            let m = random_pfa(n, entries);
            let w: Vec<char> = w.chars().collect();
            let d = m.final_distribution(&w, None).unwrap();
            prop_assert_eq!(d.iter().sum::<Rational>(), int(1));
        }

        #[test]
        fn tensor_marginals_match_factors(
            n in 1usize..4, e1 in proptest::collection::vec(any::<u8>(), 8..40),
            m2 in 1usize..3, e2 in proptest::collection::vec(any::<u8>(), 8..40), w in "[ab]{0,5}"
        ) {
            let a = random_pfa(n, e1);
            let b = random_pfa(m2, e2);
            let p = tensor(&MachineSpec::Pfa(a.clone()), &MachineSpec::Pfa(b.clone())).unwrap();
            let w: Vec<char> = w.chars().collect();
            let joint = p.final_masses(&w).unwrap();
            let acc = |o: Outcome| match o { Outcome::Plain(p) => p.p_accept, _ => unreachable!() };
            prop_assert_eq!(p.mass_where(&joint, |l, _| l.accepting), acc(a.run(&w, None).unwrap()));
            prop_assert_eq!(p.mass_where(&joint, |_, r| r.accepting), acc(b.run(&w, None).unwrap()));
        }

        #[test]
        fn linear_is_homogeneous(k in 1i64..50, d in 1i64..50, w in "[ab]{0,6}") {
            let states = vec![State::new("acc", Role::PostAccept, true), State::new("rej", Role::PostReject, false)];
            let ma = Matrix::from_rows(vec![vec![int(1), int(1)], vec![int(0), int(2)]]).unwrap();
            let mb = Matrix::from_rows(vec![vec![int(2), int(0)], vec![int(-1), int(1)]]).unwrap();
            let t: BTreeMap<_, _> = [('a', ma), ('b', mb), ('$', Matrix::identity(2))].into_iter().collect();
            let make = |s: Rational| LinearFaSpec::new(
                vec!['a', 'b'], states.clone(), vec![s.clone(), s * int(2)], Transitions::Plain(t.clone()), int(3), None,
            ).unwrap();
            let w: Vec<char> = w.chars().collect();
            let base = run_linear(&make(int(1)), &w).unwrap();
            let scaled = run_linear(&make(ratio(k, d)), &w).unwrap();
            prop_assert_eq!(base.big_p_a, scaled.big_p_a);
        }
    }
}
