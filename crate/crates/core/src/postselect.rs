//! Postselection semantics and the two conversions between postselection
//! machines and one-bit CTC machines.

use num_traits::Zero;

use crate::consistency::Bit;
use crate::error::{Error, Result};
use crate::machines::{
    half_mixture, tensor, Family, LinearFaSpec, MachineSpec, PfaSpec, ResidualRule, Role, State, Transitions,
    END_MARKER,
};
use crate::matrix::Matrix;
use crate::rational::Rational;

/// Normalizes accept/reject mass over the postselected outcomes.
pub fn post_probabilities(p_a: &Rational, p_r: &Rational) -> Result<(Rational, Rational)> {
    let total = p_a + p_r;
    if total.is_zero() {
        return Err(Error::PostselectionMassZero { word: String::new() });
    }
    Ok((p_a / &total, p_r / &total))
}

fn require_post(m: &MachineSpec) -> Result<()> {
    if m.family() != Family::Post {
        return Err(Error::RoleViolation("expected a machine with postselection roles".into()));
    }
    Ok(())
}

/// Rebuilds a symbol-indexed table, giving the end-marker its own treatment.
fn rebuild(
    table: &std::collections::BTreeMap<char, Matrix>,
    symbol: impl Fn(&Matrix) -> Matrix,
    end: impl Fn(&Matrix) -> Matrix,
) -> std::collections::BTreeMap<char, Matrix> {
    table
        .iter()
        .map(|(&c, m)| (c, if c == END_MARKER { end(m) } else { symbol(m) }))
        .collect()
}

/// CTC machine that imitates `m` and at the end-marker
/// * accepts and sends 1 from a postselected-accept state,
/// * rejects and sends 0 from a postselected-reject state,
/// * otherwise decides by the received bit and sends it back unchanged.
///
/// Its bit evolution has flip probabilities `(p_a, p_r)`, so the unique
/// stationary distribution is `(p_r, p_a) / (p_a + p_r)` and the acceptance
/// equals `m`'s normalized `P_a`.
pub fn postselect_to_ctc(m: &MachineSpec) -> Result<MachineSpec> {
    require_post(m)?;
    match m {
        MachineSpec::Pfa(p) => pfa_to_ctc(p).map(MachineSpec::Pfa),
        MachineSpec::Linear(l) => linear_to_ctc(l).map(MachineSpec::Linear),
        MachineSpec::Dpda(_) => unreachable!("pushdown machines have no postselection roles"),
    }
}

fn pfa_to_ctc(p: &PfaSpec) -> Result<PfaSpec> {
    let n = p.states().len();
    let (acc, rej) = (n, n + 1);
    let mut states: Vec<State> = p
        .states()
        .iter()
        .map(|s| State::new(s.name.clone(), Role::Normal, false))
        .collect();
    states.push(State::new("acc/send1", Role::SendOne, true));
    states.push(State::new("rej/send0", Role::SendZero, false));
    let Transitions::Plain(table) = p.transitions() else {
        unreachable!("postselection machines are not CTC-indexed")
    };
    let for_bit = |bit: Bit| {
        let target: Vec<Option<usize>> = p
            .states()
            .iter()
            .map(|s| {
                Some(match s.role {
                    Role::PostAccept => acc,
                    Role::PostReject => rej,
                    _ if bit == Bit::One => acc,
                    _ => rej,
                })
            })
            .chain([Some(acc), Some(rej)])
            .collect();
        let grow = |m: &Matrix| m.direct_sum(&Matrix::identity(2));
        rebuild(table, grow, |e| grow(e).route_rows(&target, n + 2))
    };
    let mut initial = p.initial().to_vec();
    initial.extend([Rational::zero(), Rational::zero()]);
    PfaSpec::new(
        p.alphabet().to_vec(),
        states,
        initial,
        Transitions::Ctc([for_bit(Bit::Zero), for_bit(Bit::One)]),
    )
}

fn linear_to_ctc(l: &LinearFaSpec) -> Result<LinearFaSpec> {
    let n = l.states().len();
    let mut states: Vec<State> = l
        .states()
        .iter()
        .map(|s| State::new(s.name.clone(), Role::Normal, false))
        .collect();
    // Destination copy of each component per received bit.
    let mut dest = vec![[0usize; 2]; n];
    for (i, s) in l.states().iter().enumerate() {
        let mut copy = |suffix: &str, role, accepting| {
            states.push(State::new(format!("{}@{suffix}", s.name), role, accepting));
            states.len() - 1
        };
        dest[i] = match s.role {
            Role::PostAccept => [copy("acc", Role::SendOne, true); 2],
            Role::PostReject => [copy("rej", Role::SendZero, false); 2],
            _ => [copy("0", Role::SendZero, false), copy("1", Role::SendOne, true)],
        };
    }
    let total = states.len();
    let Transitions::Plain(table) = l.transitions() else {
        unreachable!("postselection machines are not CTC-indexed")
    };
    let for_bit = |bit: Bit| {
        let target: Vec<Option<usize>> = (0..total)
            .map(|i| (i < n).then(|| dest[i][bit.index()]))
            .collect();
        rebuild(table, |m| m.pad_zero(total), |e| e.pad_zero(total).route_rows(&target, total))
    };
    let mut initial = l.initial().to_vec();
    initial.resize(total, Rational::zero());
    LinearFaSpec::new(
        l.alphabet().to_vec(),
        states,
        initial,
        Transitions::Ctc([for_bit(Bit::Zero), for_bit(Bit::One)]),
        l.scale_bound().clone(),
        Some(ResidualRule::FollowBit),
    )
}

/// Postselection machine with the same acceptance as the CTC machine `m`.
///
/// `A0`, `A1` are the two bit fixings. Two copies of `A0 ⊗ A1` are mixed with
/// weight 1/2: in the first, the postselected events are "A1 sends 0" split by
/// whether A0 accepts; in the second, "A0 sends 1" split by whether A1 accepts.
/// The postselected masses are then
/// `p_Sa = (p0(A1) pa(A0) + p1(A0) pa(A1)) / 2` and the analogous `p_Sr`.
///
/// Linear machines must be norm-preserving: mass lost to the dilation is
/// decided by a residual rule that a tensor product cannot reproduce.
pub fn ctc_to_postselect(m: &MachineSpec) -> Result<MachineSpec> {
    if !m.is_ctc() || m.family() != Family::Branch {
        return Err(Error::RoleViolation("expected a CTC-indexed machine with send roles".into()));
    }
    let (a0, a1) = match m {
        MachineSpec::Pfa(p) => (MachineSpec::Pfa(p.fix_bit(Bit::Zero)?), MachineSpec::Pfa(p.fix_bit(Bit::One)?)),
        MachineSpec::Linear(l) => {
            if !l.is_norm_preserving() {
                return Err(Error::Incompatible(
                    "linear CTC machine is not norm-preserving; its residual rule has no tensor counterpart".into(),
                ));
            }
            let strip = |x: LinearFaSpec| {
                LinearFaSpec::new(
                    x.alphabet().to_vec(),
                    x.states().to_vec(),
                    x.initial().to_vec(),
                    x.transitions().clone(),
                    x.scale_bound().clone(),
                    None,
                )
            };
            (
                MachineSpec::Linear(strip(l.fix_bit(Bit::Zero)?)?),
                MachineSpec::Linear(strip(l.fix_bit(Bit::One)?)?),
            )
        }
        MachineSpec::Dpda(_) => {
            return Err(Error::Incompatible("pushdown machines have no tensor product".into()))
        }
    };
    let product = tensor(&a0, &a1)?;
    let post = |event: bool, accepting: bool| match (event, accepting) {
        (false, _) => (Role::NonPost, false),
        (true, true) => (Role::PostAccept, true),
        (true, false) => (Role::PostReject, false),
    };
    let t1 = product.with_roles(|q0, q1| post(q1.role == Role::SendZero, q0.accepting))?;
    let t2 = product.with_roles(|q0, q1| post(q0.role == Role::SendOne, q1.accepting))?;
    half_mixture(&t1, &t2)
}
