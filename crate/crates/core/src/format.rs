//! JSON machine files.
//!
//! ```json
//! {
//!   "model": "pfa",
//!   "alphabet": ["a", "b"],
//!   "states": [{"name": "s", "role": "normal", "accepting": false}, ...],
//!   "initial": {"s": "1"},
//!   "transitions": {"a": [["1", "0"], ["0", "1"]], "$": ...},
//!   "transitions_bit0": {"$": ...},
//!   "transitions_bit1": {"$": ...}
//! }
//! ```
//!
//! Matrices are row-major, entry `(i, j)` moving mass from state `j` to
//! state `i`, with every number a `"num/den"` string. A CTC machine's table
//! for bit `b` is `transitions` overridden by `transitions_bit<b>`.
//!
//! Linear machines add `"scale_bound"` and optionally `"residual"`. Pushdown
//! machines use `"initial": "<state>"`, `"stack_alphabet"`, `"bottom"`, and
//! transitions keyed `"state,symbol,top[,bit]"` (symbol `""` or `"eps"` for
//! an epsilon move) with values `{"to": ..., "push": ...}`; NPDAs map each key
//! to a list of such values and declare `"branching"`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::consistency::Bit;
use crate::dpda::{DpdaSpec, Move, MoveKey, NpdaSpec};
use crate::error::{Error, Result};
use crate::machines::{LinearFaSpec, MachineSpec, PfaSpec, ResidualRule, State, Symbol, Transitions};
use crate::matrix::Matrix;
use crate::rational::{unwrap_matrix, wrap_matrix, Rational, Q};

/// Anything a machine file can hold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Document {
    Machine(MachineSpec),
    Npda(NpdaSpec),
}

type Table = BTreeMap<String, Vec<Vec<Q>>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    model: String,
    alphabet: Vec<String>,
    states: Vec<State>,
    initial: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transitions: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transitions_bit0: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transitions_bit1: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale_bound: Option<Q>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    residual: Option<ResidualRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stack_alphabet: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bottom: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    branching: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileMove {
    to: String,
    #[serde(default)]
    push: String,
}

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

fn one_char(s: &str, what: &str) -> Result<char> {
    let mut it = s.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(Error::Parse(format!("{what} {s:?} must be a single character"))),
    }
}

fn chars(v: &[String], what: &str) -> Result<Vec<char>> {
    v.iter().map(|s| one_char(s, what)).collect()
}

fn strings(v: &[char]) -> Vec<String> {
    v.iter().map(char::to_string).collect()
}

fn state_index(states: &[State], name: &str) -> Result<usize> {
    states
        .iter()
        .position(|s| s.name == name)
        .ok_or_else(|| Error::Parse(format!("unknown state {name:?}")))
}

fn field<T: serde::de::DeserializeOwned>(v: Option<Value>, what: &str) -> Result<T> {
    let v = v.ok_or_else(|| Error::Parse(format!("missing field {what:?}")))?;
    serde_json::from_value(v).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

fn read_table(t: Table) -> Result<BTreeMap<Symbol, Matrix>> {
    t.into_iter()
        .map(|(c, rows)| Ok((one_char(&c, "transition symbol")?, Matrix::from_rows(unwrap_matrix(rows))?)))
        .collect()
}

fn write_table(t: &BTreeMap<Symbol, Matrix>) -> Table {
    t.iter().map(|(c, m)| (c.to_string(), wrap_matrix(m.rows()))).collect()
}

fn read_transitions(f: &mut File) -> Result<Transitions> {
    let shared: Table = match f.transitions.take() {
        Some(v) => field(Some(v), "transitions")?,
        None => Table::new(),
    };
    match (f.transitions_bit0.take(), f.transitions_bit1.take()) {
        (None, None) => Ok(Transitions::Plain(read_table(shared)?)),
        (Some(t0), Some(t1)) => {
            let merged = |own: Table| {
                let mut t = shared.clone();
                t.extend(own);
                read_table(t)
            };
            Ok(Transitions::Ctc([
                merged(field(Some(t0), "transitions_bit0")?)?,
                merged(field(Some(t1), "transitions_bit1")?)?,
            ]))
        }
        _ => Err(Error::Parse("give both transitions_bit0 and transitions_bit1, or neither".into())),
    }
}

fn write_transitions(t: &Transitions, f: &mut File) {
    match t {
        Transitions::Plain(t) => f.transitions = Some(serde_json::to_value(write_table(t)).expect("plain data")),
        Transitions::Ctc([t0, t1]) => {
            let mut shared = BTreeMap::new();
            let mut own = [BTreeMap::new(), BTreeMap::new()];
            for (c, m) in t0 {
                if t1.get(c) == Some(m) {
                    shared.insert(*c, m.clone());
                } else {
                    own[0].insert(*c, m.clone());
                    own[1].insert(*c, t1[c].clone());
                }
            }
            let value = |t: &BTreeMap<Symbol, Matrix>| Some(serde_json::to_value(write_table(t)).expect("plain data"));
            if !shared.is_empty() {
                f.transitions = value(&shared);
            }
            f.transitions_bit0 = value(&own[0]);
            f.transitions_bit1 = value(&own[1]);
        }
    }
}

fn read_initial_vector(states: &[State], v: Value) -> Result<Vec<Rational>> {
    let map: BTreeMap<String, Q> = field(Some(v), "initial")?;
    let mut out = vec![Rational::default(); states.len()];
    for (name, q) in map {
        out[state_index(states, &name)?] = q.0;
    }
    Ok(out)
}

fn write_initial_vector(states: &[State], v: &[Rational]) -> Value {
    let map: BTreeMap<&str, Q> = states
        .iter()
        .zip(v)
        .filter(|(_, q)| **q != Rational::default())
        .map(|(s, q)| (s.name.as_str(), Q(q.clone())))
        .collect();
    serde_json::to_value(map).expect("plain data")
}

fn parse_key(key: &str, states: &[State], bits_allowed: bool) -> Result<(usize, Option<Symbol>, char, Option<Bit>)> {
    let parts: Vec<&str> = key.split(',').collect();
    if !(parts.len() == 3 || (bits_allowed && parts.len() == 4)) {
        return Err(Error::Parse(format!("transition key {key:?} must be \"state,symbol,top[,bit]\"")));
    }
    let state = state_index(states, parts[0])?;
    let input = match parts[1] {
        "" | "eps" => None,
        s => Some(one_char(s, "input symbol")?),
    };
    let top = one_char(parts[2], "stack symbol")?;
    let bit = match parts.get(3) {
        None => None,
        Some(&"0") => Some(Bit::Zero),
        Some(&"1") => Some(Bit::One),
        Some(b) => return Err(Error::Parse(format!("bit {b:?} must be 0 or 1"))),
    };
    Ok((state, input, top, bit))
}

fn write_key(states: &[State], state: usize, input: Option<Symbol>, top: char, bit: Option<Bit>) -> String {
    let input = input.map_or_else(|| "eps".to_string(), |c| c.to_string());
    let mut key = format!("{},{input},{top}", states[state].name);
    if let Some(b) = bit {
        key.push_str(&format!(",{b}"));
    }
    key
}

fn read_move(states: &[State], m: FileMove) -> Result<Move> {
    Ok(Move {
        to: state_index(states, &m.to)?,
        push: m.push.chars().collect(),
    })
}

fn write_move(states: &[State], m: &Move) -> FileMove {
    FileMove {
        to: states[m.to].name.clone(),
        push: m.push.iter().collect(),
    }
}

fn check_names(states: &[State]) -> Result<()> {
    match states.iter().find(|s| s.name.contains(',')) {
        Some(s) => Err(Error::InvalidSpec(format!(
            "pushdown state names cannot contain ',' ({:?})",
            s.name
        ))),
        None => Ok(()),
    }
}

pub fn from_json(text: &str) -> Result<Document> {
    let mut f: File = serde_json::from_str(text).map_err(parse_err)?;
    let alphabet = chars(&f.alphabet, "input symbol")?;
    let states = f.states.clone();
    let stack = |f: &File| -> Result<(Vec<char>, char, usize)> {
        let stack_alphabet = chars(f.stack_alphabet.as_deref().unwrap_or_default(), "stack symbol")?;
        let bottom = one_char(f.bottom.as_deref().unwrap_or_default(), "bottom marker")?;
        let initial = match &f.initial {
            Value::String(name) => state_index(&states, name)?,
            _ => return Err(Error::Parse("pushdown \"initial\" must be a state name".into())),
        };
        Ok((stack_alphabet, bottom, initial))
    };
    let doc = match f.model.as_str() {
        "pfa" => {
            let initial = read_initial_vector(&states, f.initial.take())?;
            let t = read_transitions(&mut f)?;
            Document::Machine(MachineSpec::Pfa(PfaSpec::new(alphabet, states, initial, t)?))
        }
        "linear" => {
            let initial = read_initial_vector(&states, f.initial.take())?;
            let t = read_transitions(&mut f)?;
            let c = f.scale_bound.take().ok_or_else(|| Error::Parse("missing field \"scale_bound\"".into()))?;
            Document::Machine(MachineSpec::Linear(LinearFaSpec::new(
                alphabet, states, initial, t, c.0, f.residual,
            )?))
        }
        "dpda" => {
            let (stack_alphabet, bottom, initial) = stack(&f)?;
            let raw: BTreeMap<String, FileMove> = field(f.transitions.take(), "transitions")?;
            let mut moves = BTreeMap::new();
            for (key, m) in raw {
                let (state, input, top, bit) = parse_key(&key, &states, true)?;
                moves.insert(MoveKey { state, input, top, bit }, read_move(&states, m)?);
            }
            let ctc = moves.keys().any(|k| k.bit.is_some())
                || states.iter().any(|s| s.role.sends().is_some());
            Document::Machine(MachineSpec::Dpda(DpdaSpec::new(
                alphabet,
                stack_alphabet,
                bottom,
                states,
                initial,
                ctc,
                moves,
            )?))
        }
        "npda" => {
            let (stack_alphabet, bottom, initial) = stack(&f)?;
            let raw: BTreeMap<String, Vec<FileMove>> = field(f.transitions.take(), "transitions")?;
            let mut moves = BTreeMap::new();
            for (key, ms) in raw {
                let (state, input, top, _) = parse_key(&key, &states, false)?;
                let ms = ms.into_iter().map(|m| read_move(&states, m)).collect::<Result<Vec<_>>>()?;
                moves.insert((state, input, top), ms);
            }
            let branching = f.branching.ok_or_else(|| Error::Parse("missing field \"branching\"".into()))?;
            Document::Npda(NpdaSpec::new(
                alphabet,
                stack_alphabet,
                bottom,
                states,
                initial,
                moves,
                branching,
            )?)
        }
        other => return Err(Error::Parse(format!("unknown model {other:?}"))),
    };
    Ok(doc)
}

fn empty(model: &str, alphabet: &[Symbol], states: &[State], initial: Value) -> File {
    File {
        model: model.into(),
        alphabet: strings(alphabet),
        states: states.to_vec(),
        initial,
        transitions: None,
        transitions_bit0: None,
        transitions_bit1: None,
        scale_bound: None,
        residual: None,
        stack_alphabet: None,
        bottom: None,
        branching: None,
    }
}

pub fn to_json(doc: &Document) -> Result<String> {
    let f = match doc {
        Document::Machine(MachineSpec::Pfa(p)) => {
            let mut f = empty("pfa", p.alphabet(), p.states(), write_initial_vector(p.states(), p.initial()));
            write_transitions(p.transitions(), &mut f);
            f
        }
        Document::Machine(MachineSpec::Linear(l)) => {
            let mut f = empty("linear", l.alphabet(), l.states(), write_initial_vector(l.states(), l.initial()));
            write_transitions(l.transitions(), &mut f);
            f.scale_bound = Some(Q(l.scale_bound().clone()));
            f.residual = l.residual();
            f
        }
        Document::Machine(MachineSpec::Dpda(d)) => {
            check_names(d.states())?;
            let initial = Value::String(d.states()[d.initial()].name.clone());
            let mut f = empty("dpda", d.alphabet(), d.states(), initial);
            let moves: BTreeMap<String, FileMove> = d
                .moves()
                .iter()
                .map(|(k, m)| (write_key(d.states(), k.state, k.input, k.top, k.bit), write_move(d.states(), m)))
                .collect();
            f.transitions = Some(serde_json::to_value(moves).map_err(parse_err)?);
            f.stack_alphabet = Some(strings(d.stack_alphabet()));
            f.bottom = Some(d.bottom().to_string());
            f
        }
        Document::Npda(n) => {
            check_names(n.states())?;
            let initial = Value::String(n.states()[n.initial()].name.clone());
            let mut f = empty("npda", n.alphabet(), n.states(), initial);
            let moves: BTreeMap<String, Vec<FileMove>> = n
                .moves()
                .iter()
                .map(|(&(q, input, top), ms)| {
                    (
                        write_key(n.states(), q, input, top, None),
                        ms.iter().map(|m| write_move(n.states(), m)).collect(),
                    )
                })
                .collect();
            f.transitions = Some(serde_json::to_value(moves).map_err(parse_err)?);
            f.stack_alphabet = Some(strings(n.stack_alphabet()));
            f.bottom = Some(n.bottom().to_string());
            f.branching = Some(n.branching());
            f
        }
    };
    serde_json::to_string_pretty(&f).map_err(parse_err)
}

pub fn load(path: &std::path::Path) -> Result<Document> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    from_json(&text)
}

pub fn load_machine(path: &std::path::Path) -> Result<MachineSpec> {
    match load(path)? {
        Document::Machine(m) => Ok(m),
        Document::Npda(_) => Err(Error::Usage(
            "this command needs a machine with defined semantics; convert the NPDA first".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    fn round_trip(doc: Document) {
        let text = to_json(&doc).unwrap();
        let back = from_json(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(to_json(&back).unwrap(), text);
    }

    #[test]
    fn zoo_round_trips() {
        for (name, _) in zoo::CATALOG {
            round_trip(zoo::build(name).unwrap());
        }
    }

    #[test]
    fn hand_written_pfa() {
        let text = r#"{
            "model": "pfa",
            "alphabet": ["a"],
            "states": [{"name": "s", "role": "post_accept", "accepting": true},
                       {"name": "t", "role": "post_reject"}],
            "initial": {"s": "1/2", "t": "1/2"},
            "transitions": {"a": [["1", "0"], ["0", "1"]], "$": [["1", 0], ["0", 1]]}
        }"#;
        let Document::Machine(m) = from_json(text).unwrap() else { panic!() };
        let o = m.run(&['a'], None).unwrap().into_post().unwrap();
        assert_eq!(o.big_p_a, crate::rational::ratio(1, 2));
    }

    #[test]
    fn errors_are_parse_errors() {
        assert!(matches!(from_json("{"), Err(Error::Parse(_))));
        assert!(matches!(
            from_json(r#"{"model": "tm", "alphabet": [], "states": [], "initial": {}}"#),
            Err(Error::Parse(_))
        ));
        let bad_state = r#"{"model": "pfa", "alphabet": ["a"], "states": [{"name": "s", "role": "normal"}],
            "initial": {"q": "1"}, "transitions": {"a": [["1"]], "$": [["1"]]}}"#;
        assert!(matches!(from_json(bad_state), Err(Error::Parse(_))));
        let not_stochastic = r#"{"model": "pfa", "alphabet": ["a"], "states": [{"name": "s", "role": "normal"}],
            "initial": {"s": "1"}, "transitions": {"a": [["1/2"]], "$": [["1"]]}}"#;
        assert!(matches!(from_json(not_stochastic), Err(Error::InvalidSpec(_))));
    }
}
