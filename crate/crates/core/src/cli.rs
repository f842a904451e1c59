//! Command-line front end. Exit codes: 0 accept, 1 reject, 2 undefined;
//! classify exits 1 on any mismatch. Failures use 64 and up.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::consistency::{stationary, Bit, BitEvolution, Bounds, Decision, Dist2, StationarySet, Verdict};
use crate::ctc1::ctc_semantics;
use crate::dpda::npda_branching2_to_ctc;
use crate::enumerate::{classify, decide, ClassifyReport, Exec};
use crate::error::{Error, Result};
use crate::format::{self, Document};
use crate::hopchain::{self, BranchSendProfile};
use crate::machines::{BranchOutcome, Family, MachineSpec, Outcome};
use crate::postselect::{ctc_to_postselect, postselect_to_ctc};
use crate::rational::{self, Rational};
use crate::zoo;

pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_PARSE: i32 = 65;
pub const EXIT_ALPHABET: i32 = 66;
pub const EXIT_SPEC: i32 = 67;
pub const EXIT_RUNTIME: i32 = 70;

pub fn exit_code(d: Decision) -> i32 {
    match d {
        Decision::Accept => 0,
        Decision::Reject => 1,
        Decision::Undefined => 2,
    }
}

pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => EXIT_USAGE,
        Error::Parse(_) => EXIT_PARSE,
        Error::SymbolNotInAlphabet { .. } => EXIT_ALPHABET,
        Error::InvalidSpec(_)
        | Error::RoleViolation(_)
        | Error::Nondeterministic(_)
        | Error::UnexpectedBit
        | Error::MissingBit => EXIT_SPEC,
        _ => EXIT_RUNTIME,
    }
}

#[derive(Parser, Debug)]
#[command(name = "ctc1", version, about = "Finite-state and pushdown machines with a one-bit CTC")]
pub struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Plain,
    Post,
    Ctc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Post,
    Ctc,
    Npda,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a machine on one word.
    Run {
        file: PathBuf,
        /// Input word; omit for the empty word.
        #[arg(default_value = "")]
        word: String,
        /// Semantics to apply; inferred from the machine when omitted.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Fix the CTC bit and report that single branch.
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        bit: Option<u8>,
    },
    /// Compare a machine with a reference language on all short words.
    Classify {
        file: PathBuf,
        #[arg(long)]
        max_len: usize,
        /// leq, pal, union-ijk, or regex:<pattern>.
        #[arg(long)]
        reference: String,
        /// Evaluate words on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Convert between postselection and CTC machines, or compile an NPDA.
    Convert {
        file: PathBuf,
        #[arg(long, value_enum)]
        from: Kind,
        #[arg(long, value_enum)]
        to: Kind,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Stationary set of a 2x2 bit evolution, e.g. '[["1","0"],["0","1"]]'.
    Stationary { matrix: String },
    /// Hop-chain consistency for a fixed-range channel.
    Hopchain {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        hops: usize,
        /// Probability that the branch reading 0 finally sends 0.
        #[arg(long, default_value = "0")]
        p0: String,
        /// Probability that the branch reading 1 finally sends 0.
        #[arg(long)]
        p1: String,
        /// The branch reading 0 never halts.
        #[arg(long)]
        branch0_loops: bool,
    },
    /// Witness machines.
    Zoo {
        #[arg(long)]
        list: bool,
        #[arg(long)]
        emit: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            error_code(&e)
        }
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Usage(format!("i/o error: {e}"))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    writeln!(out, "{text}").map_err(io)
}

fn q(x: &Rational) -> Value {
    Value::String(rational::format(x))
}

fn dist_json(d: &Dist2) -> Value {
    json!([q(d.p0()), q(d.p1())])
}

fn stationary_json(s: &StationarySet) -> Value {
    match s {
        StationarySet::Unique(d) => json!({"kind": "unique", "distribution": dist_json(d)}),
        StationarySet::All => json!({"kind": "all"}),
    }
}

fn evolution_json(e: &BitEvolution) -> Value {
    Value::Array(e.rows().iter().map(|r| json!([q(&r[0]), q(&r[1])])).collect())
}

fn bounds_json(b: &Bounds) -> Value {
    json!({"min": q(&b.min), "max": q(&b.max)})
}

fn verdict_json(v: &Verdict) -> Value {
    json!({
        "verdict": v.decision.to_string(),
        "evolution": v.evolution.as_ref().map(evolution_json),
        "stationary": stationary_json(&v.stationary),
        "acceptance": bounds_json(&v.acceptance),
        "rejection": bounds_json(&v.rejection),
    })
}

fn verdict_text(v: &Verdict) -> String {
    let mut s = String::new();
    if let Some(e) = &v.evolution {
        s += &format!("evolution:  {e}\n");
    }
    s += &format!("stationary: {}\n", v.stationary);
    s += &format!(
        "acceptance: [{}, {}]\nrejection:  [{}, {}]\nverdict:    {}",
        rational::format(&v.acceptance.min),
        rational::format(&v.acceptance.max),
        rational::format(&v.rejection.min),
        rational::format(&v.rejection.max),
        v.decision
    );
    s
}

fn branch_json(b: &BranchOutcome) -> Value {
    json!({
        "p_acc_send0": q(&b.p_acc_send0),
        "p_acc_send1": q(&b.p_acc_send1),
        "p_rej_send0": q(&b.p_rej_send0),
        "p_rej_send1": q(&b.p_rej_send1),
        "p_nonhalt": q(&b.p_nonhalt),
    })
}

fn parse_rational(s: &str) -> Result<Rational> {
    rational::parse(s)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Run { file, word, mode, bit } => cmd_run(cli.json, file, word, *mode, *bit, out),
        Command::Classify { file, max_len, reference, sequential } => {
            cmd_classify(cli.json, file, *max_len, reference, *sequential, out)
        }
        Command::Convert { file, from, to, output } => cmd_convert(file, *from, *to, output.as_deref(), out),
        Command::Stationary { matrix } => cmd_stationary(cli.json, matrix, out),
        Command::Hopchain { k, hops, p0, p1, branch0_loops } => {
            cmd_hopchain(cli.json, *k, *hops, p0, p1, *branch0_loops, out)
        }
        Command::Zoo { list, emit, output } => cmd_zoo(cli.json, *list, emit.as_deref(), output.as_deref(), out),
    }
}

fn cmd_run(json: bool, file: &std::path::Path, word: &str, mode: Option<Mode>, bit: Option<u8>, out: &mut dyn Write) -> Result<i32> {
    let m = format::load_machine(file)?;
    let w: Vec<char> = word.chars().collect();
    let inferred = if m.is_ctc() {
        Mode::Ctc
    } else if m.family() == Family::Post {
        Mode::Post
    } else {
        Mode::Plain
    };
    let mode = mode.unwrap_or(inferred);
    if mode != inferred {
        return Err(Error::Usage(format!(
            "mode {mode:?} does not match this {} machine (use {inferred:?})",
            m.model_name()
        )));
    }
    if let Some(b) = bit {
        if mode != Mode::Ctc {
            return Err(Error::UnexpectedBit);
        }
        let bit = Bit::from_index(usize::from(b));
        let o = m.run(&w, Some(bit))?.into_branch()?;
        if json {
            emit(out, &json!({"word": word, "bit": b, "branch": branch_json(&o)}).to_string())?;
        } else {
            emit(
                out,
                &format!(
                    "bit {bit}: accept&send0 {}  accept&send1 {}  reject&send0 {}  reject&send1 {}  nonhalting {}",
                    rational::format(&o.p_acc_send0),
                    rational::format(&o.p_acc_send1),
                    rational::format(&o.p_rej_send0),
                    rational::format(&o.p_rej_send1),
                    rational::format(&o.p_nonhalt)
                ),
            )?;
        }
        let d = if o.p_accept() >= rational::two_thirds() {
            Decision::Accept
        } else if o.p_reject() >= rational::two_thirds() {
            Decision::Reject
        } else {
            Decision::Undefined
        };
        return Ok(exit_code(d));
    }
    match mode {
        Mode::Ctc => {
            let v = ctc_semantics(&m, &w)?;
            if json {
                let mut j = verdict_json(&v);
                j["word"] = json!(word);
                emit(out, &j.to_string())?;
            } else {
                emit(out, &verdict_text(&v))?;
            }
            Ok(exit_code(v.decision))
        }
        Mode::Post | Mode::Plain => {
            let r = decide(&m, &w)?;
            let o = m.run(&w, None)?;
            if json {
                let probs = match &o {
                    Outcome::Post(p) => json!({"p_a": q(&p.p_a), "p_r": q(&p.p_r), "P_a": q(&p.big_p_a), "P_r": q(&p.big_p_r)}),
                    Outcome::Plain(p) => json!({"p_accept": q(&p.p_accept), "p_reject": q(&p.p_reject)}),
                    Outcome::Branch(b) => branch_json(b),
                };
                emit(out, &json!({"word": word, "outcome": probs, "verdict": r.decision.to_string()}).to_string())?;
            } else {
                match &o {
                    Outcome::Post(p) => emit(
                        out,
                        &format!(
                            "p_a = {}\np_r = {}\nP_a = {}\nP_r = {}",
                            rational::format(&p.p_a),
                            rational::format(&p.p_r),
                            rational::format(&p.big_p_a),
                            rational::format(&p.big_p_r)
                        ),
                    )?,
                    Outcome::Plain(p) => emit(
                        out,
                        &format!(
                            "accept = {}\nreject = {}",
                            rational::format(&p.p_accept),
                            rational::format(&p.p_reject)
                        ),
                    )?,
                    Outcome::Branch(_) => unreachable!("send-role machines run in ctc mode"),
                }
                emit(out, &format!("verdict: {}", r.decision))?;
            }
            Ok(exit_code(r.decision))
        }
    }
}

type Reference = Box<dyn Fn(&[char]) -> bool + Sync + Send>;

fn reference(name: &str) -> Result<Reference> {
    Ok(match name {
        "leq" => Box::new(zoo::is_leq),
        "pal" => Box::new(zoo::is_pal),
        "union-ijk" => Box::new(zoo::is_union_ijk),
        _ => match name.strip_prefix("regex:") {
            Some(pat) => {
                let re = regex::Regex::new(&format!("^(?:{pat})$"))
                    .map_err(|e| Error::Usage(format!("bad regex: {e}")))?;
                Box::new(move |w: &[char]| re.is_match(&w.iter().collect::<String>()))
            }
            None => {
                return Err(Error::Usage(format!(
                    "unknown reference {name:?}; use leq, pal, union-ijk or regex:<pattern>"
                )))
            }
        },
    })
}

fn report_json(r: &ClassifyReport) -> Value {
    json!({
        "words": r.words,
        "accepted": r.accepted,
        "rejected": r.rejected,
        "undefined": r.undefined,
        "mismatches": r.mismatches,
        "first_mismatch": r.first_mismatch.as_ref().map(|m| json!({
            "word": m.word, "verdict": m.got.to_string(), "member": m.expected
        })),
        "min_member_acceptance": r.min_member_acceptance.as_ref().map(q),
        "max_nonmember_acceptance": r.max_nonmember_acceptance.as_ref().map(q),
    })
}

fn cmd_classify(
    json: bool,
    file: &std::path::Path,
    max_len: usize,
    reference_name: &str,
    sequential: bool,
    out: &mut dyn Write,
) -> Result<i32> {
    let m = format::load_machine(file)?;
    let f = reference(reference_name)?;
    let exec = if sequential { Exec::Sequential } else { Exec::default() };
    let r = classify(&m, max_len, f, exec)?;
    if json {
        emit(out, &report_json(&r).to_string())?;
    } else {
        emit(
            out,
            &format!(
                "words: {}  accepted: {}  rejected: {}  undefined: {}  mismatches: {}",
                r.words, r.accepted, r.rejected, r.undefined, r.mismatches
            ),
        )?;
        if let Some(a) = &r.min_member_acceptance {
            emit(out, &format!("min member acceptance: {}", rational::format(a)))?;
        }
        if let Some(a) = &r.max_nonmember_acceptance {
            emit(out, &format!("max nonmember acceptance: {}", rational::format(a)))?;
        }
        if let Some(mm) = &r.first_mismatch {
            emit(
                out,
                &format!(
                    "first mismatch: {:?} -> {} (reference says {})",
                    mm.word,
                    mm.got,
                    if mm.expected { "member" } else { "nonmember" }
                ),
            )?;
        }
    }
    Ok(if r.mismatches == 0 { 0 } else { EXIT_MISMATCH })
}

fn write_doc(doc: &Document, output: Option<&std::path::Path>, out: &mut dyn Write) -> Result<()> {
    let text = format::to_json(doc)?;
    match output {
        Some(p) => std::fs::write(p, text + "\n").map_err(io),
        None => emit(out, &text),
    }
}

fn cmd_convert(
    file: &std::path::Path,
    from: Kind,
    to: Kind,
    output: Option<&std::path::Path>,
    out: &mut dyn Write,
) -> Result<i32> {
    let doc = format::load(file)?;
    let converted = match (from, to, doc) {
        (Kind::Post, Kind::Ctc, Document::Machine(m)) => postselect_to_ctc(&m)?,
        (Kind::Ctc, Kind::Post, Document::Machine(m)) => ctc_to_postselect(&m)?,
        (Kind::Npda, Kind::Ctc, Document::Npda(n)) => MachineSpec::Dpda(npda_branching2_to_ctc(&n)?),
        (from, to, _) => {
            return Err(Error::Usage(format!(
                "cannot convert {from:?} to {to:?} for this file (supported: post->ctc, ctc->post, npda->ctc)"
            )))
        }
    };
    write_doc(&Document::Machine(converted), output, out)?;
    Ok(0)
}

fn cmd_stationary(json: bool, matrix: &str, out: &mut dyn Write) -> Result<i32> {
    let text = matrix.replace('\'', "\"");
    let rows: Vec<Vec<rational::Q>> = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("matrix: {e}")))?;
    let rows = rational::unwrap_matrix(rows);
    let e = BitEvolution::from_rows(&rows)?;
    let s = stationary(&e);
    if json {
        emit(out, &json!({"evolution": evolution_json(&e), "stationary": stationary_json(&s)}).to_string())?;
    } else {
        emit(out, &s.to_string())?;
    }
    Ok(0)
}

fn cmd_hopchain(
    json: bool,
    k: usize,
    hops: usize,
    p0: &str,
    p1: &str,
    branch0_loops: bool,
    out: &mut dyn Write,
) -> Result<i32> {
    if hops == 0 {
        return Err(Error::Usage("--hops must be at least 1".into()));
    }
    let p1 = parse_rational(p1)?;
    // Longest program that still needs exactly `hops` hops.
    let mut n = 0;
    while hopchain::trace_rewrite(n + 1, k)?.hops() <= hops {
        n += 1;
    }
    let schedule = hopchain::trace_rewrite(n, k)?;
    let positions: Vec<Value> = schedule.positions.iter().map(|(r, s)| json!({"r": r, "s": s})).collect();
    if branch0_loops {
        let (s, v) = hopchain::with_infinite_branch(p1)?;
        if json {
            let mut j = verdict_json(&v);
            j["positions"] = Value::Array(positions);
            emit(out, &j.to_string())?;
        } else {
            emit(out, "branch 0 never halts")?;
            emit(out, &format!("stationary: {s}"))?;
            emit(out, &format!("verdict: {}", v.decision))?;
        }
        return Ok(exit_code(v.decision));
    }
    let profile = BranchSendProfile::halting(parse_rational(p0)?, p1)?;
    let a = hopchain::hop_chain_analysis(&profile, hops)?;
    if json {
        emit(
            out,
            &json!({
                "k": k,
                "hops": hops,
                "positions": positions,
                "relays": a.relays.iter().map(|h| json!({
                    "hop": h.hop, "carried": [dist_json(&h.carried[0]), dist_json(&h.carried[1])]
                })).collect::<Vec<_>>(),
                "first_hop_evolution": evolution_json(&a.first),
                "stationary": stationary_json(&a.stationary),
            })
            .to_string(),
        )?;
    } else {
        let pos: Vec<String> = schedule
            .positions
            .iter()
            .enumerate()
            .map(|(i, (r, s))| format!("r{}@{r} s{}@{s}", i + 1, i + 1))
            .collect();
        emit(out, &format!("schedule (k = {k}): {}", pos.join(", ")))?;
        emit(out, &a.to_string())?;
    }
    Ok(0)
}

fn cmd_zoo(json: bool, list: bool, name: Option<&str>, output: Option<&std::path::Path>, out: &mut dyn Write) -> Result<i32> {
    match (list, name) {
        (true, _) => {
            if json {
                let items: Vec<Value> = zoo::CATALOG.iter().map(|(n, d)| json!({"name": n, "description": d})).collect();
                emit(out, &Value::Array(items).to_string())?;
            } else {
                for (n, d) in zoo::CATALOG {
                    emit(out, &format!("{n:16} {d}"))?;
                }
            }
            Ok(0)
        }
        (false, Some(n)) => {
            write_doc(&zoo::build(n)?, output, out)?;
            Ok(0)
        }
        (false, None) => Err(Error::Usage("zoo needs --list or --emit <name>".into())),
    }
}

/// Sizes the rayon pool from `CTC1_WORKERS` when set.
pub fn configure_workers() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("CTC1_WORKERS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
