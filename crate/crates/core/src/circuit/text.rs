//! Line-oriented circuit format.
//!
//! ```text
//! QUBITS 3
//! RZ q0 1.5707963267948966
//! U q1 0.5 0 3.141592653589793
//! CNOT q0 q1
//! BARRIER q0 q1 q2
//! MEASURE q0 X
//! ```
//!
//! Angles use Rust's shortest round-trip float formatting, so a write/read
//! cycle is bit-exact. Blank lines and `#` comments are ignored.

use std::fmt;

use super::{Basis, Circuit, Gate};
use crate::error::{Error, Result};

pub(super) fn write(c: &Circuit, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    writeln!(f, "QUBITS {}", c.n_qubits())?;
    for g in c.gates() {
        writeln!(f, "{g}")?;
    }
    for (q, b) in c.measure_basis().iter().enumerate() {
        if let Some(b) = b {
            writeln!(f, "MEASURE q{q} {}", b.label())?;
        }
    }
    Ok(())
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn qubit(line: usize, tok: Option<&str>) -> Result<usize> {
    let tok = tok.ok_or_else(|| err(line, "missing qubit"))?;
    tok.strip_prefix('q')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err(line, format!("bad qubit token {tok:?}")))
}

fn angle(line: usize, tok: Option<&str>) -> Result<f64> {
    let tok = tok.ok_or_else(|| err(line, "missing angle"))?;
    tok.parse()
        .map_err(|_| err(line, format!("bad angle {tok:?}")))
}

pub(super) fn parse(s: &str) -> Result<Circuit> {
    let mut circuit: Option<Circuit> = None;
    for (idx, raw) in s.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let op = toks.next().expect("non-empty line");
        if op == "QUBITS" {
            if circuit.is_some() {
                return Err(err(line, "duplicate QUBITS header"));
            }
            let n = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(line, "QUBITS needs a count"))?;
            circuit = Some(Circuit::new(n));
            continue;
        }
        let c = circuit
            .as_mut()
            .ok_or_else(|| err(line, "missing QUBITS header"))?;
        let gate = match op {
            "RZ" => Gate::rz(qubit(line, toks.next())?, angle(line, toks.next())?),
            "SX" => Gate::sx(qubit(line, toks.next())?),
            "X" => Gate::x(qubit(line, toks.next())?),
            "U" => {
                let q = qubit(line, toks.next())?;
                let t = angle(line, toks.next())?;
                let p = angle(line, toks.next())?;
                let l = angle(line, toks.next())?;
                Gate::u(q, t, p, l)
            }
            "CNOT" => Gate::cnot(qubit(line, toks.next())?, qubit(line, toks.next())?),
            "BARRIER" => {
                let qs = toks
                    .by_ref()
                    .map(|t| qubit(line, Some(t)))
                    .collect::<Result<Vec<_>>>()?;
                Gate::Barrier(qs)
            }
            "MEASURE" => {
                let q = qubit(line, toks.next())?;
                let b = toks
                    .next()
                    .and_then(|t| {
                        let mut cs = t.chars();
                        match (cs.next(), cs.next()) {
                            (Some(ch), None) => Basis::from_char(ch),
                            _ => None,
                        }
                    })
                    .ok_or_else(|| err(line, "MEASURE needs a basis X, Y or Z"))?;
                c.measure(q, b).map_err(|e| err(line, e.to_string()))?;
                if toks.next().is_some() {
                    return Err(err(line, "trailing tokens"));
                }
                continue;
            }
            other => return Err(err(line, format!("unknown instruction {other:?}"))),
        };
        if toks.next().is_some() {
            return Err(err(line, "trailing tokens"));
        }
        c.push(gate).map_err(|e| err(line, e.to_string()))?;
    }
    circuit.ok_or_else(|| err(0, "empty circuit text"))
}
