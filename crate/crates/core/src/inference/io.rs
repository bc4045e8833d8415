//! Evidence files and posterior CSV.
//!
//! Evidence files hold one case per line as comma-separated `var=state`
//! pairs, with names as in the network. `#` starts a comment. A blank line
//! is a case with no evidence; a line holding only a comment is skipped.

use std::io::{self, Write};

use super::{InferenceError, Posteriors};
use crate::network::{BayesianNetwork, Evidence};

pub const CSV_HEADER: &str = "case_id,variable,state,posterior";
pub const ZERO_PROBABILITY_FLAG: &str = "ZERO_PROBABILITY_EVIDENCE";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvidenceFileError {
    #[error("line {line}: expected `variable=state`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown variable `{name}`")]
    UnknownVariable { line: usize, name: String },
    #[error("line {line}: variable `{variable}` has no state `{state}`")]
    UnknownState { line: usize, variable: String, state: String },
    #[error("line {line}: variable `{name}` observed twice")]
    Duplicate { line: usize, name: String },
}

/// One case per non-comment line, in file order.
pub fn parse_evidence_file(net: &BayesianNetwork, text: &str) -> Result<Vec<Evidence>, EvidenceFileError> {
    let mut cases = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let (body, comment) = match raw.split_once('#') {
            Some((b, _)) => (b, true),
            None => (raw, false),
        };
        let body = body.trim();
        if body.is_empty() && comment {
            continue;
        }
        cases.push(parse_case(net, body, line)?);
    }
    Ok(cases)
}

fn parse_case(net: &BayesianNetwork, body: &str, line: usize) -> Result<Evidence, EvidenceFileError> {
    let mut evidence = Evidence::new();
    if body.is_empty() {
        return Ok(evidence);
    }
    for pair in body.split(',') {
        let syntax = || EvidenceFileError::Syntax {
            line,
            text: pair.trim().to_string(),
        };
        let (name, state) = pair.split_once('=').ok_or_else(syntax)?;
        let (name, state) = (name.trim(), state.trim());
        if name.is_empty() || state.is_empty() {
            return Err(syntax());
        }
        let var = net.var_by_name(name).ok_or_else(|| EvidenceFileError::UnknownVariable {
            line,
            name: name.to_string(),
        })?;
        let s = net.variable(var).state_index(state).ok_or_else(|| EvidenceFileError::UnknownState {
            line,
            variable: name.to_string(),
            state: state.to_string(),
        })?;
        if evidence.insert(var, s).is_some() {
            return Err(EvidenceFileError::Duplicate {
                line,
                name: name.to_string(),
            });
        }
    }
    Ok(evidence)
}

/// Renders evidence in the file syntax.
pub fn format_evidence(net: &BayesianNetwork, evidence: &Evidence) -> String {
    evidence
        .iter()
        .map(|(v, s)| {
            let var = net.variable(v);
            format!("{}={}", var.name, var.states[s])
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// Twelve significant digits in scientific notation.
pub fn format_probability(p: f64) -> String {
    format!("{p:.11e}")
}

/// Writes one case's rows: posteriors in variable id order, or the
/// zero-probability flag row. Other errors are returned unchanged.
pub fn write_case<W: Write>(
    out: &mut W,
    net: &BayesianNetwork,
    case_id: usize,
    outcome: &Result<Posteriors, InferenceError>,
) -> io::Result<()> {
    match outcome {
        Ok(posteriors) => {
            for q in posteriors.values() {
                let var = net.variable(q.variable);
                for (state, p) in var.states.iter().zip(&q.posterior) {
                    writeln!(out, "{case_id},{},{},{}", csv_field(&var.name), csv_field(state), format_probability(*p))?;
                }
            }
            Ok(())
        }
        Err(InferenceError::ZeroProbabilityEvidence) => writeln!(out, "{case_id},,,{ZERO_PROBABILITY_FLAG}"),
        Err(e) => Err(io::Error::other(e.to_string())),
    }
}

fn csv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}
