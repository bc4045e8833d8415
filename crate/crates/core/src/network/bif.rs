//! Reader and writer for the BIF 0.3 interchange format as published in the
//! bnlearn repository.
//!
//! Both probability syntaxes are accepted:
//!
//! ```text
//! probability ( Child | P1, P2 ) {
//!   (p1_state, p2_state) 0.1, 0.9;
//!   default 0.5, 0.5;
//! }
//! probability ( Root ) {
//!   table 0.4, 0.6;
//! }
//! ```
//!
//! A `table` body lists one row per parent configuration, last parent
//! fastest. `property` entries anywhere are skipped.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{BayesianNetwork, Cpt, InvalidNetwork, VarId, Variable, ROW_SUM_TOLERANCE};

#[derive(Debug, thiserror::Error)]
pub enum BifError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown variable `{name}` in probability block")]
    UnknownVariable { name: String, line: usize, col: usize },
    #[error("{line}:{col}: unknown state `{state}` for variable `{var}`")]
    UnknownState {
        var: String,
        state: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: variable `{name}` declared twice")]
    DuplicateVariable { name: String, line: usize, col: usize },
    #[error("{line}:{col}: `{var}`: expected {expected} probabilities, found {found}")]
    RowLength {
        var: String,
        expected: usize,
        found: usize,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: `{var}`: row sums to {sum}, outside 1 ± {ROW_SUM_TOLERANCE}")]
    RowSum {
        var: String,
        sum: f64,
        line: usize,
        col: usize,
    },
    #[error("`{var}`: no probabilities given for parent configuration {row}")]
    MissingRow { var: String, row: usize },
    #[error("`{0}`: no probability block")]
    MissingTable(String),
    #[error(transparent)]
    Invalid(#[from] InvalidNetwork),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Punct(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCT: &[char] = &['{', '}', '(', ')', '[', ']', ';', ',', '|'];

fn tokenize(text: &str) -> Result<Vec<Token>, BifError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        if c.is_whitespace() {
            bump!();
        } else if c == '/' {
            bump!();
            match chars.peek() {
                Some('/') => {
                    while let Some(c) = bump!() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                Some('*') => {
                    bump!();
                    let mut prev = '\0';
                    loop {
                        match bump!() {
                            Some('/') if prev == '*' => break,
                            Some(c) => prev = c,
                            None => {
                                return Err(BifError::Syntax {
                                    line: tl,
                                    col: tc,
                                    msg: "unterminated comment".into(),
                                })
                            }
                        }
                    }
                }
                _ => {
                    return Err(BifError::Syntax {
                        line: tl,
                        col: tc,
                        msg: "stray `/`".into(),
                    })
                }
            }
        } else if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                match bump!() {
                    Some('"') => break,
                    Some(c) => s.push(c),
                    None => {
                        return Err(BifError::Syntax {
                            line: tl,
                            col: tc,
                            msg: "unterminated string".into(),
                        })
                    }
                }
            }
            out.push(Token {
                tok: Tok::Word(s),
                line: tl,
                col: tc,
            });
        } else if PUNCT.contains(&c) {
            bump!();
            out.push(Token {
                tok: Tok::Punct(c),
                line: tl,
                col: tc,
            });
        } else {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() || PUNCT.contains(&c) || c == '"' {
                    break;
                }
                s.push(c);
                bump!();
            }
            out.push(Token {
                tok: Tok::Word(s),
                line: tl,
                col: tc,
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|t| (t.line, t.col)).unwrap_or(self.eof)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, BifError> {
        let (line, col) = self.here();
        Err(BifError::Syntax {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_punct(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Punct(p), .. }) if *p == c)
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Word(s), .. }) if s == w)
    }

    fn punct(&mut self, c: char) -> Result<(), BifError> {
        if self.at_punct(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn word(&mut self) -> Result<Token, BifError> {
        match self.peek() {
            Some(Token { tok: Tok::Word(_), .. }) => Ok(self.next().unwrap()),
            _ => self.err("expected a name"),
        }
    }

    fn keyword(&mut self, w: &str) -> Result<(), BifError> {
        if self.at_word(w) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{w}`"))
        }
    }

    fn skip_property(&mut self) -> Result<(), BifError> {
        self.keyword("property")?;
        while !self.at_punct(';') {
            if self.next().is_none() {
                return self.err("unterminated property");
            }
        }
        self.punct(';')
    }

    /// Numbers up to `;`, commas optional.
    fn numbers(&mut self) -> Result<Vec<f64>, BifError> {
        let mut out = Vec::new();
        loop {
            if self.at_punct(';') {
                self.pos += 1;
                return Ok(out);
            }
            if self.at_punct(',') {
                self.pos += 1;
                continue;
            }
            let t = self.word()?;
            let Tok::Word(s) = &t.tok else { unreachable!() };
            match s.parse::<f64>() {
                Ok(v) => out.push(v),
                Err(_) => {
                    return Err(BifError::Syntax {
                        line: t.line,
                        col: t.col,
                        msg: format!("expected a number, found `{s}`"),
                    })
                }
            }
        }
    }

    /// `WORD (, WORD)*` terminated by `close` (consumed).
    fn name_list(&mut self, close: char) -> Result<Vec<Token>, BifError> {
        let mut out = vec![self.word()?];
        while self.at_punct(',') {
            self.pos += 1;
            out.push(self.word()?);
        }
        self.punct(close)?;
        Ok(out)
    }
}

fn text(t: &Token) -> &str {
    match &t.tok {
        Tok::Word(s) => s,
        Tok::Punct(_) => "",
    }
}

struct PendingCpt {
    child: VarId,
    parents: Vec<VarId>,
    probabilities: Vec<f64>,
}

/// Parses and validates a BIF document. Variable ids follow declaration order.
/// Rows accepted within the row-sum tolerance are rescaled to sum to 1.
pub fn parse_bif(input: &str) -> Result<BayesianNetwork, BifError> {
    let toks = tokenize(input)?;
    let eof = toks
        .last()
        .map(|t| (t.line, t.col + 1))
        .unwrap_or((1, 1));
    let mut p = Parser { toks, pos: 0, eof };

    let mut name = String::from("unknown");
    let mut variables: Vec<Variable> = Vec::new();
    let mut index: HashMap<String, VarId> = HashMap::new();
    let mut pending: Vec<PendingCpt> = Vec::new();

    while let Some(tok) = p.peek().cloned() {
        match text(&tok) {
            "network" => {
                p.pos += 1;
                name = text(&p.word()?).to_string();
                p.punct('{')?;
                while !p.at_punct('}') {
                    p.skip_property()?;
                }
                p.punct('}')?;
            }
            "variable" => {
                p.pos += 1;
                let vt = p.word()?;
                let vname = text(&vt).to_string();
                if index.contains_key(&vname) {
                    return Err(BifError::DuplicateVariable {
                        name: vname,
                        line: vt.line,
                        col: vt.col,
                    });
                }
                p.punct('{')?;
                let mut states = None;
                while !p.at_punct('}') {
                    if p.at_word("property") {
                        p.skip_property()?;
                        continue;
                    }
                    p.keyword("type")?;
                    p.keyword("discrete")?;
                    p.punct('[')?;
                    let nt = p.word()?;
                    let declared: usize = text(&nt).parse().map_err(|_| BifError::Syntax {
                        line: nt.line,
                        col: nt.col,
                        msg: "expected a state count".into(),
                    })?;
                    p.punct(']')?;
                    p.punct('{')?;
                    let names: Vec<String> = p
                        .name_list('}')?
                        .iter()
                        .map(|t| text(t).to_string())
                        .collect();
                    p.punct(';')?;
                    if names.len() != declared {
                        return Err(BifError::Syntax {
                            line: nt.line,
                            col: nt.col,
                            msg: format!("declared {declared} states, listed {}", names.len()),
                        });
                    }
                    states = Some(names);
                }
                p.punct('}')?;
                let Some(states) = states else {
                    return Err(BifError::Syntax {
                        line: vt.line,
                        col: vt.col,
                        msg: format!("variable `{vname}` has no type declaration"),
                    });
                };
                let id = variables.len();
                index.insert(vname.clone(), id);
                variables.push(Variable::new(id, vname, states));
            }
            "probability" => {
                p.pos += 1;
                pending.push(parse_probability(&mut p, &variables, &index)?);
            }
            other => return p.err(format!("unexpected `{other}` at top level")),
        }
    }

    for v in &variables {
        if !pending.iter().any(|c| c.child == v.id) {
            return Err(BifError::MissingTable(v.name.clone()));
        }
    }
    let cpts = pending
        .into_iter()
        .map(|c| Cpt::new(c.child, c.parents, c.probabilities))
        .collect();
    let mut net = BayesianNetwork::try_new(name, variables, cpts)?;
    net.renormalize_rows();
    Ok(net)
}

fn lookup(index: &HashMap<String, VarId>, t: &Token) -> Result<VarId, BifError> {
    index
        .get(text(t))
        .copied()
        .ok_or_else(|| BifError::UnknownVariable {
            name: text(t).to_string(),
            line: t.line,
            col: t.col,
        })
}

fn check_row(var: &Variable, row: &[f64], at: &Token) -> Result<(), BifError> {
    if row.len() != var.cardinality() {
        return Err(BifError::RowLength {
            var: var.name.clone(),
            expected: var.cardinality(),
            found: row.len(),
            line: at.line,
            col: at.col,
        });
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(BifError::RowSum {
            var: var.name.clone(),
            sum,
            line: at.line,
            col: at.col,
        });
    }
    Ok(())
}

fn parse_probability(
    p: &mut Parser,
    variables: &[Variable],
    index: &HashMap<String, VarId>,
) -> Result<PendingCpt, BifError> {
    p.punct('(')?;
    let child = lookup(index, &p.word()?)?;
    let mut parents = Vec::new();
    if p.at_punct('|') {
        p.pos += 1;
        for t in p.name_list(')')? {
            parents.push(lookup(index, &t)?);
        }
    } else {
        p.punct(')')?;
    }
    p.punct('{')?;

    let cvar = &variables[child];
    let card = cvar.cardinality();
    let pcards: Vec<usize> = parents.iter().map(|&q| variables[q].cardinality()).collect();
    let rows: usize = pcards.iter().product();
    let mut filled: Vec<Option<Vec<f64>>> = vec![None; rows];
    let mut default: Option<Vec<f64>> = None;

    while !p.at_punct('}') {
        let Some(head) = p.peek().cloned() else {
            return p.err("unterminated probability block");
        };
        match &head.tok {
            Tok::Word(w) if w == "property" => p.skip_property()?,
            Tok::Word(w) if w == "table" => {
                p.pos += 1;
                let vals = p.numbers()?;
                if vals.len() != rows * card {
                    return Err(BifError::RowLength {
                        var: cvar.name.clone(),
                        expected: rows * card,
                        found: vals.len(),
                        line: head.line,
                        col: head.col,
                    });
                }
                for (r, chunk) in vals.chunks(card).enumerate() {
                    check_row(cvar, chunk, &head)?;
                    filled[r] = Some(chunk.to_vec());
                }
            }
            Tok::Word(w) if w == "default" => {
                p.pos += 1;
                let vals = p.numbers()?;
                check_row(cvar, &vals, &head)?;
                default = Some(vals);
            }
            Tok::Punct('(') => {
                p.pos += 1;
                let names = p.name_list(')')?;
                if names.len() != parents.len() {
                    return Err(BifError::Syntax {
                        line: head.line,
                        col: head.col,
                        msg: format!(
                            "expected {} parent states, found {}",
                            parents.len(),
                            names.len()
                        ),
                    });
                }
                let mut row = 0;
                for ((t, &q), &pc) in names.iter().zip(&parents).zip(&pcards) {
                    let s = variables[q]
                        .state_index(text(t))
                        .ok_or_else(|| BifError::UnknownState {
                            var: variables[q].name.clone(),
                            state: text(t).to_string(),
                            line: t.line,
                            col: t.col,
                        })?;
                    row = row * pc + s;
                }
                let vals = p.numbers()?;
                check_row(cvar, &vals, &head)?;
                filled[row] = Some(vals);
            }
            _ => return p.err("expected `table`, `default`, or a parent configuration"),
        }
    }
    p.punct('}')?;

    let mut probabilities = Vec::with_capacity(rows * card);
    for (r, row) in filled.into_iter().enumerate() {
        match row.or_else(|| default.clone()) {
            Some(vals) => probabilities.extend(vals),
            None => {
                return Err(BifError::MissingRow {
                    var: cvar.name.clone(),
                    row: r,
                })
            }
        }
    }
    Ok(PendingCpt {
        child,
        parents,
        probabilities,
    })
}

/// Canonical BIF text. Probabilities are written in shortest round-trip
/// form, so `parse_bif(&write_bif(net))` reproduces `net` exactly.
pub fn write_bif(net: &BayesianNetwork) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "network {} {{\n}}", quoted(&net.name));
    for v in net.variables() {
        let _ = writeln!(
            out,
            "variable {} {{\n  type discrete [ {} ] {{ {} }};\n}}",
            v.name,
            v.cardinality(),
            v.states.join(", ")
        );
    }
    for cpt in net.cpts() {
        let child = net.variable(cpt.child);
        let card = child.cardinality();
        if cpt.parents.is_empty() {
            let _ = writeln!(
                out,
                "probability ( {} ) {{\n  table {};\n}}",
                child.name,
                join_numbers(&cpt.probabilities)
            );
            continue;
        }
        let pnames: Vec<&str> = cpt.parents.iter().map(|&q| net.variable(q).name.as_str()).collect();
        let _ = writeln!(out, "probability ( {} | {} ) {{", child.name, pnames.join(", "));
        let pcards: Vec<usize> = cpt.parents.iter().map(|&q| net.variable(q).cardinality()).collect();
        let mut states = vec![0usize; pcards.len()];
        for row in cpt.probabilities.chunks(card) {
            let labels: Vec<&str> = cpt
                .parents
                .iter()
                .zip(&states)
                .map(|(&q, &s)| net.variable(q).states[s].as_str())
                .collect();
            let _ = writeln!(out, "  ({}) {};", labels.join(", "), join_numbers(row));
            for k in (0..states.len()).rev() {
                states[k] += 1;
                if states[k] < pcards[k] {
                    break;
                }
                states[k] = 0;
            }
        }
        out.push_str("}\n");
    }
    out
}

fn quoted(name: &str) -> String {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace() || PUNCT.contains(&c) || c == '/') {
        format!("\"{name}\"")
    } else {
        name.to_string()
    }
}

fn join_numbers(vals: &[f64]) -> String {
    vals.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "network tiny {\n}\nvariable A {\n  type discrete [ 2 ] { yes, no };\n}\nprobability ( A ) {\n  table 0.4, 0.6;\n}\n";

    #[test]
    fn minimal_document() {
        let net = parse_bif(MINIMAL).unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(net.name, "tiny");
        assert_eq!(net.cpt(0).probabilities, vec![0.4, 0.6]);
    }

    const CHAIN: &str = r#"
// comment
network "two nodes" {
  property "software" ;
}
variable A { type discrete [ 2 ] { a0, a1 }; property position = (1, 2) ; }
variable B { type discrete [ 3 ] { b0, b1, b2 }; }
/* block
   comment */
probability ( B | A ) {
  (a1) 0.2 0.3 0.5;
  (a0) 0.1, 0.1, 0.8;
}
probability ( A ) { table 0.25, 0.75; }
"#;

    #[test]
    fn rows_by_state_name_in_any_order() {
        let net = parse_bif(CHAIN).unwrap();
        assert_eq!(net.name, "two nodes");
        assert_eq!(net.cpt(1).parents, vec![0]);
        assert_eq!(net.cpt(1).probabilities, vec![0.1, 0.1, 0.8, 0.2, 0.3, 0.5]);
        assert_eq!(net.edges(), vec![(0, 1)]);
    }

    #[test]
    fn table_and_default_rows() {
        let doc = "variable A { type discrete [ 2 ] { x, y }; }\n\
                   variable B { type discrete [ 2 ] { x, y }; }\n\
                   probability ( A ) { table 0.5 0.5; }\n\
                   probability ( B | A ) { default 0.9, 0.1; (y) 0.3, 0.7; }\n";
        let net = parse_bif(doc).unwrap();
        assert_eq!(net.cpt(1).probabilities, vec![0.9, 0.1, 0.3, 0.7]);
        let doc = doc.replace("default 0.9, 0.1; (y) 0.3, 0.7;", "table 0.9, 0.1, 0.3, 0.7;");
        assert_eq!(parse_bif(&doc).unwrap().cpt(1).probabilities, vec![0.9, 0.1, 0.3, 0.7]);
    }

    #[test]
    fn cyclic_parents_rejected() {
        let doc = "variable A { type discrete [ 2 ] { x, y }; }\n\
                   variable B { type discrete [ 2 ] { x, y }; }\n\
                   probability ( A | B ) { table 0.5, 0.5, 0.5, 0.5; }\n\
                   probability ( B | A ) { table 0.5, 0.5, 0.5, 0.5; }\n";
        match parse_bif(doc) {
            Err(BifError::Invalid(InvalidNetwork(v))) => {
                assert!(v.iter().all(|v| v.kind == super::super::ViolationKind::Cycle));
                assert_eq!(v.len(), 2);
            }
            other => panic!("expected cycle error, got {other:?}"),
        }
    }

    #[test]
    fn error_positions() {
        let doc = "variable A { type discrete [ 2 ] { x, y }; }\nprobability ( Q ) { table 0.5, 0.5; }\n";
        match parse_bif(doc).unwrap_err() {
            BifError::UnknownVariable { name, line, col } => {
                assert_eq!((name.as_str(), line, col), ("Q", 2, 15));
            }
            e => panic!("{e:?}"),
        }
        let doc = "variable A { type discrete [ 2 ] { x, y } }\n";
        match parse_bif(doc).unwrap_err() {
            BifError::Syntax { line, col, .. } => assert_eq!((line, col), (1, 43)),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn row_length_and_sum_errors() {
        let base = "variable A { type discrete [ 2 ] { x, y }; }\n";
        let e = parse_bif(&format!("{base}probability ( A ) {{ table 0.5, 0.3, 0.2; }}")).unwrap_err();
        assert!(matches!(e, BifError::RowLength { expected: 2, found: 3, .. }), "{e:?}");
        let e = parse_bif(&format!("{base}probability ( A ) {{ table 0.5, 0.4; }}")).unwrap_err();
        assert!(matches!(e, BifError::RowSum { .. }), "{e:?}");
        let e = parse_bif(base).unwrap_err();
        assert!(matches!(e, BifError::MissingTable(_)), "{e:?}");
    }

    #[test]
    fn near_one_rows_are_rescaled() {
        let doc = "variable A { type discrete [ 2 ] { x, y }; }\nprobability ( A ) { table 0.3, 0.6999997; }";
        let net = parse_bif(doc).unwrap();
        let row = &net.cpt(0).probabilities;
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((row[0] - 0.3 / 0.9999997).abs() < 1e-15);
        assert_eq!(parse_bif(&write_bif(&net)).unwrap(), net);
    }

    #[test]
    fn write_then_parse_is_identity() {
        let net = parse_bif(CHAIN).unwrap();
        let again = parse_bif(&write_bif(&net)).unwrap();
        assert_eq!(net, again);
    }
}
