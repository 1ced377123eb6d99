//! Plain-text QP format.
//!
//! ```text
//! # minimize 1/2 θ'Eθ + θ'F  subject to  Mθ <= gamma
//! n 2
//! p 1
//! E 2 0
//!   0 2
//! F 2 0
//! M 1 0
//! gamma -2
//! ```
//!
//! A section is a keyword (`n`, `p`, `E`, `F`, `M`, `gamma`) followed by its
//! whitespace-separated values; sections may appear in any order and line
//! breaks carry no meaning. Matrices are row-major. `#` starts a comment.
//! `M` and `gamma` may be omitted when `p` is 0.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SYMMETRY_TOL;
use crate::qp::QpProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct QpFileDocument {
    pub e: DMatrix<f64>,
    pub f: DVector<f64>,
    pub m: DMatrix<f64>,
    pub gamma: DVector<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut rest = line;
        let mut offset = 0;
        while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
            let after = &rest[start..];
            let len = after.find(char::is_whitespace).unwrap_or(after.len());
            out.push(Token {
                text: &after[..len],
                line: li + 1,
                column: line[..offset + start].chars().count() + 1,
            });
            offset += start + len;
            rest = &after[len..];
        }
    }
    out
}

fn err(tok: &Token<'_>, message: impl Into<String>) -> Error {
    Error::Parse {
        line: tok.line,
        column: tok.column,
        message: message.into(),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    N,
    P,
    E,
    F,
    M,
    Gamma,
}

impl Section {
    fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "n" => Section::N,
            "p" => Section::P,
            "E" => Section::E,
            "F" => Section::F,
            "M" => Section::M,
            "gamma" => Section::Gamma,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Section::N => "n",
            Section::P => "p",
            Section::E => "E",
            Section::F => "F",
            Section::M => "M",
            Section::Gamma => "gamma",
        }
    }
}

struct Parsed<'a> {
    keyword: Token<'a>,
    values: Vec<Token<'a>>,
}

fn dimension(sec: &Option<Parsed<'_>>, name: &str, eof: &Token<'_>) -> Result<usize> {
    let Some(sec) = sec else {
        return Err(err(eof, format!("missing section `{name}`")));
    };
    match sec.values.as_slice() {
        [v] => v
            .text
            .parse::<usize>()
            .map_err(|_| err(v, format!("`{name}` must be a nonnegative integer"))),
        _ => Err(err(&sec.keyword, format!("`{name}` takes exactly one value"))),
    }
}

fn numbers(
    sec: &Option<Parsed<'_>>,
    name: &str,
    expected: usize,
    eof: &Token<'_>,
) -> Result<Vec<f64>> {
    let Some(sec) = sec else {
        if expected == 0 {
            return Ok(Vec::new());
        }
        return Err(err(eof, format!("missing section `{name}`")));
    };
    if sec.values.len() != expected {
        return Err(err(
            &sec.keyword,
            format!("`{name}` needs {expected} values, found {}", sec.values.len()),
        ));
    }
    sec.values
        .iter()
        .map(|t| match t.text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => Err(err(t, format!("non-finite value `{}`", t.text))),
            Err(_) => Err(err(t, format!("invalid number `{}`", t.text))),
        })
        .collect()
}

pub fn parse_qp_file(text: &str) -> Result<QpFileDocument> {
    let tokens = tokenize(text);
    let eof = Token {
        text: "",
        line: text.lines().count().max(1),
        column: text.lines().last().map_or(0, |l| l.chars().count()) + 1,
    };

    let mut sections: [Option<Parsed<'_>>; 6] = Default::default();
    let mut current: Option<usize> = None;
    for tok in tokens {
        if let Some(sec) = Section::from_keyword(tok.text) {
            let slot = sec as usize;
            if sections[slot].is_some() {
                return Err(err(&tok, format!("duplicate section `{}`", sec.name())));
            }
            sections[slot] = Some(Parsed {
                keyword: tok,
                values: Vec::new(),
            });
            current = Some(slot);
        } else if let Some(slot) = current {
            sections[slot].as_mut().expect("current section exists").values.push(tok);
        } else {
            return Err(err(&tok, format!("expected a section keyword, found `{}`", tok.text)));
        }
    }
    // a word that is neither a keyword nor a number is most likely a
    // misspelled section name
    let stray = sections.iter().flatten().flat_map(|s| &s.values).find(|t| {
        t.text.starts_with(|c: char| c.is_alphabetic()) && t.text.parse::<f64>().is_err()
    });
    if let Some(first) = stray {
        return Err(err(first, format!("unknown section `{}`", first.text)));
    }

    let [n_sec, p_sec, e_sec, f_sec, m_sec, g_sec] = &sections;
    let n = dimension(n_sec, "n", &eof)?;
    let p = dimension(p_sec, "p", &eof)?;
    if n == 0 {
        return Err(err(&n_sec.as_ref().expect("checked").keyword, "`n` must be at least 1"));
    }
    let overflow = |name: &str| {
        err(
            &eof,
            format!("declared size of `{name}` does not fit in memory addressing"),
        )
    };
    let nn = n.checked_mul(n).ok_or_else(|| overflow("E"))?;
    let pn = p.checked_mul(n).ok_or_else(|| overflow("M"))?;

    let e = DMatrix::from_row_slice(n, n, &numbers(e_sec, "E", nn, &eof)?);
    let f = DVector::from_vec(numbers(f_sec, "F", n, &eof)?);
    let m = DMatrix::from_row_slice(p, n, &numbers(m_sec, "M", pn, &eof)?);
    let gamma = DVector::from_vec(numbers(g_sec, "gamma", p, &eof)?);

    let scale = e.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in i + 1..n {
            if (e[(i, j)] - e[(j, i)]).abs() > SYMMETRY_TOL * scale {
                let kw = &e_sec.as_ref().expect("parsed").keyword;
                return Err(err(kw, format!("E is not symmetric at ({}, {})", i + 1, j + 1)));
            }
        }
    }
    Ok(QpFileDocument { e, f, m, gamma })
}

impl QpFileDocument {
    pub fn from_problem(prob: &QpProblem) -> Self {
        QpFileDocument {
            e: prob.hessian().clone(),
            f: prob.grad().clone(),
            m: prob.constraints().clone(),
            gamma: prob.gamma().clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    pub fn p(&self) -> usize {
        self.m.nrows()
    }

    pub fn to_problem(&self) -> Result<QpProblem> {
        QpProblem::new(self.e.clone(), self.f.clone(), self.m.clone(), self.gamma.clone())
    }

    /// Serializes with 17 significant digits, so parsing the output
    /// reproduces every value exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let fmt_row = |s: &mut String, vals: &mut dyn Iterator<Item = f64>| {
            let row: Vec<String> = vals.map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "  {}", row.join(" "));
        };
        let _ = writeln!(s, "n {}", self.n());
        let _ = writeln!(s, "p {}", self.p());
        let _ = writeln!(s, "E");
        for r in 0..self.n() {
            fmt_row(&mut s, &mut self.e.row(r).iter().copied());
        }
        let _ = writeln!(s, "F");
        fmt_row(&mut s, &mut self.f.iter().copied());
        let _ = writeln!(s, "M");
        for r in 0..self.p() {
            fmt_row(&mut s, &mut self.m.row(r).iter().copied());
        }
        let _ = writeln!(s, "gamma");
        fmt_row(&mut s, &mut self.gamma.iter().copied());
        s
    }
}
