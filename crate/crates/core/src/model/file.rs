//! Problem-file grammar.
//!
//! ```text
//! # comment (also allowed after a value)
//! [system]
//! time = continuous | discrete
//! state = x1, x2
//! drift = x2; -x1 - x2 - x1^3          # one entry per state, `;`-separated
//! input = 0; 1                         # n rows `;`, p columns `,` (optional)
//! diffusion = 0; sigma                 # n rows `;`, m columns `,` (optional)
//! [sets]
//! domain = (x1 + 3)*(2 - x1); (x2 + 2)*(3 - x2)   # conjunction of `>= 0`
//! initial = 0.01 - (x1 + 2)^2 - x2^2
//! unsafe = x2 - 2.25
//! [horizon]
//! T = 2                                # continuous; `N = 3` for discrete
//! [controller]                         # optional, defaults to zero
//! u = 0
//! [initial-point]                      # optional
//! x0 = -2, 0
//! pointwise = true
//! [params]                             # optional
//! sigma = 0.9
//! ```
//!
//! Expressions may use the state variables and the placeholder `sigma`.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{Horizon, ModelError, SafetyProblem, SemialgebraicSet, SetRole, StochasticSystem, TimeDomain, SIGMA};
use crate::poly::{parse_with, Polynomial, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FileError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown variable `{name}`")]
    UnknownVariable { line: usize, col: usize, name: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> FileError {
    FileError::Syntax { line, col, msg: msg.into() }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    /// 1-based column of the first value character.
    col: usize,
}

type Sections = HashMap<&'static str, HashMap<&'static str, Entry>>;

const SCHEMA: &[(&str, &[&str])] = &[
    ("system", &["time", "state", "drift", "input", "diffusion"]),
    ("sets", &["domain", "initial", "unsafe"]),
    ("horizon", &["T", "N"]),
    ("controller", &["u"]),
    ("initial-point", &["x0", "pointwise"]),
    ("params", &["sigma"]),
];

fn collect(text: &str) -> Result<Sections, FileError> {
    let mut out: Sections = HashMap::new();
    let mut current: Option<&'static str> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lead = content.len() - content.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| syntax(line, lead + 1, "unterminated section header"))?
                .trim();
            let (sec, _) = SCHEMA
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| syntax(line, lead + 1, format!("unknown section `[{name}]`")))?;
            if out.contains_key(sec) {
                return Err(syntax(line, lead + 1, format!("section `[{name}]` repeated")));
            }
            out.insert(sec, HashMap::new());
            current = Some(sec);
            continue;
        }
        let Some(sec) = current else {
            return Err(syntax(line, lead + 1, "entry outside any section"));
        };
        let eq = content.find('=').ok_or_else(|| syntax(line, lead + 1, "expected `key = value`"))?;
        let key = content[..eq].trim();
        let keys = SCHEMA.iter().find(|(s, _)| *s == sec).unwrap().1;
        let key = *keys
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| syntax(line, lead + 1, format!("unknown key `{key}` in [{sec}]")))?;
        let value = &content[eq + 1..];
        let entry = Entry {
            value: value.trim_end().to_string(),
            line,
            col: content[..eq + 1].chars().count() + 1,
        };
        let table = out.get_mut(sec).unwrap();
        if table.insert(key, entry).is_some() {
            return Err(syntax(line, lead + 1, format!("key `{key}` repeated")));
        }
    }
    Ok(out)
}

/// Splits on `sep`, yielding each piece with its column offset from `col`.
fn split_at(value: &str, col: usize, sep: char) -> Vec<(&str, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in value.char_indices() {
        if c == sep {
            out.push((&value[start..i], col + value[..start].chars().count()));
            start = i + c.len_utf8();
        }
    }
    out.push((&value[start..], col + value[..start].chars().count()));
    out
}

struct Ctx {
    state: Vec<Var>,
}

impl Ctx {
    fn poly(&self, text: &str, line: usize, col: usize) -> Result<Polynomial, FileError> {
        let resolve = |name: &str| {
            if name == SIGMA {
                return Some(Polynomial::var(Var::new(SIGMA)));
            }
            self.state.iter().find(|v| &*v.name() == name).map(|&v| Polynomial::var(v))
        };
        parse_with(text, &resolve).map_err(|e| {
            let (line, col) = (line + e.line - 1, if e.line == 1 { col + e.col - 1 } else { e.col });
            match e.unknown {
                Some(name) => FileError::UnknownVariable { line, col, name },
                None => syntax(line, col, e.msg),
            }
        })
    }

    fn vector(&self, e: &Entry) -> Result<Vec<Polynomial>, FileError> {
        split_at(&e.value, e.col, ';').into_iter().map(|(s, c)| self.poly(s, e.line, c)).collect()
    }

    fn matrix(&self, e: &Entry) -> Result<Vec<Vec<Polynomial>>, FileError> {
        split_at(&e.value, e.col, ';')
            .into_iter()
            .map(|(row, c)| split_at(row, c, ',').into_iter().map(|(s, c)| self.poly(s, e.line, c)).collect())
            .collect()
    }
}

fn require<'a>(s: &'a Sections, sec: &'static str, key: &'static str) -> Result<&'a Entry, FileError> {
    s.get(sec)
        .and_then(|t| t.get(key))
        .ok_or_else(|| syntax(1, 1, format!("missing `{key}` in [{sec}]")))
}

fn number<T: std::str::FromStr>(e: &Entry, text: &str, col: usize, what: &str) -> Result<T, FileError> {
    text.trim().parse().map_err(|_| syntax(e.line, col, format!("invalid {what} `{}`", text.trim())))
}

pub fn parse_problem(text: &str) -> Result<SafetyProblem, FileError> {
    let s = collect(text)?;

    let time_e = require(&s, "system", "time")?;
    let time = match time_e.value.trim() {
        "continuous" => TimeDomain::Continuous,
        "discrete" => TimeDomain::Discrete,
        other => return Err(syntax(time_e.line, time_e.col, format!("unknown time domain `{other}`"))),
    };

    let state_e = require(&s, "system", "state")?;
    let mut state = Vec::new();
    for (name, col) in split_at(&state_e.value, state_e.col, ',') {
        let name = name.trim();
        let ident = name.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
            && name.chars().all(|c| c.is_alphanumeric() || c == '_');
        if !ident {
            return Err(syntax(state_e.line, col, format!("invalid state variable name `{name}`")));
        }
        state.push(Var::new(name));
    }
    let ctx = Ctx { state: state.clone() };
    let n = state.len();

    let drift = ctx.vector(require(&s, "system", "drift")?)?;
    let sys = s.get("system").unwrap();
    let input = match sys.get("input") {
        Some(e) => ctx.matrix(e)?,
        None => vec![Vec::new(); n],
    };
    let diffusion = match sys.get("diffusion") {
        Some(e) => ctx.matrix(e)?,
        None => vec![Vec::new(); n],
    };
    let system = StochasticSystem { time, state, drift, input, diffusion };

    let set = |role: SetRole, key: &'static str| -> Result<SemialgebraicSet, FileError> {
        Ok(SemialgebraicSet::new(role, ctx.vector(require(&s, "sets", key)?)?)?)
    };
    let domain = set(SetRole::Domain, "domain")?;
    let initial = set(SetRole::Initial, "initial")?;
    let unsafe_set = set(SetRole::Unsafe, "unsafe")?;

    let hz = s.get("horizon").ok_or_else(|| syntax(1, 1, "missing [horizon]"))?;
    let horizon = match (hz.get("T"), hz.get("N")) {
        (Some(e), None) => Horizon::Time(number(e, &e.value, e.col, "horizon")?),
        (None, Some(e)) => Horizon::Steps(number(e, &e.value, e.col, "step count")?),
        _ => return Err(syntax(1, 1, "[horizon] needs exactly one of `T` or `N`")),
    };

    let controller = match s.get("controller").and_then(|t| t.get("u")) {
        Some(e) => ctx.vector(e)?,
        None => vec![Polynomial::zero(); system.inputs()],
    };

    let ip = s.get("initial-point");
    let initial_point = match ip.and_then(|t| t.get("x0")) {
        Some(e) => Some(
            split_at(&e.value, e.col, ',')
                .into_iter()
                .map(|(t, c)| number(e, t, c, "coordinate"))
                .collect::<Result<Vec<f64>, _>>()?,
        ),
        None => None,
    };
    let pointwise = match ip.and_then(|t| t.get("pointwise")) {
        Some(e) => number(e, &e.value, e.col, "flag (true/false)")?,
        None => false,
    };
    let sigma_default = match s.get("params").and_then(|t| t.get("sigma")) {
        Some(e) => Some(number(e, &e.value, e.col, "sigma")?),
        None => None,
    };

    let problem = SafetyProblem {
        system,
        domain,
        initial,
        unsafe_set,
        horizon,
        controller,
        initial_point,
        pointwise,
        sigma_default,
    };
    problem.validate()?;
    Ok(problem)
}

fn join(ps: &[Polynomial], sep: &str) -> String {
    ps.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(sep)
}

fn join_matrix(m: &[Vec<Polynomial>]) -> String {
    m.iter().map(|r| join(r, ", ")).collect::<Vec<_>>().join("; ")
}

pub(super) fn write_problem(p: &SafetyProblem) -> String {
    let sys = &p.system;
    let mut s = String::new();
    let _ = writeln!(s, "[system]\ntime = {}", sys.time);
    let names: Vec<String> = sys.state.iter().map(|v| v.name().to_string()).collect();
    let _ = writeln!(s, "state = {}", names.join(", "));
    let _ = writeln!(s, "drift = {}", join(&sys.drift, "; "));
    if sys.inputs() > 0 {
        let _ = writeln!(s, "input = {}", join_matrix(&sys.input));
    }
    if sys.noise_dim() > 0 {
        let _ = writeln!(s, "diffusion = {}", join_matrix(&sys.diffusion));
    }
    let _ = writeln!(s, "\n[sets]");
    let _ = writeln!(s, "domain = {}", join(&p.domain.inequalities, "; "));
    let _ = writeln!(s, "initial = {}", join(&p.initial.inequalities, "; "));
    let _ = writeln!(s, "unsafe = {}", join(&p.unsafe_set.inequalities, "; "));
    let _ = writeln!(s, "\n[horizon]");
    match p.horizon {
        Horizon::Time(t) => writeln!(s, "T = {t}"),
        Horizon::Steps(k) => writeln!(s, "N = {k}"),
    }
    .unwrap();
    if !p.controller.is_empty() {
        let _ = writeln!(s, "\n[controller]\nu = {}", join(&p.controller, "; "));
    }
    if let Some(x0) = &p.initial_point {
        let xs: Vec<String> = x0.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "\n[initial-point]\nx0 = {}\npointwise = {}", xs.join(", "), p.pointwise);
    }
    if let Some(sig) = p.sigma_default {
        let _ = writeln!(s, "\n[params]\nsigma = {sig}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
# nonlinear example
[system]
time = continuous
state = x1, x2
drift = x2; -x1 - x2 - x1^3
input = 0; 1
diffusion = 0; sigma   # noise on x2 only

[sets]
domain = (x1 + 3)*(2 - x1); (x2 + 2)*(3 - x2)
initial = 0.01 - (x1 + 2)^2 - x2^2
unsafe = x2 - 2.25

[horizon]
T = 2

[controller]
u = 0.1*x1*x2

[initial-point]
x0 = -2, 0
pointwise = true

[params]
sigma = 0.9
";

    #[test]
    fn parses_every_section() {
        let p = parse_problem(FULL).unwrap();
        assert_eq!(p.system.n(), 2);
        assert_eq!(p.system.inputs(), 1);
        assert_eq!(p.system.noise_dim(), 1);
        assert_eq!(p.domain.inequalities.len(), 2);
        assert_eq!(p.horizon, Horizon::Time(2.0));
        assert_eq!(p.initial_point, Some(vec![-2.0, 0.0]));
        assert!(p.pointwise);
        assert_eq!(p.sigma_default, Some(0.9));
        assert_eq!(p.controller[0], "0.1*x1*x2".parse().unwrap());
    }

    #[test]
    fn write_parse_round_trip() {
        let p = parse_problem(FULL).unwrap();
        let text = p.to_file_string();
        assert_eq!(parse_problem(&text).unwrap(), p);
        assert_eq!(parse_problem(&text).unwrap().to_file_string(), text);
    }

    #[test]
    fn undeclared_variable_is_located() {
        let text = FULL.replace("drift = x2; -x1", "drift = x2; -x3");
        match parse_problem(&text) {
            Err(FileError::UnknownVariable { line, col, name }) => {
                assert_eq!((line, col, name.as_str()), (5, 14, "x3"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let text = FULL.replace("unsafe = x2 - 2.25", "unsafe = x2 - * 2.25");
        assert_eq!(
            parse_problem(&text),
            Err(FileError::Syntax { line: 12, col: 15, msg: "unexpected `*`".into() })
        );
        let text = FULL.replace("[horizon]", "[horizons]");
        assert!(matches!(parse_problem(&text), Err(FileError::Syntax { line: 14, .. })));
    }

    #[test]
    fn dimension_errors_are_reported() {
        let text = FULL.replace("drift = x2; -x1 - x2 - x1^3", "drift = x2");
        assert!(matches!(parse_problem(&text), Err(FileError::Model(ModelError::Dimension(_)))));
        let text = FULL.replace("u = 0.1*x1*x2", "u = 1; 2");
        assert!(matches!(parse_problem(&text), Err(FileError::Model(ModelError::Dimension(_)))));
    }

    #[test]
    fn horizon_must_match_time_domain() {
        let text = FULL.replace("T = 2", "N = 2");
        assert!(matches!(parse_problem(&text), Err(FileError::Model(ModelError::Invalid(_)))));
    }
}
