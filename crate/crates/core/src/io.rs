//! System definition files, model persistence and timed-automaton export.
//!
//! A definition file is a list of `Key : value` lines:
//!
//! ```text
//! Dynamics : [0 1; -2 3], [0; 1]
//! Controller: [1 -4]
//! Triggering Sampling Time: 0.01
//! Triggering Heartbeat: 0.40
//! Triggering Condition: [0.95 0 -1 0;0 0.95 0 -1;-1 0 1 0;0 -1 0 1]
//! Solver Options : depth=2, etc_only=true
//! ```
//!
//! Matrices are written row by row, rows separated by `;`. Blank lines and
//! lines starting with `#` are skipped. `Solver Options` takes
//! comma-separated `name=value` pairs:
//!
//! | name | value |
//! |------|-------|
//! | `depth` | abstraction depth, default 1 |
//! | `etc_only` | `true` to skip early-sampling transitions |
//! | `backend` | `auto`, `angular` or `sweep` |
//! | `sweep_points` | directions for the sweep backend |
//! | `conservative` | keep regions and transitions that cannot be refuted |
//! | `trigger` | `lyapunov` to build the condition from `lyap_p`, `lyap_q`, `rho` |
//!
//! Options of the nonlinear tool chain (`order_approx`, `manifolds_times`,
//! ...) are accepted and ignored with a warning.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::abstraction::{AbstractionOptions, Backend, TrafficModel};
use crate::error::{Error, Result};
use crate::lti::{LtiPlant, PetcLoop, QuadraticTrigger};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn perr<T>(line: usize, message: impl Into<String>) -> std::result::Result<T, ParseError> {
    Err(ParseError {
        line,
        message: message.into(),
    })
}

/// Lyapunov-decrease triggering parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovTrigger {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverOptions {
    pub depth: Option<usize>,
    pub etc_only: Option<bool>,
    pub backend: Option<Backend>,
    pub conservative: Option<bool>,
    pub lyapunov: Option<LyapunovTrigger>,
}

/// A linear PETC loop as written in a definition file.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub h: f64,
    pub kmax: u32,
    /// Absent only when the options ask for a Lyapunov trigger.
    pub q: Option<DMatrix<f64>>,
    pub options: SolverOptions,
}

/// Definition of a nonlinear system, kept as raw text per key.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralSpec {
    pub entries: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemDefinition {
    LinearPetc(InputSpec),
    General(GeneralSpec),
}

impl SystemDefinition {
    pub fn into_linear(self) -> Result<InputSpec> {
        match self {
            SystemDefinition::LinearPetc(s) => Ok(s),
            SystemDefinition::General(_) => Err(Error::Parameter(
                "unsupported: requires external reachability tools".into(),
            )),
        }
    }
}

const KEYS: &[&str] = &[
    "Dynamics",
    "Controller",
    "Triggering Sampling Time",
    "Triggering Heartbeat",
    "Triggering Condition",
    "Solver Options",
    "Hyperbox States",
    "Grid Points Per Dimension",
    "Hyperbox Disturbances",
];

const GENERAL_ONLY: &[&str] = &[
    "Hyperbox States",
    "Grid Points Per Dimension",
    "Hyperbox Disturbances",
];

const IGNORED_OPTIONS: &[&str] = &[
    "order_approx",
    "manifolds_times",
    "precision_deltas",
    "partition_method",
    "heartbeat",
    "angles_discretization",
    "grid_points_per_dim",
    "timeout_deltas",
    "solver",
    "gridstep",
];

/// Split on `sep` at bracket depth zero.
fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_number(tok: &str, line: usize) -> std::result::Result<f64, ParseError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => perr(line, format!("`{tok}` is not a number")),
    }
}

/// `[a b; c d]`.
pub fn parse_matrix(text: &str, line: usize) -> std::result::Result<DMatrix<f64>, ParseError> {
    let t = text.trim();
    let Some(inner) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) else {
        return perr(line, format!("expected a bracketed matrix, found `{t}`"));
    };
    if inner.contains('[') || inner.contains(']') {
        return perr(line, "nested brackets in matrix");
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for row in inner.split(';') {
        let vals = row
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|tok| parse_number(tok, line))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if vals.is_empty() {
            return perr(line, "empty matrix row");
        }
        rows.push(vals);
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return perr(line, "matrix rows have different lengths");
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn parse_matrix_list(text: &str, line: usize) -> std::result::Result<Vec<DMatrix<f64>>, ParseError> {
    split_top(text, ',')
        .into_iter()
        .map(|m| parse_matrix(m, line))
        .collect()
}

fn parse_bool(v: &str, line: usize) -> std::result::Result<bool, ParseError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => perr(line, format!("`{v}` is not a boolean")),
    }
}

fn parse_options(text: &str, line: usize) -> std::result::Result<SolverOptions, ParseError> {
    let mut o = SolverOptions::default();
    let mut backend: Option<String> = None;
    let mut points: Option<usize> = None;
    let mut trigger: Option<String> = None;
    let (mut lp, mut lq, mut rho) = (None, None, None);
    for item in split_top(text, ',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let Some((name, value)) = item.split_once('=') else {
            return perr(line, format!("solver option `{item}` is not of the form name=value"));
        };
        let (name, value) = (name.trim(), value.trim());
        match name {
            "depth" => match value.parse::<usize>() {
                Ok(d) if d >= 1 => o.depth = Some(d),
                _ => return perr(line, format!("depth must be a positive integer, got `{value}`")),
            },
            "etc_only" => o.etc_only = Some(parse_bool(value, line)?),
            "conservative" => o.conservative = Some(parse_bool(value, line)?),
            "backend" => backend = Some(value.to_ascii_lowercase()),
            "sweep_points" => match value.parse::<usize>() {
                Ok(p) if p >= 1 => points = Some(p),
                _ => return perr(line, format!("sweep_points must be positive, got `{value}`")),
            },
            "trigger" => trigger = Some(value.to_ascii_lowercase()),
            "lyap_p" => lp = Some(parse_matrix(value, line)?),
            "lyap_q" => lq = Some(parse_matrix(value, line)?),
            "rho" => rho = Some(parse_number(value, line)?),
            n if IGNORED_OPTIONS.contains(&n) => {
                log::warn!("line {line}: option `{n}` only applies to nonlinear systems; ignored");
            }
            n => return perr(line, format!("unknown solver option `{n}`")),
        }
    }
    o.backend = match (backend.as_deref(), points) {
        (None, None) => None,
        (None | Some("sweep"), Some(p)) => Some(Backend::Sweep { points: p }),
        (Some("sweep"), None) => Some(Backend::Sweep {
            points: crate::abstraction::backend::DEFAULT_SWEEP_POINTS,
        }),
        (Some("auto"), None) => Some(Backend::Auto),
        (Some("angular"), None) => Some(Backend::Angular),
        (Some(b), _) => return perr(line, format!("unknown backend `{b}` for these options")),
    };
    match trigger.as_deref() {
        None if lp.is_none() && lq.is_none() && rho.is_none() => {}
        Some("lyapunov") => match (lp, lq, rho) {
            (Some(p), Some(q), Some(rho)) => o.lyapunov = Some(LyapunovTrigger { p, q, rho }),
            _ => return perr(line, "trigger=lyapunov needs lyap_p, lyap_q and rho"),
        },
        None => return perr(line, "lyap_p, lyap_q and rho need trigger=lyapunov"),
        Some(t) => return perr(line, format!("unknown trigger `{t}`")),
    }
    Ok(o)
}

/// Parse a definition file.
pub fn parse_input_file(text: &str) -> std::result::Result<SystemDefinition, ParseError> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once(':') else {
            return perr(line, format!("expected `Key : value`, found `{trimmed}`"));
        };
        let key = key.trim();
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return perr(line, format!("unknown key `{key}`"));
        };
        if entries.insert(known, (line, value.trim())).is_some() {
            return perr(line, format!("duplicate key `{key}`"));
        }
    }
    let symbolic = entries
        .get("Dynamics")
        .is_some_and(|(_, v)| !v.trim_start().starts_with('['));
    if symbolic || GENERAL_ONLY.iter().any(|k| entries.contains_key(k)) {
        return Ok(SystemDefinition::General(GeneralSpec {
            entries: entries
                .into_iter()
                .map(|(k, (_, v))| (k.to_string(), v.to_string()))
                .collect(),
        }));
    }

    let get = |key: &str| -> std::result::Result<(usize, &str), ParseError> {
        entries
            .get(key)
            .copied()
            .map_or_else(|| perr(0, format!("missing key `{key}`")), Ok)
    };
    let (dl, dyn_text) = get("Dynamics")?;
    let mats = parse_matrix_list(dyn_text, dl)?;
    let [a, b] = <[DMatrix<f64>; 2]>::try_from(mats)
        .map_err(|_| ParseError {
            line: dl,
            message: "Dynamics needs two matrices, A and B".into(),
        })?;
    if !a.is_square() {
        return perr(dl, format!("A must be square, got {}x{}", a.nrows(), a.ncols()));
    }
    if b.nrows() != a.nrows() {
        return perr(dl, format!("B must have {} rows, got {}", a.nrows(), b.nrows()));
    }
    let (cl, ctext) = get("Controller")?;
    let k = parse_matrix(ctext, cl)?;
    if k.shape() != (b.ncols(), a.nrows()) {
        return perr(
            cl,
            format!(
                "controller must be {}x{}, got {}x{}",
                b.ncols(),
                a.nrows(),
                k.nrows(),
                k.ncols()
            ),
        );
    }
    let (hl, htext) = get("Triggering Sampling Time")?;
    let h = parse_number(htext, hl)?;
    if h <= 0.0 {
        return perr(hl, "sampling time must be positive");
    }
    let (bl, btext) = get("Triggering Heartbeat")?;
    let beat = parse_number(btext, bl)?;
    let ratio = beat / h;
    let kmax = ratio.round();
    if kmax < 1.0 || (ratio - kmax).abs() > 1e-9 * kmax.max(1.0) || kmax > u32::MAX as f64 {
        return perr(bl, format!("heartbeat {beat} is not a positive integer multiple of {h}"));
    }
    let options = match entries.get("Solver Options") {
        Some(&(ol, otext)) => parse_options(otext, ol)?,
        None => SolverOptions::default(),
    };
    let n = a.nrows();
    if let Some(l) = &options.lyapunov {
        let ol = entries["Solver Options"].0;
        if l.p.shape() != (n, n) || l.q.shape() != (n, n) {
            return perr(ol, format!("lyap_p and lyap_q must be {n}x{n}"));
        }
    }
    let q = match entries.get("Triggering Condition") {
        Some(&(ql, qtext)) => {
            let q = parse_matrix(qtext, ql)?;
            if q.shape() != (2 * n, 2 * n) {
                return perr(
                    ql,
                    format!(
                        "triggering matrix must be {}x{}, got {}x{}",
                        2 * n,
                        2 * n,
                        q.nrows(),
                        q.ncols()
                    ),
                );
            }
            if options.lyapunov.is_some() {
                return perr(ql, "give either a triggering matrix or trigger=lyapunov, not both");
            }
            Some(q)
        }
        None if options.lyapunov.is_some() => None,
        None => return perr(0, "missing key `Triggering Condition`"),
    };
    Ok(SystemDefinition::LinearPetc(InputSpec {
        a,
        b,
        k,
        h,
        kmax: kmax as u32,
        q,
        options,
    }))
}

pub fn read_input_file(path: impl AsRef<Path>) -> Result<SystemDefinition> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_input_file(&text)?)
}

fn fmt_matrix(m: &DMatrix<f64>) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| r.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" "))
        .collect();
    format!("[{}]", rows.join("; "))
}

impl InputSpec {
    /// The loop described by this file.
    pub fn to_loop(&self) -> Result<PetcLoop> {
        let plant = LtiPlant::new(self.a.clone(), self.b.clone(), self.k.clone())?;
        let trigger = match (&self.q, &self.options.lyapunov) {
            (Some(q), _) => QuadraticTrigger::new(q.clone(), self.h, self.kmax)?,
            (None, Some(l)) => {
                QuadraticTrigger::lyapunov_decrease(&plant, &l.p, &l.q, l.rho, self.h, self.kmax)?
            }
            (None, None) => return Err(Error::Parameter("no triggering condition".into())),
        };
        PetcLoop::new(plant, trigger)
    }

    pub fn abstraction_options(&self) -> AbstractionOptions {
        let d = AbstractionOptions::default();
        AbstractionOptions {
            depth: self.options.depth.unwrap_or(d.depth),
            etc_only: self.options.etc_only.unwrap_or(d.etc_only),
            backend: self.options.backend.unwrap_or(d.backend),
            conservative: self.options.conservative.unwrap_or(d.conservative),
            ..d
        }
    }

    /// Canonical text form; parsing it gives back `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Dynamics : {}, {}", fmt_matrix(&self.a), fmt_matrix(&self.b));
        let _ = writeln!(out, "Controller : {}", fmt_matrix(&self.k));
        let _ = writeln!(out, "Triggering Sampling Time : {:?}", self.h);
        let _ = writeln!(out, "Triggering Heartbeat : {:?}", self.h * self.kmax as f64);
        if let Some(q) = &self.q {
            let _ = writeln!(out, "Triggering Condition : {}", fmt_matrix(q));
        }
        let o = &self.options;
        let mut opts = Vec::new();
        if let Some(d) = o.depth {
            opts.push(format!("depth={d}"));
        }
        if let Some(e) = o.etc_only {
            opts.push(format!("etc_only={e}"));
        }
        match o.backend {
            Some(Backend::Auto) => opts.push("backend=auto".into()),
            Some(Backend::Angular) => opts.push("backend=angular".into()),
            Some(Backend::Sweep { points }) => {
                opts.push("backend=sweep".into());
                opts.push(format!("sweep_points={points}"));
            }
            None => {}
        }
        if let Some(c) = o.conservative {
            opts.push(format!("conservative={c}"));
        }
        if let Some(l) = &o.lyapunov {
            opts.push("trigger=lyapunov".into());
            opts.push(format!("lyap_p={}", fmt_matrix(&l.p)));
            opts.push(format!("lyap_q={}", fmt_matrix(&l.q)));
            opts.push(format!("rho={:?}", l.rho));
        }
        if !opts.is_empty() {
            let _ = writeln!(out, "Solver Options : {}", opts.join(", "));
        }
        out
    }
}

pub fn read_model(path: impl AsRef<Path>) -> Result<TrafficModel> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Pretty JSON with a trailing newline.
pub fn model_to_json(model: &TrafficModel) -> Result<String> {
    let mut s = serde_json::to_string_pretty(model)?;
    s.push('\n');
    Ok(s)
}

pub fn write_model(path: impl AsRef<Path>, model: &TrafficModel) -> Result<()> {
    std::fs::write(path, model_to_json(model)?)?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// UPPAAL timed automaton of `model`: one location per region, clock `c`
/// counting checking periods (`H` ticks each). Any region may hold the
/// first sample; UPPAAL needs a single initial location, so the first
/// region is used.
pub fn export_uppaal(model: &TrafficModel) -> String {
    let name = |r: usize| {
        let seq: Vec<String> = model.regions()[r].seq().iter().map(|k| k.to_string()).collect();
        format!("R_{}", seq.join("_"))
    };
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n");
    out.push_str(
        "<!DOCTYPE nta PUBLIC '-//Uppaal Team//DTD Flat System 1.1//EN' \
         'http://www.it.uu.se/research/group/darts/uppaal/flat-1_2.dtd'>\n",
    );
    out.push_str("<nta>\n");
    let decl = format!(
        "// One tick per checking period of {:?} s.\nconst int H = 1;",
        model.h()
    );
    let _ = writeln!(out, "  <declaration>{}</declaration>", xml_escape(&decl));
    out.push_str("  <template>\n    <name>petc_loop</name>\n");
    out.push_str("    <declaration>clock c;</declaration>\n");
    for r in 0..model.len() {
        let inv = format!("c <= {}*H", model.output(r));
        let _ = writeln!(
            out,
            "    <location id=\"id{r}\">\n      <name>{}</name>\n      <label kind=\"invariant\">{}</label>\n    </location>",
            name(r),
            xml_escape(&inv)
        );
    }
    let _ = writeln!(out, "    <init ref=\"id0\"/>");
    for e in model.edges() {
        let guard = format!("c == {}*H", e.k);
        let _ = writeln!(
            out,
            "    <transition>\n      <source ref=\"id{}\"/>\n      <target ref=\"id{}\"/>\n      \
             <label kind=\"guard\">{}</label>\n      <label kind=\"assignment\">c = 0</label>\n      \
             <label kind=\"comments\">{} to {} after {} periods</label>\n    </transition>",
            e.from,
            e.to,
            xml_escape(&guard),
            name(e.from),
            name(e.to),
            e.k
        );
    }
    out.push_str("  </template>\n");
    out.push_str("  <system>loop = petc_loop();\nsystem loop;</system>\n");
    out.push_str("</nta>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::model::two_region_example;
    use nalgebra::dmatrix;

    const LINEAR: &str = "Dynamics : [0 1; -2 3], [0; 1] \nController: [1 -4] \nTriggering Sampling Time: 0.01 \nTriggering Heartbeat: 0.40\nTriggering Condition: [0.95 0 -1 0;0 0.95 0 -1;-1 0 1 0;0 -1 0 1]\n";

    fn linear(text: &str) -> InputSpec {
        parse_input_file(text).unwrap().into_linear().unwrap()
    }

    #[test]
    fn linear_listing() {
        let s = linear(LINEAR);
        assert_eq!(s.a, dmatrix![0.0, 1.0; -2.0, 3.0]);
        assert_eq!(s.b, dmatrix![0.0; 1.0]);
        assert_eq!(s.k, dmatrix![1.0, -4.0]);
        assert_eq!(s.h, 0.01);
        assert_eq!(s.kmax, 40);
        assert_eq!(s.q.as_ref().unwrap()[(0, 0)], 0.95);
        assert_eq!(s.q.as_ref().unwrap()[(3, 1)], -1.0);
    }

    #[test]
    fn scalar_system() {
        let s = linear(
            "Dynamics : [1], [1]\nController: [1]\nTriggering Sampling Time: 0.5\nTriggering Heartbeat: 1\nTriggering Condition: [1 0; 0 -1]\n",
        );
        assert_eq!(s.kmax, 2);
        assert!(s.to_loop().is_ok());
    }

    #[test]
    fn round_trip() {
        let s = linear(LINEAR);
        assert_eq!(linear(&s.to_text()), s);
        let with_opts = format!("{LINEAR}Solver Options : depth=3, etc_only=True, backend=sweep, sweep_points=500\n");
        let s = linear(&with_opts);
        assert_eq!(s.options.depth, Some(3));
        assert_eq!(s.options.backend, Some(Backend::Sweep { points: 500 }));
        assert_eq!(linear(&s.to_text()), s);
    }

    #[test]
    fn lyapunov_options() {
        let text = "Dynamics : [0 1; -2 3], [0; 1]\nController: [1 -4]\nTriggering Sampling Time: 0.1\nTriggering Heartbeat: 2\nSolver Options : trigger=lyapunov, lyap_p=[1 0.25; 0.25 1], lyap_q=[0.5 0.25; 0.25 1.5], rho=0.8, depth=2\n";
        let s = linear(text);
        assert_eq!(s.kmax, 20);
        let l = s.options.lyapunov.as_ref().unwrap();
        assert_eq!(l.rho, 0.8);
        assert_eq!(l.q[(1, 1)], 1.5);
        assert!(s.to_loop().is_ok());
        assert_eq!(linear(&s.to_text()), s);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_key = LINEAR.replace("Controller", "Controler");
        assert_eq!(parse_input_file(&bad_key).unwrap_err().line, 2);
        let bad_dim = LINEAR.replace("[1 -4]", "[1 -4 2]");
        let e = parse_input_file(&bad_dim).unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("controller"));
        let bad_beat = LINEAR.replace("0.40", "0.405");
        assert_eq!(parse_input_file(&bad_beat).unwrap_err().line, 4);
        let bad_q = LINEAR.replace("[0.95 0 -1 0;", "[0.95 0 -1;");
        assert_eq!(parse_input_file(&bad_q).unwrap_err().line, 5);
        let bad_opt = format!("{LINEAR}Solver Options : depht=2\n");
        assert_eq!(parse_input_file(&bad_opt).unwrap_err().line, 6);
    }

    #[test]
    fn general_systems_are_recognized() {
        let text = "Hyperbox States : [-2 2], [-2 2]\nGrid Points Per Dimension: [3 3]\nDynamics : x1, x1**2*x2 + x2**3 + u1\nController: -x2 - x1**2*x2 - x2**3\nTriggering Condition : e1**2 + e2**2 - 0.01**2\nSolver Options : manifolds_times=[0.002 0.0028 0.0038 0.005 0.0065 0.0075], partition_method=manifold, heartbeat=0.021, order_approx=4\n";
        let def = parse_input_file(text).unwrap();
        assert!(matches!(def, SystemDefinition::General(_)));
        let e = def.into_linear().unwrap_err().to_string();
        assert!(e.contains("unsupported: requires external reachability tools"));
    }

    #[test]
    fn ignored_cetc_options() {
        let text = format!("{LINEAR}Solver Options : order_approx=4, depth=2\n");
        assert_eq!(linear(&text).options.depth, Some(2));
    }

    #[test]
    fn uppaal_shape() {
        let xml = export_uppaal(&two_region_example());
        assert!(xml.starts_with("<?xml"));
        assert_eq!(xml.matches("<location ").count(), 2);
        assert_eq!(xml.matches("<transition>").count(), 6);
        assert!(xml.contains("c &lt;= 2*H"));
        assert!(xml.contains("c &lt;= 3*H"));
        assert_eq!(xml, export_uppaal(&two_region_example()));
    }

    #[test]
    fn matrix_literals() {
        assert_eq!(parse_matrix("[1 2; 3 4]", 1).unwrap(), dmatrix![1.0, 2.0; 3.0, 4.0]);
        assert_eq!(parse_matrix(" [ -1.5e-2 ] ", 1).unwrap(), dmatrix![-0.015]);
        assert!(parse_matrix("[1 2; 3]", 1).is_err());
        assert!(parse_matrix("1 2", 1).is_err());
        assert!(parse_matrix("[a]", 1).is_err());
    }
}
