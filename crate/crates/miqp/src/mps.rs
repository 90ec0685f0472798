//! MPS interchange for mixed-binary diagonal QPs.
//!
//! The writer emits classic fixed-format sections (ROWS, COLUMNS with
//! INTORG/INTEND markers, RHS, BOUNDS) plus the QMATRIX extension for the
//! quadratic terms. Conventions, also noted in the file header:
//! - QMATRIX holds 2q so the customary 1/2 x'(QMATRIX)x reading reproduces
//!   the q x^2 objective terms;
//! - the objective constant is carried as an RHS entry on the objective row
//!   with negated sign;
//! - name fields widen past column boundaries when a name exceeds eight
//!   characters.
//! The reader accepts exactly this dialect and exists so round-trips can be
//! verified without an external solver.

use crate::problem::{MiqpProblem, Sense, VarKind};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

#[derive(Debug)]
pub enum MpsError {
    Io(std::io::Error),
    EmptyProblem,
    NonFinite(String),
    Parse { line: usize, message: String },
}

impl std::fmt::Display for MpsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MpsError::Io(e) => write!(f, "i/o error: {e}"),
            MpsError::EmptyProblem => write!(f, "refusing to export a problem with no variables"),
            MpsError::NonFinite(w) => write!(f, "non-finite value in {w}"),
            MpsError::Parse { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

impl std::error::Error for MpsError {}

impl From<std::io::Error> for MpsError {
    fn from(e: std::io::Error) -> Self {
        MpsError::Io(e)
    }
}

fn sanitize(name: &str, fallback: String) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect();
    if cleaned.is_empty() {
        fallback
    } else {
        cleaned
    }
}

pub fn to_mps_string(problem: &MiqpProblem) -> Result<String, MpsError> {
    let n = problem.num_vars();
    if n == 0 {
        return Err(MpsError::EmptyProblem);
    }
    for k in 0..n {
        if !problem.q_diag[k].is_finite() || !problem.lin[k].is_finite() {
            return Err(MpsError::NonFinite(format!("objective of variable {k}")));
        }
    }
    if !problem.constant.is_finite() {
        return Err(MpsError::NonFinite("objective constant".into()));
    }
    let names: Vec<String> = (0..n)
        .map(|k| sanitize(&problem.names[k], format!("X{k}")))
        .collect();
    let mut s = String::new();
    s.push_str("* Mixed-binary QP interchange file.\n");
    s.push_str("* Objective: minimize sum q_k x_k^2 + c_k x_k + constant.\n");
    s.push_str("* QMATRIX holds 2q so the usual 1/2 x'(QMATRIX)x reading applies.\n");
    s.push_str("* The objective constant appears as RHS on the objective row, negated.\n");
    s.push_str("* Name fields widen when a name exceeds eight characters.\n");
    s.push_str("NAME          MIQP\n");
    s.push_str("ROWS\n");
    s.push_str(" N  COST\n");
    for (i, row) in problem.rows.iter().enumerate() {
        let letter = match row.sense {
            Sense::Eq => 'E',
            Sense::Le => 'L',
            Sense::Ge => 'G',
        };
        let _ = writeln!(s, " {}  R{}", letter, i);
    }
    // per-variable row entries
    let mut by_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in problem.rows.iter().enumerate() {
        for &(k, v) in &row.coeffs {
            if !v.is_finite() {
                return Err(MpsError::NonFinite(format!("row {i}")));
            }
            by_var[k].push((i, v));
        }
    }
    s.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0usize;
    for k in 0..n {
        let want_int = problem.kind[k] == VarKind::Binary;
        if want_int != in_int {
            let word = if want_int { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(s, "    MARKER{:<4}              'MARKER'                 {}", marker, word);
            marker += 1;
            in_int = want_int;
        }
        // declare every column through its objective coefficient
        let _ = writeln!(s, "    {:<8}  {:<8}  {}", names[k], "COST", problem.lin[k]);
        for &(i, v) in &by_var[k] {
            let _ = writeln!(s, "    {:<8}  {:<8}  {}", names[k], format!("R{i}"), v);
        }
    }
    if in_int {
        let _ = writeln!(s, "    MARKER{:<4}              'MARKER'                 'INTEND'", marker);
    }
    s.push_str("RHS\n");
    if problem.constant != 0.0 {
        let _ = writeln!(s, "    RHS       {:<8}  {}", "COST", -problem.constant);
    }
    for (i, row) in problem.rows.iter().enumerate() {
        if row.rhs != 0.0 {
            if !row.rhs.is_finite() {
                return Err(MpsError::NonFinite(format!("rhs of row {i}")));
            }
            let _ = writeln!(s, "    RHS       {:<8}  {}", format!("R{i}"), row.rhs);
        }
    }
    s.push_str("BOUNDS\n");
    for k in 0..n {
        let lb = problem.lb[k];
        let ub = problem.ub[k];
        if lb == ub {
            let _ = writeln!(s, " FX BND       {:<8}  {}", names[k], lb);
            continue;
        }
        if lb.is_finite() {
            let _ = writeln!(s, " LO BND       {:<8}  {}", names[k], lb);
        } else {
            let _ = writeln!(s, " MI BND       {:<8}", names[k]);
        }
        if ub.is_finite() {
            let _ = writeln!(s, " UP BND       {:<8}  {}", names[k], ub);
        } else {
            let _ = writeln!(s, " PL BND       {:<8}", names[k]);
        }
    }
    s.push_str("QMATRIX\n");
    for k in 0..n {
        if problem.q_diag[k] != 0.0 {
            let _ = writeln!(s, "    {:<8}  {:<8}  {}", names[k], names[k], 2.0 * problem.q_diag[k]);
        }
    }
    s.push_str("ENDATA\n");
    Ok(s)
}

pub fn export_mps(problem: &MiqpProblem, path: &Path) -> Result<(), MpsError> {
    let s = to_mps_string(problem)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(s.as_bytes())?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Qmatrix,
    Done,
}

/// Parses the dialect produced by [`to_mps_string`].
pub fn parse_mps(text: &str) -> Result<MiqpProblem, MpsError> {
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut row_names: Vec<String> = Vec::new();
    let mut row_sense: Vec<Sense> = Vec::new();
    let mut row_index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut var_names: Vec<String> = Vec::new();
    let mut var_index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut var_kind: Vec<VarKind> = Vec::new();
    let mut lin: Vec<f64> = Vec::new();
    let mut qdiag: Vec<f64> = Vec::new();
    let mut lb: Vec<f64> = Vec::new();
    let mut ub: Vec<f64> = Vec::new();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new(); // (row, var, coef)
    let mut rhs: Vec<f64> = Vec::new();
    let mut constant = 0.0f64;
    let mut in_int = false;

    let err = |line: usize, message: &str| MpsError::Parse { line, message: message.to_string() };
    let parse_num = |tok: &str, line: usize| -> Result<f64, MpsError> {
        tok.parse::<f64>()
            .map_err(|_| err(line, &format!("bad number `{tok}`")))
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let is_header = !raw.starts_with(' ') && !raw.starts_with('\t');
        if is_header {
            let mut it = raw.split_whitespace();
            let word = it.next().unwrap_or("");
            section = match word {
                "NAME" => section,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => return Err(err(line, "RANGES not supported")),
                "BOUNDS" => Section::Bounds,
                "QMATRIX" => Section::Qmatrix,
                "ENDATA" => Section::Done,
                other => return Err(err(line, &format!("unknown section `{other}`"))),
            };
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match section {
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(err(line, "ROWS entries need sense and name"));
                }
                match toks[0] {
                    "N" => {
                        if obj_row.is_some() {
                            return Err(err(line, "second objective row"));
                        }
                        obj_row = Some(toks[1].to_string());
                    }
                    s @ ("E" | "L" | "G") => {
                        row_index.insert(toks[1].to_string(), row_names.len());
                        row_names.push(toks[1].to_string());
                        row_sense.push(match s {
                            "E" => Sense::Eq,
                            "L" => Sense::Le,
                            _ => Sense::Ge,
                        });
                        rhs.push(0.0);
                    }
                    other => return Err(err(line, &format!("unknown row sense `{other}`"))),
                }
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    match *toks.last().unwrap() {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        other => return Err(err(line, &format!("unknown marker `{other}`"))),
                    }
                    continue;
                }
                if toks.len() < 3 || toks.len() % 2 == 0 {
                    return Err(err(line, "COLUMNS entries need name and row/value pairs"));
                }
                let vname = toks[0];
                let k = match var_index.get(vname) {
                    Some(&k) => k,
                    None => {
                        let k = var_names.len();
                        var_index.insert(vname.to_string(), k);
                        var_names.push(vname.to_string());
                        var_kind.push(if in_int { VarKind::Binary } else { VarKind::Continuous });
                        lin.push(0.0);
                        qdiag.push(0.0);
                        lb.push(0.0);
                        ub.push(f64::INFINITY);
                        k
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let value = parse_num(pair[1], line)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        lin[k] += value;
                    } else if let Some(&r) = row_index.get(pair[0]) {
                        entries.push((r, k, value));
                    } else {
                        return Err(err(line, &format!("unknown row `{}`", pair[0])));
                    }
                }
            }
            Section::Rhs => {
                if toks.len() < 3 || toks.len() % 2 == 0 {
                    return Err(err(line, "RHS entries need set name and row/value pairs"));
                }
                for pair in toks[1..].chunks(2) {
                    let value = parse_num(pair[1], line)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        constant = -value;
                    } else if let Some(&r) = row_index.get(pair[0]) {
                        rhs[r] = value;
                    } else {
                        return Err(err(line, &format!("unknown row `{}`", pair[0])));
                    }
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(err(line, "BOUNDS entries need type, set and variable"));
                }
                let k = *var_index
                    .get(toks[2])
                    .ok_or_else(|| err(line, &format!("unknown variable `{}`", toks[2])))?;
                match toks[0] {
                    "UP" => ub[k] = parse_num(toks.get(3).ok_or_else(|| err(line, "missing value"))?, line)?,
                    "LO" => lb[k] = parse_num(toks.get(3).ok_or_else(|| err(line, "missing value"))?, line)?,
                    "FX" => {
                        let v = parse_num(toks.get(3).ok_or_else(|| err(line, "missing value"))?, line)?;
                        lb[k] = v;
                        ub[k] = v;
                    }
                    "MI" => lb[k] = f64::NEG_INFINITY,
                    "PL" => ub[k] = f64::INFINITY,
                    "BV" => {
                        var_kind[k] = VarKind::Binary;
                        lb[k] = 0.0;
                        ub[k] = 1.0;
                    }
                    other => return Err(err(line, &format!("unknown bound type `{other}`"))),
                }
            }
            Section::Qmatrix => {
                if toks.len() != 3 {
                    return Err(err(line, "QMATRIX entries need two names and a value"));
                }
                if toks[0] != toks[1] {
                    return Err(err(line, "only diagonal quadratic terms are supported"));
                }
                let k = *var_index
                    .get(toks[0])
                    .ok_or_else(|| err(line, &format!("unknown variable `{}`", toks[0])))?;
                qdiag[k] = parse_num(toks[2], line)? / 2.0;
            }
            Section::Done | Section::None => {
                return Err(err(line, "data outside any section"));
            }
        }
    }
    if section != Section::Done {
        return Err(MpsError::Parse { line: text.lines().count(), message: "missing ENDATA".into() });
    }
    let n = var_names.len();
    if n == 0 {
        return Err(MpsError::EmptyProblem);
    }
    let mut problem = MiqpProblem::new(n);
    problem.q_diag = qdiag;
    problem.lin = lin;
    problem.constant = constant;
    problem.lb = lb;
    problem.ub = ub;
    problem.kind = var_kind;
    problem.names = var_names;
    // coefficients arrive row-grouped but possibly interleaved; rebuild rows
    let mut coeffs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); row_names.len()];
    for (r, k, v) in entries {
        coeffs[r].push((k, v));
    }
    for (r, name) in row_names.iter().enumerate() {
        problem.add_row(std::mem::take(&mut coeffs[r]), row_sense[r], rhs[r], name.clone());
    }
    Ok(problem)
}
