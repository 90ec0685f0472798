//! Mixed-integer quadratic program representation.
//!
//! The objective is separable-quadratic: f(x) = sum_k q[k] x[k]^2 + c[k] x[k]
//! + constant (note: q[k] multiplies x^2 directly, without the 1/2 factor).
//! Constraints are sparse linear rows with a sense and right-hand side, plus
//! per-variable bounds. A subset of variables is marked binary.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    /// Human-readable provenance of the row; diagnostics report it verbatim.
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct MiqpProblem {
    pub q_diag: Vec<f64>,
    pub lin: Vec<f64>,
    pub constant: f64,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub kind: Vec<VarKind>,
    pub rows: Vec<Row>,
    /// Variable names (MPS export and diagnostics); defaults to x{i}.
    pub names: Vec<String>,
}

impl MiqpProblem {
    pub fn new(n: usize) -> Self {
        MiqpProblem {
            q_diag: vec![0.0; n],
            lin: vec![0.0; n],
            constant: 0.0,
            lb: vec![f64::NEG_INFINITY; n],
            ub: vec![f64::INFINITY; n],
            kind: vec![VarKind::Continuous; n],
            rows: Vec::new(),
            names: (0..n).map(|i| format!("X{i}")).collect(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.q_diag.len()
    }

    pub fn num_binary(&self) -> usize {
        self.kind.iter().filter(|k| **k == VarKind::Binary).count()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64, label: impl Into<String>) {
        self.rows.push(Row { coeffs, sense, rhs, label: label.into() });
    }

    /// Objective value of a point, in problem convention.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for k in 0..self.num_vars() {
            v += self.q_diag[k] * x[k] * x[k] + self.lin[k] * x[k];
        }
        v
    }

    /// Human-readable listing of the problem for debugging: one line per
    /// variable (bounds, kind, objective terms) and one per labeled row.
    pub fn dump(&self) -> String {
        use std::fmt::Write as _;
        let n = self.num_vars();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "miqp: {} vars ({} binary), {} rows, constant {}",
            n,
            self.num_binary(),
            self.rows.len(),
            self.constant
        );
        for k in 0..n {
            let kind = match self.kind[k] {
                VarKind::Binary => "bin",
                VarKind::Continuous => "con",
            };
            let _ = writeln!(
                s,
                "  var {:<12} {} in [{}, {}]  obj {}*x^2 + {}*x",
                self.names[k], kind, self.lb[k], self.ub[k], self.q_diag[k], self.lin[k]
            );
        }
        for row in &self.rows {
            let _ = write!(s, "  row {:<28}", row.label);
            for (j, &(k, v)) in row.coeffs.iter().enumerate() {
                if j > 0 {
                    let _ = write!(s, " + ");
                } else {
                    let _ = write!(s, " ");
                }
                let _ = write!(s, "{}*{}", v, self.names[k]);
            }
            let op = match row.sense {
                Sense::Eq => "=",
                Sense::Le => "<=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(s, " {} {}", op, row.rhs);
        }
        s
    }

    /// Largest constraint violation (rows and bounds) of a point.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.num_vars() {
            worst = worst.max(self.lb[k] - x[k]).max(x[k] - self.ub[k]);
        }
        for row in &self.rows {
            let a: f64 = row.coeffs.iter().map(|&(k, v)| v * x[k]).sum();
            let viol = match row.sense {
                Sense::Eq => (a - row.rhs).abs(),
                Sense::Le => a - row.rhs,
                Sense::Ge => row.rhs - a,
            };
            worst = worst.max(viol);
        }
        worst.max(0.0)
    }
}

/// A structural defect found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    /// Negative diagonal quadratic entry: problem is non-convex.
    NonConvex { var: usize, coeff: f64 },
    /// Variable appears in no row and has no finite bound on either side.
    OrphanVariable { var: usize },
    /// Row with no coefficients.
    EmptyRow { row: usize },
    /// Row whose label is empty.
    UnlabeledRow { row: usize },
    /// lb > ub.
    InconsistentBounds { var: usize, lb: f64, ub: f64 },
    /// Binary variable whose bounds extend beyond [0, 1].
    LooseBinaryBounds { var: usize },
    /// Non-finite coefficient, bound or rhs.
    NonFinite { what: String },
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Finding::NonConvex { var, coeff } => write!(f, "non-convex quadratic coefficient {coeff} on variable {var}"),
            Finding::OrphanVariable { var } => write!(f, "variable {var} is referenced by no row and carries no finite bound"),
            Finding::EmptyRow { row } => write!(f, "row {row} has no coefficients"),
            Finding::UnlabeledRow { row } => write!(f, "row {row} has no label"),
            Finding::InconsistentBounds { var, lb, ub } => write!(f, "variable {var} has lb {lb} > ub {ub}"),
            Finding::LooseBinaryBounds { var } => write!(f, "binary variable {var} has bounds outside [0, 1]"),
            Finding::NonFinite { what } => write!(f, "non-finite value in {what}"),
        }
    }
}

/// Structural audit: convexity, bound sanity, row labels and coverage.
/// Returns all findings; an empty list means the problem is clean.
pub fn validate(p: &MiqpProblem) -> Vec<Finding> {
    let n = p.num_vars();
    let mut findings = Vec::new();
    let mut referenced = vec![false; n];
    for (k, &q) in p.q_diag.iter().enumerate() {
        if q < 0.0 {
            findings.push(Finding::NonConvex { var: k, coeff: q });
        }
        if !q.is_finite() || !p.lin[k].is_finite() {
            findings.push(Finding::NonFinite { what: format!("objective coefficient of variable {k}") });
        }
    }
    for k in 0..n {
        if p.lb[k] > p.ub[k] {
            findings.push(Finding::InconsistentBounds { var: k, lb: p.lb[k], ub: p.ub[k] });
        }
        if p.lb[k].is_nan() || p.ub[k].is_nan() {
            findings.push(Finding::NonFinite { what: format!("bounds of variable {k}") });
        }
        if p.kind[k] == VarKind::Binary && (p.lb[k] < -1e-12 || p.ub[k] > 1.0 + 1e-12) {
            findings.push(Finding::LooseBinaryBounds { var: k });
        }
    }
    for (i, row) in p.rows.iter().enumerate() {
        if row.coeffs.is_empty() {
            findings.push(Finding::EmptyRow { row: i });
        }
        if row.label.is_empty() {
            findings.push(Finding::UnlabeledRow { row: i });
        }
        if !row.rhs.is_finite() || row.coeffs.iter().any(|(_, v)| !v.is_finite()) {
            findings.push(Finding::NonFinite { what: format!("row {i} ({})", row.label) });
        }
        for &(k, _) in &row.coeffs {
            referenced[k] = true;
        }
    }
    for k in 0..n {
        if !referenced[k] && !p.lb[k].is_finite() && !p.ub[k].is_finite() {
            findings.push(Finding::OrphanVariable { var: k });
        }
    }
    findings
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_flags_defects() {
        let mut p = MiqpProblem::new(3);
        p.q_diag[0] = -1.0;
        p.lb[1] = 2.0;
        p.ub[1] = 1.0;
        p.add_row(vec![(1, 1.0)], Sense::Le, 5.0, "only-row");
        p.add_row(vec![], Sense::Eq, 0.0, "empty");
        let f = validate(&p);
        assert!(f.contains(&Finding::NonConvex { var: 0, coeff: -1.0 }));
        assert!(f.contains(&Finding::InconsistentBounds { var: 1, lb: 2.0, ub: 1.0 }));
        assert!(f.contains(&Finding::EmptyRow { row: 1 }));
        assert!(f.contains(&Finding::OrphanVariable { var: 0 }));
        assert!(f.contains(&Finding::OrphanVariable { var: 2 }));
    }

    #[test]
    fn clean_problem_has_no_findings() {
        let mut p = MiqpProblem::new(2);
        p.q_diag = vec![1.0, 0.0];
        p.lb = vec![0.0, 0.0];
        p.ub = vec![1.0, 10.0];
        p.kind[0] = VarKind::Binary;
        p.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Le, 5.0, "cap");
        assert!(validate(&p).is_empty());
    }

    #[test]
    fn dump_lists_labeled_rows() {
        let mut p = MiqpProblem::new(2);
        p.lb = vec![0.0, 0.0];
        p.ub = vec![1.0, 4.0];
        p.kind[0] = VarKind::Binary;
        p.names[1] = "power".into();
        p.add_row(vec![(0, 2.0), (1, -1.0)], Sense::Ge, 0.5, "gate-power");
        let text = p.dump();
        assert!(text.contains("2 vars (1 binary), 1 rows"));
        assert!(text.contains("gate-power"));
        assert!(text.contains("-1*power"));
        assert!(text.contains(">= 0.5"));
    }
}
