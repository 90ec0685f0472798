//! Branch-and-bound for mixed-binary QPs with separable quadratic cost.
//!
//! The continuous relaxation at every node reuses one KKT factorization:
//! binaries are fixed by narrowing their bound rows, never by editing the
//! matrix. Pruning decisions rely exclusively on the certified Lagrangian
//! bound of each node (valid even for unconverged duals), so the search
//! returns the true optimum within the configured gap regardless of how
//! sloppy individual ADMM solves are. Node order is deterministic for a
//! fixed option set: ties in the best-bound heap break on insertion order,
//! branching ties on the lowest variable index.

use crate::problem::{MiqpProblem, Sense, VarKind};
use crate::qp::{QpEngine, QpScratch, QpSettings, QpState, QpStatus};
use crate::sparse::CscMatrix;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching {
    MostFractional,
    PseudoCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSelection {
    /// Best-bound heap with plunging dives after each branching.
    BestBound,
    /// Pure LIFO depth-first search.
    DepthFirstDive,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub abs_gap_tol: f64,
    pub rel_gap_tol: f64,
    /// Accuracy of incumbent (fixed-binary) solves and the root relaxation.
    pub kkt_tol: f64,
    /// Accuracy of interior node relaxations.
    pub node_eps: f64,
    pub integrality_tol: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    pub threads: usize,
    pub branching: Branching,
    pub node_selection: NodeSelection,
    /// Attempt a rounding heuristic every this many nodes (0 disables).
    pub heuristic_period: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            abs_gap_tol: 1e-4,
            rel_gap_tol: 1e-6,
            kkt_tol: 1e-8,
            node_eps: 1e-6,
            integrality_tol: 1e-6,
            node_limit: 500_000,
            time_limit: None,
            threads: 1,
            branching: Branching::PseudoCost,
            node_selection: NodeSelection::BestBound,
            heuristic_period: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Gap closed to tolerance.
    Optimal,
    /// Search stopped (node limit or unconverged leaves) with the reported gap.
    GapLimit,
    TimeLimit,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct MiqpSolution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    /// Objective including the problem's constant term.
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes_explored: usize,
    pub qp_iterations: usize,
    /// Nodes whose relaxation never converged; they are closed with their
    /// inherited rigorous bound and counted here.
    pub node_failures: usize,
    pub wall_time: Duration,
}

#[derive(Debug)]
pub enum SolverError {
    NonConvex(usize),
    NonFinite(String),
    InconsistentBounds(usize),
    LayoutMismatch { values: usize, vars_per_step: usize },
}

impl std::fmt::Display for SolverError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverError::NonConvex(k) => write!(f, "negative quadratic coefficient on variable {k}"),
            SolverError::NonFinite(w) => write!(f, "non-finite data in {w}"),
            SolverError::InconsistentBounds(k) => write!(f, "lower bound above upper bound on variable {k}"),
            SolverError::LayoutMismatch { values, vars_per_step } => {
                write!(f, "{values} values do not align with {vars_per_step} variables per step")
            }
        }
    }
}

impl std::error::Error for SolverError {}

/// Shifts a receding-horizon solution by `shift` steps to seed the next
/// block: step i of the hint is step i+shift of `previous`, with the tail
/// padded by repeating the final step. `shift = 0` returns the values as-is;
/// `shift >= steps` returns an empty hint.
pub fn warm_start_from(
    previous: &MiqpSolution,
    vars_per_step: usize,
    shift: usize,
) -> Result<Vec<f64>, SolverError> {
    if vars_per_step == 0 || previous.values.len() % vars_per_step != 0 {
        return Err(SolverError::LayoutMismatch {
            values: previous.values.len(),
            vars_per_step,
        });
    }
    let steps = previous.values.len() / vars_per_step;
    if shift >= steps {
        return Ok(Vec::new());
    }
    let mut hint = Vec::with_capacity(previous.values.len());
    for i in 0..steps {
        let src = (i + shift).min(steps - 1);
        hint.extend_from_slice(&previous.values[src * vars_per_step..(src + 1) * vars_per_step]);
    }
    Ok(hint)
}

// ---------------------------------------------------------------------------
// standalone QP interface

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpSolveStatus {
    Solved,
    Infeasible,
    Unbounded,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: QpSolveStatus,
    pub values: Vec<f64>,
    /// Objective including the problem's constant term.
    pub objective: f64,
    pub stationarity_res: f64,
    pub feasibility_res: f64,
    pub complementarity_res: f64,
}

/// Solves the continuous relaxation of `problem` (binaries relaxed to their
/// bounds intersected with [0,1]) to the requested KKT tolerance.
pub fn solve_qp(problem: &MiqpProblem, kkt_tol: f64) -> Result<QpSolution, SolverError> {
    let mut solver = MiqpSolver::new(problem, SolverOptions::default())?;
    solver.opts.kkt_tol = kkt_tol;
    let mut scratch = QpScratch::new(solver.engine.n, solver.engine.m);
    let mut state = solver.fresh_state();
    let out = solver.engine.solve_robust(
        &mut state,
        &mut scratch,
        kkt_tol,
        kkt_tol,
        solver.engine.settings.max_iter,
    );
    let status = match out.status {
        QpStatus::Solved => {
            solver.engine.polish(&mut state, &mut scratch);
            QpSolveStatus::Solved
        }
        QpStatus::PrimalInfeasible => QpSolveStatus::Infeasible,
        QpStatus::DualInfeasible => QpSolveStatus::Unbounded,
        QpStatus::MaxIter => QpSolveStatus::MaxIter,
    };
    let (stat, feas, comp) = solver.kkt_residuals(&state);
    Ok(QpSolution {
        status,
        objective: solver.engine.objective(&state.x) + problem.constant,
        values: state.x,
        stationarity_res: stat,
        feasibility_res: feas,
        complementarity_res: comp,
    })
}

// ---------------------------------------------------------------------------

struct Node {
    bfix: Box<[i8]>, // per binary: -1 free, 0 or 1 fixed
    bound: f64,
    depth: u32,
    seq: u64,
    /// Warm-start iterates; dropped on queued nodes when memory matters.
    state: Option<QpState>,
    /// (branch position, fixed-to-one, parent fractional value) for
    /// pseudo-cost bookkeeping; cleared once counted.
    branched: Option<(usize, bool, f64)>,
}

struct HeapEntry {
    bound: f64,
    seq: u64,
    node: Node,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // BinaryHeap is a max-heap; invert so the smallest bound pops first,
    // oldest insertion first on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Open-node container honoring the configured selection rule.
enum OpenSet {
    Heap(BinaryHeap<HeapEntry>),
    Stack(Vec<Node>),
}

impl OpenSet {
    fn push(&mut self, node: Node) {
        match self {
            OpenSet::Heap(h) => h.push(HeapEntry { bound: node.bound, seq: node.seq, node }),
            OpenSet::Stack(s) => s.push(node),
        }
    }
    fn pop(&mut self) -> Option<Node> {
        match self {
            OpenSet::Heap(h) => h.pop().map(|e| e.node),
            OpenSet::Stack(s) => s.pop(),
        }
    }
    fn len(&self) -> usize {
        match self {
            OpenSet::Heap(h) => h.len(),
            OpenSet::Stack(s) => s.len(),
        }
    }
    fn min_bound(&self) -> f64 {
        match self {
            OpenSet::Heap(h) => h.iter().fold(f64::INFINITY, |b, e| b.min(e.bound)),
            OpenSet::Stack(s) => s.iter().fold(f64::INFINITY, |b, n| b.min(n.bound)),
        }
    }
}

struct RowData {
    coeffs: Vec<(usize, f64)>,
    lo: f64,
    hi: f64,
}

fn eval_child(engine: &QpEngine, node: &mut Node, eps: f64, max_iter: usize) -> (f64, usize, QpStatus) {
    let mut scratch = QpScratch::new(engine.n, engine.m);
    let state = node.state.as_mut().expect("child carries a state");
    let out = engine.solve(state, &mut scratch, eps, eps, max_iter);
    (out.certified_lower, out.iters, out.status)
}

pub struct MiqpSolver {
    engine: QpEngine,
    n: usize,
    constant: f64,
    binaries: Vec<usize>,
    bin_pos: Vec<Option<usize>>, // var index -> position in `binaries`
    base_l: Vec<f64>,
    base_u: Vec<f64>,
    rows: Vec<RowData>,
    pub opts: SolverOptions,
    // pseudo-cost statistics per binary: (down sum, down count, up sum, up count)
    pcost: Vec<[f64; 4]>,
    // root presolve proved the feasible set empty
    proven_infeasible: bool,
}

impl MiqpSolver {
    pub fn new(problem: &MiqpProblem, opts: SolverOptions) -> Result<Self, SolverError> {
        let n = problem.num_vars();
        for k in 0..n {
            if problem.q_diag[k] < 0.0 {
                return Err(SolverError::NonConvex(k));
            }
            if !problem.q_diag[k].is_finite() || !problem.lin[k].is_finite() {
                return Err(SolverError::NonFinite(format!("objective of variable {k}")));
            }
        }
        let mut lb = problem.lb.clone();
        let mut ub = problem.ub.clone();
        let mut binaries = Vec::new();
        let mut bin_pos = vec![None; n];
        for k in 0..n {
            if problem.kind[k] == VarKind::Binary {
                lb[k] = lb[k].max(0.0);
                ub[k] = ub[k].min(1.0);
                bin_pos[k] = Some(binaries.len());
                binaries.push(k);
            }
            if lb[k] > ub[k] {
                return Err(SolverError::InconsistentBounds(k));
            }
        }
        let m_user = problem.rows.len();
        let mut trip = Vec::new();
        let mut rows = Vec::with_capacity(m_user);
        let mut l_user = Vec::with_capacity(m_user);
        let mut u_user = Vec::with_capacity(m_user);
        for (i, row) in problem.rows.iter().enumerate() {
            for &(k, v) in &row.coeffs {
                if !v.is_finite() {
                    return Err(SolverError::NonFinite(format!("row {i}")));
                }
                trip.push((i, k, v));
            }
            let (lo, hi) = match row.sense {
                Sense::Eq => (row.rhs, row.rhs),
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
            };
            l_user.push(lo);
            u_user.push(hi);
            rows.push(RowData { coeffs: row.coeffs.clone(), lo, hi });
        }
        let a = CscMatrix::from_triplets(m_user, n, &trip);
        let mut engine = QpEngine::new(&problem.q_diag, &problem.lin, &a, QpSettings::default());
        let mut base_l = l_user;
        let mut base_u = u_user;
        base_l.extend_from_slice(&lb);
        base_u.extend_from_slice(&ub);
        engine.classify_rows(&base_l, &base_u);
        let pcost = vec![[0.0; 4]; binaries.len()];
        let mut solver = MiqpSolver {
            engine,
            n,
            constant: problem.constant,
            binaries,
            bin_pos,
            base_l,
            base_u,
            rows,
            opts,
            pcost,
            proven_infeasible: false,
        };
        // root bound tightening: fixings and tighter boxes found with no
        // branching assumptions hold tree-wide, so bake them into the base
        let mut root_fix = vec![-1i8; solver.binaries.len()];
        let (mut lb_t, mut ub_t) = solver.node_var_bounds(&root_fix);
        if solver.propagate(&mut root_fix, &mut lb_t, &mut ub_t) {
            let off = solver.rows.len();
            solver.base_l[off..].copy_from_slice(&lb_t);
            solver.base_u[off..].copy_from_slice(&ub_t);
            solver.engine.classify_rows(&solver.base_l, &solver.base_u);
        } else {
            solver.proven_infeasible = true;
        }
        Ok(solver)
    }

    pub fn solve(&mut self) -> MiqpSolution {
        self.solve_with_hint(None)
    }

    fn fresh_state(&self) -> QpState {
        QpState {
            l: self.base_l.clone(),
            u: self.base_u.clone(),
            x: vec![0.0; self.n],
            y: vec![0.0; self.engine.m],
            z: vec![0.0; self.engine.m],
        }
    }

    fn apply_bounds(&self, bfix: &[i8], state: &mut QpState) {
        state.l.copy_from_slice(&self.base_l);
        state.u.copy_from_slice(&self.base_u);
        let off = self.rows.len();
        for (pos, &v) in bfix.iter().enumerate() {
            if v >= 0 {
                let k = self.binaries[pos];
                state.l[off + k] = v as f64;
                state.u[off + k] = v as f64;
            }
        }
    }

    fn kkt_residuals(&self, state: &QpState) -> (f64, f64, f64) {
        let off = self.rows.len();
        let mut ax = vec![0.0; self.engine.m];
        for (i, row) in self.rows.iter().enumerate() {
            let mut v = 0.0;
            for &(k, a) in &row.coeffs {
                v += a * state.x[k];
            }
            ax[i] = v;
        }
        for k in 0..self.n {
            ax[off + k] = state.x[k];
        }
        let feas = self.max_violation(&state.x, &state.l, &state.u);
        let mut aty = vec![0.0; self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, a) in &row.coeffs {
                aty[k] += a * state.y[i];
            }
        }
        let mut stat = 0.0f64;
        for k in 0..self.n {
            let g = self.engine.grad_term(k, state.x[k]) + aty[k] + state.y[off + k];
            stat = stat.max(g.abs());
        }
        let mut comp = 0.0f64;
        for i in 0..self.engine.m {
            let y = state.y[i];
            if y > 0.0 {
                let slack = state.u[i] - ax[i];
                comp = comp.max(if slack.is_finite() { y * slack.abs() } else { y });
            } else if y < 0.0 {
                let slack = ax[i] - state.l[i];
                comp = comp.max(if slack.is_finite() { -y * slack.abs() } else { -y });
            }
        }
        (stat, feas, comp)
    }

    /// Interval propagation over the linear rows, fixing binaries whose
    /// opposite value cannot satisfy a row. Returns false when some row is
    /// certainly unsatisfiable over the current box.
    fn propagate(&self, bfix: &mut [i8], lb: &mut [f64], ub: &mut [f64]) -> bool {
        const ROUNDS: usize = 8;
        for round in 0..ROUNDS {
            let mut changed = false;
            for row in &self.rows {
                let mut min_act = 0.0f64;
                let mut max_act = 0.0f64;
                for &(k, a) in &row.coeffs {
                    if a > 0.0 {
                        min_act += a * lb[k];
                        max_act += a * ub[k];
                    } else {
                        min_act += a * ub[k];
                        max_act += a * lb[k];
                    }
                }
                let tol = 1e-7 * (1.0 + row.lo.abs().max(row.hi.abs()).min(1e12));
                if min_act > row.hi + tol || max_act < row.lo - tol {
                    return false;
                }
                if !min_act.is_finite() || !max_act.is_finite() {
                    continue;
                }
                for &(k, a) in &row.coeffs {
                    if a == 0.0 {
                        continue;
                    }
                    let (rest_min, rest_max) = if a > 0.0 {
                        (min_act - a * lb[k], max_act - a * ub[k])
                    } else {
                        (min_act - a * ub[k], max_act - a * lb[k])
                    };
                    if let Some(pos) = self.bin_pos[k] {
                        if bfix[pos] >= 0 {
                            continue;
                        }
                        let bad1 = rest_min + a > row.hi + tol || rest_max + a < row.lo - tol;
                        let bad0 = rest_min > row.hi + tol || rest_max < row.lo - tol;
                        if bad0 && bad1 {
                            return false;
                        } else if bad1 {
                            bfix[pos] = 0;
                            lb[k] = 0.0;
                            ub[k] = 0.0;
                            changed = true;
                        } else if bad0 {
                            bfix[pos] = 1;
                            lb[k] = 1.0;
                            ub[k] = 1.0;
                            changed = true;
                        }
                        continue;
                    }
                    // interval tightening of the continuous box: a·x_k must
                    // fit in [row.lo - rest_max, row.hi - rest_min]; slack
                    // grows the candidate so rounding noise never cuts a
                    // feasible point
                    let (cand_lo, cand_hi) = if a > 0.0 {
                        ((row.lo - rest_max) / a, (row.hi - rest_min) / a)
                    } else {
                        ((row.hi - rest_min) / a, (row.lo - rest_max) / a)
                    };
                    if cand_lo.is_finite() {
                        let cand = cand_lo - 1e-9 * (1.0 + cand_lo.abs());
                        if cand > lb[k] + 1e-9 * (1.0 + lb[k].abs()) {
                            lb[k] = cand;
                            changed = true;
                        }
                    }
                    if cand_hi.is_finite() {
                        let cand = cand_hi + 1e-9 * (1.0 + cand_hi.abs());
                        if cand < ub[k] - 1e-9 * (1.0 + ub[k].abs()) {
                            ub[k] = cand;
                            changed = true;
                        }
                    }
                    if lb[k] > ub[k] {
                        let span = 1e-7 * (1.0 + lb[k].abs().max(ub[k].abs()));
                        if lb[k] > ub[k] + span {
                            return false;
                        }
                        // sub-tolerance crossing from accumulated rounding:
                        // collapse instead of declaring the box empty
                        let mid = 0.5 * (lb[k] + ub[k]);
                        lb[k] = mid;
                        ub[k] = mid;
                        changed = true;
                    }
                }
            }
            if !changed || round == ROUNDS - 1 {
                break;
            }
        }
        true
    }

    fn node_var_bounds(&self, bfix: &[i8]) -> (Vec<f64>, Vec<f64>) {
        let off = self.rows.len();
        let mut lb = self.base_l[off..].to_vec();
        let mut ub = self.base_u[off..].to_vec();
        for (pos, &v) in bfix.iter().enumerate() {
            if v >= 0 {
                let k = self.binaries[pos];
                lb[k] = v as f64;
                ub[k] = v as f64;
            }
        }
        (lb, ub)
    }

    /// Solve the QP with every binary forced by `pattern`; on success returns
    /// the polished objective (without constant) and the solution point.
    fn try_pattern(
        &self,
        pattern: &[i8],
        warm: &QpState,
        scratch: &mut QpScratch,
    ) -> Option<(f64, Vec<f64>)> {
        let mut state = warm.clone();
        self.apply_bounds(pattern, &mut state);
        let out = self.engine.solve(
            &mut state,
            scratch,
            self.opts.kkt_tol,
            self.opts.kkt_tol,
            self.engine.settings.max_iter,
        );
        if out.status != QpStatus::Solved {
            return None;
        }
        self.engine.polish(&mut state, scratch);
        if self.max_violation(&state.x, &state.l, &state.u) > 1e-6 {
            return None;
        }
        let mut x = state.x.clone();
        for (pos, &v) in pattern.iter().enumerate() {
            if v >= 0 {
                x[self.binaries[pos]] = v as f64;
            }
        }
        Some((self.engine.objective(&x), x))
    }

    /// Rounding heuristic: freeze every free binary at the nearest integer of
    /// the relaxation point, propagate, and resolve the continuous variables.
    fn round_and_resolve(
        &self,
        bfix: &[i8],
        x: &[f64],
        warm: &QpState,
        scratch: &mut QpScratch,
    ) -> Option<(f64, Vec<f64>)> {
        let mut pat: Box<[i8]> = bfix.to_vec().into_boxed_slice();
        for (pos, &k) in self.binaries.iter().enumerate() {
            if pat[pos] < 0 {
                pat[pos] = if x[k] >= 0.5 { 1 } else { 0 };
            }
        }
        let (mut lb, mut ub) = self.node_var_bounds(&pat);
        if !self.propagate(&mut pat, &mut lb, &mut ub) {
            return None;
        }
        self.try_pattern(&pat, warm, scratch)
    }

    fn max_violation(&self, x: &[f64], l: &[f64], u: &[f64]) -> f64 {
        let mut viol = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            let mut ax = 0.0;
            for &(k, a) in &row.coeffs {
                ax += a * x[k];
            }
            viol = viol.max(l[i] - ax).max(ax - u[i]);
        }
        let off = self.rows.len();
        for k in 0..self.n {
            viol = viol.max(l[off + k] - x[k]).max(x[k] - u[off + k]);
        }
        viol
    }

    fn pick_branch(&self, x: &[f64], bfix: &[i8]) -> Option<(usize, f64)> {
        let use_pcost = self.opts.branching == Branching::PseudoCost
            && self.pcost.iter().any(|st| st[1] > 0.0 || st[3] > 0.0);
        let (mut dsum, mut dcnt, mut usum, mut ucnt) = (0.0, 0.0, 0.0, 0.0);
        if use_pcost {
            for st in &self.pcost {
                dsum += st[0];
                dcnt += st[1];
                usum += st[2];
                ucnt += st[3];
            }
        }
        let davg = if dcnt > 0.0 { dsum / dcnt } else { 1.0 };
        let uavg = if ucnt > 0.0 { usum / ucnt } else { 1.0 };
        let mut best: Option<(usize, f64, f64)> = None; // (position, frac, score)
        for (pos, &k) in self.binaries.iter().enumerate() {
            if bfix[pos] >= 0 {
                continue;
            }
            let f = x[k].clamp(0.0, 1.0);
            if f.min(1.0 - f) <= self.opts.integrality_tol {
                continue;
            }
            let score = if use_pcost {
                let st = &self.pcost[pos];
                let dn = if st[1] > 0.0 { st[0] / st[1] } else { davg };
                let up = if st[3] > 0.0 { st[2] / st[3] } else { uavg };
                (dn * f).max(1e-8) * (up * (1.0 - f)).max(1e-8)
            } else {
                f.min(1.0 - f)
            };
            if best.as_ref().map_or(true, |&(_, _, s)| score > s) {
                best = Some((pos, f, score));
            }
        }
        best.map(|(pos, f, _)| (pos, f))
    }

    fn terminal(&self, status: SolveStatus, nodes: usize, qp_iterations: usize, failures: usize, start: Instant) -> MiqpSolution {
        MiqpSolution {
            status,
            values: vec![0.0; self.n],
            objective: f64::INFINITY,
            best_bound: f64::INFINITY,
            gap: 0.0,
            nodes_explored: nodes,
            qp_iterations,
            node_failures: failures,
            wall_time: start.elapsed(),
        }
    }

    fn cutoff(&self, incumbent: &Option<(f64, Vec<f64>)>) -> f64 {
        match incumbent {
            Some((obj, _)) => {
                let full = obj + self.constant;
                obj - self.opts.abs_gap_tol.max(self.opts.rel_gap_tol * full.abs())
            }
            None => f64::INFINITY,
        }
    }

    pub fn solve_with_hint(&mut self, hint: Option<&[f64]>) -> MiqpSolution {
        let start = Instant::now();
        if self.proven_infeasible {
            return self.terminal(SolveStatus::Infeasible, 0, 0, 0, start);
        }
        let nbin = self.binaries.len();
        let mut scratch = QpScratch::new(self.engine.n, self.engine.m);
        let mut incumbent: Option<(f64, Vec<f64>)> = None; // objective without constant
        let mut qp_iterations = 0usize;
        let mut nodes = 0usize;
        let mut failures = 0usize;
        let mut seq = 0u64;
        // bound over regions closed without a converged relaxation
        let mut unresolved_bound = f64::INFINITY;
        // heap entries carry warm-start states only while that stays cheap
        let state_floats = 4 * self.engine.m + self.n;
        let max_stored_states = (64_000_000 / state_floats.max(1)).max(16);

        let constant = self.constant;
        let log_incumbent = move |obj: f64, nodes: usize, open_min: f64, start: &Instant| {
            let inc = obj + constant;
            let bound = open_min.min(obj) + constant;
            log::info!(
                "{:.3},{},{:.9},{:.9},{:.3e}",
                start.elapsed().as_secs_f64(),
                nodes,
                inc,
                bound,
                inc - bound
            );
        };

        let mut root_fix = vec![-1i8; nbin].into_boxed_slice();
        {
            let (mut lb, mut ub) = self.node_var_bounds(&root_fix);
            if !self.propagate(&mut root_fix, &mut lb, &mut ub) {
                return self.terminal(SolveStatus::Infeasible, 0, 0, 0, start);
            }
        }
        let mut root_state = self.fresh_state();
        if let Some(h) = hint {
            let n = self.n.min(h.len());
            root_state.x[..n].copy_from_slice(&h[..n]);
        }
        self.apply_bounds(&root_fix, &mut root_state);

        // incumbent from the hint's binary pattern
        if let Some(h) = hint {
            let mut pat = vec![-1i8; nbin].into_boxed_slice();
            for (pos, &k) in self.binaries.iter().enumerate() {
                if k < h.len() {
                    pat[pos] = if h[k] >= 0.5 { 1 } else { 0 };
                }
            }
            let (mut lb, mut ub) = self.node_var_bounds(&pat);
            if self.propagate(&mut pat, &mut lb, &mut ub) {
                if let Some((obj, x)) = self.try_pattern(&pat, &root_state, &mut scratch) {
                    log_incumbent(obj, 0, f64::NEG_INFINITY, &start);
                    incumbent = Some((obj, x));
                }
            }
        }

        let root_out = self.engine.solve_robust(
            &mut root_state,
            &mut scratch,
            self.opts.kkt_tol.max(1e-9),
            self.opts.kkt_tol.max(1e-9),
            self.engine.settings.max_iter,
        );
        qp_iterations += root_out.iters;
        if root_out.status == QpStatus::PrimalInfeasible {
            return self.terminal(SolveStatus::Infeasible, 1, qp_iterations, 0, start);
        }
        if root_out.status == QpStatus::DualInfeasible {
            return self.terminal(SolveStatus::Unbounded, 1, qp_iterations, 0, start);
        }

        let mut open = match self.opts.node_selection {
            NodeSelection::BestBound => OpenSet::Heap(BinaryHeap::new()),
            NodeSelection::DepthFirstDive => OpenSet::Stack(Vec::new()),
        };
        seq += 1;
        let mut current = Some(Node {
            bfix: root_fix,
            bound: root_out.certified_lower,
            depth: 0,
            seq,
            state: Some(root_state),
            branched: None,
        });

        let mut stop_status: Option<SolveStatus> = None;
        'search: while let Some(mut node) = current.take().or_else(|| open.pop()) {
            if node.bound >= self.cutoff(&incumbent) {
                continue 'search;
            }
            if nodes >= self.opts.node_limit
                || self.opts.time_limit.map_or(false, |lim| start.elapsed() > lim)
            {
                stop_status = Some(if nodes >= self.opts.node_limit {
                    SolveStatus::GapLimit
                } else {
                    SolveStatus::TimeLimit
                });
                unresolved_bound = unresolved_bound.min(node.bound);
                break 'search;
            }
            nodes += 1;

            let mut state = match node.state.take() {
                Some(s) => s,
                None => {
                    let mut s = self.fresh_state();
                    if let Some((_, x)) = &incumbent {
                        s.x.copy_from_slice(x);
                    }
                    self.apply_bounds(&node.bfix, &mut s);
                    s
                }
            };
            let inherited = node.bound;
            let out = self.engine.solve(
                &mut state,
                &mut scratch,
                self.opts.node_eps,
                self.opts.node_eps,
                self.engine.settings.max_iter / 4,
            );
            qp_iterations += out.iters;
            node.bound = node.bound.max(out.certified_lower);
            node.state = Some(state);
            if out.status == QpStatus::Solved && out.certified_lower.is_finite() {
                if let Some((bpos, up, bfrac)) = node.branched.take() {
                    let f = if up { 1.0 - bfrac } else { bfrac };
                    if f > 1e-9 && inherited.is_finite() {
                        let gain = (out.certified_lower - inherited).max(0.0);
                        let stats = &mut self.pcost[bpos];
                        if up {
                            stats[2] += gain / f;
                            stats[3] += 1.0;
                        } else {
                            stats[0] += gain / f;
                            stats[1] += 1.0;
                        }
                    }
                }
            }

            match out.status {
                QpStatus::PrimalInfeasible => continue 'search,
                QpStatus::DualInfeasible | QpStatus::MaxIter => {
                    failures += 1;
                    if self
                        .pick_branch(&node.state.as_ref().unwrap().x, &node.bfix)
                        .is_none()
                    {
                        // leaf that never converged: salvage an incumbent from
                        // its rounded pattern, then close it with the best
                        // rigorous bound available
                        let warm = node.state.as_ref().unwrap();
                        if let Some((obj, x)) =
                            self.round_and_resolve(&node.bfix, &warm.x, warm, &mut scratch)
                        {
                            if incumbent.as_ref().map_or(true, |(best, _)| obj < *best) {
                                log_incumbent(obj, nodes, node.bound.min(open.min_bound()), &start);
                                incumbent = Some((obj, x));
                            }
                        }
                        if node.bound < self.cutoff(&incumbent) {
                            unresolved_bound = unresolved_bound.min(node.bound);
                        }
                        continue 'search;
                    }
                }
                QpStatus::Solved => {}
            }
            if node.bound >= self.cutoff(&incumbent) {
                continue 'search;
            }

            // periodic rounding heuristic (always at the root)
            let try_heuristic = out.status == QpStatus::Solved
                && self.opts.heuristic_period > 0
                && (nodes == 1 || nodes % self.opts.heuristic_period == 0);
            if try_heuristic {
                let warm = node.state.as_ref().unwrap();
                if let Some((obj, x)) = self.round_and_resolve(&node.bfix, &warm.x, warm, &mut scratch) {
                    if incumbent.as_ref().map_or(true, |(best, _)| obj < *best) {
                        log_incumbent(obj, nodes, node.bound.min(open.min_bound()), &start);
                        incumbent = Some((obj, x));
                    }
                }
            }

            let node_x = &node.state.as_ref().unwrap().x;
            let Some((pos, frac)) = self.pick_branch(node_x, &node.bfix) else {
                // integral relaxation: lock the pattern and resolve it exactly
                let warm = node.state.as_ref().unwrap();
                if let Some((obj, x)) = self.round_and_resolve(&node.bfix, node_x, warm, &mut scratch) {
                    if incumbent.as_ref().map_or(true, |(best, _)| obj < *best) {
                        log_incumbent(obj, nodes, node.bound.min(open.min_bound()), &start);
                        incumbent = Some((obj, x));
                    }
                } else if node.bound < self.cutoff(&incumbent) {
                    failures += 1;
                    unresolved_bound = unresolved_bound.min(node.bound);
                }
                continue 'search;
            };

            let parent_bound = node.bound;
            let parent_state = node.state.take().unwrap();
            let make_child = |fix_val: i8, child_seq: u64| -> Option<Node> {
                let mut bfix = node.bfix.clone();
                bfix[pos] = fix_val;
                let (mut lb, mut ub) = self.node_var_bounds(&bfix);
                if !self.propagate(&mut bfix, &mut lb, &mut ub) {
                    return None;
                }
                let mut child_state = parent_state.clone();
                self.apply_bounds(&bfix, &mut child_state);
                Some(Node {
                    bfix,
                    bound: parent_bound,
                    depth: node.depth + 1,
                    seq: child_seq,
                    state: Some(child_state),
                    branched: Some((pos, fix_val == 1, frac)),
                })
            };
            seq += 1;
            let s0 = seq;
            seq += 1;
            let s1 = seq;
            let mut child0 = make_child(0, s0);
            let mut child1 = make_child(1, s1);

            if self.opts.threads >= 2 {
                // refine both child bounds now, in parallel
                let engine = &self.engine;
                let eps = self.opts.node_eps;
                let max_iter = self.engine.settings.max_iter / 4;
                let (r0, r1) = std::thread::scope(|s| {
                    let h0 = child0
                        .as_mut()
                        .map(|c| s.spawn(move || eval_child(engine, c, eps, max_iter)));
                    let r1 = child1.as_mut().map(|c| eval_child(engine, c, eps, max_iter));
                    (h0.map(|h| h.join().expect("child eval panicked")), r1)
                });
                for (child, res, up) in [(&mut child0, r0, false), (&mut child1, r1, true)] {
                    let Some((bnd, iters, st)) = res else { continue };
                    qp_iterations += iters;
                    if st == QpStatus::PrimalInfeasible {
                        *child = None;
                        continue;
                    }
                    if let Some(c) = child.as_mut() {
                        c.bound = c.bound.max(bnd);
                        if st == QpStatus::Solved && bnd.is_finite() && parent_bound.is_finite() {
                            c.branched = None; // counted here, not again on pop
                            let f = if up { 1.0 - frac } else { frac };
                            if f > 1e-9 {
                                let stats = &mut self.pcost[pos];
                                let gain = (bnd - parent_bound).max(0.0);
                                if up {
                                    stats[2] += gain / f;
                                    stats[3] += 1.0;
                                } else {
                                    stats[0] += gain / f;
                                    stats[1] += 1.0;
                                }
                            }
                        }
                    }
                }
            }

            // dive toward the rounding of the fractional value; queue the other
            let (dive, queued) = if frac < 0.5 { (child0, child1) } else { (child1, child0) };
            if let Some(mut q) = queued {
                if q.bound < self.cutoff(&incumbent) {
                    if open.len() >= max_stored_states {
                        q.state = None;
                    }
                    open.push(q);
                }
            }
            current = match dive {
                Some(d) if d.bound < self.cutoff(&incumbent) => Some(d),
                _ => None,
            };
        }

        let mut open_bound = unresolved_bound;
        if let Some(n) = &current {
            open_bound = open_bound.min(n.bound);
        }
        open_bound = open_bound.min(open.min_bound());
        match incumbent {
            Some((obj, x)) => {
                let best_bound = open_bound.min(obj);
                let gap = obj - best_bound;
                let full = obj + self.constant;
                let tol = self.opts.abs_gap_tol.max(self.opts.rel_gap_tol * full.abs());
                let status = match stop_status {
                    Some(s) => s,
                    None if gap <= tol + 1e-12 => SolveStatus::Optimal,
                    None => SolveStatus::GapLimit,
                };
                MiqpSolution {
                    status,
                    values: x,
                    objective: full,
                    best_bound: best_bound + self.constant,
                    gap,
                    nodes_explored: nodes,
                    qp_iterations,
                    node_failures: failures,
                    wall_time: start.elapsed(),
                }
            }
            None => {
                let status = match stop_status {
                    Some(SolveStatus::TimeLimit) => SolveStatus::TimeLimit,
                    Some(_) => SolveStatus::GapLimit,
                    None if open_bound == f64::INFINITY => SolveStatus::Infeasible,
                    None => SolveStatus::GapLimit,
                };
                let mut sol = self.terminal(status, nodes, qp_iterations, failures, start);
                sol.best_bound = open_bound + self.constant;
                if status != SolveStatus::Infeasible {
                    sol.gap = f64::INFINITY;
                }
                sol
            }
        }
    }
}
