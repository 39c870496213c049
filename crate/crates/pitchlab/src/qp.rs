//! Dense warm-startable primal active-set solver for strictly convex QPs
//!
//!     minimize    1/2 x' H x + g' x
//!     subject to  lb  <=   x    <= ub        (box rows)
//!                 lbA <= A_ineq x <= ubA     (general affine rows)
//!
//! The working-set subproblems are solved through an LDL' factorization of
//! the reduced KKT system (H factored once per solve, the working-set Schur
//! complement refactorized on every active-set change). Active-set updates
//! follow most-negative-multiplier removal with smallest-index tie-break and
//! a full ratio test for blocking-constraint addition, so iterates are fully
//! deterministic. Warm starts reuse the previous active set, which is the
//! whole point when the solver runs inside an MPC tick loop with a deadline.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid bounds: {0}")]
    Bounds(String),
    #[error("Hessian asymmetric beyond tolerance (max deviation {0:e})")]
    Asymmetric(f64),
    #[error("non-finite problem data: {0}")]
    NonFinite(String),
}

/// Feasibility tolerance used for warm-start acceptance, phase-1 success and
/// final constraint checks.
pub const FEAS_TOL: f64 = 1e-9;

/// Smallest admissible Hessian eigenvalue; enforced by shifting with a
/// multiple of the identity at problem construction.
pub const REG_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Lower,
    Upper,
}

/// Strictly convex QP with box and general affine two-sided constraints.
///
/// Constraint indexing used by active sets: constraint `i` in `0..n` is the
/// box row of variable `i`; constraint `n + j` is affine row `j`. A signed
/// active-set entry `+(i+1)` means "at upper bound of constraint `i`",
/// `-(i+1)` means "at lower bound".
#[derive(Debug, Clone)]
pub struct QpProblem {
    h: DMatrix<f64>,
    g: DVector<f64>,
    lb: DVector<f64>,
    ub: DVector<f64>,
    a_ineq: DMatrix<f64>,
    lb_a: DVector<f64>,
    ub_a: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        h: DMatrix<f64>,
        g: DVector<f64>,
        lb: DVector<f64>,
        ub: DVector<f64>,
        a_ineq: DMatrix<f64>,
        lb_a: DVector<f64>,
        ub_a: DVector<f64>,
    ) -> Result<Self, QpError> {
        let n = h.nrows();
        if h.ncols() != n {
            return Err(QpError::Dimension(format!("H is {}x{}", h.nrows(), h.ncols())));
        }
        if g.len() != n || lb.len() != n || ub.len() != n {
            return Err(QpError::Dimension(format!(
                "g/lb/ub lengths {}/{}/{} vs n = {n}",
                g.len(),
                lb.len(),
                ub.len()
            )));
        }
        let p = a_ineq.nrows();
        if p > 0 && a_ineq.ncols() != n {
            return Err(QpError::Dimension(format!(
                "A_ineq is {}x{}, expected {p}x{n}",
                a_ineq.nrows(),
                a_ineq.ncols()
            )));
        }
        if lb_a.len() != p || ub_a.len() != p {
            return Err(QpError::Dimension(format!(
                "lbA/ubA lengths {}/{} vs p = {p}",
                lb_a.len(),
                ub_a.len()
            )));
        }
        for v in h.iter().chain(g.iter()).chain(a_ineq.iter()) {
            if !v.is_finite() {
                return Err(QpError::NonFinite("H, g and A_ineq must be finite".into()));
            }
        }
        for i in 0..n {
            if lb[i].is_nan() || ub[i].is_nan() || lb[i] > ub[i] {
                return Err(QpError::Bounds(format!("lb[{i}] = {} > ub[{i}] = {}", lb[i], ub[i])));
            }
        }
        for j in 0..p {
            if lb_a[j].is_nan() || ub_a[j].is_nan() || lb_a[j] > ub_a[j] {
                return Err(QpError::Bounds(format!(
                    "lbA[{j}] = {} > ubA[{j}] = {}",
                    lb_a[j], ub_a[j]
                )));
            }
        }

        // Symmetrize and enforce the eigenvalue floor.
        let scale = h.amax().max(1.0);
        let mut asym: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                asym = asym.max((h[(i, j)] - h[(j, i)]).abs());
            }
        }
        if asym > 1e-6 * scale {
            return Err(QpError::Asymmetric(asym));
        }
        let mut h = 0.5 * (&h + h.transpose());
        let eigs = h.clone().symmetric_eigenvalues();
        let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < REG_FLOOR {
            let shift = REG_FLOOR - min_eig + REG_FLOOR;
            for i in 0..n {
                h[(i, i)] += shift;
            }
        }
        Ok(QpProblem { h, g, lb, ub, a_ineq, lb_a, ub_a })
    }

    /// Box-constrained problem (no affine rows).
    pub fn box_only(
        h: DMatrix<f64>,
        g: DVector<f64>,
        lb: DVector<f64>,
        ub: DVector<f64>,
    ) -> Result<Self, QpError> {
        let n = h.nrows();
        Self::new(h, g, lb, ub, DMatrix::zeros(0, n), DVector::zeros(0), DVector::zeros(0))
    }

    /// Fully unconstrained problem.
    pub fn unconstrained(h: DMatrix<f64>, g: DVector<f64>) -> Result<Self, QpError> {
        let n = h.nrows();
        Self::box_only(
            h,
            g,
            DVector::from_element(n, f64::NEG_INFINITY),
            DVector::from_element(n, f64::INFINITY),
        )
    }

    pub fn num_vars(&self) -> usize {
        self.h.nrows()
    }

    pub fn num_affine(&self) -> usize {
        self.a_ineq.nrows()
    }

    /// Total constraint count (box rows + affine rows).
    pub fn num_constraints(&self) -> usize {
        self.num_vars() + self.num_affine()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn gradient(&self) -> &DVector<f64> {
        &self.g
    }

    /// In-place gradient update; dimensions must match (used by MPC which
    /// rebuilds `g` every tick while `H` stays fixed).
    pub fn set_gradient(&mut self, g: DVector<f64>) -> Result<(), QpError> {
        if g.len() != self.num_vars() {
            return Err(QpError::Dimension(format!(
                "gradient length {} vs n = {}",
                g.len(),
                self.num_vars()
            )));
        }
        self.g = g;
        Ok(())
    }

    /// Update one affine row's bounds (used for the rate row referencing the
    /// previously applied command).
    pub fn set_affine_bounds(&mut self, row: usize, lo: f64, hi: f64) -> Result<(), QpError> {
        if row >= self.num_affine() {
            return Err(QpError::Dimension(format!("affine row {row} out of range")));
        }
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(QpError::Bounds(format!("row {row}: [{lo}, {hi}]")));
        }
        self.lb_a[row] = lo;
        self.ub_a[row] = hi;
        Ok(())
    }

    fn row_dot(&self, idx: usize, x: &DVector<f64>) -> f64 {
        let n = self.num_vars();
        if idx < n {
            x[idx]
        } else {
            self.a_ineq.row(idx - n).transpose().dot(x)
        }
    }

    fn row_column(&self, idx: usize) -> DVector<f64> {
        let n = self.num_vars();
        let mut v = DVector::zeros(n);
        if idx < n {
            v[idx] = 1.0;
        } else {
            for j in 0..n {
                v[j] = self.a_ineq[(idx - n, j)];
            }
        }
        v
    }

    fn bounds(&self, idx: usize) -> (f64, f64) {
        let n = self.num_vars();
        if idx < n {
            (self.lb[idx], self.ub[idx])
        } else {
            (self.lb_a[idx - n], self.ub_a[idx - n])
        }
    }

    /// Maximum constraint violation at `x` (0 when feasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.num_constraints() {
            let v = self.row_dot(i, x);
            let (lo, hi) = self.bounds(i);
            if lo.is_finite() {
                worst = worst.max(lo - v);
            }
            if hi.is_finite() {
                worst = worst.max(v - hi);
            }
        }
        worst
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.h * x).dot(x) + self.g.dot(x)
    }

    /// Write the problem to a text file for offline debugging: a dimensions
    /// line, then each matrix/vector row-major with round-trippable floats.
    pub fn dump(&self, path: &std::path::Path) -> std::io::Result<()> {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "n {} p {}", self.num_vars(), self.num_affine());
        let mat = |out: &mut String, name: &str, m: &DMatrix<f64>| {
            let _ = writeln!(out, "{name}");
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        };
        let vec = |out: &mut String, name: &str, v: &DVector<f64>| {
            let row: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(out, "{name}\n{}", row.join(" "));
        };
        mat(&mut out, "H", &self.h);
        vec(&mut out, "g", &self.g);
        vec(&mut out, "lb", &self.lb);
        vec(&mut out, "ub", &self.ub);
        mat(&mut out, "A_ineq", &self.a_ineq);
        vec(&mut out, "lbA", &self.lb_a);
        vec(&mut out, "ubA", &self.ub_a);
        std::fs::write(path, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIterReached,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Signed constraint indices of the final working set; feed back as the
    /// next warm start.
    pub active_set: Vec<i32>,
    pub iterations: usize,
    pub status: QpStatus,
    pub objective: f64,
    pub kkt_residual: f64,
}

// ---------------------------------------------------------------------------
// LDL' factorization (no square roots, no pivoting; inputs are positive
// definite by construction).

struct Ldlt {
    l: DMatrix<f64>,
    d: DVector<f64>,
}

impl Ldlt {
    fn factor(m: &DMatrix<f64>) -> Option<Ldlt> {
        let n = m.nrows();
        let scale = m.amax().max(1.0);
        let mut l = DMatrix::identity(n, n);
        let mut d = DVector::zeros(n);
        for j in 0..n {
            let mut dj = m[(j, j)];
            for k in 0..j {
                dj -= l[(j, k)] * l[(j, k)] * d[k];
            }
            if dj <= 1e-14 * scale {
                return None;
            }
            d[j] = dj;
            for i in (j + 1)..n {
                let mut v = m[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)] * d[k];
                }
                l[(i, j)] = v / dj;
            }
        }
        Some(Ldlt { l, d })
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.d.len();
        let mut x = b.clone();
        for i in 0..n {
            for k in 0..i {
                let lik = self.l[(i, k)];
                x[i] -= lik * x[k];
            }
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let lki = self.l[(k, i)];
                x[i] -= lki * x[k];
            }
        }
        x
    }
}

// ---------------------------------------------------------------------------
// Working set

#[derive(Debug, Clone, Default)]
struct WorkSet {
    /// (constraint index, side), kept sorted by index for determinism.
    entries: Vec<(usize, Side)>,
}

impl WorkSet {
    fn from_signed(signed: &[i32], prob: &QpProblem) -> Option<WorkSet> {
        let total = prob.num_constraints();
        let mut entries = Vec::with_capacity(signed.len());
        for &s in signed {
            if s == 0 {
                return None;
            }
            let idx = (s.unsigned_abs() as usize).checked_sub(1)?;
            if idx >= total {
                return None;
            }
            let side = if s > 0 { Side::Upper } else { Side::Lower };
            let (lo, hi) = prob.bounds(idx);
            let bound = if side == Side::Upper { hi } else { lo };
            if !bound.is_finite() {
                return None;
            }
            entries.push((idx, side));
        }
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return None; // both sides of one constraint cannot be active
        }
        Some(WorkSet { entries })
    }

    fn to_signed(&self) -> Vec<i32> {
        self.entries
            .iter()
            .map(|&(idx, side)| {
                let v = (idx + 1) as i32;
                if side == Side::Upper {
                    v
                } else {
                    -v
                }
            })
            .collect()
    }

    fn contains(&self, idx: usize) -> bool {
        self.entries.binary_search_by_key(&idx, |e| e.0).is_ok()
    }

    fn insert(&mut self, idx: usize, side: Side) {
        let pos = self.entries.partition_point(|e| e.0 < idx);
        self.entries.insert(pos, (idx, side));
    }

    fn remove_at(&mut self, pos: usize) {
        self.entries.remove(pos);
    }

    fn len(&self) -> usize {
        self.entries.len()
    }

    fn bound_values(&self, prob: &QpProblem) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.entries.iter().map(|&(idx, side)| {
                let (lo, hi) = prob.bounds(idx);
                if side == Side::Upper {
                    hi
                } else {
                    lo
                }
            }),
        )
    }
}

// ---------------------------------------------------------------------------
// Solver

/// Reusable solver. One instance per control loop; distinct instances run in
/// parallel safely (all state is owned).
#[derive(Debug, Default)]
pub struct QpSolver {
    /// Objective value after each phase-2 iteration of the last solve.
    objective_trace: Vec<f64>,
}

struct EqpFactors {
    hf: Ldlt,
}

impl EqpFactors {
    /// Solve the KKT system  [H A'; A 0] [x; l] = [r1; r2]  for the rows in
    /// `ws`, refactorizing the working-set Schur complement.
    fn kkt_solve(
        &self,
        prob: &QpProblem,
        ws: &WorkSet,
        r1: &DVector<f64>,
        r2: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let y = self.hf.solve(r1);
        let m = ws.len();
        if m == 0 {
            return Some((y, DVector::zeros(0)));
        }
        let n = prob.num_vars();
        let mut v = DMatrix::zeros(n, m);
        for (j, &(idx, _)) in ws.entries.iter().enumerate() {
            let col = self.hf.solve(&prob.row_column(idx));
            v.set_column(j, &col);
        }
        let mut s = DMatrix::zeros(m, m);
        for (i, &(idx, _)) in ws.entries.iter().enumerate() {
            let ai = prob.row_column(idx);
            for j in 0..m {
                s[(i, j)] = ai.dot(&v.column(j).into_owned());
            }
        }
        let sf = Ldlt::factor(&s)?;
        let mut rhs = DVector::zeros(m);
        for (i, &(idx, _)) in ws.entries.iter().enumerate() {
            rhs[i] = prob.row_dot(idx, &y) - r2[i];
        }
        let lambda = sf.solve(&rhs);
        let x = y - v * &lambda;
        Some((x, lambda))
    }
}

impl QpSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Objective value after each phase-2 iteration of the most recent solve
    /// (non-increasing by construction of the active-set method).
    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    /// Solve the QP, optionally warm-started from a previous active set.
    ///
    /// `Solved` certifies a KKT residual of at most 1e-8. `MaxIterReached`
    /// returns the best (feasible) iterate together with its working set so
    /// the caller can warm-start the next solve. `Infeasible` is returned
    /// when phase-1 feasibility restoration fails.
    pub fn solve(
        &mut self,
        prob: &QpProblem,
        warm_start: Option<&[i32]>,
        max_iter: usize,
    ) -> QpSolution {
        self.objective_trace.clear();
        let n = prob.num_vars();
        let factors = match Ldlt::factor(&prob.h) {
            Some(hf) => EqpFactors { hf },
            // Cannot happen after construction-time regularization; treat as
            // a degenerate no-progress solve.
            None => {
                let x = DVector::zeros(n);
                return QpSolution {
                    kkt_residual: kkt_residual(prob, &x, &[]),
                    objective: prob.objective(&x),
                    x,
                    active_set: Vec::new(),
                    iterations: 0,
                    status: QpStatus::MaxIterReached,
                };
            }
        };

        let mut iterations = 0usize;

        // Starting point: warm-start EQP solution if it is feasible,
        // otherwise a clamped origin, with phase-1 restoration if the affine
        // rows are violated there.
        let mut state: Option<(DVector<f64>, WorkSet)> = None;
        if let Some(signed) = warm_start {
            if let Some(ws) = WorkSet::from_signed(signed, prob) {
                let b = ws.bound_values(prob);
                if let Some((x, _)) = factors.kkt_solve(prob, &ws, &(-&prob.g), &b) {
                    if prob.max_violation(&x) <= FEAS_TOL {
                        state = Some((x, ws));
                    }
                }
            }
        }
        if state.is_none() {
            let mut x0 = DVector::zeros(n);
            for i in 0..n {
                x0[i] = 0.0f64.clamp(prob.lb[i], prob.ub[i]);
            }
            if prob.max_violation(&x0) <= FEAS_TOL {
                state = Some((x0, WorkSet::default()));
            } else {
                match phase1(prob, &x0) {
                    Some((x, iters)) => {
                        iterations += iters;
                        state = Some((x, WorkSet::default()));
                    }
                    None => {
                        return QpSolution {
                            kkt_residual: f64::INFINITY,
                            objective: prob.objective(&x0),
                            x: x0,
                            active_set: Vec::new(),
                            iterations,
                            status: QpStatus::Infeasible,
                        };
                    }
                }
            }
        }
        let (mut x, mut ws) = state.expect("starting state established");

        let (converged, mut lambda) = iterate(
            prob,
            &factors,
            &mut x,
            &mut ws,
            max_iter,
            &mut iterations,
            Some(&mut self.objective_trace),
        );

        let mut status = if converged { QpStatus::Solved } else { QpStatus::MaxIterReached };

        if status == QpStatus::Solved {
            // One iterative-refinement pass on the final KKT system.
            let mut res1 = -(&prob.h * &x) - &prob.g;
            for (j, &(idx, _)) in ws.entries.iter().enumerate() {
                res1 -= prob.row_column(idx) * lambda[j];
            }
            let b = ws.bound_values(prob);
            let mut res2 = b.clone();
            for (j, &(idx, _)) in ws.entries.iter().enumerate() {
                res2[j] = b[j] - prob.row_dot(idx, &x);
            }
            if let Some((dx, dl)) = factors.kkt_solve(prob, &ws, &res1, &res2) {
                let x_new = &x + &dx;
                if prob.max_violation(&x_new) <= FEAS_TOL {
                    x = x_new;
                    lambda += dl;
                }
            }
        }

        let active_set = ws.to_signed();
        let resid = kkt_residual(prob, &x, &active_set);
        if status == QpStatus::Solved && resid > 1e-8 {
            // Do not certify what the residual does not support.
            status = QpStatus::MaxIterReached;
        }
        QpSolution {
            objective: prob.objective(&x),
            kkt_residual: resid,
            x,
            active_set,
            iterations,
            status,
        }
    }
}

/// Core primal active-set loop. `x` must be feasible on entry; returns
/// (converged, final multipliers).
fn iterate(
    prob: &QpProblem,
    factors: &EqpFactors,
    x: &mut DVector<f64>,
    ws: &mut WorkSet,
    max_iter: usize,
    iterations: &mut usize,
    mut trace: Option<&mut Vec<f64>>,
) -> (bool, DVector<f64>) {
    let g_scale = 1.0 + prob.g.amax() + prob.h.amax();
    let tol_mult = 1e-10 * g_scale;
    let mut lambda = DVector::zeros(0);
    let total = prob.num_constraints();
    let mut zero_steps = 0usize;

    while *iterations < max_iter {
        *iterations += 1;
        let r1 = -(&prob.h * &*x) - &prob.g;
        let zero = DVector::zeros(ws.len());
        let Some((p, lam)) = factors.kkt_solve(prob, ws, &r1, &zero) else {
            // Degenerate working set; give up on certification.
            return (false, lambda);
        };
        lambda = lam;

        let tol_step = 1e-11 * (1.0 + x.amax());
        if p.amax() <= tol_step {
            // Stationary on the working set: check multiplier signs.
            let mut worst: Option<(usize, f64)> = None; // (position in ws, sigma)
            for (pos, &(_, side)) in ws.entries.iter().enumerate() {
                let sigma = match side {
                    Side::Upper => lambda[pos],
                    Side::Lower => -lambda[pos],
                };
                if sigma < -tol_mult && worst.map_or(true, |(_, w)| sigma < w) {
                    worst = Some((pos, sigma));
                }
            }
            match worst {
                None => {
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(prob.objective(x));
                    }
                    return (true, lambda);
                }
                Some((pos, _)) => {
                    ws.remove_at(pos);
                }
            }
        } else {
            // Full ratio test over constraints outside the working set.
            let mut alpha = 1.0f64;
            let mut blocking: Option<(usize, Side)> = None;
            for idx in 0..total {
                if ws.contains(idx) {
                    continue;
                }
                let dir = prob.row_dot(idx, &p);
                let (lo, hi) = prob.bounds(idx);
                if dir > 1e-13 && hi.is_finite() {
                    let cand = ((hi - prob.row_dot(idx, x)) / dir).max(0.0);
                    if cand < alpha - 1e-15 {
                        alpha = cand;
                        blocking = Some((idx, Side::Upper));
                    }
                } else if dir < -1e-13 && lo.is_finite() {
                    let cand = ((lo - prob.row_dot(idx, x)) / dir).max(0.0);
                    if cand < alpha - 1e-15 {
                        alpha = cand;
                        blocking = Some((idx, Side::Lower));
                    }
                }
            }
            *x += &p * alpha;
            if let Some((idx, side)) = blocking {
                // Snap box rows onto their bound to avoid drift.
                if idx < prob.num_vars() {
                    let (lo, hi) = prob.bounds(idx);
                    x[idx] = if side == Side::Upper { hi } else { lo };
                }
                ws.insert(idx, side);
            }
            if alpha <= 1e-15 {
                zero_steps += 1;
                if zero_steps > 2 * total + 10 {
                    return (false, lambda); // stalled on degeneracy
                }
            } else {
                zero_steps = 0;
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(prob.objective(x));
        }
    }
    (false, lambda)
}

/// Phase 1: restore feasibility of the affine rows by minimizing a slack
/// variable `s >= 0` that relaxes every affine row, starting from a point
/// that is feasible for the relaxed problem by construction. Returns the
/// feasible point and the iterations spent, or `None` when the constraint
/// set is (numerically) infeasible.
fn phase1(prob: &QpProblem, x0: &DVector<f64>) -> Option<(DVector<f64>, usize)> {
    let n = prob.num_vars();
    let p = prob.num_affine();
    let eps = 1e-6;

    let mut h = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        h[(i, i)] = eps;
    }
    h[(n, n)] = 1.0;
    let mut g = DVector::zeros(n + 1);
    for i in 0..n {
        g[i] = -eps * x0[i];
    }

    let mut lb = DVector::from_element(n + 1, f64::NEG_INFINITY);
    let mut ub = DVector::from_element(n + 1, f64::INFINITY);
    for i in 0..n {
        lb[i] = prob.lb[i];
        ub[i] = prob.ub[i];
    }
    lb[n] = 0.0;

    // Two relaxed rows per finite affine bound: a'x - s <= ubA, a'x + s >= lbA.
    let mut rows = Vec::new();
    let mut lo_b = Vec::new();
    let mut hi_b = Vec::new();
    for j in 0..p {
        let (lo, hi) = (prob.lb_a[j], prob.ub_a[j]);
        if hi.is_finite() {
            let mut r = DVector::zeros(n + 1);
            for k in 0..n {
                r[k] = prob.a_ineq[(j, k)];
            }
            r[n] = -1.0;
            rows.push(r);
            lo_b.push(f64::NEG_INFINITY);
            hi_b.push(hi);
        }
        if lo.is_finite() {
            let mut r = DVector::zeros(n + 1);
            for k in 0..n {
                r[k] = prob.a_ineq[(j, k)];
            }
            r[n] = 1.0;
            rows.push(r);
            lo_b.push(lo);
            hi_b.push(f64::INFINITY);
        }
    }
    let m = rows.len();
    let mut a = DMatrix::zeros(m, n + 1);
    for (i, r) in rows.iter().enumerate() {
        a.set_row(i, &r.transpose());
    }
    let aug = QpProblem {
        h,
        g,
        lb,
        ub,
        a_ineq: a,
        lb_a: DVector::from_vec(lo_b),
        ub_a: DVector::from_vec(hi_b),
    };

    // Feasible start for the relaxed problem.
    let mut z = DVector::zeros(n + 1);
    for i in 0..n {
        z[i] = x0[i];
    }
    let mut viol: f64 = 0.0;
    for j in 0..p {
        let v = prob.a_ineq.row(j).transpose().dot(x0);
        if prob.lb_a[j].is_finite() {
            viol = viol.max(prob.lb_a[j] - v);
        }
        if prob.ub_a[j].is_finite() {
            viol = viol.max(v - prob.ub_a[j]);
        }
    }
    z[n] = viol + 1.0;

    let factors = EqpFactors { hf: Ldlt::factor(&aug.h)? };
    let mut ws = WorkSet::default();
    let mut iters = 0usize;
    let cap = 50 + 10 * (n + m);
    let (converged, _) = iterate(&aug, &factors, &mut z, &mut ws, cap, &mut iters, None);
    if !converged {
        return None;
    }
    let s = z[n];
    if s > FEAS_TOL {
        return None;
    }
    let mut x = DVector::zeros(n);
    for i in 0..n {
        x[i] = z[i].clamp(prob.lb[i], prob.ub[i]);
    }
    if prob.max_violation(&x) > 10.0 * FEAS_TOL {
        return None;
    }
    Some((x, iters))
}

/// Least-squares multipliers for the rows named by a signed active set.
pub fn multipliers_for(prob: &QpProblem, x: &DVector<f64>, active_set: &[i32]) -> Vec<f64> {
    let Some(ws) = WorkSet::from_signed(active_set, prob) else {
        return vec![0.0; active_set.len()];
    };
    let m = ws.len();
    if m == 0 {
        return Vec::new();
    }
    let n = prob.num_vars();
    let mut at = DMatrix::zeros(n, m);
    for (j, &(idx, _)) in ws.entries.iter().enumerate() {
        at.set_column(j, &prob.row_column(idx));
    }
    let rhs = -(&prob.h * x) - &prob.g;
    let svd = at.svd(true, true);
    let lam = svd.solve(&rhs, 1e-12).unwrap_or_else(|_| DVector::zeros(m));
    lam.iter().cloned().collect()
}

/// KKT residual at `(x, active_set)`: the maximum of the stationarity norm,
/// the primal infeasibility, and the complementary-slackness violation.
pub fn kkt_residual(prob: &QpProblem, x: &DVector<f64>, active_set: &[i32]) -> f64 {
    let lam = multipliers_for(prob, x, active_set);
    let ws = WorkSet::from_signed(active_set, prob).unwrap_or_default();

    let mut stat = (&prob.h * x) + &prob.g;
    for (j, &(idx, _)) in ws.entries.iter().enumerate() {
        stat += prob.row_column(idx) * lam[j];
    }
    let stationarity = stat.amax();

    let primal = prob.max_violation(x);

    let mut comp: f64 = 0.0;
    for (j, &(idx, side)) in ws.entries.iter().enumerate() {
        let (lo, hi) = prob.bounds(idx);
        let bound = if side == Side::Upper { hi } else { lo };
        comp = comp.max((lam[j] * (prob.row_dot(idx, x) - bound)).abs());
    }

    stationarity.max(primal).max(comp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn solve1(prob: &QpProblem) -> QpSolution {
        QpSolver::new().solve(prob, None, 100)
    }

    #[test]
    fn unconstrained_minimizer() {
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![-1.0, -2.0]);
        let prob = QpProblem::unconstrained(h, g).unwrap();
        let sol = solve1(&prob);
        assert_eq!(sol.status, QpStatus::Solved);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(sol.x[1], 2.0, epsilon = 1e-10);
        assert!(sol.kkt_residual <= 1e-8);
    }

    #[test]
    fn single_upper_bound_with_multiplier() {
        // min 1/2 x^2 - x  s.t. x <= 0.5  ->  x = 0.5, multiplier 0.5
        let h = DMatrix::from_element(1, 1, 1.0);
        let g = DVector::from_vec(vec![-1.0]);
        let lb = DVector::from_vec(vec![f64::NEG_INFINITY]);
        let ub = DVector::from_vec(vec![0.5]);
        let prob = QpProblem::box_only(h, g, lb, ub).unwrap();
        let sol = solve1(&prob);
        assert_eq!(sol.status, QpStatus::Solved);
        assert_relative_eq!(sol.x[0], 0.5, epsilon = 1e-12);
        assert_eq!(sol.active_set, vec![1]); // upper side of box 0
        let lam = multipliers_for(&prob, &sol.x, &sol.active_set);
        assert_relative_eq!(lam[0], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn affine_constraint_engages() {
        // min 1/2 |x|^2 - [3, 0] x  s.t. x0 + x1 <= 1
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![-3.0, 0.0]);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let prob = QpProblem::new(
            h,
            g,
            DVector::from_element(2, f64::NEG_INFINITY),
            DVector::from_element(2, f64::INFINITY),
            a,
            DVector::from_vec(vec![f64::NEG_INFINITY]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        let sol = solve1(&prob);
        // KKT: x = (3,0) - l(1,1), x0+x1 = 1 -> l = 1, x = (2,-1)
        assert_eq!(sol.status, QpStatus::Solved);
        assert_relative_eq!(sol.x[0], 2.0, epsilon = 1e-9);
        assert_relative_eq!(sol.x[1], -1.0, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_rows_detected() {
        let h = DMatrix::identity(1, 1);
        let g = DVector::zeros(1);
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let prob = QpProblem::new(
            h,
            g,
            DVector::from_vec(vec![f64::NEG_INFINITY]),
            DVector::from_vec(vec![f64::INFINITY]),
            a,
            DVector::from_vec(vec![2.0, f64::NEG_INFINITY]),
            DVector::from_vec(vec![f64::INFINITY, 1.0]),
        )
        .unwrap();
        // x >= 2 and x <= 1 simultaneously.
        let sol = solve1(&prob);
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn max_iter_zero_returns_start() {
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![-1.0, -2.0]);
        let prob = QpProblem::unconstrained(h, g).unwrap();
        let sol = QpSolver::new().solve(&prob, None, 0);
        assert_eq!(sol.status, QpStatus::MaxIterReached);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn kkt_residual_at_perturbed_point() {
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![-1.0, -2.0]);
        let prob = QpProblem::unconstrained(h, g).unwrap();
        let x = DVector::from_vec(vec![1.1, 2.0]);
        let r = kkt_residual(&prob, &x, &[]);
        assert!(r >= 0.09, "residual {r}");
        let x_opt = DVector::from_vec(vec![1.0, 2.0]);
        assert!(kkt_residual(&prob, &x_opt, &[]) <= 1e-12);
    }

    #[test]
    fn warm_start_from_optimal_set_is_immediate() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let g = DVector::from_vec(vec![-8.0, -9.0]);
        let lb = DVector::from_vec(vec![0.0, 0.0]);
        let ub = DVector::from_vec(vec![1.0, 1.0]);
        let prob = QpProblem::box_only(h, g, lb, ub).unwrap();
        let mut solver = QpSolver::new();
        let cold = solver.solve(&prob, None, 100);
        assert_eq!(cold.status, QpStatus::Solved);
        let warm = solver.solve(&prob, Some(&cold.active_set), 100);
        assert_eq!(warm.status, QpStatus::Solved);
        assert!(warm.iterations <= 2, "warm took {} iterations", warm.iterations);
        assert!((&warm.x - &cold.x).amax() <= 1e-9);
    }

    #[test]
    fn determinism_same_inputs_same_iterates() {
        let h = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let g = DVector::from_vec(vec![-1.0, 2.0, -0.5]);
        let lb = DVector::from_vec(vec![-0.5, -0.5, -0.5]);
        let ub = DVector::from_vec(vec![0.5, 0.5, 0.5]);
        let prob = QpProblem::box_only(h, g, lb, ub).unwrap();
        let a = solve1(&prob);
        let b = solve1(&prob);
        assert_eq!(a.x, b.x);
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.active_set, b.active_set);
    }

    #[test]
    fn objective_monotone_over_iterations() {
        let h = DMatrix::from_row_slice(3, 3, &[5.0, 1.0, 0.2, 1.0, 4.0, 0.1, 0.2, 0.1, 3.0]);
        let g = DVector::from_vec(vec![-10.0, 4.0, -2.0]);
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let prob = QpProblem::new(
            h,
            g,
            DVector::from_element(3, -1.0),
            DVector::from_element(3, 1.0),
            a,
            DVector::from_vec(vec![-0.5, -0.5]),
            DVector::from_vec(vec![0.5, 0.5]),
        )
        .unwrap();
        let mut solver = QpSolver::new();
        let sol = solver.solve(&prob, None, 100);
        assert_eq!(sol.status, QpStatus::Solved);
        let trace = solver.objective_trace();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "objective rose: {w:?}");
        }
    }

    #[test]
    fn regularization_floor_applied() {
        let h = DMatrix::zeros(2, 2); // singular on purpose
        let g = DVector::from_vec(vec![0.0, 0.0]);
        let prob = QpProblem::box_only(
            h,
            g,
            DVector::from_element(2, -1.0),
            DVector::from_element(2, 1.0),
        )
        .unwrap();
        let min_eig = prob
            .hessian()
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(min_eig >= REG_FLOOR);
        let sol = solve1(&prob);
        assert_eq!(sol.status, QpStatus::Solved);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let h = DMatrix::identity(2, 2);
        let g = DVector::zeros(3);
        assert!(QpProblem::unconstrained(h, g).is_err());
    }

    proptest! {
        // Diagonal-H box-only problems are separable: the solution is the
        // componentwise clamp of the unconstrained minimizer.
        #[test]
        fn diagonal_box_exact(
            hd in proptest::collection::vec(0.1f64..5.0, 1..6),
            gs in proptest::collection::vec(-3.0f64..3.0, 6),
            bs in proptest::collection::vec(-2.0f64..2.0, 12),
        ) {
            let n = hd.len();
            let h = DMatrix::from_diagonal(&DVector::from_vec(hd.clone()));
            let g = DVector::from_vec(gs[..n].to_vec());
            let mut lb = DVector::zeros(n);
            let mut ub = DVector::zeros(n);
            for i in 0..n {
                let (a, b) = (bs[2 * i], bs[2 * i + 1]);
                lb[i] = a.min(b);
                ub[i] = a.max(b);
            }
            let prob = QpProblem::box_only(h, g.clone(), lb.clone(), ub.clone()).unwrap();
            let sol = QpSolver::new().solve(&prob, None, 200);
            prop_assert_eq!(sol.status, QpStatus::Solved);
            for i in 0..n {
                let expect = (-g[i] / hd[i]).clamp(lb[i], ub[i]);
                prop_assert!((sol.x[i] - expect).abs() <= 1e-9,
                    "x[{}] = {} expected {}", i, sol.x[i], expect);
            }
        }
    }
}
