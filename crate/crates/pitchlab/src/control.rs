//! The three pitch controllers: gain-scheduled PI baseline, preview
//! feedforward LQR, and constrained MPC.
//!
//! All controllers share one interface: measurements and the wind preview at
//! tick `k` in, pitch command at tick `k` out, with output saturation,
//! internal integrator state, and fault handling. The optimal controllers
//! work in deviation coordinates around the design model's operating point
//! and append an integral state on the speed error for offset-free behavior;
//! both physical states are measured directly, so there is no estimator.
//!
//! The MPC condenses the prediction over the input sequence, keeps the
//! Hessian fixed offline, and rebuilds only the gradient (and the first
//! rate-constraint row, which references the previously applied command)
//! every tick. With the terminal cost taken from the discrete Riccati
//! solution, the unconstrained MPC reproduces the preview-LQR law exactly,
//! which is the main cross-validation lever in the test suite.

use crate::inflow::PreviewWindow;
use crate::qp::{QpError, QpProblem, QpSolver, QpStatus};
use crate::sysid::LinearModel;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("Riccati iteration did not converge in {iters} iterations (residual {residual:.3e})")]
    NonConvergence { iters: usize, residual: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Qp(#[from] QpError),
}

/// Pitch actuator limits seen by the controllers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub pitch_min: f64,
    pub pitch_max: f64,
    /// Rate limit [rad/s].
    pub rate: f64,
}

/// Clamp to the position limits, then clamp the move from `prev` to the rate
/// limit over one period `ts`.
pub fn saturate_rate_limit(u: f64, prev: f64, limits: &Limits, ts: f64) -> f64 {
    let u = u.clamp(limits.pitch_min, limits.pitch_max);
    let max_move = limits.rate * ts;
    u.clamp(prev - max_move, prev + max_move)
}

/// Solve the discrete algebraic Riccati equation by fixed-point iteration of
/// the Riccati recursion. Returns `(P, K)` with
/// `K = (Ru + B' P B)^-1 B' P A`.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    qw: &DMatrix<f64>,
    ru: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>), ControlError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != 1 || qw.nrows() != n || qw.ncols() != n {
        return Err(ControlError::InvalidInput(format!(
            "dimension mismatch: A {}x{}, B {}x{}, Q {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            qw.nrows(),
            qw.ncols()
        )));
    }
    if !(ru > 0.0) {
        return Err(ControlError::InvalidInput(format!("Ru = {ru} must be > 0")));
    }
    let sym_err = (qw - qw.transpose()).amax();
    if sym_err > 1e-10 * qw.amax().max(1.0) {
        return Err(ControlError::InvalidInput("Qw must be symmetric".into()));
    }
    let min_eig = qw
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-10 * qw.amax().max(1.0) {
        return Err(ControlError::InvalidInput(format!(
            "Qw is indefinite (min eigenvalue {min_eig:.3e})"
        )));
    }

    // Structure-preserving doubling: each pass squares the number of plain
    // Riccati recursion steps, so weakly damped closed-loop modes (spectral
    // radius near 1) still converge in a few dozen passes.
    let mut ak = a.clone();
    let mut gk = (b * b.transpose()) / ru;
    let mut hk = qw.clone();
    let eye = DMatrix::identity(n, n);
    let mut iters = 0usize;
    let mut diff = f64::INFINITY;
    while iters < max_iter {
        iters += 1;
        let w = &eye + &gk * &hk;
        let Some(w_inv) = w.lu().try_inverse() else {
            return Err(ControlError::NonConvergence { iters, residual: diff });
        };
        let awi = &ak * &w_inv;
        let h_next = &hk + &ak.transpose() * &hk * &w_inv * &ak;
        let g_next = &gk + &awi * &gk * ak.transpose();
        let a_next = &awi * &ak;
        diff = (&h_next - &hk).amax();
        hk = 0.5 * (&h_next + h_next.transpose());
        gk = 0.5 * (&g_next + g_next.transpose());
        ak = a_next;
        if !hk.iter().all(|v| v.is_finite()) {
            return Err(ControlError::NonConvergence { iters, residual: f64::INFINITY });
        }
        if diff <= 1e-15 * hk.amax().max(1.0) {
            break;
        }
    }
    let p = hk;
    let bt = b.transpose();
    let s = ru + (&bt * &p * b)[(0, 0)];
    let k = (&bt * &p * a) / s;
    // Certify against the Riccati recursion itself.
    let p_next = a.transpose() * &p * a - (a.transpose() * &p * b) * &k + qw;
    let residual = (&p_next - &p).amax();
    if !residual.is_finite() || residual > tol * p.amax().max(1.0) {
        return Err(ControlError::NonConvergence { iters, residual });
    }
    Ok((p, k))
}

/// Preview feedforward gains `Kd[i] = (Ru + B'PB)^-1 B' (Ac')^i P Bd` with
/// `Ac = A - B K`: the optimal weighting of the wind deviation expected `i`
/// ticks ahead.
pub fn preview_gains(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    bd: &DMatrix<f64>,
    p: &DMatrix<f64>,
    k: &DMatrix<f64>,
    ru: f64,
    np: usize,
) -> Result<Vec<f64>, ControlError> {
    let n = a.nrows();
    if b.nrows() != n || bd.nrows() != n || p.nrows() != n || k.ncols() != n {
        return Err(ControlError::InvalidInput("preview_gains dimension mismatch".into()));
    }
    if np == 0 {
        return Err(ControlError::InvalidInput("Np must be >= 1".into()));
    }
    let s = ru + (b.transpose() * p * b)[(0, 0)];
    let ac_t = (a - b * k).transpose();
    let mut acc = p * bd; // (Ac')^i P Bd, starting at i = 0
    let mut kd = Vec::with_capacity(np);
    for _ in 0..np {
        kd.push((b.transpose() * &acc)[(0, 0)] / s);
        acc = &ac_t * acc;
    }
    Ok(kd)
}

/// Append an integral state on the measured output:
/// `z_{k+1} = z_k + Ts * (C x_k)`.
pub fn augment_integrator(m: &LinearModel) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = m.n();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(&m.a);
    for j in 0..n {
        a[(n, j)] = m.ts * m.c[(0, j)];
    }
    a[(n, n)] = 1.0;
    let mut b = DMatrix::zeros(n + 1, 1);
    b.view_mut((0, 0), (n, 1)).copy_from(&m.b);
    let mut bd = DMatrix::zeros(n + 1, 1);
    bd.view_mut((0, 0), (n, 1)).copy_from(&m.bd);
    (a, b, bd)
}

/// Riccati solution, feedback gain and preview gains for the augmented model.
#[derive(Debug, Clone)]
pub struct LqDesign {
    pub p: DMatrix<f64>,
    /// 1 x (n+1) feedback gain on `[x; integral]`.
    pub k: DMatrix<f64>,
    /// Np scalar preview gains.
    pub kd: Vec<f64>,
    pub qw: DMatrix<f64>,
    pub ru: f64,
    pub np: usize,
}

impl LqDesign {
    /// Design on `model` augmented with the speed-error integrator.
    /// `qw_diag` has one entry per augmented state (the last is the integral
    /// weight).
    pub fn design(
        model: &LinearModel,
        qw_diag: &[f64],
        ru: f64,
        np: usize,
    ) -> Result<LqDesign, ControlError> {
        let (a, b, bd) = augment_integrator(model);
        if qw_diag.len() != a.nrows() {
            return Err(ControlError::InvalidInput(format!(
                "qw_diag has {} entries, expected {}",
                qw_diag.len(),
                a.nrows()
            )));
        }
        let qw = DMatrix::from_diagonal(&DVector::from_row_slice(qw_diag));
        let (p, k) = solve_dare(&a, &b, &qw, ru, 1e-12, 10_000)?;
        let kd = preview_gains(&a, &b, &bd, &p, &k, ru, np)?;
        Ok(LqDesign { p, k, kd, qw, ru, np })
    }
}

/// Default integral-state weight for a controller period `ts`.
pub fn default_integral_weight(ts: f64) -> f64 {
    0.1 * ts * ts
}

// ---------------------------------------------------------------------------
// Controller interface

/// Everything a controller sees at tick `k`. Preview values are wind
/// deviations from the operating-point wind.
#[derive(Debug, Clone)]
pub struct ControllerInput {
    pub k: u64,
    /// Measured rotor speed minus rated speed [rad/s].
    pub omega_err: f64,
    /// Measured pitch [rad].
    pub beta_meas: f64,
    pub preview: PreviewWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtrlStatus {
    Ok,
    Fallback,
    Fault,
}

impl CtrlStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CtrlStatus::Ok => "Ok",
            CtrlStatus::Fallback => "Fallback",
            CtrlStatus::Fault => "Fault",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "Ok" => Some(CtrlStatus::Ok),
            "Fallback" => Some(CtrlStatus::Fallback),
            "Fault" => Some(CtrlStatus::Fault),
            _ => None,
        }
    }

    pub fn to_u8(self) -> u8 {
        match self {
            CtrlStatus::Ok => 0,
            CtrlStatus::Fallback => 1,
            CtrlStatus::Fault => 2,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(CtrlStatus::Ok),
            1 => Some(CtrlStatus::Fallback),
            2 => Some(CtrlStatus::Fault),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOutput {
    /// Pitch command [rad]; within the position limits in every status.
    pub beta_cmd: f64,
    pub status: CtrlStatus,
    pub solve_iterations: usize,
    /// Modeled solve time [us]. Deterministic (iterations times a pinned
    /// per-iteration cost) so logs are bit-reproducible; wall-clock timing is
    /// measured separately by the horizon tuner and the socket harness.
    pub solve_time_us: u32,
}

/// Pinned per-iteration cost model [us] for an active-set solve with
/// `n_vars` variables and `n_rows` total constraints.
pub fn modeled_iter_cost_us(n_vars: usize, n_rows: usize) -> f64 {
    1.0 + (n_vars * n_vars * (n_vars + 3 * n_rows)) as f64 * 2.0e-4
}

/// Deterministic modeled solve time for a finished solve.
pub fn modeled_solve_time_us(iterations: usize, n_vars: usize, n_rows: usize) -> u32 {
    (2.0 + iterations as f64 * modeled_iter_cost_us(n_vars, n_rows)).round() as u32
}

/// Iteration cap that fits a solve-time budget under the cost model.
pub fn iter_cap_for_budget(budget_us: f64, n_vars: usize, n_rows: usize) -> usize {
    ((budget_us / modeled_iter_cost_us(n_vars, n_rows)).floor() as usize).max(1)
}

/// One controller instance; owns its integrator, previous command and warm
/// start. Single caller at a time; independent instances may run in parallel.
pub trait Controller {
    /// Compute the command for tick `k`.
    fn step(&mut self, input: &ControllerInput) -> ControllerOutput;
    /// Preview horizon this controller expects (PreviewWindow length).
    fn preview_len(&self) -> usize;
    /// Ticks on which the raw command had to be clipped by the saturation
    /// path (not counting constraints the MPC honored by optimization).
    fn clip_events(&self) -> u64;
    /// Reset internal state and trim the output to the operating pitch.
    fn reset(&mut self, beta_op: f64);
    fn name(&self) -> &str;
}

fn finite_input(input: &ControllerInput) -> bool {
    input.omega_err.is_finite()
        && input.beta_meas.is_finite()
        && input.preview.values.iter().all(|v| v.is_finite())
}

// ---------------------------------------------------------------------------
// Gain-scheduled PI baseline

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains {
    /// Proportional gain [rad per rad/s].
    pub kp: f64,
    /// Integral gain [rad per rad].
    pub ki: f64,
    /// Pitch angle at which the schedule halves the effective gains [rad].
    pub beta_k: f64,
}

pub struct PiController {
    name: String,
    gains: PiGains,
    limits: Limits,
    ts: f64,
    integ: f64,
    prev_cmd: f64,
    clip_count: u64,
}

impl PiController {
    pub fn new(name: &str, gains: PiGains, limits: Limits, ts: f64) -> Result<Self, ControlError> {
        if !(gains.beta_k > 0.0) {
            return Err(ControlError::InvalidInput(format!(
                "beta_k = {} must be > 0",
                gains.beta_k
            )));
        }
        Ok(PiController {
            name: name.to_string(),
            gains,
            limits,
            ts,
            integ: 0.0,
            prev_cmd: limits.pitch_min,
            clip_count: 0,
        })
    }
}

impl Controller for PiController {
    fn step(&mut self, input: &ControllerInput) -> ControllerOutput {
        if !finite_input(input) {
            return ControllerOutput {
                beta_cmd: self.prev_cmd,
                status: CtrlStatus::Fault,
                solve_iterations: 0,
                solve_time_us: modeled_solve_time_us(0, 1, 0),
            };
        }
        let gk = 1.0 / (1.0 + input.beta_meas / self.gains.beta_k);
        let raw = gk * (self.gains.kp * input.omega_err + self.gains.ki * self.integ);
        let cmd = saturate_rate_limit(raw, self.prev_cmd, &self.limits, self.ts);
        let clipped = (cmd - raw).abs() > 1e-9;
        if clipped {
            self.clip_count += 1;
        } else {
            self.integ += self.ts * input.omega_err;
        }
        self.prev_cmd = cmd;
        ControllerOutput {
            beta_cmd: cmd,
            status: CtrlStatus::Ok,
            solve_iterations: 0,
            solve_time_us: modeled_solve_time_us(0, 1, 0),
        }
    }

    fn preview_len(&self) -> usize {
        1
    }

    fn clip_events(&self) -> u64 {
        self.clip_count
    }

    fn reset(&mut self, beta_op: f64) {
        // Pre-trim the integrator so the initial output equals the operating
        // pitch at zero speed error.
        let gk = 1.0 / (1.0 + beta_op / self.gains.beta_k);
        self.integ = if self.gains.ki.abs() > 0.0 { beta_op / (gk * self.gains.ki) } else { 0.0 };
        self.prev_cmd = beta_op.clamp(self.limits.pitch_min, self.limits.pitch_max);
        self.clip_count = 0;
    }

    fn name(&self) -> &str {
        &self.name
    }
}

// ---------------------------------------------------------------------------
// Preview LQR

pub struct LqrController {
    name: String,
    design: LqDesign,
    beta_op: f64,
    limits: Limits,
    ts: f64,
    use_preview: bool,
    integ: f64,
    prev_cmd: f64,
    clip_count: u64,
}

impl LqrController {
    pub fn new(
        name: &str,
        design: LqDesign,
        beta_op: f64,
        limits: Limits,
        ts: f64,
        use_preview: bool,
    ) -> Self {
        LqrController {
            name: name.to_string(),
            design,
            beta_op,
            limits,
            ts,
            use_preview,
            integ: 0.0,
            prev_cmd: beta_op.clamp(limits.pitch_min, limits.pitch_max),
            clip_count: 0,
        }
    }

    /// Unsaturated control law at the given input and current integrator.
    fn raw_law(&self, input: &ControllerInput) -> f64 {
        let k = &self.design.k;
        let n = k.ncols();
        let mut u = -k[(0, 0)] * input.omega_err
            - k[(0, 1)] * (input.beta_meas - self.beta_op)
            - k[(0, n - 1)] * self.integ;
        if self.use_preview {
            for (i, kd) in self.design.kd.iter().enumerate() {
                u -= kd * input.preview.values[i];
            }
        }
        self.beta_op + u
    }
}

impl Controller for LqrController {
    fn step(&mut self, input: &ControllerInput) -> ControllerOutput {
        if !finite_input(input) || input.preview.values.len() < self.preview_len() {
            return ControllerOutput {
                beta_cmd: self.prev_cmd,
                status: CtrlStatus::Fault,
                solve_iterations: 0,
                solve_time_us: modeled_solve_time_us(0, self.design.k.ncols(), 0),
            };
        }
        let raw = self.raw_law(input);
        let cmd = saturate_rate_limit(raw, self.prev_cmd, &self.limits, self.ts);
        let clipped = (cmd - raw).abs() > 1e-9;
        if clipped {
            self.clip_count += 1;
        } else {
            self.integ += self.ts * input.omega_err;
        }
        self.prev_cmd = cmd;
        ControllerOutput {
            beta_cmd: cmd,
            status: CtrlStatus::Ok,
            solve_iterations: 0,
            solve_time_us: modeled_solve_time_us(0, self.design.k.ncols(), 0),
        }
    }

    fn preview_len(&self) -> usize {
        if self.use_preview {
            self.design.np
        } else {
            1
        }
    }

    fn clip_events(&self) -> u64 {
        self.clip_count
    }

    fn reset(&mut self, beta_op: f64) {
        self.beta_op = beta_op;
        self.integ = 0.0;
        self.prev_cmd = beta_op.clamp(self.limits.pitch_min, self.limits.pitch_max);
        self.clip_count = 0;
    }

    fn name(&self) -> &str {
        &self.name
    }
}

// ---------------------------------------------------------------------------
// Condensed MPC

/// Which constraint families the MPC encodes in the QP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MpcConstraints {
    pub position: bool,
    pub rate: bool,
}

/// Everything that can be assembled offline: the condensed Hessian, the
/// gradient maps, and the static parts of the constraint set.
pub struct MpcTemplate {
    problem: QpProblem,
    /// Gradient map from the augmented initial state: `g = gx x0 + gd d`.
    gx: DMatrix<f64>,
    gd: DMatrix<f64>,
    pub np: usize,
    n_aug: usize,
    constraints: MpcConstraints,
    /// Rate bound magnitude per tick [rad].
    rate_step: f64,
    beta_op: f64,
}

/// Condense the finite-horizon problem over the input sequence.
///
/// The terminal cost is the DARE solution for `(Qw, Ru)` on the augmented
/// model, which makes the unconstrained MPC identical to the preview-LQR
/// law for any horizon length.
pub fn mpc_build(
    model: &LinearModel,
    qw_diag: &[f64],
    ru: f64,
    np: usize,
    constraints: MpcConstraints,
    limits: &Limits,
) -> Result<(MpcTemplate, LqDesign), ControlError> {
    if np == 0 {
        return Err(ControlError::InvalidInput("Np must be >= 1".into()));
    }
    let design = LqDesign::design(model, qw_diag, ru, np)?;
    let (a, b, bd) = augment_integrator(model);
    let n = a.nrows();

    // Prediction matrices for the stacked states (x_1 .. x_Np).
    let mut sx = DMatrix::zeros(n * np, n);
    let mut su = DMatrix::zeros(n * np, np);
    let mut sd = DMatrix::zeros(n * np, np);
    let mut a_pow = DMatrix::identity(n, n); // A^j
    let mut powers = Vec::with_capacity(np + 1);
    powers.push(a_pow.clone());
    for _ in 0..np {
        a_pow = &a * &a_pow;
        powers.push(a_pow.clone());
    }
    for j in 0..np {
        sx.view_mut((j * n, 0), (n, n)).copy_from(&powers[j + 1]);
        for m in 0..=j {
            let blk = &powers[j - m] * &b;
            su.view_mut((j * n, m), (n, 1)).copy_from(&blk);
            let blk_d = &powers[j - m] * &bd;
            sd.view_mut((j * n, m), (n, 1)).copy_from(&blk_d);
        }
    }

    // Stage weights on x_1..x_{Np-1}, terminal weight on x_Np.
    let mut qbar = DMatrix::zeros(n * np, n * np);
    for j in 0..np - 1 {
        qbar
            .view_mut((j * n, j * n), (n, n))
            .copy_from(&design.qw);
    }
    qbar
        .view_mut(((np - 1) * n, (np - 1) * n), (n, n))
        .copy_from(&design.p);

    let h = 2.0 * (su.transpose() * &qbar * &su + ru * DMatrix::identity(np, np));
    let gx = 2.0 * su.transpose() * &qbar * &sx;
    let gd = 2.0 * su.transpose() * &qbar * &sd;

    let (lb, ub) = if constraints.position {
        (
            DVector::from_element(np, limits.pitch_min - model.op_point.beta_rad),
            DVector::from_element(np, limits.pitch_max - model.op_point.beta_rad),
        )
    } else {
        (
            DVector::from_element(np, f64::NEG_INFINITY),
            DVector::from_element(np, f64::INFINITY),
        )
    };
    if constraints.position && limits.pitch_min >= limits.pitch_max {
        return Err(ControlError::InvalidInput("empty pitch box".into()));
    }

    let rate_step = limits.rate * model.ts;
    let (a_ineq, lb_a, ub_a) = if constraints.rate {
        if !(rate_step > 0.0) {
            return Err(ControlError::InvalidInput("rate constraint with zero budget".into()));
        }
        let mut rows = DMatrix::zeros(np, np);
        rows[(0, 0)] = 1.0; // bounds set per tick from the previous command
        for j in 1..np {
            rows[(j, j)] = 1.0;
            rows[(j, j - 1)] = -1.0;
        }
        let mut lo = DVector::from_element(np, -rate_step);
        let mut hi = DVector::from_element(np, rate_step);
        lo[0] = -rate_step;
        hi[0] = rate_step;
        (rows, lo, hi)
    } else {
        (DMatrix::zeros(0, np), DVector::zeros(0), DVector::zeros(0))
    };

    let problem = QpProblem::new(h, DVector::zeros(np), lb, ub, a_ineq, lb_a, ub_a)?;
    Ok((
        MpcTemplate {
            problem,
            gx,
            gd,
            np,
            n_aug: n,
            constraints,
            rate_step,
            beta_op: model.op_point.beta_rad,
        },
        design,
    ))
}

pub struct MpcController {
    name: String,
    template: MpcTemplate,
    /// Fallback law (same weights, same integrator semantics).
    design: LqDesign,
    limits: Limits,
    ts: f64,
    deadline_budget_us: f64,
    iter_cap_override: Option<usize>,
    fault_threshold: usize,
    solver: QpSolver,
    warm: Option<Vec<i32>>,
    integ: f64,
    prev_cmd: f64,
    fallback_streak: usize,
    clip_count: u64,
}

impl MpcController {
    pub fn new(
        name: &str,
        template: MpcTemplate,
        design: LqDesign,
        limits: Limits,
        ts: f64,
        deadline_budget_us: f64,
        fault_threshold: usize,
    ) -> Self {
        let beta_op = template.beta_op;
        MpcController {
            name: name.to_string(),
            template,
            design,
            limits,
            ts,
            deadline_budget_us,
            iter_cap_override: None,
            fault_threshold,
            solver: QpSolver::new(),
            warm: None,
            integ: 0.0,
            prev_cmd: beta_op,
            fallback_streak: 0,
            clip_count: 0,
        }
    }

    /// Force the per-tick iteration cap (testing and deadline experiments).
    pub fn set_iter_cap_override(&mut self, cap: Option<usize>) {
        self.iter_cap_override = cap;
    }

    pub fn horizon(&self) -> usize {
        self.template.np
    }

    fn fault_output(&self, n_rows: usize) -> ControllerOutput {
        ControllerOutput {
            beta_cmd: self.prev_cmd,
            status: CtrlStatus::Fault,
            solve_iterations: 0,
            solve_time_us: modeled_solve_time_us(0, self.template.np, n_rows),
        }
    }
}

impl Controller for MpcController {
    fn step(&mut self, input: &ControllerInput) -> ControllerOutput {
        let np = self.template.np;
        let n_rows = self.template.problem.num_constraints();
        if !finite_input(input)
            || input.preview.values.len() != np
            || input.preview.horizon_len != np
        {
            return self.fault_output(n_rows);
        }

        // Assemble the tick-dependent parts of the QP.
        let mut x0 = DVector::zeros(self.template.n_aug);
        x0[0] = input.omega_err;
        x0[1] = input.beta_meas - self.template.beta_op;
        x0[self.template.n_aug - 1] = self.integ;
        let d = DVector::from_row_slice(&input.preview.values);
        let g = &self.template.gx * &x0 + &self.template.gd * &d;
        if self.template.problem.set_gradient(g).is_err() {
            return self.fault_output(n_rows);
        }
        if self.template.constraints.rate {
            let prev_dev = self.prev_cmd - self.template.beta_op;
            let r = self.template.rate_step;
            if self
                .template
                .problem
                .set_affine_bounds(0, prev_dev - r, prev_dev + r)
                .is_err()
            {
                return self.fault_output(n_rows);
            }
        }

        let cap = self
            .iter_cap_override
            .unwrap_or_else(|| iter_cap_for_budget(self.deadline_budget_us, np, n_rows));
        let sol = self.solver.solve(&self.template.problem, self.warm.as_deref(), cap);
        let solve_time_us = modeled_solve_time_us(sol.iterations, np, n_rows);

        let (raw, status) = if sol.status == QpStatus::Solved {
            self.warm = Some(sol.active_set.clone());
            self.fallback_streak = 0;
            (self.template.beta_op + sol.x[0], CtrlStatus::Ok)
        } else {
            // Deadline or feasibility trouble: saturated preview-LQR output.
            self.fallback_streak += 1;
            let k = &self.design.k;
            let n = k.ncols();
            let mut u = -k[(0, 0)] * input.omega_err
                - k[(0, 1)] * (input.beta_meas - self.template.beta_op)
                - k[(0, n - 1)] * self.integ;
            for (i, kd) in self.design.kd.iter().enumerate() {
                u -= kd * input.preview.values[i];
            }
            let status = if self.fallback_streak > self.fault_threshold {
                CtrlStatus::Fault
            } else {
                CtrlStatus::Fallback
            };
            (self.template.beta_op + u, status)
        };

        let cmd = saturate_rate_limit(raw, self.prev_cmd, &self.limits, self.ts);
        if (cmd - raw).abs() > 1e-9 {
            self.clip_count += 1;
        }
        // Freeze the integrator while pinned at a position limit.
        let at_bound = (cmd - self.limits.pitch_max).abs() < 1e-12
            || (cmd - self.limits.pitch_min).abs() < 1e-12;
        if !at_bound {
            self.integ += self.ts * input.omega_err;
        }
        self.prev_cmd = cmd;
        ControllerOutput { beta_cmd: cmd, status, solve_iterations: sol.iterations, solve_time_us }
    }

    fn preview_len(&self) -> usize {
        self.template.np
    }

    fn clip_events(&self) -> u64 {
        self.clip_count
    }

    fn reset(&mut self, beta_op: f64) {
        self.integ = 0.0;
        self.prev_cmd = beta_op.clamp(self.limits.pitch_min, self.limits.pitch_max);
        self.warm = None;
        self.fallback_streak = 0;
        self.clip_count = 0;
    }

    fn name(&self) -> &str {
        &self.name
    }
}
