//! Nonlinear truth model of the scaled turbine.
//!
//! One rotational mode driven by an analytic power-coefficient surface, a
//! first-order pitch actuator with rate and position limits, and an optional
//! tower fore-aft mode. All functions are pure over plain-value state and
//! deterministic for identical inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Betz limit; the Cp surface is clamped to `[0, CP_MAX]`.
pub const CP_MAX: f64 = 0.593;

/// Wind speeds below this are treated as calm (zero torque) to keep the
/// tip-speed ratio well defined.
pub const LOW_WIND_CUTOFF: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid turbine parameters: {0}")]
    InvalidParams(String),
}

/// Coefficients of the six-coefficient exponential Cp surface
/// `Cp(lambda, beta) = c1 (c2/li - c3 b - c4) exp(-c5/li) + c6 lambda` with
/// `1/li = 1/(lambda + 0.08 b) - 0.035/(b^3 + 1)` and `b` the pitch angle in
/// degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpCoeffs(pub [f64; 6]);

impl Default for CpCoeffs {
    fn default() -> Self {
        CpCoeffs([0.5176, 116.0, 0.4, 5.0, 21.0, 0.0068])
    }
}

/// Optional tower fore-aft mode: a single second-order modal oscillator
/// forced by rotor thrust.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TowerParams {
    /// Modal mass [kg].
    pub modal_mass_kg: f64,
    /// Natural frequency [rad/s].
    pub nat_freq_rad_s: f64,
    /// Damping ratio [-], in (0, 1).
    pub damping_ratio: f64,
    /// Scale on the quadratic thrust forcing [-].
    pub thrust_coeff_scale: f64,
}

/// Physical parameters of the truth model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurbineParams {
    /// Rotor radius [m].
    pub rotor_radius_m: f64,
    /// Drivetrain rotational inertia [kg m^2].
    pub inertia_kg_m2: f64,
    /// Air density [kg/m^3].
    pub air_density_kg_m3: f64,
    /// Rated rotor speed [rad/s].
    pub rated_speed_rad_s: f64,
    /// Rated generator torque [N m].
    pub rated_gen_torque_nm: f64,
    /// Pitch position limits [rad].
    pub pitch_min_rad: f64,
    pub pitch_max_rad: f64,
    /// Pitch rate limit [rad/s].
    pub pitch_rate_limit_rad_s: f64,
    /// Pitch actuator time constant [s].
    pub actuator_tau_s: f64,
    /// Cp surface coefficients.
    pub cp_coeffs: CpCoeffs,
    /// Tower fore-aft mode; disabled by default.
    pub tower: Option<TowerParams>,
}

impl Default for TurbineParams {
    /// Order-of-magnitude plausible values for a 1.8 m rotor with carbon
    /// blades. The rated speed / rated torque pair is chosen so the
    /// above-rated operating region sits on the stable branch of the default
    /// Cp surface (aerodynamic torque decreasing in rotor speed).
    fn default() -> Self {
        TurbineParams {
            rotor_radius_m: 0.9,
            inertia_kg_m2: 0.03,
            air_density_kg_m3: 1.225,
            rated_speed_rad_s: 60.0,
            rated_gen_torque_nm: 3.2,
            pitch_min_rad: 0.0,
            pitch_max_rad: 1.57,
            pitch_rate_limit_rad_s: 0.35,
            actuator_tau_s: 0.05,
            cp_coeffs: CpCoeffs::default(),
            tower: None,
        }
    }
}

impl TurbineParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidParams(msg));
        if !(self.rotor_radius_m > 0.0) {
            return bad(format!("rotor_radius_m = {} must be > 0", self.rotor_radius_m));
        }
        if !(self.inertia_kg_m2 > 0.0) {
            return bad(format!("inertia_kg_m2 = {} must be > 0", self.inertia_kg_m2));
        }
        if !(self.air_density_kg_m3 > 0.0) {
            return bad(format!("air_density_kg_m3 = {} must be > 0", self.air_density_kg_m3));
        }
        if !(self.actuator_tau_s > 0.0) {
            return bad(format!("actuator_tau_s = {} must be > 0", self.actuator_tau_s));
        }
        if !(self.pitch_min_rad < self.pitch_max_rad) {
            return bad(format!(
                "pitch_min_rad = {} must be < pitch_max_rad = {}",
                self.pitch_min_rad, self.pitch_max_rad
            ));
        }
        if !(self.pitch_rate_limit_rad_s > 0.0) {
            return bad(format!(
                "pitch_rate_limit_rad_s = {} must be > 0",
                self.pitch_rate_limit_rad_s
            ));
        }
        if let Some(t) = &self.tower {
            if !(t.nat_freq_rad_s > 0.0) {
                return bad(format!("tower nat_freq_rad_s = {} must be > 0", t.nat_freq_rad_s));
            }
            if !(t.damping_ratio > 0.0 && t.damping_ratio < 1.0) {
                return bad(format!("tower damping_ratio = {} must be in (0,1)", t.damping_ratio));
            }
            if !(t.modal_mass_kg > 0.0) {
                return bad(format!("tower modal_mass_kg = {} must be > 0", t.modal_mass_kg));
            }
        }
        Ok(())
    }
}

/// Dynamic state of the truth model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TurbineState {
    /// Rotor speed [rad/s], >= 0.
    pub omega: f64,
    /// Actual blade pitch [rad], within the position limits.
    pub beta: f64,
    /// Tower fore-aft displacement [m] (0 when the tower mode is disabled).
    pub tower_x: f64,
    /// Tower fore-aft velocity [m/s].
    pub tower_v: f64,
}

/// Result of a truth-model step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: TurbineState,
    /// True when the integrator had to clamp the rotor speed at zero.
    pub omega_clamped: bool,
}

/// Power coefficient of the analytic surface, clamped to `[0, CP_MAX]`.
///
/// `beta` is in radians; the surface itself is parameterized in degrees.
pub fn power_coefficient(lambda: f64, beta: f64, coeffs: &CpCoeffs) -> Result<f64, ModelError> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(ModelError::NonFinite("lambda must be finite and > 0"));
    }
    if !beta.is_finite() {
        return Err(ModelError::NonFinite("beta"));
    }
    let [c1, c2, c3, c4, c5, c6] = coeffs.0;
    let b = beta.to_degrees();
    let inv_li = 1.0 / (lambda + 0.08 * b) - 0.035 / (b * b * b + 1.0);
    let raw = c1 * (c2 * inv_li - c3 * b - c4) * (-c5 * inv_li).exp() + c6 * lambda;
    Ok(raw.clamp(0.0, CP_MAX))
}

/// Aerodynamic rotor torque `Q = 1/2 rho pi R^3 v^2 Cp(lambda, beta) / lambda`
/// with `lambda = omega R / v`. Below [`LOW_WIND_CUTOFF`] the torque is zero.
pub fn aero_torque(
    v: f64,
    omega: f64,
    beta: f64,
    params: &TurbineParams,
) -> Result<f64, ModelError> {
    if !v.is_finite() || !omega.is_finite() || !beta.is_finite() {
        return Err(ModelError::NonFinite("aero_torque input"));
    }
    if v <= LOW_WIND_CUTOFF {
        return Ok(0.0);
    }
    let r = params.rotor_radius_m;
    let lambda = omega * r / v;
    // A stopped or barely turning rotor: the surface clamps to zero well
    // before this, so the torque is zero rather than 0/0.
    if lambda <= 1e-9 {
        return Ok(0.0);
    }
    let cp = power_coefficient(lambda, beta, &params.cp_coeffs)?;
    let q = 0.5 * params.air_density_kg_m3 * std::f64::consts::PI * r.powi(3) * v * v * cp / lambda;
    Ok(q)
}

/// Rotor thrust used to force the tower mode, `kappa 1/2 rho pi R^2 v|v|`.
fn tower_thrust(v_rel: f64, params: &TurbineParams, tower: &TowerParams) -> f64 {
    let r = params.rotor_radius_m;
    tower.thrust_coeff_scale
        * 0.5
        * params.air_density_kg_m3
        * std::f64::consts::PI
        * r
        * r
        * v_rel
        * v_rel.abs()
}

/// State derivative with the actuator rate limit applied to the pitch rate.
fn derivative(
    s: &TurbineState,
    v: f64,
    gen_torque: f64,
    beta_cmd_sat: f64,
    params: &TurbineParams,
) -> Result<[f64; 4], ModelError> {
    let q_aero = aero_torque(v, s.omega.max(0.0), s.beta, params)?;
    let omega_dot = (q_aero - gen_torque) / params.inertia_kg_m2;
    let rate = params.pitch_rate_limit_rad_s;
    let beta_dot = ((beta_cmd_sat - s.beta) / params.actuator_tau_s).clamp(-rate, rate);
    let (x_dot, v_dot) = match &params.tower {
        Some(t) => {
            let f = tower_thrust(v - s.tower_v, params, t);
            let k = t.nat_freq_rad_s * t.nat_freq_rad_s * t.modal_mass_kg;
            let c = 2.0 * t.damping_ratio * t.nat_freq_rad_s * t.modal_mass_kg;
            (s.tower_v, (f - c * s.tower_v - k * s.tower_x) / t.modal_mass_kg)
        }
        None => (0.0, 0.0),
    };
    Ok([omega_dot, beta_dot, x_dot, v_dot])
}

/// Advance the truth model by one RK4 step of length `dt`.
///
/// The pitch command is saturated to the position limits before it reaches
/// the actuator; the integrated pitch is position-clamped afterwards. A rotor
/// speed that would go negative is clamped to zero and flagged.
pub fn step(
    state: &TurbineState,
    v: f64,
    gen_torque: f64,
    beta_cmd: f64,
    dt: f64,
    params: &TurbineParams,
) -> Result<StepOutcome, ModelError> {
    if !v.is_finite() || !gen_torque.is_finite() || !beta_cmd.is_finite() || !dt.is_finite() {
        return Err(ModelError::NonFinite("step input"));
    }
    if dt <= 0.0 {
        return Err(ModelError::InvalidParams(format!("dt = {dt} must be > 0")));
    }
    let cmd = beta_cmd.clamp(params.pitch_min_rad, params.pitch_max_rad);

    let add = |s: &TurbineState, k: &[f64; 4], h: f64| TurbineState {
        omega: s.omega + h * k[0],
        beta: s.beta + h * k[1],
        tower_x: s.tower_x + h * k[2],
        tower_v: s.tower_v + h * k[3],
    };

    let k1 = derivative(state, v, gen_torque, cmd, params)?;
    let k2 = derivative(&add(state, &k1, 0.5 * dt), v, gen_torque, cmd, params)?;
    let k3 = derivative(&add(state, &k2, 0.5 * dt), v, gen_torque, cmd, params)?;
    let k4 = derivative(&add(state, &k3, dt), v, gen_torque, cmd, params)?;

    let mut next = TurbineState {
        omega: state.omega + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        beta: state.beta + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        tower_x: state.tower_x + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        tower_v: state.tower_v + dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
    };
    next.beta = next.beta.clamp(params.pitch_min_rad, params.pitch_max_rad);
    let omega_clamped = next.omega < 0.0;
    if omega_clamped {
        next.omega = 0.0;
    }
    Ok(StepOutcome { state: next, omega_clamped })
}
