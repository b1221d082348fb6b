//! Angular-momentum linear inverted pendulum (ALIP).
//!
//! The reduced-order model tracks the horizontal CoM position relative to the
//! stance contact together with the angular momentum about that contact:
//!
//! ```text
//! dx_c/dt = L / (m z)        dL/dt = m g x_c + u_a
//! ```
//!
//! Momentum components are paired with the position they drive: `l_y` drives
//! `x_c` (sagittal) and `l_x` drives `y_c` (lateral). Both are signed so that
//! velocity is `L / (m z)` with a positive sign.
//!
//! Besides the dynamics this module holds the foot-placement expert and the
//! weighting function that turns a violation of the constant-height
//! assumption (`z = z̄`, `ż = 0`) into a per-sample regularization weight.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlipError {
    #[error("invalid ALIP parameter `{name}` = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("non-finite input to the ALIP model")]
    NonFinite,
    #[error("degenerate pendulum: CoM height {0} is not positive")]
    DegenerateHeight(f64),
    #[error("negative propagation time {0}")]
    NegativeTime(f64),
}

/// Physical constants of the pendulum. The natural frequency is derived on
/// demand so it can never go stale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlipParams {
    mass: f64,
    gravity: f64,
    nominal_height: f64,
    step_duration: f64,
    step_width: f64,
}

impl Default for AlipParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            gravity: 9.81,
            nominal_height: 1.01,
            step_duration: 0.4,
            step_width: 0.3,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, AlipError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(AlipError::InvalidParam {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

impl AlipParams {
    pub fn new(
        mass: f64,
        gravity: f64,
        nominal_height: f64,
        step_duration: f64,
        step_width: f64,
    ) -> Result<Self, AlipError> {
        if !(step_width.is_finite() && step_width >= 0.0) {
            return Err(AlipError::InvalidParam {
                name: "step_width",
                value: step_width,
                reason: "must be finite and >= 0",
            });
        }
        Ok(Self {
            mass: positive("mass", mass)?,
            gravity: positive("gravity", gravity)?,
            nominal_height: positive("nominal_height", nominal_height)?,
            step_duration: positive("step_duration", step_duration)?,
            step_width,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn nominal_height(&self) -> f64 {
        self.nominal_height
    }

    pub fn step_duration(&self) -> f64 {
        self.step_duration
    }

    pub fn step_width(&self) -> f64 {
        self.step_width
    }

    /// `sqrt(g / z̄)`
    pub fn omega(&self) -> f64 {
        (self.gravity / self.nominal_height).sqrt()
    }

    /// Same parameters with a different mass (used for per-episode mass
    /// randomization).
    pub fn with_mass(&self, mass: f64) -> Result<Self, AlipError> {
        Self::new(
            mass,
            self.gravity,
            self.nominal_height,
            self.step_duration,
            self.step_width,
        )
    }
}

/// Reduced-order state in the stance-contact frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlipState {
    pub x_c: f64,
    pub y_c: f64,
    /// Lateral momentum; drives `y_c`.
    pub l_x: f64,
    /// Sagittal momentum; drives `x_c`.
    pub l_y: f64,
    /// CoM height above the stance contact.
    pub z: f64,
    pub z_dot: f64,
}

impl AlipState {
    /// State resting on the constant-height manifold.
    pub fn nominal(params: &AlipParams, x_c: f64, y_c: f64, l_x: f64, l_y: f64) -> Self {
        Self {
            x_c,
            y_c,
            l_x,
            l_y,
            z: params.nominal_height(),
            z_dot: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.x_c, self.y_c, self.l_x, self.l_y, self.z, self.z_dot]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Time derivative of the horizontal ALIP coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlipRates {
    pub x_c: f64,
    pub y_c: f64,
    pub l_x: f64,
    pub l_y: f64,
}

/// Desired CoM velocity and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaitCommand {
    pub v_x: f64,
    pub v_y: f64,
    pub yaw_rate: f64,
}

impl GaitCommand {
    pub fn forward(v_x: f64) -> Self {
        Self {
            v_x,
            ..Self::default()
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.v_x, self.v_y, self.yaw_rate]
    }
}

/// Reduced-order action: next foot placement relative to the CoM (heading
/// frame), a height offset over the nominal height, and the yaw increment
/// applied at the next foot switch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Action {
    pub step_x: f64,
    pub step_y: f64,
    pub height_offset: f64,
    pub yaw_step: f64,
}

impl Action {
    pub const DIM: usize = 4;

    pub fn to_array(self) -> [f64; 4] {
        [self.step_x, self.step_y, self.height_offset, self.yaw_step]
    }

    pub fn from_slice(values: &[f64]) -> Self {
        assert_eq!(values.len(), Self::DIM, "action must have 4 entries");
        Self {
            step_x: values[0],
            step_y: values[1],
            height_offset: values[2],
            yaw_step: values[3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Which foot currently carries the robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stance {
    Left,
    Right,
}

impl Stance {
    /// `+1` for left stance, `-1` for right stance.
    pub fn sign(self) -> f64 {
        match self {
            Stance::Left => 1.0,
            Stance::Right => -1.0,
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            Stance::Left => Stance::Right,
            Stance::Right => Stance::Left,
        }
    }
}

/// Right-hand side of the ALIP dynamics. Uses the instantaneous height in
/// `state.z`, not `z̄`, so model mismatch can be represented.
pub fn alip_derivative(
    state: &AlipState,
    ankle_torque: [f64; 2],
    params: &AlipParams,
) -> Result<AlipRates, AlipError> {
    if !state.is_finite() || !ankle_torque.iter().all(|v| v.is_finite()) {
        return Err(AlipError::NonFinite);
    }
    if state.z <= 0.0 {
        return Err(AlipError::DegenerateHeight(state.z));
    }
    let m = params.mass();
    let mg = m * params.gravity();
    Ok(AlipRates {
        x_c: state.l_y / (m * state.z),
        y_c: state.l_x / (m * state.z),
        l_x: mg * state.y_c + ankle_torque[0],
        l_y: mg * state.x_c + ankle_torque[1],
    })
}

/// Advance one axis `(x, L)` of the unforced pendulum at height `z̄` by `t`.
pub fn propagate_axis(x: f64, l: f64, t: f64, params: &AlipParams) -> (f64, f64) {
    let omega = params.omega();
    let mz_omega = params.mass() * params.nominal_height() * omega;
    let (s, c) = ((omega * t).sinh(), (omega * t).cosh());
    (x * c + l / mz_omega * s, mz_omega * x * s + l * c)
}

/// Closed-form solution of the unforced ALIP over `t` seconds. Height and
/// vertical velocity are carried through unchanged; the nominal height `z̄`
/// is used for the horizontal motion.
pub fn propagate_closed_form(
    state: &AlipState,
    t: f64,
    params: &AlipParams,
) -> Result<AlipState, AlipError> {
    if !t.is_finite() || !state.is_finite() {
        return Err(AlipError::NonFinite);
    }
    if t < 0.0 {
        return Err(AlipError::NegativeTime(t));
    }
    let (x_c, l_y) = propagate_axis(state.x_c, state.l_y, t, params);
    let (y_c, l_x) = propagate_axis(state.y_c, state.l_x, t, params);
    Ok(AlipState {
        x_c,
        y_c,
        l_x,
        l_y,
        ..*state
    })
}

/// One-step-ahead foot placement relative to the CoM.
///
/// Placing the foot at the returned offset and letting the pendulum swing for
/// one step duration ends the step with CoM velocity `v_des`.
pub fn foot_placement(l: f64, v_des: f64, params: &AlipParams) -> f64 {
    let omega = params.omega();
    let wt = omega * params.step_duration();
    let mz = params.mass() * params.nominal_height();
    (l * wt.cosh() / mz - v_des) / (omega * wt.sinh())
}

/// End-of-step lateral velocity of the symmetric period-2 orbit whose feet
/// are `W` apart: `(W/2) ω tanh(ωT/2)`.
pub fn lateral_orbit_speed(params: &AlipParams) -> f64 {
    let omega = params.omega();
    0.5 * params.step_width() * omega * (0.5 * omega * params.step_duration()).tanh()
}

/// Lateral end-of-step velocity targeted by the placement chosen during
/// `stance`. The sign alternates with the stance foot so that, at zero lateral
/// command, the CoM sways between the feet on a period-2 orbit.
pub fn lateral_velocity_target(stance: Stance, cmd: &GaitCommand, params: &AlipParams) -> f64 {
    cmd.v_y + stance.sign() * lateral_orbit_speed(params)
}

/// Model-based expert: ALIP foot placement in both axes, no height change,
/// and the yaw increment that realizes the commanded yaw rate over one step.
pub fn expert_action(
    state: &AlipState,
    stance: Stance,
    cmd: &GaitCommand,
    params: &AlipParams,
) -> Action {
    Action {
        step_x: foot_placement(state.l_y, cmd.v_x, params),
        step_y: foot_placement(
            state.l_x,
            lateral_velocity_target(stance, cmd, params),
            params,
        ),
        height_offset: 0.0,
        yaw_step: cmd.yaw_rate * params.step_duration(),
    }
}

/// Coefficients of the assumption-based weight `w = w0 exp(-ż² / δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarConfig {
    w0: f64,
    delta: f64,
}

impl Default for MarConfig {
    fn default() -> Self {
        Self {
            w0: 5.0,
            delta: 0.0159,
        }
    }
}

impl MarConfig {
    pub fn new(w0: f64, delta: f64) -> Result<Self, AlipError> {
        if !(w0.is_finite() && w0 >= 0.0) {
            return Err(AlipError::InvalidParam {
                name: "w0",
                value: w0,
                reason: "must be finite and >= 0",
            });
        }
        // δ = +inf is allowed: the weight then degenerates to the constant w0.
        if !(delta > 0.0) || delta.is_nan() {
            return Err(AlipError::InvalidParam {
                name: "delta",
                value: delta,
                reason: "must be > 0",
            });
        }
        Ok(Self { w0, delta })
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

pub fn mar_weight(z_dot: f64, cfg: &MarConfig) -> f64 {
    cfg.w0 * (-(z_dot * z_dot) / cfg.delta).exp()
}
