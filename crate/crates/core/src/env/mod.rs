//! Hybrid stepping simulator around the ALIP model.
//!
//! Each control tick integrates the horizontal pendulum (using the actual CoM
//! height above the stance contact) together with a PD-regulated telescopic
//! leg in the vertical direction. At the end of every step the swing foot
//! lands at the latched placement target; the stance frame jumps to the new
//! contact and the height above it changes with the terrain, which is what
//! produces vertical-velocity transients on non-flat ground.

pub mod curriculum;
pub mod observation;
pub mod randomization;
pub mod reward;
pub mod terrain;
mod trajectory;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alip::{
    alip_derivative, expert_action, mar_weight, Action, AlipParams, AlipState, GaitCommand,
    MarConfig, Stance,
};
use crate::error::{Error, Result};

pub use curriculum::{update_curriculum, CurriculumConfig, CurriculumState, EpisodeStats};
pub use observation::{
    build_observation, policy_input, History, NoiseConfig, Sensors, OBS_DIM, OBS_SCALE,
};
pub use randomization::{randomize_dynamics, DynamicsDraw, Push, RandomizationConfig};
pub use reward::{compute_reward, RewardConfig, RewardTerms};
pub use terrain::{generate_terrain, TerrainField, TerrainKind};
pub use trajectory::{write_trajectory_csv, TrajectoryRow, TRAJECTORY_HEADER};

/// Box limits applied to every incoming action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionLimits {
    pub step_x: f64,
    pub step_y: f64,
    pub height_offset: f64,
    pub yaw_step: f64,
}

impl Default for ActionLimits {
    fn default() -> Self {
        Self {
            step_x: 0.5,
            step_y: 0.6,
            height_offset: 0.15,
            yaw_step: 0.3,
        }
    }
}

impl ActionLimits {
    pub fn clamp(&self, a: &Action) -> Action {
        Action {
            step_x: a.step_x.clamp(-self.step_x, self.step_x),
            step_y: a.step_y.clamp(-self.step_y, self.step_y),
            height_offset: a.height_offset.clamp(-self.height_offset, self.height_offset),
            yaw_step: a.yaw_step.clamp(-self.yaw_step, self.yaw_step),
        }
    }
}

/// Ranges commands are sampled from during training. The forward upper bound
/// is owned by the curriculum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandRanges {
    pub forward_min: f64,
    pub lateral: f64,
    pub yaw_rate: f64,
}

impl Default for CommandRanges {
    fn default() -> Self {
        Self {
            forward_min: 0.0,
            lateral: 0.1,
            yaw_rate: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub alip: AlipParams,
    pub mar: MarConfig,
    pub control_dt: f64,
    pub physics_dt: f64,
    pub episode_length: f64,
    /// Height-regulator stiffness per unit mass (1/s²).
    pub height_kp: f64,
    /// Height-regulator damping per unit mass (1/s).
    pub height_kd: f64,
    pub max_leg_length: f64,
    /// Shortest leg the knee can fold to.
    pub min_leg_length: f64,
    /// Horizontal CoM offset from the contact beyond which the robot fell.
    pub fall_offset: f64,
    /// Height above the stance contact below which the robot collapsed.
    pub collapse_height: f64,
    pub limits: ActionLimits,
    pub commands: CommandRanges,
    pub randomization: RandomizationConfig,
    pub noise: NoiseConfig,
    pub reward: RewardConfig,
    pub curriculum: CurriculumConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            alip: AlipParams::default(),
            mar: MarConfig::default(),
            control_dt: 0.01,
            physics_dt: 0.001,
            episode_length: 20.0,
            height_kp: 100.0,
            height_kd: 20.0,
            max_leg_length: 1.25,
            min_leg_length: 0.985,
            fall_offset: 1.0,
            collapse_height: 0.5,
            limits: ActionLimits::default(),
            commands: CommandRanges::default(),
            randomization: RandomizationConfig::default(),
            noise: NoiseConfig::default(),
            reward: RewardConfig::default(),
            curriculum: CurriculumConfig::default(),
        }
    }
}

impl EnvConfig {
    /// Noise-free, unrandomized dynamics.
    pub fn deterministic() -> Self {
        Self {
            randomization: RandomizationConfig::nominal(),
            noise: NoiseConfig::none(),
            ..Self::default()
        }
    }

    pub fn substeps(&self) -> usize {
        (self.control_dt / self.physics_dt).round() as usize
    }

    pub fn ticks_per_step(&self) -> u64 {
        (self.alip.step_duration() / self.control_dt).round() as u64
    }

    pub fn episode_ticks(&self) -> u64 {
        (self.episode_length / self.control_dt).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.control_dt > 0.0 && self.physics_dt > 0.0) {
            return bad("time steps must be > 0".into());
        }
        let ratio = self.control_dt / self.physics_dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return bad(format!(
                "physics dt {} must divide control dt {}",
                self.physics_dt, self.control_dt
            ));
        }
        let per_step = self.alip.step_duration() / self.control_dt;
        if (per_step - per_step.round()).abs() > 1e-9 || per_step.round() < 1.0 {
            return bad("control dt must divide the step duration".into());
        }
        if !(self.episode_length > 0.0) {
            return bad("episode length must be > 0".into());
        }
        if !(self.reward.delta_xy > 0.0 && self.reward.delta_yaw > 0.0) {
            return bad("reward temperatures must be > 0".into());
        }
        if !(self.height_kp > 0.0 && self.height_kd >= 0.0) {
            return bad("height gains must be positive".into());
        }
        if !(self.min_leg_length >= 0.0 && self.max_leg_length > self.min_leg_length) {
            return bad("leg length limits must satisfy 0 <= min < max".into());
        }
        if !(self.fall_offset > 0.0 && self.collapse_height > 0.0) {
            return bad("fall thresholds must be > 0".into());
        }
        self.randomization.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DoneReason {
    Fell,
    HeightCollapse,
    Timeout,
}

impl DoneReason {
    pub fn name(self) -> &'static str {
        match self {
            DoneReason::Fell => "fell",
            DoneReason::HeightCollapse => "height_collapse",
            DoneReason::Timeout => "timeout",
        }
    }

    pub fn is_failure(self) -> bool {
        !matches!(self, DoneReason::Timeout)
    }
}

impl fmt::Display for DoneReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Full simulator state. Horizontal quantities in `alip` use world-aligned
/// axes centered on the stance contact; `alip.z` is the CoM height above it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub alip: AlipState,
    pub foot: [f64; 2],
    pub yaw: f64,
    pub stance: Stance,
    /// Ticks elapsed in the current step.
    pub step_tick: u64,
    /// Filtered action actually driving the leg.
    pub applied: Action,
    pub stance_height: f64,
    pub tick: u64,
    /// Yaw increment executed at the last switch divided by the step duration.
    pub yaw_rate: f64,
}

impl SimState {
    pub fn com_world(&self) -> [f64; 3] {
        [
            self.foot[0] + self.alip.x_c,
            self.foot[1] + self.alip.y_c,
            self.stance_height + self.alip.z,
        ]
    }

    pub fn leg_length(&self) -> f64 {
        let a = &self.alip;
        (a.x_c * a.x_c + a.y_c * a.y_c + a.z * a.z).sqrt()
    }

    /// The ALIP state expressed in the heading frame.
    pub fn heading_state(&self) -> AlipState {
        let (s, c) = self.yaw.sin_cos();
        let a = &self.alip;
        AlipState {
            x_c: c * a.x_c + s * a.y_c,
            y_c: -s * a.x_c + c * a.y_c,
            l_y: c * a.l_y + s * a.l_x,
            l_x: -s * a.l_y + c * a.l_x,
            z: a.z,
            z_dot: a.z_dot,
        }
    }
}

/// Per-tick side channel: privileged quantities that are not part of the
/// observation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub z_dot: f64,
    /// Expert label for the state the returned observation describes.
    pub expert: Action,
    pub mar_weight: f64,
    pub velocity: [f64; 2],
    pub yaw_rate: f64,
    pub terrain_level: f64,
    pub mass_scale: f64,
    pub u_z: f64,
    pub com: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terms: RewardTerms,
    pub done: Option<DoneReason>,
    pub info: StepInfo,
}

pub struct BipedEnv {
    cfg: EnvConfig,
    /// Parameters with the episode's randomized mass.
    params: AlipParams,
    terrain: TerrainField,
    cmd: GaitCommand,
    sim: SimState,
    draw: DynamicsDraw,
    next_push: usize,
    noise_rng: ChaCha8Rng,
    history: History,
    prev_action: Action,
    u_z: f64,
    done: Option<DoneReason>,
}

const PUSH_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

impl BipedEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let params = cfg.alip;
        let sim = Self::initial_state(&cfg, &TerrainField::flat());
        Ok(Self {
            params,
            terrain: TerrainField::flat(),
            cmd: GaitCommand::default(),
            sim,
            draw: DynamicsDraw::nominal(),
            next_push: 0,
            noise_rng: ChaCha8Rng::seed_from_u64(0),
            history: History::default(),
            prev_action: Action::default(),
            u_z: 0.0,
            done: None,
            cfg,
        })
    }

    fn initial_state(cfg: &EnvConfig, terrain: &TerrainField) -> SimState {
        SimState {
            alip: AlipState::nominal(&cfg.alip, 0.0, 0.0, 0.0, 0.0),
            foot: [0.0, 0.0],
            yaw: 0.0,
            stance: Stance::Left,
            step_tick: 0,
            applied: Action::default(),
            stance_height: terrain.height(0.0, 0.0),
            tick: 0,
            yaw_rate: 0.0,
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &SimState {
        &self.sim
    }

    pub fn command(&self) -> GaitCommand {
        self.cmd
    }

    pub fn terrain(&self) -> &TerrainField {
        &self.terrain
    }

    pub fn dynamics(&self) -> &DynamicsDraw {
        &self.draw
    }

    pub fn is_done(&self) -> Option<DoneReason> {
        self.done
    }

    /// Place the robot at the origin at nominal height over the terrain with
    /// zero momentum, draw this episode's dynamics, and return the first
    /// observation.
    pub fn reset(&mut self, seed: u64, terrain: TerrainField, cmd: GaitCommand) -> Vec<f64> {
        self.draw = randomize_dynamics(
            seed,
            &self.cfg.randomization,
            self.cfg.episode_ticks(),
            self.cfg.control_dt,
        );
        self.params = self
            .cfg
            .alip
            .with_mass(self.cfg.alip.mass() * self.draw.mass_scale)
            .expect("mass scale validated positive");
        self.sim = Self::initial_state(&self.cfg, &terrain);
        self.terrain = terrain;
        self.cmd = cmd;
        self.next_push = 0;
        self.noise_rng = ChaCha8Rng::seed_from_u64(seed ^ PUSH_STREAM);
        self.history = History::default();
        self.prev_action = Action::default();
        self.u_z = self.params.mass() * self.params.gravity();
        self.done = None;
        self.observe()
    }

    /// Realized CoM velocity in world axes.
    fn world_velocity(&self) -> [f64; 2] {
        let a = &self.sim.alip;
        let mz = self.params.mass() * a.z;
        [a.l_y / mz, a.l_x / mz]
    }

    pub fn sensors(&self) -> Sensors {
        let v = self.world_velocity();
        let (s, c) = self.sim.yaw.sin_cos();
        let h = self.sim.heading_state();
        Sensors {
            velocity: [c * v[0] + s * v[1], -s * v[0] + c * v[1]],
            z_dot: self.sim.alip.z_dot,
            yaw_rate: self.sim.yaw_rate,
            phase: self.sim.step_tick as f64 / self.cfg.ticks_per_step() as f64,
            stance_sign: self.sim.stance.sign(),
            x_c: h.x_c,
            y_c: h.y_c,
            height_error: self.sim.alip.z - self.cfg.alip.nominal_height(),
        }
    }

    /// Model-based expert action for the current state.
    pub fn expert_action(&self) -> Action {
        expert_action(&self.sim.heading_state(), self.sim.stance, &self.cmd, &self.params)
    }

    /// Assumption-based regularization weight for the current state, from the
    /// noise-free vertical velocity.
    pub fn mar_weight(&self) -> f64 {
        mar_weight(self.sim.alip.z_dot, &self.cfg.mar)
    }

    pub fn info(&self) -> StepInfo {
        let s = self.sensors();
        StepInfo {
            z_dot: self.sim.alip.z_dot,
            expert: self.expert_action(),
            mar_weight: self.mar_weight(),
            velocity: s.velocity,
            yaw_rate: self.sim.yaw_rate,
            terrain_level: self.terrain.level(),
            mass_scale: self.draw.mass_scale,
            u_z: self.u_z,
            com: self.sim.com_world(),
        }
    }

    fn observe(&mut self) -> Vec<f64> {
        let s = self.sensors();
        let obs = build_observation(
            &s,
            &self.cmd,
            &self.prev_action,
            &self.history,
            &self.cfg.noise,
            &mut self.noise_rng,
        );
        self.history.push(&s);
        obs
    }

    fn leg_force(&self, z: f64, z_dot: f64) -> f64 {
        let m_nom = self.cfg.alip.mass();
        let target = self.cfg.alip.nominal_height() + self.sim.applied.height_offset;
        let k = self.draw.gain_scale;
        let u = m_nom
            * (self.cfg.alip.gravity()
                + k * (self.cfg.height_kp * (target - z) - self.cfg.height_kd * z_dot));
        // The leg can only push.
        u.max(0.0)
    }

    fn rates(&self, x: &[f64; 6]) -> Option<[f64; 6]> {
        let state = AlipState {
            x_c: x[0],
            y_c: x[1],
            l_x: x[2],
            l_y: x[3],
            z: x[4],
            z_dot: x[5],
        };
        let d = alip_derivative(&state, [0.0, 0.0], &self.params).ok()?;
        let z_ddot = self.leg_force(x[4], x[5]) / self.params.mass() - self.params.gravity();
        Some([d.x_c, d.y_c, d.l_x, d.l_y, x[5], z_ddot])
    }

    /// One RK4 physics substep. `None` if the pendulum degenerated.
    fn physics_substep(&mut self, dt: f64) -> Option<()> {
        let a = &self.sim.alip;
        let x = [a.x_c, a.y_c, a.l_x, a.l_y, a.z, a.z_dot];
        let add = |base: &[f64; 6], k: &[f64; 6], h: f64| {
            let mut out = *base;
            for i in 0..6 {
                out[i] += h * k[i];
            }
            out
        };
        let k1 = self.rates(&x)?;
        let k2 = self.rates(&add(&x, &k1, 0.5 * dt))?;
        let k3 = self.rates(&add(&x, &k2, 0.5 * dt))?;
        let k4 = self.rates(&add(&x, &k3, dt))?;
        let mut next = x;
        for i in 0..6 {
            next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        self.sim.alip = AlipState {
            x_c: next[0],
            y_c: next[1],
            l_x: next[2],
            l_y: next[3],
            z: next[4],
            z_dot: next[5],
        };
        self.u_z = self.leg_force(next[4], next[5]);
        Some(())
    }

    /// Land the swing foot at the latched placement and make it the stance.
    fn foot_switch(&mut self) {
        let p = self.sim.applied;
        let (s, c) = self.sim.yaw.sin_cos();
        let offset = [c * p.step_x - s * p.step_y, s * p.step_x + c * p.step_y];
        let com = self.sim.com_world();
        let foot = [com[0] + offset[0], com[1] + offset[1]];
        let new_height = self.terrain.height(foot[0], foot[1]);
        let old_z = self.sim.alip.z;
        let new_z = com[2] - new_height;
        // Horizontal velocity is continuous through the switch; on level ground
        // this leaves the angular momentum unchanged.
        let scale = new_z / old_z;
        let a = &mut self.sim.alip;
        a.x_c = -offset[0];
        a.y_c = -offset[1];
        a.l_x *= scale;
        a.l_y *= scale;
        a.z = new_z;
        self.sim.foot = foot;
        self.sim.stance_height = new_height;
        self.sim.yaw += p.yaw_step;
        self.sim.yaw_rate = p.yaw_step / self.cfg.alip.step_duration();
        self.sim.stance = self.sim.stance.swapped();
        self.sim.step_tick = 0;
    }

    fn apply_pushes(&mut self) {
        while let Some(push) = self.draw.pushes.get(self.next_push) {
            if push.tick > self.sim.tick {
                break;
            }
            if push.tick == self.sim.tick {
                let (s, c) = self.sim.yaw.sin_cos();
                let mz = self.params.mass() * self.sim.alip.z;
                // Lateral in the heading frame.
                self.sim.alip.l_y += mz * (-s * push.dv);
                self.sim.alip.l_x += mz * (c * push.dv);
            }
            self.next_push += 1;
        }
    }

    fn check_failure(&self) -> Option<DoneReason> {
        let a = &self.sim.alip;
        if !a.is_finite() {
            return Some(DoneReason::Fell);
        }
        if a.z < self.cfg.collapse_height {
            return Some(DoneReason::HeightCollapse);
        }
        let h = self.sim.heading_state();
        if h.x_c.abs() > self.cfg.fall_offset || h.y_c.abs() > self.cfg.fall_offset {
            return Some(DoneReason::Fell);
        }
        let leg = self.sim.leg_length();
        if leg > self.cfg.max_leg_length || leg < self.cfg.min_leg_length {
            return Some(DoneReason::Fell);
        }
        None
    }

    pub fn step(&mut self, action: &Action) -> Result<Transition> {
        if self.done.is_some() {
            return Err(Error::Env {
                index: 0,
                message: "step() called on a finished episode".into(),
            });
        }
        if !action.is_finite() {
            return Err(Error::Env {
                index: 0,
                message: format!("non-finite action {action:?}"),
            });
        }
        let target = self.cfg.limits.clamp(action);
        // First-order lag toward the commanded target.
        let alpha = self.cfg.control_dt / (self.draw.action_lag + self.cfg.control_dt);
        let prev = self.sim.applied.to_array();
        let tgt = target.to_array();
        let mut applied = [0.0; 4];
        for i in 0..4 {
            applied[i] = prev[i] + alpha * (tgt[i] - prev[i]);
        }
        self.sim.applied = Action::from_slice(&applied);

        self.apply_pushes();
        let dt = self.cfg.physics_dt;
        let mut degenerate = false;
        for _ in 0..self.cfg.substeps() {
            if self.physics_substep(dt).is_none() {
                degenerate = true;
                break;
            }
        }
        self.sim.tick += 1;
        self.sim.step_tick += 1;
        if !degenerate && self.sim.step_tick >= self.cfg.ticks_per_step() {
            self.foot_switch();
        }
        self.prev_action = target;

        let mut done = if degenerate {
            Some(DoneReason::HeightCollapse)
        } else {
            self.check_failure()
        };
        if done.is_none() && self.sim.tick >= self.cfg.episode_ticks() {
            done = Some(DoneReason::Timeout);
        }
        self.done = done;

        let sensors = self.sensors();
        let terms = compute_reward(
            sensors.velocity,
            self.sim.yaw_rate,
            &self.cmd,
            self.u_z,
            self.sim.alip.z_dot,
            &self.cfg.reward,
        );
        let reward = if terms.total().is_finite() {
            terms.total()
        } else {
            0.0
        };
        let observation = self.observe();
        Ok(Transition {
            observation,
            reward,
            terms,
            done,
            info: self.info(),
        })
    }

    pub fn trajectory_row(&self, reward: f64, done: Option<DoneReason>) -> TrajectoryRow {
        let com = self.sim.com_world();
        let s = self.sensors();
        TrajectoryRow {
            tick: self.sim.tick,
            t: self.sim.tick as f64 * self.cfg.control_dt,
            x_w: com[0],
            y_w: com[1],
            z: com[2],
            z_dot: self.sim.alip.z_dot,
            vx: s.velocity[0],
            vy: s.velocity[1],
            psi: self.sim.yaw,
            phase: s.phase,
            stance: self.sim.stance.sign() as i8,
            reward,
            w_mar: self.mar_weight(),
            done_reason: done,
        }
    }

    /// Sample a training command given the current forward upper bound.
    pub fn sample_command<R: Rng>(&self, rng: &mut R, forward_max: f64) -> GaitCommand {
        let r = &self.cfg.commands;
        let hi = forward_max.max(r.forward_min);
        let u: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        GaitCommand {
            v_x: r.forward_min + (hi - r.forward_min) * u[0],
            v_y: r.lateral * (2.0 * u[1] - 1.0),
            yaw_rate: r.yaw_rate * (2.0 * u[2] - 1.0),
        }
    }
}

