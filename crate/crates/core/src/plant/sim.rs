//! Fixed-step simulation of the coupled dyad.
//!
//! Each tick, for each user: publish a joint snapshot on the bus, read the
//! newest partner snapshot, render the desired interaction torques from
//! that view, let the human act, run the controller on the measured cuff
//! torque, and integrate the lumped leg dynamics with semi-implicit Euler.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bus::{BusConfig, DelayBus};
use super::human::{HumanAgent, PatientModel, TherapistPolicy};
use super::log::{leg_index, JointRecord, LegRecord, LogRecord, SimLog};
use crate::controller::{controller_step, AdmittanceParams, ControllerContext, TorqueSensor, DEFAULT_CONTROL_RATE_HZ};
use crate::coupling::{
    load_schedules_csv, render_interaction_torques, scheduled_config, user_damper_power, user_spring_energy,
    CouplingGains, DyadCouplingConfig, InteractionTorqueCommand, NominalInertia, ScheduleBlock, StiffnessSchedule,
    UserGains, DEFAULT_DAMPING_RATIO, DEFAULT_STIFFNESS_CEILING,
};
use crate::error::{Error, Result};
use crate::model::{
    ankle_position, forward_dynamics, inverse_dynamics, kinetic_energy, potential_energy, DyadState, ExoskeletonModel,
    Joint, JointId, JointState, LegGeometry, Side, User,
};

/// Gait phase offset of each leg, in cycles. Mirrored legs share a phase.
pub fn leg_phase_offset(user: User, side: Side) -> f64 {
    match (user, side) {
        (User::Therapist, Side::Left) | (User::Patient, Side::Right) => 0.0,
        _ => 0.5,
    }
}

/// Coupling as written in a config file: one stiffness per user, damping
/// from the constant-damping-ratio rule, optional per-joint overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    /// Patient stiffness, N·m/rad.
    #[serde(rename = "K_p")]
    pub k_patient: f64,
    /// Therapist stiffness, N·m/rad.
    #[serde(rename = "K_t")]
    pub k_therapist: f64,
    pub damping_ratio: f64,
    pub stiffness_ceiling: f64,
    pub nominal_inertia: NominalInertia,
    /// Full per-joint gains for the therapist; replaces `K_t`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub therapist: Option<UserGains>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patient: Option<UserGains>,
}

impl Default for CouplingSection {
    fn default() -> Self {
        CouplingSection {
            k_patient: 49.0,
            k_therapist: 49.0,
            damping_ratio: DEFAULT_DAMPING_RATIO,
            stiffness_ceiling: DEFAULT_STIFFNESS_CEILING,
            nominal_inertia: NominalInertia::default(),
            therapist: None,
            patient: None,
        }
    }
}

impl CouplingSection {
    pub fn uniform(k_patient: f64, k_therapist: f64) -> Self {
        CouplingSection {
            k_patient,
            k_therapist,
            ..CouplingSection::default()
        }
    }

    pub fn resolve(&self) -> Result<DyadCouplingConfig> {
        let mut cfg = DyadCouplingConfig::transparent();
        cfg.damping_ratio = self.damping_ratio;
        cfg.nominal_inertia = self.nominal_inertia;
        cfg.stiffness_ceiling = self.stiffness_ceiling;
        cfg.validate()?;
        cfg.set_stiffness(self.k_patient, self.k_therapist)?;
        if let Some(g) = self.therapist {
            cfg.therapist = g;
        }
        if let Some(g) = self.patient {
            cfg.patient = g;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn has_overrides(&self) -> bool {
        self.therapist.is_some() || self.patient.is_some()
    }
}

/// Stiffness schedule as written in a config file. An empty schedule keeps
/// the coupling section's gains for the whole run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    /// A deployed schedule (`U1`..`U8`) or a row set in `file`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patient_id: Option<String>,
    /// CSV with columns `patient_id,block,K_p,K_t`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// s; defaults to an equal split of the run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_duration: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<ScheduleBlock>,
}

impl ScheduleSection {
    /// Resolve to explicit blocks. Relative file paths are taken from `base`.
    pub fn resolve(&self, base: Option<&Path>) -> Result<StiffnessSchedule> {
        if !self.blocks.is_empty() {
            if self.file.is_some() {
                return Err(Error::invalid("schedule", "give either `blocks` or `file`, not both"));
            }
            return Ok(StiffnessSchedule {
                blocks: self.blocks.clone(),
            });
        }
        match (&self.patient_id, &self.file) {
            (None, None) => Ok(StiffnessSchedule::default()),
            (None, Some(_)) => Err(Error::invalid("schedule.patient_id", "required when `file` is set")),
            (Some(id), None) => StiffnessSchedule::deployed(id)
                .ok_or_else(|| Error::invalid("schedule.patient_id", format!("no deployed schedule named `{id}`"))),
            (Some(id), Some(file)) => {
                let path = match base {
                    Some(b) if file.is_relative() => b.join(file),
                    _ => file.clone(),
                };
                let mut all = load_schedules_csv(&path)?;
                all.remove(id).ok_or_else(|| {
                    Error::invalid("schedule.patient_id", format!("`{id}` not found in {}", path.display()))
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    /// `[hip, knee]`, kg·m²
    pub virtual_inertia: [f64; 2],
    /// `[hip, knee]`, N·m·s/rad
    pub virtual_damping: [f64; 2],
    /// Standard deviation of the cuff torque noise, N·m.
    pub sensor_noise_sd: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let a = AdmittanceParams::default();
        ControllerSection {
            virtual_inertia: a.virtual_inertia,
            virtual_damping: a.virtual_damping,
            sensor_noise_sd: 0.0,
        }
    }
}

impl ControllerSection {
    pub fn admittance(&self) -> AdmittanceParams {
        AdmittanceParams {
            virtual_inertia: self.virtual_inertia,
            virtual_damping: self.virtual_damping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// s
    pub dt: f64,
    /// s
    pub duration: f64,
    pub seed: u64,
    pub coupling: CouplingSection,
    pub schedule: ScheduleSection,
    pub bus: BusConfig,
    pub controller: ControllerSection,
    pub therapist_exo: ExoskeletonModel,
    pub patient_exo: ExoskeletonModel,
    pub therapist: TherapistPolicy,
    pub patient: PatientModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1.0 / DEFAULT_CONTROL_RATE_HZ,
            duration: 60.0,
            seed: 1,
            coupling: CouplingSection::default(),
            schedule: ScheduleSection::default(),
            bus: BusConfig::default(),
            controller: ControllerSection::default(),
            therapist_exo: ExoskeletonModel::default(),
            patient_exo: ExoskeletonModel::default(),
            therapist: TherapistPolicy::default(),
            patient: PatientModel::default(),
        }
    }
}

impl SimConfig {
    /// Number of control ticks in the run.
    pub fn ticks(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn model(&self, user: User) -> &ExoskeletonModel {
        match user {
            User::Therapist => &self.therapist_exo,
            User::Patient => &self.patient_exo,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("duration", "must be positive"));
        }
        if self.ticks() == 0 {
            return Err(Error::invalid("duration", "shorter than one tick"));
        }
        self.coupling.resolve()?;
        if self.coupling.has_overrides() && (!self.schedule.blocks.is_empty() || self.schedule.patient_id.is_some()) {
            return Err(Error::invalid(
                "coupling",
                "per-joint gain overrides cannot be combined with a stiffness schedule",
            ));
        }
        if let Some(d) = self.schedule.block_duration {
            if !(d > 0.0) {
                return Err(Error::invalid("schedule.block_duration", "must be positive"));
            }
        }
        self.bus.validate()?;
        self.controller.admittance().validate()?;
        if !(self.controller.sensor_noise_sd >= 0.0) {
            return Err(Error::invalid("controller.sensor_noise_sd", "must be non-negative"));
        }
        self.therapist_exo.validate()?;
        self.patient_exo.validate()?;
        self.therapist.validate()?;
        self.patient.validate()?;
        for side in Side::ALL {
            let rom = self.patient.rom_limit.get(side);
            let lim = self.patient_exo.limits(side);
            for joint in Joint::ALL {
                let l = lim.get(joint);
                let r = rom[joint.index()];
                if !(r > l.angle_min && r <= l.angle_max) {
                    return Err(Error::invalid(
                        "patient.rom_limit",
                        format!("{} {} limit {r} outside the joint range", side.as_str(), joint.as_str()),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Torque the human transmits through the cuffs, recovered from the
/// realised motion: everything the motors did not supply.
pub fn true_interaction_torque(
    geom: &LegGeometry,
    q: [f64; 2],
    qd: [f64; 2],
    qdd_realized: [f64; 2],
    motor_torque: [f64; 2],
    gravity: f64,
) -> Result<[f64; 2]> {
    let tau = inverse_dynamics(geom, q, qd, qdd_realized, gravity)?;
    Ok([tau[0] - motor_torque[0], tau[1] - motor_torque[1]])
}

/// Running mechanical energy balance of both lumped bodies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyAudit {
    /// J, kinetic plus potential, all four legs.
    pub initial_energy: f64,
    pub final_energy: f64,
    pub human_work: f64,
    pub motor_work: f64,
    /// Sum of all positive power contributions times dt.
    pub injected_work: f64,
    /// Energy removed by the virtual dampers (non-negative).
    pub damper_dissipation: f64,
}

impl EnergyAudit {
    pub fn residual(&self) -> f64 {
        (self.final_energy - self.initial_energy) - self.human_work - self.motor_work
    }

    pub fn relative_residual(&self) -> f64 {
        if self.injected_work > 0.0 {
            self.residual().abs() / self.injected_work
        } else {
            self.residual().abs()
        }
    }
}

fn leg_energy(geom: &LegGeometry, q: [f64; 2], qd: [f64; 2], gravity: f64) -> f64 {
    kinetic_energy(geom, q, qd) + potential_energy(geom, q, gravity)
}

type Snapshot = [[JointState; 2]; 2];

fn agent(config: &SimConfig, user: User) -> &dyn HumanAgent {
    match user {
        User::Therapist => &config.therapist,
        User::Patient => &config.patient,
    }
}

pub struct Simulation {
    config: SimConfig,
    base_coupling: DyadCouplingConfig,
    schedule: StiffnessSchedule,
    block_duration: f64,
    n_ticks: usize,
    tick: usize,
    state: DyadState,
    controllers: [ControllerContext; 2],
    sensors: [TorqueSensor; 2],
    /// Indexed by sending user.
    buses: [DelayBus<Snapshot>; 2],
    views: [DyadState; 2],
    last_phase: [f64; 4],
    audit: EnergyAudit,
    log: SimLog,
}

impl Simulation {
    /// Build a simulation from a config whose schedule has been resolved
    /// (see [`ScheduleSection::resolve`]); an unresolved `file` entry is
    /// read relative to the working directory.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let base_coupling = config.coupling.resolve()?;
        let schedule = config.schedule.resolve(None)?;
        schedule.validate(base_coupling.stiffness_ceiling)?;
        let n_ticks = config.ticks();
        let block_duration = match config.schedule.block_duration {
            Some(d) => d,
            None => config.duration / schedule.len().max(1) as f64,
        };
        let dt = config.dt;
        let profile = &config.therapist.profile;
        let state = DyadState::with_all(0.0, |id| {
            let a = agent(&config, id.user);
            let r = profile.reference_at(a.reference_time(0.0), leg_phase_offset(id.user, id.side));
            JointState::new(r.angle[id.joint.index()], r.velocity[id.joint.index()])
        });

        let latency = config.bus.latency_ticks(dt) as f64 * dt;
        let mut controllers = User::ALL.map(|u| {
            let mut c = ControllerContext::new(u, *config.model(u), config.controller.admittance(), dt);
            c.expected_latency = latency;
            c
        });
        for c in controllers.iter_mut() {
            c.reset(&state)?;
        }
        let sigma = config.controller.sensor_noise_sd;
        let sensors = if sigma > 0.0 {
            [
                TorqueSensor::noisy(sigma, config.seed.wrapping_mul(2).wrapping_add(11))?,
                TorqueSensor::noisy(sigma, config.seed.wrapping_mul(2).wrapping_add(12))?,
            ]
        } else {
            [TorqueSensor::ideal(), TorqueSensor::ideal()]
        };
        let bus_cfg = BusConfig {
            seed: config.bus.seed ^ config.seed.rotate_left(32),
            ..config.bus
        };
        let mut buses = [DelayBus::new(bus_cfg, dt, 1), DelayBus::new(bus_cfg, dt, 2)];
        for u in User::ALL {
            buses[u.index()].prime(0, snapshot(&state, u));
        }

        let mut audit = EnergyAudit::default();
        for u in User::ALL {
            for side in Side::ALL {
                let (q, qd) = leg_state(&state, u, side);
                audit.initial_energy += leg_energy(config.model(u).leg(side), q, qd, config.model(u).gravity);
            }
        }
        audit.final_energy = audit.initial_energy;
        Ok(Simulation {
            views: [state.clone(), state.clone()],
            config,
            base_coupling,
            schedule,
            block_duration,
            n_ticks,
            tick: 0,
            state,
            controllers,
            sensors,
            buses,
            last_phase: [f64::NAN; 4],
            audit,
            log: SimLog {
                records: Vec::with_capacity(n_ticks),
            },
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn schedule(&self) -> &StiffnessSchedule {
        &self.schedule
    }

    pub fn state(&self) -> &DyadState {
        &self.state
    }

    /// The dyad as seen by `user`'s controller on the last tick: its own
    /// joints plus the newest partner snapshot.
    pub fn view(&self, user: User) -> &DyadState {
        &self.views[user.index()]
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    pub fn is_done(&self) -> bool {
        self.tick >= self.n_ticks
    }

    pub fn audit(&self) -> &EnergyAudit {
        &self.audit
    }

    pub fn log(&self) -> &SimLog {
        &self.log
    }

    pub fn into_parts(self) -> (SimLog, EnergyAudit) {
        (self.log, self.audit)
    }

    /// Coupling gains in force at time `t`.
    pub fn coupling_at(&self, t: f64) -> Result<DyadCouplingConfig> {
        scheduled_config(&self.schedule, self.block_duration, t, &self.base_coupling)
    }

    /// Advance one control period and append its log record.
    pub fn step(&mut self) -> Result<&LogRecord> {
        let tick = self.tick;
        let dt = self.config.dt;
        let t = tick as f64 * dt;
        let coupling = self.coupling_at(t)?;
        let profile = &self.config.therapist.profile;

        for u in User::ALL {
            self.buses[u.index()].send(tick, snapshot(&self.state, u));
        }
        for u in User::ALL {
            let p = u.partner();
            let (sent, snap) = self.buses[p.index()]
                .receive(tick)
                .ok_or(Error::Validation("bus delivered no partner state".into()))?;
            let view = &mut self.views[u.index()];
            view.clone_from(&self.state);
            view.time = sent as f64 * dt;
            for side in Side::ALL {
                for joint in Joint::ALL {
                    view.set(JointId::new(p, side, joint), snap[side.index()][joint.index()]);
                }
            }
        }

        let mut desired = InteractionTorqueCommand::default();
        let mut damper_power = 0.0;
        let mut spring = 0.0;
        for u in User::ALL {
            let view = &self.views[u.index()];
            let cmd = render_interaction_torques(view, &coupling)?;
            for id in JointId::of_user(u) {
                desired.set(id, cmd.get(id));
            }
            damper_power += user_damper_power(view, &coupling, u)?;
            spring += user_spring_energy(view, &coupling, u)?;
        }

        let mut record = LogRecord {
            tick,
            time: t,
            block: crate::coupling::block_at(t, self.block_duration, self.schedule.len()),
            phase: profile.phase_at(t, leg_phase_offset(User::Therapist, Side::Left)),
            damper_power,
            spring_energy: spring,
            ..LogRecord::default()
        };

        let mut human = [[[0.0; 2]; 2]; 2];
        let mut measured = [[[0.0; 2]; 2]; 2];
        for u in User::ALL {
            let a = agent(&self.config, u);
            let tr = a.reference_time(t);
            for side in Side::ALL {
                let (q, qd) = leg_state(&self.state, u, side);
                let offset = leg_phase_offset(u, side);
                let reference = profile.reference_at(tr, offset);
                let tau = a.human_torque(side, &reference, q, qd);
                human[u.index()][side.index()] = tau;
                for j in 0..2 {
                    measured[u.index()][side.index()][j] = self.sensors[u.index()].measure(tau[j]);
                }
                let li = leg_index(u, side);
                let phase = profile.phase_at(tr, offset);
                let prev = self.last_phase[li];
                record.legs[li] = LegRecord {
                    ankle: ankle_position(q[0], q[1], self.config.model(u).leg(side))
                        .map_err(|e| diverged(tick, e.to_string()))?,
                    heel_strike: if prev.is_nan() { phase == 0.0 } else { phase < prev },
                };
                self.last_phase[li] = phase;
            }
        }

        let mut next = self.state.clone();
        next.time = (tick + 1) as f64 * dt;
        for u in User::ALL {
            let ui = u.index();
            let out = controller_step(&mut self.controllers[ui], &self.views[ui], &desired, measured[ui], t)?;
            record.stale |= out.stale;
            record.constrained |= out.flags.iter().any(|f| f.any()) || out.safe_stop;
            let model = *self.config.model(u);
            for side in Side::ALL {
                let s = side.index();
                let geom = model.leg(side);
                let (q, qd) = leg_state(&self.state, u, side);
                let tm = out.motor_torque[s];
                let th = human[ui][s];
                let tau = [tm[0] + th[0], tm[1] + th[1]];
                let qdd = forward_dynamics(geom, q, qd, tau, model.gravity).ok_or_else(|| {
                    diverged(
                        tick,
                        format!("singular mass matrix on {} {}", u.as_str(), side.as_str()),
                    )
                })?;
                let mut qd_new = [0.0; 2];
                let mut q_new = [0.0; 2];
                for j in 0..2 {
                    qd_new[j] = qd[j] + qdd[j] * dt;
                    q_new[j] = q[j] + qd_new[j] * dt;
                }
                for (j, joint) in Joint::ALL.into_iter().enumerate() {
                    let id = JointId::new(u, side, joint);
                    record.joints[id.index()] = JointRecord {
                        angle: q[j],
                        velocity: qd[j],
                        desired_torque: desired.get(id),
                        measured_torque: measured[ui][s][j],
                        motor_torque: tm[j],
                        human_torque: th[j],
                    };
                    if !(q_new[j].is_finite() && qd_new[j].is_finite()) || q_new[j].abs() > std::f64::consts::PI {
                        return Err(diverged(tick, format!("{id} left the admissible state")));
                    }
                    next.set(id, JointState::new(q_new[j], qd_new[j]));
                }

                let e0 = leg_energy(geom, q, qd, model.gravity);
                let e1 = leg_energy(geom, q_new, qd_new, model.gravity);
                for j in 0..2 {
                    let v = 0.5 * (qd[j] + qd_new[j]);
                    let wh = th[j] * v * dt;
                    let wm = tm[j] * v * dt;
                    self.audit.human_work += wh;
                    self.audit.motor_work += wm;
                    self.audit.injected_work += wh.max(0.0) + wm.max(0.0);
                }
                self.audit.final_energy += e1 - e0;
            }
        }
        self.audit.damper_dissipation -= damper_power * dt;
        self.state = next;
        self.tick += 1;
        self.log.records.push(record);
        Ok(self.log.records.last().expect("record just pushed"))
    }

    /// Run to the configured duration.
    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(())
    }
}

fn diverged(tick: usize, detail: String) -> Error {
    Error::Diverged { tick, detail }
}

fn leg_state(state: &DyadState, user: User, side: Side) -> ([f64; 2], [f64; 2]) {
    let get = |joint| state.states[&JointId::new(user, side, joint)];
    let (h, k) = (get(Joint::Hip), get(Joint::Knee));
    ([h.angle, k.angle], [h.velocity, k.velocity])
}

fn snapshot(state: &DyadState, user: User) -> Snapshot {
    Side::ALL.map(|side| Joint::ALL.map(|joint| state.states[&JointId::new(user, side, joint)]))
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub log: SimLog,
    pub audit: EnergyAudit,
}

/// Simulate `config` for its full duration.
pub fn run(config: SimConfig) -> Result<SimOutput> {
    let mut sim = Simulation::new(config)?;
    sim.run_to_end()?;
    let (log, audit) = sim.into_parts();
    Ok(SimOutput { log, audit })
}

/// Transparent coupling: every gain zero.
pub fn transparent_coupling() -> CouplingSection {
    CouplingSection {
        k_patient: 0.0,
        k_therapist: 0.0,
        ..CouplingSection::default()
    }
}

/// Per-joint gains with the same `K` and `B` everywhere (for overrides).
pub fn uniform_gains(stiffness: f64, damping: f64) -> UserGains {
    UserGains::uniform(CouplingGains::new(stiffness, damping))
}
