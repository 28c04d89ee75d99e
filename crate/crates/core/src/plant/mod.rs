//! The simulated dyad: gait references, human stand-ins, the partner-state
//! bus, the fixed-step loop and its log.

pub mod bus;
pub mod events;
pub mod gait;
pub mod human;
pub mod log;
pub mod sim;

pub use bus::{BusConfig, DelayBus};
pub use events::{detect_heel_strikes, phase_wraps, strides_from_events};
pub use gait::{gait_reference, FourierSeries, GaitProfile, Harmonic, LegReference};
pub use human::{human_torque, HumanAgent, PatientModel, SideValues, TherapistPolicy};
pub use log::{JointRecord, LegRecord, LogRecord, SimLog};
pub use sim::{
    leg_phase_offset, run, true_interaction_torque, CouplingSection, EnergyAudit, ScheduleSection, SimConfig,
    SimOutput, Simulation,
};
