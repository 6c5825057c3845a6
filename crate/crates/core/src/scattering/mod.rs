//! Time evolution, propagation monitors, asymptotic observables, wave
//! operators and the asymptotic-completeness defect at fixed total momentum.

mod ac_defect;
mod asymptotic;
mod direct_integral;
mod geometric;
mod monitors;
mod propagate;
mod schedule;
mod states;
mod wave;

pub use ac_defect::{ac_defect, AcDefect, AcDefectParams};
pub use asymptotic::{asymptotic_projection, escape_expectation, AsymptoticReport, DeltaSeries};
pub use direct_integral::{direct_integral_evolve, DirectIntegralState};
pub use geometric::{geometric_identity_check, GeometricResiduals};
pub use monitors::{large_velocity_radius, propagation_monitor, MonitorCurve, PropagationObservable};
pub use propagate::{propagate, BoundaryMonitor, Propagator};
pub use schedule::TimeSchedule;
pub use states::{generic_states, relative_wavepacket, GenericStateParams};
pub use wave::{wave_operator, CauchyLog, WaveOperatorResult};

use serde::Serialize;

/// Per-`P` bundle of scattering diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct ScatteringReport {
    pub p: Vec<f64>,
    pub asymptotic: Option<AsymptoticReport>,
    pub wave: Option<WaveOperatorResult>,
    pub ac_defect: Vec<AcDefect>,
    pub monitors: Vec<MonitorCurve>,
    pub geometric: Option<GeometricResiduals>,
    /// Failures recorded instead of aborting the sweep.
    pub failures: Vec<String>,
}

impl ScatteringReport {
    pub fn new(p: &[f64]) -> Self {
        Self {
            p: p.to_vec(),
            asymptotic: None,
            wave: None,
            ac_defect: Vec::new(),
            monitors: Vec::new(),
            geometric: None,
            failures: Vec::new(),
        }
    }
}
