use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FiberState;
use crate::model::DispersionModel;
use crate::spectral::{lowest_shell, sigma_ess};

use super::asymptotic::escape_expectation;
use super::propagate::Propagator;
use super::schedule::TimeSchedule;
use super::wave::CauchyLog;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcDefectParams {
    pub delta: f64,
    pub schedule: TimeSchedule,
}

/// `d = ||psi||^2 - |<phi_E, psi>|^2 - ||[p_delta(x/T)] e^{-iTH} psi||^2` and its parts.
#[derive(Clone, Debug, Serialize)]
pub struct AcDefect {
    pub defect: f64,
    pub norm_sqr: f64,
    pub shell_energy: Option<f64>,
    /// `|<phi_E, psi>|^2`
    pub bound: f64,
    /// Escaped mass at the final time.
    pub scattering: f64,
    /// Field mass at the final time without the escape cutoff, for comparison.
    pub plain_projection: f64,
    pub times: Vec<f64>,
    pub scattering_series: Vec<f64>,
    pub cauchy: CauchyLog,
}

/// Asymptotic-completeness defect of `psi` in the fiber of `prop`.
///
/// The scattering part is the final-time value of
/// `||[p_delta] P_field e^{iTH_0} e^{-iTH} psi||^2`; since `H_0` does not mix the
/// vacuum and the field, the free back-propagation drops out of the norm.
pub fn ac_defect(
    model: &DispersionModel,
    prop: &Propagator,
    psi: &FiberState,
    params: &AcDefectParams,
) -> Result<AcDefect> {
    if !(params.delta.is_finite() && params.delta > 0.0) {
        return Err(Error::config("delta must be positive"));
    }
    let sigma = sigma_ess(model, &prop.op.p)?;
    let shell = lowest_shell(&prop.op, sigma);
    let norm_sqr = psi.norm_sqr();
    let bound = shell.as_ref().map_or(0.0, |s| s.state.inner(psi).norm_sqr());
    let times = params.schedule.times();
    let states = prop.trajectory(psi, &times)?;
    let series: Result<Vec<f64>> =
        states.iter().zip(&times).map(|(s, &t)| escape_expectation(prop.grid(), s, params.delta, t)).collect();
    let scattering_series = series?;
    let increments: Vec<f64> = scattering_series.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let cauchy = CauchyLog::assess(times[1..].to_vec(), increments, 1e-10 * norm_sqr.max(f64::MIN_POSITIVE));
    if cauchy.growing {
        return Err(Error::Convergence(format!("escaped mass is not settling; increments {:?}", cauchy.increments)));
    }
    let scattering = *scattering_series.last().expect("nonempty schedule");
    let plain_projection = states.last().expect("nonempty schedule").field_norm_sqr();
    Ok(AcDefect {
        defect: norm_sqr - bound - scattering,
        norm_sqr,
        shell_energy: shell.map(|s| s.energy),
        bound,
        scattering,
        plain_projection,
        times,
        scattering_series,
        cauchy,
    })
}
