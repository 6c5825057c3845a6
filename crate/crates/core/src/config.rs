//! Experiment configuration read from TOML with flat dotted keys.
//!
//! ```toml
//! command = "ac-defect"
//! preset = "polaron"
//! nu = 1
//! rho.family = "gaussian"
//! rho.g = 0.2
//! rho.sigma = 2.0
//! grid.n = 2048
//! grid.kmax = 3.0
//! P = [0.3, -0.2]
//! delta = [0.05]
//! schedule.t_max = 400.0
//! out = "results/ac_defect"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, MomentumGrid};
use crate::model::{Coupling, DispersionModel, FieldDispersion, MatterDispersion};
use crate::scattering::{GenericStateParams, PropagationObservable, TimeSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Thresholds,
    Atlas,
    MourreCheck,
    Evolve,
    Propagation,
    Scatter,
    AcDefect,
    Validate,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Spectrum,
        Command::Thresholds,
        Command::Atlas,
        Command::MourreCheck,
        Command::Evolve,
        Command::Propagation,
        Command::Scatter,
        Command::AcDefect,
        Command::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Thresholds => "thresholds",
            Command::Atlas => "atlas",
            Command::MourreCheck => "mourre-check",
            Command::Evolve => "evolve",
            Command::Propagation => "propagation",
            Command::Scatter => "scatter",
            Command::AcDefect => "ac-defect",
            Command::Validate => "validate",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::config(format!("unknown command `{name}`")))
    }
}

/// A total momentum: a scalar is placed on the first axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MomentumValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl MomentumValue {
    fn resolve(&self, nu: usize) -> Result<Vec<f64>> {
        let v = match self {
            MomentumValue::Scalar(x) => {
                let mut v = vec![0.0; nu];
                v[0] = *x;
                v
            }
            MomentumValue::Vector(v) => v.clone(),
        };
        if v.len() != nu {
            return Err(Error::config(format!("momentum {v:?} does not have {nu} components")));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::config(format!("momentum {v:?} is not finite")));
        }
        Ok(v)
    }
}

/// `count` equally spaced momenta on the first axis, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatterSection {
    pub family: Option<String>,
    #[serde(rename = "M")]
    pub mass: Option<f64>,
    #[serde(rename = "E0")]
    pub value: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub family: Option<String>,
    pub m: Option<f64>,
    pub w0: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub family: Option<String>,
    pub g: Option<f64>,
    pub sigma: Option<f64>,
    pub cutoff: Option<f64>,
    pub s: Option<f64>,
    #[serde(rename = "C")]
    pub decay_constant: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub kmax: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default = "default_ratio")]
    pub sigma: f64,
    pub count: Option<usize>,
    /// Alternative to `count`: the longest schedule ending at or before `t_max`.
    pub t_max: Option<f64>,
}

fn default_t0() -> f64 {
    1.0
}

fn default_ratio() -> f64 {
    1.25
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { t0: default_t0(), sigma: default_ratio(), count: None, t_max: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    /// Seeded random vacuum plus wavepacket mixtures.
    #[default]
    Generic,
    /// Field wavepackets at the listed relative momenta, zero vacuum.
    Wavepacket,
    /// The bound state below the essential spectrum.
    Shell,
    Vacuum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    #[serde(default)]
    pub kind: StateKind,
    pub count: Option<usize>,
    /// Relative momenta of the wavepackets.
    pub offset: Option<Vec<MomentumValue>>,
    pub width: Option<f64>,
    pub offset_min: Option<f64>,
    pub offset_max: Option<f64>,
}

impl Default for StateSection {
    fn default() -> Self {
        Self { kind: StateKind::Generic, count: None, offset: None, width: None, offset_min: None, offset_max: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSection {
    pub kind: Option<ObservableKind>,
    /// Large-velocity window; derived from the state's group speed when absent.
    pub r: Option<f64>,
    pub r_prime: Option<f64>,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub axis: Option<usize>,
    pub epsilon: Option<f64>,
    pub include_vacuum: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    LargeVelocity,
    PhaseSpace,
    ImprovedPhaseSpace,
    MinimalVelocity,
}

/// Observable request; the large-velocity radii may be left to the driver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObservableRequest {
    Fixed(PropagationObservable),
    AutoLargeVelocity,
}

impl ObservableSection {
    pub fn resolve(&self, nu: usize) -> Result<Vec<ObservableRequest>> {
        let c0 = self.c0.unwrap_or(0.2);
        let c1 = self.c1.unwrap_or(2.0);
        let large = match (self.r, self.r_prime) {
            (Some(r), Some(r_prime)) => ObservableRequest::Fixed(PropagationObservable::LargeVelocity { r, r_prime }),
            (Some(r), None) => ObservableRequest::Fixed(PropagationObservable::LargeVelocity { r, r_prime: 2.0 * r }),
            (None, Some(_)) => return Err(Error::config("observable.r_prime given without observable.r")),
            (None, None) => ObservableRequest::AutoLargeVelocity,
        };
        let phase = ObservableRequest::Fixed(PropagationObservable::PhaseSpace { c0, c1 });
        let improved = ObservableRequest::Fixed(PropagationObservable::ImprovedPhaseSpace {
            c0,
            c1,
            axis: self.axis.unwrap_or(0),
        });
        let minimal = ObservableRequest::Fixed(PropagationObservable::MinimalVelocity {
            epsilon: self.epsilon.unwrap_or(0.1),
            include_vacuum: self.include_vacuum.unwrap_or(true),
        });
        if self.axis.is_some_and(|a| a >= nu) {
            return Err(Error::config(format!("observable.axis must be below nu = {nu}")));
        }
        Ok(match self.kind {
            None => vec![large, phase, improved, minimal],
            Some(ObservableKind::LargeVelocity) => vec![large],
            Some(ObservableKind::PhaseSpace) => vec![phase],
            Some(ObservableKind::ImprovedPhaseSpace) => vec![improved],
            Some(ObservableKind::MinimalVelocity) => vec![minimal],
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub search_radius: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

fn default_r_max() -> f64 {
    1e3
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self { r_max: default_r_max() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSection {
    /// Largest accepted last Cauchy increment, relative to the input norm.
    #[serde(default = "default_wave_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_true")]
    pub enabled: bool,
}

fn default_wave_tolerance() -> f64 {
    1e-6
}

fn default_true() -> bool {
    true
}

impl Default for WaveSection {
    fn default() -> Self {
        Self { tolerance: default_wave_tolerance(), enabled: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    /// Number of lowest eigenvalues written per `P`.
    #[serde(default = "default_spectrum_count")]
    pub count: usize,
}

fn default_spectrum_count() -> usize {
    16
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { count: default_spectrum_count() }
    }
}

/// Everything one run needs, as written in the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub preset: Option<String>,
    #[serde(default = "default_nu")]
    pub nu: usize,
    #[serde(rename = "Omega", default)]
    pub matter: MatterSection,
    #[serde(rename = "omega", default)]
    pub field: FieldSection,
    #[serde(rename = "rho", default)]
    pub coupling: CouplingSection,
    pub mu: Option<f64>,
    pub grid: Option<GridSection>,
    #[serde(rename = "P")]
    pub momenta: Option<Vec<MomentumValue>>,
    #[serde(rename = "P_range")]
    pub momentum_range: Option<MomentumRange>,
    /// Reference momentum of the conjugate operator; defaults to each `P`.
    #[serde(rename = "P0")]
    pub reference_momentum: Option<MomentumValue>,
    pub delta: Option<Vec<f64>>,
    /// Agreement required between the two smallest `delta`.
    #[serde(default = "default_delta_tolerance")]
    pub delta_tolerance: f64,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub out: Option<String>,
    /// Window centers; absolute energies.
    pub lambda: Option<Vec<f64>>,
    /// Window centers measured from the bottom of the essential spectrum.
    pub lambda_offset: Option<Vec<f64>>,
    pub kappa: Option<f64>,
    #[serde(default)]
    pub observable: ObservableSection,
    #[serde(default)]
    pub state: StateSection,
    #[serde(default)]
    pub thresholds: ThresholdSection,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub wave: WaveSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
}

fn default_nu() -> usize {
    1
}

fn default_seed() -> u64 {
    7
}

fn default_delta_tolerance() -> f64 {
    1e-2
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Resolves every derived quantity once so that configuration errors surface
    /// before any computation starts.
    pub fn check(&self) -> Result<()> {
        self.model()?;
        if self.command != Command::Validate {
            self.grid()?;
            self.momentum_list()?;
        }
        match self.command {
            Command::Evolve | Command::Propagation | Command::Scatter | Command::AcDefect => {
                self.schedule()?;
                self.state_params()?;
            }
            Command::MourreCheck => {
                positive("kappa", self.kappa.unwrap_or(0.1))?;
                self.reference_for(&vec![0.0; self.nu])?;
            }
            _ => {}
        }
        if matches!(self.command, Command::Scatter | Command::AcDefect) {
            let d = self.deltas();
            if d.is_empty() {
                return Err(Error::config("delta list is empty"));
            }
            for v in d {
                positive("delta", v)?;
            }
        }
        if self.command == Command::Propagation {
            self.observable.resolve(self.nu)?;
        }
        positive("wave.tolerance", self.wave.tolerance)?;
        positive("validate.r_max", self.validate.r_max)?;
        if let Some(r) = self.thresholds.search_radius {
            positive("thresholds.search_radius", r)?;
        }
        Ok(())
    }

    pub fn model(&self) -> Result<DispersionModel> {
        let base = match &self.preset {
            Some(name) => DispersionModel::preset(name, self.nu)?,
            None => {
                if self.matter.family.is_none() || self.field.family.is_none() || self.coupling.family.is_none() {
                    return Err(Error::config(
                        "without a preset, Omega.family, omega.family and rho.family are all required",
                    ));
                }
                DispersionModel { nu: self.nu, ..DispersionModel::polaron(self.nu) }
            }
        };
        let matter = self.matter_dispersion(base.matter)?;
        let field = self.field_dispersion(base.field)?;
        let coupling = self.coupling_function(base.coupling)?;
        let model = DispersionModel {
            nu: self.nu,
            matter,
            field,
            coupling,
            mu: self.mu.unwrap_or(base.mu),
            decay_constant: self.coupling.decay_constant,
        };
        model.check_params()?;
        Ok(model)
    }

    fn matter_dispersion(&self, base: MatterDispersion) -> Result<MatterDispersion> {
        let s = &self.matter;
        let base_mass = match base {
            MatterDispersion::NonRelativistic { mass } | MatterDispersion::Relativistic { mass } => mass,
            MatterDispersion::Constant { .. } => 1.0,
        };
        let base_value = match base {
            MatterDispersion::Constant { value } => value,
            _ => 0.0,
        };
        let family = match &s.family {
            Some(f) => f.as_str(),
            None => match base {
                MatterDispersion::NonRelativistic { .. } => "nonrelativistic",
                MatterDispersion::Relativistic { .. } => "relativistic",
                MatterDispersion::Constant { .. } => "constant",
            },
        };
        let mass = s.mass.unwrap_or(base_mass);
        match family {
            "nonrelativistic" | "non_relativistic" | "quadratic" => Ok(MatterDispersion::NonRelativistic { mass }),
            "relativistic" => Ok(MatterDispersion::Relativistic { mass }),
            "constant" => Ok(MatterDispersion::Constant { value: s.value.unwrap_or(base_value) }),
            other => Err(Error::config(format!("unknown Omega.family `{other}`"))),
        }
    }

    fn field_dispersion(&self, base: FieldDispersion) -> Result<FieldDispersion> {
        let s = &self.field;
        let (family, mass, value) = match base {
            FieldDispersion::Constant { value } => ("constant", 1.0, value),
            FieldDispersion::Relativistic { mass } => ("relativistic", mass, 1.0),
        };
        let family = s.family.as_deref().unwrap_or(family);
        match family {
            "constant" => Ok(FieldDispersion::Constant { value: s.w0.unwrap_or(value) }),
            "relativistic" => Ok(FieldDispersion::Relativistic { mass: s.m.unwrap_or(mass) }),
            other => Err(Error::config(format!("unknown omega.family `{other}`"))),
        }
    }

    fn coupling_function(&self, base: Coupling) -> Result<Coupling> {
        let s = &self.coupling;
        let (family, g) = match base {
            Coupling::Gaussian { g, .. } => ("gaussian", g),
            Coupling::SmoothCutoff { g, .. } => ("smooth_cutoff", g),
            Coupling::PowerLaw { g, .. } => ("power_law", g),
        };
        let (sigma, cutoff, exponent) = match base {
            Coupling::Gaussian { sigma, .. } => (sigma, 1.0, 3.0),
            Coupling::SmoothCutoff { cutoff, .. } => (1.0, cutoff, 3.0),
            Coupling::PowerLaw { exponent, .. } => (1.0, 1.0, exponent),
        };
        let g = s.g.unwrap_or(g);
        match s.family.as_deref().unwrap_or(family) {
            "gaussian" => Ok(Coupling::Gaussian { g, sigma: s.sigma.unwrap_or(sigma) }),
            "smooth_cutoff" | "cutoff" => Ok(Coupling::SmoothCutoff { g, cutoff: s.cutoff.unwrap_or(cutoff) }),
            "power_law" => Ok(Coupling::PowerLaw { g, exponent: s.s.unwrap_or(exponent) }),
            other => Err(Error::config(format!("unknown rho.family `{other}`"))),
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let g = self.grid.ok_or_else(|| Error::config("grid.n and grid.kmax are required"))?;
        Ok(GridSpec { nu: self.nu, n: g.n, k_max: g.kmax })
    }

    pub fn grid(&self) -> Result<MomentumGrid> {
        MomentumGrid::from_spec(self.grid_spec()?)
    }

    /// `P` values in input order: the explicit list, then the range.
    pub fn momentum_list(&self) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::new();
        if let Some(list) = &self.momenta {
            for p in list {
                out.push(p.resolve(self.nu)?);
            }
        }
        if let Some(r) = self.momentum_range {
            if r.count == 0 || !r.start.is_finite() || !r.stop.is_finite() {
                return Err(Error::config("P_range needs finite endpoints and a positive count"));
            }
            for i in 0..r.count {
                let t = if r.count == 1 { 0.0 } else { i as f64 / (r.count - 1) as f64 };
                let mut p = vec![0.0; self.nu];
                p[0] = r.start + t * (r.stop - r.start);
                out.push(p);
            }
        }
        if out.is_empty() {
            return Err(Error::config("no total momenta: set P or P_range"));
        }
        Ok(out)
    }

    pub fn reference_for(&self, p: &[f64]) -> Result<Vec<f64>> {
        match &self.reference_momentum {
            Some(v) => v.resolve(self.nu),
            None => Ok(p.to_vec()),
        }
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.delta.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05])
    }

    pub fn schedule(&self) -> Result<TimeSchedule> {
        let s = self.schedule;
        match (s.count, s.t_max) {
            (Some(_), Some(_)) => Err(Error::config("set schedule.count or schedule.t_max, not both")),
            (Some(count), None) => TimeSchedule::new(s.t0, s.sigma, count),
            (None, Some(t_max)) => TimeSchedule::up_to(s.t0, s.sigma, t_max),
            (None, None) => TimeSchedule::new(s.t0, s.sigma, 20),
        }
    }

    pub fn state_params(&self) -> Result<GenericStateParams> {
        let d = GenericStateParams::default();
        let s = &self.state;
        let params = GenericStateParams {
            count: s.count.unwrap_or(d.count),
            seed: self.seed,
            offset_min: s.offset_min.unwrap_or(d.offset_min),
            offset_max: s.offset_max.unwrap_or(d.offset_max),
            width: positive("state.width", s.width.unwrap_or(d.width))?,
        };
        if !(params.offset_min >= 0.0 && params.offset_max >= params.offset_min) {
            return Err(Error::config("state.offset_min and state.offset_max must satisfy 0 <= min <= max"));
        }
        if params.count == 0 {
            return Err(Error::config("state.count must be positive"));
        }
        Ok(params)
    }

    /// Relative momenta for wavepacket states.
    pub fn state_offsets(&self) -> Result<Vec<Vec<f64>>> {
        match &self.state.offset {
            Some(list) if !list.is_empty() => list.iter().map(|v| v.resolve(self.nu)).collect(),
            _ => Ok(vec![{
                let mut v = vec![0.0; self.nu];
                v[0] = 0.7;
                v
            }]),
        }
    }

    /// Output prefix, defaulting to the command name in the working directory.
    pub fn out_prefix(&self) -> String {
        self.out.clone().unwrap_or_else(|| self.command.name().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_with_overrides() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            command = "ac-defect"
            preset = "polaron"
            rho.sigma = 2.0
            grid.n = 64
            grid.kmax = 3.0
            P = [0.3, [-0.2]]
            schedule.t_max = 100.0
            "#,
        )
        .unwrap();
        let m = cfg.model().unwrap();
        assert_eq!(m.coupling, Coupling::Gaussian { g: 0.2, sigma: 2.0 });
        assert_eq!(cfg.momentum_list().unwrap(), vec![vec![0.3], vec![-0.2]]);
        assert_eq!(cfg.schedule().unwrap().last(), 1.25f64.powi(20));
    }

    #[test]
    fn explicit_families() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            command = "thresholds"
            nu = 2
            Omega.family = "relativistic"
            Omega.M = 2.0
            omega.family = "constant"
            omega.w0 = 0.5
            rho.family = "smooth_cutoff"
            rho.g = 0.1
            rho.cutoff = 1.5
            mu = 0.5
            grid.n = 16
            grid.kmax = 4.0
            P_range = { start = 0.0, stop = 1.0, count = 3 }
            "#,
        )
        .unwrap();
        let m = cfg.model().unwrap();
        assert_eq!(m.matter, MatterDispersion::Relativistic { mass: 2.0 });
        assert_eq!(m.field, FieldDispersion::Constant { value: 0.5 });
        assert_eq!(m.mu, 0.5);
        assert_eq!(cfg.momentum_list().unwrap()[1], vec![0.5, 0.0]);
    }

    #[test]
    fn configuration_errors() {
        let base = "grid.n = 16\ngrid.kmax = 2.0\nP = [0.1]\n";
        for bad in [
            "command = \"nope\"\npreset = \"polaron\"\n",
            "command = \"spectrum\"\npreset = \"muon\"\n",
            "command = \"spectrum\"\n",
            "command = \"spectrum\"\npreset = \"polaron\"\nrho.family = \"lorentzian\"\n",
            "command = \"evolve\"\npreset = \"polaron\"\nschedule.t0 = 0.5\n",
            "command = \"spectrum\"\npreset = \"polaron\"\nunknown_key = 1\n",
            "command = \"scatter\"\npreset = \"polaron\"\ndelta = []\n",
        ] {
            let r = ExperimentConfig::from_toml_str(&format!("{bad}{base}"));
            assert!(matches!(r, Err(Error::Config(_))), "{bad}: {r:?}");
        }
        let r = ExperimentConfig::from_toml_str(
            "command = \"spectrum\"\npreset = \"polaron\"\nP = [[0.1, 0.2]]\ngrid.n = 8\ngrid.kmax = 1.0\n",
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn observable_defaults() {
        let all = ObservableSection::default().resolve(1).unwrap();
        assert_eq!(all.len(), 4);
        assert_eq!(all[0], ObservableRequest::AutoLargeVelocity);
        let one = ObservableSection { kind: Some(ObservableKind::LargeVelocity), r: Some(3.0), ..Default::default() }
            .resolve(1)
            .unwrap();
        assert_eq!(one, vec![ObservableRequest::Fixed(PropagationObservable::LargeVelocity { r: 3.0, r_prime: 6.0 })]);
    }
}
