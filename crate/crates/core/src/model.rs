//! Dispersion relations, coupling functions and their admissibility checks.
//!
//! All three functions are radial, so every family is described by a radial
//! profile `f(r)` together with `f'(r)`, `f'(r)/r` and `f''(r)`. Cartesian
//! gradients and Hessians are assembled from that jet.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{bessel_j, composite_rule};

/// Value and first two radial derivatives of a radial profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialJet {
    pub value: f64,
    pub d1: f64,
    /// `f'(r)/r`, continuously extended by `f''(0)` at the origin.
    pub d1_over_r: f64,
    /// `None` when the family does not carry second derivatives.
    pub d2: Option<f64>,
}

/// Euclidean norm that is exactly invariant under sign flips and permutations.
pub fn radius(x: &[f64]) -> f64 {
    let mut sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    sq.sort_by(f64::total_cmp);
    sq.iter().sum::<f64>().sqrt()
}

#[inline]
fn japanese(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}

/// Matter-particle dispersion `Omega`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MatterDispersion {
    /// `eta^2 / 2M`
    NonRelativistic { mass: f64 },
    /// `sqrt(eta^2 + M^2)`
    Relativistic { mass: f64 },
    /// Flat band; only admissible with an unbounded field dispersion.
    Constant { value: f64 },
}

/// Field-particle dispersion `omega`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FieldDispersion {
    Constant {
        value: f64,
    },
    /// `sqrt(k^2 + m^2)` with `m > 0`
    Relativistic {
        mass: f64,
    },
}

/// Coupling function, radial in both representations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Coupling {
    /// Momentum profile `g exp(-sigma^2 k^2 / 2)`, position profile
    /// `g sigma^-nu exp(-x^2 / 2 sigma^2)`.
    Gaussian { g: f64, sigma: f64 },
    /// Momentum profile equal to `g` on `|k| <= cutoff`, vanishing beyond
    /// `2 cutoff`, with a C-infinity logistic transition. The position profile is
    /// computed by radial quadrature.
    SmoothCutoff { g: f64, cutoff: f64 },
    /// Position profile `g <x>^-exponent` only. Used to exercise the
    /// short-range check; it cannot be put on a momentum grid.
    PowerLaw { g: f64, exponent: f64 },
}

impl MatterDispersion {
    pub fn jet(&self, r: f64) -> RadialJet {
        match *self {
            MatterDispersion::NonRelativistic { mass } => {
                RadialJet { value: r * r / (2.0 * mass), d1: r / mass, d1_over_r: 1.0 / mass, d2: Some(1.0 / mass) }
            }
            MatterDispersion::Relativistic { mass } => relativistic_jet(r, mass),
            MatterDispersion::Constant { value } => RadialJet { value, d1: 0.0, d1_over_r: 0.0, d2: Some(0.0) },
        }
    }

    /// Growth exponent of the family.
    pub fn growth_exponent(&self) -> f64 {
        match self {
            MatterDispersion::NonRelativistic { .. } => 2.0,
            MatterDispersion::Relativistic { .. } => 1.0,
            MatterDispersion::Constant { .. } => 0.0,
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            MatterDispersion::NonRelativistic { .. } => "nonrelativistic",
            MatterDispersion::Relativistic { .. } => "relativistic",
            MatterDispersion::Constant { .. } => "constant",
        }
    }

    /// Constant in the lower bound `Omega >= <eta>^s / C - C`.
    fn coercivity_constant(&self) -> f64 {
        match *self {
            MatterDispersion::NonRelativistic { mass } => (2.0 * mass).max(1.0 / (2.0 * mass)),
            MatterDispersion::Relativistic { mass } => (1.0 / mass.min(1.0)).max(1.0),
            MatterDispersion::Constant { .. } => 1.0,
        }
    }

    fn validate_params(&self) -> Result<()> {
        let ok = match *self {
            MatterDispersion::NonRelativistic { mass } => mass.is_finite() && mass > 0.0,
            MatterDispersion::Relativistic { mass } => mass.is_finite() && mass > 0.0,
            MatterDispersion::Constant { value } => value.is_finite() && value >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid parameters for Omega: {self:?}")))
        }
    }
}

impl FieldDispersion {
    pub fn jet(&self, r: f64) -> RadialJet {
        match *self {
            FieldDispersion::Constant { value } => RadialJet { value, d1: 0.0, d1_over_r: 0.0, d2: Some(0.0) },
            FieldDispersion::Relativistic { mass } => relativistic_jet(r, mass),
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            FieldDispersion::Constant { .. } => "constant",
            FieldDispersion::Relativistic { .. } => "relativistic",
        }
    }

    fn validate_params(&self) -> Result<()> {
        let ok = match *self {
            FieldDispersion::Constant { value } => value.is_finite() && value >= 0.0,
            FieldDispersion::Relativistic { mass } => mass.is_finite() && mass > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid parameters for omega: {self:?}")))
        }
    }
}

fn relativistic_jet(r: f64, mass: f64) -> RadialJet {
    let e = (r * r + mass * mass).sqrt();
    RadialJet { value: e, d1: r / e, d1_over_r: 1.0 / e, d2: Some(mass * mass / (e * e * e)) }
}

/// Logistic transition from 1 at `a <= 0` to 0 at `a >= 1`, with derivatives in `a`.
fn cutoff_profile(a: f64) -> (f64, f64, f64) {
    if a <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if a >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 / (1.0 - a) - 1.0 / a;
    if q.abs() > 700.0 {
        return (if q < 0.0 { 1.0 } else { 0.0 }, 0.0, 0.0);
    }
    let e = (-q.abs()).exp();
    let chi = if q > 0.0 { e / (1.0 + e) } else { 1.0 / (1.0 + e) };
    let bell = e / ((1.0 + e) * (1.0 + e));
    let q1 = 1.0 / ((1.0 - a) * (1.0 - a)) + 1.0 / (a * a);
    let q2 = 2.0 / (1.0 - a).powi(3) - 2.0 / a.powi(3);
    let d1 = -bell * q1;
    let d2 = (1.0 - 2.0 * chi) * bell * q1 * q1 - bell * q2;
    (chi, d1, d2)
}

impl Coupling {
    pub fn has_momentum_form(&self) -> bool {
        !matches!(self, Coupling::PowerLaw { .. })
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Coupling::Gaussian { g, .. } | Coupling::SmoothCutoff { g, .. } | Coupling::PowerLaw { g, .. } => g == 0.0,
        }
    }

    pub fn momentum_jet(&self, r: f64) -> Result<RadialJet> {
        match *self {
            Coupling::Gaussian { g, sigma } => {
                let s2 = sigma * sigma;
                let e = g * (-0.5 * s2 * r * r).exp();
                Ok(RadialJet { value: e, d1: -s2 * r * e, d1_over_r: -s2 * e, d2: Some(s2 * (s2 * r * r - 1.0) * e) })
            }
            Coupling::SmoothCutoff { g, cutoff } => {
                let (v, d1, d2) = cutoff_profile(r / cutoff - 1.0);
                let d1_over_r = if r > 0.0 { g * d1 / (cutoff * r) } else { 0.0 };
                Ok(RadialJet { value: g * v, d1: g * d1 / cutoff, d1_over_r, d2: Some(g * d2 / (cutoff * cutoff)) })
            }
            Coupling::PowerLaw { .. } => {
                Err(Error::Unsupported("power_law coupling has no momentum representation".into()))
            }
        }
    }

    pub fn position_jet(&self, r: f64, nu: usize) -> RadialJet {
        match *self {
            Coupling::Gaussian { g, sigma } => {
                let s2 = sigma * sigma;
                let v = g * sigma.powi(-(nu as i32)) * (-0.5 * r * r / s2).exp();
                RadialJet {
                    value: v,
                    d1: -r * v / s2,
                    d1_over_r: -v / s2,
                    d2: Some(v * (r * r / (s2 * s2) - 1.0 / s2)),
                }
            }
            Coupling::SmoothCutoff { g, cutoff } => {
                let (value, d1_over_r) = smooth_cutoff_position(g, cutoff, r, nu);
                RadialJet { value, d1: r * d1_over_r, d1_over_r, d2: None }
            }
            Coupling::PowerLaw { g, exponent: s } => {
                let b = 1.0 + r * r;
                let v = g * b.powf(-0.5 * s);
                let d1_over_r = -s * v / b;
                RadialJet {
                    value: v,
                    d1: r * d1_over_r,
                    d1_over_r,
                    d2: Some(d1_over_r + s * (s + 2.0) * v * r * r / (b * b)),
                }
            }
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            Coupling::Gaussian { .. } => "gaussian",
            Coupling::SmoothCutoff { .. } => "smooth_cutoff",
            Coupling::PowerLaw { .. } => "power_law",
        }
    }

    fn validate_params(&self) -> Result<()> {
        let ok = match *self {
            Coupling::Gaussian { g, sigma } => g.is_finite() && sigma.is_finite() && sigma > 0.0,
            Coupling::SmoothCutoff { g, cutoff } => g.is_finite() && cutoff.is_finite() && cutoff > 0.0,
            Coupling::PowerLaw { g, exponent } => g.is_finite() && exponent.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid parameters for rho: {self:?}")))
        }
    }
}

/// Inverse radial Fourier transform of the smooth-cutoff profile, returning
/// the value and `rho'(r)/r`.
fn smooth_cutoff_position(g: f64, cutoff: f64, r: f64, nu: usize) -> (f64, f64) {
    let kmax = 2.0 * cutoff;
    let panels = (kmax * r / PI).ceil() as usize + 24;
    let rule = composite_rule(0.0, kmax, panels, 16);
    let (mut value, mut slope) = (0.0, 0.0);
    for (k, w) in rule {
        let (chi, _, _) = cutoff_profile(k / cutoff - 1.0);
        if chi == 0.0 {
            continue;
        }
        let x = k * r;
        let (a, b) = match nu {
            1 => (x.cos(), -k * k * sinc(x)),
            2 => (k * bessel_j(0, x), -k * k * k * bessel_j1_over_x(x)),
            _ => (k * k * sinc(x), -k.powi(4) * spherical_j1_over_x(x)),
        };
        value += w * chi * a;
        slope += w * chi * b;
    }
    let norm = match nu {
        1 | 3 => (2.0 / PI).sqrt(),
        _ => 1.0,
    };
    (g * norm * value, g * norm * slope)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

fn bessel_j1_over_x(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        0.5 - x * x / 16.0
    } else {
        bessel_j(1, x) / x
    }
}

fn spherical_j1_over_x(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0
    } else {
        (x.sin() / x - x.cos()) / (x * x)
    }
}

/// Which of the model's functions to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    Matter,
    Field,
    CouplingPosition,
    CouplingMomentum,
}

impl FromStr for Component {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Omega" => Ok(Component::Matter),
            "omega" => Ok(Component::Field),
            "rho_pos" => Ok(Component::CouplingPosition),
            "rho_mom" => Ok(Component::CouplingMomentum),
            other => Err(Error::config(format!("unknown model component `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

impl FromStr for Order {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "value" => Ok(Order::Value),
            "gradient" => Ok(Order::Gradient),
            "hessian" => Ok(Order::Hessian),
            other => Err(Error::config(format!("unknown derivative order `{other}`"))),
        }
    }
}

/// Result of [`DispersionModel::eval`]. Hessians are row-major `nu x nu`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Evaluation {
    Value(f64),
    Gradient(Vec<f64>),
    Hessian(Vec<f64>),
}

impl Evaluation {
    pub fn as_slice(&self) -> &[f64] {
        match self {
            Evaluation::Value(v) => std::slice::from_ref(v),
            Evaluation::Gradient(g) | Evaluation::Hessian(g) => g,
        }
    }
}

/// The triple of matter dispersion, field dispersion and coupling in dimension `nu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionModel {
    pub nu: usize,
    pub matter: MatterDispersion,
    pub field: FieldDispersion,
    pub coupling: Coupling,
    /// Short-range decay margin.
    pub mu: f64,
    /// Constant in the short-range bound; derived from the family when absent.
    pub decay_constant: Option<f64>,
}

impl DispersionModel {
    pub fn new(
        nu: usize,
        matter: MatterDispersion,
        field: FieldDispersion,
        coupling: Coupling,
        mu: f64,
    ) -> Result<Self> {
        let model = Self { nu, matter, field, coupling, mu, decay_constant: None };
        model.check_params()?;
        Ok(model)
    }

    pub fn check_params(&self) -> Result<()> {
        if !(1..=3).contains(&self.nu) {
            return Err(Error::config(format!("nu must be 1, 2 or 3, got {}", self.nu)));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::config(format!("mu must be positive, got {}", self.mu)));
        }
        if let Some(c) = self.decay_constant {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::config(format!("rho.C must be positive, got {c}")));
            }
        }
        self.matter.validate_params()?;
        self.field.validate_params()?;
        self.coupling.validate_params()
    }

    /// Free polaron: quadratic matter dispersion, flat field dispersion, Gaussian coupling.
    pub fn polaron(nu: usize) -> Self {
        Self {
            nu,
            matter: MatterDispersion::NonRelativistic { mass: 1.0 },
            field: FieldDispersion::Constant { value: 1.0 },
            coupling: Coupling::Gaussian { g: 0.2, sigma: 1.0 },
            mu: 1.0,
            decay_constant: None,
        }
    }

    /// Nelson-type: quadratic matter dispersion, massive relativistic field.
    pub fn nelson(nu: usize) -> Self {
        Self { field: FieldDispersion::Relativistic { mass: 1.0 }, ..Self::polaron(nu) }
    }

    /// Relativistic matter and field, both of mass one.
    pub fn relativistic(nu: usize) -> Self {
        Self {
            matter: MatterDispersion::Relativistic { mass: 1.0 },
            field: FieldDispersion::Relativistic { mass: 1.0 },
            ..Self::polaron(nu)
        }
    }

    pub fn preset(name: &str, nu: usize) -> Result<Self> {
        match name {
            "polaron" => Ok(Self::polaron(nu)),
            "nelson" => Ok(Self::nelson(nu)),
            "relativistic" => Ok(Self::relativistic(nu)),
            other => Err(Error::config(format!("unknown preset `{other}`"))),
        }
    }

    pub const PRESETS: [&'static str; 3] = ["polaron", "nelson", "relativistic"];

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        self
    }

    /// Same model with the coupling switched off.
    pub fn decoupled(&self) -> Self {
        let coupling = match self.coupling {
            Coupling::Gaussian { sigma, .. } => Coupling::Gaussian { g: 0.0, sigma },
            Coupling::SmoothCutoff { cutoff, .. } => Coupling::SmoothCutoff { g: 0.0, cutoff },
            Coupling::PowerLaw { exponent, .. } => Coupling::PowerLaw { g: 0.0, exponent },
        };
        Self { coupling, ..self.clone() }
    }

    pub fn s_omega(&self) -> f64 {
        self.matter.growth_exponent()
    }

    /// Short-range exponent `1 + nu/2 + mu`.
    pub fn decay_exponent(&self) -> f64 {
        1.0 + 0.5 * self.nu as f64 + self.mu
    }

    /// Stored short-range constant, or the family default.
    pub fn decay_constant(&self) -> f64 {
        if let Some(c) = self.decay_constant {
            return c;
        }
        let p = self.decay_exponent();
        match self.coupling {
            Coupling::Gaussian { g, sigma } => {
                let s2 = sigma * sigma;
                let peak =
                    if p * s2 > 1.0 { (p * s2).powf(0.5 * p) * (-(p * s2 - 1.0) / (2.0 * s2)).exp() } else { 1.0 };
                g.abs() * sigma.powi(-(self.nu as i32)) * peak
            }
            Coupling::PowerLaw { g, .. } => g.abs(),
            Coupling::SmoothCutoff { .. } => {
                let mut sup: f64 = 0.0;
                for i in 0..=256 {
                    let r = 64.0 * i as f64 / 256.0;
                    let v = self.coupling.position_jet(r, self.nu).value.abs();
                    sup = sup.max(v * japanese(r).powf(p));
                }
                2.0 * sup
            }
        }
    }

    pub fn component_jet(&self, which: Component, r: f64) -> Result<RadialJet> {
        match which {
            Component::Matter => Ok(self.matter.jet(r)),
            Component::Field => Ok(self.field.jet(r)),
            Component::CouplingPosition => Ok(self.coupling.position_jet(r, self.nu)),
            Component::CouplingMomentum => self.coupling.momentum_jet(r),
        }
    }

    fn family_tag(&self, which: Component) -> String {
        match which {
            Component::Matter => format!("Omega.{}", self.matter.tag()),
            Component::Field => format!("omega.{}", self.field.tag()),
            Component::CouplingPosition => format!("rho_pos.{}", self.coupling.tag()),
            Component::CouplingMomentum => format!("rho_mom.{}", self.coupling.tag()),
        }
    }

    /// Evaluates a model function or one of its first two derivatives at `point`.
    pub fn eval(&self, which: Component, point: &[f64], order: Order) -> Result<Evaluation> {
        if point.len() != self.nu {
            return Err(Error::Dimension { expected: self.nu, got: point.len() });
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("evaluation point must be finite"));
        }
        let r = radius(point);
        let jet = self.component_jet(which, r)?;
        Ok(match order {
            Order::Value => Evaluation::Value(jet.value),
            Order::Gradient => Evaluation::Gradient(point.iter().map(|x| x * jet.d1_over_r).collect()),
            Order::Hessian => {
                let d2 = jet.d2.ok_or_else(|| Error::UnsupportedOrder {
                    family: self.family_tag(which),
                    order: "hessian".into(),
                })?;
                let n = self.nu;
                let mut h = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let mut v = if i == j { jet.d1_over_r } else { 0.0 };
                        if r > 0.0 {
                            v += (d2 - jet.d1_over_r) * point[i] * point[j] / (r * r);
                        }
                        h[i * n + j] = v;
                    }
                }
                Evaluation::Hessian(h)
            }
        })
    }

    #[inline]
    pub fn matter_energy(&self, eta: &[f64]) -> f64 {
        self.matter.jet(radius(eta)).value
    }

    #[inline]
    pub fn field_energy(&self, k: &[f64]) -> f64 {
        self.field.jet(radius(k)).value
    }

    /// `omega(k) + Omega(p - k)`, the free fiber energy of a field momentum `k`.
    pub fn fiber_energy(&self, p: &[f64], k: &[f64]) -> f64 {
        let rel: Vec<f64> = p.iter().zip(k).map(|(a, b)| a - b).collect();
        self.field_energy(k) + self.matter_energy(&rel)
    }

    /// Momentum-space coupling at `k`.
    pub fn coupling_momentum(&self, k: &[f64]) -> Result<f64> {
        Ok(self.coupling.momentum_jet(radius(k))?.value)
    }

    /// Group-velocity difference `grad omega(k) - grad Omega(p0 - k)`, written into `out`.
    pub fn velocity_into(&self, p0: &[f64], k: &[f64], out: &mut [f64]) {
        let rel: Vec<f64> = p0.iter().zip(k).map(|(a, b)| a - b).collect();
        let wf = self.field.jet(radius(k)).d1_over_r;
        let wm = self.matter.jet(radius(&rel)).d1_over_r;
        for i in 0..k.len() {
            out[i] = wf * k[i] - wm * rel[i];
        }
    }

    pub fn velocity(&self, p0: &[f64], k: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; k.len()];
        self.velocity_into(p0, k, &mut out);
        out
    }

    /// Checks the admissibility conditions on deterministic samples up to `r_max`.
    pub fn validate_conditions(&self, r_max: f64) -> ValidationReport {
        validate(self, r_max)
    }
}

/// How a clause was decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMethod {
    Symbolic,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub radius: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClauseResult {
    pub clause: String,
    pub description: String,
    pub passed: bool,
    pub method: CheckMethod,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub r_max: f64,
    pub clauses: Vec<ClauseResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ClauseResult> {
        self.clauses.iter().filter(|c| !c.passed)
    }

    pub fn clause(&self, id: &str) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.clause == id)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            write!(f, "{:<22} {}", c.clause, if c.passed { "pass" } else { "FAIL" })?;
            if let Some(w) = &c.witness {
                write!(f, "  (r = {:.4e}: {})", w.radius, w.detail)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

struct Clauses(Vec<ClauseResult>);

impl Clauses {
    fn push(&mut self, id: &str, desc: &str, method: CheckMethod, witness: Option<Witness>) {
        self.0.push(ClauseResult {
            clause: id.into(),
            description: desc.into(),
            passed: witness.is_none(),
            method,
            witness,
        });
    }
}

fn sample_radii(r_max: f64) -> Vec<f64> {
    let count = 400;
    let (lo, hi) = (1e-3f64.ln(), r_max.max(1e-2).ln());
    let mut radii = vec![0.0];
    radii.extend((0..count).map(|i| (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp()));
    radii
}

/// Fails when `q(r)/<r>^e` keeps growing over the last decade of the samples.
fn bounded_ratio(radii: &[f64], exponent: f64, q: impl Fn(f64) -> f64) -> Option<Witness> {
    let r_max = *radii.last().unwrap();
    let (mut head, mut tail, mut arg) = (0.0f64, 0.0f64, 0.0);
    for &r in radii {
        let ratio = q(r).abs() / japanese(r).powf(exponent);
        if !ratio.is_finite() {
            return Some(Witness { radius: r, detail: "non-finite value".into() });
        }
        if r < 0.1 * r_max {
            head = head.max(ratio);
        } else if ratio > tail {
            tail = ratio;
            arg = r;
        }
    }
    (tail > 1.5 * head + 1e-300)
        .then(|| Witness { radius: arg, detail: format!("ratio grows from {head:.3e} to {tail:.3e}") })
}

/// Fails when the tail `[r_max/10, r_max]` of a radial integral is not negligible.
fn integral_converges(radii: &[f64], nu: usize, density: impl Fn(f64) -> f64) -> Option<Witness> {
    let r_max = *radii.last().unwrap();
    let (mut total, mut tail) = (0.0, 0.0);
    for w in radii.windows(2) {
        let (a, b) = (w[0], w[1]);
        let fa = density(a) * a.powi(nu as i32 - 1);
        let fb = density(b) * b.powi(nu as i32 - 1);
        let piece = 0.5 * (fa + fb) * (b - a);
        total += piece;
        if a >= 0.1 * r_max {
            tail += piece;
        }
    }
    if !total.is_finite() {
        return Some(Witness { radius: r_max, detail: "integral diverges".into() });
    }
    (tail > 1e-6 * total.max(1e-300))
        .then(|| Witness { radius: r_max, detail: format!("tail {tail:.3e} of total {total:.3e}") })
}

fn hessian_norm(jet: &RadialJet) -> f64 {
    jet.d1_over_r.abs().max(jet.d2.unwrap_or(0.0).abs())
}

fn radiality_witness(model: &DispersionModel, which: Component) -> Option<Witness> {
    use rand::{RngExt, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..64 {
        let x: Vec<f64> = (0..model.nu).map(|_| rng.random_range(-5.0..5.0)).collect();
        let base = model.eval(which, &x, Order::Value).ok()?;
        let mut y: Vec<f64> = x.iter().rev().map(|v| -v).collect();
        if model.nu > 1 {
            y.rotate_left(1);
        }
        let other = model.eval(which, &y, Order::Value).ok()?;
        if base != other {
            return Some(Witness { radius: radius(&x), detail: "value changes under a sign flip/permutation".into() });
        }
    }
    None
}

fn validate(model: &DispersionModel, r_max: f64) -> ValidationReport {
    let radii = sample_radii(r_max);
    let nu = model.nu;
    let s = model.s_omega();
    let mut out = Clauses(Vec::new());
    use CheckMethod::*;

    // Matter particle.
    let neg = radii.iter().find(|&&r| model.matter.jet(r).value < 0.0);
    out.push(
        "1.nonnegative",
        "Omega >= 0",
        Sampled,
        neg.map(|&r| Witness { radius: r, detail: "negative value".into() }),
    );
    out.push("1.radial", "Omega rotation invariant", Sampled, radiality_witness(model, Component::Matter));
    out.push("1.analytic", "Omega real-analytic (closed-form family)", Symbolic, None);
    let c = model.matter.coercivity_constant();
    let low =
        radii.iter().find(|&&r| model.matter.jet(r).value < japanese(r).powf(s) / c - c - 1e-12 * japanese(r).powf(s));
    out.push(
        "1(i)",
        "Omega >= <eta>^s / C - C",
        Sampled,
        low.map(|&r| Witness { radius: r, detail: format!("lower bound fails for C = {c}") }),
    );
    let symbol = bounded_ratio(&radii, s, |r| model.matter.jet(r).value)
        .or_else(|| bounded_ratio(&radii, s - 1.0, |r| model.matter.jet(r).d1))
        .or_else(|| bounded_ratio(&radii, s - 2.0, |r| hessian_norm(&model.matter.jet(r))));
    out.push("1(ii)", "|d^a Omega| <= C_a <eta>^(s-|a|), |a| <= 2", Sampled, symbol);

    // Field particle.
    let neg = radii.iter().find(|&&r| model.field.jet(r).value < 0.0);
    out.push(
        "2.nonnegative",
        "omega >= 0",
        Sampled,
        neg.map(|&r| Witness { radius: r, detail: "negative value".into() }),
    );
    out.push("2.radial", "omega rotation invariant", Sampled, radiality_witness(model, Component::Field));
    out.push("2.analytic", "omega real-analytic (closed-form family)", Symbolic, None);
    let bounded = bounded_ratio(&radii, 0.0, |r| model.field.jet(r).d1)
        .or_else(|| bounded_ratio(&radii, 0.0, |r| hessian_norm(&model.field.jet(r))));
    out.push("2(i)", "derivatives of omega bounded", Sampled, bounded);
    let unbounded = if s == 0.0 {
        match model.field {
            FieldDispersion::Constant { value } => {
                Some(Witness { radius: r_max, detail: format!("omega is bounded (identically {value})") })
            }
            FieldDispersion::Relativistic { .. } => None,
        }
    } else {
        None
    };
    out.push("2(ii)", "s_Omega = 0 requires omega -> infinity", Symbolic, unbounded);

    // Coupling.
    out.push("3.radial", "rho rotation invariant", Sampled, radiality_witness(model, Component::CouplingPosition));
    let l2 = match model.coupling {
        Coupling::PowerLaw { exponent, .. } if 2.0 * exponent <= nu as f64 => Some(Witness {
            radius: f64::INFINITY,
            detail: format!("<x>^-{exponent} is not square integrable in dimension {nu}"),
        }),
        Coupling::PowerLaw { .. } => None,
        _ => {
            integral_converges(&radii, nu, |r| model.coupling.momentum_jet(r).map(|j| j.value * j.value).unwrap_or(0.0))
        }
    };
    out.push("3.L2", "rho square integrable", Sampled, l2);
    let (smooth, regular) = match model.coupling {
        Coupling::PowerLaw { exponent, .. } => {
            let c2 = (exponent <= nu as f64 + 2.0)
                .then(|| Witness { radius: f64::INFINITY, detail: "second moment of rho not integrable".into() });
            let h1 = (exponent <= 2.0 + 0.5 * nu as f64)
                .then(|| Witness { radius: f64::INFINITY, detail: "|x|^2 rho not in H^1".into() });
            (c2, h1)
        }
        _ => {
            let reg = integral_converges(&radii, nu, |r| {
                let j = model.coupling.momentum_jet(r).expect("momentum form");
                (1.0 + r * r) * (j.d1 * j.d1 + hessian_norm(&j).powi(2))
            });
            (None, reg)
        }
    };
    out.push("3(i)", "rho-hat twice continuously differentiable", Symbolic, smooth);
    out.push("3(ii)", "<k> |grad rho-hat|, <k> |hess rho-hat| in L2", Sampled, regular);

    let c = model.decay_constant();
    let p = model.decay_exponent();
    // Quadrature noise dominates the smooth-cutoff tail far out; its decay is
    // guaranteed by compact momentum support.
    let reach = match model.coupling {
        Coupling::SmoothCutoff { .. } => r_max.min(64.0),
        _ => r_max,
    };
    let violation = radii.iter().filter(|&&r| r <= reach).find_map(|&r| {
        let v = model.coupling.position_jet(r, nu).value.abs();
        let bound = c * japanese(r).powf(-p);
        (v > bound * (1.0 + 1e-12))
            .then(|| Witness { radius: r, detail: format!("|rho| = {v:.3e} exceeds C<x>^-{p:.3} = {bound:.3e}") })
    });
    out.push("3(iii)", "short range |rho| <= C <x>^(-1-nu/2-mu)", Sampled, violation);

    ValidationReport { r_max, clauses: out.0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(model: &DispersionModel, which: Component, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                let fa = model.eval(which, &a, Order::Value).unwrap().as_slice()[0];
                let fb = model.eval(which, &b, Order::Value).unwrap().as_slice()[0];
                (fa - fb) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn nonrelativistic_gradient_is_linear() {
        let m = DispersionModel::polaron(1);
        let g = m.eval(Component::Matter, &[2.0], Order::Gradient).unwrap();
        assert_eq!(g, Evaluation::Gradient(vec![2.0]));
    }

    #[test]
    fn relativistic_field_is_flat_at_origin() {
        let m = DispersionModel::nelson(1);
        let g = m.eval(Component::Field, &[0.0], Order::Gradient).unwrap();
        assert_eq!(g, Evaluation::Gradient(vec![0.0]));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let models = [
            DispersionModel::polaron(3),
            DispersionModel::nelson(2),
            DispersionModel::relativistic(3),
            DispersionModel::polaron(2).with_coupling(Coupling::SmoothCutoff { g: 0.5, cutoff: 1.5 }),
        ];
        let x = [0.7, -1.1, 0.4];
        for m in &models {
            let x = &x[..m.nu];
            for which in [Component::Matter, Component::Field, Component::CouplingPosition] {
                let exact = m.eval(which, x, Order::Gradient).unwrap();
                let (e1, e2) = (fd_gradient(m, which, x, 1e-3), fd_gradient(m, which, x, 5e-4));
                for i in 0..m.nu {
                    let a = (exact.as_slice()[i] - e1[i]).abs();
                    let b = (exact.as_slice()[i] - e2[i]).abs();
                    assert!(a < 1e-5, "{which:?} {a}");
                    assert!(b <= a * 0.3 + 1e-10, "{which:?} second order: {a} {b}");
                }
            }
        }
    }

    #[test]
    fn hessian_is_unsupported_for_quadrature_profiles() {
        let m = DispersionModel::polaron(1).with_coupling(Coupling::SmoothCutoff { g: 1.0, cutoff: 1.0 });
        let err = m.eval(Component::CouplingPosition, &[0.5], Order::Hessian).unwrap_err();
        assert!(matches!(err, Error::UnsupportedOrder { .. }));
    }

    #[test]
    fn unknown_component_is_a_config_error() {
        assert!(matches!("Sigma".parse::<Component>(), Err(Error::Config(_))));
    }

    #[test]
    fn smooth_cutoff_profile_is_continuous() {
        let c = Coupling::SmoothCutoff { g: 1.0, cutoff: 1.0 };
        let mut prev = 1.0;
        for i in 0..=400 {
            let v = c.momentum_jet(i as f64 * 0.0075).unwrap().value;
            assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v));
            assert!(prev - v < 0.05);
            prev = v;
        }
        assert_eq!(c.momentum_jet(2.0).unwrap().value, 0.0);
    }

    #[test]
    fn presets_validate() {
        for name in DispersionModel::PRESETS {
            for nu in 1..=3 {
                let report = DispersionModel::preset(name, nu).unwrap().validate_conditions(1e4);
                assert!(report.all_passed(), "{name} nu={nu}\n{report}");
            }
        }
    }

    #[test]
    fn flat_matter_with_flat_field_fails_unboundedness() {
        let m = DispersionModel { matter: MatterDispersion::Constant { value: 0.5 }, ..DispersionModel::polaron(1) };
        let report = m.validate_conditions(1e4);
        let clause = report.clause("2(ii)").unwrap();
        assert!(!clause.passed);
        assert!(clause.witness.as_ref().unwrap().detail.contains("bounded"));
    }

    #[test]
    fn slow_decay_fails_short_range() {
        let m = DispersionModel::polaron(1).with_coupling(Coupling::PowerLaw { g: 1.0, exponent: 1.0 });
        let report = m.validate_conditions(1e4);
        assert!(!report.clause("3(iii)").unwrap().passed);
        assert!(report.clause("1(i)").unwrap().passed);
    }
}
