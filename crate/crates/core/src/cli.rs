//! Command-line driver: parses a configuration, runs the requested experiment
//! over the list of total momenta and writes `<out>.csv` and `<out>.json`.
//!
//! Exit status is 0 on success, 2 when some record failed to converge (results
//! are still written, with the failures recorded) and 1 on configuration errors.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig, ObservableRequest, StateKind};
use crate::error::{Error, Result};
use crate::fiber::assemble_fiber;
use crate::grid::{FiberState, MomentumGrid};
use crate::model::DispersionModel;
use crate::mourre::{assemble_commutator, mourre_constant, shell_virial};
use crate::scattering::{
    ac_defect, asymptotic_projection, generic_states, geometric_identity_check, large_velocity_radius,
    propagation_monitor, relative_wavepacket, wave_operator, AcDefectParams, PropagationObservable, Propagator,
    TimeSchedule,
};
use crate::spectral::{lowest_shell, sigma_ess, spectral_atlas, EigenDecomposition, SpectralAtlas};
use crate::thresholds::{default_search_radius, threshold_set};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CONVERGENCE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fiberscat", version, about = "Fiber spectra and one-boson scattering experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    pub config: PathBuf,
    /// Output prefix; overrides `out` in the file.
    #[arg(long)]
    pub out: Option<String>,
    /// Suppress the per-momentum summary lines.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Run the command named in the configuration file.
    Run(RunArgs),
    /// Lowest eigenvalues of each fiber.
    Spectrum(RunArgs),
    /// Threshold sets and their witnesses.
    Thresholds(RunArgs),
    /// Essential-spectrum bottom, bound state and thresholds per momentum.
    Atlas(RunArgs),
    /// Commutator consistency and Mourre constants on energy windows.
    MourreCheck(RunArgs),
    /// Time evolution of test states.
    Evolve(RunArgs),
    /// Propagation-estimate integrals.
    Propagation(RunArgs),
    /// Asymptotic observables, wave operators and factorization residuals.
    Scatter(RunArgs),
    /// Asymptotic-completeness defect of test states.
    AcDefect(RunArgs),
    /// Admissibility checks of the model.
    Validate(RunArgs),
}

impl CliCommand {
    fn split(&self) -> (Option<Command>, &RunArgs) {
        match self {
            CliCommand::Run(a) => (None, a),
            CliCommand::Spectrum(a) => (Some(Command::Spectrum), a),
            CliCommand::Thresholds(a) => (Some(Command::Thresholds), a),
            CliCommand::Atlas(a) => (Some(Command::Atlas), a),
            CliCommand::MourreCheck(a) => (Some(Command::MourreCheck), a),
            CliCommand::Evolve(a) => (Some(Command::Evolve), a),
            CliCommand::Propagation(a) => (Some(Command::Propagation), a),
            CliCommand::Scatter(a) => (Some(Command::Scatter), a),
            CliCommand::AcDefect(a) => (Some(Command::AcDefect), a),
            CliCommand::Validate(a) => (Some(Command::Validate), a),
        }
    }
}

/// Results of one run, before serialization.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub command: Command,
    pub columns: &'static str,
    pub rows: Vec<String>,
    pub records: Vec<Value>,
    pub summary: Vec<String>,
    pub failures: Vec<String>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            EXIT_OK
        } else {
            EXIT_CONVERGENCE
        }
    }
}

/// One momentum's share of a report.
#[derive(Default)]
struct Record {
    rows: Vec<String>,
    json: Value,
    summary: String,
    failures: Vec<String>,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn vector(xs: &[f64]) -> String {
    xs.iter().map(|&v| num(v)).collect::<Vec<_>>().join(";")
}

fn short(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|v| format!("{v}")).collect();
    if parts.len() == 1 {
        parts[0].clone()
    } else {
        format!("({})", parts.join(", "))
    }
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

/// Parses a configuration, optionally forcing the command.
pub fn load_config(path: &Path, command: Option<Command>) -> Result<(ExperimentConfig, toml::Table)> {
    let text = fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, command)
}

pub fn parse_config(text: &str, command: Option<Command>) -> Result<(ExperimentConfig, toml::Table)> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
    if let Some(c) = command {
        table.insert("command".into(), toml::Value::String(c.name().into()));
    }
    let cfg: ExperimentConfig = table.clone().try_into().map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
    cfg.check()?;
    Ok((cfg, table))
}

type Worker = fn(&Ctx, &[f64]) -> Result<Record>;

/// Runs the configured command over every momentum, in parallel, keeping input order.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunReport> {
    let model = cfg.model()?;
    if cfg.command == Command::Validate {
        return Ok(validate_report(cfg, &model));
    }
    let grid = cfg.grid()?;
    let momenta = cfg.momentum_list()?;
    let (columns, worker): (&'static str, Worker) = match cfg.command {
        Command::Spectrum => ("P,index,eigenvalue,below_sigma_ess", spectrum_record),
        Command::Thresholds => ("P,index,threshold,kind,witness,sigma_ess", thresholds_record),
        Command::Atlas => (SpectralAtlas::CSV_HEADER, atlas_record),
        Command::MourreCheck => {
            ("P,P0,lambda,kappa,c_est,n_window,thresholds_in_window,excluded_shell,status", mourre_record)
        }
        Command::Evolve => ("P,state,t,norm,energy,vacuum_weight,outer_mass,status", evolve_record),
        Command::Propagation => ("P,state,observable,t,term,cumulative", propagation_record),
        Command::Scatter => ("P,state,delta,t,expectation,increment", scatter_record),
        Command::AcDefect => ("P,state,delta,t,norm_sqr,bound,scattering,defect", ac_defect_record),
        Command::Validate => unreachable!("handled above"),
    };
    let ctx = Ctx { cfg, model, grid };
    let results: Vec<Result<Record>> = momenta.par_iter().map(|p| worker(&ctx, p)).collect();
    let mut report = RunReport {
        command: cfg.command,
        columns,
        rows: Vec::new(),
        records: Vec::new(),
        summary: Vec::new(),
        failures: Vec::new(),
    };
    for (p, r) in momenta.iter().zip(results) {
        let rec = match r {
            Ok(rec) => rec,
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => Record {
                json: json!({ "P": p, "error": e.to_string() }),
                summary: format!("P={} FAILED: {e}", short(p)),
                failures: vec![e.to_string()],
                ..Record::default()
            },
        };
        report.rows.extend(rec.rows);
        report.records.push(rec.json);
        report.summary.push(rec.summary);
        report.failures.extend(rec.failures.into_iter().map(|f| format!("P={}: {f}", short(p))));
    }
    Ok(report)
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    model: DispersionModel,
    grid: MomentumGrid,
}

impl Ctx<'_> {
    fn search_radius(&self, p: &[f64]) -> f64 {
        self.cfg.thresholds.search_radius.unwrap_or_else(|| default_search_radius(&self.model, p))
    }

    fn states(&self, prop: &Propagator, p: &[f64]) -> Result<Vec<(String, FiberState)>> {
        let cfg = self.cfg;
        Ok(match cfg.state.kind {
            StateKind::Generic => generic_states(&self.grid, p, &cfg.state_params()?)?
                .into_iter()
                .enumerate()
                .map(|(i, s)| (format!("generic-{i}"), s))
                .collect(),
            StateKind::Wavepacket => {
                let width = cfg.state_params()?.width;
                let mut out = Vec::new();
                for (i, off) in cfg.state_offsets()?.iter().enumerate() {
                    let s = relative_wavepacket(&self.grid, p, off, width).normalized()?;
                    out.push((format!("wavepacket-{i}"), s));
                }
                out
            }
            StateKind::Shell => {
                let sigma = sigma_ess(&self.model, p)?;
                let shell = lowest_shell(&prop.op, sigma)
                    .ok_or_else(|| Error::domain("no bound state below the essential spectrum"))?;
                vec![("shell".to_string(), shell.state)]
            }
            StateKind::Vacuum => vec![("vacuum".to_string(), FiberState::vacuum_only(self.grid.len()))],
        })
    }
}

fn spectrum_record(ctx: &Ctx, p: &[f64]) -> Result<Record> {
    let op = assemble_fiber(&ctx.model, &ctx.grid, p)?;
    let decomp = EigenDecomposition::secular(&op)?;
    let sigma = sigma_ess(&ctx.model, p)?;
    let shell = lowest_shell(&op, sigma).map(|s| s.energy);
    let count = ctx.cfg.spectrum.count.min(decomp.len());
    let ev = &decomp.eigenvalues()[..count];
    let rows = ev.iter().enumerate().map(|(i, &e)| format!("{},{i},{},{}", vector(p), num(e), e < sigma)).collect();
    Ok(Record {
        rows,
        json: json!({ "P": p, "sigma_ess": sigma, "shell_energy": shell, "dimension": decomp.len(), "eigenvalues": ev }),
        summary: format!(
            "P={} Sigma_ess={sigma:.10} E0={} lowest={:.10}",
            short(p),
            shell.map_or("-".to_string(), |e| format!("{e:.10}")),
            ev.first().copied().unwrap_or(f64::NAN)
        ),
        failures: Vec::new(),
    })
}

fn thresholds_record(ctx: &Ctx, p: &[f64]) -> Result<Record> {
    let set = threshold_set(&ctx.model, p, ctx.search_radius(p))?;
    let sigma = sigma_ess(&ctx.model, p)?;
    let rows = set
        .energies
        .iter()
        .zip(&set.witnesses)
        .enumerate()
        .map(|(i, (e, w))| {
            let kind = serde_json::to_value(w.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            format!("{},{i},{},{kind},{},{}", vector(p), num(*e), vector(&w.momentum), num(sigma))
        })
        .collect();
    let min = set.energies.first().copied();
    Ok(Record {
        rows,
        summary: format!(
            "P={} thresholds={} min={} Sigma_ess={sigma:.10} scan={}",
            short(p),
            set.energies.len(),
            min.map_or("-".into(), |m| format!("{m:.10}")),
            set.scan_points
        ),
        json: json!({ "P": p, "sigma_ess": sigma, "thresholds": set }),
        failures: Vec::new(),
    })
}

fn atlas_record(ctx: &Ctx, p: &[f64]) -> Result<Record> {
    let atlas = spectral_atlas(&ctx.model, &ctx.grid, &[p.to_vec()], Some(ctx.search_radius(p)))?;
    let row = &atlas.rows[0];
    Ok(Record {
        rows: atlas.csv_rows(),
        summary: format!(
            "P={} Sigma_ess={:.10} E0={} thresholds={}",
            short(p),
            row.sigma_ess,
            row.eigenvalues.first().map_or("-".into(), |e| format!("{e:.10}")),
            row.thresholds.len()
        ),
        json: serde_json::to_value(row).unwrap_or(Value::Null),
        failures: Vec::new(),
    })
}

fn mourre_record(ctx: &Ctx, p: &[f64]) -> Result<Record> {
    let cfg = ctx.cfg;
    let p0 = cfg.reference_for(p)?;
    let kappa = cfg.kappa.unwrap_or(0.1);
    let sigma = sigma_ess(&ctx.model, p)?;
    let mut failures = Vec::new();
    let commutator = match assemble_commutator(&ctx.model, &ctx.grid, p, &p0) {
        Ok(c) => json!({ "discrepancy": c.discrepancy, "scale": c.scale }),
        Err(e) => {
            failures.push(format!("commutator: {e}"));
            json!({ "error": e.to_string() })
        }
    };
    let virial = shell_virial(&ctx.model, &ctx.grid, p)?.map(|(v, scale)| json!({ "value": v, "scale": scale }));
    let lambdas: Vec<f64> = match (&cfg.lambda, &cfg.lambda_offset) {
        (Some(l), _) => l.clone(),
        (None, Some(o)) => o.iter().map(|d| sigma + d).collect(),
        (None, None) => [0.5, 1.0, 1.5].iter().map(|d| sigma + d).collect(),
    };
    let mut rows = Vec::new();
    let mut estimates = Vec::new();
    let mut min_c = f64::INFINITY;
    for &lambda in &lambdas {
        match mourre_constant(&ctx.model, &ctx.grid, p, &p0, lambda, kappa) {
            Ok(m) => {
                min_c = min_c.min(m.c_est);
                rows.push(format!(
                    "{},{},{},{},{},{},{},{},ok",
                    vector(p),
                    vector(&p0),
                    num(lambda),
                    num(kappa),
                    num(m.c_est),
                    m.n_window,
                    vector(&m.thresholds_in_window),
                    opt(m.excluded_shell)
                ));
                estimates.push(serde_json::to_value(&m).unwrap_or(Value::Null));
            }
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => {
                rows.push(format!(
                    "{},{},{},{},,,,,{}",
                    vector(p),
                    vector(&p0),
                    num(lambda),
                    num(kappa),
                    csv_text(&e.to_string())
                ));
                failures.push(format!("lambda={lambda}: {e}"));
                estimates.push(json!({ "lambda": lambda, "kappa": kappa, "error": e.to_string() }));
            }
        }
    }
    Ok(Record {
        rows,
        summary: format!("P={} windows={} min c_est={min_c:.6} Sigma_ess={sigma:.10}", short(p), lambdas.len()),
        json: json!({ "P": p, "P0": p0, "sigma_ess": sigma, "commutator": commutator, "virial": virial, "estimates": estimates }),
        failures,
    })
}

fn evolve_record(ctx: &Ctx, p: &[f64]) -> Result<Record> {
    let prop = Propagator::assemble(&ctx.model, &ctx.grid, p)?;
    let times = ctx.cfg.schedule()?.times();
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (label, psi) in ctx.states(&prop, p)? {
        let mut curve = Vec::new();
        for &t in &times {
            let out = prop.evolve_unchecked(&psi, t);
            let energy = prop.op.expectation(&out)?.re;
            let (mass, status) = match prop.monitor.check(&ctx.grid, &out, t) {
                Ok(m) => (m, "ok".to_string()),
                Err(Error::BoundaryBreach { mass, .. }) => (mass, "boundary".to_string()),
                Err(e) => return Err(e),
            };
            rows.push(format!(
                "{},{label},{},{},{},{},{},{status}",
                vector(p),
                num(t),
                num(out.norm()),
                num(energy),
                num(out.vacuum.norm_sqr()),
                num(mass)
            ));
            curve.push(json!({ "t": t, "norm": out.norm(), "energy": energy, "vacuum_weight": out.vacuum.norm_sqr(), "outer_mass": mass }));
            if status != "ok" {
                failures.push(format!("{label}: boundary mass {mass:.3e} at t = {t}"));
                break;
            }
        }
        records.push(json!({ "state": label, "curve": curve }));
    }
    Ok(Record {
        rows,
        summary: format!("P={} states={} times={}", short(p), records.len(), times.len()),
        json: json!({ "P": p, "states": records }),
        failures,
    })
}

fn resolve_observable(
    req: ObservableRequest,
    prop: &Propagator,
    model: &DispersionModel,
    psi: &FiberState,
) -> Result<PropagationObservable> {
    Ok(match req {
        ObservableRequest::Fixed(o) => o,
        ObservableRequest::AutoLargeVelocity => {
            let (r, r_prime) = large_velocity_radius(prop, model, psi)?;
            PropagationObservable::LargeVelocity { r, r_prime }
        }
    })
}

fn propagation_record(ctx: &Ctx, p: &[f64]) -> Result<Record> {
    let prop = Propagator::assemble(&ctx.model, &ctx.grid, p)?;
    let schedule = ctx.cfg.schedule()?;
    let requests = ctx.cfg.observable.resolve(ctx.grid.nu())?;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut slopes = Vec::new();
    for (label, psi) in ctx.states(&prop, p)? {
        for &req in &requests {
            let curve = resolve_observable(req, &prop, &ctx.model, &psi)
                .and_then(|obs| propagation_monitor(&prop, &ctx.model, &psi, obs, &schedule));
            match curve {
                Ok(c) => {
                    for ((t, term), cum) in c.times.iter().zip(&c.terms).zip(&c.cumulative) {
                        rows.push(format!(
                            "{},{label},{},{},{},{}",
                            vector(p),
                            c.observable.name(),
                            num(*t),
                            num(*term),
                            num(*cum)
                        ));
                    }
                    slopes.push(format!("{}:{}={:.4}", label, c.observable.name(), c.tail_slope));
                    records.push(json!({ "state": label, "curve": c }));
                }
                Err(e @ Error::Config(_)) => return Err(e),
                Err(e) => {
                    failures.push(format!("{label}: {e}"));
                    records.push(json!({ "state": label, "error": e.to_string() }));
                }
            }
        }
    }
    Ok(Record {
        rows,
        summary: format!("P={} tail slopes {}", short(p), slopes.join(" ")),
        json: json!({ "P": p, "monitors": records }),
        failures,
    })
}

fn scatter_record(ctx: &Ctx, p: &[f64]) -> Result<Record> {
    let cfg = ctx.cfg;
    let prop = Propagator::assemble(&ctx.model, &ctx.grid, p)?;
    let schedule = cfg.schedule()?;
    let deltas = cfg.deltas();
    let delta_min = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut extrapolated = Vec::new();
    for (label, psi) in ctx.states(&prop, p)? {
        let mut rec = serde_json::Map::new();
        rec.insert("state".into(), json!(label));
        match asymptotic_projection(&prop, &psi, &deltas, &schedule, cfg.delta_tolerance) {
            Ok(a) => {
                for s in &a.series {
                    for (i, (t, v)) in a.times.iter().zip(&s.values).enumerate() {
                        let inc = if i == 0 { None } else { s.cauchy.increments.get(i - 1).copied() };
                        rows.push(format!(
                            "{},{label},{},{},{},{}",
                            vector(p),
                            num(s.delta),
                            num(*t),
                            num(*v),
                            opt(inc)
                        ));
                    }
                }
                if !a.converged {
                    failures.push(format!("{label}: asymptotic observable not converged"));
                }
                extrapolated.push(a.extrapolated.map_or("-".into(), |v| format!("{v:.6}")));
                rec.insert("asymptotic".into(), serde_json::to_value(&a).unwrap_or(Value::Null));
            }
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => {
                failures.push(format!("{label}: {e}"));
                rec.insert("asymptotic_error".into(), json!(e.to_string()));
            }
        }
        let u = FiberState { vacuum: C64::default(), field: psi.field.clone() };
        let u_norm = u.norm();
        if cfg.wave.enabled && u_norm > 0.0 {
            match wave_operator(&prop, &u, &schedule, cfg.wave.tolerance * u_norm) {
                Ok(w) => {
                    if !w.converged {
                        failures.push(format!(
                            "{label}: wave operator not converged (last increment {:?})",
                            w.cauchy.last()
                        ));
                    }
                    rec.insert("wave_operator".into(), serde_json::to_value(&w).unwrap_or(Value::Null));
                }
                Err(e) => {
                    failures.push(format!("{label}: wave operator: {e}"));
                    rec.insert("wave_operator_error".into(), json!(e.to_string()));
                }
            }
            let last = schedule.last();
            let geo_schedule = TimeSchedule::new((last / 16.0).max(1.0), 2.0, 4)?;
            match geometric_identity_check(&prop, &psi, delta_min, &geo_schedule) {
                Ok(g) => {
                    rec.insert("geometric".into(), serde_json::to_value(&g).unwrap_or(Value::Null));
                }
                Err(e) => {
                    rec.insert("geometric_error".into(), json!(e.to_string()));
                }
            }
        }
        records.push(Value::Object(rec));
    }
    Ok(Record {
        rows,
        summary: format!("P={} extrapolated {}", short(p), extrapolated.join(" ")),
        json: json!({ "P": p, "states": records }),
        failures,
    })
}

fn ac_defect_record(ctx: &Ctx, p: &[f64]) -> Result<Record> {
    let cfg = ctx.cfg;
    let prop = Propagator::assemble(&ctx.model, &ctx.grid, p)?;
    let schedule = cfg.schedule()?;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let states = ctx.states(&prop, p)?;
    for (label, psi) in &states {
        for &delta in &cfg.deltas() {
            let params = AcDefectParams { delta, schedule };
            match ac_defect(&ctx.model, &prop, psi, &params) {
                Ok(d) => {
                    worst = worst.max(d.defect.abs());
                    rows.push(format!(
                        "{},{label},{},{},{},{},{},{}",
                        vector(p),
                        num(delta),
                        num(schedule.last()),
                        num(d.norm_sqr),
                        num(d.bound),
                        num(d.scattering),
                        num(d.defect)
                    ));
                    records.push(json!({ "state": label, "delta": delta, "result": d }));
                }
                Err(e @ Error::Config(_)) => return Err(e),
                Err(e) => {
                    rows.push(format!("{},{label},{},{},,,,", vector(p), num(delta), num(schedule.last())));
                    failures.push(format!("{label}, delta={delta}: {e}"));
                    records.push(json!({ "state": label, "delta": delta, "error": e.to_string() }));
                }
            }
        }
    }
    Ok(Record {
        rows,
        summary: format!("P={} states={} max |defect|={worst:.3e}", short(p), states.len()),
        json: json!({ "P": p, "defects": records }),
        failures,
    })
}

fn validate_report(cfg: &ExperimentConfig, model: &DispersionModel) -> RunReport {
    let report = model.validate_conditions(cfg.validate.r_max);
    let rows = report
        .clauses
        .iter()
        .map(|c| {
            let method = match c.method {
                crate::model::CheckMethod::Symbolic => "symbolic",
                crate::model::CheckMethod::Sampled => "sampled",
            };
            format!(
                "{},{},{method},{},{}",
                c.clause,
                c.passed,
                opt(c.witness.as_ref().map(|w| w.radius)),
                csv_text(c.witness.as_ref().map_or("", |w| w.detail.as_str()))
            )
        })
        .collect();
    let failures: Vec<String> = report.failures().map(|c| format!("{}: {}", c.clause, c.description)).collect();
    let summary = vec![if failures.is_empty() {
        format!("validate: all {} clauses pass", report.clauses.len())
    } else {
        format!("validate: {} of {} clauses fail", failures.len(), report.clauses.len())
    }];
    RunReport {
        command: Command::Validate,
        columns: "clause,passed,method,witness_radius,detail",
        rows,
        records: vec![serde_json::to_value(&report).unwrap_or(Value::Null)],
        summary,
        failures,
    }
}

/// `a.b = value` lines in key order.
fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<String>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push(format!("{key} = {other}")),
        }
    }
}

/// CSV text with a `#` header echoing the version and the effective configuration.
pub fn render_csv(report: &RunReport, config: &toml::Table) -> String {
    let mut out = String::new();
    out.push_str(&format!("# fiberscat {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("# command: {}\n", report.command.name()));
    let mut echo = Vec::new();
    flatten("", config, &mut echo);
    for line in echo {
        out.push_str("# ");
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(report.columns);
    out.push('\n');
    for row in &report.rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}

pub fn render_json(report: &RunReport, config: &toml::Table) -> String {
    let doc = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": report.command.name(),
        "config": config,
        "records": report.records,
        "failures": report.failures,
    });
    let mut s = serde_json::to_string_pretty(&doc).unwrap_or_default();
    s.push('\n');
    s
}

/// Writes `<prefix>.csv` and `<prefix>.json`, creating parent directories.
pub fn write_outputs(prefix: &str, report: &RunReport, config: &toml::Table) -> Result<(PathBuf, PathBuf)> {
    let csv = PathBuf::from(format!("{prefix}.csv"));
    let js = PathBuf::from(format!("{prefix}.json"));
    if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&csv, render_csv(report, config))?;
    fs::write(&js, render_json(report, config))?;
    Ok((csv, js))
}

/// Full CLI behavior for parsed arguments; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let (command, args) = cli.command.split();
    let (mut cfg, mut table) = match load_config(&args.config, command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
        table.insert("out".into(), toml::Value::String(out.clone()));
    }
    let report = match execute(&cfg) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONVERGENCE;
        }
    };
    if !args.quiet {
        for line in &report.summary {
            println!("{line}");
        }
    }
    let prefix = cfg.out_prefix();
    if let Err(e) = write_outputs(&prefix, &report, &table) {
        eprintln!("error: cannot write outputs for `{prefix}`: {e}");
        return EXIT_CONFIG;
    }
    for f in &report.failures {
        eprintln!("failure: {f}");
    }
    report.exit_code()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> (ExperimentConfig, toml::Table) {
        parse_config(text, None).unwrap()
    }

    #[test]
    fn decoupled_atlas_reports_the_matter_energy() {
        let (cfg, table) = config(
            r#"
            command = "atlas"
            preset = "polaron"
            rho.g = 0.0
            grid.n = 64
            grid.kmax = 4.0
            P = [0.0, 0.5, 3.0]
            "#,
        );
        let report = execute(&cfg).unwrap();
        assert_eq!(report.exit_code(), EXIT_OK);
        let csv = render_csv(&report, &table);
        let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert_eq!(data.len(), 3);
        // The flat field band puts Sigma_ess at 1, so only P^2/2 < 1 leaves a bound state.
        let e0: Vec<&str> = data.iter().map(|l| l.split(',').nth(2).unwrap()).collect();
        assert_eq!(e0[0].parse::<f64>().unwrap(), 0.0);
        assert!((e0[1].parse::<f64>().unwrap() - 0.125).abs() < 1e-14);
        assert!(e0[2].is_empty());
    }

    #[test]
    fn subcommand_overrides_the_file() {
        let (cfg, table) = parse_config(
            "command = \"atlas\"\npreset = \"nelson\"\ngrid.n = 8\ngrid.kmax = 1.0\nP = [0.1]\n",
            Some(Command::Spectrum),
        )
        .unwrap();
        assert_eq!(cfg.command, Command::Spectrum);
        assert_eq!(table["command"].as_str(), Some("spectrum"));
    }

    #[test]
    fn empty_mourre_window_is_recorded() {
        let (cfg, _) = config(
            r#"
            command = "mourre-check"
            preset = "nelson"
            grid.n = 64
            grid.kmax = 8.0
            P = [0.2]
            lambda = [-50.0]
            "#,
        );
        let report = execute(&cfg).unwrap();
        assert_eq!(report.exit_code(), EXIT_CONVERGENCE);
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].ends_with(&csv_text(report.records[0]["estimates"][0]["error"].as_str().unwrap())));
    }

    #[test]
    fn validate_polaron_passes() {
        let (cfg, _) = config("command = \"validate\"\npreset = \"polaron\"\n");
        let report = execute(&cfg).unwrap();
        assert_eq!(report.exit_code(), EXIT_OK, "{:?}", report.failures);
        assert!(report.summary[0].contains("all"));
    }
}
