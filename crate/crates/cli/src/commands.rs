//! Experiment drivers. Each writes its artifacts into the output directory
//! and returns the gates it evaluated; the caller turns failed gates into the
//! exit status.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pauli_core::diagnostics::{self, IdentitySuiteConfig};
use pauli_core::evolution::{self, h1_bound_check};
use pauli_core::snapshot::{snapshot_name, Snapshot};
use pauli_core::{make_band_limited_initial_data, make_initial_data, DiagnosticsRecord, GaugeKind, Grid, Mutation, SimState};

use crate::config::{DiagnosticsSection, RunConfig};

/// One pass/fail check on a run.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Gate {
    pub gate: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Gate {
    /// Passes when `value ≤ limit`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            gate: name.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }

    /// Passes when `value ≥ limit`.
    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            gate: name.into(),
            value,
            limit,
            passed: value >= limit,
        }
    }
}

pub fn write_gates(dir: &Path, gates: &[Gate]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("gates.csv"))?;
    for g in gates {
        w.serialize(g)?;
    }
    w.flush()?;
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn initial_state(cfg: &RunConfig, epsilon: f64, n: usize) -> Result<SimState> {
    let grid = Grid::new(n, cfg.grid_spectral.box_length)?;
    let (spec, norm) = (cfg.initial_spec()?, cfg.initial_data.normalization);
    let u = if cfg.hamiltonian_evolution.dealias {
        make_band_limited_initial_data(&spec, norm, &grid)?
    } else {
        make_initial_data(&spec, norm, &grid)?
    };
    Ok(SimState::new(
        u,
        cfg.gauge()?,
        epsilon,
        cfg.coupling()?,
        &cfg.solver_options()?,
    )?)
}

/// Running maxima behind the gates of `run`.
struct RunMonitor {
    q0: f64,
    e0: f64,
    charge_drift: f64,
    energy_drift: f64,
    energy_increase: f64,
    /// Worst `gauge residual / limit`.
    gauge_ratio: f64,
    /// Worst `‖∇u‖ / bound`.
    h1_ratio: f64,
    last_e: f64,
}

impl RunMonitor {
    fn new(first: &DiagnosticsRecord) -> Self {
        Self {
            q0: first.q,
            e0: first.e,
            charge_drift: 0.0,
            energy_drift: 0.0,
            energy_increase: 0.0,
            gauge_ratio: 0.0,
            h1_ratio: 0.0,
            last_e: first.e,
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Vec<Gate>> {
    let dir = cfg.output.directory.clone();
    prepare_dir(&dir)?;
    fs::write(dir.join("resolved_config.toml"), cfg.to_toml())?;
    let snap_dir = dir.join("snapshots");
    if cfg.output.snapshots {
        prepare_dir(&snap_dir)?;
    }
    let eps = cfg.hamiltonian_evolution.epsilon;
    let state = initial_state(cfg, eps, cfg.grid_spectral.n)?;
    let evolve_cfg = cfg.evolve_config();
    let opts = cfg.step_options()?;
    let d = &cfg.diagnostics;
    let gauge = state.gauge();
    let tol = cfg.field_solver.tolerance;

    let csv_path = dir.join("diagnostics.csv");
    let mut stream = csv::Writer::from_path(&csv_path)?;
    let mut monitor: Option<RunMonitor> = None;
    let result = evolution::evolve(state, &evolve_cfg, &opts, |s, rec| {
        stream.serialize(rec)?;
        stream.flush()?;
        if cfg.output.snapshots {
            let index = (rec.t / evolve_cfg.dt).round() as usize;
            Snapshot::from_spinor(s.u()).save(snap_dir.join(snapshot_name(index)))?;
        }
        let m = monitor.get_or_insert_with(|| RunMonitor::new(rec));
        m.charge_drift = m.charge_drift.max((rec.q - m.q0).abs() / m.q0);
        m.energy_drift = m.energy_drift.max((rec.e - m.e0).abs() / m.e0);
        if rec.t > 0.0 {
            m.energy_increase = m.energy_increase.max(rec.e - m.last_e);
        }
        m.last_e = rec.e;
        let limit = match gauge {
            GaugeKind::Darwin => d.divergence_tolerance,
            GaugeKind::Poisswell => d.gauge_factor * tol * s.a().l2_norm(),
        };
        m.gauge_ratio = m.gauge_ratio.max(rec.gauge_residual / limit.max(f64::MIN_POSITIVE));
        if eps > 0.0 {
            let h1 = h1_bound_check(s, m.e0, m.q0, d.h1_guard);
            m.h1_ratio = m.h1_ratio.max(h1.grad_norm / h1.bound);
        }
        Ok(())
    });
    drop(stream);
    let trajectory = result?;
    diagnostics::write_csv_file(&csv_path, &trajectory.records)?;

    let m = monitor.expect("initial record is always observed");
    let mut gates = vec![Gate::at_most("charge_drift", m.charge_drift, d.charge_tolerance)];
    if eps == 0.0 {
        gates.push(Gate::at_most("energy_drift", m.energy_drift, d.energy_tolerance));
    } else {
        gates.push(Gate::at_most("energy_increase", m.energy_increase / m.e0, d.energy_slack));
        gates.push(Gate::at_most("h1_bound_ratio", m.h1_ratio, 1.0));
    }
    gates.push(Gate::at_most("gauge_residual_ratio", m.gauge_ratio, 1.0));
    write_gates(&dir, &gates)?;
    Ok(gates)
}

pub fn sweep(cfg: &RunConfig) -> Result<Vec<Gate>> {
    let dir = cfg.output.directory.clone();
    prepare_dir(&dir)?;
    fs::write(dir.join("resolved_config.toml"), cfg.to_toml())?;
    let eps = &cfg.sweep.epsilons;
    let state = initial_state(cfg, eps[0], cfg.grid_spectral.n)?;
    let e = &cfg.hamiltonian_evolution;
    let report = evolution::epsilon_sweep(&state, eps, e.dt, e.t_final, &cfg.step_options()?)?;

    #[derive(serde::Serialize)]
    struct Row {
        eps_a: f64,
        eps_b: f64,
        gap: f64,
        deviation: f64,
    }
    let mut w = csv::Writer::from_path(dir.join("report.csv"))?;
    for p in &report.pairs {
        w.serialize(Row {
            eps_a: p.eps_a,
            eps_b: p.eps_b,
            gap: p.gap(),
            deviation: p.deviation,
        })?;
    }
    w.flush()?;
    let gates = vec![
        Gate::at_least("deviation_monotone", report.monotone() as u8 as f64, 1.0),
        Gate::at_least("fitted_slope", report.slope, cfg.sweep.min_slope),
    ];
    write_gates(&dir, &gates)?;
    Ok(gates)
}

pub fn verify(seed: u64, diag: &DiagnosticsSection, dir: &Path) -> Result<Vec<Gate>> {
    prepare_dir(dir)?;
    let suite = IdentitySuiteConfig {
        sizes: diag.identity_sizes.clone(),
        samples: diag.identity_samples,
        tolerance: diag.identity_tolerance,
    };
    let report = diagnostics::identity_suite_with(seed, &suite, Mutation::None);
    fs::write(dir.join("identities.csv"), report.to_string())?;
    let gates: Vec<Gate> = report
        .results
        .iter()
        .map(|r| Gate::at_most(&format!("{}@{}", r.name, r.n), r.max_deviation, r.tolerance))
        .collect();
    write_gates(dir, &gates)?;
    Ok(gates)
}

pub fn convergence(cfg: &RunConfig) -> Result<Vec<Gate>> {
    let dir = cfg.output.directory.clone();
    prepare_dir(&dir)?;
    fs::write(dir.join("resolved_config.toml"), cfg.to_toml())?;
    let opts = cfg.step_options()?;
    let eps = cfg.hamiltonian_evolution.epsilon;
    let base = cfg.evolve_config();
    let quiet = |_: &SimState, _: &DiagnosticsRecord| Ok(());

    if !cfg.convergence.ns.is_empty() {
        #[derive(serde::Serialize)]
        struct Row {
            n: usize,
            q: f64,
            e: f64,
            energy_difference: f64,
        }
        let mut finals = Vec::new();
        for &n in &cfg.convergence.ns {
            let state = initial_state(cfg, eps, n)?;
            let evolve_cfg = pauli_core::EvolveConfig { stride: usize::MAX, ..base };
            let tr = evolution::evolve(state, &evolve_cfg, &opts, quiet)?;
            let last = tr.records.last().expect("final record");
            finals.push((n, last.q, last.e));
        }
        let finest = finals.iter().max_by_key(|f| f.0).expect("non-empty").2;
        let mut w = csv::Writer::from_path(dir.join("convergence.csv"))?;
        for (n, q, e) in finals {
            w.serialize(Row {
                n,
                q,
                e,
                energy_difference: (e - finest).abs(),
            })?;
        }
        w.flush()?;
        write_gates(&dir, &[])?;
        return Ok(Vec::new());
    }

    let dts = if cfg.convergence.dts.is_empty() {
        let dt = cfg.hamiltonian_evolution.dt;
        vec![dt, dt / 2.0, dt / 4.0]
    } else {
        cfg.convergence.dts.clone()
    };
    let initial = initial_state(cfg, eps, cfg.grid_spectral.n)?;
    let mut finals = Vec::new();
    for &dt in &dts {
        let evolve_cfg = pauli_core::EvolveConfig { dt, stride: usize::MAX, ..base };
        let tr = evolution::evolve(initial.clone(), &evolve_cfg, &opts, quiet)?;
        let last = tr.records.last().expect("final record").clone();
        finals.push((dt, last, tr.final_state));
    }
    let diffs: Vec<f64> = finals
        .windows(2)
        .map(|w| w[0].2.u().sub(w[1].2.u()).map(|d| d.l2_norm()))
        .collect::<pauli_core::Result<_>>()?;
    let orders: Vec<f64> = (1..diffs.len())
        .map(|i| (diffs[i - 1] / diffs[i]).ln() / (dts[i - 1] / dts[i]).ln())
        .collect();

    #[derive(serde::Serialize)]
    struct Row {
        dt: f64,
        q: f64,
        e: f64,
        difference_to_next: Option<f64>,
        observed_order: Option<f64>,
    }
    let mut w = csv::Writer::from_path(dir.join("convergence.csv"))?;
    for (i, (dt, rec, _)) in finals.iter().enumerate() {
        w.serialize(Row {
            dt: *dt,
            q: rec.q,
            e: rec.e,
            difference_to_next: diffs.get(i).copied(),
            observed_order: i.checked_sub(1).and_then(|j| orders.get(j)).copied(),
        })?;
    }
    w.flush()?;
    let order = opts.scheme.order() as f64;
    let window = cfg.convergence.order_window;
    let mut gates = Vec::new();
    for (i, &p) in orders.iter().enumerate() {
        let name = format!("observed_order_{}", i + 1);
        gates.push(Gate::at_least(&format!("{name}_low"), p, order - window));
        gates.push(Gate::at_most(&format!("{name}_high"), p, order + window));
    }
    write_gates(&dir, &gates)?;
    Ok(gates)
}

/// Machine-readable record of a failed command, written as `error.toml`.
#[derive(Debug, serde::Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl ErrorRecord {
    pub fn from_error(err: &anyhow::Error) -> Self {
        if let Some(c) = err.downcast_ref::<crate::config::ConfigError>() {
            return Self {
                kind: c.kind().into(),
                message: c.to_string(),
                key: c.key().map(str::to_string),
                t: None,
            };
        }
        if let Some(e) = err.downcast_ref::<pauli_core::Error>() {
            use pauli_core::Error as E;
            let (kind, t) = match e {
                E::FieldSolveFailure { t, .. } => ("FieldSolveFailure", Some(*t)),
                E::BlowUpGuardTriggered { t, .. } => ("BlowUpGuardTriggered", Some(*t)),
                E::NonConvergence { .. } => ("NonConvergence", None),
                E::PicardNonConvergence { .. } => ("PicardNonConvergence", None),
                E::NonFinite => ("NonFinite", None),
                E::Snapshot(_) => ("Snapshot", None),
                E::Io(_) | E::Csv(_) => ("Io", None),
                _ => ("InvalidArgument", None),
            };
            return Self {
                kind: kind.into(),
                message: e.to_string(),
                key: None,
                t,
            };
        }
        Self {
            kind: "Error".into(),
            message: format!("{err:#}"),
            key: None,
            t: None,
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("error.toml");
        fs::write(&path, toml::to_string(self).expect("error record serializes"))?;
        Ok(path)
    }
}

/// Summary line per gate, as printed to stdout.
pub fn describe(gates: &[Gate]) -> String {
    gates
        .iter()
        .map(|g| {
            format!(
                "{:<28} {:>12.4e}  limit {:>10.3e}  {}\n",
                g.gate,
                g.value,
                g.limit,
                if g.passed { "pass" } else { "FAIL" }
            )
        })
        .collect()
}
