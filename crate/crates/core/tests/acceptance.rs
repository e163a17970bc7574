//! Acceptance suite at the reference resolution: n = 32 on the 2π torus with
//! the Gaussian reference packet. One line per criterion; the process exits
//! non-zero when any criterion fails.
//!
//! `cargo test --release --test acceptance -- 4 7` runs a subset.

use std::cell::OnceCell;
use std::f64::consts::PI;
use std::time::Instant;

use pauli_core::diagnostics::identity_suite;
use pauli_core::evolution::{self, h1_bound_check, DEFAULT_H1_GUARD};
use pauli_core::field_solver::{self, a_equation_residual};
use pauli_core::initial::reference_packet;
use pauli_core::{
    make_band_limited_initial_data, ASolveOptions, Coupling, DiagnosticsRecord, EvolveConfig, FieldSampler,
    GaugeKind, Grid, IdentityReport, InitialGuess, SimState, StepOptions, StepScheme,
};

const N: usize = 32;
const SEED: u64 = 20240611;
const SOLVER_TOL: f64 = 1e-10;

// criterion 1, 2
const IDENTITY_TOL: f64 = 1e-11;
const IDENTITY_SAMPLES: usize = 100;
// criterion 3
const DIV_A_TOL: f64 = 1e-12;
const LORENZ_FACTOR: f64 = 10.0;
// criterion 4
const CHARGE_TOL: f64 = 1e-8;
const ENERGY_TOL: f64 = 1e-6;
const CONSERVATION_ORDER: f64 = 4.0;
const CONSERVATION_DT: f64 = 1e-3;
const ORDER_DTS: [f64; 3] = [0.01, 0.005, 0.0025];
// criterion 5
const CONTINUITY_ORDER: f64 = 2.0;
// criterion 6
const DISSIPATION_EPS: [f64; 2] = [0.05, 0.1];
const ENERGY_SLACK: f64 = 1e-8;
const DISSIPATION_REL_TOL: f64 = 1e-4;
const DISSIPATION_DT: f64 = 0.01;
// criterion 7
const GUESS_AGREEMENT: f64 = 1e-9;
const EXPECTATION_TOL: f64 = 1e-9;
// criterion 8
const SWEEP_EPS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
const SWEEP_T: f64 = 0.5;
const SWEEP_DT: f64 = 0.005;
const SWEEP_SLOPE: f64 = 0.9;
// criterion 9
const BOUND_EPS: f64 = 0.1;
const BOUND_T: f64 = 10.0;
const BOUND_DT: f64 = 0.01;
// criterion 10
const CROSS_T: f64 = 0.5;
const CROSS_DT: f64 = 0.005;
const CROSS_TOL: f64 = 1e-6;

fn grid() -> Grid {
    Grid::new(N, 2.0 * PI).unwrap()
}

fn reference_state(gauge: GaugeKind, epsilon: f64) -> SimState {
    let g = grid();
    let u = make_band_limited_initial_data(&reference_packet(g.box_length()), 1.0, &g).unwrap();
    SimState::new(u, gauge, epsilon, Coupling::Full, &ASolveOptions::default()).unwrap()
}

/// A recorded trajectory with `‖A‖` at each record.
struct Run {
    records: Vec<DiagnosticsRecord>,
    a_norms: Vec<f64>,
    final_state: SimState,
    gauge: GaugeKind,
}

impl Run {
    fn rel_charge_drift(&self) -> f64 {
        let q0 = self.records[0].q;
        self.records.iter().map(|r| (r.q - q0).abs() / q0).fold(0.0, f64::max)
    }

    fn rel_energy_drift(&self) -> f64 {
        let e0 = self.records[0].e;
        self.records.iter().map(|r| (r.e - e0).abs() / e0).fold(0.0, f64::max)
    }

    fn max_continuity(&self) -> f64 {
        self.records.iter().map(|r| r.continuity_residual).fold(0.0, f64::max)
    }

    /// Worst gauge residual relative to its limit.
    fn gauge_ratio(&self) -> f64 {
        self.records
            .iter()
            .zip(&self.a_norms)
            .map(|(r, &a)| {
                let limit = match self.gauge {
                    GaugeKind::Darwin => DIV_A_TOL,
                    GaugeKind::Poisswell => LORENZ_FACTOR * SOLVER_TOL * a,
                };
                r.gauge_residual / limit
            })
            .fold(0.0, f64::max)
    }
}

fn run(initial: SimState, dt: f64, t_final: f64, stride: usize, scheme: StepScheme) -> Run {
    let gauge = initial.gauge();
    let cfg = EvolveConfig {
        dt,
        t_final,
        stride,
        ..Default::default()
    };
    let opts = StepOptions {
        scheme,
        ..Default::default()
    };
    let mut a_norms = Vec::new();
    let tr = evolution::evolve(initial, &cfg, &opts, |s, _| {
        a_norms.push(s.a().l2_norm());
        Ok(())
    })
    .unwrap();
    Run {
        records: tr.records,
        a_norms,
        final_state: tr.final_state,
        gauge,
    }
}

fn order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

#[derive(Default)]
struct Runs {
    identities: OnceCell<IdentityReport>,
    conservation: OnceCell<Run>,
    ladder: OnceCell<Vec<Run>>,
    dissipation: OnceCell<Vec<(f64, Run)>>,
    cross: OnceCell<Vec<(GaugeKind, Run, Run)>>,
}

impl Runs {
    fn identities(&self) -> &IdentityReport {
        self.identities.get_or_init(|| identity_suite(SEED))
    }

    fn conservation(&self) -> &Run {
        self.conservation
            .get_or_init(|| run(reference_state(GaugeKind::Darwin, 0.0), CONSERVATION_DT, 1.0, 10, StepScheme::Rk4))
    }

    /// dt-halving ladder at ε = 0, recorded every 0.1 time units.
    fn ladder(&self) -> &[Run] {
        self.ladder.get_or_init(|| {
            let init = reference_state(GaugeKind::Darwin, 0.0);
            ORDER_DTS
                .iter()
                .map(|&dt| run(init.clone(), dt, 1.0, (0.1 / dt).round() as usize, StepScheme::Rk4))
                .collect()
        })
    }

    fn dissipation(&self) -> &[(f64, Run)] {
        self.dissipation.get_or_init(|| {
            let mut out = Vec::new();
            for gauge in [GaugeKind::Darwin, GaugeKind::Poisswell] {
                for eps in DISSIPATION_EPS {
                    out.push((eps, run(reference_state(gauge, eps), DISSIPATION_DT, 1.0, 1, StepScheme::Rk4)));
                }
            }
            out
        })
    }

    fn cross(&self) -> &[(GaugeKind, Run, Run)] {
        self.cross.get_or_init(|| {
            [GaugeKind::Darwin, GaugeKind::Poisswell]
                .into_iter()
                .map(|gauge| {
                    let init = reference_state(gauge, 0.0);
                    let stride = (0.1 / CROSS_DT).round() as usize;
                    let a = run(init.clone(), CROSS_DT, CROSS_T, stride, StepScheme::Rk4);
                    let b = run(init, CROSS_DT, CROSS_T, stride, StepScheme::SemigroupPicard);
                    (gauge, a, b)
                })
                .collect()
        })
    }
}

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn identity_criterion(runs: &Runs, name: &str) -> Verdict {
    let report = runs.identities();
    let mut worst = 0.0f64;
    let mut samples = usize::MAX;
    let mut parts = Vec::new();
    for r in report.results.iter().filter(|r| r.name == name) {
        worst = worst.max(r.max_deviation);
        samples = samples.min(r.samples);
        parts.push(format!("n={} {:.2e}", r.n, r.max_deviation));
    }
    verdict(
        worst <= IDENTITY_TOL && !parts.is_empty() && samples >= IDENTITY_SAMPLES,
        format!("{samples} samples; {} (tol {IDENTITY_TOL:.0e})", parts.join(", ")),
    )
}

fn c1(runs: &Runs) -> Verdict {
    identity_criterion(runs, "spin_laplacian_decomposition")
}

fn c2(runs: &Runs) -> Verdict {
    identity_criterion(runs, "current_forms")
}

fn c3(runs: &Runs) -> Verdict {
    let mut darwin = 0.0f64;
    let mut poisswell = 0.0f64;
    let mut all: Vec<&Run> = vec![runs.conservation()];
    all.extend(runs.dissipation().iter().map(|(_, r)| r));
    for (_, a, b) in runs.cross() {
        all.push(a);
        all.push(b);
    }
    for r in all {
        let ratio = r.gauge_ratio();
        match r.gauge {
            GaugeKind::Darwin => darwin = darwin.max(ratio),
            GaugeKind::Poisswell => poisswell = poisswell.max(ratio),
        }
    }
    verdict(
        darwin <= 1.0 && poisswell <= 1.0,
        format!(
            "max ‖div A‖ = {:.2e} (tol {DIV_A_TOL:.0e}); max ‖div A + ∂tV‖ / (10·tol·‖A‖) = {poisswell:.2e} (tol 1)",
            darwin * DIV_A_TOL
        ),
    )
}

fn c4(runs: &Runs) -> Verdict {
    let main = runs.conservation();
    let (dq, de) = (main.rel_charge_drift(), main.rel_energy_drift());
    let ladder = runs.ladder();
    let qs: Vec<f64> = ladder.iter().map(Run::rel_charge_drift).collect();
    let es: Vec<f64> = ladder.iter().map(Run::rel_energy_drift).collect();
    let pq = [order(qs[0], qs[1], 2.0), order(qs[1], qs[2], 2.0)];
    let pe = [order(es[0], es[1], 2.0), order(es[1], es[2], 2.0)];
    let min_order = pq.iter().chain(&pe).copied().fold(f64::INFINITY, f64::min);
    verdict(
        dq <= CHARGE_TOL && de <= ENERGY_TOL && min_order >= CONSERVATION_ORDER,
        format!(
            "dt=1e-3: |ΔQ|/Q0 = {dq:.2e} (tol {CHARGE_TOL:.0e}), |ΔE|/E0 = {de:.2e} (tol {ENERGY_TOL:.0e}); \
             orders Q {:.2}, {:.2}  E {:.2}, {:.2} (min {CONSERVATION_ORDER})",
            pq[0], pq[1], pe[0], pe[1]
        ),
    )
}

fn c5(runs: &Runs) -> Verdict {
    let ladder = runs.ladder();
    let r: Vec<f64> = ladder.iter().map(Run::max_continuity).collect();
    let p = [order(r[0], r[1], 2.0), order(r[1], r[2], 2.0)];
    let c: Vec<f64> = r.iter().zip(ORDER_DTS).map(|(r, dt)| r / (dt * dt)).collect();
    verdict(
        p[0] >= CONTINUITY_ORDER && p[1] >= CONTINUITY_ORDER,
        format!(
            "max residual {:.3e}, {:.3e}, {:.3e}; residual/dt² {:.4}, {:.4}, {:.4}; orders {:.4}, {:.4} (min {CONTINUITY_ORDER})",
            r[0], r[1], r[2], c[0], c[1], c[2], p[0], p[1]
        ),
    )
}

fn c6(runs: &Runs) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (eps, r) in runs.dissipation() {
        let e0 = r.records[0].e;
        let rise = r
            .records
            .windows(2)
            .map(|w| (w[1].e - w[0].e) / e0)
            .fold(f64::NEG_INFINITY, f64::max);
        let rate = r.records.iter().map(|x| x.dissipation_rate.abs()).fold(0.0, f64::max);
        let resid = r.records.iter().map(|x| x.dissipation_residual).fold(0.0, f64::max) / rate;
        let dq = r.rel_charge_drift();
        ok &= rise <= ENERGY_SLACK && resid <= DISSIPATION_REL_TOL && dq <= CHARGE_TOL;
        parts.push(format!(
            "{} ε={eps}: max ΔE/E0 {rise:.1e}, identity {resid:.1e}, |ΔQ|/Q0 {dq:.1e}",
            r.gauge.name()
        ));
    }
    verdict(
        ok,
        format!(
            "{} (tol: rise {ENERGY_SLACK:.0e}, identity {DISSIPATION_REL_TOL:.0e}, charge {CHARGE_TOL:.0e})",
            parts.join("; ")
        ),
    )
}

fn c7(_: &Runs) -> Verdict {
    let g = grid();
    let u = make_band_limited_initial_data(&reference_packet(g.box_length()), 1.0, &g).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for gauge in [GaugeKind::Darwin, GaugeKind::Poisswell] {
        let cold = ASolveOptions {
            initial_guess: InitialGuess::Zero,
            ..Default::default()
        };
        let a0 = field_solver::solve_a(&u, gauge, &cold, None).unwrap();
        let mut sampler = FieldSampler::new(&g, SEED);
        let guess = sampler.vector_in_band(3, 0.5);
        let a1 = field_solver::solve_a(&u, gauge, &ASolveOptions::default(), Some(&guess)).unwrap();
        let independent = a_equation_residual(&u, &a0.field, gauge).unwrap();
        let gap = a0.field.sub(&a1.field).unwrap().l2_norm();
        let state = SimState::new(u.clone(), gauge, 0.0, Coupling::Full, &ASolveOptions::default()).unwrap();
        let uhu = evolution::expectation_h(&state).relative_gap();
        ok &= a0.residual <= SOLVER_TOL
            && a1.residual <= SOLVER_TOL
            && independent <= SOLVER_TOL
            && gap <= GUESS_AGREEMENT
            && uhu <= EXPECTATION_TOL;
        parts.push(format!(
            "{}: residual {:.1e}/{:.1e} (recomputed {independent:.1e}), guesses differ by {gap:.1e}, (u,Hu) gap {uhu:.1e}",
            gauge.name(),
            a0.residual,
            a1.residual
        ));
    }
    verdict(
        ok,
        format!(
            "{} (tol: residual {SOLVER_TOL:.0e}, agreement {GUESS_AGREEMENT:.0e}, (u,Hu) {EXPECTATION_TOL:.0e})",
            parts.join("; ")
        ),
    )
}

fn c8(_: &Runs) -> Verdict {
    let init = reference_state(GaugeKind::Darwin, SWEEP_EPS[0]);
    let report = evolution::epsilon_sweep(&init, &SWEEP_EPS, SWEEP_DT, SWEEP_T, &StepOptions::default()).unwrap();
    let devs: Vec<String> = report
        .pairs
        .iter()
        .map(|p| format!("{}|{}: {:.3e}", p.eps_a, p.eps_b, p.deviation))
        .collect();
    verdict(
        report.monotone() && report.slope >= SWEEP_SLOPE,
        format!(
            "{}; monotone {}; slope {:.3} (min {SWEEP_SLOPE})",
            devs.join(", "),
            report.monotone(),
            report.slope
        ),
    )
}

fn c9(_: &Runs) -> Verdict {
    let init = reference_state(GaugeKind::Darwin, BOUND_EPS);
    let (e0, q0) = (evolution::energy(&init), evolution::charge(&init));
    let cfg = EvolveConfig {
        dt: BOUND_DT,
        t_final: BOUND_T,
        stride: 10,
        ..Default::default()
    };
    let mut worst = f64::INFINITY;
    let mut bound = 0.0;
    let mut max_grad = 0.0f64;
    let mut checks = 0;
    let mut all = true;
    evolution::evolve(init, &cfg, &StepOptions::default(), |s, _| {
        let c = h1_bound_check(s, e0, q0, DEFAULT_H1_GUARD);
        all &= c.passed;
        worst = worst.min(c.margin);
        bound = c.bound;
        max_grad = max_grad.max(c.grad_norm);
        checks += 1;
        Ok(())
    })
    .unwrap();
    verdict(
        all,
        format!("{checks} strides; max ‖∇u‖ = {max_grad:.3} vs bound {bound:.3} (C_guard {DEFAULT_H1_GUARD}); min margin {worst:.3}"),
    )
}

fn c10(runs: &Runs) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (gauge, a, b) in runs.cross() {
        let d = a.final_state.u().sub(b.final_state.u()).unwrap().l2_norm();
        ok &= d <= CROSS_TOL;
        parts.push(format!("{} {d:.2e}", gauge.name()));
    }
    verdict(
        ok,
        format!("‖u_RK4 − u_Picard‖ at T={CROSS_T}: {} (tol {CROSS_TOL:.0e})", parts.join(", ")),
    )
}

type Criterion = (u32, &'static str, fn(&Runs) -> Verdict);

const CRITERIA: [Criterion; 10] = [
    (1, "spin-magnetic Laplacian identity", c1),
    (2, "current equivalence", c2),
    (3, "gauge conditions", c3),
    (4, "conservation", c4),
    (5, "continuity", c5),
    (6, "dissipation", c6),
    (7, "elliptic solver", c7),
    (8, "epsilon-Cauchy rate", c8),
    (9, "H1 a priori bound", c9),
    (10, "cross-scheme agreement", c10),
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let runs = Runs::default();
    let mut failed = Vec::new();
    let start = Instant::now();
    for (id, name, check) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let v = check(&runs);
        println!(
            "criterion {id:>2} {name:<34} {}  [{:.0}s] {}",
            if v.passed { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64(),
            v.detail
        );
        if !v.passed {
            failed.push(id);
        }
    }
    println!(
        "acceptance: {} failed {:?} in {:.0}s",
        if failed.is_empty() { "all passed," } else { "some criteria" },
        failed,
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
