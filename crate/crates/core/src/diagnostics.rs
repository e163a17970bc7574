//! Residuals that certify conservation laws and operator identities on
//! discrete trajectories, plus the CSV record format.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evolution::{self, SimState};
use crate::field::VectorField;
use crate::field_solver;
use crate::grid::Grid;
use crate::magnetic::{self, CurrentForm, SpinLaplacianMode};
use crate::random::FieldSampler;
use crate::real::{Cplx, Real};
use crate::spectral;
use crate::spinor::{charge_density, inner_product, mat_mul, sigma_dot, spin_density, PauliMatrix, SpinorField};

/// One row of `diagnostics.csv`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "uHu")]
    pub u_hu: f64,
    #[serde(rename = "H1_norm")]
    pub h1: f64,
    #[serde(rename = "Hs_norm")]
    pub hs: f64,
    /// Zero on the first record, which has no predecessor.
    pub continuity_residual: f64,
    pub gauge_residual: f64,
    pub dissipation_residual: f64,
    pub solver_iters: usize,
    pub solver_residual: f64,
    /// `−4ε(‖Hu‖² − (u,Hu)²/‖u‖²)`
    #[serde(skip)]
    pub dissipation_rate: f64,
    /// `‖Hu‖²‖u‖² − (u,Hu)²`, non-negative by Cauchy–Schwarz.
    #[serde(skip)]
    pub cauchy_schwarz_gap: f64,
    #[serde(skip)]
    pub hu_norm_sq: f64,
}

impl DiagnosticsRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.q,
            self.e,
            self.u_hu,
            self.h1,
            self.hs,
            self.continuity_residual,
            self.gauge_residual,
            self.dissipation_residual,
            self.solver_residual,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

/// `−4ε(‖Hu‖² − (u,Hu)²/‖u‖²)` together with the raw Cauchy–Schwarz gap.
pub fn dissipation_rate<T: Real>(state: &SimState<T>) -> (f64, f64) {
    let hu2 = state.hu().l2_norm_sq().as_f64();
    let u2 = state.u().l2_norm_sq().as_f64();
    let uhu = evolution::expectation_h(state).direct.as_f64();
    let gap = hu2 * u2 - uhu * uhu;
    let eps = state.epsilon().as_f64();
    let rate = if u2 > 0.0 { -4.0 * eps * gap / u2 } else { 0.0 };
    (rate, gap)
}

/// `‖(|u_next|² − |u_prev|²)/dt + div J(u_mid, A_mid)‖` with midpoint averages
/// of `u` and `A`. Only the ε = 0 flow satisfies the continuity equation.
pub fn continuity_residual<T: Real>(prev: &SimState<T>, next: &SimState<T>, dt: T) -> Result<T> {
    let half = Cplx::new(T::half(), T::zero());
    let mut u_mid = prev.u().add(next.u())?;
    u_mid.scale(half);
    let mut a_mid = prev.a().clone();
    a_mid.axpy(T::one(), next.a())?;
    a_mid.scale(T::half());
    let j = magnetic::current_density(&u_mid, &a_mid)?;
    let div_j = spectral::divergence(&j);
    let mut drho = charge_density(next.u()).sub(&charge_density(prev.u()))?;
    drho.scale(T::one() / dt);
    drho.axpy(T::one(), &div_j)?;
    Ok(drho.l2_norm())
}

/// Diagnostics of one state; `previous` is the state one step earlier.
pub fn record<T: Real>(
    state: &SimState<T>,
    previous: Option<(&SimState<T>, T)>,
    hs_index: T,
) -> Result<DiagnosticsRecord> {
    let u = state.u();
    let continuity = match previous {
        Some((prev, dt)) => continuity_residual(prev, state, dt)?.as_f64(),
        None => 0.0,
    };
    let (rate, gap) = dissipation_rate(state);
    let tel = state.telemetry();
    Ok(DiagnosticsRecord {
        t: state.t().as_f64(),
        q: evolution::charge(state).as_f64(),
        e: evolution::energy(state).as_f64(),
        u_hu: evolution::expectation_h(state).direct.as_f64(),
        h1: spectral::sobolev_norm(u, T::one(), false).as_f64(),
        hs: spectral::sobolev_norm(u, hs_index, false).as_f64(),
        continuity_residual: continuity,
        gauge_residual: field_solver::gauge_residual(u, state.a(), state.gauge())?.as_f64(),
        dissipation_residual: 0.0,
        solver_iters: tel.iterations,
        solver_residual: tel.residual,
        dissipation_rate: rate,
        cauchy_schwarz_gap: gap,
        hu_norm_sq: state.hu().l2_norm_sq().as_f64(),
    })
}

/// Second-order finite-difference derivative of `y(t)` on a possibly
/// non-uniform grid, one-sided at the ends. Needs at least three points.
pub fn time_derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    assert_eq!(n, y.len());
    if n < 3 {
        return vec![0.0; n];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let h1 = t[i] - t[i - 1];
        let h2 = t[i + 1] - t[i];
        d[i] = -h2 / (h1 * (h1 + h2)) * y[i - 1]
            + (h2 - h1) / (h1 * h2) * y[i]
            + h1 / (h2 * (h1 + h2)) * y[i + 1];
    }
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * y[0] + (h1 + h2) / (h1 * h2) * y[1]
        - h1 / (h2 * (h1 + h2)) * y[2];
    let (h1, h2) = (t[n - 2] - t[n - 3], t[n - 1] - t[n - 2]);
    d[n - 1] = h2 / (h1 * (h1 + h2)) * y[n - 3] - (h1 + h2) / (h1 * h2) * y[n - 2]
        + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * y[n - 1];
    d
}

/// `|dE/dt − rate|` per record, with `dE/dt` from [`time_derivative`].
/// Fewer than three records give zeros.
pub fn dissipation_residual(records: &[DiagnosticsRecord]) -> Vec<f64> {
    if records.len() < 3 {
        return vec![0.0; records.len()];
    }
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let e: Vec<f64> = records.iter().map(|r| r.e).collect();
    time_derivative(&t, &e)
        .iter()
        .zip(records)
        .map(|(d, r)| (d - r.dissipation_rate).abs())
        .collect()
}

pub fn fill_dissipation_residuals(records: &mut [DiagnosticsRecord]) {
    let res = dissipation_residual(records);
    for (r, x) in records.iter_mut().zip(res) {
        r.dissipation_residual = x;
    }
}

pub fn write_csv<W: Write>(writer: W, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: impl AsRef<Path>, records: &[DiagnosticsRecord]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(f), records)
}

pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Vec<DiagnosticsRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Deliberate operator corruptions used to check that the identity suite
/// notices a broken implementation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Sign of the Stern–Gerlach term `σ·B` flipped in the decomposed Pauli operator.
    SternGerlachSign,
    /// Sign of the spin current `½∇×⟨u,σu⟩` flipped.
    SpinCurrentSign,
    /// Leray projection replaced by the identity.
    LerayIdentity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentitySuiteConfig {
    pub sizes: Vec<usize>,
    pub samples: usize,
    pub tolerance: f64,
}

impl Default for IdentitySuiteConfig {
    fn default() -> Self {
        Self {
            sizes: vec![8, 16, 32],
            samples: 100,
            tolerance: 1e-11,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityResult {
    pub name: &'static str,
    pub n: usize,
    pub samples: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl IdentityResult {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub seed: u64,
    pub results: Vec<IdentityResult>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(IdentityResult::passed)
    }

    pub fn failures(&self) -> Vec<&IdentityResult> {
        self.results.iter().filter(|r| !r.passed()).collect()
    }

    /// Largest deviation of a named identity at grid size `n`.
    pub fn deviation(&self, name: &str, n: usize) -> Option<f64> {
        self.results
            .iter()
            .find(|r| r.name == name && r.n == n)
            .map(|r| r.max_deviation)
    }
}

impl fmt::Display for IdentityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "identity,n,samples,max_deviation,tolerance,status")?;
        for r in &self.results {
            writeln!(
                f,
                "{},{},{},{:.6e},{:.1e},{}",
                r.name,
                r.n,
                r.samples,
                r.max_deviation,
                r.tolerance,
                if r.passed() { "pass" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

pub const IDENTITIES: [&str; 8] = [
    "pauli_product_law",
    "sigma_vector_product",
    "spin_laplacian_decomposition",
    "magnetic_laplacian_expansion",
    "pauli_operator_symmetry",
    "current_forms",
    "leray_divergence_free",
    "leray_idempotent",
];

fn rel_dist(a: &SpinorField<f64>, b: &SpinorField<f64>) -> f64 {
    let scale = a.l2_norm().max(b.l2_norm());
    if scale == 0.0 {
        0.0
    } else {
        a.sub(b).expect("same grid").l2_norm() / scale
    }
}

fn rel_dist_vec(a: &VectorField<f64>, b: &VectorField<f64>) -> f64 {
    let scale = a.l2_norm().max(b.l2_norm());
    if scale == 0.0 {
        0.0
    } else {
        a.sub(b).expect("same grid").l2_norm() / scale
    }
}

/// `σ_iσ_j = δ_ij I + i ε_ijk σ_k`, entrywise maximum error.
fn product_law_defect() -> f64 {
    let eye = [[Cplx::new(1.0, 0.0), Cplx::new(0.0, 0.0)], [Cplx::new(0.0, 0.0), Cplx::new(1.0, 0.0)]];
    let mut worst = 0.0f64;
    for (i, si) in PauliMatrix::ALL.iter().enumerate() {
        for (j, sj) in PauliMatrix::ALL.iter().enumerate() {
            let prod = mat_mul(&si.entries::<f64>(), &sj.entries::<f64>());
            let mut expected = [[Cplx::new(0.0, 0.0); 2]; 2];
            if i == j {
                expected = eye;
            } else {
                let k = 3 - i - j;
                let sign = if (j + 3 - i) % 3 == 1 { 1.0 } else { -1.0 };
                let sk = PauliMatrix::ALL[k].entries::<f64>();
                for r in 0..2 {
                    for c in 0..2 {
                        expected[r][c] = sk[r][c] * Cplx::new(0.0, sign);
                    }
                }
            }
            for r in 0..2 {
                for c in 0..2 {
                    worst = worst.max((prod[r][c] - expected[r][c]).norm());
                }
            }
        }
    }
    worst
}

fn decomposed_pauli(u: &SpinorField<f64>, a: &VectorField<f64>, mutation: Mutation) -> SpinorField<f64> {
    if mutation == Mutation::SternGerlachSign {
        let lap = magnetic::magnetic_laplacian(u, a).unwrap();
        let sb = sigma_dot(&magnetic::magnetic_field(a), u).unwrap();
        lap.sub(&sb).unwrap()
    } else {
        magnetic::spin_magnetic_laplacian(u, a, SpinLaplacianMode::Decomposed).unwrap()
    }
}

fn pauli_current(u: &SpinorField<f64>, a: &VectorField<f64>, mutation: Mutation) -> VectorField<f64> {
    let j = magnetic::current_density_with(u, a, CurrentForm::Pauli).unwrap();
    if mutation == Mutation::SpinCurrentSign {
        let c = spectral::curl(&spin_density(u));
        let mut out = j;
        out.axpy(-1.0, &c).unwrap();
        out
    } else {
        j
    }
}

fn leray(v: &VectorField<f64>, mutation: Mutation) -> VectorField<f64> {
    if mutation == Mutation::LerayIdentity {
        v.clone()
    } else {
        spectral::leray_project(v)
    }
}

/// Runs every algebraic identity on random band-limited fields.
pub fn identity_suite(seed: u64) -> IdentityReport {
    identity_suite_with(seed, &IdentitySuiteConfig::default(), Mutation::None)
}

pub fn identity_suite_with(seed: u64, cfg: &IdentitySuiteConfig, mutation: Mutation) -> IdentityReport {
    let mut results = Vec::new();
    for &n in &cfg.sizes {
        let grid = Grid::<f64>::new(n, 2.0 * std::f64::consts::PI).expect("valid size");
        let mut sampler = FieldSampler::new(&grid, seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut worst = [0.0f64; 8];
        worst[0] = product_law_defect();
        for _ in 0..cfg.samples {
            let u = sampler.spinor_band_limited(1.0);
            let w = sampler.spinor_band_limited(1.0);
            let a = sampler.vector_band_limited(0.5);
            let b = sampler.vector_band_limited(0.5);

            // (σ·a)(σ·b)u = (a·b)u + iσ·(a×b)u
            let lhs = sigma_dot(&a, &sigma_dot(&b, &u).unwrap()).unwrap();
            let ab: Vec<f64> = (0..grid.len())
                .map(|i| {
                    let (x, y) = (a.at(i), b.at(i));
                    x[0] * y[0] + x[1] * y[1] + x[2] * y[2]
                })
                .collect();
            let cross = VectorField::from_components(&grid, [0, 1, 2].map(|k| {
                (0..grid.len())
                    .map(|i| {
                        let (x, y) = (a.at(i), b.at(i));
                        let (p, q) = ((k + 1) % 3, (k + 2) % 3);
                        x[p] * y[q] - x[q] * y[p]
                    })
                    .collect()
            }))
            .unwrap();
            let mut rhs = sigma_dot(&cross, &u).unwrap();
            rhs.scale(Cplx::new(0.0, 1.0));
            let rhs = rhs
                .map_pointwise(|i, x, y| {
                    let (u1, u2) = u.at(i);
                    (x + u1 * ab[i], y + u2 * ab[i])
                });
            worst[1] = worst[1].max(rel_dist(&lhs, &rhs));

            let direct = magnetic::spin_magnetic_laplacian(&u, &a, SpinLaplacianMode::Direct).unwrap();
            worst[2] = worst[2].max(rel_dist(&direct, &decomposed_pauli(&u, &a, mutation)));

            let expanded = magnetic::magnetic_laplacian(&u, &a).unwrap();
            let composed = magnetic::magnetic_laplacian_composed(&u, &a).unwrap();
            worst[3] = worst[3].max(rel_dist(&expanded, &composed));

            let lw = magnetic::spin_magnetic_laplacian(&w, &a, SpinLaplacianMode::Direct).unwrap();
            let p1 = inner_product(&w, &direct).unwrap();
            let p2 = inner_product(&lw, &u).unwrap();
            let scale = w.l2_norm() * direct.l2_norm();
            worst[4] = worst[4].max((p1 - p2).norm() / scale);

            let pairing = magnetic::current_density_with(&u, &a, CurrentForm::SpinorPairing).unwrap();
            worst[5] = worst[5].max(rel_dist_vec(&pauli_current(&u, &a, mutation), &pairing));

            let p = leray(&b, mutation);
            worst[6] = worst[6].max(spectral::divergence_norm(&p) / b.l2_norm());
            worst[7] = worst[7].max(rel_dist_vec(&leray(&p, mutation), &p));
        }
        for (k, name) in IDENTITIES.iter().enumerate() {
            results.push(IdentityResult {
                name,
                n,
                samples: if k == 0 { 1 } else { cfg.samples },
                max_deviation: worst[k],
                tolerance: cfg.tolerance,
            });
        }
    }
    IdentityReport { seed, results }
}
