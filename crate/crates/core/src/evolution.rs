//! The Pauli Hamiltonian `H = −½(σ·∇_A)² + V`, the conserved functionals, the
//! ε-regularized flow `∂_t u = −(i+ε)Hu + ε (u,Hu)/‖u₀‖² u` and its time
//! integrators.

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::field::{same_grid, ScalarField, VectorField};
use crate::field_solver::{self, ASolveOptions, GaugeKind};
use crate::grid::Grid;
use crate::magnetic::{self, SpinLaplacianMode};
use crate::real::{Cplx, Real};
use crate::spectral::{self, Spectrum};
use crate::spinor::{charge_density, inner_product, sigma_dot, SpinorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum StepScheme {
    /// Classical four-stage Runge–Kutta on the full right-hand side.
    #[default]
    Rk4,
    /// Exact heat-Schrödinger semigroup for `½(i+ε)Δ` with two-stage Gauss
    /// collocation on the Duhamel integral, solved by Picard iteration.
    SemigroupPicard,
}

impl StepScheme {
    pub fn name(self) -> &'static str {
        match self {
            StepScheme::Rk4 => "rk4",
            StepScheme::SemigroupPicard => "semigroup_picard",
        }
    }

    /// Classical order of accuracy.
    pub fn order(self) -> u32 {
        4
    }
}

impl std::str::FromStr for StepScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" => Ok(StepScheme::Rk4),
            "semigroup_picard" | "semigroup-picard" | "picard" => Ok(StepScheme::SemigroupPicard),
            other => Err(Error::InvalidArgument(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Which self-consistent potentials are switched on. The reduced variants are
/// test modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Coupling {
    #[default]
    Full,
    /// `V ≡ 0`, `A` still solved.
    MagneticOnly,
    /// `A ≡ 0`, `V ≡ 0`: free Pauli particle.
    Free,
}

impl Coupling {
    pub fn electric(self) -> bool {
        self == Coupling::Full
    }

    pub fn magnetic(self) -> bool {
        self != Coupling::Free
    }

    pub fn name(self) -> &'static str {
        match self {
            Coupling::Full => "full",
            Coupling::MagneticOnly => "magnetic_only",
            Coupling::Free => "free",
        }
    }
}

impl std::str::FromStr for Coupling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Coupling::Full),
            "magnetic_only" | "no_electric" => Ok(Coupling::MagneticOnly),
            "free" => Ok(Coupling::Free),
            other => Err(Error::InvalidArgument(format!("unknown coupling {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    pub scheme: StepScheme,
    pub solver: ASolveOptions,
    /// Relative update at which the Picard iteration stops.
    pub picard_tol: f64,
    pub picard_max_iterates: usize,
    /// 2/3-rule truncation of `u` after every step.
    pub dealias: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            scheme: StepScheme::Rk4,
            solver: ASolveOptions::default(),
            picard_tol: 1e-10,
            picard_max_iterates: 25,
            dealias: true,
        }
    }
}

impl StepOptions {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.picard_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "picard_tol must be positive, got {}",
                self.picard_tol
            )));
        }
        if self.picard_max_iterates < 1 {
            return Err(Error::InvalidArgument(
                "picard_max_iterates must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Field-solve statistics attached to a state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveTelemetry {
    /// Iterations of the A-solve that produced the state's potential.
    pub iterations: usize,
    /// Relative residual of that solve.
    pub residual: f64,
    /// A-solve iterations summed over the step that produced the state.
    pub step_iterations: usize,
    /// Picard iterates of that step (0 for RK4).
    pub picard_iterates: usize,
}

/// A spinor together with its self-consistent potentials.
///
/// `Hu` and `(σ·∇_A)u` are cached because every integrator and most
/// diagnostics need them.
#[derive(Clone, Debug)]
pub struct SimState<T: Real> {
    t: T,
    u: SpinorField<T>,
    a: VectorField<T>,
    v: ScalarField<T>,
    gauge: GaugeKind,
    coupling: Coupling,
    epsilon: T,
    q0: T,
    telemetry: SolveTelemetry,
    hu: SpinorField<T>,
    du: SpinorField<T>,
}

struct Evaluation<T: Real> {
    a: VectorField<T>,
    v: ScalarField<T>,
    hu: SpinorField<T>,
    du: SpinorField<T>,
    iterations: usize,
    residual: f64,
}

fn evaluate<T: Real>(
    u: &SpinorField<T>,
    gauge: GaugeKind,
    coupling: Coupling,
    solver: &ASolveOptions,
    warm: Option<&VectorField<T>>,
) -> Result<Evaluation<T>> {
    let grid = u.grid();
    let grad = u.gradient();
    let rho = if coupling == Coupling::Free {
        None
    } else {
        Some(charge_density(u))
    };
    let (a, iterations, residual) = match (&rho, coupling.magnetic()) {
        (Some(rho), true) => {
            let f = magnetic::current_without_potential_from_gradient(u, &grad);
            let sol = field_solver::solve_a_from_sources(rho, &f, gauge, solver, warm)?;
            (sol.field, sol.iterations, sol.residual.as_f64())
        }
        _ => (VectorField::zeros(grid), 0, 0.0),
    };
    let v = match (&rho, coupling.electric()) {
        (Some(rho), true) => spectral::inv_neg_laplacian(rho),
        _ => ScalarField::zeros(grid),
    };
    let du = magnetic::sigma_contract(&magnetic::apply_minimal_coupling(grad, u, &a));
    let ddu = magnetic::sigma_magnetic_gradient(&du, &a)?;
    let half = T::half();
    let vv = v.values();
    let hu = ddu.map_pointwise(|idx, x, y| {
        let (u1, u2) = u.at(idx);
        (u1.scale(vv[idx]) - x.scale(half), u2.scale(vv[idx]) - y.scale(half))
    });
    Ok(Evaluation {
        a,
        v,
        hu,
        du,
        iterations,
        residual,
    })
}

impl<T: Real> SimState<T> {
    /// Solves the potentials for `u` and freezes `Q0 = ‖u‖²`.
    pub fn new(
        u: SpinorField<T>,
        gauge: GaugeKind,
        epsilon: T,
        coupling: Coupling,
        solver: &ASolveOptions,
    ) -> Result<Self> {
        let q0 = u.l2_norm_sq();
        Self::with_reference_charge(u, T::zero(), q0, gauge, epsilon, coupling, solver, None)
    }

    /// Rebuilds a state at time `t` with a given `Q0` (e.g. from a snapshot).
    #[allow(clippy::too_many_arguments)]
    pub fn with_reference_charge(
        u: SpinorField<T>,
        t: T,
        q0: T,
        gauge: GaugeKind,
        epsilon: T,
        coupling: Coupling,
        solver: &ASolveOptions,
        warm: Option<&VectorField<T>>,
    ) -> Result<Self> {
        if !(epsilon >= T::zero()) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be a finite non-negative number, got {epsilon}"
            )));
        }
        if !(q0 > T::zero()) || !q0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "reference charge must be positive, got {q0}"
            )));
        }
        if !u.is_finite() {
            return Err(Error::NonFinite);
        }
        let opts = ASolveOptions {
            initial_guess: if warm.is_some() {
                solver.initial_guess
            } else {
                field_solver::InitialGuess::Zero
            },
            ..*solver
        };
        let e = evaluate(&u, gauge, coupling, &opts, warm)
            .map_err(|e| Error::FieldSolveFailure { t: t.as_f64(), source: Box::new(e) })?;
        Ok(Self::assemble(u, t, q0, gauge, epsilon, coupling, e, 0, 0))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        u: SpinorField<T>,
        t: T,
        q0: T,
        gauge: GaugeKind,
        epsilon: T,
        coupling: Coupling,
        e: Evaluation<T>,
        step_iterations: usize,
        picard_iterates: usize,
    ) -> Self {
        Self {
            t,
            u,
            a: e.a,
            v: e.v,
            gauge,
            coupling,
            epsilon,
            q0,
            telemetry: SolveTelemetry {
                iterations: e.iterations,
                residual: e.residual,
                step_iterations: step_iterations + e.iterations,
                picard_iterates,
            },
            hu: e.hu,
            du: e.du,
        }
    }

    pub fn t(&self) -> T {
        self.t
    }
    pub fn u(&self) -> &SpinorField<T> {
        &self.u
    }
    pub fn a(&self) -> &VectorField<T> {
        &self.a
    }
    pub fn v(&self) -> &ScalarField<T> {
        &self.v
    }
    pub fn grid(&self) -> &Grid<T> {
        self.u.grid()
    }
    pub fn gauge(&self) -> GaugeKind {
        self.gauge
    }
    pub fn coupling(&self) -> Coupling {
        self.coupling
    }
    pub fn epsilon(&self) -> T {
        self.epsilon
    }
    /// `‖u₀‖²`, frozen at the initial time.
    pub fn q0(&self) -> T {
        self.q0
    }
    pub fn telemetry(&self) -> SolveTelemetry {
        self.telemetry
    }
    /// Cached `Hu`.
    pub fn hu(&self) -> &SpinorField<T> {
        &self.hu
    }
    /// Cached `(σ·∇_A)u`.
    pub fn sigma_gradient(&self) -> &SpinorField<T> {
        &self.du
    }

    /// Same state with a different ε (potentials do not depend on it).
    pub fn with_epsilon(&self, epsilon: T) -> Result<Self> {
        if !(epsilon >= T::zero()) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be a finite non-negative number, got {epsilon}"
            )));
        }
        Ok(Self {
            epsilon,
            ..self.clone()
        })
    }
}

/// `Hu = −½(σ·∇_A)²u + Vu`.
pub fn apply_h<T: Real>(
    u: &SpinorField<T>,
    a: &VectorField<T>,
    v: &ScalarField<T>,
) -> Result<SpinorField<T>> {
    same_grid(u.grid(), v.grid())?;
    let mut out = magnetic::spin_magnetic_laplacian(u, a, SpinLaplacianMode::Direct)?;
    out.scale_real(-T::half());
    let vu = u.mul_scalar_field(v)?;
    out.axpy(Cplx::new(T::one(), T::zero()), &vu)?;
    Ok(out)
}

/// `(u, Hu)` evaluated two ways.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expectation<T> {
    /// `Re (u, Hu)` from the operator application.
    pub direct: T,
    /// `Im (u, Hu)`, zero up to round-off.
    pub imaginary: T,
    /// `½‖(σ·∇_A)u‖² + ‖∇V‖²`.
    pub identity: T,
}

impl<T: Real> Expectation<T> {
    pub fn relative_gap(&self) -> T {
        let scale = self.direct.abs().max(self.identity.abs());
        if scale > T::zero() {
            (self.direct - self.identity).abs() / scale
        } else {
            T::zero()
        }
    }
}

pub fn expectation_h<T: Real>(state: &SimState<T>) -> Expectation<T> {
    let p = inner_product(&state.u, &state.hu).expect("state fields share a grid");
    let terms = energy_terms(state);
    Expectation {
        direct: p.re,
        imaginary: p.im,
        identity: T::half() * terms.kinetic + terms.electric,
    }
}

/// `Q = ‖u‖²`.
pub fn charge<T: Real>(state: &SimState<T>) -> T {
    state.u.l2_norm_sq()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyTerms<T> {
    /// `‖(σ·∇_A)u‖²`
    pub kinetic: T,
    /// `‖∇A‖²`
    pub magnetic: T,
    /// `‖∇V‖²`
    pub electric: T,
}

impl<T: Real> EnergyTerms<T> {
    pub fn total(&self) -> T {
        self.kinetic + self.magnetic + self.electric
    }
}

pub fn energy_terms<T: Real>(state: &SimState<T>) -> EnergyTerms<T> {
    let sq = |x: T| x * x;
    EnergyTerms {
        kinetic: state.du.l2_norm_sq(),
        magnetic: sq(spectral::sobolev_norm(&state.a, T::one(), true)),
        electric: sq(spectral::sobolev_norm(&state.v, T::one(), true)),
    }
}

/// `E = ‖(σ·∇_A)u‖² + ‖∇A‖² + ‖∇V‖²`.
pub fn energy<T: Real>(state: &SimState<T>) -> T {
    energy_terms(state).total()
}

fn rhs_from<T: Real>(u: &SpinorField<T>, hu: &SpinorField<T>, eps: T, q0: T) -> SpinorField<T> {
    let mut out = hu.scaled(Cplx::new(-eps, -T::one()));
    if eps > T::zero() {
        let uhu = inner_product(u, hu).expect("same grid").re;
        out.axpy(Cplx::new(eps * uhu / q0, T::zero()), u)
            .expect("same grid");
    }
    out
}

/// `−(i+ε)Hu + ε (u,Hu)/Q0 · u`.
pub fn regularized_rhs<T: Real>(state: &SimState<T>) -> SpinorField<T> {
    rhs_from(&state.u, &state.hu, state.epsilon, state.q0)
}

/// The Duhamel nonlinearity in its expanded form
/// `−(i+ε)(i∇·(Au) − (i/2)(∇·A)u + ½|A|²u − ½(σ·B)u + Vu)`.
///
/// The `(∇·A)` term is only included for Poisswell; with a Coulomb-gauge `A`
/// both forms coincide. Equal to `−(i+ε)(H + ½Δ)u`.
pub fn duhamel_nonlinearity<T: Real>(
    u: &SpinorField<T>,
    a: &VectorField<T>,
    v: &ScalarField<T>,
    gauge: GaugeKind,
    epsilon: T,
) -> Result<SpinorField<T>> {
    same_grid(u.grid(), a.grid())?;
    same_grid(u.grid(), v.grid())?;
    let grid = u.grid();
    let half = T::half();
    // i ∇·(A u), componentwise
    let mut div_au = SpinorField::zeros(grid);
    for (k, axis) in spectral::Axis::ALL.iter().enumerate() {
        let d = u.mul_scalar_field(&a.scalar(k))?.derivative(*axis);
        div_au.axpy(Cplx::new(T::zero(), T::one()), &d)?;
    }
    let b = magnetic::magnetic_field(a);
    let sb = sigma_dot(&b, u)?;
    let div_a = spectral::divergence(a);
    let a2 = a.magnitude_sq();
    let inner = div_au.map_pointwise(|idx, x, y| {
        let (u1, u2) = u.at(idx);
        let (s1, s2) = sb.at(idx);
        let gauge_term = if gauge == GaugeKind::Poisswell {
            -half * div_a.values()[idx]
        } else {
            T::zero()
        };
        let c = Cplx::new(half * a2.values()[idx] + v.values()[idx], gauge_term);
        (x + u1 * c - s1.scale(half), y + u2 * c - s2.scale(half))
    });
    Ok(inner.scaled(Cplx::new(-epsilon, -T::one())))
}

fn semigroup_multiplier<T: Real>(grid: &Grid<T>, epsilon: T, tau: T) -> Vec<Cplx<T>> {
    let half = T::half();
    grid.k_squared()
        .iter()
        .map(|&k2| {
            let s = half * tau * k2;
            Cplx::new((-epsilon * s).exp(), T::zero()) * Cplx::new(s.cos(), -s.sin())
        })
        .collect()
}

/// Heat-Schrödinger semigroup `S(τ) = exp((i+ε)τΔ/2)` applied spectrally.
pub fn semigroup<T: Real>(u: &SpinorField<T>, epsilon: T, tau: T) -> SpinorField<T> {
    let m = semigroup_multiplier(u.grid(), epsilon, tau);
    let spec = u.spectra().map(|s| s.iter().zip(&m).map(|(&x, &y)| x * y).collect());
    SpinorField::from_spectra(u.grid(), spec)
}

/// Advances `state` by `dt`; the returned state carries freshly solved
/// potentials.
pub fn step<T: Real>(state: &SimState<T>, dt: T, opts: &StepOptions) -> Result<SimState<T>> {
    opts.validate()?;
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    match opts.scheme {
        StepScheme::Rk4 => step_rk4(state, dt, opts),
        StepScheme::SemigroupPicard => step_semigroup_picard(state, dt, opts),
    }
}

fn solve_failure<T: Real>(t: T) -> impl Fn(Error) -> Error {
    move |e| Error::FieldSolveFailure {
        t: t.as_f64(),
        source: Box::new(e),
    }
}

fn finish_step<T: Real>(
    state: &SimState<T>,
    mut u: SpinorField<T>,
    dt: T,
    opts: &StepOptions,
    warm: &VectorField<T>,
    iterations: usize,
    picard_iterates: usize,
) -> Result<SimState<T>> {
    let t = state.t + dt;
    if opts.dealias {
        u = u.dealiased();
    }
    if !u.is_finite() {
        return Err(Error::NonFinite);
    }
    let e = evaluate(&u, state.gauge, state.coupling, &opts.solver, Some(warm))
        .map_err(solve_failure(t))?;
    Ok(SimState::assemble(
        u,
        t,
        state.q0,
        state.gauge,
        state.epsilon,
        state.coupling,
        e,
        iterations,
        picard_iterates,
    ))
}

fn step_rk4<T: Real>(state: &SimState<T>, dt: T, opts: &StepOptions) -> Result<SimState<T>> {
    let (eps, q0) = (state.epsilon, state.q0);
    let one = |x: T| Cplx::new(x, T::zero());
    let u0 = &state.u;
    let k1 = regularized_rhs(state);
    let mut iterations = 0;
    let mut warm = state.a.clone();
    let mut stage = |k: &SpinorField<T>, c: T, warm: &mut VectorField<T>| -> Result<SpinorField<T>> {
        let mut us = u0.clone();
        us.axpy(one(c * dt), k)?;
        let e = evaluate(&us, state.gauge, state.coupling, &opts.solver, Some(warm))
            .map_err(solve_failure(state.t + c * dt))?;
        iterations += e.iterations;
        *warm = e.a;
        Ok(rhs_from(&us, &e.hu, eps, q0))
    };
    let k2 = stage(&k1, T::half(), &mut warm)?;
    let k3 = stage(&k2, T::half(), &mut warm)?;
    let k4 = stage(&k3, T::one(), &mut warm)?;
    let sixth = dt / T::lit(6.0);
    let mut u1 = u0.clone();
    u1.axpy(one(sixth), &k1)?;
    u1.axpy(one(sixth * T::two()), &k2)?;
    u1.axpy(one(sixth * T::two()), &k3)?;
    u1.axpy(one(sixth), &k4)?;
    finish_step(state, u1, dt, opts, &warm, iterations, 0)
}

fn mul_spectrum<T: Real>(m: &[Cplx<T>], s: &[Cplx<T>]) -> Spectrum<T> {
    m.iter().zip(s).map(|(&x, &y)| x * y).collect()
}

/// Spectrum of `N(u) = −(i+ε)(H + ½Δ)u + ε (u,Hu)/Q0 u`.
fn nonlinearity_spectrum<T: Real>(
    u_hat: &[Spectrum<T>; 2],
    u: &SpinorField<T>,
    hu: &SpinorField<T>,
    eps: T,
    q0: T,
) -> [Spectrum<T>; 2] {
    let grid = u.grid();
    let rhs = rhs_from(u, hu, eps, q0).spectra();
    let half = T::half();
    let mut out = rhs;
    for (o, uh) in out.iter_mut().zip(u_hat) {
        for ((x, &y), &k2) in o.iter_mut().zip(uh).zip(grid.k_squared()) {
            // −(i+ε)·½Δ ↦ (i+ε)·k²/2
            *x = *x + y * Cplx::new(eps * half * k2, half * k2);
        }
    }
    out
}

fn step_semigroup_picard<T: Real>(
    state: &SimState<T>,
    dt: T,
    opts: &StepOptions,
) -> Result<SimState<T>> {
    let grid = state.grid().clone();
    let (eps, q0, h) = (state.epsilon, state.q0, dt);
    let r3 = T::lit(3.0f64.sqrt());
    let sixth = T::lit(6.0);
    let quarter = T::lit(0.25);
    let c = [T::half() - r3 / sixth, T::half() + r3 / sixth];
    let a = [
        [quarter, quarter - r3 / sixth],
        [quarter + r3 / sixth, quarter],
    ];
    let b = [T::half(), T::half()];

    let m_c = c.map(|cj| semigroup_multiplier(&grid, eps, cj * h));
    let m_12 = semigroup_multiplier(&grid, eps, (c[0] - c[1]) * h);
    let m_21 = semigroup_multiplier(&grid, eps, (c[1] - c[0]) * h);
    let m_end = c.map(|cm| semigroup_multiplier(&grid, eps, (T::one() - cm) * h));
    let m_h = semigroup_multiplier(&grid, eps, h);

    let u0_hat = state.u.spectra();
    let n0_hat = nonlinearity_spectrum(&u0_hat, &state.u, &state.hu, eps, q0);

    // explicit Lawson–Euler guess: S(c h)(u0 + c h N(u0))
    let mut stage_hat: [[Spectrum<T>; 2]; 2] = [0, 1].map(|j| {
        [0, 1].map(|p| {
            let w: Spectrum<T> = u0_hat[p]
                .iter()
                .zip(&n0_hat[p])
                .map(|(&x, &y)| x + y.scale(c[j] * h))
                .collect();
            mul_spectrum(&m_c[j], &w)
        })
    });
    let mut stages: Vec<SpinorField<T>> = stage_hat
        .iter()
        .map(|s| SpinorField::from_spectra(&grid, s.clone()))
        .collect();
    let mut warm = [state.a.clone(), state.a.clone()];
    let mut iterations = 0;
    let mut update = f64::INFINITY;

    for iterate in 1..=opts.picard_max_iterates {
        let mut n_hat = Vec::with_capacity(2);
        for m in 0..2 {
            let e = evaluate(&stages[m], state.gauge, state.coupling, &opts.solver, Some(&warm[m]))
                .map_err(solve_failure(state.t + c[m] * h))?;
            iterations += e.iterations;
            n_hat.push(nonlinearity_spectrum(&stage_hat[m], &stages[m], &e.hu, eps, q0));
            warm[m] = e.a;
        }

        update = 0.0;
        for j in 0..2 {
            let new_hat: [Spectrum<T>; 2] = [0, 1].map(|p| {
                let n_jj = &n_hat[j][p];
                let other = 1 - j;
                let m_cross = if j == 0 { &m_12 } else { &m_21 };
                m_c[j]
                    .iter()
                    .zip(&u0_hat[p])
                    .enumerate()
                    .map(|(idx, (&mc, &u0))| {
                        mc * u0
                            + n_jj[idx].scale(h * a[j][j])
                            + (m_cross[idx] * n_hat[other][p][idx]).scale(h * a[j][other])
                    })
                    .collect()
            });
            let mut diff = T::zero();
            let mut size = T::zero();
            for p in 0..2 {
                for (x, y) in new_hat[p].iter().zip(&stage_hat[j][p]) {
                    diff = diff + (*x - *y).norm_sqr();
                    size = size + x.norm_sqr();
                }
            }
            let rel = if size > T::zero() {
                (diff / size).sqrt().as_f64()
            } else {
                0.0
            };
            update = update.max(rel);
            stages[j] = SpinorField::from_spectra(&grid, new_hat.clone());
            stage_hat[j] = new_hat;
        }

        if !update.is_finite() {
            break;
        }
        if update <= opts.picard_tol {
            let end_hat: [Spectrum<T>; 2] = [0, 1].map(|p| {
                (0..grid.len())
                    .map(|idx| {
                        m_h[idx] * u0_hat[p][idx]
                            + (m_end[0][idx] * n_hat[0][p][idx]).scale(h * b[0])
                            + (m_end[1][idx] * n_hat[1][p][idx]).scale(h * b[1])
                    })
                    .collect()
            });
            let u1 = SpinorField::from_spectra(&grid, end_hat);
            return finish_step(state, u1, dt, opts, &warm[1], iterations, iterate);
        }
    }
    Err(Error::PicardNonConvergence {
        iterates: opts.picard_max_iterates,
        update,
    })
}

/// Parameters of a trajectory run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Record diagnostics every `stride` steps (and at the final time).
    pub stride: usize,
    /// Abort once `‖u‖_{H¹}` exceeds this value.
    pub blowup_guard: Option<f64>,
    /// Order `s` of the monitored `H^s` norm.
    pub hs_index: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 1.0,
            stride: 10,
            blowup_guard: None,
            hs_index: 2.0,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "final time must be non-negative, got {}",
                self.t_final
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Step sizes covering `[0, t_final]`; the last one may be shorter.
    pub fn step_sizes(&self) -> Vec<f64> {
        let full = (self.t_final / self.dt * (1.0 + 1e-12)).floor() as usize;
        let mut steps = vec![self.dt; full];
        let rest = self.t_final - full as f64 * self.dt;
        if rest > 1e-12 * self.t_final.max(1.0) {
            steps.push(rest);
        }
        steps
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: SimState<T>,
}

/// Runs `initial` to `cfg.t_final`, recording diagnostics every `cfg.stride`
/// steps. `observer` sees each recorded state as it is produced, so output
/// survives an aborted run.
pub fn evolve<T: Real>(
    initial: SimState<T>,
    cfg: &EvolveConfig,
    opts: &StepOptions,
    mut observer: impl FnMut(&SimState<T>, &DiagnosticsRecord) -> Result<()>,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    opts.validate()?;
    let hs = T::lit(cfg.hs_index);
    let mut records = Vec::new();
    let first = diagnostics::record(&initial, None, hs)?;
    observer(&initial, &first)?;
    records.push(first);

    let steps = cfg.step_sizes();
    let mut state = initial;
    for (i, &dt) in steps.iter().enumerate() {
        let next = step(&state, T::lit(dt), opts)?;
        if let Some(guard) = cfg.blowup_guard {
            let h1 = spectral::sobolev_norm(next.u(), T::one(), false).as_f64();
            if !(h1 <= guard) {
                let rec = diagnostics::record(&next, Some((&state, T::lit(dt))), hs)?;
                observer(&next, &rec)?;
                records.push(rec);
                return Err(Error::BlowUpGuardTriggered {
                    t: next.t().as_f64(),
                    h1,
                    guard,
                });
            }
        }
        let n = i + 1;
        if n % cfg.stride == 0 || n == steps.len() {
            let rec = diagnostics::record(&next, Some((&state, T::lit(dt))), hs)?;
            observer(&next, &rec)?;
            records.push(rec);
        }
        state = next;
    }
    diagnostics::fill_dissipation_residuals(&mut records);
    Ok(Trajectory {
        records,
        final_state: state,
    })
}

/// One consecutive pair of an ε-sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPair {
    pub eps_a: f64,
    pub eps_b: f64,
    /// `sup_t ‖u^{ε_a}(t) − u^{ε_b}(t)‖_{L²}`
    pub deviation: f64,
}

impl SweepPair {
    pub fn gap(&self) -> f64 {
        (self.eps_a - self.eps_b).abs()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub pairs: Vec<SweepPair>,
    /// Least-squares slope of `ln deviation` against `ln |ε − ε′|`, NaN when
    /// fewer than two pairs have a positive gap and deviation.
    pub slope: f64,
}

impl SweepReport {
    /// Whether the deviations shrink strictly as the gaps shrink.
    pub fn monotone(&self) -> bool {
        let mut p = self.pairs.clone();
        p.sort_by(|x, y| y.gap().total_cmp(&x.gap()));
        p.windows(2)
            .all(|w| w[1].gap() == w[0].gap() || w[1].deviation < w[0].deviation)
    }
}

pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

/// Runs the regularized flow for every ε in `eps_list` in lockstep and reports
/// the sup-in-time L² distance between consecutive entries.
pub fn epsilon_sweep<T: Real>(
    initial: &SimState<T>,
    eps_list: &[f64],
    dt: f64,
    t_final: f64,
    opts: &StepOptions,
) -> Result<SweepReport> {
    if eps_list.len() < 3 {
        return Err(Error::InvalidArgument(
            "epsilon sweep needs at least three values".into(),
        ));
    }
    if eps_list.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument(
            "epsilon values must be sorted in descending order".into(),
        ));
    }
    let cfg = EvolveConfig {
        dt,
        t_final,
        ..Default::default()
    };
    cfg.validate()?;
    let mut states = eps_list
        .iter()
        .map(|&e| initial.with_epsilon(T::lit(e)))
        .collect::<Result<Vec<_>>>()?;
    let mut sup = vec![0.0f64; eps_list.len() - 1];
    for dt in cfg.step_sizes() {
        for s in states.iter_mut() {
            *s = step(s, T::lit(dt), opts)?;
        }
        for (k, w) in states.windows(2).enumerate() {
            let d = w[0].u().sub(w[1].u())?.l2_norm().as_f64();
            sup[k] = sup[k].max(d);
        }
    }
    let pairs: Vec<SweepPair> = eps_list
        .windows(2)
        .zip(&sup)
        .map(|(w, &d)| SweepPair {
            eps_a: w[0],
            eps_b: w[1],
            deviation: d,
        })
        .collect();
    let slope = log_log_slope(&pairs.iter().map(|p| (p.gap(), p.deviation)).collect::<Vec<_>>());
    Ok(SweepReport { pairs, slope })
}

/// Outcome of the a priori `H¹` check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct H1BoundCheck {
    pub passed: bool,
    /// `‖∇u‖_{L²}`
    pub grad_norm: f64,
    /// `C_guard (E0^{1/2} + E0 Q0^{1/2})`
    pub bound: f64,
    /// `bound − grad_norm`
    pub margin: f64,
}

pub const DEFAULT_H1_GUARD: f64 = 10.0;

pub fn h1_bound_check<T: Real>(state: &SimState<T>, e0: f64, q0: f64, c_guard: f64) -> H1BoundCheck {
    let grad_norm = spectral::sobolev_norm(state.u(), T::one(), true).as_f64();
    let bound = c_guard * (e0.max(0.0).sqrt() + e0 * q0.max(0.0).sqrt());
    H1BoundCheck {
        passed: grad_norm <= bound,
        grad_norm,
        bound,
        margin: bound - grad_norm,
    }
}
