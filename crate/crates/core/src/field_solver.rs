//! Self-consistent potentials: `−ΔV = |u|²` and the magnetic equation
//! `(−Δ + |u|²) A = G f`, `f = Im⟨u,∇u⟩ + ½∇×⟨u,σu⟩`, with `G = ℙ` (Darwin,
//! Coulomb gauge) or `G = I` (Poisswell, Lorenz gauge).
//!
//! On the torus both equations are solved against mean-subtracted sources
//! (neutralizing background), and every potential returned has zero mean.

use crate::error::{Error, Result};
use crate::field::{same_grid, ScalarField, VectorField};
use crate::grid::Grid;
use crate::magnetic::{current_density, current_without_potential};
use crate::real::{Cplx, Real};
use crate::spectral::{self, Spectrum};
use crate::spinor::{charge_density, SpinorField};

/// Floor on the residual normalization, so `u = 0` does not divide by zero.
pub const RESIDUAL_FLOOR: f64 = 1e-30;

/// Which semi-relativistic field model couples to the Pauli equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GaugeKind {
    /// Coulomb gauge, source `ℙJ`.
    Darwin,
    /// Lorenz gauge, source `J`.
    Poisswell,
}

impl GaugeKind {
    pub fn name(self) -> &'static str {
        match self {
            GaugeKind::Darwin => "darwin",
            GaugeKind::Poisswell => "poisswell",
        }
    }
}

impl std::str::FromStr for GaugeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "darwin" | "coulomb" => Ok(GaugeKind::Darwin),
            "poisswell" | "lorenz" => Ok(GaugeKind::Poisswell),
            other => Err(Error::InvalidArgument(format!("unknown gauge {other:?}"))),
        }
    }
}

/// Starting point of the A-iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InitialGuess {
    /// Warm start from the previous solution when one is available.
    #[default]
    Previous,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ASolveOptions {
    /// Relative residual target.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relaxation factor in `(0, 1]`.
    pub damping: f64,
    pub initial_guess: InitialGuess,
}

impl Default for ASolveOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
            damping: 1.0,
            initial_guess: InitialGuess::Previous,
        }
    }
}

impl ASolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "solver tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument(
                "solver max_iterations must be at least 1".into(),
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "solver damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// Converged magnetic potential with solver telemetry.
#[derive(Clone, Debug)]
pub struct ASolution<T: Real> {
    pub field: VectorField<T>,
    /// Number of fixed-point updates performed.
    pub iterations: usize,
    /// Relative residual of `field`.
    pub residual: T,
    /// Relative residual before each update, ending with the final one.
    pub history: Vec<T>,
}

/// Mean-zero `V` with `−ΔV = |u|² − mean(|u|²)`.
pub fn solve_v<T: Real>(u: &SpinorField<T>) -> ScalarField<T> {
    spectral::inv_neg_laplacian(&charge_density(u))
}

fn l2_from_spectra<T: Real>(grid: &Grid<T>, spectra: &[Spectrum<T>]) -> T {
    spectral::sobolev_norm_of_spectra(grid, spectra, T::zero(), false)
}

/// `Π₀ G` in place: gauge projection then mean removal.
fn project_source<T: Real>(grid: &Grid<T>, gauge: GaugeKind, spec: &mut [Spectrum<T>; 3]) {
    if gauge == GaugeKind::Darwin {
        spectral::leray_spectrum(grid, spec);
    }
    for s in spec.iter_mut() {
        s[0] = Cplx::new(T::zero(), T::zero());
    }
}

/// Solves the magnetic equation for `u`. `previous` is used as the starting
/// point when `opts.initial_guess` is [`InitialGuess::Previous`].
pub fn solve_a<T: Real>(
    u: &SpinorField<T>,
    gauge: GaugeKind,
    opts: &ASolveOptions,
    previous: Option<&VectorField<T>>,
) -> Result<ASolution<T>> {
    let rho = charge_density(u);
    let f = current_without_potential(u);
    solve_a_from_sources(&rho, &f, gauge, opts, previous)
}

/// Fixed-point solve given the charge density `rho = |u|²` and the
/// potential-free current `f`.
///
/// Iterates `A ← (1−ω)A + ω (−Δ)⁻¹ Π₀G(f − ρA)` until
/// `‖−ΔA − Π₀G(f − ρA)‖ / max(‖f‖, floor) ≤ tolerance`. A residual that grows
/// between updates aborts with [`Error::NonConvergence`].
pub fn solve_a_from_sources<T: Real>(
    rho: &ScalarField<T>,
    f: &VectorField<T>,
    gauge: GaugeKind,
    opts: &ASolveOptions,
    previous: Option<&VectorField<T>>,
) -> Result<ASolution<T>> {
    opts.validate()?;
    let grid = rho.grid().clone();
    same_grid(&grid, f.grid())?;
    let tol = T::lit(opts.tolerance);
    let omega = T::lit(opts.damping);
    let norm = f.l2_norm().max(T::lit(RESIDUAL_FLOOR));

    let mut source = spectral::forward_vector(f);
    project_source(&grid, gauge, &mut source);

    let mut a = match (opts.initial_guess, previous) {
        (InitialGuess::Previous, Some(prev)) => {
            same_grid(&grid, prev.grid())?;
            prev.clone()
        }
        _ => VectorField::zeros(&grid),
    };
    let mut a_hat = spectral::forward_vector(&a);

    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        // target = Π₀G(f − ρA)
        let rho_a = a.mul_scalar_field(rho)?;
        let mut target = spectral::forward_vector(&rho_a);
        project_source(&grid, gauge, &mut target);
        for (t, s) in target.iter_mut().zip(&source) {
            for (x, &y) in t.iter_mut().zip(s) {
                *x = y - *x;
            }
        }
        let k2 = grid.k_squared();
        let resid: Vec<Spectrum<T>> = a_hat
            .iter()
            .zip(&target)
            .map(|(ah, t)| {
                ah.iter()
                    .zip(t)
                    .zip(k2)
                    .map(|((&x, &y), &k)| x.scale(k) - y)
                    .collect()
            })
            .collect();
        let r = l2_from_spectra(&grid, &resid) / norm;
        history.push(r);

        if !r.is_finite() {
            return Err(Error::NonConvergence {
                iterations,
                residual: r.as_f64(),
                reason: "residual is not finite",
            });
        }
        if r <= tol {
            return Ok(ASolution {
                field: a,
                iterations,
                residual: r,
                history,
            });
        }
        if history.len() >= 2 && r > history[history.len() - 2] {
            return Err(Error::NonConvergence {
                iterations,
                residual: r.as_f64(),
                reason: "residual increased",
            });
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual: r.as_f64(),
                reason: "iteration budget exhausted",
            });
        }

        for t in target.iter_mut() {
            spectral::inv_neg_laplacian_spectrum(&grid, t);
        }
        for (ah, t) in a_hat.iter_mut().zip(&target) {
            for (x, &y) in ah.iter_mut().zip(t) {
                *x = x.scale(T::one() - omega) + y.scale(omega);
            }
        }
        a = spectral::inverse_vector(&grid, a_hat.clone());
        iterations += 1;
    }
}

/// Relative residual of the magnetic equation recomputed from scratch through
/// the forward operator `−Δ` and pointwise products.
pub fn a_equation_residual<T: Real>(
    u: &SpinorField<T>,
    a: &VectorField<T>,
    gauge: GaugeKind,
) -> Result<T> {
    same_grid(u.grid(), a.grid())?;
    let rho = charge_density(u);
    let f = current_without_potential(u);
    let rhs = f.sub(&a.mul_scalar_field(&rho)?)?;
    let mut projected = match gauge {
        GaugeKind::Darwin => spectral::leray_project(&rhs),
        GaugeKind::Poisswell => rhs,
    };
    for k in 0..3 {
        let m = projected.scalar(k).mean();
        projected.component_mut(k).iter_mut().for_each(|v| *v = *v - m);
    }
    let lhs = spectral::neg_laplacian_vector(a);
    let r = lhs.sub(&projected)?.l2_norm();
    Ok(r / f.l2_norm().max(T::lit(RESIDUAL_FLOOR)))
}

/// `∂_t V` reconstructed from the continuity equation: `−Δ(∂_t V) = −div J`.
pub fn potential_time_derivative<T: Real>(
    u: &SpinorField<T>,
    a: &VectorField<T>,
) -> Result<ScalarField<T>> {
    let j = current_density(u, a)?;
    let mut div_j = spectral::divergence(&j);
    div_j.scale(-T::one());
    Ok(spectral::inv_neg_laplacian(&div_j))
}

/// Darwin: `‖div A‖`; Poisswell: `‖div A + ∂_t V‖`.
pub fn gauge_residual<T: Real>(
    u: &SpinorField<T>,
    a: &VectorField<T>,
    gauge: GaugeKind,
) -> Result<T> {
    same_grid(u.grid(), a.grid())?;
    let div_a = spectral::divergence(a);
    match gauge {
        GaugeKind::Darwin => Ok(div_a.l2_norm()),
        GaugeKind::Poisswell => {
            let dv = potential_time_derivative(u, a)?;
            Ok(div_a.sub(&dv.map(|x| -x))?.l2_norm())
        }
    }
}

/// Ratios monitored against the elliptic estimates (no bound is enforced).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticReport {
    /// `‖∇A‖_{L²} / ‖u‖_{H¹}`
    pub grad_a_over_h1: f64,
    /// `‖V‖_{H¹} / ‖u‖²_{H¹}`
    pub v_h1_over_h1_sq: f64,
}

pub fn elliptic_estimate_report<T: Real>(
    u: &SpinorField<T>,
    a: &VectorField<T>,
    v: &ScalarField<T>,
) -> Result<EllipticReport> {
    same_grid(u.grid(), a.grid())?;
    same_grid(u.grid(), v.grid())?;
    let h1 = spectral::sobolev_norm(u, T::one(), false).as_f64();
    let grad_a = spectral::sobolev_norm(a, T::one(), true).as_f64();
    let v_h1 = spectral::sobolev_norm(v, T::one(), false).as_f64();
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    Ok(EllipticReport {
        grad_a_over_h1: ratio(grad_a, h1),
        v_h1_over_h1_sq: ratio(v_h1, h1 * h1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::FieldSampler;
    use std::f64::consts::PI;

    type C = Cplx<f64>;

    fn grid(n: usize) -> Grid<f64> {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    /// A smooth, modest-amplitude spinor (max |u|² well below 1).
    fn smooth_spinor(g: &Grid<f64>, seed: u64) -> SpinorField<f64> {
        let mut s = FieldSampler::new(g, seed);
        let mut u = s.spinor_in_band(2, 0.05);
        let bump = ScalarField::from_fn(g, |[x, y, z]| (0.5 * (x.cos() + y.cos() + z.cos())).exp());
        u = u.mul_scalar_field(&bump).unwrap();
        u.dealiased()
    }

    #[test]
    fn zero_spinor_gives_zero_potentials() {
        let g = grid(8);
        let u = SpinorField::zeros(&g);
        assert!(solve_v(&u).max_abs() == 0.0);
        for gauge in [GaugeKind::Darwin, GaugeKind::Poisswell] {
            let sol = solve_a(&u, gauge, &ASolveOptions::default(), None).unwrap();
            assert_eq!(sol.field.l2_norm(), 0.0);
            assert_eq!(sol.iterations, 0);
            assert_eq!(gauge_residual(&u, &sol.field, gauge).unwrap(), 0.0);
        }
    }

    #[test]
    fn poisson_with_cosine_density() {
        // |u|² = 1 + cos x with u = (sqrt(1 + cos x), 0)
        let g = grid(16);
        let u = SpinorField::from_fn(&g, |[x, _, _]| [C::new((1.0 + x.cos()).sqrt(), 0.0), C::new(0.0, 0.0)]);
        let v = solve_v(&u);
        let expected = ScalarField::from_fn(&g, |[x, _, _]| x.cos());
        assert!(v.sub(&expected).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn electric_energy_by_parts() {
        let g = grid(16);
        let u = smooth_spinor(&g, 1);
        let v = solve_v(&u);
        let grad_sq = spectral::sobolev_norm(&v, 1.0, true).powi(2);
        let rho = charge_density(&u);
        let centered = rho.map(|x| x - rho.mean());
        let by_parts = v.dot(&centered).unwrap();
        assert!(by_parts >= 0.0);
        assert!((grad_sq - by_parts).abs() <= 1e-10 * by_parts);
    }

    #[test]
    fn darwin_solution_is_divergence_free_and_converged() {
        let g = grid(16);
        let u = smooth_spinor(&g, 2);
        let opts = ASolveOptions::default();
        let sol = solve_a(&u, GaugeKind::Darwin, &opts, None).unwrap();
        assert!(sol.residual <= opts.tolerance);
        assert!(spectral::divergence_norm(&sol.field) <= 1e-12);
        let p = spectral::leray_project(&sol.field);
        assert!(p.sub(&sol.field).unwrap().l2_norm() <= 1e-13 * sol.field.l2_norm());
        let recomputed = a_equation_residual(&u, &sol.field, GaugeKind::Darwin).unwrap();
        assert!((recomputed - sol.residual).abs() <= 1e-13, "{recomputed} vs {}", sol.residual);
        for w in sol.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn independent_residual_matches_internal_poisswell() {
        let g = grid(16);
        let u = smooth_spinor(&g, 3);
        let sol = solve_a(&u, GaugeKind::Poisswell, &ASolveOptions::default(), None).unwrap();
        let recomputed = a_equation_residual(&u, &sol.field, GaugeKind::Poisswell).unwrap();
        assert!((recomputed - sol.residual).abs() <= 1e-13);
        let gr = gauge_residual(&u, &sol.field, GaugeKind::Poisswell).unwrap();
        assert!(gr <= 10.0 * 1e-10 * sol.field.l2_norm(), "{gr}");
    }

    #[test]
    fn solution_is_unique_across_initial_guesses() {
        let g = grid(16);
        let u = smooth_spinor(&g, 4);
        let mut s = FieldSampler::new(&g, 99);
        let random_guess = s.vector_band_limited(0.3);
        for gauge in [GaugeKind::Darwin, GaugeKind::Poisswell] {
            let opts = ASolveOptions::default();
            let a0 = solve_a(&u, gauge, &opts, None).unwrap().field;
            let a1 = solve_a(&u, gauge, &opts, Some(&random_guess)).unwrap().field;
            let diff = a0.sub(&a1).unwrap().l2_norm() / a0.l2_norm();
            assert!(diff <= 10.0 * opts.tolerance, "{gauge:?}: {diff}");
        }
    }

    #[test]
    fn budget_exhaustion_reports_residual() {
        let g = grid(8);
        let u = smooth_spinor(&g, 5);
        let opts = ASolveOptions {
            max_iterations: 1,
            ..Default::default()
        };
        match solve_a(&u, GaugeKind::Poisswell, &opts, None) {
            Err(Error::NonConvergence { iterations, residual, .. }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn damping_still_converges() {
        let g = grid(8);
        let u = smooth_spinor(&g, 6);
        let opts = ASolveOptions {
            damping: 0.7,
            ..Default::default()
        };
        let sol = solve_a(&u, GaugeKind::Darwin, &opts, None).unwrap();
        assert!(sol.residual <= 1e-10);
    }

    #[test]
    fn strong_coupling_is_reported_not_silently_wrong() {
        // |u|² far above the smallest Laplacian eigenvalue: the plain iteration diverges.
        let g = grid(8);
        let u = smooth_spinor(&g, 7).scaled(C::new(8.0, 0.0));
        match solve_a(&u, GaugeKind::Poisswell, &ASolveOptions::default(), None) {
            Err(Error::NonConvergence { .. }) => {}
            Ok(sol) => {
                let r = a_equation_residual(&u, &sol.field, GaugeKind::Poisswell).unwrap();
                assert!(r <= 1e-10);
            }
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn rejects_bad_options() {
        let bad = [
            ASolveOptions { tolerance: 0.0, ..Default::default() },
            ASolveOptions { max_iterations: 0, ..Default::default() },
            ASolveOptions { damping: 0.0, ..Default::default() },
            ASolveOptions { damping: 1.5, ..Default::default() },
        ];
        for o in bad {
            assert!(o.validate().is_err());
        }
    }

    #[test]
    fn elliptic_ratios() {
        let g = grid(8);
        let z = SpinorField::zeros(&g);
        let rep = elliptic_estimate_report(&z, &VectorField::zeros(&g), &ScalarField::zeros(&g)).unwrap();
        assert_eq!(rep.grad_a_over_h1, 0.0);
        assert_eq!(rep.v_h1_over_h1_sq, 0.0);
    }

    #[test]
    fn elliptic_ratios_stable_under_refinement() {
        let u_of = |g: &Grid<f64>| {
            SpinorField::from_fn(g, |[x, y, z]| {
                let r2 = (x - PI).powi(2) + (y - PI).powi(2) + (z - PI).powi(2);
                let env = 0.6 * (-r2 / 1.2).exp();
                [C::new(0.0, x).exp() * env, C::new(0.3 * env, 0.0)]
            })
        };
        let mut ratios = Vec::new();
        for n in [16, 32] {
            let g = grid(n);
            let u = u_of(&g);
            let a = solve_a(&u, GaugeKind::Darwin, &ASolveOptions::default(), None).unwrap().field;
            let v = solve_v(&u);
            ratios.push(elliptic_estimate_report(&u, &a, &v).unwrap());
        }
        let rel = |a: f64, b: f64| (a - b).abs() / b;
        assert!(rel(ratios[0].grad_a_over_h1, ratios[1].grad_a_over_h1) < 0.05);
        assert!(rel(ratios[0].v_h1_over_h1_sq, ratios[1].v_h1_over_h1_sq) < 0.05);
    }
}
