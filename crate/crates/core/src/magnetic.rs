//! Magnetic differential operators `∇_A = ∇ − iA`, `Δ_A`, `(σ·∇_A)²` and the
//! Pauli current density.
//!
//! No dealiasing happens here; operators are exact compositions of spectral
//! derivatives and pointwise products.

use crate::error::Result;
use crate::field::{same_grid, ScalarField, VectorField};
use crate::real::{Cplx, Real};
use crate::spectral::{self, Axis};
use crate::spinor::{charge_density, sigma_dot, spin_density, PauliMatrix, SpinorField};

/// How `(σ·∇_A)²` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpinLaplacianMode {
    /// `σ·∇_A` applied twice.
    Direct,
    /// `Δ_A u + (σ·B) u` with `B = ∇×A`.
    Decomposed,
}

/// Which of the two equivalent current formulas to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CurrentForm {
    /// `Im⟨u, ∇_A u⟩ + ½ ∇×⟨u, σu⟩`
    #[default]
    Pauli,
    /// `Im⟨σu, (σ·∇_A) u⟩`
    SpinorPairing,
}

/// `u ↦ (∂_k u − i A_k u)` combined with precomputed `∂_k u`.
pub(crate) fn apply_minimal_coupling<T: Real>(
    grad: [SpinorField<T>; 3],
    u: &SpinorField<T>,
    a: &VectorField<T>,
) -> [SpinorField<T>; 3] {
    let mut k = 0;
    grad.map(|d| {
        let ak = a.component(k);
        k += 1;
        d.map_pointwise(|idx, x, y| {
            let (u1, u2) = u.at(idx);
            // −i A u = (A Im u, −A Re u)
            let s = ak[idx];
            (
                x + Cplx::new(s * u1.im, -s * u1.re),
                y + Cplx::new(s * u2.im, -s * u2.re),
            )
        })
    })
}

/// Components `∂_k u − i A_k u`, k = 1..3.
pub fn magnetic_gradient<T: Real>(
    u: &SpinorField<T>,
    a: &VectorField<T>,
) -> Result<[SpinorField<T>; 3]> {
    same_grid(u.grid(), a.grid())?;
    Ok(apply_minimal_coupling(u.gradient(), u, a))
}

/// `Σ_k σ_k w_k` for a triple of spinors.
pub(crate) fn sigma_contract<T: Real>(w: &[SpinorField<T>; 3]) -> SpinorField<T> {
    let grid = w[0].grid();
    let mut u1 = Vec::with_capacity(grid.len());
    let mut u2 = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let mut acc = (Cplx::new(T::zero(), T::zero()), Cplx::new(T::zero(), T::zero()));
        for (s, wk) in PauliMatrix::ALL.iter().zip(w) {
            let (a, b) = wk.at(idx);
            let (x, y) = s.apply(a, b);
            acc = (acc.0 + x, acc.1 + y);
        }
        u1.push(acc.0);
        u2.push(acc.1);
    }
    SpinorField::from_raw(grid, u1, u2)
}

/// `(σ·∇_A) u`.
pub fn sigma_magnetic_gradient<T: Real>(
    u: &SpinorField<T>,
    a: &VectorField<T>,
) -> Result<SpinorField<T>> {
    Ok(sigma_contract(&magnetic_gradient(u, a)?))
}

/// `Δ_A u` through the expansion `Δu − 2iA·∇u − i(div A)u − |A|²u`.
pub fn magnetic_laplacian<T: Real>(u: &SpinorField<T>, a: &VectorField<T>) -> Result<SpinorField<T>> {
    same_grid(u.grid(), a.grid())?;
    let lap = u.laplacian();
    let grad = u.gradient();
    let div_a = spectral::divergence(a);
    let two = T::two();
    Ok(lap.map_pointwise(|idx, l1, l2| {
        let av = a.at(idx);
        let a2 = av[0] * av[0] + av[1] * av[1] + av[2] * av[2];
        let d = div_a.values()[idx];
        let (u1, u2) = u.at(idx);
        let mut adotgrad = (Cplx::new(T::zero(), T::zero()), Cplx::new(T::zero(), T::zero()));
        for (k, g) in grad.iter().enumerate() {
            let (g1, g2) = g.at(idx);
            adotgrad = (adotgrad.0 + g1.scale(av[k]), adotgrad.1 + g2.scale(av[k]));
        }
        // −i z = (z.im, −z.re)
        let minus_i = |z: Cplx<T>| Cplx::new(z.im, -z.re);
        (
            l1 + minus_i(adotgrad.0.scale(two) + u1.scale(d)) - u1.scale(a2),
            l2 + minus_i(adotgrad.1.scale(two) + u2.scale(d)) - u2.scale(a2),
        )
    }))
}

/// `Σ_k (∂_k − iA_k)² u` by composing the magnetic gradient with itself.
pub fn magnetic_laplacian_composed<T: Real>(
    u: &SpinorField<T>,
    a: &VectorField<T>,
) -> Result<SpinorField<T>> {
    let first = magnetic_gradient(u, a)?;
    let mut out = SpinorField::zeros(u.grid());
    for (k, wk) in first.iter().enumerate() {
        let dk = wk.derivative(Axis::ALL[k]);
        let ak = a.component(k);
        let term = dk.map_pointwise(|idx, x, y| {
            let (w1, w2) = wk.at(idx);
            let s = ak[idx];
            (
                x + Cplx::new(s * w1.im, -s * w1.re),
                y + Cplx::new(s * w2.im, -s * w2.re),
            )
        });
        out.axpy(Cplx::new(T::one(), T::zero()), &term)?;
    }
    Ok(out)
}

/// Magnetic field `B = ∇×A` (spectral curl, so `div B = 0` identically).
pub fn magnetic_field<T: Real>(a: &VectorField<T>) -> VectorField<T> {
    spectral::curl(a)
}

/// The Pauli operator `(σ·∇_A)² u`.
pub fn spin_magnetic_laplacian<T: Real>(
    u: &SpinorField<T>,
    a: &VectorField<T>,
    mode: SpinLaplacianMode,
) -> Result<SpinorField<T>> {
    match mode {
        SpinLaplacianMode::Direct => {
            let w = sigma_magnetic_gradient(u, a)?;
            sigma_magnetic_gradient(&w, a)
        }
        SpinLaplacianMode::Decomposed => {
            let lap_a = magnetic_laplacian(u, a)?;
            let b = magnetic_field(a);
            lap_a.add(&sigma_dot(&b, u)?)
        }
    }
}

/// `Im⟨u, ∇u⟩ + ½∇×⟨u, σu⟩`: the current at `A = 0`, i.e. the part of `J`
/// that does not depend on the magnetic potential.
pub fn current_without_potential<T: Real>(u: &SpinorField<T>) -> VectorField<T> {
    let grad = u.gradient();
    current_without_potential_from_gradient(u, &grad)
}

pub(crate) fn current_without_potential_from_gradient<T: Real>(
    u: &SpinorField<T>,
    grad: &[SpinorField<T>; 3],
) -> VectorField<T> {
    let grid = u.grid();
    let mut spin_curl = spectral::curl(&spin_density(u));
    let half = T::half();
    for (k, g) in grad.iter().enumerate() {
        let out = spin_curl.component_mut(k);
        for (idx, o) in out.iter_mut().enumerate() {
            let (u1, u2) = u.at(idx);
            let (g1, g2) = g.at(idx);
            let im = (u1.conj() * g1 + u2.conj() * g2).im;
            *o = *o * half + im;
        }
    }
    debug_assert_eq!(spin_curl.grid(), grid);
    spin_curl
}

/// Pauli current density `J(u, A)`.
pub fn current_density<T: Real>(u: &SpinorField<T>, a: &VectorField<T>) -> Result<VectorField<T>> {
    current_density_with(u, a, CurrentForm::Pauli)
}

pub fn current_density_with<T: Real>(
    u: &SpinorField<T>,
    a: &VectorField<T>,
    form: CurrentForm,
) -> Result<VectorField<T>> {
    same_grid(u.grid(), a.grid())?;
    match form {
        CurrentForm::Pauli => {
            let f = current_without_potential(u);
            let rho = charge_density(u);
            Ok(subtract_potential_term(f, a, &rho))
        }
        CurrentForm::SpinorPairing => {
            let w = sigma_magnetic_gradient(u, a)?;
            let comps = PauliMatrix::ALL.map(|s| {
                (0..u.grid().len())
                    .map(|idx| {
                        let (a1, a2) = u.at(idx);
                        let (s1, s2) = s.apply(a1, a2);
                        let (w1, w2) = w.at(idx);
                        (s1.conj() * w1 + s2.conj() * w2).im
                    })
                    .collect()
            });
            Ok(VectorField::from_raw(u.grid(), comps))
        }
    }
}

/// `f − A|u|²`
pub(crate) fn subtract_potential_term<T: Real>(
    mut f: VectorField<T>,
    a: &VectorField<T>,
    rho: &ScalarField<T>,
) -> VectorField<T> {
    for k in 0..3 {
        let ak = a.component(k).to_vec();
        for ((o, &x), &r) in f.component_mut(k).iter_mut().zip(&ak).zip(rho.values()) {
            *o = *o - x * r;
        }
    }
    f
}
