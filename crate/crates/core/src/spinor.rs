//! 2-spinor fields, the Pauli matrices and the pointwise densities built from them.

use crate::error::{Error, Result};
use crate::field::{check_len, same_grid, ScalarField, VectorField};
use crate::grid::Grid;
use crate::real::{cplx, imag_unit, Cplx, Real};
use crate::spectral::{self, Axis, SpectralField, Spectrum};

/// Complex 2-component field `u = (u₁, u₂)`.
#[derive(Clone, Debug)]
pub struct SpinorField<T: Real> {
    grid: Grid<T>,
    u1: Vec<Cplx<T>>,
    u2: Vec<Cplx<T>>,
}

/// One of `σ₁, σ₂, σ₃`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PauliMatrix {
    Sigma1,
    Sigma2,
    Sigma3,
}

impl PauliMatrix {
    pub const ALL: [PauliMatrix; 3] = [Self::Sigma1, Self::Sigma2, Self::Sigma3];

    /// `index` in 1..=3.
    pub fn new(index: usize) -> Option<Self> {
        match index {
            1 => Some(Self::Sigma1),
            2 => Some(Self::Sigma2),
            3 => Some(Self::Sigma3),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Self::Sigma1 => 1,
            Self::Sigma2 => 2,
            Self::Sigma3 => 3,
        }
    }

    pub fn entries<T: Real>(self) -> [[Cplx<T>; 2]; 2] {
        let o = Cplx::new(T::zero(), T::zero());
        let one = Cplx::new(T::one(), T::zero());
        let i = imag_unit::<T>();
        match self {
            Self::Sigma1 => [[o, one], [one, o]],
            Self::Sigma2 => [[o, -i], [i, o]],
            Self::Sigma3 => [[one, o], [o, -one]],
        }
    }

    /// `σ_k (a, b)ᵀ`.
    #[inline]
    pub fn apply<T: Real>(self, a: Cplx<T>, b: Cplx<T>) -> (Cplx<T>, Cplx<T>) {
        match self {
            Self::Sigma1 => (b, a),
            Self::Sigma2 => (cplx(b.im, -b.re), cplx(-a.im, a.re)),
            Self::Sigma3 => (a, -b),
        }
    }
}

/// Product of two 2×2 complex matrices.
pub fn mat_mul<T: Real>(a: &[[Cplx<T>; 2]; 2], b: &[[Cplx<T>; 2]; 2]) -> [[Cplx<T>; 2]; 2] {
    let mut out = [[Cplx::new(T::zero(), T::zero()); 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            *entry = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

/// The matrix `Σ_k v_k σ_k` for a (possibly complex) 3-vector.
#[inline]
pub fn sigma_matrix<T: Real>(v: [Cplx<T>; 3]) -> [[Cplx<T>; 2]; 2] {
    let i = imag_unit::<T>();
    [[v[2], v[0] - i * v[1]], [v[0] + i * v[1], -v[2]]]
}

impl<T: Real> SpinorField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        let z = vec![Cplx::new(T::zero(), T::zero()); grid.len()];
        Self {
            grid: grid.clone(),
            u1: z.clone(),
            u2: z,
        }
    }

    pub fn constant(grid: &Grid<T>, c: [Cplx<T>; 2]) -> Self {
        Self {
            grid: grid.clone(),
            u1: vec![c[0]; grid.len()],
            u2: vec![c[1]; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn([T; 3]) -> [Cplx<T>; 2]) -> Self {
        let mut u1 = Vec::with_capacity(grid.len());
        let mut u2 = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let [a, b] = f(grid.position(idx));
            u1.push(a);
            u2.push(b);
        }
        Self {
            grid: grid.clone(),
            u1,
            u2,
        }
    }

    /// Wraps raw component arrays; rejects wrong lengths and non-finite entries.
    pub fn from_components(grid: &Grid<T>, u1: Vec<Cplx<T>>, u2: Vec<Cplx<T>>) -> Result<Self> {
        check_len(grid.len(), u1.len())?;
        check_len(grid.len(), u2.len())?;
        if u1.iter().chain(&u2).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            grid: grid.clone(),
            u1,
            u2,
        })
    }

    pub(crate) fn from_raw(grid: &Grid<T>, u1: Vec<Cplx<T>>, u2: Vec<Cplx<T>>) -> Self {
        debug_assert!(u1.len() == grid.len() && u2.len() == grid.len());
        Self {
            grid: grid.clone(),
            u1,
            u2,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn u1(&self) -> &[Cplx<T>] {
        &self.u1
    }

    pub fn u2(&self) -> &[Cplx<T>] {
        &self.u2
    }

    pub fn components(&self) -> [&[Cplx<T>]; 2] {
        [&self.u1, &self.u2]
    }

    pub fn components_mut(&mut self) -> [&mut Vec<Cplx<T>>; 2] {
        [&mut self.u1, &mut self.u2]
    }

    pub fn into_components(self) -> (Vec<Cplx<T>>, Vec<Cplx<T>>) {
        (self.u1, self.u2)
    }

    #[inline]
    pub fn at(&self, idx: usize) -> (Cplx<T>, Cplx<T>) {
        (self.u1[idx], self.u2[idx])
    }

    pub fn is_finite(&self) -> bool {
        self.u1.iter().chain(&self.u2).all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `‖u‖²_{L²} = (u, u)`.
    pub fn l2_norm_sq(&self) -> T {
        self.u1
            .iter()
            .chain(&self.u2)
            .map(|z| z.norm_sqr())
            .sum::<T>()
            * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> T {
        self.l2_norm_sq().sqrt()
    }

    pub fn scale(&mut self, s: Cplx<T>) {
        for z in self.u1.iter_mut().chain(self.u2.iter_mut()) {
            *z = *z * s;
        }
    }

    pub fn scale_real(&mut self, s: T) {
        for z in self.u1.iter_mut().chain(self.u2.iter_mut()) {
            *z = z.scale(s);
        }
    }

    pub fn scaled(&self, s: Cplx<T>) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: Cplx<T>, other: &Self) -> Result<()> {
        same_grid(&self.grid, &other.grid)?;
        for (a, &b) in self.u1.iter_mut().zip(&other.u1) {
            *a = *a + s * b;
        }
        for (a, &b) in self.u2.iter_mut().zip(&other.u2) {
            *a = *a + s * b;
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(Cplx::new(T::one(), T::zero()), other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(Cplx::new(-T::one(), T::zero()), other)?;
        Ok(out)
    }

    /// Pointwise product with a real scalar field (e.g. `V u`).
    pub fn mul_scalar_field(&self, f: &ScalarField<T>) -> Result<Self> {
        same_grid(&self.grid, f.grid())?;
        let m = |c: &[Cplx<T>]| -> Vec<Cplx<T>> {
            c.iter().zip(f.values()).map(|(z, &v)| z.scale(v)).collect()
        };
        Ok(Self::from_raw(&self.grid, m(&self.u1), m(&self.u2)))
    }

    /// Pointwise map applied to both components with the grid index.
    pub fn map_pointwise(&self, f: impl Fn(usize, Cplx<T>, Cplx<T>) -> (Cplx<T>, Cplx<T>)) -> Self {
        let mut u1 = Vec::with_capacity(self.grid.len());
        let mut u2 = Vec::with_capacity(self.grid.len());
        for idx in 0..self.grid.len() {
            let (a, b) = f(idx, self.u1[idx], self.u2[idx]);
            u1.push(a);
            u2.push(b);
        }
        Self::from_raw(&self.grid, u1, u2)
    }

    pub fn spectra(&self) -> [Spectrum<T>; 2] {
        [
            spectral::forward_complex(&self.grid, &self.u1),
            spectral::forward_complex(&self.grid, &self.u2),
        ]
    }

    pub fn from_spectra(grid: &Grid<T>, spec: [Spectrum<T>; 2]) -> Self {
        let [a, b] = spec;
        Self::from_raw(
            grid,
            spectral::inverse_complex(grid, a),
            spectral::inverse_complex(grid, b),
        )
    }

    /// Componentwise spectral derivative.
    pub fn derivative(&self, axis: Axis) -> Self {
        let spec = self.spectra();
        Self::from_spectra(
            &self.grid,
            spec.map(|s| spectral::derivative_spectrum(&self.grid, &s, axis)),
        )
    }

    /// `(∂₁u, ∂₂u, ∂₃u)` from a single pair of forward transforms.
    pub fn gradient(&self) -> [Self; 3] {
        let spec = self.spectra();
        Axis::ALL.map(|ax| {
            Self::from_spectra(
                &self.grid,
                [
                    spectral::derivative_spectrum(&self.grid, &spec[0], ax),
                    spectral::derivative_spectrum(&self.grid, &spec[1], ax),
                ],
            )
        })
    }

    /// Componentwise spectral Laplacian.
    pub fn laplacian(&self) -> Self {
        let spec = self.spectra().map(|mut s| {
            spectral::neg_laplacian_spectrum(&self.grid, &mut s);
            s.iter_mut().for_each(|z| *z = -*z);
            s
        });
        Self::from_spectra(&self.grid, spec)
    }

    /// 2/3-rule truncation of both components.
    pub fn dealiased(&self) -> Self {
        let spec = self.spectra().map(|mut s| {
            spectral::truncate_spectrum(&self.grid, &mut s);
            s
        });
        Self::from_spectra(&self.grid, spec)
    }
}

impl<T: Real> SpectralField<T> for SpinorField<T> {
    fn grid(&self) -> &Grid<T> {
        &self.grid
    }
    fn component_spectra(&self) -> Vec<Spectrum<T>> {
        self.spectra().into()
    }
}

/// Pointwise `(Σ_k v_k σ_k) u` for a real vector field `v`.
pub fn sigma_dot<T: Real>(v: &VectorField<T>, u: &SpinorField<T>) -> Result<SpinorField<T>> {
    same_grid(v.grid(), u.grid())?;
    Ok(u.map_pointwise(|idx, a, b| {
        let [v1, v2, v3] = v.at(idx);
        // [[v3, v1 - i v2], [v1 + i v2, -v3]]
        let off_up = Cplx::new(v1, -v2);
        let off_dn = Cplx::new(v1, v2);
        (a.scale(v3) + off_up * b, off_dn * a - b.scale(v3))
    }))
}

/// `(Σ_k v_k σ_k) u` for a constant (real or complex) 3-vector.
pub fn sigma_dot_const<T: Real>(v: [Cplx<T>; 3], u: &SpinorField<T>) -> SpinorField<T> {
    let m = sigma_matrix(v);
    u.map_pointwise(|_, a, b| (m[0][0] * a + m[0][1] * b, m[1][0] * a + m[1][1] * b))
}

/// L² pairing `(v, w) = ∫ ⟨v, w⟩ dx`, antilinear in `v`.
pub fn inner_product<T: Real>(v: &SpinorField<T>, w: &SpinorField<T>) -> Result<Cplx<T>> {
    same_grid(v.grid(), w.grid())?;
    let mut acc = Cplx::new(T::zero(), T::zero());
    for (a, b) in v.u1.iter().zip(&w.u1) {
        acc = acc + a.conj() * b;
    }
    for (a, b) in v.u2.iter().zip(&w.u2) {
        acc = acc + a.conj() * b;
    }
    Ok(acc.scale(v.grid.cell_volume()))
}

/// `|u|² = |u₁|² + |u₂|²`.
pub fn charge_density<T: Real>(u: &SpinorField<T>) -> ScalarField<T> {
    let values = u
        .u1
        .iter()
        .zip(&u.u2)
        .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
        .collect();
    ScalarField::from_raw(&u.grid, values)
}

/// Pointwise `⟨u, σ_k u⟩` before the imaginary part is dropped.
#[inline]
fn spin_expectations<T: Real>(a: Cplx<T>, b: Cplx<T>) -> [Cplx<T>; 3] {
    PauliMatrix::ALL.map(|s| {
        let (sa, sb) = s.apply(a, b);
        a.conj() * sa + b.conj() * sb
    })
}

/// Largest `|Im ⟨u, σ_k u⟩|` over the grid relative to `max |u|²`.
pub fn spin_density_imag_defect<T: Real>(u: &SpinorField<T>) -> T {
    let mut worst = T::zero();
    let mut scale = T::zero();
    for idx in 0..u.grid.len() {
        let (a, b) = u.at(idx);
        scale = scale.max(a.norm_sqr() + b.norm_sqr());
        for e in spin_expectations(a, b) {
            worst = worst.max(e.im.abs());
        }
    }
    if scale > T::zero() {
        worst / scale
    } else {
        worst
    }
}

/// Real 3-vector field `⟨u, σu⟩`.
pub fn spin_density<T: Real>(u: &SpinorField<T>) -> VectorField<T> {
    let len = u.grid.len();
    let mut comps = [
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
    ];
    let tol = T::lit(1e3) * T::epsilon();
    for idx in 0..len {
        let (a, b) = u.at(idx);
        let e = spin_expectations(a, b);
        debug_assert!(e
            .iter()
            .all(|z| z.im.abs() <= tol * (a.norm_sqr() + b.norm_sqr()).max(T::min_positive_value())));
        for (c, z) in comps.iter_mut().zip(e) {
            c.push(z.re);
        }
    }
    VectorField::from_raw(&u.grid, comps)
}
