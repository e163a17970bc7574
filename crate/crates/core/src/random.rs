//! Reproducible random band-limited fields for identity checks and tests.
//!
//! "Band-limited" means every Fourier mode index satisfies `|m_i| ≤ band`.
//! The default band `⌊(n/2 − 1)/3⌋` keeps cubic products (such as `|A|²u`)
//! free of aliasing, so discrete operator identities hold to round-off.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{ScalarField, VectorField};
use crate::grid::{mode_index, Grid};
use crate::real::{Cplx, Real};
use crate::spectral::{self, Spectrum};
use crate::spinor::SpinorField;

/// Largest band for which cubic products of band-limited fields do not alias.
pub fn alias_free_band(n: usize) -> usize {
    (n / 2 - 1) / 3
}

pub struct FieldSampler<T: Real> {
    grid: Grid<T>,
    rng: ChaCha8Rng,
}

impl<T: Real> FieldSampler<T> {
    pub fn new(grid: &Grid<T>, seed: u64) -> Self {
        Self {
            grid: grid.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn default_band(&self) -> usize {
        alias_free_band(self.grid.n())
    }

    fn random_spectrum(&mut self, band: usize) -> Spectrum<T> {
        let n = self.grid.n();
        let band = band.min(n / 2 - 1) as u64;
        (0..self.grid.len())
            .map(|idx| {
                let (i, j, k) = self.grid.coords(idx);
                let inside = [i, j, k]
                    .iter()
                    .all(|&m| mode_index(m, n).unsigned_abs() <= band);
                // draw unconditionally so the stream does not depend on the band
                let re: f64 = self.rng.gen_range(-1.0..1.0);
                let im: f64 = self.rng.gen_range(-1.0..1.0);
                if inside {
                    Cplx::new(T::lit(re), T::lit(im))
                } else {
                    Cplx::new(T::zero(), T::zero())
                }
            })
            .collect()
    }

    fn complex_in_band(&mut self, band: usize) -> Vec<Cplx<T>> {
        let spec = self.random_spectrum(band);
        spectral::inverse_complex(&self.grid, spec)
    }

    fn rms_scale(values: &mut [Cplx<T>], amplitude: T) {
        let ms = values.iter().map(|z| z.norm_sqr()).sum::<T>()
            / T::from_usize_lossy(values.len());
        let s = if ms > T::zero() {
            amplitude / ms.sqrt()
        } else {
            T::zero()
        };
        values.iter_mut().for_each(|z| *z = z.scale(s));
    }

    /// Real field with modes `|m_i| ≤ band`, scaled to the given RMS value.
    pub fn scalar_in_band(&mut self, band: usize, amplitude: T) -> ScalarField<T> {
        let mut z = self.complex_in_band(band);
        let mut re: Vec<Cplx<T>> = z.drain(..).map(|c| Cplx::new(c.re, T::zero())).collect();
        Self::rms_scale(&mut re, amplitude);
        ScalarField::from_raw(&self.grid, re.into_iter().map(|c| c.re).collect())
    }

    pub fn scalar_band_limited(&mut self, amplitude: T) -> ScalarField<T> {
        let b = self.default_band();
        self.scalar_in_band(b, amplitude)
    }

    pub fn scalar_full_band(&mut self, amplitude: T) -> ScalarField<T> {
        let b = self.grid.n() / 2 - 1;
        self.scalar_in_band(b, amplitude)
    }

    pub fn vector_in_band(&mut self, band: usize, amplitude: T) -> VectorField<T> {
        let comps = [0, 1, 2].map(|_| self.scalar_in_band(band, amplitude));
        VectorField::from_scalars(comps).expect("same grid")
    }

    pub fn vector_band_limited(&mut self, amplitude: T) -> VectorField<T> {
        let b = self.default_band();
        self.vector_in_band(b, amplitude)
    }

    pub fn vector_full_band(&mut self, amplitude: T) -> VectorField<T> {
        let b = self.grid.n() / 2 - 1;
        self.vector_in_band(b, amplitude)
    }

    /// Mean-zero divergence-free field (Leray projection of a random field).
    pub fn divergence_free_band_limited(&mut self, amplitude: T) -> VectorField<T> {
        let v = self.vector_band_limited(amplitude);
        spectral::leray_project(&v)
    }

    pub fn spinor_in_band(&mut self, band: usize, amplitude: T) -> SpinorField<T> {
        let mut u1 = self.complex_in_band(band);
        let mut u2 = self.complex_in_band(band);
        Self::rms_scale(&mut u1, amplitude);
        Self::rms_scale(&mut u2, amplitude);
        SpinorField::from_raw(&self.grid, u1, u2)
    }

    pub fn spinor_band_limited(&mut self, amplitude: T) -> SpinorField<T> {
        let b = self.default_band();
        self.spinor_in_band(b, amplitude)
    }

    pub fn spinor_full_band(&mut self, amplitude: T) -> SpinorField<T> {
        let b = self.grid.n() / 2 - 1;
        self.spinor_in_band(b, amplitude)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> T {
        T::lit(self.rng.gen_range(lo..hi))
    }
}
