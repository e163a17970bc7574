//! Periodic cubic lattice and the 3-D FFT pipeline on it.
//!
//! Arrays are stored x-fastest: `idx = i + n * (j + n * k)`. The forward
//! transform is unnormalized and the inverse carries the `1/n³` factor, so
//! with the quadrature weight `spacing³` Parseval reads
//! `spacing³ Σ|f|² = (L³ / n⁶) Σ|f̂|²`.

use std::fmt;
use std::sync::{Arc, Mutex};

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::real::{Cplx, Real};

struct GridData<T: Real> {
    n: usize,
    box_length: T,
    spacing: T,
    /// (2π/L)·{0, 1, …, n/2−1, −n/2, …, −1}
    wavenumbers: Vec<T>,
    /// Same list with the Nyquist entry zeroed; used for odd derivatives.
    deriv_wavenumbers: Vec<T>,
    k_squared: Vec<T>,
    dealias_mask: Vec<bool>,
    /// Flat index of the mode `-k` for each flat index `k`.
    negated: Vec<usize>,
    /// Reused workspace for [`Grid::transform`]; allocated afresh when contended.
    scratch: Mutex<Vec<Cplx<T>>>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

/// Periodic grid on `[0, L)³` with `n` points per axis.
///
/// Cloning is cheap: the wavenumber tables and FFT plans are shared.
#[derive(Clone)]
pub struct Grid<T: Real> {
    inner: Arc<GridData<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.inner.n)
            .field("box_length", &self.inner.box_length)
            .finish()
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n && self.inner.box_length == other.inner.box_length)
    }
}

/// Integer FFT mode index for position `i` along an axis of length `n`.
#[inline]
pub fn mode_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl<T: Real> Grid<T> {
    /// Builds a grid; `n` must be even and at least 4, `box_length` positive and finite.
    pub fn new(n: usize, box_length: T) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidGrid(format!("n = {n} must be at least 4")));
        }
        if n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n = {n} must be even")));
        }
        if !(box_length > T::zero()) || !box_length.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "box_length = {box_length} must be positive and finite"
            )));
        }
        let spacing = box_length / T::from_usize_lossy(n);
        let dk = T::TAU() / box_length;
        let wavenumbers: Vec<T> = (0..n)
            .map(|i| dk * T::lit(mode_index(i, n) as f64))
            .collect();
        let mut deriv_wavenumbers = wavenumbers.clone();
        deriv_wavenumbers[n / 2] = T::zero();

        let len = n * n * n;
        let mut k_squared = Vec::with_capacity(len);
        let mut dealias_mask = Vec::with_capacity(len);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let (kx, ky, kz) = (wavenumbers[i], wavenumbers[j], wavenumbers[k]);
                    k_squared.push(kx * kx + ky * ky + kz * kz);
                    let keep = [i, j, k]
                        .iter()
                        .all(|&m| 3 * mode_index(m, n).unsigned_abs() < n as u64);
                    dealias_mask.push(keep);
                }
            }
        }

        let negated = (0..len)
            .map(|idx| {
                let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
                (n - i) % n + n * ((n - j) % n + n * ((n - k) % n))
            })
            .collect();

        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);

        Ok(Self {
            inner: Arc::new(GridData {
                n,
                box_length,
                spacing,
                wavenumbers,
                deriv_wavenumbers,
                k_squared,
                dealias_mask,
                negated,
                scratch: Mutex::new(Vec::new()),
                fwd,
                inv,
            }),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    #[inline]
    pub fn box_length(&self) -> T {
        self.inner.box_length
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.inner.spacing
    }

    /// Number of grid points, `n³`.
    #[inline]
    pub fn len(&self) -> usize {
        self.inner.n * self.inner.n * self.inner.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `spacing³`.
    #[inline]
    pub fn cell_volume(&self) -> T {
        let h = self.inner.spacing;
        h * h * h
    }

    #[inline]
    pub fn volume(&self) -> T {
        let l = self.inner.box_length;
        l * l * l
    }

    /// Per-axis wavenumbers in standard FFT ordering.
    pub fn wavenumbers(&self) -> &[T] {
        &self.inner.wavenumbers
    }

    /// Per-axis wavenumbers with the Nyquist entry set to zero.
    pub fn deriv_wavenumbers(&self) -> &[T] {
        &self.inner.deriv_wavenumbers
    }

    /// `|k|²` for every spectral index (Nyquist included).
    pub fn k_squared(&self) -> &[T] {
        &self.inner.k_squared
    }

    /// Modes kept by the 2/3 truncation rule.
    pub fn dealias_mask(&self) -> &[bool] {
        &self.inner.dealias_mask
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.inner.n;
        i + n * (j + n * k)
    }

    /// Flat index of the mode `-k`, given the flat index of `k`.
    #[inline]
    pub fn negated_index(&self, idx: usize) -> usize {
        self.inner.negated[idx]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.inner.n;
        (idx % n, (idx / n) % n, idx / (n * n))
    }

    /// Physical coordinates of grid point `idx`.
    #[inline]
    pub fn position(&self, idx: usize) -> [T; 3] {
        let (i, j, k) = self.coords(idx);
        let h = self.inner.spacing;
        [
            h * T::from_usize_lossy(i),
            h * T::from_usize_lossy(j),
            h * T::from_usize_lossy(k),
        ]
    }

    /// Derivative wavevector (Nyquist components zeroed) for spectral index `idx`.
    #[inline]
    pub fn deriv_wavevector(&self, idx: usize) -> [T; 3] {
        let (i, j, k) = self.coords(idx);
        let d = &self.inner.deriv_wavenumbers;
        [d[i], d[j], d[k]]
    }

    /// Full wavevector for spectral index `idx`.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [T; 3] {
        let (i, j, k) = self.coords(idx);
        let w = &self.inner.wavenumbers;
        [w[i], w[j], w[k]]
    }

    /// In-place unnormalized forward 3-D FFT.
    pub fn forward(&self, data: &mut [Cplx<T>]) {
        self.transform(data, &self.inner.fwd);
    }

    /// In-place inverse 3-D FFT including the `1/n³` factor.
    pub fn inverse(&self, data: &mut [Cplx<T>]) {
        self.transform(data, &self.inner.inv);
        let scale = T::one() / T::from_usize_lossy(self.len());
        for z in data.iter_mut() {
            *z = z.scale(scale);
        }
    }

    fn transform(&self, data: &mut [Cplx<T>], fft: &Arc<dyn Fft<T>>) {
        let n = self.inner.n;
        assert_eq!(data.len(), n * n * n, "buffer does not match grid");
        let zero = Cplx::new(T::zero(), T::zero());
        let mut held = self.inner.scratch.try_lock().ok();
        let mut own = Vec::new();
        let buf: &mut Vec<Cplx<T>> = match held.as_deref_mut() {
            Some(b) => b,
            None => &mut own,
        };
        let need = data.len() + fft.get_inplace_scratch_len();
        if buf.len() < need {
            buf.resize(need, zero);
        }
        let (buf, scratch) = buf.split_at_mut(data.len());
        let scratch = &mut scratch[..fft.get_inplace_scratch_len()];

        // Transform the contiguous axis, then rotate (x, y, z) -> (y, z, x) so
        // the next axis becomes contiguous. Three rounds restore the layout.
        fft.process_with_scratch(data, scratch);
        rotate_axes(data, buf, n);
        fft.process_with_scratch(buf, scratch);
        rotate_axes(buf, data, n);
        fft.process_with_scratch(data, scratch);
        rotate_axes(data, buf, n);
        data.copy_from_slice(buf);
    }
}

/// `dst[j + n(k + n i)] = src[i + n(j + n k)]`
fn rotate_axes<T: Copy>(src: &[T], dst: &mut [T], n: usize) {
    let nn = n * n;
    for (k, plane) in src.chunks_exact(nn).enumerate() {
        for i in 0..n {
            let row = &mut dst[n * (k + n * i)..][..n];
            for (out, &x) in row.iter_mut().zip(plane[i..].iter().step_by(n)) {
                *out = x;
            }
        }
    }
}
