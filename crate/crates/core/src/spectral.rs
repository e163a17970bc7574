//! Fourier multipliers on periodic fields: derivatives, inverse Laplacian,
//! Leray projection, Sobolev norms and 2/3-rule truncation.
//!
//! Odd multipliers (`∂_k`, div, curl, Leray) use the Nyquist-zeroed
//! wavenumbers so real fields stay real and `div ∘ leray_project` vanishes
//! identically. Even multipliers (`Δ`, `⟨ξ⟩^s`) use the full wavenumbers.

use crate::error::Result;
use crate::field::{same_grid, ScalarField, VectorField};
use crate::grid::Grid;
use crate::real::{Cplx, Real};

/// Spatial axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// 1-based axis number (1, 2, 3) as in `∂₁, ∂₂, ∂₃`.
    pub fn from_number(k: usize) -> Option<Self> {
        match k {
            1 => Some(Axis::X),
            2 => Some(Axis::Y),
            3 => Some(Axis::Z),
            _ => None,
        }
    }
}

pub type Spectrum<T> = Vec<Cplx<T>>;

#[inline]
fn czero<T: Real>() -> Cplx<T> {
    Cplx::new(T::zero(), T::zero())
}

/// Spectral index of `-k` for spectral index `idx`.
#[inline]
pub fn neg_index<T: Real>(grid: &Grid<T>, idx: usize) -> usize {
    grid.negated_index(idx)
}

/// Forward transform of a complex array (copied).
pub fn forward_complex<T: Real>(grid: &Grid<T>, data: &[Cplx<T>]) -> Spectrum<T> {
    let mut buf = data.to_vec();
    grid.forward(&mut buf);
    buf
}

/// Inverse transform of a spectrum (consumed).
pub fn inverse_complex<T: Real>(grid: &Grid<T>, mut spec: Spectrum<T>) -> Vec<Cplx<T>> {
    grid.inverse(&mut spec);
    spec
}

/// Forward transforms of several real arrays, packing two per complex FFT.
pub fn forward_reals<T: Real>(grid: &Grid<T>, fields: &[&[T]]) -> Vec<Spectrum<T>> {
    let mut out = Vec::with_capacity(fields.len());
    for chunk in fields.chunks(2) {
        match chunk {
            [a, b] => {
                let mut z: Vec<Cplx<T>> =
                    a.iter().zip(b.iter()).map(|(&x, &y)| Cplx::new(x, y)).collect();
                grid.forward(&mut z);
                let half = T::half();
                let mut sa = Vec::with_capacity(z.len());
                let mut sb = Vec::with_capacity(z.len());
                for idx in 0..z.len() {
                    let zk = z[idx];
                    let zm = z[grid.negated_index(idx)].conj();
                    sa.push((zk + zm).scale(half));
                    // (zk - zm) / (2i)
                    let d = (zk - zm).scale(half);
                    sb.push(Cplx::new(d.im, -d.re));
                }
                out.push(sa);
                out.push(sb);
            }
            [a] => {
                let mut z: Vec<Cplx<T>> = a.iter().map(|&x| Cplx::new(x, T::zero())).collect();
                grid.forward(&mut z);
                out.push(z);
            }
            _ => unreachable!(),
        }
    }
    out
}

/// Inverse transforms of spectra of real fields (Hermitian symmetric), two per FFT.
///
/// Imaginary round-off is discarded.
pub fn inverse_reals<T: Real>(grid: &Grid<T>, spectra: Vec<Spectrum<T>>) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(spectra.len());
    let mut iter = spectra.into_iter();
    while let Some(a) = iter.next() {
        match iter.next() {
            Some(b) => {
                // a + i b
                let mut z: Vec<Cplx<T>> = a
                    .into_iter()
                    .zip(b)
                    .map(|(x, y)| Cplx::new(x.re - y.im, x.im + y.re))
                    .collect();
                grid.inverse(&mut z);
                out.push(z.iter().map(|c| c.re).collect());
                out.push(z.iter().map(|c| c.im).collect());
            }
            None => {
                let mut z = a;
                grid.inverse(&mut z);
                out.push(z.iter().map(|c| c.re).collect());
            }
        }
    }
    out
}

pub fn forward_scalar<T: Real>(f: &ScalarField<T>) -> Spectrum<T> {
    forward_reals(f.grid(), &[f.values()]).pop().unwrap()
}

pub fn inverse_scalar<T: Real>(grid: &Grid<T>, spec: Spectrum<T>) -> ScalarField<T> {
    ScalarField::from_raw(grid, inverse_reals(grid, vec![spec]).pop().unwrap())
}

pub fn forward_vector<T: Real>(v: &VectorField<T>) -> [Spectrum<T>; 3] {
    let [a, b, c] = v.components();
    let mut s = forward_reals(v.grid(), &[a, b, c]);
    let z = s.pop().unwrap();
    let y = s.pop().unwrap();
    let x = s.pop().unwrap();
    [x, y, z]
}

pub fn inverse_vector<T: Real>(grid: &Grid<T>, spec: [Spectrum<T>; 3]) -> VectorField<T> {
    let mut r = inverse_reals(grid, spec.into());
    let z = r.pop().unwrap();
    let y = r.pop().unwrap();
    let x = r.pop().unwrap();
    VectorField::from_raw(grid, [x, y, z])
}

/// Multiplies a spectrum by `i k'_axis` in place.
pub fn differentiate_spectrum<T: Real>(grid: &Grid<T>, spec: &mut [Cplx<T>], axis: Axis) {
    let kd = grid.deriv_wavenumbers();
    let n = grid.n();
    let a = axis.index();
    for (idx, z) in spec.iter_mut().enumerate() {
        let m = match a {
            0 => idx % n,
            1 => (idx / n) % n,
            _ => idx / (n * n),
        };
        let k = kd[m];
        *z = Cplx::new(-k * z.im, k * z.re);
    }
}

/// Returns `i k'_axis · spec`.
pub fn derivative_spectrum<T: Real>(grid: &Grid<T>, spec: &[Cplx<T>], axis: Axis) -> Spectrum<T> {
    let mut out = spec.to_vec();
    differentiate_spectrum(grid, &mut out, axis);
    out
}

/// Divides by `|k|²`, zeroing the mean mode.
pub fn inv_neg_laplacian_spectrum<T: Real>(grid: &Grid<T>, spec: &mut [Cplx<T>]) {
    for (z, &k2) in spec.iter_mut().zip(grid.k_squared()) {
        *z = if k2 > T::zero() { z.unscale(k2) } else { czero() };
    }
}

pub fn neg_laplacian_spectrum<T: Real>(grid: &Grid<T>, spec: &mut [Cplx<T>]) {
    for (z, &k2) in spec.iter_mut().zip(grid.k_squared()) {
        *z = z.scale(k2);
    }
}

/// Applies the Leray symbol `δ_ij − ξ_i ξ_j / |ξ|²` in place. Modes with a
/// vanishing derivative wavevector pass through unchanged.
pub fn leray_spectrum<T: Real>(grid: &Grid<T>, spec: &mut [Spectrum<T>; 3]) {
    for idx in 0..grid.len() {
        let xi = grid.deriv_wavevector(idx);
        let xi2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if xi2 == T::zero() {
            continue;
        }
        let dot = (spec[0][idx].scale(xi[0]) + spec[1][idx].scale(xi[1]) + spec[2][idx].scale(xi[2]))
            .unscale(xi2);
        for c in 0..3 {
            spec[c][idx] = spec[c][idx] - dot.scale(xi[c]);
        }
    }
}

/// Zeroes the modes removed by the 2/3 rule.
pub fn truncate_spectrum<T: Real>(grid: &Grid<T>, spec: &mut [Cplx<T>]) {
    for (z, &keep) in spec.iter_mut().zip(grid.dealias_mask()) {
        if !keep {
            *z = czero();
        }
    }
}

/// Exact spectral derivative `∂_axis f`.
pub fn derivative<T: Real>(f: &ScalarField<T>, axis: Axis) -> ScalarField<T> {
    let mut s = forward_scalar(f);
    differentiate_spectrum(f.grid(), &mut s, axis);
    inverse_scalar(f.grid(), s)
}

pub fn gradient<T: Real>(f: &ScalarField<T>) -> VectorField<T> {
    let grid = f.grid();
    let s = forward_scalar(f);
    let spec = Axis::ALL.map(|ax| derivative_spectrum(grid, &s, ax));
    inverse_vector(grid, spec)
}

pub fn divergence<T: Real>(v: &VectorField<T>) -> ScalarField<T> {
    let grid = v.grid();
    let mut spec = forward_vector(v);
    for (s, ax) in spec.iter_mut().zip(Axis::ALL) {
        differentiate_spectrum(grid, s, ax);
    }
    let [a, b, c] = spec;
    let sum = a
        .into_iter()
        .zip(b)
        .zip(c)
        .map(|((x, y), z)| x + y + z)
        .collect();
    inverse_scalar(grid, sum)
}

/// Spectral curl; its divergence vanishes identically.
pub fn curl<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    let grid = v.grid();
    let spec = forward_vector(v);
    inverse_vector(grid, curl_spectrum(grid, &spec))
}

pub fn curl_spectrum<T: Real>(grid: &Grid<T>, spec: &[Spectrum<T>; 3]) -> [Spectrum<T>; 3] {
    let d = |c: usize, ax: Axis| derivative_spectrum(grid, &spec[c], ax);
    let sub = |a: Spectrum<T>, b: Spectrum<T>| -> Spectrum<T> {
        a.into_iter().zip(b).map(|(x, y)| x - y).collect()
    };
    [
        sub(d(2, Axis::Y), d(1, Axis::Z)),
        sub(d(0, Axis::Z), d(2, Axis::X)),
        sub(d(1, Axis::X), d(0, Axis::Y)),
    ]
}

/// Spectral Laplacian `Δf`.
pub fn laplacian<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let mut s = forward_scalar(f);
    neg_laplacian_spectrum(f.grid(), &mut s);
    let mut out = inverse_scalar(f.grid(), s);
    out.scale(-T::one());
    out
}

/// Forward `−Δf`.
pub fn neg_laplacian<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let mut s = forward_scalar(f);
    neg_laplacian_spectrum(f.grid(), &mut s);
    inverse_scalar(f.grid(), s)
}

pub fn neg_laplacian_vector<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    let mut spec = forward_vector(v);
    for s in spec.iter_mut() {
        neg_laplacian_spectrum(v.grid(), s);
    }
    inverse_vector(v.grid(), spec)
}

/// Mean-zero solution `g` of `−Δg = f − mean(f)`.
pub fn inv_neg_laplacian<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let mut s = forward_scalar(f);
    inv_neg_laplacian_spectrum(f.grid(), &mut s);
    inverse_scalar(f.grid(), s)
}

/// Componentwise [`inv_neg_laplacian`].
pub fn inv_neg_laplacian_vector<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    let mut spec = forward_vector(v);
    for s in spec.iter_mut() {
        inv_neg_laplacian_spectrum(v.grid(), s);
    }
    inverse_vector(v.grid(), spec)
}

/// Leray projection onto divergence-free fields.
pub fn leray_project<T: Real>(j: &VectorField<T>) -> VectorField<T> {
    let mut spec = forward_vector(j);
    leray_spectrum(j.grid(), &mut spec);
    inverse_vector(j.grid(), spec)
}

pub fn dealias_scalar<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let mut s = forward_scalar(f);
    truncate_spectrum(f.grid(), &mut s);
    inverse_scalar(f.grid(), s)
}

pub fn dealias_vector<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    let mut spec = forward_vector(v);
    for s in spec.iter_mut() {
        truncate_spectrum(v.grid(), s);
    }
    inverse_vector(v.grid(), spec)
}

/// Fields whose Sobolev norm can be taken: anything that exposes the spectra
/// of its components.
pub trait SpectralField<T: Real> {
    fn grid(&self) -> &Grid<T>;
    fn component_spectra(&self) -> Vec<Spectrum<T>>;
}

impl<T: Real> SpectralField<T> for ScalarField<T> {
    fn grid(&self) -> &Grid<T> {
        ScalarField::grid(self)
    }
    fn component_spectra(&self) -> Vec<Spectrum<T>> {
        vec![forward_scalar(self)]
    }
}

impl<T: Real> SpectralField<T> for VectorField<T> {
    fn grid(&self) -> &Grid<T> {
        VectorField::grid(self)
    }
    fn component_spectra(&self) -> Vec<Spectrum<T>> {
        forward_vector(self).into()
    }
}

/// `‖⟨D⟩^s f‖_{L²}` (or `‖D^s f‖_{L²}` when `homogeneous`, zero mode excluded).
pub fn sobolev_norm<T: Real, F: SpectralField<T> + ?Sized>(f: &F, s: T, homogeneous: bool) -> T {
    sobolev_norm_of_spectra(f.grid(), &f.component_spectra(), s, homogeneous)
}

pub fn sobolev_norm_of_spectra<T: Real>(
    grid: &Grid<T>,
    spectra: &[Spectrum<T>],
    s: T,
    homogeneous: bool,
) -> T {
    let weights: Vec<T> = grid
        .k_squared()
        .iter()
        .map(|&k2| {
            if homogeneous {
                if k2 > T::zero() {
                    k2.powf(s)
                } else {
                    T::zero()
                }
            } else {
                (T::one() + k2).powf(s)
            }
        })
        .collect();
    let total: T = spectra
        .iter()
        .map(|sp| {
            sp.iter()
                .zip(&weights)
                .map(|(z, &w)| w * z.norm_sqr())
                .sum::<T>()
        })
        .sum();
    let n6 = T::from_usize_lossy(grid.len()) * T::from_usize_lossy(grid.len());
    (total * grid.volume() / n6).sqrt()
}

/// `‖div v‖_{L²}` computed spectrally.
pub fn divergence_norm<T: Real>(v: &VectorField<T>) -> T {
    divergence(v).l2_norm()
}

/// Ensures two fields share a grid (used by binary operators).
pub fn check_same<T: Real>(a: &Grid<T>, b: &Grid<T>) -> Result<()> {
    same_grid(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::FieldSampler;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid<f64> {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    /// Fourth-order centered difference, the independent oracle for `derivative`.
    fn fd4(f: &ScalarField<f64>, axis: Axis) -> ScalarField<f64> {
        let g = f.grid();
        let n = g.n();
        let h = g.spacing();
        let v = f.values();
        let shift = |idx: usize, d: isize| {
            let (mut c, a) = (
                [g.coords(idx).0, g.coords(idx).1, g.coords(idx).2],
                axis.index(),
            );
            c[a] = ((c[a] as isize + d).rem_euclid(n as isize)) as usize;
            g.index(c[0], c[1], c[2])
        };
        let out = (0..g.len())
            .map(|i| {
                (-v[shift(i, 2)] + 8.0 * v[shift(i, 1)] - 8.0 * v[shift(i, -1)]
                    + v[shift(i, -2)])
                    / (12.0 * h)
            })
            .collect();
        ScalarField::from_values(g, out).unwrap()
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let g = grid(16);
        let f = ScalarField::from_fn(&g, |[x, _, _]| x.sin());
        let d = derivative(&f, Axis::X);
        for (idx, &v) in d.values().iter().enumerate() {
            assert!((v - g.position(idx)[0].cos()).abs() < 1e-13);
        }
        let c = derivative(&ScalarField::constant(&g, 3.0), Axis::Z);
        assert!(c.max_abs() < 1e-13);
    }

    #[test]
    fn derivative_matches_fourth_order_differences() {
        // Band-limited to |m| <= 2: the FD error is O(h^4 k^5) and shrinks 16x per refinement.
        let mut errs = Vec::new();
        for n in [16usize, 32] {
            let g = grid(n);
            let f = ScalarField::from_fn(&g, |[x, y, z]| {
                (2.0 * x + y).sin() + 0.3 * (x - 2.0 * z).cos() + 0.5 * (y + z).sin()
            });
            for ax in Axis::ALL {
                let d = derivative(&f, ax);
                let e = d.sub(&fd4(&f, ax)).unwrap().max_abs();
                assert!(e < 40.0 * g.spacing().powi(4), "n={n} axis={ax:?} err={e}");
                if ax == Axis::X {
                    errs.push(e);
                }
            }
        }
        assert!(errs[0] / errs[1] > 12.0);
    }

    #[test]
    fn inv_neg_laplacian_of_cosine() {
        let g = grid(8);
        let f = ScalarField::from_fn(&g, |[x, _, _]| x.cos());
        let u = inv_neg_laplacian(&f);
        assert!(u.sub(&f).unwrap().max_abs() < 1e-14);
        let z = inv_neg_laplacian(&ScalarField::constant(&g, 2.5));
        assert!(z.max_abs() < 1e-15);
    }

    #[test]
    fn inv_neg_laplacian_inverts_forward_operator() {
        let g = grid(16);
        let mut s = FieldSampler::new(&g, 11);
        let f = s.scalar_full_band(1.0);
        let u = inv_neg_laplacian(&f);
        let back = neg_laplacian(&u);
        let target = f.map(|v| v - f.mean());
        let err = back.sub(&target).unwrap().l2_norm() / target.l2_norm();
        assert!(err < 1e-12, "{err}");
        assert!(u.mean().abs() < 1e-14);
    }

    #[test]
    fn leray_annihilates_gradients_and_fixes_curls() {
        let g = grid(16);
        let mut s = FieldSampler::new(&g, 3);
        let phi = s.scalar_full_band(1.0);
        let grad = gradient(&phi);
        assert!(leray_project(&grad).l2_norm() < 1e-12 * grad.l2_norm());

        let w = s.vector_full_band(1.0);
        let c = curl(&w);
        let p = leray_project(&c);
        assert!(p.sub(&c).unwrap().l2_norm() < 1e-12 * c.l2_norm());

        let j = s.vector_full_band(1.0);
        let pj = leray_project(&j);
        assert!(divergence_norm(&pj) <= 1e-12 * j.l2_norm());
        let ppj = leray_project(&pj);
        assert!(ppj.sub(&pj).unwrap().l2_norm() <= 1e-13 * pj.l2_norm());
    }

    #[test]
    fn leray_passes_mean_through() {
        let g = grid(8);
        let j = VectorField::constant(&g, [1.0, -2.0, 0.5]);
        let p = leray_project(&j);
        assert!(p.sub(&j).unwrap().l2_norm() < 1e-13);
    }

    #[test]
    fn sobolev_norm_examples() {
        let l: f64 = 2.0 * PI;
        let g = grid(8);
        let c = ScalarField::constant(&g, -1.5);
        assert!(rel(sobolev_norm(&c, 0.0, false), 1.5 * l.powf(1.5)) < 1e-13);

        let s1 = crate::spinor::SpinorField::from_fn(&g, |[x, _, _]| {
            [Cplx::new(0.0, x).exp(), Cplx::new(0.0, 0.0)]
        });
        let expected = 2f64.sqrt() * l.powf(1.5);
        assert!(rel(sobolev_norm(&s1, 1.0, false), expected) < 1e-13);
    }

    #[test]
    fn sobolev_h2_matches_operator_assembly() {
        let g = grid(16);
        let mut s = FieldSampler::new(&g, 5);
        let f = s.scalar_band_limited(1.0);
        let grad = Axis::ALL.map(|ax| derivative(&f, ax));
        let grad_sq: f64 = grad.iter().map(|d| d.l2_norm_sq()).sum();
        let lap = laplacian(&f);
        let assembled = f.l2_norm_sq() + 2.0 * grad_sq + lap.l2_norm_sq();
        let h2 = sobolev_norm(&f, 2.0, false);
        assert!(rel(h2 * h2, assembled) < 1e-10);
    }

    #[test]
    fn homogeneous_norm_skips_mean() {
        let g = grid(8);
        let c = ScalarField::constant(&g, 4.0);
        assert!(sobolev_norm(&c, 1.0, true) < 1e-12);
        assert!(sobolev_norm(&c, -1.0, true) < 1e-12);
    }

    #[test]
    fn paired_forward_matches_single() {
        let g = grid(8);
        let mut s = FieldSampler::new(&g, 9);
        let a = s.scalar_full_band(1.0);
        let b = s.scalar_full_band(1.0);
        let paired = forward_reals(&g, &[a.values(), b.values()]);
        let single_a = forward_complex(
            &g,
            &a.values().iter().map(|&x| Cplx::new(x, 0.0)).collect::<Vec<_>>(),
        );
        for (p, q) in paired[0].iter().zip(&single_a) {
            assert!((p - q).norm() < 1e-11);
        }
    }
}
