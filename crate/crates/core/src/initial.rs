//! Initial spinors: periodized Gaussian packets, plane waves, or a snapshot
//! file, normalized to a requested L² norm.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::real::{Cplx, Real};
use crate::snapshot::Snapshot;
use crate::spinor::SpinorField;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialDataSpec {
    /// `Σ_images exp(−|x−c|²/(2w²)) e^{ik·(x−c)} χ`
    GaussianPacket {
        center: [f64; 3],
        width: f64,
        momentum: [f64; 3],
        spin: [Cplx<f64>; 2],
    },
    /// `e^{ik·x} χ` with integer mode numbers `m`, `k = 2πm/L`.
    PlaneWave { modes: [i64; 3], spin: [Cplx<f64>; 2] },
    /// A spinor snapshot on the same grid.
    File { path: PathBuf },
}

impl InitialDataSpec {
    pub fn validate(&self) -> Result<()> {
        let spin_ok = |s: &[Cplx<f64>; 2]| {
            s.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && s[0].norm_sqr() + s[1].norm_sqr() > 0.0
        };
        match self {
            InitialDataSpec::GaussianPacket { center, width, momentum, spin } => {
                if !(*width > 0.0) || !width.is_finite() {
                    return Err(Error::InvalidArgument(format!("gaussian width must be positive, got {width}")));
                }
                if center.iter().chain(momentum).any(|x| !x.is_finite()) {
                    return Err(Error::InvalidArgument("gaussian center and momentum must be finite".into()));
                }
                if !spin_ok(spin) {
                    return Err(Error::InvalidArgument("spin state must be a finite nonzero 2-vector".into()));
                }
            }
            InitialDataSpec::PlaneWave { spin, .. } => {
                if !spin_ok(spin) {
                    return Err(Error::InvalidArgument("spin state must be a finite nonzero 2-vector".into()));
                }
            }
            InitialDataSpec::File { .. } => {}
        }
        Ok(())
    }
}

/// Builds the initial spinor and rescales it to `‖u₀‖_{L²} = norm`.
pub fn make_initial_data<T: Real>(spec: &InitialDataSpec, norm: f64, grid: &Grid<T>) -> Result<SpinorField<T>> {
    spec.validate()?;
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidArgument(format!("normalization must be positive, got {norm}")));
    }
    let l = grid.box_length().as_f64();
    let raw: SpinorField<T> = match spec {
        InitialDataSpec::GaussianPacket { center, width, momentum, spin } => {
            let reach = ((8.0 * width) / l).ceil() as i64;
            let w2 = 2.0 * width * width;
            SpinorField::from_fn(grid, |x| {
                let x = x.map(|c| c.as_f64());
                let mut acc = Cplx::new(0.0, 0.0);
                for a in -reach..=reach {
                    for b in -reach..=reach {
                        for c in -reach..=reach {
                            let y = [
                                x[0] + a as f64 * l - center[0],
                                x[1] + b as f64 * l - center[1],
                                x[2] + c as f64 * l - center[2],
                            ];
                            let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
                            let phase = momentum[0] * y[0] + momentum[1] * y[1] + momentum[2] * y[2];
                            acc += Cplx::from_polar((-r2 / w2).exp(), phase);
                        }
                    }
                }
                [convert(acc * spin[0]), convert(acc * spin[1])]
            })
        }
        InitialDataSpec::PlaneWave { modes, spin } => {
            let k = modes.map(|m| 2.0 * std::f64::consts::PI * m as f64 / l);
            SpinorField::from_fn(grid, |x| {
                let phase = k[0] * x[0].as_f64() + k[1] * x[1].as_f64() + k[2] * x[2].as_f64();
                let e = Cplx::from_polar(1.0, phase);
                [convert(e * spin[0]), convert(e * spin[1])]
            })
        }
        InitialDataSpec::File { path } => {
            let snap = Snapshot::load(path)?;
            let g64 = Grid::new(grid.n(), l)?;
            let u = snap.to_spinor(&g64)?;
            let (u1, u2) = u.into_components();
            let conv = |v: Vec<Cplx<f64>>| v.into_iter().map(convert).collect();
            SpinorField::from_components(grid, conv(u1), conv(u2))?
        }
    };
    let current = raw.l2_norm();
    if !(current > T::zero()) {
        return Err(Error::InvalidArgument("initial data vanishes on the grid".into()));
    }
    Ok(raw.scaled(Cplx::new(T::lit(norm) / current, T::zero())))
}

/// [`make_initial_data`] followed by the 2/3 truncation, rescaled so the
/// truncated field still has the requested norm.
pub fn make_band_limited_initial_data<T: Real>(
    spec: &InitialDataSpec,
    norm: f64,
    grid: &Grid<T>,
) -> Result<SpinorField<T>> {
    let u = make_initial_data(spec, norm, grid)?.dealiased();
    let current = u.l2_norm();
    if !(current > T::zero()) {
        return Err(Error::InvalidArgument("initial data has no resolved modes".into()));
    }
    Ok(u.scaled(Cplx::new(T::lit(norm) / current, T::zero())))
}

fn convert<T: Real>(z: Cplx<f64>) -> Cplx<T> {
    Cplx::new(T::lit(z.re), T::lit(z.im))
}

/// The reference packet: centred, width 0.8, unit momentum along `x`, mixed
/// spin, unit norm.
pub fn reference_packet(box_length: f64) -> InitialDataSpec {
    let c = box_length / 2.0;
    InitialDataSpec::GaussianPacket {
        center: [c, c, c],
        width: 0.8,
        momentum: [1.0, 0.0, 0.0],
        spin: [Cplx::new(1.0, 0.0), Cplx::new(0.0, 0.5)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::Snapshot;
    use crate::spinor::charge_density;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Cplx<f64> {
        Cplx::new(re, im)
    }

    #[test]
    fn plane_wave_density_is_uniform() {
        let g = Grid::new(8, 2.0 * PI).unwrap();
        let spec = InitialDataSpec::PlaneWave { modes: [1, 0, 0], spin: [c(1.0, 0.0), c(0.0, 0.0)] };
        let u = make_initial_data(&spec, 1.0, &g).unwrap();
        let rho = charge_density(&u);
        let expected = 1.0 / g.volume();
        assert!(rho.values().iter().all(|r| (r - expected).abs() < 1e-15));
    }

    #[test]
    fn gaussian_norm_and_periodicity() {
        let g = Grid::new(32, 2.0 * PI).unwrap();
        for norm in [1.0, 0.3] {
            let u = make_initial_data(&reference_packet(2.0 * PI), norm, &g).unwrap();
            assert!((u.l2_norm() - norm).abs() <= 1e-12);
        }
        // a packet centred on the boundary equals the one centred at the origin
        let at = |center| InitialDataSpec::GaussianPacket {
            center,
            width: 0.7,
            momentum: [0.5, 0.0, -1.0],
            spin: [c(1.0, 0.0), c(0.0, 0.0)],
        };
        let a = make_initial_data(&at([0.0; 3]), 1.0, &g).unwrap();
        let b = make_initial_data(&at([2.0 * PI; 3]), 1.0, &g).unwrap();
        assert!(a.sub(&b).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn band_limited_data_keeps_norm() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let u = make_band_limited_initial_data(&reference_packet(2.0 * PI), 0.7, &g).unwrap();
        assert!((u.l2_norm() - 0.7).abs() < 1e-12);
        assert!(u.dealiased().sub(&u).unwrap().l2_norm() < 1e-14);
    }

    #[test]
    fn invalid_specs() {
        let g = Grid::new(8, 2.0 * PI).unwrap();
        let zero_spin = InitialDataSpec::PlaneWave { modes: [0, 0, 1], spin: [c(0.0, 0.0), c(0.0, 0.0)] };
        assert!(make_initial_data(&zero_spin, 1.0, &g).is_err());
        let bad_width = InitialDataSpec::GaussianPacket {
            center: [0.0; 3],
            width: 0.0,
            momentum: [0.0; 3],
            spin: [c(1.0, 0.0), c(0.0, 0.0)],
        };
        assert!(make_initial_data(&bad_width, 1.0, &g).is_err());
        assert!(make_initial_data(&reference_packet(2.0 * PI), -1.0, &g).is_err());
        let missing = InitialDataSpec::File { path: "/nonexistent/u.pwf".into() };
        assert!(make_initial_data(&missing, 1.0, &g).is_err());
    }

    #[test]
    fn file_data_is_renormalized() {
        let g = Grid::new(8, 2.0 * PI).unwrap();
        let u = make_initial_data(&reference_packet(2.0 * PI), 2.0, &g).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.pwf");
        Snapshot::from_spinor(&u).save(&path).unwrap();
        let back = make_initial_data(&InitialDataSpec::File { path }, 1.0, &g).unwrap();
        assert!((back.l2_norm() - 1.0).abs() < 1e-12);
        let wrong = Grid::new(16, 2.0 * PI).unwrap();
        let path = dir.path().join("u.pwf");
        assert!(make_initial_data(&InitialDataSpec::File { path }, 1.0, &wrong).is_err());
    }
}
