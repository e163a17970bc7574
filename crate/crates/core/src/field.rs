//! Real scalar and vector fields on a [`Grid`].

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::real::Real;

/// Real scalar field (the electric potential, densities, divergences).
#[derive(Clone, Debug)]
pub struct ScalarField<T: Real> {
    grid: Grid<T>,
    values: Vec<T>,
}

/// Real 3-vector field (the magnetic potential, B, currents).
#[derive(Clone, Debug)]
pub struct VectorField<T: Real> {
    grid: Grid<T>,
    components: [Vec<T>; 3],
}

pub(crate) fn check_len(grid_len: usize, got: usize) -> Result<()> {
    if grid_len != got {
        return Err(Error::Length {
            expected: grid_len,
            got,
        });
    }
    Ok(())
}

pub(crate) fn same_grid<T: Real>(a: &Grid<T>, b: &Grid<T>) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        Self {
            values: vec![T::zero(); grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn constant(grid: &Grid<T>, c: T) -> Self {
        Self {
            values: vec![c; grid.len()],
            grid: grid.clone(),
        }
    }

    /// Samples `f(x, y, z)` at every grid point.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn([T; 3]) -> T) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.position(idx))).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Wraps raw values; rejects wrong lengths and non-finite entries.
    pub fn from_values(grid: &Grid<T>, values: Vec<T>) -> Result<Self> {
        check_len(grid.len(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &Grid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Quadrature integral `spacing³ Σ f`.
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::from_usize_lossy(self.values.len())
    }

    pub fn l2_norm(&self) -> T {
        self.l2_norm_sq().sqrt()
    }

    pub fn l2_norm_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>() * self.grid.cell_volume()
    }

    /// `∫ f g dx`.
    pub fn dot(&self, other: &Self) -> Result<T> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum::<T>()
            * self.grid.cell_volume())
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn scale(&mut self, s: T) {
        self.values.iter_mut().for_each(|v| *v = *v * s);
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: T, other: &Self) -> Result<()> {
        same_grid(&self.grid, &other.grid)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + s * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-T::one(), other)?;
        Ok(out)
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        let z = vec![T::zero(); grid.len()];
        Self {
            grid: grid.clone(),
            components: [z.clone(), z.clone(), z],
        }
    }

    pub fn constant(grid: &Grid<T>, c: [T; 3]) -> Self {
        Self {
            grid: grid.clone(),
            components: c.map(|ci| vec![ci; grid.len()]),
        }
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn([T; 3]) -> [T; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let v = f(grid.position(idx));
            for (c, vc) in out.components.iter_mut().zip(v) {
                c[idx] = vc;
            }
        }
        out
    }

    pub fn from_components(grid: &Grid<T>, components: [Vec<T>; 3]) -> Result<Self> {
        for c in &components {
            check_len(grid.len(), c.len())?;
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self {
            grid: grid.clone(),
            components,
        })
    }

    pub fn from_scalars(fields: [ScalarField<T>; 3]) -> Result<Self> {
        let grid = fields[0].grid.clone();
        same_grid(&grid, &fields[1].grid)?;
        same_grid(&grid, &fields[2].grid)?;
        let [a, b, c] = fields;
        Ok(Self {
            grid,
            components: [a.values, b.values, c.values],
        })
    }

    pub(crate) fn from_raw(grid: &Grid<T>, components: [Vec<T>; 3]) -> Self {
        Self {
            grid: grid.clone(),
            components,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[T] {
        &self.components[axis]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut [T] {
        &mut self.components[axis]
    }

    pub fn components(&self) -> &[Vec<T>; 3] {
        &self.components
    }

    /// Copies one component out as a scalar field.
    pub fn scalar(&self, axis: usize) -> ScalarField<T> {
        ScalarField::from_raw(&self.grid, self.components[axis].clone())
    }

    pub fn into_scalars(self) -> [ScalarField<T>; 3] {
        let grid = self.grid;
        self.components.map(|c| ScalarField::from_raw(&grid, c))
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [T; 3] {
        [
            self.components[0][idx],
            self.components[1][idx],
            self.components[2][idx],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub fn l2_norm_sq(&self) -> T {
        self.components
            .iter()
            .map(|c| c.iter().map(|&v| v * v).sum::<T>())
            .sum::<T>()
            * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> T {
        self.l2_norm_sq().sqrt()
    }

    /// `∫ v · w dx`.
    pub fn dot(&self, other: &Self) -> Result<T> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>())
            .sum::<T>()
            * self.grid.cell_volume())
    }

    /// Pointwise Euclidean magnitude squared, `|v|²`.
    pub fn magnitude_sq(&self) -> ScalarField<T> {
        let values = (0..self.grid.len())
            .map(|i| {
                let [a, b, c] = self.at(i);
                a * a + b * b + c * c
            })
            .collect();
        ScalarField::from_raw(&self.grid, values)
    }

    pub fn scale(&mut self, s: T) {
        for c in self.components.iter_mut() {
            c.iter_mut().for_each(|v| *v = *v * s);
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: T, other: &Self) -> Result<()> {
        same_grid(&self.grid, &other.grid)?;
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + s * y;
            }
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-T::one(), other)?;
        Ok(out)
    }

    /// Pointwise product with a scalar field.
    pub fn mul_scalar_field(&self, s: &ScalarField<T>) -> Result<Self> {
        same_grid(&self.grid, s.grid())?;
        let components = self
            .components
            .clone()
            .map(|c| c.iter().zip(s.values()).map(|(&a, &b)| a * b).collect());
        Ok(Self::from_raw(&self.grid, components))
    }
}
