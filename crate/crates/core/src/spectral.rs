//! Discrete calculus on periodic grids: Fourier-multiplier derivatives, the
//! τ-aware Laplacian Δ_z = 4 ∂_z ∂_z̄, and grid integration.
//!
//! All derivatives are exact (to round-off) on trigonometric polynomials of
//! degree < n/2. First-derivative multipliers zero the Nyquist mode on even
//! grids so that derivatives of real fields stay real.

use crate::error::Result;
use crate::grid::{BZGrid, ComplexPeriodicField, ModularParameter, RealPeriodicField, TwoFormField};
use crate::par;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Coordinate directions on the Brillouin-zone grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    K1,
    K2,
}

/// Planned 2-D FFT for an n×n grid, row-major layout.
pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn rows(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let fft = fft.clone();
        par::for_each_chunk_mut(data, self.n, move |row| fft.process(row));
    }

    fn transpose(&self, data: &mut Vec<Complex64>) {
        let n = self.n;
        let mut out = vec![Complex64::default(); n * n];
        for i in 0..n {
            for j in 0..n {
                out[j * n + i] = data[i * n + j];
            }
        }
        *data = out;
    }

    /// In-place unnormalized forward transform along both axes.
    pub fn forward(&self, data: &mut Vec<Complex64>) {
        self.rows(data, &self.fwd);
        self.transpose(data);
        self.rows(data, &self.fwd);
        self.transpose(data);
    }

    /// In-place inverse transform, normalized by 1/n².
    pub fn inverse(&self, data: &mut Vec<Complex64>) {
        self.rows(data, &self.inv);
        self.transpose(data);
        self.rows(data, &self.inv);
        self.transpose(data);
        let scale = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Integer wavenumber of FFT bin `i` on an n-point grid.
#[inline]
pub fn wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        if n % 2 == 0 && i == n / 2 {
            -((n / 2) as i64)
        } else {
            i as i64
        }
    } else {
        i as i64 - n as i64
    }
}

/// Apply a Fourier multiplier `m(m1, m2)` to a field, in place.
pub fn apply_multiplier(
    field: &mut ComplexPeriodicField,
    fft: &Fft2,
    mul: impl Fn(i64, i64) -> Complex64,
) {
    let n = field.grid.n();
    fft.forward(&mut field.values);
    for i1 in 0..n {
        let m1 = wavenumber(i1, n);
        for i2 in 0..n {
            let m2 = wavenumber(i2, n);
            field.values[i1 * n + i2] *= mul(m1, m2);
        }
    }
    fft.inverse(&mut field.values);
}

fn first_derivative_factor(m: i64, n: usize) -> Complex64 {
    // Nyquist zeroed: keeps d/dk of real fields real on even grids.
    if n % 2 == 0 && m == -((n / 2) as i64) {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, 2.0 * PI * m as f64)
    }
}

/// Spectral ∂/∂k of a complex field.
pub fn spectral_derivative_complex(
    field: &ComplexPeriodicField,
    dir: Direction,
) -> ComplexPeriodicField {
    let fft = Fft2::new(field.grid.n());
    spectral_derivative_complex_with(field, dir, &fft)
}

pub fn spectral_derivative_complex_with(
    field: &ComplexPeriodicField,
    dir: Direction,
    fft: &Fft2,
) -> ComplexPeriodicField {
    let n = field.grid.n();
    let mut out = field.clone();
    apply_multiplier(&mut out, fft, |m1, m2| match dir {
        Direction::K1 => first_derivative_factor(m1, n),
        Direction::K2 => first_derivative_factor(m2, n),
    });
    out
}

/// Spectral ∂/∂k of a real field (imaginary part is round-off and dropped).
pub fn spectral_derivative(field: &RealPeriodicField, dir: Direction) -> RealPeriodicField {
    let complex = ComplexPeriodicField {
        grid: field.grid,
        values: field.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    };
    let d = spectral_derivative_complex(&complex, dir);
    RealPeriodicField {
        grid: field.grid,
        values: d.values.iter().map(|v| v.re).collect(),
    }
}

/// Fourier multiplier of Δ_z = 4 ∂_z ∂_z̄ in the coordinates z = k1 + τ k2:
/// −4π²(|τ|² m1² − 2 Re(τ) m1 m2 + m2²)/Im(τ)².  Real and non-positive.
pub fn laplacian_multiplier(m1: i64, m2: i64, tau: ModularParameter) -> f64 {
    let t = tau.tau();
    let (a, b) = (t.re, t.im);
    let (x, y) = (m1 as f64, m2 as f64);
    -4.0 * PI * PI * ((a * a + b * b) * x * x - 2.0 * a * x * y + y * y) / (b * b)
}

/// Δ_z of a complex field.
pub fn laplacian_z_complex(
    field: &ComplexPeriodicField,
    tau: ModularParameter,
) -> ComplexPeriodicField {
    let fft = Fft2::new(field.grid.n());
    laplacian_z_complex_with(field, tau, &fft)
}

pub fn laplacian_z_complex_with(
    field: &ComplexPeriodicField,
    tau: ModularParameter,
    fft: &Fft2,
) -> ComplexPeriodicField {
    let mut out = field.clone();
    apply_multiplier(&mut out, fft, |m1, m2| {
        Complex64::new(laplacian_multiplier(m1, m2, tau), 0.0)
    });
    out
}

/// Δ_z of a real field; the multiplier is real so the result is real.
pub fn laplacian_z(field: &RealPeriodicField, tau: ModularParameter) -> RealPeriodicField {
    let complex = ComplexPeriodicField {
        grid: field.grid,
        values: field.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    };
    let out = laplacian_z_complex(&complex, tau);
    RealPeriodicField {
        grid: field.grid,
        values: out.values.iter().map(|v| v.re).collect(),
    }
}

/// ∫ w dk1∧dk2 over the unit square: the uniform rule (1/n²)·Σ w, exact for
/// trigonometric polynomials of degree < n. Fixed summation order.
pub fn integrate_two_form(form: &TwoFormField) -> f64 {
    let sum: f64 = form.w.iter().sum();
    sum / (form.grid.len() as f64)
}

/// Mean of a real field, same quadrature as `integrate_two_form`.
pub fn mean(field: &RealPeriodicField) -> f64 {
    field.values.iter().sum::<f64>() / (field.grid.len() as f64)
}

/// Derivatives of a matrix-valued field, entry by entry.
pub fn matrix_field_derivative(
    grid: BZGrid,
    mats: &[nalgebra::DMatrix<Complex64>],
    dir: Direction,
) -> Result<Vec<nalgebra::DMatrix<Complex64>>> {
    matrix_field_multiplier(grid, mats, |m1, m2| match dir {
        Direction::K1 => first_derivative_factor(m1, grid.n()),
        Direction::K2 => first_derivative_factor(m2, grid.n()),
    })
}

/// Δ_z of a matrix-valued field, entry by entry.
pub fn matrix_field_laplacian_z(
    grid: BZGrid,
    mats: &[nalgebra::DMatrix<Complex64>],
    tau: ModularParameter,
) -> Result<Vec<nalgebra::DMatrix<Complex64>>> {
    matrix_field_multiplier(grid, mats, |m1, m2| {
        Complex64::new(laplacian_multiplier(m1, m2, tau), 0.0)
    })
}

fn matrix_field_multiplier(
    grid: BZGrid,
    mats: &[nalgebra::DMatrix<Complex64>],
    mul: impl Fn(i64, i64) -> Complex64 + Sync + Send + Copy,
) -> Result<Vec<nalgebra::DMatrix<Complex64>>> {
    use crate::error::Error;
    if mats.len() != grid.len() {
        return Err(Error::ShapeMismatch(format!(
            "matrix field has {} entries for an n={} grid",
            mats.len(),
            grid.n()
        )));
    }
    let rows = mats[0].nrows();
    let cols = mats[0].ncols();
    let fft = Fft2::new(grid.n());
    // One scalar FFT per matrix entry.
    let entry_fields: Vec<Vec<Complex64>> = par::map_indices(rows * cols, |e| {
        let (r, c) = (e / cols, e % cols);
        let mut field = ComplexPeriodicField {
            grid,
            values: mats.iter().map(|m| m[(r, c)]).collect(),
        };
        apply_multiplier(&mut field, &fft, mul);
        field.values
    });
    let out = par::map_indices(grid.len(), |p| {
        nalgebra::DMatrix::from_fn(rows, cols, |r, c| entry_fields[r * cols + c][p])
    });
    Ok(out)
}
