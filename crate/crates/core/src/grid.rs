//! The elliptic Brillouin zone: modular parameter, periodic grids, and the
//! scalar/two-form fields living on them.
//!
//! Grid samples sit at `k_i = j/n` for `j = 0..n` (0 included, 1 excluded),
//! periodic in both directions. The complex coordinate is `z = k1 + tau*k2`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::fmt::Write as _;

/// Modular parameter of the elliptic curve C = ℂ/(ℤ + τℤ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularParameter {
    tau: Complex64,
}

impl ModularParameter {
    /// Requires Im(τ) > 0.
    pub fn new(tau: Complex64) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(Error::InvalidTau {
                re: tau.re,
                im: tau.im,
            });
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    pub fn im(&self) -> f64 {
        self.tau.im
    }
}

/// Map grid coordinates to the complex plane: z = k1 + τ·k2.
pub fn to_complex(k1: f64, k2: f64, tau: ModularParameter) -> Complex64 {
    Complex64::new(k1, 0.0) + tau.tau() * k2
}

/// Uniform periodic n×n sample grid on the unit square of (k1, k2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BZGrid {
    n: usize,
}

pub const MIN_GRID: usize = 4;

impl BZGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_GRID {
            return Err(Error::GridTooSmall { n, min: MIN_GRID });
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of the point (i1, i2), row-major in i1.
    #[inline]
    pub fn idx(&self, i1: usize, i2: usize) -> usize {
        i1 * self.n + i2
    }

    /// Index arithmetic modulo n in both directions.
    #[inline]
    pub fn idx_wrapped(&self, i1: isize, i2: isize) -> usize {
        let n = self.n as isize;
        let a = i1.rem_euclid(n) as usize;
        let b = i2.rem_euclid(n) as usize;
        self.idx(a, b)
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    /// (i1, i2) from a flat index.
    #[inline]
    pub fn unflatten(&self, p: usize) -> (usize, usize) {
        (p / self.n, p % self.n)
    }

    /// z(k1, k2) at grid point (i1, i2).
    pub fn z_at(&self, i1: usize, i2: usize, tau: ModularParameter) -> Complex64 {
        to_complex(self.coord(i1), self.coord(i2), tau)
    }

    pub fn check_same(&self, other: &BZGrid) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }
}

/// A scalar field sampled on a periodic grid. `T` is `f64` or `Complex64`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField<T> {
    pub grid: BZGrid,
    pub values: Vec<T>,
}

pub type RealPeriodicField = PeriodicField<f64>;
pub type ComplexPeriodicField = PeriodicField<Complex64>;

impl<T: Copy + Default> PeriodicField<T> {
    pub fn zeros(grid: BZGrid) -> Self {
        Self {
            grid,
            values: vec![T::default(); grid.len()],
        }
    }

    pub fn from_fn(grid: BZGrid, f: impl Fn(f64, f64) -> T + Sync + Send) -> Self
    where
        T: Send,
    {
        let n = grid.n();
        let values = crate::par::map_indices(grid.len(), |p| {
            let (i1, i2) = (p / n, p % n);
            f(grid.coord(i1), grid.coord(i2))
        });
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, i1: usize, i2: usize) -> T {
        self.values[self.grid.idx(i1, i2)]
    }
}

impl RealPeriodicField {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }
}

/// A real 2-form `w(k1,k2) dk1∧dk2` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFormField {
    pub grid: BZGrid,
    pub w: Vec<f64>,
}

impl TwoFormField {
    pub fn zeros(grid: BZGrid) -> Self {
        Self {
            grid,
            w: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: BZGrid, w: Vec<f64>) -> Result<Self> {
        if w.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "two-form has {} values for an n={} grid",
                w.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, w })
    }

    #[inline]
    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.w[self.grid.idx(i1, i2)]
    }

    pub fn min(&self) -> f64 {
        self.w.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    pub fn max_abs(&self) -> f64 {
        self.w.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Fails with the offending point if the form is not strictly positive.
    pub fn require_positive(&self) -> Result<()> {
        for (p, &w) in self.w.iter().enumerate() {
            if !(w > 0.0) {
                let (i1, i2) = self.grid.unflatten(p);
                return Err(Error::NonPositiveForm { w, i1, i2 });
            }
        }
        Ok(())
    }
}

fn fmt_float(x: f64) -> String {
    format!("{:.16e}", x)
}

/// CSV with header `k1,k2,value`, rows ordered k2-major then k1.
pub fn scalar_field_to_csv(field: &RealPeriodicField) -> String {
    let n = field.grid.n();
    let mut out = String::with_capacity(n * n * 32);
    out.push_str("k1,k2,value\n");
    for i2 in 0..n {
        for i1 in 0..n {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_float(field.grid.coord(i1)),
                fmt_float(field.grid.coord(i2)),
                fmt_float(field.at(i1, i2))
            );
        }
    }
    out
}

pub fn two_form_to_csv(form: &TwoFormField) -> String {
    let field = RealPeriodicField {
        grid: form.grid,
        values: form.w.clone(),
    };
    scalar_field_to_csv(&field)
}

/// JSON `{"n":…, "values":[[…]]}` with `values[i1][i2]`.
pub fn scalar_field_to_json(field: &RealPeriodicField) -> String {
    let n = field.grid.n();
    let mut out = String::with_capacity(n * n * 24);
    let _ = write!(out, "{{\"n\":{},\"values\":[", n);
    for i1 in 0..n {
        if i1 > 0 {
            out.push(',');
        }
        out.push('[');
        for i2 in 0..n {
            if i2 > 0 {
                out.push(',');
            }
            out.push_str(&fmt_float(field.at(i1, i2)));
        }
        out.push(']');
    }
    out.push_str("]}");
    out
}

pub fn two_form_to_json(form: &TwoFormField) -> String {
    scalar_field_to_json(&RealPeriodicField {
        grid: form.grid,
        values: form.w.clone(),
    })
}
