//! Quantum geometry of projector fields: quantum metric, Berry-curvature
//! two-form, lattice Chern numbers, Wirtinger saturation, integrated metric
//! trace, and the harmonic-map residual.
//!
//! Conventions, fixed once and used everywhere:
//!   g_ij  = (1/2)·Re tr(∂_i P ∂_j P)
//!   w12   = −(i/2)·tr(P [∂_1 P, ∂_2 P])      (real)
//!   deg   = (1/π)·∫ w12 dk1∧dk2
//! With these, a holomorphic rank-1 band saturates |w12| = √det g with
//! w12 > 0, and the degree-N theta band has Chern number +N.

use crate::error::{Error, Result};
use crate::frames::{osculating_projector, OrthoFrameField, ProjectorField};
use crate::grid::{BZGrid, ModularParameter, RealPeriodicField, TwoFormField};
use crate::par;
use crate::spectral::{integrate_two_form, matrix_field_derivative, matrix_field_laplacian_z, Direction};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Quantum geometric tensor on the grid: metric components in (k1,k2)
/// coordinates plus the curvature two-form coefficient.
#[derive(Debug, Clone)]
pub struct QGTField {
    pub grid: BZGrid,
    pub g11: Vec<f64>,
    pub g12: Vec<f64>,
    pub g22: Vec<f64>,
    pub w12: Vec<f64>,
}

impl QGTField {
    pub fn w_form(&self) -> TwoFormField {
        TwoFormField {
            grid: self.grid,
            w: self.w12.clone(),
        }
    }

    /// Pointwise √det g, clamped at zero against round-off.
    pub fn sqrt_det_g(&self) -> Vec<f64> {
        self.g11
            .iter()
            .zip(&self.g22)
            .zip(&self.g12)
            .map(|((a, c), b)| (a * c - b * b).max(0.0).sqrt())
            .collect()
    }

    /// Metric positive semidefinite (eigenvalues ≥ −1e-10) and the Wirtinger
    /// bound |w12| ≤ √det g + 1e-8 at every grid point.
    pub fn validate(&self) -> Result<()> {
        for p in 0..self.grid.len() {
            let (g11, g12, g22) = (self.g11[p], self.g12[p], self.g22[p]);
            let det = g11 * g22 - g12 * g12;
            let trace = g11 + g22;
            // eigenvalues of a symmetric 2x2
            let disc = (trace * trace / 4.0 - det).max(0.0).sqrt();
            let emin = trace / 2.0 - disc;
            if emin < -1e-10 {
                let (i1, i2) = self.grid.unflatten(p);
                return Err(Error::ProjectorInvariant {
                    what: "metric positivity",
                    defect: -emin,
                    i1,
                    i2,
                });
            }
            if self.w12[p].abs() > det.max(0.0).sqrt() + 1e-8 {
                let (i1, i2) = self.grid.unflatten(p);
                return Err(Error::ProjectorInvariant {
                    what: "wirtinger bound",
                    defect: self.w12[p].abs() - det.max(0.0).sqrt(),
                    i1,
                    i2,
                });
            }
        }
        Ok(())
    }

    /// CSV `k1,k2,g11,g12,g22,w12`, rows ordered k2-major then k1.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let n = self.grid.n();
        let mut out = String::new();
        out.push_str("k1,k2,g11,g12,g22,w12\n");
        for i2 in 0..n {
            for i1 in 0..n {
                let p = self.grid.idx(i1, i2);
                let _ = writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    self.grid.coord(i1),
                    self.grid.coord(i2),
                    self.g11[p],
                    self.g12[p],
                    self.g22[p],
                    self.w12[p]
                );
            }
        }
        out
    }
}

fn trace_prod(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Quantum geometric tensor of a projector field, by spectral derivatives.
pub fn qgt(p: &ProjectorField) -> Result<QGTField> {
    p.validate()?;
    let d1 = matrix_field_derivative(p.grid, &p.mats, Direction::K1)?;
    let d2 = matrix_field_derivative(p.grid, &p.mats, Direction::K2)?;
    let rows: Vec<(f64, f64, f64, f64)> = par::map_indices(p.grid.len(), |q| {
        let (a, b, m) = (&d1[q], &d2[q], &p.mats[q]);
        let g11 = 0.5 * trace_prod(a, a).re;
        let g22 = 0.5 * trace_prod(b, b).re;
        let g12 = 0.5 * trace_prod(a, b).re;
        let pab = trace_prod(&(m * a), b);
        let pba = trace_prod(&(m * b), a);
        let w12 = 0.5 * (pab - pba).im;
        (g11, g12, g22, w12)
    });
    let mut out = QGTField {
        grid: p.grid,
        g11: Vec::with_capacity(rows.len()),
        g12: Vec::with_capacity(rows.len()),
        g22: Vec::with_capacity(rows.len()),
        w12: Vec::with_capacity(rows.len()),
    };
    for (a, b, c, w) in rows {
        out.g11.push(a);
        out.g12.push(b);
        out.g22.push(c);
        out.w12.push(w);
    }
    Ok(out)
}

/// Integer Chern number with the smallest plaquette-link modulus seen.
#[derive(Debug, Clone)]
pub struct ChernReport {
    pub chern: i64,
    pub plaquette_min_modulus: f64,
    pub grid: BZGrid,
}

impl ChernReport {
    pub fn to_json(&self) -> String {
        format!(
            "{{\"chern\":{},\"min_link\":{:.16e},\"n\":{}}}",
            self.chern,
            self.plaquette_min_modulus,
            self.grid.n()
        )
    }
}

pub const MIN_LINK_MODULUS: f64 = 1e-6;
pub const CHERN_MIN_GRID: usize = 16;

fn range_basis(p: &ProjectorField, q: usize) -> Result<DMatrix<Complex64>> {
    let m = &p.mats[q];
    let nb = p.n_bands;
    if p.rank == 1 {
        // strongest column of a rank-1 Hermitian idempotent spans its range
        let mut best = 0;
        let mut best_diag = -1.0;
        for j in 0..nb {
            if m[(j, j)].re > best_diag {
                best_diag = m[(j, j)].re;
                best = j;
            }
        }
        let col = m.column(best).into_owned();
        let norm = col.norm();
        if norm < 1e-14 {
            let (i1, i2) = p.grid.unflatten(q);
            return Err(Error::ProjectorInvariant {
                what: "rank-1 range extraction",
                defect: norm,
                i1,
                i2,
            });
        }
        Ok(DMatrix::from_columns(&[col / Complex64::new(norm, 0.0)]))
    } else {
        let herm = (m + m.adjoint()).scale(0.5);
        let eig = SymmetricEigen::new(herm);
        let mut cols: Vec<DVector<Complex64>> = Vec::with_capacity(p.rank);
        for (i, ev) in eig.eigenvalues.iter().enumerate() {
            if *ev > 0.5 {
                cols.push(eig.eigenvectors.column(i).into_owned());
            }
        }
        if cols.len() != p.rank {
            let (i1, i2) = p.grid.unflatten(q);
            return Err(Error::ProjectorInvariant {
                what: "range dimension",
                defect: (cols.len() as f64 - p.rank as f64).abs(),
                i1,
                i2,
            });
        }
        Ok(DMatrix::from_columns(&cols))
    }
}

/// Gauge-invariant lattice Chern number from plaquette link determinants.
///
/// Link U_μ(k) = det(V†(k) V(k+μ̂)) over orthonormal range bases V; the sum
/// of principal plaquette arguments over the torus is 2π times an integer,
/// which equals (1/π)∫ w12 in the conventions of this module.
pub fn chern_number(p: &ProjectorField) -> Result<ChernReport> {
    if p.grid.n() < CHERN_MIN_GRID {
        return Err(Error::GridTooSmall {
            n: p.grid.n(),
            min: CHERN_MIN_GRID,
        });
    }
    if p.rank == 0 {
        return Err(Error::ShapeMismatch("chern of a rank-0 field".into()));
    }
    let n = p.grid.n();
    let bases_res: Vec<Result<DMatrix<Complex64>>> =
        par::map_indices(p.grid.len(), |q| range_basis(p, q));
    let mut bases = Vec::with_capacity(p.grid.len());
    for b in bases_res {
        bases.push(b?);
    }
    let link = |q: usize, r: usize| -> Complex64 {
        (bases[q].adjoint() * &bases[r]).determinant()
    };
    let mut u1 = vec![Complex64::default(); p.grid.len()];
    let mut u2 = vec![Complex64::default(); p.grid.len()];
    let mut min_mod = f64::INFINITY;
    for i1 in 0..n {
        for i2 in 0..n {
            let q = p.grid.idx(i1, i2);
            let a = link(q, p.grid.idx_wrapped(i1 as isize + 1, i2 as isize));
            let b = link(q, p.grid.idx_wrapped(i1 as isize, i2 as isize + 1));
            let m = a.norm().min(b.norm());
            if m < min_mod {
                min_mod = m;
            }
            if m < MIN_LINK_MODULUS {
                return Err(Error::LinkTooSmall {
                    modulus: m,
                    threshold: MIN_LINK_MODULUS,
                    i1,
                    i2,
                });
            }
            u1[q] = a;
            u2[q] = b;
        }
    }
    // fixed-order reduction: bit-stable reports
    let mut total = 0.0f64;
    for i1 in 0..n {
        for i2 in 0..n {
            let q = p.grid.idx(i1, i2);
            let qe1 = p.grid.idx_wrapped(i1 as isize + 1, i2 as isize);
            let qe2 = p.grid.idx_wrapped(i1 as isize, i2 as isize + 1);
            let w = u1[q] * u2[qe1] * u1[qe2].conj() * u2[q].conj();
            total += w.arg();
        }
    }
    let c = total / (2.0 * PI);
    let rounded = c.round();
    let defect = (c - rounded).abs();
    if defect > 1e-6 {
        return Err(Error::NonIntegralChern { sum: c, defect });
    }
    Ok(ChernReport {
        chern: rounded as i64,
        plaquette_min_modulus: min_mod,
        grid: p.grid,
    })
}

/// Pointwise Wirtinger residual √det g − |w12| with its extremes.
pub fn wirtinger_residual(q: &QGTField) -> (RealPeriodicField, f64, f64) {
    let sqrt_det = q.sqrt_det_g();
    let values: Vec<f64> = sqrt_det
        .iter()
        .zip(&q.w12)
        .map(|(s, w)| s - w.abs())
        .collect();
    let max = values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let min = values.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    (
        RealPeriodicField {
            grid: q.grid,
            values,
        },
        max,
        min,
    )
}

/// ω^(j): curvature two-form of the j-th associated curve, with the
/// boundary conventions ω^(−1) = ω^(N−1) = 0.
pub fn associated_two_form(frames: &OrthoFrameField, j: i64) -> Result<TwoFormField> {
    let n_levels = frames.n_bands as i64;
    if j == -1 || j == n_levels - 1 {
        return Ok(TwoFormField::zeros(frames.grid));
    }
    if j < -1 || j > n_levels - 1 {
        return Err(Error::LevelOutOfRange {
            k: j,
            n_bands: frames.n_bands,
        });
    }
    let pi_j = osculating_projector(frames, j as usize)?;
    Ok(qgt(&pi_j)?.w_form())
}

/// (1/2π)·∫ tr_h(g) dvol_h with h the flat metric |dk1 + τ dk2|²:
/// the integrand is (|τ|² g11 − 2 Re(τ) g12 + g22)/Im τ. For the k-th theta
/// level this equals (1/π)∫(ω^(k) + ω^(k−1)) = (2k+1)·N.
pub fn integrated_trace(q: &QGTField, tau: ModularParameter) -> f64 {
    let t = tau.tau();
    let norm2 = t.norm_sqr();
    let sum: f64 = q
        .g11
        .iter()
        .zip(&q.g12)
        .zip(&q.g22)
        .map(|((a, b), c)| (norm2 * a - 2.0 * t.re * b + c) / t.im)
        .sum();
    sum / (q.grid.len() as f64) / (2.0 * PI)
}

/// Euler–Lagrange residual of the Dirichlet energy in projector form:
/// max‖[Δ_z P, P]‖ / max‖Δ_z P‖ (spectral operator norms). Zero for
/// harmonic bands up to discretization; 0 for constant fields.
pub fn harmonicity_residual(p: &ProjectorField, tau: ModularParameter) -> Result<f64> {
    p.validate()?;
    let lap = matrix_field_laplacian_z(p.grid, &p.mats, tau)?;
    let per_point: Vec<(f64, f64)> = par::map_indices(p.grid.len(), |q| {
        let l = &lap[q];
        let m = &p.mats[q];
        let comm = l * m - m * l;
        let num = comm.svd(false, false).singular_values.max();
        let den = l.clone().svd(false, false).singular_values.max();
        (num, den)
    });
    let num = per_point.iter().fold(0.0f64, |a, (x, _)| a.max(*x));
    let den = per_point.iter().fold(0.0f64, |a, (_, y)| a.max(*y));
    if den < 1e-250 {
        return Ok(0.0);
    }
    Ok(num / den)
}

/// Signed consistency check value: (1/π)∫w12, to compare against the
/// plaquette integer.
pub fn degree_from_curvature(q: &QGTField) -> f64 {
    integrate_two_form(&q.w_form()) / PI
}
