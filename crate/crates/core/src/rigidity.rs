//! Rigidity checks: quantum-metric comparison, recovery of the relating
//! unitary (or projective) matrix from band pairs, and level-wise
//! conjugation verification.
//!
//! The alignment objective is Σ_points ‖(I − P′(x)) σ P(x)‖²_F at unit
//! Frobenius norm of σ — a quadratic form whose matrix is the mean of
//! P(x)ᵀ ⊗ (I − P′(x)), Hermitian positive semidefinite. Its lowest
//! eigenvector is the optimal σ; a single Hermitian eigensolve, no
//! iteration. `alignment_residual` reports the minimized sum.

use crate::error::{Error, Result};
use crate::frames::ProjectorField;
use crate::geometry::QGTField;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sup-distance between two quantum geometries: the metric components and
/// the curvature form reported separately.
#[derive(Debug, Clone, Copy)]
pub struct MetricDistance {
    pub metric: f64,
    pub form: f64,
}

pub fn metric_distance(q1: &QGTField, q2: &QGTField) -> Result<MetricDistance> {
    q1.grid.check_same(&q2.grid)?;
    let mut metric = 0.0f64;
    let mut form = 0.0f64;
    for p in 0..q1.grid.len() {
        metric = metric
            .max((q1.g11[p] - q2.g11[p]).abs())
            .max((q1.g12[p] - q2.g12[p]).abs())
            .max((q1.g22[p] - q2.g22[p]).abs());
        form = form.max((q1.w12[p] - q2.w12[p]).abs());
    }
    Ok(MetricDistance { metric, form })
}

/// Result of a unitary recovery.
#[derive(Debug, Clone)]
pub struct UnitaryRecovery {
    pub sigma: DMatrix<Complex64>,
    /// ‖σ†σ − I‖ of the returned (polar-projected) matrix.
    pub unitarity_defect: f64,
    /// Minimized objective Σ_points ‖(I − P′)σP‖²_F at ‖σ‖_F = 1.
    pub alignment_residual: f64,
    /// Gap λ1 − λ0 of the per-point-mean quadratic form; certifies
    /// uniqueness of the minimizer.
    pub eigengap: f64,
    /// |tr(σ†σ0)|/N against a known ground-truth twist, when provided.
    pub fidelity: Option<f64>,
}

impl UnitaryRecovery {
    pub fn fidelity_against(&self, sigma0: &DMatrix<Complex64>) -> f64 {
        let n = self.sigma.nrows() as f64;
        (self.sigma.adjoint() * sigma0).trace().norm() / n
    }

    pub fn set_ground_truth(&mut self, sigma0: &DMatrix<Complex64>) {
        self.fidelity = Some(self.fidelity_against(sigma0));
    }

    /// JSON `{"sigma_re":…,"sigma_im":…,"residual":…,"unitarity_defect":…,"eigengap":…}`.
    pub fn to_json(&self) -> String {
        use std::fmt::Write;
        let n = self.sigma.nrows();
        let mut out = String::new();
        for (label, part) in [("sigma_re", 0), ("sigma_im", 1)] {
            let _ = write!(out, "\"{label}\":[");
            for r in 0..n {
                if r > 0 {
                    out.push(',');
                }
                out.push('[');
                for c in 0..n {
                    if c > 0 {
                        out.push(',');
                    }
                    let v = if part == 0 {
                        self.sigma[(r, c)].re
                    } else {
                        self.sigma[(r, c)].im
                    };
                    let _ = write!(out, "{:.16e}", v);
                }
                out.push(']');
            }
            out.push_str("],");
        }
        format!(
            "{{{}\"residual\":{:.16e},\"unitarity_defect\":{:.16e},\"eigengap\":{:.16e}}}",
            out, self.alignment_residual, self.unitarity_defect, self.eigengap
        )
    }
}

/// Mean over grid points of P(x)ᵀ ⊗ (I − P′(x)).
fn assemble_alignment(p: &ProjectorField, p_prime: &ProjectorField) -> Result<DMatrix<Complex64>> {
    p.grid.check_same(&p_prime.grid)?;
    if p.n_bands != p_prime.n_bands {
        return Err(Error::ShapeMismatch(format!(
            "band counts differ: {} vs {}",
            p.n_bands, p_prime.n_bands
        )));
    }
    p.validate()?;
    p_prime.validate()?;
    let nb = p.n_bands;
    let d = nb * nb;
    let id = DMatrix::<Complex64>::identity(nb, nb);
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    // fixed-order reduction: reports stay bit-stable
    for q in 0..p.grid.len() {
        let a = p.mats[q].transpose();
        let b = &id - &p_prime.mats[q];
        m += a.kronecker(&b);
    }
    let scale = Complex64::new(1.0 / p.grid.len() as f64, 0.0);
    Ok(m * scale)
}

const DEGENERACY_TOL: f64 = 1e-8;

/// Lowest eigenpair (and the next eigenvalue) of a Hermitian matrix.
fn lowest_eigenpair(m: DMatrix<Complex64>) -> Result<(f64, f64, DVector<Complex64>)> {
    let herm = (&m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::try_new(herm, 1e-13, 1000).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let l0 = eig.eigenvalues[order[0]];
    let l1 = eig.eigenvalues[order[1]];
    Ok((l0, l1, eig.eigenvectors.column(order[0]).into_owned()))
}

fn fix_matrix_phase(m: &mut DMatrix<Complex64>) {
    let mut best = (0usize, 0usize);
    let mut best_mod = 0.0f64;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)].norm();
            if v > best_mod {
                best_mod = v;
                best = (r, c);
            }
        }
    }
    if best_mod > 0.0 {
        let phase = m[best].conj() / Complex64::new(best_mod, 0.0);
        for v in m.iter_mut() {
            *v *= phase;
        }
    }
}

fn recover_raw(
    p: &ProjectorField,
    p_prime: &ProjectorField,
) -> Result<(DMatrix<Complex64>, f64, f64)> {
    let m = assemble_alignment(p, p_prime)?;
    let (l0, l1, v) = lowest_eigenpair(m)?;
    if l0 < DEGENERACY_TOL && l1 < DEGENERACY_TOL {
        return Err(Error::DegenerateAlignment {
            lambda0: l0,
            lambda1: l1,
        });
    }
    let nb = p.n_bands;
    // vec is column-stacked, matching vec(AXB) = (Bᵀ⊗A)vec(X)
    let sigma = DMatrix::from_column_slice(nb, nb, v.as_slice());
    let residual = (l0.max(0.0)) * p.grid.len() as f64;
    Ok((sigma, residual, l1 - l0))
}

/// Recover the unitary best aligning P to P′ (polar projection of the
/// lowest eigenvector of the alignment form).
pub fn recover_unitary(p: &ProjectorField, p_prime: &ProjectorField) -> Result<UnitaryRecovery> {
    let (raw, residual, eigengap) = recover_raw(p, p_prime)?;
    let svd = raw.clone().svd(true, true);
    let u = svd.u.ok_or(Error::EigenFailure)?;
    let v_t = svd.v_t.ok_or(Error::EigenFailure)?;
    let mut sigma = u * v_t;
    fix_matrix_phase(&mut sigma);
    let nb = sigma.nrows();
    let defect = (sigma.adjoint() * &sigma - DMatrix::<Complex64>::identity(nb, nb)).norm();
    Ok(UnitaryRecovery {
        sigma,
        unitarity_defect: defect,
        alignment_residual: residual,
        eigengap,
        fidelity: None,
    })
}

/// Recover the projective (GL) representative: the same eigenproblem with
/// no unitary projection, normalized to unit largest singular value.
/// Errors if the recovered matrix is rank-deficient.
pub fn recover_projective(
    p: &ProjectorField,
    p_prime: &ProjectorField,
) -> Result<DMatrix<Complex64>> {
    let (raw, _residual, _gap) = recover_raw(p, p_prime)?;
    let sv = raw.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if smin < 1e-8 * smax {
        return Err(Error::SingularRecovery { smin });
    }
    let mut out = raw * Complex64::new(1.0 / smax, 0.0);
    fix_matrix_phase(&mut out);
    Ok(out)
}

/// Per-level max pointwise ‖σ P_l σ† − P′_l‖_F for matched projector lists.
pub fn verify_conjugation(
    sigma: &DMatrix<Complex64>,
    levels: &[ProjectorField],
    levels_prime: &[ProjectorField],
) -> Result<Vec<f64>> {
    if levels.len() != levels_prime.len() {
        return Err(Error::ShapeMismatch(format!(
            "level lists differ: {} vs {}",
            levels.len(),
            levels_prime.len()
        )));
    }
    let mut out = Vec::with_capacity(levels.len());
    for (a, b) in levels.iter().zip(levels_prime) {
        a.grid.check_same(&b.grid)?;
        let mut worst = 0.0f64;
        for q in 0..a.grid.len() {
            let conj = sigma * &a.mats[q] * sigma.adjoint();
            worst = worst.max((conj - &b.mats[q]).norm());
        }
        out.push(worst);
    }
    Ok(out)
}

/// Max pointwise distance between P′ and the projector onto ξ·range(P),
/// for rank-1 fields and an invertible (not necessarily unitary) ξ.
pub fn gl_conjugation_residual(
    xi: &DMatrix<Complex64>,
    p: &ProjectorField,
    p_prime: &ProjectorField,
) -> Result<f64> {
    p.grid.check_same(&p_prime.grid)?;
    if p.rank != 1 || p_prime.rank != 1 {
        return Err(Error::ShapeMismatch(
            "projective conjugation check needs rank-1 fields".into(),
        ));
    }
    let nb = p.n_bands;
    let mut worst = 0.0f64;
    for q in 0..p.grid.len() {
        let m = &p.mats[q];
        let mut best = 0;
        let mut best_diag = -1.0;
        for j in 0..nb {
            if m[(j, j)].re > best_diag {
                best_diag = m[(j, j)].re;
                best = j;
            }
        }
        let v = m.column(best).into_owned();
        let w = xi * v;
        let norm = w.norm();
        if norm < 1e-200 {
            return Err(Error::SingularRecovery { smin: norm });
        }
        let wn = w / Complex64::new(norm, 0.0);
        let proj = &wn * wn.adjoint();
        worst = worst.max((proj - &p_prime.mats[q]).norm());
    }
    Ok(worst)
}

/// Haar-distributed N×N unitary from a seeded ChaCha stream (QR of a complex
/// Gaussian matrix with the R-diagonal phases normalized).
pub fn random_unitary(n: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let g = DMatrix::from_fn(n, n, |_, _| Complex64::new(normal(), normal()));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / Complex64::new(d.norm(), 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}
