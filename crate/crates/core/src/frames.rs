//! The harmonic sequence: orthonormal frames from analytic jets, level and
//! osculating projectors, and the hyperosculation report.
//!
//! Frames come from modified Gram–Schmidt with one reorthogonalization pass,
//! in jet order. The k-th level projector P_k = f̂_k f̂_k† is the k-th
//! harmonic band; Π_k = Σ_{j≤k} P_j is the osculating-plane projector of the
//! k-th associated curve. Both are exactly periodic on the torus: the
//! automorphy factors of the lift cancel.

use crate::error::{Error, Result};
use crate::grid::BZGrid;
use crate::par;
use crate::theta::JetFrameField;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Relative threshold for the rank check inside Gram–Schmidt.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Orthonormal frames f̂_0..f̂_m per grid point, plus the pre-normalization
/// Gram–Schmidt norms ‖f̃_k‖ (the potentials log‖f̃_k‖² feed the curvature
/// oracles and the top-level recurrence line).
#[derive(Debug, Clone)]
pub struct OrthoFrameField {
    pub grid: BZGrid,
    pub n_bands: usize,
    pub order: usize,
    /// N×(order+1) matrices with orthonormal columns.
    pub vectors: Vec<DMatrix<Complex64>>,
    /// Flat norms, index p·(order+1)+k.
    pub norms: Vec<f64>,
}

impl OrthoFrameField {
    #[inline]
    pub fn norm_at(&self, p: usize, k: usize) -> f64 {
        self.norms[p * (self.order + 1) + k]
    }

    pub fn levels(&self) -> usize {
        self.order + 1
    }
}

/// An N×N Hermitian idempotent of fixed rank per grid point.
#[derive(Debug, Clone)]
pub struct ProjectorField {
    pub grid: BZGrid,
    pub n_bands: usize,
    pub rank: usize,
    pub mats: Vec<DMatrix<Complex64>>,
}

impl ProjectorField {
    pub fn from_parts(
        grid: BZGrid,
        n_bands: usize,
        rank: usize,
        mats: Vec<DMatrix<Complex64>>,
    ) -> Result<Self> {
        if mats.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "projector field has {} matrices for an n={} grid",
                mats.len(),
                grid.n()
            )));
        }
        Ok(Self {
            grid,
            n_bands,
            rank,
            mats,
        })
    }

    #[inline]
    pub fn at(&self, i1: usize, i2: usize) -> &DMatrix<Complex64> {
        &self.mats[self.grid.idx(i1, i2)]
    }

    /// Checks P = P† (1e-12), P² = P (1e-10) and tr P = rank (1e-10).
    pub fn validate(&self) -> Result<()> {
        for (p, m) in self.mats.iter().enumerate() {
            let herm = (m - m.adjoint()).norm();
            if herm > 1e-12 {
                let (i1, i2) = self.grid.unflatten(p);
                return Err(Error::ProjectorInvariant {
                    what: "hermiticity",
                    defect: herm,
                    i1,
                    i2,
                });
            }
            let idem = (m * m - m).norm();
            if idem > 1e-10 {
                let (i1, i2) = self.grid.unflatten(p);
                return Err(Error::ProjectorInvariant {
                    what: "idempotency",
                    defect: idem,
                    i1,
                    i2,
                });
            }
            let tr = m.trace();
            let defect = (tr - Complex64::new(self.rank as f64, 0.0)).norm();
            if defect > 1e-10 {
                let (i1, i2) = self.grid.unflatten(p);
                return Err(Error::ProjectorInvariant {
                    what: "trace",
                    defect,
                    i1,
                    i2,
                });
            }
        }
        Ok(())
    }

    /// JSON `{"n":…, "N":…, "rank":…, "re":[[[…]]], "im":[[[…]]]}` with the
    /// outer index the flat grid point p = i1·n + i2.
    pub fn to_json(&self) -> String {
        use std::fmt::Write;
        let nb = self.n_bands;
        let mut out = String::new();
        let _ = write!(
            out,
            "{{\"n\":{},\"N\":{},\"rank\":{},",
            self.grid.n(),
            nb,
            self.rank
        );
        for (label, part) in [("re", 0), ("im", 1)] {
            let _ = write!(out, "\"{label}\":[");
            for (p, m) in self.mats.iter().enumerate() {
                if p > 0 {
                    out.push(',');
                }
                out.push('[');
                for r in 0..nb {
                    if r > 0 {
                        out.push(',');
                    }
                    out.push('[');
                    for c in 0..nb {
                        if c > 0 {
                            out.push(',');
                        }
                        let v = if part == 0 { m[(r, c)].re } else { m[(r, c)].im };
                        let _ = write!(out, "{:.16e}", v);
                    }
                    out.push(']');
                }
                out.push(']');
            }
            out.push(']');
            if part == 0 {
                out.push(',');
            }
        }
        out.push('}');
        out
    }
}

/// Fix the phase of a unit vector: largest-modulus component real positive.
fn fix_phase(v: &mut nalgebra::DVector<Complex64>) {
    let mut best = 0usize;
    let mut best_mod = 0.0f64;
    for (i, x) in v.iter().enumerate() {
        let m = x.norm();
        if m > best_mod {
            best_mod = m;
            best = i;
        }
    }
    if best_mod > 0.0 {
        let phase = v[best].conj() / Complex64::new(best_mod, 0.0);
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}

struct PointFrames {
    q: DMatrix<Complex64>,
    norms: Vec<f64>,
    defect: Option<(usize, f64, f64)>, // (column, residual, threshold)
}

fn gram_schmidt_point(a: &DMatrix<Complex64>, n_bands: usize) -> PointFrames {
    let cols = a.ncols();
    let mut q = a.clone();
    let mut norms = vec![0.0; cols];
    let mut defect = None;
    let frob = a.norm();
    for k in 0..cols {
        let mut v = a.column(k).into_owned();
        for _pass in 0..2 {
            for j in 0..k {
                let qj = q.column(j);
                let c = qj.dotc(&v);
                v.axpy(-c, &qj.into_owned(), Complex64::new(1.0, 0.0));
            }
        }
        let norm = v.norm();
        norms[k] = norm;
        // Columns below the top band must stay independent; jet degeneracy
        // there is genuine special hyperosculation. The top residual lives in
        // a one-dimensional orthocomplement, so its direction survives even
        // when its norm underflows; top-order contact points are generic for
        // degree-N elliptic embeddings and carry no error.
        if k + 1 < n_bands && defect.is_none() {
            let threshold_fast = RANK_THRESHOLD * frob;
            if norm < threshold_fast {
                let sigma_max = a.clone().svd(false, false).singular_values.max();
                let threshold = RANK_THRESHOLD * sigma_max;
                if norm < threshold {
                    defect = Some((k, norm, threshold));
                }
            }
        }
        if norm > 1e-300 {
            v /= Complex64::new(norm, 0.0);
        } else {
            // exact top-order contact: rebuild the orthocomplement direction
            let mut best: Option<nalgebra::DVector<Complex64>> = None;
            let mut best_norm = -1.0;
            for i in 0..v.len() {
                let mut e = nalgebra::DVector::from_element(v.len(), Complex64::new(0.0, 0.0));
                e[i] = Complex64::new(1.0, 0.0);
                for _ in 0..2 {
                    for j in 0..k {
                        let qj = q.column(j);
                        let c = qj.dotc(&e);
                        e.axpy(-c, &qj.into_owned(), Complex64::new(1.0, 0.0));
                    }
                }
                let m = e.norm();
                if m > best_norm {
                    best_norm = m;
                    best = Some(e);
                }
            }
            v = best.expect("nonempty frame");
            v /= Complex64::new(v.norm(), 0.0);
        }
        fix_phase(&mut v);
        q.set_column(k, &v);
    }
    PointFrames { q, norms, defect }
}

/// Modified Gram–Schmidt (one reorthogonalization pass) over the whole grid.
pub fn gram_schmidt_frames(jets: &JetFrameField) -> Result<OrthoFrameField> {
    let results = par::map_collect(&jets.frames, |a| gram_schmidt_point(a, jets.n_bands));
    let mut vectors = Vec::with_capacity(results.len());
    let mut norms = Vec::with_capacity(results.len() * (jets.order + 1));
    for (p, r) in results.into_iter().enumerate() {
        if let Some((col, residual, threshold)) = r.defect {
            let (i1, i2) = jets.grid.unflatten(p);
            return Err(Error::RankDeficient {
                i1,
                i2,
                col,
                residual,
                threshold,
            });
        }
        vectors.push(r.q);
        norms.extend(r.norms);
    }
    Ok(OrthoFrameField {
        grid: jets.grid,
        n_bands: jets.n_bands,
        order: jets.order,
        vectors,
        norms,
    })
}

/// P_k = f̂_k f̂_k†, the rank-1 projector of the k-th harmonic band.
pub fn level_projector(frames: &OrthoFrameField, k: usize) -> Result<ProjectorField> {
    if k > frames.order {
        return Err(Error::LevelOutOfRange {
            k: k as i64,
            n_bands: frames.n_bands,
        });
    }
    let mats = par::map_collect(&frames.vectors, |q| {
        let v = q.column(k);
        &v * v.adjoint()
    });
    ProjectorField::from_parts(frames.grid, frames.n_bands, 1, mats)
}

/// Π_k = Σ_{j≤k} P_j, the rank-(k+1) osculating-plane projector.
pub fn osculating_projector(frames: &OrthoFrameField, k: usize) -> Result<ProjectorField> {
    if k > frames.order {
        return Err(Error::LevelOutOfRange {
            k: k as i64,
            n_bands: frames.n_bands,
        });
    }
    let mats = par::map_collect(&frames.vectors, |q| {
        let v = q.columns(0, k + 1);
        &v * v.adjoint()
    });
    ProjectorField::from_parts(frames.grid, frames.n_bands, k + 1, mats)
}

/// Strict-positivity diagnostics for the jet flags.
#[derive(Debug, Clone)]
pub struct HyperosculationReport {
    /// min over the grid of |det(jets)| / ∏‖columns‖ (full square matrix).
    /// Vanishes at top-order contact points, which every degree-N elliptic
    /// embedding possesses; reported for information.
    pub min_abs_wronskian: f64,
    /// For each k = 0..=N−2, min over the grid of the smallest singular value
    /// of the first k+1 unit-normalized columns. All strictly positive when
    /// the embedding has no special hyperosculation points.
    pub min_singular_values: Vec<f64>,
    pub grid: BZGrid,
}

/// Scan the jets for hyperosculation: Hadamard-normalized Wronskian and
/// per-order sub-flag conditioning.
pub fn check_no_hyperosculation(jets: &JetFrameField) -> HyperosculationReport {
    let cols = jets.order + 1;
    let n_bands = jets.n_bands;
    let per_point: Vec<(f64, Vec<f64>)> = par::map_collect(&jets.frames, |a| {
        let mut normalized = a.clone();
        for c in 0..cols {
            let norm = normalized.column(c).norm();
            if norm > 0.0 {
                for r in 0..n_bands {
                    normalized[(r, c)] /= Complex64::new(norm, 0.0);
                }
            }
        }
        let wronskian = if cols == n_bands {
            normalized.determinant().norm()
        } else {
            f64::NAN
        };
        let kmax = cols.min(n_bands - 1);
        let mut svs = Vec::with_capacity(kmax);
        for k in 0..kmax {
            let sub = normalized.columns(0, k + 1).into_owned();
            let sv = sub.svd(false, false).singular_values;
            svs.push(sv.min());
        }
        (wronskian, svs)
    });
    let kmax = cols.min(n_bands - 1);
    let mut min_w = f64::INFINITY;
    let mut mins = vec![f64::INFINITY; kmax];
    for (w, svs) in &per_point {
        if !w.is_nan() {
            min_w = min_w.min(*w);
        }
        for (k, s) in svs.iter().enumerate() {
            mins[k] = mins[k].min(*s);
        }
    }
    if min_w == f64::INFINITY {
        min_w = f64::NAN;
    }
    HyperosculationReport {
        min_abs_wronskian: min_w,
        min_singular_values: mins,
        grid: jets.grid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BZGrid, ModularParameter};
    use crate::theta::{embedding_lift, embedding_lift_shifted, JetFrameField, ThetaBasis};
    use nalgebra::DMatrix;

    fn tau_i() -> ModularParameter {
        ModularParameter::new(Complex64::new(0.0, 1.0)).unwrap()
    }

    fn theta_frames(n_bands: usize, n: usize) -> OrthoFrameField {
        let basis = ThetaBasis::new(tau_i(), n_bands, 1e-14).unwrap();
        let grid = BZGrid::new(n).unwrap();
        let jets = embedding_lift(&basis, grid, n_bands - 1).unwrap();
        gram_schmidt_frames(&jets).unwrap()
    }

    #[test]
    fn orthogonal_input_is_fixed_point() {
        let grid = BZGrid::new(4).unwrap();
        // orthogonal (not orthonormal) columns: scaled identity-like
        let m = DMatrix::from_fn(3, 3, |r, c| {
            if r == c {
                Complex64::new((c + 1) as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let jets = JetFrameField {
            grid,
            n_bands: 3,
            order: 2,
            frames: vec![m; grid.len()],
        };
        let frames = gram_schmidt_frames(&jets).unwrap();
        for k in 0..3 {
            assert!((frames.norm_at(0, k) - (k + 1) as f64).abs() < 1e-14);
            // direction preserved up to phase; phase convention makes it e_k
            let v = frames.vectors[0].column(k);
            assert!((v[k] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn frames_are_orthonormal_to_1e10() {
        let frames = theta_frames(4, 64);
        let mut worst = 0.0f64;
        for q in &frames.vectors {
            let g = q.adjoint() * q;
            let id = DMatrix::<Complex64>::identity(4, 4);
            worst = worst.max((g - id).norm());
        }
        assert!(worst < 1e-10, "orthonormality defect {worst}");
    }

    #[test]
    fn span_matches_svd_projector() {
        // projector onto span(f̂_0..f̂_k) vs projector from the SVD of the
        // jet columns 0..k — independent oracle
        let basis = ThetaBasis::new(tau_i(), 4, 1e-14).unwrap();
        let grid = BZGrid::new(8).unwrap();
        let jets = embedding_lift(&basis, grid, 3).unwrap();
        let frames = gram_schmidt_frames(&jets).unwrap();
        for k in 0..3 {
            let pi = osculating_projector(&frames, k).unwrap();
            let mut worst = 0.0f64;
            for (p, a) in jets.frames.iter().enumerate() {
                let sub = a.columns(0, k + 1).into_owned();
                let svd = sub.svd(true, false);
                let u = svd.u.unwrap();
                let ur = u.columns(0, k + 1);
                let p_svd = &ur * ur.adjoint();
                worst = worst.max((&p_svd - &pi.mats[p]).norm());
            }
            assert!(worst < 1e-9, "k={k}: projector mismatch {worst}");
        }
    }

    #[test]
    fn rank_deficient_jets_error() {
        let grid = BZGrid::new(4).unwrap();
        let mut m = DMatrix::from_fn(3, 3, |r, c| {
            Complex64::new((r + c) as f64 + 1.0, (r as f64) - (c as f64))
        });
        // duplicate column 1 into column 0: columns 0,1 dependent
        let col = m.column(1).into_owned();
        m.set_column(0, &col);
        let jets = JetFrameField {
            grid,
            n_bands: 3,
            order: 2,
            frames: vec![m; grid.len()],
        };
        let err = gram_schmidt_frames(&jets).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { col: 1, .. }));
    }

    #[test]
    fn level_zero_reproduces_lift_direction() {
        let basis = ThetaBasis::new(tau_i(), 3, 1e-14).unwrap();
        let grid = BZGrid::new(16).unwrap();
        let jets = embedding_lift(&basis, grid, 2).unwrap();
        let frames = gram_schmidt_frames(&jets).unwrap();
        let p0 = level_projector(&frames, 0).unwrap();
        let mut worst = 0.0f64;
        for (p, a) in jets.frames.iter().enumerate() {
            let f = a.column(0).into_owned();
            let resid = (&p0.mats[p] * &f - &f).norm() / f.norm();
            worst = worst.max(resid);
        }
        assert!(worst < 1e-10, "P0 does not fix the lift: {worst}");
    }

    #[test]
    fn levels_resolve_identity() {
        let frames = theta_frames(4, 16);
        let mut worst = 0.0f64;
        let id = DMatrix::<Complex64>::identity(4, 4);
        for p in 0..frames.grid.len() {
            let mut sum = DMatrix::<Complex64>::zeros(4, 4);
            for k in 0..4 {
                let v = frames.vectors[p].column(k);
                sum += &v * v.adjoint();
            }
            worst = worst.max((sum - &id).norm());
        }
        assert!(worst < 1e-9, "sum of levels defect {worst}");
    }

    #[test]
    fn projectors_periodic_across_torus_identification() {
        // same field from the shifted grid k2 -> k2 + 1 (z -> z + tau)
        let basis = ThetaBasis::new(tau_i(), 3, 1e-14).unwrap();
        let grid = BZGrid::new(12).unwrap();
        let jets = embedding_lift(&basis, grid, 2).unwrap();
        let jets_shifted = embedding_lift_shifted(&basis, grid, 2, tau_i().tau()).unwrap();
        let frames = gram_schmidt_frames(&jets).unwrap();
        let frames_shifted = gram_schmidt_frames(&jets_shifted).unwrap();
        for k in 0..3 {
            let a = level_projector(&frames, k).unwrap();
            let b = level_projector(&frames_shifted, k).unwrap();
            let mut worst = 0.0f64;
            for p in 0..grid.len() {
                worst = worst.max((&a.mats[p] - &b.mats[p]).norm());
            }
            assert!(worst < 1e-9, "level {k}: periodicity defect {worst}");
        }
    }

    #[test]
    fn osculating_tower() {
        let frames = theta_frames(4, 8);
        let p0 = level_projector(&frames, 0).unwrap();
        let pi0 = osculating_projector(&frames, 0).unwrap();
        for p in 0..frames.grid.len() {
            assert!((&p0.mats[p] - &pi0.mats[p]).norm() < 1e-13);
        }
        let top = osculating_projector(&frames, 3).unwrap();
        let id = DMatrix::<Complex64>::identity(4, 4);
        for m in &top.mats {
            assert!((m - &id).norm() < 1e-9);
        }
        for k in 0..4 {
            let pik = osculating_projector(&frames, k).unwrap();
            pik.validate().unwrap();
        }
    }

    #[test]
    fn unitary_equivariance_of_levels() {
        let basis = ThetaBasis::new(tau_i(), 3, 1e-14).unwrap();
        let grid = BZGrid::new(8).unwrap();
        let jets = embedding_lift(&basis, grid, 2).unwrap();
        let sigma = crate::rigidity::random_unitary(3, 7);
        let twisted = jets.apply_matrix(&sigma);
        let frames = gram_schmidt_frames(&jets).unwrap();
        let frames_t = gram_schmidt_frames(&twisted).unwrap();
        for k in 0..3 {
            let a = level_projector(&frames, k).unwrap();
            let b = level_projector(&frames_t, k).unwrap();
            let mut worst = 0.0f64;
            for p in 0..grid.len() {
                let conj = &sigma * &a.mats[p] * sigma.adjoint();
                worst = worst.max((conj - &b.mats[p]).norm());
            }
            assert!(worst < 1e-10, "level {k}: equivariance defect {worst}");
        }
    }

    #[test]
    fn scalar_gauge_leaves_levels_unchanged() {
        let tau = tau_i();
        let basis = ThetaBasis::new(tau, 3, 1e-14).unwrap();
        let grid = BZGrid::new(8).unwrap();
        let jets = embedding_lift(&basis, grid, 2).unwrap();
        let gauged = jets.scalar_gauge_exp(Complex64::new(0.4, 0.9), tau);
        let frames = gram_schmidt_frames(&jets).unwrap();
        let frames_g = gram_schmidt_frames(&gauged).unwrap();
        for k in 0..3 {
            let a = level_projector(&frames, k).unwrap();
            let b = level_projector(&frames_g, k).unwrap();
            let mut worst = 0.0f64;
            for p in 0..grid.len() {
                worst = worst.max((&a.mats[p] - &b.mats[p]).norm());
            }
            assert!(worst < 1e-10, "level {k}: gauge defect {worst}");
        }
    }

    #[test]
    fn hyperosculation_report_positive_for_theta_embedding() {
        // n = 64 keeps the top-contact points of N = 3 off-grid
        let basis = ThetaBasis::new(tau_i(), 3, 1e-14).unwrap();
        let grid = BZGrid::new(64).unwrap();
        let jets = embedding_lift(&basis, grid, 2).unwrap();
        let report = check_no_hyperosculation(&jets);
        assert!(report.min_abs_wronskian > 0.0);
        assert_eq!(report.min_singular_values.len(), 2);
        for (k, s) in report.min_singular_values.iter().enumerate() {
            assert!(*s > 1e-3, "k={k}: sub-flag singular value {s}");
        }
    }

    #[test]
    fn constructed_degeneracy_reports_zero() {
        let grid = BZGrid::new(4).unwrap();
        let mut m = DMatrix::from_fn(3, 3, |r, c| Complex64::new(1.0 + (r * c) as f64, r as f64));
        let col = m.column(0).into_owned();
        m.set_column(1, &col); // two identical columns
        let jets = JetFrameField {
            grid,
            n_bands: 3,
            order: 2,
            frames: vec![m; grid.len()],
        };
        let report = check_no_hyperosculation(&jets);
        assert!(report.min_singular_values[1] < 1e-12);
        assert!(report.min_abs_wronskian < 1e-12);
    }
}
