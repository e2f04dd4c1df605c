//! Tight-binding ingestion: hopping specs, Bloch Hamiltonians, Fermi
//! projector fields, and the Kähler-band deviation functional.

use crate::error::{Error, Result};
use crate::frames::ProjectorField;
use crate::geometry::QGTField;
use crate::grid::BZGrid;
use crate::par;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// One hopping term h(γ).
#[derive(Debug, Clone)]
pub struct Hopping {
    pub gamma: [i64; 2],
    pub matrix: DMatrix<Complex64>,
}

/// A validated, Hermitian-closed finite-range hopping function.
#[derive(Debug, Clone)]
pub struct HoppingSpec {
    pub n_bands: usize,
    pub cutoff: i64,
    pub hoppings: Vec<Hopping>,
}

const HERMITICITY_TOL: f64 = 1e-12;

impl HoppingSpec {
    /// Validate and Hermitian-close a list of hoppings: h(0) must be
    /// Hermitian; for γ ≠ 0, (−γ, h†) is added when absent and checked for
    /// consistency when present.
    pub fn new(n_bands: usize, cutoff: i64, hoppings: Vec<Hopping>) -> Result<Self> {
        if n_bands == 0 {
            return Err(Error::HoppingSpec("bands must be >= 1".into()));
        }
        if cutoff < 0 {
            return Err(Error::HoppingSpec("cutoff must be >= 0".into()));
        }
        let mut map: BTreeMap<[i64; 2], DMatrix<Complex64>> = BTreeMap::new();
        for h in hoppings {
            if h.matrix.nrows() != n_bands || h.matrix.ncols() != n_bands {
                return Err(Error::HoppingSpec(format!(
                    "hopping at gamma {:?} is {}x{}, expected {n_bands}x{n_bands}",
                    h.gamma,
                    h.matrix.nrows(),
                    h.matrix.ncols()
                )));
            }
            if h.gamma[0].abs() > cutoff || h.gamma[1].abs() > cutoff {
                return Err(Error::HoppingSpec(format!(
                    "gamma {:?} beyond declared cutoff {cutoff}",
                    h.gamma
                )));
            }
            if map.insert(h.gamma, h.matrix).is_some() {
                return Err(Error::HoppingSpec(format!(
                    "duplicate hopping at gamma {:?}",
                    h.gamma
                )));
            }
        }
        if let Some(h0) = map.get(&[0, 0]) {
            let defect = (h0 - h0.adjoint()).norm();
            if defect > HERMITICITY_TOL {
                return Err(Error::HoppingSpec(format!(
                    "h(0) is not Hermitian (defect {defect:.3e})"
                )));
            }
        }
        let keys: Vec<[i64; 2]> = map.keys().cloned().collect();
        for gamma in keys {
            if gamma == [0, 0] {
                continue;
            }
            let neg = [-gamma[0], -gamma[1]];
            let expected = map[&gamma].adjoint();
            match map.get(&neg) {
                None => {
                    map.insert(neg, expected);
                }
                Some(present) => {
                    let defect = (present - &expected).norm();
                    if defect > HERMITICITY_TOL {
                        return Err(Error::HoppingSpec(format!(
                            "hoppings at {gamma:?} and {neg:?} violate Hermiticity \
                             (defect {defect:.3e})"
                        )));
                    }
                }
            }
        }
        let hoppings = map
            .into_iter()
            .map(|(gamma, matrix)| Hopping { gamma, matrix })
            .collect();
        Ok(Self {
            n_bands,
            cutoff,
            hoppings,
        })
    }
}

#[derive(Deserialize)]
struct RawHopping {
    gamma: [i64; 2],
    matrix_re: Vec<Vec<f64>>,
    matrix_im: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawSpec {
    dim: usize,
    bands: usize,
    cutoff: i64,
    hoppings: Vec<RawHopping>,
}

/// Parse the JSON hopping-spec document
/// `{"dim":2,"bands":N,"cutoff":R,"hoppings":[{"gamma":[g1,g2],"matrix_re":…,"matrix_im":…}]}`.
pub fn parse_hopping_spec(document: &str) -> Result<HoppingSpec> {
    let raw: RawSpec = serde_json::from_str(document)
        .map_err(|e| Error::HoppingSpec(format!("malformed JSON: {e}")))?;
    if raw.dim != 2 {
        return Err(Error::HoppingSpec(format!(
            "dim must be 2, got {}",
            raw.dim
        )));
    }
    let n = raw.bands;
    let mut hoppings = Vec::with_capacity(raw.hoppings.len());
    for h in raw.hoppings {
        let check = |m: &Vec<Vec<f64>>, part: &str| -> Result<()> {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(Error::HoppingSpec(format!(
                    "{part} at gamma {:?} is not {n}x{n}",
                    h.gamma
                )));
            }
            Ok(())
        };
        check(&h.matrix_re, "matrix_re")?;
        check(&h.matrix_im, "matrix_im")?;
        let matrix =
            DMatrix::from_fn(n, n, |r, c| Complex64::new(h.matrix_re[r][c], h.matrix_im[r][c]));
        hoppings.push(Hopping {
            gamma: h.gamma,
            matrix,
        });
    }
    HoppingSpec::new(n, raw.cutoff, hoppings)
}

/// Bloch Hamiltonian h(k) = Σ_γ h(γ)·exp(2πi k·γ) sampled on the grid.
#[derive(Debug, Clone)]
pub struct BlochField {
    pub grid: BZGrid,
    pub n_bands: usize,
    pub mats: Vec<DMatrix<Complex64>>,
}

pub fn bloch_hamiltonian(spec: &HoppingSpec, grid: BZGrid) -> BlochField {
    let n = grid.n();
    let nb = spec.n_bands;
    let mats = par::map_indices(grid.len(), |p| {
        let (i1, i2) = (p / n, p % n);
        let (k1, k2) = (grid.coord(i1), grid.coord(i2));
        let mut h = DMatrix::<Complex64>::zeros(nb, nb);
        for term in &spec.hoppings {
            let phase = 2.0 * PI * (k1 * term.gamma[0] as f64 + k2 * term.gamma[1] as f64);
            let factor = Complex64::new(0.0, phase).exp();
            h += &term.matrix * factor;
        }
        h
    });
    BlochField {
        grid,
        n_bands: nb,
        mats,
    }
}

impl BlochField {
    /// max over the grid of ‖h(k) − h(k)†‖.
    pub fn hermiticity_defect(&self) -> f64 {
        self.mats
            .iter()
            .fold(0.0f64, |m, h| m.max((h - h.adjoint()).norm()))
    }
}

/// Fermi projector field together with the spectral gap at the Fermi level.
#[derive(Debug, Clone)]
pub struct FermiProjector {
    pub projector: ProjectorField,
    /// min over the grid of the distance from E_F to the spectrum.
    pub gap: f64,
}

pub const DEFAULT_GAP_THRESHOLD: f64 = 1e-6;

/// P(k) = Θ(E_F − h(k)) by eigendecomposition: the sum of eigenprojectors
/// with eigenvalue below E_F. Fails on gap closure or rank change.
pub fn fermi_projector_field(
    bloch: &BlochField,
    e_f: f64,
    gap_threshold: f64,
) -> Result<FermiProjector> {
    let nb = bloch.n_bands;
    struct PointResult {
        projector: DMatrix<Complex64>,
        rank: usize,
        gap: f64,
    }
    let per_point: Vec<PointResult> = par::map_collect(&bloch.mats, |h| {
        let herm = (h + h.adjoint()).scale(0.5);
        let eig = SymmetricEigen::new(herm);
        let mut projector = DMatrix::<Complex64>::zeros(nb, nb);
        let mut rank = 0usize;
        let mut gap = f64::INFINITY;
        for (i, ev) in eig.eigenvalues.iter().enumerate() {
            gap = gap.min((ev - e_f).abs());
            if *ev < e_f {
                rank += 1;
                let v: DVector<Complex64> = eig.eigenvectors.column(i).into_owned();
                projector += &v * v.adjoint();
            }
        }
        PointResult {
            projector,
            rank,
            gap,
        }
    });
    let rank0 = per_point[0].rank;
    let mut gap = f64::INFINITY;
    for (p, r) in per_point.iter().enumerate() {
        let (i1, i2) = bloch.grid.unflatten(p);
        if r.gap < gap_threshold {
            return Err(Error::GapClosure {
                gap: r.gap,
                threshold: gap_threshold,
                i1,
                i2,
            });
        }
        if r.rank != rank0 {
            return Err(Error::RankChange {
                rank0,
                rank: r.rank,
                i1,
                i2,
            });
        }
        gap = gap.min(r.gap);
    }
    let projector = ProjectorField::from_parts(
        bloch.grid,
        nb,
        rank0,
        per_point.into_iter().map(|r| r.projector).collect(),
    )?;
    Ok(FermiProjector { projector, gap })
}

/// ∫(√det g − |w12|) dk1∧dk2: zero exactly on Kähler bands (and, trivially,
/// on any two-band model, where the pointwise bound is an identity — there
/// the sign of w12 is the discriminating datum).
pub fn kahler_deviation(q: &QGTField) -> f64 {
    let sqrt_det = q.sqrt_det_g();
    let sum: f64 = sqrt_det
        .iter()
        .zip(&q.w12)
        .map(|(s, w)| s - w.abs())
        .sum();
    sum / q.grid.len() as f64
}

/// Bundled two-band model h(k) = d(k)·σ with
/// d = (sin 2πk1, sin 2πk2, m − cos 2πk1 − cos 2πk2).
pub fn two_band_model(m: f64) -> HoppingSpec {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let h0 = DMatrix::from_row_slice(2, 2, &[c(m, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-m, 0.0)]);
    // e1 hop: −σz/2 − (i/2)σx
    let h10 = DMatrix::from_row_slice(
        2,
        2,
        &[c(-0.5, 0.0), c(0.0, -0.5), c(0.0, -0.5), c(0.5, 0.0)],
    );
    // e2 hop: −σz/2 − (i/2)σy
    let h01 = DMatrix::from_row_slice(
        2,
        2,
        &[c(-0.5, 0.0), c(-0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)],
    );
    HoppingSpec::new(
        2,
        1,
        vec![
            Hopping {
                gamma: [0, 0],
                matrix: h0,
            },
            Hopping {
                gamma: [1, 0],
                matrix: h10,
            },
            Hopping {
                gamma: [0, 1],
                matrix: h01,
            },
        ],
    )
    .expect("bundled model is valid")
}

/// Bundled trivial insulator: on-site diag(−1, 1), no hopping.
pub fn atomic_insulator() -> HoppingSpec {
    let h0 = DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ],
    );
    HoppingSpec::new(
        2,
        0,
        vec![Hopping {
            gamma: [0, 0],
            matrix: h0,
        }],
    )
    .expect("bundled model is valid")
}
