use thiserror::Error;

/// Errors surfaced by the band-geometry pipeline. Each variant names the
/// stage that failed and the violated invariant.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too small: n = {n}, need n >= {min}")]
    GridTooSmall { n: usize, min: usize },

    #[error("modular parameter must have Im(tau) > 0, got {re} + {im}i")]
    InvalidTau { re: f64, im: f64 },

    #[error("grid mismatch: {left} vs {right} points per side")]
    GridMismatch { left: usize, right: usize },

    #[error("theta series: tolerance {tol:.3e} unreachable at maximum cutoff {max_cutoff}")]
    ThetaCutoff { tol: f64, max_cutoff: usize },

    #[error("theta series requires Im(T) > 0, got {im}")]
    ThetaDomain { im: f64 },

    #[error("lift column vanished at grid point ({i1},{i2}); degenerate basis")]
    ZeroLift { i1: usize, i2: usize },

    #[error(
        "jet matrix rank-deficient at grid point ({i1},{i2}): column {col} residual {residual:.3e} \
         below {threshold:.3e} (special hyperosculation or insufficient precision)"
    )]
    RankDeficient {
        i1: usize,
        i2: usize,
        col: usize,
        residual: f64,
        threshold: f64,
    },

    #[error("projector invariant violated: {what} defect {defect:.3e} at grid point ({i1},{i2})")]
    ProjectorInvariant {
        what: &'static str,
        defect: f64,
        i1: usize,
        i2: usize,
    },

    #[error(
        "plaquette link modulus {modulus:.3e} below {threshold:.3e} at grid point ({i1},{i2}); \
         grid under-resolved or band degenerate"
    )]
    LinkTooSmall {
        modulus: f64,
        threshold: f64,
        i1: usize,
        i2: usize,
    },

    #[error("chern sum {sum:.6} is not integral (defect {defect:.3e})")]
    NonIntegralChern { sum: f64, defect: f64 },

    #[error("two-form not strictly positive at grid point ({i1},{i2}): w = {w:.3e}")]
    NonPositiveForm { w: f64, i1: usize, i2: usize },

    #[error("level index {k} out of range for {n_bands} bands")]
    LevelOutOfRange { k: i64, n_bands: usize },

    #[error(
        "spectral gap {gap:.3e} at grid point ({i1},{i2}) below threshold {threshold:.3e}; \
         band-insulator condition violated"
    )]
    GapClosure {
        gap: f64,
        threshold: f64,
        i1: usize,
        i2: usize,
    },

    #[error("Fermi projector rank changed across grid: {rank0} at origin vs {rank} at ({i1},{i2})")]
    RankChange {
        rank0: usize,
        rank: usize,
        i1: usize,
        i2: usize,
    },

    #[error(
        "degenerate alignment problem: two near-zero eigenvalues ({lambda0:.3e}, {lambda1:.3e}); \
         the optimal map is not unique"
    )]
    DegenerateAlignment { lambda0: f64, lambda1: f64 },

    #[error("eigensolver failed to converge")]
    EigenFailure,

    #[error("recovered matrix is rank-deficient (smallest singular value {smin:.3e})")]
    SingularRecovery { smin: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid hopping spec: {0}")]
    HoppingSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
