//! Jacobi theta functions with characteristics and the degree-N holomorphic
//! lift they generate.
//!
//! The series is
//!   θ[a,b](v,T) = Σ_{n∈ℤ} exp(πi(n+a)²T + 2πi(n+a)(v+b)),  Im T > 0,
//! summed over a window centred on the dominant Gaussian term, with the
//! cutoff chosen from the tail bound so that the truncation error of every
//! requested derivative stays below the caller's absolute tolerance.
//!
//! The lift is f̃_j(z) = θ[j/N, 0](N z, N τ), j = 0..N−1, the standard basis
//! of sections for the degree-N system on ℂ/(ℤ+τℤ); analytic jets follow by
//! term-wise differentiation with the chain-rule factor N per order.

use crate::error::{Error, Result};
use crate::grid::{BZGrid, ModularParameter};
use crate::par;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

pub const MAX_THETA_ORDER: usize = 8;
const MAX_CUTOFF: usize = 96;

/// Series window half-width for the worst term of the requested order.
///
/// Bound used: for |n + a − c₀| ≥ u (c₀ = −Im v / Im T the Gaussian centre),
///   |∂^c θ term| ≤ (2π(|c₀| + u + 2))^order · exp(π Im(v)²/Im T − π Im T u²).
fn series_cutoff(im_v: f64, im_t: f64, abs_a_plus: f64, order: usize, tol: f64) -> Result<usize> {
    let log_tol = (tol / 8.0).ln();
    if !log_tol.is_finite() {
        return Err(Error::ThetaCutoff {
            tol,
            max_cutoff: MAX_CUTOFF,
        });
    }
    let c0 = -im_v / im_t;
    let scale = PI * im_v * im_v / im_t;
    let log_bound = |u: f64| -> f64 {
        let poly = if order == 0 {
            0.0
        } else {
            (order as f64) * (2.0 * PI * (c0.abs() + u + 2.0 + abs_a_plus)).ln()
        };
        scale - PI * im_t * u * u + poly
    };
    for m in 3..=MAX_CUTOFF {
        let u = (m - 2) as f64;
        if log_bound(u) <= log_tol && log_bound(u + 1.0) <= log_bound(u) - std::f64::consts::LN_2 {
            return Ok(m);
        }
    }
    Err(Error::ThetaCutoff {
        tol,
        max_cutoff: MAX_CUTOFF,
    })
}

/// θ[a,b](v,T) and its v-derivatives of orders 0..=order, each with absolute
/// truncation error below `tol`.
pub fn theta_eval(
    a: f64,
    b: f64,
    v: Complex64,
    t_param: Complex64,
    order: usize,
    tol: f64,
) -> Result<Vec<Complex64>> {
    if !(t_param.im > 0.0) {
        return Err(Error::ThetaDomain { im: t_param.im });
    }
    if order > MAX_THETA_ORDER {
        return Err(Error::ShapeMismatch(format!(
            "theta derivative order {order} exceeds supported maximum {MAX_THETA_ORDER}"
        )));
    }
    let m = series_cutoff(v.im, t_param.im, a.abs() + 1.0, order, tol)?;
    let center = (-v.im / t_param.im).round() as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); order + 1];
    let i = Complex64::new(0.0, 1.0);
    for n in (center - m as i64)..=(center + m as i64) {
        let na = n as f64 + a;
        let exponent = i * PI * na * na * t_param + i * 2.0 * PI * na * (v + b);
        let base = exponent.exp();
        let mut factor = Complex64::new(1.0, 0.0);
        let step = i * 2.0 * PI * na;
        for c in 0..=order {
            out[c] += factor * base;
            factor *= step;
        }
    }
    Ok(out)
}

/// Basis data for the degree-N lift: N theta functions with characteristics
/// (j/N, 0), evaluated at (N z, N τ).
#[derive(Debug, Clone)]
pub struct ThetaBasis {
    tau: ModularParameter,
    n_bands: usize,
    tol: f64,
    /// Series half-width for the fundamental domain (Im z ∈ [0, Im τ]),
    /// at the maximum jet order N−1.
    truncation: usize,
}

impl ThetaBasis {
    pub fn new(tau: ModularParameter, n_bands: usize, tol: f64) -> Result<Self> {
        if n_bands < 3 {
            return Err(Error::ShapeMismatch(format!(
                "theta basis needs at least 3 bands, got {n_bands}"
            )));
        }
        let im_t = n_bands as f64 * tau.im();
        let truncation = series_cutoff(im_t, im_t, 2.0, (n_bands - 1).min(MAX_THETA_ORDER), tol)?;
        Ok(Self {
            tau,
            n_bands,
            tol,
            truncation,
        })
    }

    pub fn tau(&self) -> ModularParameter {
        self.tau
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// JSON form `{"tau":[re,im], "N":…, "tol":…}`.
    pub fn to_json(&self) -> String {
        format!(
            "{{\"tau\":[{:.16e},{:.16e}],\"N\":{},\"tol\":{:.16e}}}",
            self.tau.tau().re,
            self.tau.tau().im,
            self.n_bands,
            self.tol
        )
    }

    /// Lift value and jets at a single point z, columns c = 0..=order of
    /// (d/dz)^c f̃.
    pub fn jets_at(&self, z: Complex64, order: usize) -> Result<DMatrix<Complex64>> {
        let n = self.n_bands;
        let t = n as f64 * self.tau.tau();
        let v = n as f64 * z;
        let mut frame = DMatrix::zeros(n, order + 1);
        for j in 0..n {
            let derivs = theta_eval(j as f64 / n as f64, 0.0, v, t, order, self.tol)?;
            let mut chain = 1.0;
            for c in 0..=order {
                frame[(j, c)] = derivs[c] * chain;
                chain *= n as f64;
            }
        }
        Ok(frame)
    }

    /// Common automorphy factor: f̃(z+τ) = μ(z)·f̃(z) with
    /// μ(z) = exp(−πi N τ − 2πi N z).
    pub fn quasiperiod_factor(&self, z: Complex64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        let n = self.n_bands as f64;
        (-i * PI * n * self.tau.tau() - i * 2.0 * PI * n * z).exp()
    }
}

/// Per grid point, the lift value and its first `order` z-derivatives: an
/// N×(order+1) complex matrix.
#[derive(Debug, Clone)]
pub struct JetFrameField {
    pub grid: BZGrid,
    pub n_bands: usize,
    pub order: usize,
    pub frames: Vec<DMatrix<Complex64>>,
}

impl JetFrameField {
    /// Left-multiply every frame by a constant matrix (a linear twist of the
    /// lift; unitary σ for isometric pairs, general GL for projective pairs).
    pub fn apply_matrix(&self, m: &DMatrix<Complex64>) -> JetFrameField {
        JetFrameField {
            grid: self.grid,
            n_bands: self.n_bands,
            order: self.order,
            frames: par::map_collect(&self.frames, |f| m * f),
        }
    }

    /// Rescale the lift by the nonvanishing holomorphic scalar e^{αz}; jets
    /// transform by the Leibniz rule. Projective data must be unchanged.
    pub fn scalar_gauge_exp(&self, alpha: Complex64, tau: ModularParameter) -> JetFrameField {
        let binom = binomial_table(self.order);
        let grid = self.grid;
        let frames = par::map_indices(self.frames.len(), |p| {
            let (i1, i2) = grid.unflatten(p);
            let z = grid.z_at(i1, i2, tau);
            let scale = (alpha * z).exp();
            let old = &self.frames[p];
            DMatrix::from_fn(self.n_bands, self.order + 1, |r, c| {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..=c {
                    acc += binom[c][m] * alpha.powu((c - m) as u32) * old[(r, m)];
                }
                acc * scale
            })
        });
        JetFrameField {
            grid,
            n_bands: self.n_bands,
            order: self.order,
            frames,
        }
    }
}

fn binomial_table(order: usize) -> Vec<Vec<Complex64>> {
    let mut t = vec![vec![Complex64::new(0.0, 0.0); order + 1]; order + 1];
    for c in 0..=order {
        t[c][0] = Complex64::new(1.0, 0.0);
        for m in 1..=c {
            let prev_left = if m <= c - 1 { t[c - 1][m] } else { Complex64::new(0.0, 0.0) };
            t[c][m] = t[c - 1][m - 1] + prev_left;
        }
    }
    t
}

/// Evaluate the lift and its analytic jets on the grid, z = k1 + τ k2 + shift.
pub fn embedding_lift_shifted(
    basis: &ThetaBasis,
    grid: BZGrid,
    order: usize,
    shift: Complex64,
) -> Result<JetFrameField> {
    if order + 1 > basis.n_bands() {
        return Err(Error::ShapeMismatch(format!(
            "jet order {} exceeds N-1 = {}",
            order,
            basis.n_bands() - 1
        )));
    }
    let tau = basis.tau();
    let frames_res: Vec<Result<DMatrix<Complex64>>> = par::map_indices(grid.len(), |p| {
        let (i1, i2) = grid.unflatten(p);
        basis.jets_at(grid.z_at(i1, i2, tau) + shift, order)
    });
    let mut frames = Vec::with_capacity(grid.len());
    for (p, r) in frames_res.into_iter().enumerate() {
        let f = r?;
        if f.column(0).norm() == 0.0 {
            let (i1, i2) = grid.unflatten(p);
            return Err(Error::ZeroLift { i1, i2 });
        }
        frames.push(f);
    }
    Ok(JetFrameField {
        grid,
        n_bands: basis.n_bands(),
        order,
        frames,
    })
}

/// Evaluate the lift and its analytic jets on the grid.
pub fn embedding_lift(basis: &ThetaBasis, grid: BZGrid, order: usize) -> Result<JetFrameField> {
    embedding_lift_shifted(basis, grid, order, Complex64::new(0.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mp(re: f64, im: f64) -> ModularParameter {
        ModularParameter::new(Complex64::new(re, im)).unwrap()
    }

    #[test]
    fn odd_theta_vanishes_at_origin() {
        for t in [
            Complex64::new(0.0, 1.0),
            Complex64::new(0.3, 0.8),
            Complex64::new(-0.4, 2.3),
        ] {
            let v = theta_eval(0.5, 0.5, Complex64::new(0.0, 0.0), t, 0, 1e-14).unwrap();
            assert!(v[0].norm() < 1e-13, "theta[1/2,1/2](0,{t}) = {}", v[0]);
        }
    }

    #[test]
    fn theta_constant_matches_brute_force_series() {
        // Independent oracle: plain partial sums of Σ exp(-π n²) with an
        // explicit remainder bound exp(-π M²) < 1e-16 at M = 4.
        let mut oracle = 1.0f64;
        for n in 1..=8 {
            oracle += 2.0 * (-PI * (n * n) as f64).exp();
        }
        let got = theta_eval(0.0, 0.0, Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0), 0, 1e-15)
            .unwrap()[0];
        assert_abs_diff_eq!(got.re, oracle, epsilon = 1e-12);
        assert!(got.im.abs() < 1e-14);
        // Frozen reference value for theta[0,0](0, i).
        assert_abs_diff_eq!(got.re, 1.086434811213308, epsilon = 1e-12);
    }

    #[test]
    fn derivative_consistent_with_central_differences() {
        let a = 1.0 / 3.0;
        let t = Complex64::new(0.3, 0.8);
        let v = Complex64::new(0.31, 0.17);
        let eval = |v| theta_eval(a, 0.0, v, t, 2, 1e-14).unwrap();
        let h = 1e-3;
        let exact = eval(v);
        for (c, scale) in [(1usize, 1.0), (2usize, 1.0)] {
            let hp = eval(v + Complex64::new(h, 0.0));
            let hm = eval(v - Complex64::new(h, 0.0));
            let cd = (hp[c - 1] - hm[c - 1]) / (2.0 * h);
            let err = (cd - exact[c]).norm();
            assert!(
                err < 50.0 * h * h * scale,
                "order {c}: central-difference error {err}"
            );
        }
    }

    #[test]
    fn rejects_lower_half_plane() {
        assert!(theta_eval(0.0, 0.0, Complex64::new(0.0, 0.0), Complex64::new(1.0, -0.2), 0, 1e-12)
            .is_err());
    }

    #[test]
    fn unreachable_tolerance_is_an_error() {
        let r = theta_eval(0.0, 0.0, Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0), 0, 0.0);
        assert!(matches!(r, Err(Error::ThetaCutoff { .. })));
    }

    #[test]
    fn lift_exactly_periodic_in_first_direction() {
        let basis = ThetaBasis::new(mp(0.3, 0.8), 4, 1e-14).unwrap();
        for s in 0..16 {
            let z = Complex64::new(0.06 * s as f64, 0.05 * (s % 5) as f64);
            let f0 = basis.jets_at(z, 0).unwrap();
            let f1 = basis.jets_at(z + Complex64::new(1.0, 0.0), 0).unwrap();
            let scale = f0.column(0).norm();
            assert!((f1.column(0) - f0.column(0)).norm() < 1e-12 * scale);
        }
    }

    #[test]
    fn quasiperiodicity_shares_one_scalar_factor() {
        let tau = mp(0.3, 0.8);
        let basis = ThetaBasis::new(tau, 4, 1e-14).unwrap();
        for s in 0..16 {
            let z = Complex64::new(0.06 * s as f64 + 0.01, 0.04 * (s % 7) as f64 + 0.02);
            let f0 = basis.jets_at(z, 0).unwrap();
            let f1 = basis.jets_at(z + tau.tau(), 0).unwrap();
            let mu = basis.quasiperiod_factor(z);
            // componentwise ratios agree with mu
            let mut spread = 0.0f64;
            for j in 0..4 {
                let ratio = f1[(j, 0)] / f0[(j, 0)];
                spread = spread.max((ratio - mu).norm() / mu.norm());
            }
            assert!(spread < 1e-10, "ratio spread {spread}");
            let defect = (0..4)
                .map(|j| (f1[(j, 0)] - mu * f0[(j, 0)]).norm())
                .fold(0.0f64, f64::max);
            assert!(defect < 1e-10 * mu.norm() * f0.column(0).norm().max(1.0));
        }
    }

    #[test]
    fn quasiperiod_factor_at_origin() {
        let tau = mp(0.1, 1.3);
        let basis = ThetaBasis::new(tau, 5, 1e-14).unwrap();
        let i = Complex64::new(0.0, 1.0);
        let expect = (-i * PI * 5.0 * tau.tau()).exp();
        assert!((basis.quasiperiod_factor(Complex64::new(0.0, 0.0)) - expect).norm() < 1e-14);
    }

    #[test]
    fn automorphy_winding_along_k1_is_minus_n() {
        let tau = mp(0.3, 0.8);
        for n_bands in [3usize, 5] {
            let basis = ThetaBasis::new(tau, n_bands, 1e-14).unwrap();
            let samples = 64;
            let mut total = 0.0;
            let mut prev = basis.quasiperiod_factor(Complex64::new(0.0, 0.0));
            for s in 1..=samples {
                let z = Complex64::new(s as f64 / samples as f64, 0.0);
                let cur = basis.quasiperiod_factor(z);
                total += (cur / prev).arg();
                prev = cur;
            }
            let winding = total / (2.0 * PI);
            assert_abs_diff_eq!(winding, -(n_bands as f64), epsilon = 1e-10);
        }
    }

    #[test]
    fn jet_matrix_nondegenerate_at_generic_point() {
        let basis = ThetaBasis::new(mp(0.0, 1.0), 3, 1e-14).unwrap();
        let z = Complex64::new(0.21, 0.37);
        let jets = basis.jets_at(z, 2).unwrap();
        // normalize columns, smallest singular value strictly positive
        let mut m = jets.clone();
        for c in 0..3 {
            let norm = m.column(c).norm();
            for r in 0..3 {
                m[(r, c)] /= Complex64::new(norm, 0.0);
            }
        }
        let svd = m.svd(false, false);
        let smin = svd.singular_values.min();
        assert!(smin > 1e-3, "smallest singular value {smin}");
    }

    #[test]
    fn scalar_gauge_transform_keeps_column_span() {
        let tau = mp(0.0, 1.0);
        let basis = ThetaBasis::new(tau, 3, 1e-14).unwrap();
        let grid = BZGrid::new(4).unwrap();
        let jets = embedding_lift(&basis, grid, 2).unwrap();
        let g = jets.scalar_gauge_exp(Complex64::new(0.3, -0.2), tau);
        // column 0 of the gauged field is e^{αz}·column 0
        let p = grid.idx(1, 2);
        let z = grid.z_at(1, 2, tau);
        let scale = (Complex64::new(0.3, -0.2) * z).exp();
        let diff = (g.frames[p].column(0) - jets.frames[p].column(0).map(|x| x * scale)).norm();
        assert!(diff < 1e-12 * jets.frames[p].column(0).norm());
    }
}
