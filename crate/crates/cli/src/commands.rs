//! The four pipelines behind the subcommands.

use crate::config::RunConfig;
use crate::report::{checks_json, write_atomic, write_manifest, Check, JsonObject};
use harmonic_bands::frames::{
    check_no_hyperosculation, gram_schmidt_frames, level_projector, OrthoFrameField,
    ProjectorField,
};
use harmonic_bands::geometry::{
    associated_two_form, chern_number, harmonicity_residual, integrated_trace, qgt,
    wirtinger_residual, QGTField,
};
use harmonic_bands::grid::{BZGrid, ModularParameter, TwoFormField};
use harmonic_bands::recurrence::{recurrence_residuals, reconstruct_sequence, ricci_form};
use harmonic_bands::rigidity::{
    gl_conjugation_residual, random_unitary, recover_projective, recover_unitary,
    verify_conjugation,
};
use harmonic_bands::spectral::integrate_two_form;
use harmonic_bands::theta::{embedding_lift, embedding_lift_shifted, ThetaBasis};
use harmonic_bands::tightbinding::{
    atomic_insulator, bloch_hamiltonian, fermi_projector_field, kahler_deviation,
    parse_hopping_spec, two_band_model, HoppingSpec,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::path::PathBuf;

pub enum CmdError {
    /// Bad user input (exit 3).
    Input(String),
    /// A pipeline stage failed; the exit code depends on the error class.
    Stage {
        stage: &'static str,
        source: harmonic_bands::Error,
    },
    /// Checks ran but a verification gate failed (exit 2).
    Verification(String),
    Io(std::io::Error),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        use harmonic_bands::Error::*;
        match self {
            CmdError::Input(_) | CmdError::Io(_) => 3,
            CmdError::Verification(_) => 2,
            CmdError::Stage { source, .. } => match source {
                HoppingSpec(_) | InvalidTau { .. } | ShapeMismatch(_) | LevelOutOfRange { .. }
                | GridMismatch { .. } | ThetaDomain { .. } => 3,
                GridTooSmall { .. } | ThetaCutoff { .. } | LinkTooSmall { .. }
                | NonIntegralChern { .. } | RankDeficient { .. } | DegenerateAlignment { .. }
                | EigenFailure | SingularRecovery { .. } | ZeroLift { .. } => 4,
                GapClosure { .. } | RankChange { .. } | NonPositiveForm { .. }
                | ProjectorInvariant { .. } => 2,
            },
        }
    }

    pub fn message(&self) -> String {
        match self {
            CmdError::Input(m) => format!("input error: {m}"),
            CmdError::Stage { stage, source } => format!("error in stage {stage}: {source}"),
            CmdError::Verification(m) => format!("verification failed: {m}"),
            CmdError::Io(e) => format!("i/o error: {e}"),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e)
    }
}

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CmdError>;
}

impl<T> StageExt<T> for harmonic_bands::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CmdError> {
        self.map_err(|source| CmdError::Stage { stage, source })
    }
}

struct Pipeline {
    tau: ModularParameter,
    frames: OrthoFrameField,
}

fn build_pipeline(cfg: &RunConfig) -> Result<Pipeline, CmdError> {
    let tau = ModularParameter::new(cfg.tau()).stage("modular-parameter")?;
    let basis = ThetaBasis::new(tau, cfg.bands, 1e-14).stage("theta-basis")?;
    let grid = BZGrid::new(cfg.grid_n).stage("grid")?;
    let jets = embedding_lift(&basis, grid, cfg.bands - 1).stage("embedding")?;
    let frames = gram_schmidt_frames(&jets).stage("gram-schmidt")?;
    Ok(Pipeline { tau, frames })
}

pub fn cmd_band(cfg: &RunConfig) -> Result<(), CmdError> {
    let pipe = build_pipeline(cfg)?;
    let pk = level_projector(&pipe.frames, cfg.level_k).stage("level-projector")?;
    let q = qgt(&pk).stage("qgt")?;
    let chern = chern_number(&pk).stage("chern")?;
    let (_, wmax, wmin) = wirtinger_residual(&q);
    let w12_min = q.w12.iter().cloned().fold(f64::INFINITY, f64::min);
    let w12_max = q.w12.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let wirtinger = JsonObject::new()
        .usize("level", cfg.level_k)
        .f64("max_residual", wmax)
        .f64("min_residual", wmin)
        .bool("saturated", wmax <= cfg.tol("wirtinger"))
        .f64("w12_min", w12_min)
        .f64("w12_max", w12_max)
        .finish();
    let dir = &cfg.output_dir;
    write_atomic(dir, "qgt.csv", &q.to_csv())?;
    write_atomic(dir, "chern.json", &chern.to_json())?;
    write_atomic(dir, "wirtinger.json", &wirtinger)?;
    write_manifest(
        dir,
        "band",
        &cfg.to_json(),
        &["qgt.csv".into(), "chern.json".into(), "wirtinger.json".into()],
    )?;
    println!(
        "band: level {} chern {} wirtinger max {:.3e}",
        cfg.level_k, chern.chern, wmax
    );
    Ok(())
}

fn max_abs_diff(a: &TwoFormField, b: &[f64]) -> f64 {
    a.w.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn cmd_verify(cfg: &RunConfig, perturb_recurrence: Option<f64>) -> Result<(), CmdError> {
    let pipe = build_pipeline(cfg)?;
    let frames = &pipe.frames;
    let tau = pipe.tau;
    let n_bands = cfg.bands;
    let grid = frames.grid;
    let mut checks: Vec<Check> = Vec::new();

    // degree quantization
    let mut chern_dev = 0i64;
    let mut chern_sum = 0i64;
    let mut level_qgts: Vec<QGTField> = Vec::with_capacity(n_bands);
    for k in 0..n_bands {
        let pk = level_projector(frames, k).stage("level-projector")?;
        let report = chern_number(&pk).stage("chern")?;
        chern_sum += report.chern;
        if k <= n_bands - 2 {
            chern_dev += (report.chern - n_bands as i64).abs();
        }
        level_qgts.push(qgt(&pk).stage("qgt")?);
    }
    checks.push(Check::exact_int("chern_levels_equal_n", chern_dev, 0));
    checks.push(Check::exact_int("chern_sum_rule", chern_sum, 0));

    // wirtinger saturation at the ends, strict slack at level 1
    let (_, w0_max, _) = wirtinger_residual(&level_qgts[0]);
    let (_, wt_max, _) = wirtinger_residual(&level_qgts[n_bands - 1]);
    let top_w12_max = level_qgts[n_bands - 1]
        .w12
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::upper("wirtinger_level0", w0_max, cfg.tol("wirtinger")));
    checks.push(Check::upper(
        "wirtinger_top",
        wt_max.max(top_w12_max),
        cfg.tol("wirtinger"),
    ));
    let (_, w1_max, _) = wirtinger_residual(&level_qgts[1]);
    checks.push(Check::lower("wirtinger_level1_strict", w1_max, 1e-3));

    // associated forms and the decomposition identity
    let mut omegas: Vec<TwoFormField> = Vec::with_capacity(n_bands + 1);
    omegas.push(TwoFormField::zeros(grid));
    for j in 0..=(n_bands as i64 - 2) {
        omegas.push(associated_two_form(frames, j).stage("associated-two-form")?);
    }
    omegas.push(TwoFormField::zeros(grid));
    let mut decomposition = 0.0f64;
    for (k, q) in level_qgts.iter().enumerate() {
        for p in 0..grid.len() {
            let expect = omegas[k + 1].w[p] - omegas[k].w[p];
            decomposition = decomposition.max((q.w12[p] - expect).abs());
        }
    }
    checks.push(Check::upper(
        "two_form_decomposition",
        decomposition,
        cfg.tol("decomposition"),
    ));

    // recurrence residuals (optionally with the injected perturbation)
    let recurrence_max = match perturb_recurrence {
        None => recurrence_residuals(frames, tau)
            .stage("recurrence")?
            .max(),
        Some(eps) => {
            let mut perturbed = omegas.clone();
            for v in perturbed[2].w.iter_mut() {
                *v += eps; // shift ω^(1) by a constant
            }
            let mut worst = 0.0f64;
            for j in 0..=(n_bands - 3) {
                let ric = ricci_form(&perturbed[j + 1], tau).stage("recurrence")?;
                for p in 0..grid.len() {
                    let rhs =
                        perturbed[j + 2].w[p] - 2.0 * perturbed[j + 1].w[p] + perturbed[j].w[p];
                    worst = worst.max((ric.w[p] - rhs).abs());
                }
            }
            worst
        }
    };
    checks.push(Check::upper(
        "recurrence_residual",
        recurrence_max,
        cfg.tol("recurrence"),
    ));
    let ric0 = ricci_form(&omegas[1], tau).stage("recurrence")?;
    checks.push(Check::upper(
        "ricci_integral",
        integrate_two_form(&ric0).abs(),
        1e-10,
    ));

    // reconstruction from (ω^(0), ω^(1))
    let seq =
        reconstruct_sequence(&omegas[1], &omegas[2], 1, n_bands, tau).stage("reconstruction")?;
    let mut interior = 0.0f64;
    for j in 0..=(n_bands - 2) {
        interior = interior.max(max_abs_diff(&seq[j + 1], &omegas[j + 1].w));
    }
    checks.push(Check::upper(
        "reconstruction_interior",
        interior,
        cfg.tol("reconstruction"),
    ));
    checks.push(Check::upper(
        "reconstruction_lower_terminal",
        seq[0].max_abs(),
        cfg.tol("reconstruction"),
    ));
    let terminal_degree = integrate_two_form(&seq[n_bands]) / PI;
    checks.push(Check::upper(
        "terminal_degree_matches_contact_mass",
        (terminal_degree - (n_bands * n_bands) as f64).abs(),
        cfg.tol("terminal_degree"),
    ));

    // integrated trace ladder
    let mut trace_rel = 0.0f64;
    for (k, q) in level_qgts.iter().enumerate() {
        let expect = if k <= n_bands - 2 {
            ((2 * k + 1) * n_bands) as f64
        } else {
            ((n_bands - 1) * n_bands) as f64
        };
        trace_rel = trace_rel.max((integrated_trace(q, tau) - expect).abs() / expect);
    }
    checks.push(Check::upper("trace_ladder_rel", trace_rel, cfg.tol("trace_rel")));

    // harmonicity of every level
    let mut harm = 0.0f64;
    for k in 0..n_bands {
        let pk = level_projector(frames, k).stage("level-projector")?;
        harm = harm.max(harmonicity_residual(&pk, tau).stage("harmonicity")?);
    }
    checks.push(Check::upper("harmonicity", harm, cfg.tol("harmonicity")));

    // hyperosculation sub-flag positivity
    let basis = ThetaBasis::new(tau, n_bands, 1e-14).stage("theta-basis")?;
    let jets = embedding_lift(&basis, grid, n_bands - 1).stage("embedding")?;
    let hyper = check_no_hyperosculation(&jets);
    let min_sv = hyper
        .min_singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::lower("hyperosculation_subflags", min_sv, 1e-12));

    let pass = checks.iter().all(|c| c.pass);
    let report = JsonObject::new()
        .raw("config", cfg.to_json())
        .raw("checks", checks_json(&checks))
        .f64("wronskian_min", hyper.min_abs_wronskian)
        .f64("terminal_degree", terminal_degree)
        .bool("pass", pass)
        .finish();
    write_atomic(&cfg.output_dir, "verify.json", &report)?;
    write_manifest(
        &cfg.output_dir,
        "verify",
        &cfg.to_json(),
        &["verify.json".into()],
    )?;
    for c in &checks {
        println!(
            "verify: {:<38} {}  value {:.3e}  tol {:.1e}",
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            c.value,
            c.tolerance
        );
    }
    if pass {
        Ok(())
    } else {
        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        Err(CmdError::Verification(failed.join(", ")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RigidityMode {
    /// Seeded unitary twist; expect recovery.
    Twist,
    /// Bands over two modular parameters; expect rejection.
    CrossTau,
    /// Torsion translation of the curve; expect projective recovery.
    Translation,
    /// Seeded non-unitary linear twist; expect projective recovery with
    /// non-unit singular spread.
    GlTwist,
}

pub fn cmd_rigidity(
    cfg: &RunConfig,
    mode: RigidityMode,
    tau2: Option<Complex64>,
) -> Result<(), CmdError> {
    let pipe = build_pipeline(cfg)?;
    let frames = &pipe.frames;
    let n_bands = cfg.bands;
    let levels: Vec<ProjectorField> = (0..n_bands)
        .map(|k| level_projector(frames, k).stage("level-projector"))
        .collect::<Result<_, _>>()?;
    let dir = &cfg.output_dir;

    let (report, verdict_ok) = match mode {
        RigidityMode::Twist => {
            let sigma0 = random_unitary(n_bands, cfg.seed);
            let basis = ThetaBasis::new(pipe.tau, n_bands, 1e-14).stage("theta-basis")?;
            let jets =
                embedding_lift(&basis, frames.grid, n_bands - 1).stage("embedding")?;
            let frames_tw =
                gram_schmidt_frames(&jets.apply_matrix(&sigma0)).stage("gram-schmidt")?;
            let levels_tw: Vec<ProjectorField> = (0..n_bands)
                .map(|k| level_projector(&frames_tw, k).stage("level-projector"))
                .collect::<Result<_, _>>()?;
            let mut rec = recover_unitary(&levels[0], &levels_tw[0]).stage("alignment")?;
            rec.set_ground_truth(&sigma0);
            let conj = verify_conjugation(&rec.sigma, &levels, &levels_tw).stage("conjugation")?;
            let fidelity = rec.fidelity.unwrap_or(0.0);
            let ok = fidelity >= 1.0 - cfg.tol("fidelity")
                && rec.alignment_residual <= cfg.tol("alignment")
                && conj.iter().all(|r| *r <= cfg.tol("conjugation"));
            let verdict = if ok { "equivalent" } else { "inconclusive" };
            let report = JsonObject::new()
                .string("mode", "twist")
                .raw("recovery", rec.to_json())
                .f64("fidelity", fidelity)
                .f64_array("conjugation_residuals", &conj)
                .string("verdict", verdict)
                .finish();
            (report, ok)
        }
        RigidityMode::CrossTau => {
            let t2 = tau2.unwrap_or(Complex64::new(0.3, 0.8));
            let cfg2 = RunConfig {
                tau_re: t2.re,
                tau_im: t2.im,
                ..cfg.clone()
            };
            let pipe2 = build_pipeline(&cfg2)?;
            let p2 = level_projector(&pipe2.frames, 0).stage("level-projector")?;
            let rec = recover_unitary(&levels[0], &p2).stage("alignment")?;
            let rejected = rec.alignment_residual >= cfg.tol("rejection");
            let verdict = if rejected { "non-equivalent" } else { "inconclusive" };
            let report = JsonObject::new()
                .string("mode", "cross-tau")
                .f64("tau2_re", t2.re)
                .f64("tau2_im", t2.im)
                .raw("recovery", rec.to_json())
                .string("verdict", verdict)
                .finish();
            (report, rejected)
        }
        RigidityMode::Translation | RigidityMode::GlTwist => {
            let basis = ThetaBasis::new(pipe.tau, n_bands, 1e-14).stage("theta-basis")?;
            let jets =
                embedding_lift(&basis, frames.grid, n_bands - 1).stage("embedding")?;
            let (label, p_prime) = match mode {
                RigidityMode::Translation => {
                    // torsion translation (a + b τ)/N drawn from the seed
                    let a = 1 + (cfg.seed % (n_bands as u64 - 1));
                    let b = (cfg.seed / 7) % n_bands as u64;
                    let shift = (Complex64::new(a as f64, 0.0)
                        + pipe.tau.tau() * b as f64)
                        / n_bands as f64;
                    let jets_s =
                        embedding_lift_shifted(&basis, frames.grid, n_bands - 1, shift)
                            .stage("embedding")?;
                    let f = gram_schmidt_frames(&jets_s).stage("gram-schmidt")?;
                    ("translation", level_projector(&f, 0).stage("level-projector")?)
                }
                _ => {
                    let mut gamma = random_unitary(n_bands, cfg.seed);
                    gamma[(0, 0)] *= Complex64::new(1.8, 0.0);
                    gamma[(n_bands - 1, 0)] += Complex64::new(0.3, -0.1);
                    let f = gram_schmidt_frames(&jets.apply_matrix(&gamma))
                        .stage("gram-schmidt")?;
                    ("gl-twist", level_projector(&f, 0).stage("level-projector")?)
                }
            };
            let xi = recover_projective(&levels[0], &p_prime).stage("alignment")?;
            let residual = gl_conjugation_residual(&xi, &levels[0], &p_prime)
                .stage("conjugation")?;
            let sv = xi.clone().svd(false, false).singular_values;
            let spread = (sv.max() - sv.min()) / sv.max();
            let ok = residual <= cfg.tol("alignment");
            let verdict = if ok { "equivalent-projective" } else { "inconclusive" };
            let report = JsonObject::new()
                .string("mode", label)
                .raw("xi", matrix_json(&xi))
                .f64("conjugation_residual", residual)
                .f64("singular_spread", spread)
                .string("verdict", verdict)
                .finish();
            (report, ok)
        }
    };

    write_atomic(dir, "rigidity.json", &report)?;
    write_manifest(dir, "rigidity", &cfg.to_json(), &["rigidity.json".into()])?;
    println!("rigidity: {}", report);
    if verdict_ok {
        Ok(())
    } else {
        Err(CmdError::Verification("rigidity verdict".into()))
    }
}

fn matrix_json(m: &DMatrix<Complex64>) -> String {
    let mut re = String::from("[");
    let mut im = String::from("[");
    for r in 0..m.nrows() {
        if r > 0 {
            re.push(',');
            im.push(',');
        }
        re.push('[');
        im.push('[');
        for c in 0..m.ncols() {
            if c > 0 {
                re.push(',');
                im.push(',');
            }
            re.push_str(&crate::report::fmt_f64(m[(r, c)].re));
            im.push_str(&crate::report::fmt_f64(m[(r, c)].im));
        }
        re.push(']');
        im.push(']');
    }
    re.push(']');
    im.push(']');
    format!("{{\"re\":{re},\"im\":{im}}}")
}

pub enum TbSource {
    SpecFile(PathBuf),
    TwoBand { mass: f64 },
    Atomic,
}

pub fn cmd_tb(cfg: &RunConfig, source: TbSource, fermi_level: f64) -> Result<(), CmdError> {
    let spec: HoppingSpec = match source {
        TbSource::SpecFile(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| {
                CmdError::Input(format!("cannot read spec {}: {e}", path.display()))
            })?;
            parse_hopping_spec(&text).stage("hopping-spec")?
        }
        TbSource::TwoBand { mass } => two_band_model(mass),
        TbSource::Atomic => atomic_insulator(),
    };
    let grid = BZGrid::new(cfg.grid_n).stage("grid")?;
    let bloch = bloch_hamiltonian(&spec, grid);
    let fermi =
        fermi_projector_field(&bloch, fermi_level, cfg.tol("gap")).stage("fermi-projector")?;
    let chern = chern_number(&fermi.projector).stage("chern")?;
    let q = qgt(&fermi.projector).stage("qgt")?;
    let deviation = kahler_deviation(&q);
    let w12_min = q.w12.iter().cloned().fold(f64::INFINITY, f64::min);
    let w12_max = q.w12.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sqrt_det = q.sqrt_det_g();
    let immersion_floor = sqrt_det.iter().cloned().fold(f64::INFINITY, f64::min);
    let sign_definite = w12_min >= -1e-8 || w12_max <= 1e-8;
    let is_immersion = immersion_floor > 1e-8;
    let kahler = deviation.abs() <= cfg.tol("kahler") && sign_definite && is_immersion;
    let report = JsonObject::new()
        .usize("bands", spec.n_bands)
        .usize("rank", fermi.projector.rank)
        .f64("fermi_level", fermi_level)
        .f64("gap", fermi.gap)
        .int("chern", chern.chern)
        .f64("min_link", chern.plaquette_min_modulus)
        .f64("kahler_deviation", deviation)
        .f64("w12_min", w12_min)
        .f64("w12_max", w12_max)
        .f64("immersion_floor", immersion_floor)
        .bool("sign_definite", sign_definite)
        .bool("kahler", kahler)
        .f64("hermiticity_defect", bloch.hermiticity_defect())
        .finish();
    let dir = &cfg.output_dir;
    write_atomic(dir, "tb.json", &report)?;
    write_atomic(dir, "qgt.csv", &q.to_csv())?;
    write_manifest(dir, "tb", &cfg.to_json(), &["tb.json".into(), "qgt.csv".into()])?;
    println!(
        "tb: gap {:.3e} chern {} kahler_deviation {:.3e} w12 in [{:.3}, {:.3}]",
        fermi.gap, chern.chern, deviation, w12_min, w12_max
    );
    Ok(())
}

impl Check {
    pub fn lower(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            tolerance: threshold,
            pass: value >= threshold,
        }
    }
}
