//! Run configuration: JSON file merged with command-line overrides.

use num_complex::Complex64;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tau_re: f64,
    pub tau_im: f64,
    pub bands: usize,
    pub grid_n: usize,
    pub level_k: usize,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub output_dir: PathBuf,
}

fn default_tolerances() -> BTreeMap<String, f64> {
    let mut t = BTreeMap::new();
    for (name, value) in [
        ("alignment", 1e-6),
        ("conjugation", 1e-7),
        ("decomposition", 1e-8),
        ("fidelity", 1e-8),
        ("gap", 1e-6),
        ("harmonicity", 1e-6),
        ("kahler", 1e-6),
        ("reconstruction", 1e-4),
        ("recurrence", 1e-6),
        ("rejection", 1e-2),
        ("terminal_degree", 1e-3),
        ("trace_rel", 1e-5),
        ("wirtinger", 1e-8),
    ] {
        t.insert(name.to_string(), value);
    }
    t
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tau_re: 0.0,
            tau_im: 1.0,
            bands: 4,
            grid_n: 128,
            level_k: 0,
            seed: 42,
            tolerances: default_tolerances(),
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Deserialize, Default)]
struct FileConfig {
    tau_re: Option<f64>,
    tau_im: Option<f64>,
    bands: Option<usize>,
    grid: Option<usize>,
    level: Option<usize>,
    seed: Option<u64>,
    out: Option<String>,
    tolerances: Option<BTreeMap<String, f64>>,
}

/// Command-line overrides (flags beat the config file).
#[derive(Debug, Default, Clone, clap::Args)]
pub struct ConfigArgs {
    /// JSON config file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tau_re: Option<f64>,
    #[arg(long, global = true)]
    pub tau_im: Option<f64>,
    /// Number of bands N
    #[arg(long, global = true)]
    pub bands: Option<usize>,
    /// Grid points per side (power of two)
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Band level k
    #[arg(long, global = true)]
    pub level: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Named tolerance override, repeatable: --tol name=value
    #[arg(long = "tol", value_name = "NAME=VALUE", global = true)]
    pub tol: Vec<String>,
}

pub fn load(args: &ConfigArgs) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let file: FileConfig =
            serde_json::from_str(&text).map_err(|e| format!("invalid config JSON: {e}"))?;
        if let Some(v) = file.tau_re {
            cfg.tau_re = v;
        }
        if let Some(v) = file.tau_im {
            cfg.tau_im = v;
        }
        if let Some(v) = file.bands {
            cfg.bands = v;
        }
        if let Some(v) = file.grid {
            cfg.grid_n = v;
        }
        if let Some(v) = file.level {
            cfg.level_k = v;
        }
        if let Some(v) = file.seed {
            cfg.seed = v;
        }
        if let Some(v) = file.out {
            cfg.output_dir = PathBuf::from(v);
        }
        if let Some(t) = file.tolerances {
            cfg.tolerances.extend(t);
        }
    }
    if let Some(v) = args.tau_re {
        cfg.tau_re = v;
    }
    if let Some(v) = args.tau_im {
        cfg.tau_im = v;
    }
    if let Some(v) = args.bands {
        cfg.bands = v;
    }
    if let Some(v) = args.grid {
        cfg.grid_n = v;
    }
    if let Some(v) = args.level {
        cfg.level_k = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.out {
        cfg.output_dir = v.clone();
    }
    for spec in &args.tol {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| format!("--tol expects NAME=VALUE, got '{spec}'"))?;
        let value: f64 = value
            .parse()
            .map_err(|e| format!("--tol {name}: bad value: {e}"))?;
        cfg.tolerances.insert(name.to_string(), value);
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), String> {
    if !(cfg.tau_im > 0.0) {
        return Err(format!("tau must be in the upper half plane (im = {})", cfg.tau_im));
    }
    if cfg.bands < 3 {
        return Err(format!("bands must be >= 3, got {}", cfg.bands));
    }
    if cfg.grid_n < 4 || !cfg.grid_n.is_power_of_two() {
        return Err(format!(
            "grid must be a power of two >= 4, got {}",
            cfg.grid_n
        ));
    }
    if cfg.level_k > cfg.bands - 1 {
        return Err(format!(
            "level {} out of range for {} bands",
            cfg.level_k, cfg.bands
        ));
    }
    for (name, value) in &cfg.tolerances {
        if !(value > &0.0) {
            return Err(format!("tolerance {name} must be positive, got {value}"));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn tau(&self) -> Complex64 {
        Complex64::new(self.tau_re, self.tau_im)
    }

    pub fn tol(&self, name: &str) -> f64 {
        *self
            .tolerances
            .get(name)
            .unwrap_or_else(|| panic!("unknown tolerance {name}"))
    }

    /// Canonical JSON used in reports and hashed into the manifest.
    pub fn to_json(&self) -> String {
        let mut tols = String::new();
        for (i, (name, value)) in self.tolerances.iter().enumerate() {
            if i > 0 {
                tols.push(',');
            }
            let _ = write!(tols, "\"{name}\":{value:.16e}");
        }
        format!(
            "{{\"tau_re\":{:.16e},\"tau_im\":{:.16e},\"bands\":{},\"grid\":{},\"level\":{},\"seed\":{},\"out\":{},\"tolerances\":{{{tols}}}}}",
            self.tau_re,
            self.tau_im,
            self.bands,
            self.grid_n,
            self.level_k,
            self.seed,
            serde_json::to_string(&self.output_dir.display().to_string()).unwrap(),
        )
    }
}
