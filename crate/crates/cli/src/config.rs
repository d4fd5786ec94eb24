//! TOML experiment configuration. Every field is optional; anything absent
//! falls back to the bundled defaults, so a config file only states what it
//! changes.

use std::path::Path;

use anyhow::{bail, Context, Result};
use orbitstream::channel::{CapacityTrace, NamedTrace, TraceKind};
use orbitstream::engine::{Algorithm, Experiment};
use orbitstream::metrics::SmoothnessMode;
use orbitstream::suite::{default_experiment, DEFAULT_BASE_SEED};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub runs_per_algorithm: Option<usize>,
    pub base_seed: Option<u64>,
    /// Algorithm names in their kebab-case form; absent = all twelve.
    pub algorithms: Option<Vec<String>>,
    pub mpc_horizon: Option<usize>,
    /// Directory of `t_sec,mbps` CSV traces replacing the bundled suite.
    /// File stems become trace names; stems starting with `mobile` or
    /// `broadband` set the kind, anything else is synthetic.
    pub trace_dir: Option<String>,
    #[serde(default)]
    pub video: VideoOverrides,
    #[serde(default)]
    pub controller: ControllerOverrides,
    #[serde(default)]
    pub field: FieldOverrides,
    #[serde(default)]
    pub qoe: QoeOverrides,
    #[serde(default)]
    pub estimator: EstimatorOverrides,
    #[serde(default)]
    pub scaling: ScalingOverrides,
    #[serde(default)]
    pub ablation: AblationOverrides,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoOverrides {
    pub segment_s: Option<f64>,
    pub duration_s: Option<f64>,
    pub fov_deg: Option<f64>,
    pub fps: Option<u32>,
    pub b_max_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerOverrides {
    pub kp: Option<f64>,
    pub kd: Option<f64>,
    pub b_ref: Option<f64>,
    pub rho: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldOverrides {
    pub g_const: Option<f64>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub sigma: Option<f64>,
    pub dt: Option<f64>,
    pub steps_per_chunk: Option<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QoeOverrides {
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub nu: Option<f64>,
    pub r_min: Option<f64>,
    pub smoothness: Option<SmoothnessMode>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorOverrides {
    pub window_s: Option<f64>,
    pub slot_s: Option<f64>,
    pub noise_frac: Option<f64>,
    pub noise_cap: Option<f64>,
    pub floor: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingOverrides {
    pub global_scale: Option<f64>,
    pub per_run_mean: Option<f64>,
    pub per_run_std: Option<f64>,
    pub clip_min: Option<f64>,
    pub clip_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationOverrides {
    /// Predictor sees all semantic masses as 1.0.
    pub flat_mass: Option<bool>,
    /// Per-object detection dropout probability on the predictor's scene.
    pub dropout_p: Option<f64>,
}

macro_rules! apply {
    ($target:expr, $src:expr, $($field:ident),+) => {
        $(if let Some(v) = $src.$field {
            $target.$field = v;
        })+
    };
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Folds command-line overrides into the config so provenance hashing
    /// covers the resolved values.
    pub fn with_overrides(
        mut self,
        algos: Option<&[String]>,
        runs: Option<usize>,
        seed: Option<u64>,
    ) -> Self {
        if let Some(a) = algos {
            self.algorithms = Some(a.to_vec());
        }
        if let Some(r) = runs {
            self.runs_per_algorithm = Some(r);
        }
        if let Some(s) = seed {
            self.base_seed = Some(s);
        }
        self
    }

    pub fn seed(&self) -> u64 {
        self.base_seed.unwrap_or(DEFAULT_BASE_SEED)
    }

    pub fn parse_algorithms(&self) -> Result<Vec<Algorithm>> {
        match &self.algorithms {
            None => Ok(Algorithm::ALL.to_vec()),
            Some(names) => {
                if names.is_empty() {
                    bail!("algorithm list is empty");
                }
                names
                    .iter()
                    .map(|n| {
                        n.parse::<Algorithm>().map_err(|_| {
                            anyhow::anyhow!(
                                "unknown algorithm {n:?}; valid: {}",
                                Algorithm::ALL
                                    .iter()
                                    .map(|a| a.name())
                                    .collect::<Vec<_>>()
                                    .join(", ")
                            )
                        })
                    })
                    .collect()
            }
        }
    }

    /// Assembles and validates the full experiment.
    pub fn build(&self) -> Result<Experiment<f64>> {
        let seed = self.seed();
        let mut exp = default_experiment(seed).context("building bundled traces")?;
        exp.algorithms = self.parse_algorithms()?;
        if let Some(r) = self.runs_per_algorithm {
            exp.runs_per_algorithm = r;
        }
        if let Some(h) = self.mpc_horizon {
            exp.mpc_horizon = h;
        }
        if let Some(dir) = &self.trace_dir {
            exp.traces = load_trace_dir(Path::new(dir))?;
        }
        apply!(exp.video, self.video, segment_s, duration_s, fov_deg, fps, b_max_s);
        apply!(exp.controller, self.controller, kp, kd, b_ref, rho, alpha);
        apply!(
            exp.field,
            self.field,
            g_const,
            delta,
            beta,
            gamma,
            eta,
            sigma,
            dt,
            steps_per_chunk
        );
        apply!(exp.qoe, self.qoe, mu, lambda, nu, r_min, smoothness);
        apply!(exp.estimator, self.estimator, window_s, slot_s, noise_frac, noise_cap, floor);
        apply!(
            exp.scaling,
            self.scaling,
            global_scale,
            per_run_mean,
            per_run_std,
            clip_min,
            clip_max
        );
        if let Some(f) = self.ablation.flat_mass {
            exp.predictor_flat_mass = f;
        }
        if let Some(p) = self.ablation.dropout_p {
            exp.dropout_p = p;
        }
        exp.validate().map_err(|e| anyhow::anyhow!("invalid experiment: {e}"))?;
        Ok(exp)
    }

    /// SHA-256 over the canonical JSON form of the resolved config.
    pub fn sha256_hex(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn load_trace_dir(dir: &Path) -> Result<Vec<NamedTrace<f64>>> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading trace dir {}", dir.display()))?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    entries.sort();
    if entries.is_empty() {
        bail!("no .csv traces in {}", dir.display());
    }
    entries
        .into_iter()
        .map(|path| {
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("trace")
                .to_string();
            let kind = if name.starts_with("mobile") {
                TraceKind::Mobile
            } else if name.starts_with("broadband") {
                TraceKind::Broadband
            } else {
                TraceKind::Synthetic
            };
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let trace = CapacityTrace::parse_csv(&text)
                .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            Ok(NamedTrace { name, kind, trace })
        })
        .collect()
}
