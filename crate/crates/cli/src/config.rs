//! Pipeline configuration: one JSON file mirrors every stage's settings.
//!
//! Every section has defaults, so `{}` is a valid configuration. Relative
//! paths are resolved against the directory of the configuration file.

use std::path::{Path, PathBuf};

use gwkae_core::bspline::BSplineGrid;
use gwkae_core::imaging::{MrapidParams, NmsParams};
use gwkae_core::kae::Reduction;
use gwkae_core::metrics::MetricConfig;
use gwkae_core::multi_damage::{LocalizeParams, MergeConfig};
use gwkae_core::sim::{DamageSpec, SimParams};
use gwkae_core::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Top-level configuration of every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Sensor layout JSON.
    pub layout: PathBuf,
    /// Model file written by `train` and read downstream; defaults to `model.json` in the output directory.
    pub model: Option<PathBuf>,
    /// Directory of every other artifact.
    pub out_dir: PathBuf,
    /// Signal CSV scored by `detect` and `localize`; defaults to the simulated damaged set.
    pub current: Option<PathBuf>,
    /// Seed of simulation noise, initialization and shuffling.
    pub seed: u64,
    /// Sampling rate of the signal CSVs, Hz.
    pub sample_rate: f64,
    /// Simulator settings.
    pub sim: SimSection,
    /// Model and optimizer settings.
    pub train: TrainSection,
    /// Imaging and peak extraction.
    pub imaging: ImagingSection,
    /// Duplicate merging.
    pub merge: MergeSection,
    /// Evaluation.
    pub metrics: MetricsSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            layout: "layout.json".into(),
            model: None,
            out_dir: "out".into(),
            current: None,
            seed: 0,
            sample_rate: SimParams::default().sample_rate,
            sim: SimSection::default(),
            train: TrainSection::default(),
            imaging: ImagingSection::default(),
            merge: MergeSection::default(),
            metrics: MetricsSection::default(),
        }
    }
}

/// A simulated damage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DamageEntry {
    /// Center x, mm.
    pub x_mm: f64,
    /// Center y, mm.
    pub y_mm: f64,
    /// Diameter, mm.
    pub diameter_mm: f64,
}

/// Simulator settings. The sampling rate lives at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// Toneburst center frequency, Hz.
    pub center_freq: f64,
    /// Cycles per burst.
    pub cycles: u32,
    /// Samples per waveform.
    pub n_samples: usize,
    /// Group velocity, mm/s.
    pub group_velocity: f64,
    /// Attenuation, 1/mm.
    pub attenuation: f64,
    /// Source amplitude.
    pub amplitude: f64,
    /// Noise standard deviation.
    pub noise_sigma: f64,
    /// Scattered-arrival amplitude.
    pub scatter_coeff: f64,
    /// Shadow depth.
    pub shadow_depth: f64,
    /// Shadow width.
    pub shadow_width: f64,
    /// Baseline measurements per path.
    pub repetitions: u32,
    /// Damaged measurements per path.
    pub damaged_repetitions: u32,
    /// Damages of the damaged set.
    pub damages: Vec<DamageEntry>,
}

impl Default for SimSection {
    fn default() -> Self {
        let p = SimParams::default();
        SimSection {
            center_freq: p.center_freq,
            cycles: p.cycles,
            n_samples: p.n_samples,
            group_velocity: p.group_velocity,
            attenuation: p.attenuation,
            amplitude: p.amplitude,
            noise_sigma: p.noise_sigma,
            scatter_coeff: p.scatter_coeff,
            shadow_depth: p.shadow_depth,
            shadow_width: p.shadow_width,
            repetitions: 43,
            damaged_repetitions: 1,
            damages: vec![DamageEntry {
                x_mm: 90.0,
                y_mm: 150.0,
                diameter_mm: 25.0,
            }],
        }
    }
}

/// Spline grid settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Spline degree.
    pub order: usize,
    /// Grid intervals.
    pub intervals: usize,
    /// Domain start.
    pub lo: f64,
    /// Domain end.
    pub hi: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = BSplineGrid::default();
        GridSection {
            order: g.order(),
            intervals: g.intervals(),
            lo: g.lo(),
            hi: g.hi(),
        }
    }
}

/// Model and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Encoder widths after the input layer; the input width is the signal length.
    pub hidden_widths: Vec<usize>,
    /// Spline grid of every edge.
    pub grid: GridSection,
    /// Initial learning rate.
    pub learning_rate: f64,
    /// Minibatch size.
    pub batch_size: usize,
    /// Epochs.
    pub epochs: usize,
    /// Weight decay.
    pub weight_decay: f64,
    /// Per-epoch learning-rate decay.
    pub gamma: f64,
    /// Training fraction of the baseline repetitions; the rest calibrates thresholds.
    pub split_fraction: f64,
    /// `"mean"` or `"sum"`.
    pub reduction: String,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            hidden_widths: vec![512, 256, 8],
            grid: GridSection::default(),
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            weight_decay: t.weight_decay,
            gamma: t.gamma,
            split_fraction: t.split_fraction,
            reduction: "mean".into(),
        }
    }
}

/// Imaging settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagingSection {
    /// Pixel pitch, mm.
    pub resolution: f64,
    /// Tent width on the ellipse-excess axis.
    pub r: f64,
    /// Image with only the `top_k` highest-DI paths of each region.
    pub top_k: Option<usize>,
    /// Peaks per region.
    pub max_peaks: usize,
    /// Minimum peak separation, mm.
    pub min_separation: f64,
    /// Peaks below this fraction of the map maximum are ignored.
    pub rel_threshold: f64,
}

impl Default for ImagingSection {
    fn default() -> Self {
        let m = MrapidParams::default();
        let n = NmsParams::default();
        ImagingSection {
            resolution: 2.0,
            r: m.r,
            top_k: m.top_k,
            max_peaks: n.max_peaks,
            min_separation: n.min_separation,
            rel_threshold: n.rel_threshold,
        }
    }
}

/// Merge settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeSection {
    /// Merge distance, mm.
    pub distance_threshold: f64,
}

impl Default for MergeSection {
    fn default() -> Self {
        MergeSection {
            distance_threshold: MergeConfig::default().distance_threshold,
        }
    }
}

/// Evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// Characteristic length of the relative error, mm.
    pub length_mm: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            length_mm: MetricConfig::default().length,
        }
    }
}

fn parse_reduction(s: &str) -> Result<Reduction> {
    match s {
        "mean" => Ok(Reduction::Mean),
        "sum" => Ok(Reduction::Sum),
        other => Err(CliError::Data(format!("unknown reduction {other:?}, expected \"mean\" or \"sum\""))),
    }
}

impl PipelineConfig {
    /// Loads a configuration file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = crate::formats::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.layout);
        if let Some(m) = self.model.as_mut() {
            fix(m);
        }
        fix(&mut self.out_dir);
        if let Some(c) = self.current.as_mut() {
            fix(c);
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("configuration serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Simulator parameters.
    pub fn sim_params(&self) -> Result<SimParams> {
        let s = &self.sim;
        let p = SimParams {
            center_freq: s.center_freq,
            cycles: s.cycles,
            sample_rate: self.sample_rate,
            n_samples: s.n_samples,
            group_velocity: s.group_velocity,
            attenuation: s.attenuation,
            amplitude: s.amplitude,
            noise_sigma: s.noise_sigma,
            scatter_coeff: s.scatter_coeff,
            shadow_depth: s.shadow_depth,
            shadow_width: s.shadow_width,
            seed: self.seed,
        };
        p.validate()?;
        Ok(p)
    }

    /// Simulated damages.
    pub fn damages(&self) -> Vec<DamageSpec> {
        self.sim
            .damages
            .iter()
            .map(|d| DamageSpec {
                center: (d.x_mm, d.y_mm),
                diameter: d.diameter_mm,
            })
            .collect()
    }

    /// Loss reduction.
    pub fn reduction(&self) -> Result<Reduction> {
        parse_reduction(&self.train.reduction)
    }

    /// Optimizer settings.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            weight_decay: t.weight_decay,
            gamma: t.gamma,
            seed: self.seed,
            split_fraction: t.split_fraction,
            reduction: self.reduction()?,
            ..TrainConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Spline grid.
    pub fn grid(&self) -> Result<BSplineGrid> {
        let g = &self.train.grid;
        Ok(BSplineGrid::new(g.order, g.intervals, g.lo, g.hi)?)
    }

    /// Imaging, peak and reduction settings for localization.
    pub fn localize_params(&self) -> Result<LocalizeParams> {
        let i = &self.imaging;
        if !(i.resolution > 0.0) {
            return Err(CliError::Data(format!("grid resolution {} must be positive", i.resolution)));
        }
        let params = LocalizeParams {
            mrapid: MrapidParams { r: i.r, top_k: i.top_k },
            nms: NmsParams {
                max_peaks: i.max_peaks,
                min_separation: i.min_separation,
                rel_threshold: i.rel_threshold,
            },
            resolution: i.resolution,
            reduction: self.reduction()?,
        };
        params.mrapid.validate()?;
        Ok(params)
    }

    /// Merge settings.
    pub fn merge_config(&self) -> Result<MergeConfig> {
        let t = self.merge.distance_threshold;
        if !(t > 0.0) {
            return Err(CliError::Data(format!("merge threshold {t} must be positive")));
        }
        Ok(MergeConfig { distance_threshold: t })
    }

    /// Evaluation settings.
    pub fn metric_config(&self) -> MetricConfig {
        MetricConfig {
            length: self.metrics.length_mm,
        }
    }

    /// Path of an artifact inside the output directory.
    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Model file.
    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.artifact("model.json"))
    }

    /// Signal set scored by `detect` and `localize`.
    pub fn current_path(&self) -> PathBuf {
        self.current.clone().unwrap_or_else(|| self.artifact(DAMAGED_CSV))
    }
}

/// Simulated pristine signals.
pub const BASELINE_CSV: &str = "baseline.csv";
/// Simulated damaged signals.
pub const DAMAGED_CSV: &str = "damaged.csv";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let cfg: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.train.learning_rate, 0.001);
        assert_eq!(cfg.train.batch_size, 16);
        assert_eq!(cfg.train.epochs, 100);
        assert_eq!(cfg.train.weight_decay, 1e-6);
        assert_eq!(cfg.train.gamma, 0.95);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sede": 1}"#).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg.json");
        std::fs::write(&p, r#"{"layout": "l.json", "out_dir": "/abs/out"}"#).unwrap();
        let cfg = PipelineConfig::load(&p).unwrap();
        assert_eq!(cfg.layout, dir.path().join("l.json"));
        assert_eq!(cfg.out_dir, PathBuf::from("/abs/out"));
    }

    #[test]
    fn bad_reduction_is_data_error() {
        let mut cfg = PipelineConfig::default();
        cfg.train.reduction = "median".into();
        assert_eq!(cfg.train_config().unwrap_err().exit_code(), 2);
    }
}
