//! On-disk formats: signal CSV, layout/model/threshold/report JSON, damage
//! map CSV and PGM, training history CSV.
//!
//! Floats are written in their shortest round-trip decimal form, so reading
//! a file back reproduces every value bit for bit.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use gwkae_core::bspline::BSplineGrid;
use gwkae_core::damage_index::{HealthReport, Threshold};
use gwkae_core::imaging::{DamageMap, Peak};
use gwkae_core::kae::{KaeModel, Reduction};
use gwkae_core::kan::KanLayer;
use gwkae_core::metrics::EvaluationPair;
use gwkae_core::multi_damage::{CandidateDamage, FinalDamage};
use gwkae_core::signal::{GwSignal, Rect, Region, SensingPath, Sensor, SensorLayout};
use gwkae_core::sim::DamageSpec;
use gwkae_core::train::LossHistory;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Version tag of the model file layout.
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub(crate) fn fmt_f64(v: f64) -> String {
    let mut buf = ryu::Buffer::new();
    buf.format(v).to_owned()
}

/// Reads and parses a JSON file.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

/// Writes pretty JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

// ---------------------------------------------------------------- layout

#[derive(Debug, Serialize, Deserialize)]
struct SensorJson {
    id: u32,
    x_mm: f64,
    y_mm: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundsJson {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RegionJson {
    id: u32,
    sensor_ids: Vec<u32>,
    bounds: BoundsJson,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayoutJson {
    sensors: Vec<SensorJson>,
    regions: Vec<RegionJson>,
}

/// Loads and validates a sensor layout.
pub fn read_layout(path: &Path) -> Result<SensorLayout> {
    let raw: LayoutJson = read_json(path)?;
    let sensors = raw
        .sensors
        .into_iter()
        .map(|s| Sensor {
            id: s.id,
            x: s.x_mm,
            y: s.y_mm,
        })
        .collect();
    let regions = raw
        .regions
        .into_iter()
        .map(|r| Region {
            id: r.id,
            sensor_ids: r.sensor_ids,
            bounds: Rect::new(r.bounds.x0, r.bounds.y0, r.bounds.x1, r.bounds.y1),
        })
        .collect();
    SensorLayout::new(sensors, regions).map_err(|e| CliError::in_file(path, e))
}

/// Writes a layout in the format [`read_layout`] accepts.
pub fn write_layout(path: &Path, layout: &SensorLayout) -> Result<()> {
    let raw = LayoutJson {
        sensors: layout
            .sensors()
            .iter()
            .map(|s| SensorJson {
                id: s.id,
                x_mm: s.x,
                y_mm: s.y,
            })
            .collect(),
        regions: layout
            .regions()
            .iter()
            .map(|r| RegionJson {
                id: r.id,
                sensor_ids: r.sensor_ids.clone(),
                bounds: BoundsJson {
                    x0: r.bounds.x0,
                    y0: r.bounds.y0,
                    x1: r.bounds.x1,
                    y1: r.bounds.y1,
                },
            })
            .collect(),
    };
    write_json(path, &raw)
}

// ---------------------------------------------------------------- signals

/// Writes one row per waveform: `actuator_id,sensor_id,repetition,s0,...`.
pub fn write_signals(path: &Path, signals: &[GwSignal]) -> Result<()> {
    let m = signals.first().map_or(0, |s| s.samples.len());
    if signals.iter().any(|s| s.samples.len() != m) {
        return Err(CliError::Data(format!("{}: signals of unequal length", path.display())));
    }
    let mut out = String::with_capacity(signals.len() * m * 20 + 64);
    out.push_str("actuator_id,sensor_id,repetition");
    for i in 0..m {
        out.push_str(&format!(",s{i}"));
    }
    out.push('\n');
    for s in signals {
        out.push_str(&format!("{},{},{}", s.path.actuator_id, s.path.sensor_id, s.repetition));
        for v in &s.samples {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Reads a signal CSV, checking every path against the layout.
///
/// The file carries no sampling rate, so it is supplied by the caller.
/// Errors name the 1-based data row they occur in.
pub fn read_signals(path: &Path, layout: &SensorLayout, sample_rate: f64) -> Result<Vec<GwSignal>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let headers = rdr.headers().map_err(|e| CliError::io(path, e))?.clone();
    let fixed = ["actuator_id", "sensor_id", "repetition"];
    if headers.len() < 4 || headers.iter().take(3).ne(fixed) {
        return Err(CliError::Data(format!(
            "{}: header must start with actuator_id,sensor_id,repetition,s0",
            path.display()
        )));
    }
    let m = headers.len() - 3;
    for (i, h) in headers.iter().skip(3).enumerate() {
        if h != format!("s{i}") {
            return Err(CliError::Data(format!(
                "{}: header column {} is {h:?}, expected s{i}",
                path.display(),
                i + 4
            )));
        }
    }
    let known: BTreeSet<u32> = layout.sensors().iter().map(|s| s.id).collect();
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let bad = |msg: String| CliError::Data(format!("{}: row {row}: {msg}", path.display()));
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != m + 3 {
            return Err(bad(format!("expected {} columns, found {}", m + 3, rec.len())));
        }
        let int = |col: usize| -> Result<u32> {
            rec[col]
                .parse::<u32>()
                .map_err(|_| bad(format!("column {} value {:?} is not an integer", fixed[col], &rec[col])))
        };
        let (a, s, rep) = (int(0)?, int(1)?, int(2)?);
        for id in [a, s] {
            if !known.contains(&id) {
                return Err(bad(format!("sensor id {id} is not in the layout")));
            }
        }
        let samples = rec
            .iter()
            .skip(3)
            .enumerate()
            .map(|(i, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("sample s{i} value {cell:?} is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let path_id = SensingPath::new(a, s).map_err(|e| bad(e.to_string()))?;
        out.push(GwSignal::new(path_id, rep, samples, sample_rate).map_err(|e| bad(e.to_string()))?);
    }
    Ok(out)
}

// ---------------------------------------------------------------- model

#[derive(Debug, Serialize, Deserialize)]
struct GridJson {
    order: usize,
    intervals: usize,
    lo: f64,
    hi: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerJson {
    in_dim: usize,
    out_dim: usize,
    coeffs: Vec<f64>,
    w_base: Vec<f64>,
    w_spline: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelJson {
    format_version: u32,
    widths: Vec<usize>,
    grid: GridJson,
    encoder: Vec<LayerJson>,
    decoder: Vec<LayerJson>,
}

fn layer_json(l: &KanLayer) -> LayerJson {
    LayerJson {
        in_dim: l.in_dim(),
        out_dim: l.out_dim(),
        coeffs: l.coeffs().to_vec(),
        w_base: l.w_base().to_vec(),
        w_spline: l.w_spline().to_vec(),
    }
}

/// Serializes a model.
pub fn write_model(path: &Path, model: &KaeModel) -> Result<()> {
    let g = model.grid();
    let raw = ModelJson {
        format_version: MODEL_FORMAT_VERSION,
        widths: model.widths(),
        grid: GridJson {
            order: g.order(),
            intervals: g.intervals(),
            lo: g.lo(),
            hi: g.hi(),
        },
        encoder: model.encoder().iter().map(layer_json).collect(),
        decoder: model.decoder().iter().map(layer_json).collect(),
    };
    let text = serde_json::to_string(&raw).map_err(|e| CliError::io(path, e))?;
    write_file(path, text.as_bytes())
}

/// Loads a model written by [`write_model`].
pub fn read_model(path: &Path) -> Result<KaeModel> {
    let raw: ModelJson = read_json(path)?;
    if raw.format_version != MODEL_FORMAT_VERSION {
        return Err(CliError::Data(format!(
            "{}: model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
            path.display(),
            raw.format_version
        )));
    }
    let grid = BSplineGrid::new(raw.grid.order, raw.grid.intervals, raw.grid.lo, raw.grid.hi)
        .map_err(|e| CliError::in_file(path, e))?;
    let layers = |v: Vec<LayerJson>| -> Result<Vec<KanLayer>> {
        v.into_iter()
            .map(|l| {
                KanLayer::from_parts(l.in_dim, l.out_dim, grid, l.coeffs, l.w_base, l.w_spline)
                    .map_err(|e| CliError::in_file(path, e))
            })
            .collect()
    };
    let model = KaeModel::from_layers(layers(raw.encoder)?, layers(raw.decoder)?)
        .map_err(|e| CliError::in_file(path, e))?;
    if model.widths() != raw.widths {
        return Err(CliError::Data(format!(
            "{}: declared widths {:?} do not match the layers {:?}",
            path.display(),
            raw.widths,
            model.widths()
        )));
    }
    Ok(model)
}

// ---------------------------------------------------------------- thresholds & reports

/// Name used for a reduction in files.
pub fn reduction_name(r: Reduction) -> &'static str {
    match r {
        Reduction::Mean => "mean",
        Reduction::Sum => "sum",
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ThresholdJson {
    region_id: u32,
    #[serde(rename = "ThrV")]
    thr_v: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ThresholdsJson {
    reduction: String,
    thresholds: Vec<ThresholdJson>,
}

/// Writes calibrated thresholds together with the reduction they assume.
pub fn write_thresholds(path: &Path, thresholds: &[Threshold], reduction: Reduction) -> Result<()> {
    let raw = ThresholdsJson {
        reduction: reduction_name(reduction).into(),
        thresholds: thresholds
            .iter()
            .map(|t| ThresholdJson {
                region_id: t.region_id,
                thr_v: t.value,
            })
            .collect(),
    };
    write_json(path, &raw)
}

/// Reads thresholds, rejecting a reduction other than `expected`.
pub fn read_thresholds(path: &Path, expected: Reduction) -> Result<Vec<Threshold>> {
    let raw: ThresholdsJson = read_json(path)?;
    if raw.reduction != reduction_name(expected) {
        return Err(CliError::Data(format!(
            "{}: thresholds were calibrated with {} reduction, configuration uses {}",
            path.display(),
            raw.reduction,
            reduction_name(expected)
        )));
    }
    Ok(raw
        .thresholds
        .into_iter()
        .map(|t| Threshold {
            region_id: t.region_id,
            value: t.thr_v,
        })
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct PathDiJson {
    actuator: u32,
    sensor: u32,
    di: f64,
}

/// Health report as written to disk.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReportJson {
    /// Region id.
    pub region_id: u32,
    /// Health index.
    #[serde(rename = "HI")]
    pub hi: f64,
    /// Threshold.
    #[serde(rename = "ThrV")]
    pub thr_v: f64,
    /// Verdict.
    pub damaged: bool,
    per_path: Vec<PathDiJson>,
}

impl From<&HealthReport> for ReportJson {
    fn from(r: &HealthReport) -> Self {
        ReportJson {
            region_id: r.region_id,
            hi: r.hi,
            thr_v: r.thr,
            damaged: r.damaged,
            per_path: r
                .per_path
                .iter()
                .map(|(p, di)| PathDiJson {
                    actuator: p.actuator_id,
                    sensor: p.sensor_id,
                    di: *di,
                })
                .collect(),
        }
    }
}

/// Writes one health report.
pub fn write_report(path: &Path, report: &HealthReport) -> Result<()> {
    write_json(path, &ReportJson::from(report))
}

// ---------------------------------------------------------------- maps & damages

/// Writes `x_mm,y_mm,P` for every pixel center, row by row from the lowest y.
pub fn write_map_csv(path: &Path, map: &DamageMap) -> Result<()> {
    let (nx, ny) = (map.grid.nx(), map.grid.ny());
    let mut out = String::with_capacity(nx * ny * 24 + 16);
    out.push_str("x_mm,y_mm,P\n");
    for iy in 0..ny {
        for ix in 0..nx {
            let (x, y) = map.grid.pixel_center(ix, iy);
            out.push_str(&format!("{},{},{}\n", fmt_f64(x), fmt_f64(y), fmt_f64(map.at(ix, iy))));
        }
    }
    write_file(path, out.as_bytes())
}

/// Encodes a map as a binary 16-bit PGM scaled from the map minimum to its maximum.
///
/// Image rows run top-down, so the first row holds the largest y.
pub fn map_pgm(map: &DamageMap) -> Vec<u8> {
    let (nx, ny) = (map.grid.nx(), map.grid.ny());
    let lo = map.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = map.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P5\n{nx} {ny}\n65535\n").into_bytes();
    out.reserve(nx * ny * 2);
    for iy in (0..ny).rev() {
        for ix in 0..nx {
            let level = if span > 0.0 {
                ((map.at(ix, iy) - lo) / span * 65535.0).round() as u16
            } else {
                0
            };
            out.extend_from_slice(&level.to_be_bytes());
        }
    }
    out
}

/// Writes [`map_pgm`] output.
pub fn write_map_pgm(path: &Path, map: &DamageMap) -> Result<()> {
    write_file(path, &map_pgm(map))
}

#[derive(Debug, Serialize, Deserialize)]
struct PeakJson {
    x_mm: f64,
    y_mm: f64,
    #[serde(rename = "P")]
    p: f64,
}

/// Writes a peak list.
pub fn write_peaks(path: &Path, peaks: &[Peak]) -> Result<()> {
    let raw: Vec<PeakJson> = peaks
        .iter()
        .map(|p| PeakJson {
            x_mm: p.x,
            y_mm: p.y,
            p: p.value,
        })
        .collect();
    write_json(path, &raw)
}

#[derive(Debug, Serialize, Deserialize)]
struct CandidateJson {
    x_mm: f64,
    y_mm: f64,
    region_id: u32,
    score: f64,
}

/// Writes per-region candidates before merging.
pub fn write_candidates(path: &Path, candidates: &[CandidateDamage]) -> Result<()> {
    let raw: Vec<CandidateJson> = candidates
        .iter()
        .map(|c| CandidateJson {
            x_mm: c.x,
            y_mm: c.y,
            region_id: c.region_id,
            score: c.score,
        })
        .collect();
    write_json(path, &raw)
}

#[derive(Debug, Serialize, Deserialize)]
struct FinalJson {
    x_mm: f64,
    y_mm: f64,
    score: f64,
    contributing_regions: Vec<u32>,
}

/// Writes merged damages.
pub fn write_final_damages(path: &Path, damages: &[FinalDamage]) -> Result<()> {
    let raw: Vec<FinalJson> = damages
        .iter()
        .map(|d| FinalJson {
            x_mm: d.x,
            y_mm: d.y,
            score: d.score,
            contributing_regions: d.contributing_regions.clone(),
        })
        .collect();
    write_json(path, &raw)
}

/// Reads merged damages.
pub fn read_final_damages(path: &Path) -> Result<Vec<FinalDamage>> {
    let raw: Vec<FinalJson> = read_json(path)?;
    Ok(raw
        .into_iter()
        .map(|d| FinalDamage {
            x: d.x_mm,
            y: d.y_mm,
            score: d.score,
            contributing_regions: d.contributing_regions,
        })
        .collect())
}

// ---------------------------------------------------------------- truth & metrics

#[derive(Debug, Serialize, Deserialize)]
struct DamageJson {
    x_mm: f64,
    y_mm: f64,
    diameter_mm: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthJson {
    damages: Vec<DamageJson>,
}

/// Writes the ground-truth manifest.
pub fn write_truth(path: &Path, damages: &[DamageSpec]) -> Result<()> {
    let raw = TruthJson {
        damages: damages
            .iter()
            .map(|d| DamageJson {
                x_mm: d.center.0,
                y_mm: d.center.1,
                diameter_mm: d.diameter,
            })
            .collect(),
    };
    write_json(path, &raw)
}

/// Reads the ground-truth manifest.
pub fn read_truth(path: &Path) -> Result<Vec<DamageSpec>> {
    let raw: TruthJson = read_json(path)?;
    Ok(raw
        .damages
        .into_iter()
        .map(|d| DamageSpec {
            center: (d.x_mm, d.y_mm),
            diameter: d.diameter_mm,
        })
        .collect())
}

/// Evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsJson {
    /// Number of matched pairs.
    pub n: usize,
    /// Root mean squared error, mm.
    pub rmse_mm: f64,
    /// Mean relative error, percent.
    pub mre_percent: f64,
    /// Mean absolute percentage error; `None` when a true coordinate is zero.
    pub mape_percent: Option<f64>,
    /// Characteristic length, mm.
    #[serde(rename = "L_mm")]
    pub l_mm: f64,
    /// True damages with no prediction.
    pub missed: usize,
    /// Predictions with no true damage.
    pub unmatched_predictions: usize,
    /// The matched pairs.
    pub pairs: Vec<PairJson>,
}

/// One matched pair in a metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairJson {
    /// True center.
    pub truth: [f64; 2],
    /// Prediction.
    pub prediction: [f64; 2],
}

impl From<&EvaluationPair> for PairJson {
    fn from(p: &EvaluationPair) -> Self {
        PairJson {
            truth: [p.truth.0, p.truth.1],
            prediction: [p.prediction.0, p.prediction.1],
        }
    }
}

// ---------------------------------------------------------------- history

/// Writes `epoch,train_loss,val_loss`.
pub fn write_history(path: &Path, history: &LossHistory) -> Result<()> {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for (e, (t, v)) in history.train.iter().zip(&history.val).enumerate() {
        out.push_str(&format!("{e},{},{}\n", fmt_f64(*t), fmt_f64(*v)));
    }
    write_file(path, out.as_bytes())
}

/// Reads a history file.
pub fn read_history(path: &Path) -> Result<LossHistory> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut h = LossHistory::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let num = |c: usize| {
            rec.get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| CliError::Data(format!("{}: row {}: bad value", path.display(), i + 1)))
        };
        h.train.push(num(1)?);
        h.val.push(num(2)?);
    }
    Ok(h)
}
