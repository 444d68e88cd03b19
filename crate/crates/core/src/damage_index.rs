//! Damage indices, health indices, thresholds and detection verdicts.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::kae::{loss, KaeModel, Reduction};
use crate::math::floor;
use crate::signal::{enumerate_paths, GwSignal, SensingPath, SensorLayout};
use crate::{Error, Result};

/// Quantile level of the health index.
pub const HI_QUANTILE: f64 = 0.95;

/// Reconstruction error of one waveform under the autoencoder.
pub fn compute_di(model: &KaeModel, signal: &GwSignal, reduction: Reduction) -> Result<f64> {
    let rec = model.reconstruct(&signal.samples)?;
    loss(&signal.samples, &rec, reduction)
}

/// Linear-interpolation quantile on `p * (n - 1)` of the sorted values.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Data("quantile of an empty list".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Usage(format!("quantile level {p} outside [0, 1]")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Data("quantile of a list containing NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = p * (sorted.len() - 1) as f64;
    let lo = floor(h) as usize;
    if lo + 1 >= sorted.len() {
        return Ok(sorted[sorted.len() - 1]);
    }
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

/// Per-path damage indices of one region for one measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct DamageIndexSet {
    /// Region the paths belong to.
    pub region_id: u32,
    /// `(path, DI)` pairs in canonical path order.
    pub entries: Vec<(SensingPath, f64)>,
}

impl DamageIndexSet {
    /// Validated constructor; every DI must be finite and non-negative.
    pub fn new(region_id: u32, entries: Vec<(SensingPath, f64)>) -> Result<Self> {
        if let Some((p, v)) = entries.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Data(format!(
                "damage index {v} on path {}-{} is not a finite non-negative value",
                p.actuator_id, p.sensor_id
            )));
        }
        Ok(DamageIndexSet { region_id, entries })
    }

    /// Scores every enumerated path of a region.
    ///
    /// `signals` must be normalized. When several repetitions of a path are
    /// present their DIs are averaged. A region path with no signal is an error.
    pub fn score(
        model: &KaeModel,
        layout: &SensorLayout,
        region_id: u32,
        signals: &[GwSignal],
        reduction: Reduction,
    ) -> Result<Self> {
        let region = layout
            .region(region_id)
            .ok_or_else(|| Error::Usage(format!("unknown region {region_id}")))?;
        let paths = enumerate_paths(layout, region)?;
        let relevant: Vec<GwSignal> = signals
            .iter()
            .filter(|s| paths.binary_search(&s.path).is_ok())
            .cloned()
            .collect();
        let dis = path_dis(model, &relevant, reduction)?;
        Self::for_region(layout, region_id, &dis)
    }

    /// Picks the region's paths out of precomputed per-path DIs.
    pub fn for_region(layout: &SensorLayout, region_id: u32, dis: &BTreeMap<SensingPath, f64>) -> Result<Self> {
        let region = layout
            .region(region_id)
            .ok_or_else(|| Error::Usage(format!("unknown region {region_id}")))?;
        let entries = enumerate_paths(layout, region)?
            .into_iter()
            .map(|p| {
                dis.get(&p).map(|v| (p, *v)).ok_or_else(|| {
                    Error::Data(format!(
                        "region {region_id}: no signal for path {}-{}",
                        p.actuator_id, p.sensor_id
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DamageIndexSet::new(region_id, entries)
    }

    /// One set per repetition index found among `signals`.
    pub fn score_per_repetition(
        model: &KaeModel,
        layout: &SensorLayout,
        region_id: u32,
        signals: &[GwSignal],
        reduction: Reduction,
    ) -> Result<Vec<Self>> {
        let mut by_rep: BTreeMap<u32, Vec<GwSignal>> = BTreeMap::new();
        for s in signals {
            by_rep.entry(s.repetition).or_default().push(s.clone());
        }
        by_rep
            .values()
            .map(|group| Self::score(model, layout, region_id, group, reduction))
            .collect()
    }

    /// DI values in entry order.
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, v)| *v).collect()
    }

    /// DI of one path.
    pub fn get(&self, path: &SensingPath) -> Option<f64> {
        self.entries.iter().find(|(p, _)| p == path).map(|(_, v)| *v)
    }
}

/// DI of every path present in `signals`, averaged over repetitions.
pub fn path_dis(model: &KaeModel, signals: &[GwSignal], reduction: Reduction) -> Result<BTreeMap<SensingPath, f64>> {
    let mut sums: BTreeMap<SensingPath, (f64, usize)> = BTreeMap::new();
    for s in signals {
        let di = compute_di(model, s, reduction)?;
        let e = sums.entry(s.path).or_insert((0.0, 0));
        e.0 += di;
        e.1 += 1;
    }
    Ok(sums.into_iter().map(|(p, (s, n))| (p, s / n as f64)).collect())
}

/// 95% quantile of the set's DIs.
pub fn compute_hi(dis: &DamageIndexSet) -> Result<f64> {
    if dis.entries.is_empty() {
        return Err(Error::Data(format!("region {} has no damage indices", dis.region_id)));
    }
    quantile(&dis.values(), HI_QUANTILE)
}

/// Calibrated detection threshold of one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    /// Region id.
    pub region_id: u32,
    /// Threshold value ThrV.
    pub value: f64,
}

/// Per-region thresholds: the health index of all pristine DIs of a region, pooled.
pub fn calibrate_threshold(pristine_sets: &[DamageIndexSet]) -> Result<Vec<Threshold>> {
    if pristine_sets.is_empty() {
        return Err(Error::Calibration("no pristine damage-index sets".into()));
    }
    let mut pooled: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for set in pristine_sets {
        pooled.entry(set.region_id).or_default().extend(set.values());
    }
    pooled
        .into_iter()
        .map(|(region_id, values)| {
            if values.is_empty() {
                return Err(Error::Calibration(format!("region {region_id} has no pristine data")));
            }
            Ok(Threshold {
                region_id,
                value: quantile(&values, HI_QUANTILE)?,
            })
        })
        .collect()
}

/// Detection outcome of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct HealthReport {
    /// Region id.
    pub region_id: u32,
    /// Health index of the current measurement.
    pub hi: f64,
    /// Threshold it was compared with.
    pub thr: f64,
    /// `hi > thr`.
    pub damaged: bool,
    /// The per-path DIs behind `hi`.
    pub per_path: Vec<(SensingPath, f64)>,
}

/// Flags the region as damaged when its HI strictly exceeds the threshold.
pub fn detect(current: &DamageIndexSet, threshold: &Threshold) -> Result<HealthReport> {
    if current.region_id != threshold.region_id {
        return Err(Error::Usage(format!(
            "damage indices of region {} compared with the threshold of region {}",
            current.region_id, threshold.region_id
        )));
    }
    let hi = compute_hi(current)?;
    Ok(HealthReport {
        region_id: current.region_id,
        hi,
        thr: threshold.value,
        damaged: hi > threshold.value,
        per_path: current.entries.clone(),
    })
}
