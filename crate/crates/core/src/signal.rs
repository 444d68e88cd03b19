//! Sensors, regions, sensing paths and waveforms.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A transducer position in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensor {
    /// Layout-unique identifier.
    pub id: u32,
    /// x coordinate, mm.
    pub x: f64,
    /// y coordinate, mm.
    pub y: f64,
}

/// Axis-aligned rectangle in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    /// Lower x bound.
    pub x0: f64,
    /// Lower y bound.
    pub y0: f64,
    /// Upper x bound.
    pub x1: f64,
    /// Upper y bound.
    pub y1: f64,
}

impl Rect {
    /// Builds a rectangle, normalizing corner order.
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect {
            x0: x0.min(x1),
            y0: y0.min(y1),
            x1: x0.max(x1),
            y1: y0.max(y1),
        }
    }

    /// Closed containment test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    /// Width along x.
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    /// Height along y.
    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// A monitored sub-area and the transducers assigned to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// Region identifier.
    pub id: u32,
    /// Member sensor ids. Sensors may belong to several regions.
    pub sensor_ids: Vec<u32>,
    /// Imaging bounds, mm.
    pub bounds: Rect,
}

/// Canonical actuator-sensor pair with `actuator_id < sensor_id`.
///
/// Reverse measurements (`B -> A`) collapse onto the same path as `A -> B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SensingPath {
    /// Smaller transducer id.
    pub actuator_id: u32,
    /// Larger transducer id.
    pub sensor_id: u32,
}

impl SensingPath {
    /// Canonicalizes an ordered pair. Fails when both ids are equal.
    pub fn new(a: u32, b: u32) -> Result<Self> {
        if a == b {
            return Err(Error::Data(format!("path from sensor {a} to itself")));
        }
        Ok(SensingPath {
            actuator_id: a.min(b),
            sensor_id: a.max(b),
        })
    }
}

/// Sensor layout with its region partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorLayout {
    sensors: Vec<Sensor>,
    regions: Vec<Region>,
}

impl SensorLayout {
    /// Validates and builds a layout.
    ///
    /// Sensor ids must be unique with finite coordinates. Every region must
    /// reference at least two known sensors, and its bounds must contain them.
    pub fn new(sensors: Vec<Sensor>, regions: Vec<Region>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for s in &sensors {
            if !s.x.is_finite() || !s.y.is_finite() {
                return Err(Error::Config(format!("sensor {} has non-finite coordinates", s.id)));
            }
            if !ids.insert(s.id) {
                return Err(Error::Config(format!("duplicate sensor id {}", s.id)));
            }
        }
        let mut region_ids = BTreeSet::new();
        for r in &regions {
            if !region_ids.insert(r.id) {
                return Err(Error::Config(format!("duplicate region id {}", r.id)));
            }
            let members: BTreeSet<u32> = r.sensor_ids.iter().copied().collect();
            if members.len() != r.sensor_ids.len() {
                return Err(Error::Config(format!("region {} lists a sensor twice", r.id)));
            }
            if members.len() < 2 {
                return Err(Error::Config(format!(
                    "region {} has {} sensors, need at least 2",
                    r.id,
                    members.len()
                )));
            }
            let b = r.bounds;
            if !(b.x0.is_finite() && b.x1.is_finite() && b.y0.is_finite() && b.y1.is_finite()) {
                return Err(Error::Config(format!("region {} has non-finite bounds", r.id)));
            }
            for id in &r.sensor_ids {
                let s = sensors
                    .iter()
                    .find(|s| s.id == *id)
                    .ok_or_else(|| Error::Config(format!("region {} references unknown sensor {id}", r.id)))?;
                if !b.contains(s.x, s.y) {
                    return Err(Error::Config(format!(
                        "sensor {id} at ({}, {}) lies outside the bounds of region {}",
                        s.x, s.y, r.id
                    )));
                }
            }
        }
        Ok(SensorLayout { sensors, regions })
    }

    /// All sensors.
    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    /// All regions.
    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    /// Sensor by id.
    pub fn sensor(&self, id: u32) -> Option<&Sensor> {
        self.sensors.iter().find(|s| s.id == id)
    }

    /// Region by id.
    pub fn region(&self, id: u32) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    /// Sorted, de-duplicated union of the paths of every region.
    pub fn all_paths(&self) -> Vec<SensingPath> {
        let mut set = BTreeSet::new();
        for r in &self.regions {
            if let Ok(paths) = enumerate_paths(self, r) {
                set.extend(paths);
            }
        }
        set.into_iter().collect()
    }
}

/// Every canonical pair of the region's sensors, sorted by `(actuator, sensor)`.
///
/// A region with `n` sensors yields `n (n - 1) / 2` paths.
pub fn enumerate_paths(layout: &SensorLayout, region: &Region) -> Result<Vec<SensingPath>> {
    let ids: BTreeSet<u32> = region.sensor_ids.iter().copied().collect();
    if ids.len() < 2 {
        return Err(Error::Config(format!(
            "region {} has {} sensors, need at least 2",
            region.id,
            ids.len()
        )));
    }
    if let Some(id) = ids.iter().find(|id| layout.sensor(**id).is_none()) {
        return Err(Error::Config(format!("region {} references unknown sensor {id}", region.id)));
    }
    let ids: Vec<u32> = ids.into_iter().collect();
    let mut paths = Vec::with_capacity(ids.len() * (ids.len() - 1) / 2);
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            paths.push(SensingPath {
                actuator_id: a,
                sensor_id: b,
            });
        }
    }
    Ok(paths)
}

/// One recorded waveform on one path.
#[derive(Debug, Clone, PartialEq)]
pub struct GwSignal {
    /// Path the waveform was recorded on.
    pub path: SensingPath,
    /// Repetition index among repeated measurements of the same path.
    pub repetition: u32,
    /// Samples, raw or normalized.
    pub samples: Vec<f64>,
    /// Sampling rate, Hz.
    pub sample_rate: f64,
}

impl GwSignal {
    /// Builds a signal, rejecting empty or non-finite input.
    pub fn new(path: SensingPath, repetition: u32, samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Data(format!(
                "empty waveform on path {}-{}",
                path.actuator_id, path.sensor_id
            )));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::Data(format!("sample rate {sample_rate} is not positive")));
        }
        Ok(GwSignal {
            path,
            repetition,
            samples,
            sample_rate,
        })
    }

    /// Copy with samples min-max scaled to `[0, 1]`.
    pub fn normalized(&self) -> Result<GwSignal> {
        Ok(GwSignal {
            samples: normalize_signal(&self.samples)?,
            ..self.clone()
        })
    }
}

/// Min-max scaling to `[0, 1]`. Constant input maps to all `0.5`.
pub fn normalize_signal(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::Data("cannot normalize an empty waveform".into()));
    }
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite sample at index {i}")));
    }
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi == lo {
        return Ok(alloc::vec![0.5; raw.len()]);
    }
    let span = hi - lo;
    Ok(raw
        .iter()
        .map(|&v| {
            if v == hi {
                1.0
            } else {
                ((v - lo) / span).clamp(0.0, 1.0)
            }
        })
        .collect())
}

/// Splits signals into training and held-out sets by repetition index.
///
/// The first `floor(fraction * R)` distinct repetitions (at least one, at most
/// `R - 1`) go to training. When every signal shares one repetition index
/// the split is made over signal order instead.
pub fn split_by_repetition(signals: &[GwSignal], fraction: f64) -> Result<(Vec<GwSignal>, Vec<GwSignal>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction {fraction} outside (0, 1)")));
    }
    if signals.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 signals to split, got {}",
            signals.len()
        )));
    }
    let reps: BTreeSet<u32> = signals.iter().map(|s| s.repetition).collect();
    let cut = |n: usize| ((crate::math::floor(fraction * n as f64) as usize).max(1)).min(n - 1);
    if reps.len() >= 2 {
        let reps: Vec<u32> = reps.into_iter().collect();
        let n_train = cut(reps.len());
        let train_reps: BTreeSet<u32> = reps[..n_train].iter().copied().collect();
        let (train, val) = signals
            .iter()
            .cloned()
            .partition(|s| train_reps.contains(&s.repetition));
        Ok((train, val))
    } else {
        let n_train = cut(signals.len());
        Ok((signals[..n_train].to_vec(), signals[n_train..].to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid_layout(n: u32) -> SensorLayout {
        let sensors: Vec<Sensor> = (0..n)
            .map(|i| Sensor {
                id: i + 1,
                x: (i % 10) as f64 * 10.0,
                y: (i / 10) as f64 * 10.0,
            })
            .collect();
        let region = Region {
            id: 0,
            sensor_ids: sensors.iter().map(|s| s.id).collect(),
            bounds: Rect::new(0.0, 0.0, 100.0, 100.0),
        };
        SensorLayout::new(sensors, vec![region]).unwrap()
    }

    #[test]
    fn normalize_affine_endpoints() {
        assert_eq!(normalize_signal(&[-1.0, 0.0, 1.0]).unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalize_constant_is_half() {
        assert_eq!(normalize_signal(&[7.0, 7.0, 7.0]).unwrap(), vec![0.5; 3]);
    }

    #[test]
    fn normalize_rejects_nan() {
        assert!(matches!(normalize_signal(&[0.0, f64::NAN]), Err(Error::Data(_))));
        assert!(normalize_signal(&[]).is_err());
    }

    #[test]
    fn paths_counts() {
        for (n, expected) in [(2u32, 1usize), (9, 36), (28, 378)] {
            let layout = grid_layout(n);
            let paths = enumerate_paths(&layout, &layout.regions()[0]).unwrap();
            // double-loop pair counter
            let mut count = 0;
            for a in 0..n {
                for b in 0..n {
                    if a < b {
                        count += 1;
                    }
                }
            }
            assert_eq!(paths.len(), expected);
            assert_eq!(paths.len(), count);
            assert!(paths.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn single_sensor_region_rejected() {
        let sensors = vec![Sensor { id: 1, x: 0.0, y: 0.0 }];
        let region = Region {
            id: 0,
            sensor_ids: vec![1],
            bounds: Rect::new(0.0, 0.0, 1.0, 1.0),
        };
        assert!(matches!(SensorLayout::new(sensors.clone(), vec![region.clone()]), Err(Error::Config(_))));
        let layout = SensorLayout::new(sensors, vec![]).unwrap();
        assert!(matches!(enumerate_paths(&layout, &region), Err(Error::Config(_))));
    }

    #[test]
    fn layout_rejects_sensor_outside_bounds() {
        let sensors = vec![Sensor { id: 1, x: 0.0, y: 0.0 }, Sensor { id: 2, x: 50.0, y: 0.0 }];
        let region = Region {
            id: 0,
            sensor_ids: vec![1, 2],
            bounds: Rect::new(0.0, 0.0, 10.0, 10.0),
        };
        assert!(SensorLayout::new(sensors, vec![region]).is_err());
    }

    #[test]
    fn reverse_path_collapses() {
        assert_eq!(SensingPath::new(5, 2).unwrap(), SensingPath::new(2, 5).unwrap());
        assert!(SensingPath::new(3, 3).is_err());
    }

    #[test]
    fn split_matches_baseline_counts() {
        let path = SensingPath::new(1, 2).unwrap();
        let signals: Vec<GwSignal> = (0..43)
            .map(|r| GwSignal::new(path, r, vec![0.0, 1.0], 1.0).unwrap())
            .collect();
        let (train, val) = split_by_repetition(&signals, 0.8).unwrap();
        assert_eq!((train.len(), val.len()), (34, 9));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn enumeration_is_order_insensitive(n in 2usize..20, seed in any::<u64>()) {
                let layout = grid_layout(n as u32);
                let mut ids: Vec<u32> = layout.sensors().iter().map(|s| s.id).collect();
                // deterministic Fisher-Yates driven by the seed
                let mut state = seed;
                for i in (1..ids.len()).rev() {
                    state = crate::math::mix64(state);
                    ids.swap(i, (state % (i as u64 + 1)) as usize);
                }
                let permuted = Region { id: 0, sensor_ids: ids, bounds: Rect::new(0.0, 0.0, 100.0, 100.0) };
                let a = enumerate_paths(&layout, &layout.regions()[0]).unwrap();
                let b = enumerate_paths(&layout, &permuted).unwrap();
                prop_assert_eq!(a.len(), n * (n - 1) / 2);
                prop_assert_eq!(a, b);
            }

            #[test]
            fn normalized_range_is_exact(raw in proptest::collection::vec(-1e6f64..1e6, 2..200)) {
                let out = normalize_signal(&raw).unwrap();
                let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if hi > lo {
                    let imin = raw.iter().position(|&v| v == lo).unwrap();
                    let imax = raw.iter().position(|&v| v == hi).unwrap();
                    prop_assert_eq!(out[imin], 0.0);
                    prop_assert_eq!(out[imax], 1.0);
                }
                prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
