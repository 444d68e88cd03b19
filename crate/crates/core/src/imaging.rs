//! Modified elliptical probabilistic imaging.
//!
//! Each path contributes a tent-shaped weight over the ellipse excess
//! `e = (|P - A| + |P - S|) / |A - S| - 1` of a pixel `P`, scaled by the
//! path's DI. The tent of the strongest path peaks on the path itself; weaker
//! paths peak on a confocal ellipse further out, at `e = (1 - DI / DI_max) r`.
//! The fused map is the DI-weighted sum over paths.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::damage_index::DamageIndexSet;
use crate::math::{floor, hypot};
use crate::signal::{Rect, SensingPath, Sensor, SensorLayout};
use crate::{Error, Result};

/// Raster geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagingGrid {
    /// Imaged area, mm.
    pub bounds: Rect,
    /// Pixel pitch, mm.
    pub resolution: f64,
}

impl ImagingGrid {
    /// Default pitch, mm.
    pub const DEFAULT_RESOLUTION: f64 = 2.0;

    /// Validated constructor.
    pub fn new(bounds: Rect, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::Config(format!("imaging resolution {resolution} must be positive")));
        }
        if !(bounds.width() > 0.0 && bounds.height() > 0.0) {
            return Err(Error::Config("imaging bounds are degenerate".into()));
        }
        Ok(ImagingGrid { bounds, resolution })
    }

    fn count(span: f64, res: f64) -> usize {
        (floor(span / res + 1e-9) as usize).max(1)
    }

    /// Columns.
    pub fn nx(&self) -> usize {
        Self::count(self.bounds.width(), self.resolution)
    }

    /// Rows.
    pub fn ny(&self) -> usize {
        Self::count(self.bounds.height(), self.resolution)
    }

    /// Center of pixel `(ix, iy)`; row `iy = 0` is at the lowest `y`.
    pub fn pixel_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.bounds.x0 + (ix as f64 + 0.5) * self.resolution,
            self.bounds.y0 + (iy as f64 + 0.5) * self.resolution,
        )
    }
}

/// Imaging parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrapidParams {
    /// Tent width on the ellipse-excess axis (dimensionless).
    pub r: f64,
    /// Image with only the `top_k` highest-DI paths.
    pub top_k: Option<usize>,
}

impl Default for MrapidParams {
    fn default() -> Self {
        MrapidParams { r: 0.05, top_k: None }
    }
}

impl MrapidParams {
    /// Range checks.
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::Config(format!("shape parameter r = {} must be positive", self.r)));
        }
        if self.top_k == Some(0) {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// A local maximum of a fused map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Pixel-center x, mm.
    pub x: f64,
    /// Pixel-center y, mm.
    pub y: f64,
    /// Map value at the pixel.
    pub value: f64,
}

/// Fused damage-probability raster.
#[derive(Debug, Clone, PartialEq)]
pub struct DamageMap {
    /// Raster geometry.
    pub grid: ImagingGrid,
    /// Row-major values, index `iy * nx + ix`.
    pub values: Vec<f64>,
    /// Extracted peaks, strongest first.
    pub peaks: Vec<Peak>,
}

impl DamageMap {
    /// Value at pixel `(ix, iy)`.
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.grid.nx() + ix]
    }

    /// Pixel index of the largest value (first in row-major order on ties).
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let nx = self.grid.nx();
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| (i % nx, i / nx))
    }
}

/// Ellipse ratio `(|P - A| + |P - S|) / |A - S|`, at least one.
pub fn ellipse_distance(pixel: (f64, f64), actuator: &Sensor, sensor: &Sensor) -> Result<f64> {
    let base = hypot(actuator.x - sensor.x, actuator.y - sensor.y);
    if !(base > 0.0) {
        return Err(Error::Geometry(format!(
            "sensors {} and {} coincide",
            actuator.id, sensor.id
        )));
    }
    let da = hypot(pixel.0 - actuator.x, pixel.1 - actuator.y);
    let ds = hypot(pixel.0 - sensor.x, pixel.1 - sensor.y);
    Ok((da + ds) / base)
}

/// Tent weight of one path at ellipse excess `e`.
///
/// With `a = 1 - di / di_max`, the weight rises from `1 - a` at `e = 0` to
/// one at `e = a r`, then falls to zero at `e = (1 + a) r`.
pub fn weight(e: f64, di: f64, di_max: f64, r: f64) -> Result<f64> {
    if !(di_max > 0.0 && di_max.is_finite()) {
        return Err(Error::Degenerate(format!("DI_max = {di_max}: no damaged path information")));
    }
    if !(r > 0.0) {
        return Err(Error::Config(format!("shape parameter r = {r} must be positive")));
    }
    Ok(tent(e.max(0.0), 1.0 - di / di_max, r))
}

#[inline]
fn tent(e: f64, a: f64, r: f64) -> f64 {
    let u = e / r - a;
    if e < a * r {
        1.0 + u
    } else if e < (1.0 + a) * r {
        1.0 - u
    } else {
        0.0
    }
}

/// Fuses the DIs of `paths` into a raster over `grid`.
///
/// `DI_max` is the maximum over the supplied paths only. Pixels accumulate
/// path contributions in the given path order.
pub fn fuse(
    paths: &[SensingPath],
    dis: &DamageIndexSet,
    layout: &SensorLayout,
    grid: &ImagingGrid,
    params: &MrapidParams,
) -> Result<DamageMap> {
    params.validate()?;
    let mut terms = Vec::with_capacity(paths.len());
    for p in paths {
        let di = dis.get(p).ok_or_else(|| {
            Error::Data(format!("no damage index for path {}-{}", p.actuator_id, p.sensor_id))
        })?;
        let a = *layout
            .sensor(p.actuator_id)
            .ok_or_else(|| Error::Data(format!("unknown sensor {}", p.actuator_id)))?;
        let s = *layout
            .sensor(p.sensor_id)
            .ok_or_else(|| Error::Data(format!("unknown sensor {}", p.sensor_id)))?;
        ellipse_distance((a.x, a.y), &a, &s)?;
        terms.push((a, s, di));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut values = vec![0.0; nx * ny];
    let di_max = terms.iter().map(|t| t.2).fold(0.0, f64::max);
    if di_max > 0.0 {
        for iy in 0..ny {
            for ix in 0..nx {
                let px = grid.pixel_center(ix, iy);
                let mut acc = 0.0;
                for (a, s, di) in &terms {
                    let e = ellipse_distance(px, a, s)? - 1.0;
                    acc += weight(e, *di, di_max, params.r)? * di;
                }
                values[iy * nx + ix] = acc;
            }
        }
    }
    Ok(DamageMap {
        grid: *grid,
        values,
        peaks: Vec::new(),
    })
}

/// The `k` paths with the largest DI, ties broken by canonical path order,
/// returned in canonical order.
pub fn select_paths(dis: &DamageIndexSet, k: usize) -> Result<Vec<SensingPath>> {
    if dis.entries.is_empty() {
        return Err(Error::Data(format!("region {} has no damage indices", dis.region_id)));
    }
    if k == 0 {
        return Err(Error::Usage("cannot select zero paths".into()));
    }
    let mut ranked: Vec<(SensingPath, f64)> = dis.entries.clone();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    let mut out: Vec<SensingPath> = ranked.into_iter().map(|(p, _)| p).collect();
    out.sort();
    Ok(out)
}

/// Peak-extraction settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsParams {
    /// Maximum number of peaks returned.
    pub max_peaks: usize,
    /// Minimum distance between returned peaks, mm.
    pub min_separation: f64,
    /// Peaks below this fraction of the global maximum are ignored.
    pub rel_threshold: f64,
}

impl Default for NmsParams {
    fn default() -> Self {
        NmsParams {
            max_peaks: 3,
            min_separation: 30.0,
            rel_threshold: 0.7,
        }
    }
}

/// Greedy non-maximum suppression over the 8-neighbour local maxima of a map.
///
/// Candidates at or above `rel_threshold * max` are visited in descending
/// value (row-major order on ties); a candidate closer than `min_separation`
/// to an accepted peak is dropped.
pub fn extract_peaks(map: &DamageMap, nms: &NmsParams) -> Result<Vec<Peak>> {
    if nms.max_peaks == 0 {
        return Err(Error::Usage("max_peaks must be at least 1".into()));
    }
    let (nx, ny) = (map.grid.nx(), map.grid.ny());
    if map.values.len() != nx * ny {
        return Err(Error::shape("damage map raster", nx * ny, map.values.len()));
    }
    let global = map.values.iter().copied().fold(0.0, f64::max);
    if !(global > 0.0) {
        return Ok(Vec::new());
    }
    let floor_value = nms.rel_threshold * global;
    let mut cands: Vec<(usize, f64)> = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let v = map.at(ix, iy);
            if v <= 0.0 || v < floor_value {
                continue;
            }
            let mut is_max = true;
            'nb: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                    if jx < 0 || jy < 0 || jx >= nx as i64 || jy >= ny as i64 {
                        continue;
                    }
                    if map.at(jx as usize, jy as usize) > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                cands.push((iy * nx + ix, v));
            }
        }
    }
    cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut peaks: Vec<Peak> = Vec::new();
    for (idx, v) in cands {
        let (x, y) = map.grid.pixel_center(idx % nx, idx / nx);
        if peaks.iter().all(|p| hypot(p.x - x, p.y - y) >= nms.min_separation) {
            peaks.push(Peak { x, y, value: v });
            if peaks.len() == nms.max_peaks {
                break;
            }
        }
    }
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Region;

    fn s(id: u32, x: f64, y: f64) -> Sensor {
        Sensor { id, x, y }
    }

    #[test]
    fn ellipse_examples() {
        let a = s(1, 0.0, 0.0);
        let b = s(2, 100.0, 0.0);
        assert_eq!(ellipse_distance((50.0, 0.0), &a, &b).unwrap(), 1.0);
        assert!((ellipse_distance((50.0, 37.5), &a, &b).unwrap() - 1.25).abs() < 1e-15);
        assert_eq!(ellipse_distance((0.0, 0.0), &a, &b).unwrap(), 1.0);
        assert!(matches!(ellipse_distance((1.0, 1.0), &a, &s(3, 0.0, 0.0)), Err(Error::Geometry(_))));
    }

    #[test]
    fn weight_examples() {
        let r = 0.05;
        assert_eq!(weight(0.0, 2.0, 2.0, r).unwrap(), 1.0);
        assert_eq!(weight(0.0, 1.0, 2.0, r).unwrap(), 0.5);
        for ratio in [0.0, 0.3, 1.0] {
            assert_eq!(weight((2.0 - ratio) * r, ratio, 1.0, r).unwrap(), 0.0);
        }
        assert!(matches!(weight(0.0, 0.0, 0.0, r), Err(Error::Degenerate(_))));
    }

    fn one_region_layout(sensors: Vec<Sensor>, bounds: Rect) -> SensorLayout {
        let ids = sensors.iter().map(|s| s.id).collect();
        SensorLayout::new(
            sensors,
            vec![Region {
                id: 0,
                sensor_ids: ids,
                bounds,
            }],
        )
        .unwrap()
    }

    #[test]
    fn single_path_peaks_on_segment() {
        let layout = one_region_layout(vec![s(1, 10.0, 50.0), s(2, 90.0, 50.0)], Rect::new(0.0, 0.0, 100.0, 100.0));
        let p = SensingPath::new(1, 2).unwrap();
        let dis = DamageIndexSet::new(0, vec![(p, 1.0)]).unwrap();
        let grid = ImagingGrid::new(Rect::new(0.0, 0.0, 100.0, 100.0), 2.0).unwrap();
        let map = fuse(&[p], &dis, &layout, &grid, &MrapidParams::default()).unwrap();
        let max = map.values.iter().cloned().fold(0.0, f64::max);
        // pixel centers sit 1 mm off the line y = 50, so the peak is just below 1
        assert!(max > 0.99 && max <= 1.0);
        let (_, iy) = map.argmax().unwrap();
        let (_, y) = grid.pixel_center(0, iy);
        assert!((y - 50.0).abs() <= 1.0);
    }

    #[test]
    fn zero_dis_give_zero_map() {
        let layout = one_region_layout(vec![s(1, 0.0, 0.0), s(2, 50.0, 50.0)], Rect::new(0.0, 0.0, 50.0, 50.0));
        let p = SensingPath::new(1, 2).unwrap();
        let dis = DamageIndexSet::new(0, vec![(p, 0.0)]).unwrap();
        let grid = ImagingGrid::new(Rect::new(0.0, 0.0, 50.0, 50.0), 5.0).unwrap();
        let map = fuse(&[p], &dis, &layout, &grid, &MrapidParams::default()).unwrap();
        assert!(map.values.iter().all(|v| *v == 0.0));
        assert!(extract_peaks(&map, &NmsParams::default()).unwrap().is_empty());
    }

    #[test]
    fn missing_di_is_data_error() {
        let layout = one_region_layout(vec![s(1, 0.0, 0.0), s(2, 50.0, 50.0)], Rect::new(0.0, 0.0, 50.0, 50.0));
        let p = SensingPath::new(1, 2).unwrap();
        let dis = DamageIndexSet::new(0, vec![]).unwrap();
        let grid = ImagingGrid::new(Rect::new(0.0, 0.0, 50.0, 50.0), 5.0).unwrap();
        assert!(matches!(
            fuse(&[p], &dis, &layout, &grid, &MrapidParams::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn crossing_paths_peak_at_intersection() {
        let layout = one_region_layout(
            vec![s(1, 0.0, 51.0), s(2, 102.0, 51.0), s(3, 51.0, 0.0), s(4, 51.0, 102.0)],
            Rect::new(0.0, 0.0, 102.0, 102.0),
        );
        let paths = [SensingPath::new(1, 2).unwrap(), SensingPath::new(3, 4).unwrap()];
        let dis = DamageIndexSet::new(0, vec![(paths[0], 0.7), (paths[1], 0.7)]).unwrap();
        let grid = ImagingGrid::new(Rect::new(0.0, 0.0, 102.0, 102.0), 2.0).unwrap();
        let params = MrapidParams::default();
        let map = fuse(&paths, &dis, &layout, &grid, &params).unwrap();
        // brute force: evaluate every pixel from scratch and track the maximum
        let sensors = layout.sensors();
        let mut best = (0usize, 0usize, f64::MIN);
        for iy in 0..grid.ny() {
            for ix in 0..grid.nx() {
                let (x, y) = grid.pixel_center(ix, iy);
                let mut v = 0.0;
                for (a, b) in [(0, 1), (2, 3)] {
                    let (pa, pb) = (sensors[a], sensors[b]);
                    let d = (((x - pa.x).powi(2) + (y - pa.y).powi(2)).sqrt()
                        + ((x - pb.x).powi(2) + (y - pb.y).powi(2)).sqrt())
                        / ((pa.x - pb.x).powi(2) + (pa.y - pb.y).powi(2)).sqrt();
                    let e = d - 1.0;
                    let w = if e < 0.05 { 1.0 - e / 0.05 } else { 0.0 };
                    v += w * 0.7;
                }
                assert!((map.at(ix, iy) - v).abs() < 1e-12);
                if v > best.2 {
                    best = (ix, iy, v);
                }
            }
        }
        assert_eq!(map.argmax().unwrap(), (best.0, best.1));
        let (x, y) = grid.pixel_center(best.0, best.1);
        assert_eq!((x, y), (51.0, 51.0));
    }

    #[test]
    fn select_top_k() {
        let p: Vec<SensingPath> = (1..=4).map(|i| SensingPath::new(0, i).unwrap()).collect();
        let dis = DamageIndexSet::new(0, vec![(p[0], 0.9), (p[1], 0.5), (p[2], 0.4), (p[3], 0.1)]).unwrap();
        assert_eq!(select_paths(&dis, 3).unwrap(), vec![p[0], p[1], p[2]]);
        assert_eq!(select_paths(&dis, 4).unwrap(), p);
        assert_eq!(select_paths(&dis, 40).unwrap(), p);
        assert!(select_paths(&DamageIndexSet::new(0, vec![]).unwrap(), 3).is_err());
    }

    #[test]
    fn select_ties_prefer_canonical_order() {
        let p: Vec<SensingPath> = (1..=3).map(|i| SensingPath::new(0, i).unwrap()).collect();
        let dis = DamageIndexSet::new(0, vec![(p[0], 0.2), (p[1], 0.5), (p[2], 0.5)]).unwrap();
        assert_eq!(select_paths(&dis, 1).unwrap(), vec![p[1]]);
    }

    fn raster(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> DamageMap {
        let grid = ImagingGrid::new(Rect::new(0.0, 0.0, nx as f64 * 2.0, ny as f64 * 2.0), 2.0).unwrap();
        let mut values = vec![0.0; nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                let (x, y) = grid.pixel_center(ix, iy);
                values[iy * nx + ix] = f(x, y);
            }
        }
        DamageMap {
            grid,
            values,
            peaks: vec![],
        }
    }

    #[test]
    fn single_mode_peak() {
        let map = raster(50, 50, |x, y| 1.0 / (1.0 + (x - 41.0).powi(2) + (y - 61.0).powi(2)));
        let peaks = extract_peaks(&map, &NmsParams::default()).unwrap();
        assert_eq!(peaks.len(), 1);
        assert_eq!((peaks[0].x, peaks[0].y), (41.0, 61.0));
    }

    #[test]
    fn two_equal_peaks_far_apart() {
        let bump = |x: f64, y: f64, cx: f64| (-((x - cx).powi(2) + (y - 51.0).powi(2)) / 50.0).exp();
        let map = raster(100, 50, |x, y| bump(x, y, 51.0) + bump(x, y, 151.0));
        let peaks = extract_peaks(&map, &NmsParams::default()).unwrap();
        assert_eq!(peaks.len(), 2);
        let mut xs: Vec<f64> = peaks.iter().map(|p| p.x).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, vec![51.0, 151.0]);
    }
}
