//! Region-wise localization and merging of duplicate detections.
//!
//! Each region is checked against its own threshold. Damaged regions are
//! imaged and their peaks become candidates. Regions overlap, so one damage
//! can be reported by several regions; nearby candidates are averaged
//! pairwise, strongest first, until no two survivors are closer than the
//! merge threshold.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::damage_index::{detect, path_dis, DamageIndexSet, HealthReport, Threshold};
use crate::imaging::{extract_peaks, fuse, select_paths, DamageMap, ImagingGrid, MrapidParams, NmsParams};
use crate::kae::{KaeModel, Reduction};
use crate::math::hypot;
use crate::signal::{enumerate_paths, GwSignal, SensorLayout};
use crate::{Error, Result};

/// One peak of one region's damage map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateDamage {
    /// x, mm.
    pub x: f64,
    /// y, mm.
    pub y: f64,
    /// Region whose map produced the peak.
    pub region_id: u32,
    /// Peak value.
    pub score: f64,
}

/// Merge settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeConfig {
    /// Candidates closer than this (mm) are treated as one damage.
    pub distance_threshold: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            distance_threshold: 30.0,
        }
    }
}

/// A damage after merging.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalDamage {
    /// x, mm.
    pub x: f64,
    /// y, mm.
    pub y: f64,
    /// Largest score among the merged candidates.
    pub score: f64,
    /// Sorted ids of the regions that reported it.
    pub contributing_regions: Vec<u32>,
}

/// Imaging settings used by [`localize_all`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalizeParams {
    /// Weighting and path selection.
    pub mrapid: MrapidParams,
    /// Peak extraction.
    pub nms: NmsParams,
    /// Raster pitch, mm. Zero selects the default of 2 mm.
    pub resolution: f64,
    /// DI reduction; must match the one thresholds were calibrated with.
    pub reduction: Reduction,
}

/// Everything produced by one localization run.
#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    /// One report per region, in layout order.
    pub reports: Vec<HealthReport>,
    /// Damage maps of the regions flagged as damaged.
    pub maps: Vec<(u32, DamageMap)>,
    /// Peaks of those maps.
    pub candidates: Vec<CandidateDamage>,
}

/// Detects every region and images the damaged ones.
///
/// `signals` must be normalized current measurements covering every region
/// path; repeated measurements of a path are averaged.
pub fn localize_all(
    layout: &SensorLayout,
    signals: &[GwSignal],
    model: &KaeModel,
    thresholds: &[Threshold],
    params: &LocalizeParams,
) -> Result<Localization> {
    params.mrapid.validate()?;
    let thr: BTreeMap<u32, Threshold> = thresholds.iter().map(|t| (t.region_id, *t)).collect();
    for r in layout.regions() {
        if !thr.contains_key(&r.id) {
            return Err(Error::Calibration(format!("region {} has no calibrated threshold", r.id)));
        }
    }
    let mut needed = Vec::new();
    for r in layout.regions() {
        needed.extend(enumerate_paths(layout, r)?);
    }
    needed.sort();
    needed.dedup();
    let relevant: Vec<GwSignal> = signals
        .iter()
        .filter(|s| needed.binary_search(&s.path).is_ok())
        .cloned()
        .collect();
    let dis = path_dis(model, &relevant, params.reduction)?;
    let resolution = if params.resolution > 0.0 {
        params.resolution
    } else {
        ImagingGrid::DEFAULT_RESOLUTION
    };

    let mut out = Localization {
        reports: Vec::new(),
        maps: Vec::new(),
        candidates: Vec::new(),
    };
    for region in layout.regions() {
        let set = DamageIndexSet::for_region(layout, region.id, &dis)?;
        let report = detect(&set, &thr[&region.id])?;
        if report.damaged {
            let paths = match params.mrapid.top_k {
                Some(k) => select_paths(&set, k)?,
                None => set.entries.iter().map(|(p, _)| *p).collect(),
            };
            let grid = ImagingGrid::new(region.bounds, resolution)?;
            let mut map = fuse(&paths, &set, layout, &grid, &params.mrapid)?;
            map.peaks = extract_peaks(&map, &params.nms)?;
            out.candidates.extend(map.peaks.iter().map(|p| CandidateDamage {
                x: p.x,
                y: p.y,
                region_id: region.id,
                score: p.value,
            }));
            out.maps.push((region.id, map));
        }
        out.reports.push(report);
    }
    Ok(out)
}

fn merge_pass(mut items: Vec<FinalDamage>, threshold: f64) -> (Vec<FinalDamage>, bool) {
    items.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut processed = alloc::vec![false; items.len()];
    let mut out = Vec::with_capacity(items.len());
    let mut merged_any = false;
    for i in 0..items.len() {
        if processed[i] {
            continue;
        }
        processed[i] = true;
        let cur = &items[i];
        let partner = (i + 1..items.len())
            .find(|&j| !processed[j] && hypot(items[j].x - cur.x, items[j].y - cur.y) < threshold);
        match partner {
            Some(j) => {
                processed[j] = true;
                merged_any = true;
                let other = &items[j];
                let mut regions = cur.contributing_regions.clone();
                regions.extend(&other.contributing_regions);
                regions.sort_unstable();
                regions.dedup();
                out.push(FinalDamage {
                    x: 0.5 * (cur.x + other.x),
                    y: 0.5 * (cur.y + other.y),
                    score: cur.score.max(other.score),
                    contributing_regions: regions,
                });
            }
            None => out.push(cur.clone()),
        }
    }
    (out, merged_any)
}

/// Merges candidates closer than the threshold.
///
/// Candidates are visited in descending score. Each unprocessed candidate is
/// paired with the strongest unprocessed candidate within the threshold and
/// replaced by their midpoint; unpaired candidates are kept as they are.
/// Passes repeat until one completes without merging, so the result has no
/// two damages closer than the threshold.
pub fn merge_duplicates(candidates: &[CandidateDamage], cfg: &MergeConfig) -> Vec<FinalDamage> {
    let mut items: Vec<FinalDamage> = candidates
        .iter()
        .map(|c| FinalDamage {
            x: c.x,
            y: c.y,
            score: c.score,
            contributing_regions: alloc::vec![c.region_id],
        })
        .collect();
    loop {
        let (next, merged) = merge_pass(items, cfg.distance_threshold);
        items = next;
        if !merged {
            return items;
        }
    }
}

/// Re-merges already merged damages (used to check idempotence).
pub fn merge_final(damages: &[FinalDamage], cfg: &MergeConfig) -> Vec<FinalDamage> {
    let mut items = damages.to_vec();
    loop {
        let (next, merged) = merge_pass(items, cfg.distance_threshold);
        items = next;
        if !merged {
            return items;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(x: f64, y: f64, region_id: u32, score: f64) -> CandidateDamage {
        CandidateDamage { x, y, region_id, score }
    }

    #[test]
    fn close_pair_merges_to_midpoint() {
        let out = merge_duplicates(&[c(100.0, 100.0, 0, 2.0), c(103.0, 104.0, 1, 1.0)], &MergeConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].x, out[0].y), (101.5, 102.0));
        assert_eq!(out[0].contributing_regions, vec![0, 1]);
        assert_eq!(out[0].score, 2.0);
    }

    #[test]
    fn far_pair_preserved() {
        let out = merge_duplicates(&[c(0.0, 0.0, 0, 1.0), c(50.0, 0.0, 1, 2.0)], &MergeConfig::default());
        assert_eq!(out.len(), 2);
        assert_eq!((out[0].x, out[1].x), (50.0, 0.0));
    }

    #[test]
    fn empty_in_empty_out() {
        assert!(merge_duplicates(&[], &MergeConfig::default()).is_empty());
    }

    #[test]
    fn chain_of_three_ends_separated() {
        let cfg = MergeConfig::default();
        let out = merge_duplicates(&[c(0.0, 0.0, 0, 3.0), c(10.0, 0.0, 1, 2.0), c(20.0, 0.0, 2, 1.0)], &cfg);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].contributing_regions, vec![0, 1, 2]);
        assert_eq!(merge_final(&out, &cfg), out);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn candidates() -> impl Strategy<Value = Vec<CandidateDamage>> {
            proptest::collection::vec((0.0f64..500.0, 0.0f64..500.0, 0u32..6, 0.0f64..10.0), 0..25)
                .prop_map(|v| v.into_iter().map(|(x, y, r, s)| c(x, y, r, s)).collect())
        }

        proptest! {
            #[test]
            fn never_grows_and_is_idempotent(cands in candidates(), t in 1.0f64..80.0) {
                let cfg = MergeConfig { distance_threshold: t };
                let out = merge_duplicates(&cands, &cfg);
                prop_assert!(out.len() <= cands.len());
                prop_assert_eq!(merge_final(&out, &cfg), out.clone());
                for (i, a) in out.iter().enumerate() {
                    for b in &out[i + 1..] {
                        prop_assert!(hypot(a.x - b.x, a.y - b.y) >= t);
                    }
                }
                let total: usize = out.iter().map(|d| d.contributing_regions.len()).sum();
                prop_assert!(total <= cands.len());
            }

            #[test]
            fn pairs_stay_near_their_originals(
                centers in proptest::collection::vec((0usize..10, 0usize..10), 1..12),
                jitter in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 24),
            ) {
                // clusters of at most two candidates on a 100 mm lattice
                let mut seen = alloc::collections::BTreeSet::new();
                let mut cands = Vec::new();
                for (k, (i, j)) in centers.into_iter().enumerate() {
                    if !seen.insert((i, j)) { continue; }
                    let (bx, by) = (i as f64 * 100.0, j as f64 * 100.0);
                    cands.push(c(bx + jitter[2 * k % 24].0, by + jitter[2 * k % 24].1, 0, k as f64));
                    cands.push(c(bx + jitter[(2 * k + 1) % 24].0, by + jitter[(2 * k + 1) % 24].1, 1, k as f64 + 0.5));
                }
                let cfg = MergeConfig::default();
                let out = merge_duplicates(&cands, &cfg);
                prop_assert_eq!(out.len(), cands.len() / 2);
                for d in &out {
                    prop_assert!(cands.iter().any(|o| hypot(o.x - d.x, o.y - d.y) < cfg.distance_threshold));
                }
            }

            #[test]
            fn separated_regions_never_merge(cands in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..6)) {
                let mut all = Vec::new();
                for (k, (x, y)) in cands.iter().enumerate() {
                    all.push(c(*x, *y, 0, k as f64));
                    all.push(c(*x + 1000.0, *y, 1, k as f64));
                }
                let out = merge_duplicates(&all, &MergeConfig::default());
                for d in &out {
                    prop_assert_eq!(d.contributing_regions.len(), d.contributing_regions.iter().filter(|r| **r == d.contributing_regions[0]).count());
                }
            }
        }
    }
}
