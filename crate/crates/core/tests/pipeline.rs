use gwkae_core::bspline::BSplineGrid;
use gwkae_core::damage_index::{calibrate_threshold, DamageIndexSet};
use gwkae_core::kae::KaeModel;
use gwkae_core::multi_damage::{localize_all, LocalizeParams};
use gwkae_core::signal::{split_by_repetition, GwSignal, Rect, Region, Sensor, SensorLayout};
use gwkae_core::sim::{generate_scenario, generate_scenario_reps, DamageSpec, SimParams};
use gwkae_core::train::{train, TrainConfig};

fn grid_layout() -> SensorLayout {
    let mut sensors = Vec::new();
    for r in 0..3u32 {
        for c in 0..3u32 {
            sensors.push(Sensor { id: 1 + r * 3 + c, x: 150.0 * c as f64, y: 150.0 * r as f64 });
        }
    }
    let region = Region { id: 0, sensor_ids: (1..=9).collect(), bounds: Rect::new(0.0, 0.0, 300.0, 300.0) };
    SensorLayout::new(sensors, vec![region]).unwrap()
}

fn small_params() -> SimParams {
    SimParams { sample_rate: 1e6, n_samples: 400, seed: 3, ..Default::default() }
}

#[test]
fn damaged_repetitions_are_distinct_draws() {
    let layout = grid_layout();
    let dmg = [DamageSpec { center: (75.0, 75.0), diameter: 20.0 }];
    let sc = generate_scenario_reps(&layout, &dmg, 2, 3, &small_params()).unwrap();
    let n_paths = layout.all_paths().len();
    assert_eq!(sc.baseline.len(), 2 * n_paths);
    assert_eq!(sc.damaged.len(), 3 * n_paths);
    let first = &sc.damaged[..3];
    assert!(first.iter().all(|s| s.path == first[0].path));
    assert_eq!(first.iter().map(|s| s.repetition).collect::<Vec<_>>(), [0, 1, 2]);
    assert_ne!(first[0].samples, first[1].samples);

    let single = generate_scenario(&layout, &dmg, 2, &small_params()).unwrap();
    assert_eq!(single.baseline, sc.baseline);
    assert_eq!(single.damaged[0], sc.damaged[0]);
}

#[test]
fn pristine_measurement_is_not_flagged_and_damage_is() {
    let layout = grid_layout();
    let params = small_params();
    let dmg = [DamageSpec { center: (75.0, 75.0), diameter: 20.0 }];
    let sc = generate_scenario_reps(&layout, &dmg, 10, 4, &params).unwrap();
    let norm = |v: &[GwSignal]| v.iter().map(|s| s.normalized().unwrap()).collect::<Vec<_>>();
    let base = norm(&sc.baseline);
    let cfg = TrainConfig { epochs: 8, learning_rate: 0.003, batch_size: 8, seed: 3, ..Default::default() };
    let model = KaeModel::new_random(&[400, 16, 8, 4], BSplineGrid::default(), 3).unwrap();
    let (model, history) = train(model, &base, &cfg).unwrap();
    assert!(history.val.last().unwrap() < history.val.first().unwrap());

    let (_, held_out) = split_by_repetition(&base, cfg.split_fraction).unwrap();
    let sets = DamageIndexSet::score_per_repetition(&model, &layout, 0, &held_out, cfg.reduction).unwrap();
    let thr = calibrate_threshold(&sets).unwrap();

    let pristine = generate_scenario_reps(&layout, &[], 1, 4, &params).unwrap();
    let loc = localize_all(&layout, &norm(&pristine.damaged), &model, &thr, &LocalizeParams::default()).unwrap();
    assert!(!loc.reports[0].damaged, "HI {} vs ThrV {}", loc.reports[0].hi, loc.reports[0].thr);
    assert!(loc.candidates.is_empty());

    let loc = localize_all(&layout, &norm(&sc.damaged), &model, &thr, &LocalizeParams::default()).unwrap();
    assert!(loc.reports[0].damaged, "HI {} vs ThrV {}", loc.reports[0].hi, loc.reports[0].thr);
    assert!(!loc.candidates.is_empty());
}
