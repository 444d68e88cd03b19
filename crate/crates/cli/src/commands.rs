//! One function per pipeline stage. Each reads its inputs from files named by
//! the configuration, writes its artifacts, and logs to `log`.

use std::io::Write;

use gwkae_core::damage_index::{calibrate_threshold, detect, path_dis, DamageIndexSet, HealthReport};
use gwkae_core::kae::KaeModel;
use gwkae_core::metrics::{mape, mre, rmse, EvaluationPair};
use gwkae_core::multi_damage::{localize_all, merge_duplicates, FinalDamage};
use gwkae_core::signal::{split_by_repetition, GwSignal, SensorLayout};
use gwkae_core::sim::{generate_scenario_reps, DamageSpec};
use gwkae_core::train::train_with;

use crate::config::{PipelineConfig, BASELINE_CSV, DAMAGED_CSV};
use crate::error::{CliError, Result};
use crate::formats::{self, fmt_f64, MetricsJson, PairJson};

macro_rules! log {
    ($w:expr, $($arg:tt)*) => {
        writeln!($w, $($arg)*).map_err(|e| CliError::Data(format!("log output: {e}")))?
    };
}

/// Writes the run header to `log` and to `run_<command>.txt` in the output directory.
fn header(cfg: &PipelineConfig, command: &str, extra: &str, log: &mut dyn Write) -> Result<()> {
    let mut line = format!("# gwkae {command} config_sha256={} seed={}", cfg.hash(), cfg.seed);
    if !extra.is_empty() {
        line.push(' ');
        line.push_str(extra);
    }
    log!(log, "{line}");
    let path = cfg.artifact(&format!("run_{command}.txt"));
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
    std::fs::write(&path, format!("{line}\n")).map_err(|e| CliError::io(&path, e))
}

fn load_normalized(path: &std::path::Path, layout: &SensorLayout, cfg: &PipelineConfig) -> Result<Vec<GwSignal>> {
    let raw = formats::read_signals(path, layout, cfg.sample_rate)?;
    if raw.is_empty() {
        return Err(CliError::Data(format!("{}: no signals", path.display())));
    }
    let m = raw[0].samples.len();
    if let Some(s) = raw.iter().find(|s| s.samples.len() != m) {
        return Err(CliError::Data(format!(
            "{}: path {}-{} has {} samples, expected {m}",
            path.display(),
            s.path.actuator_id,
            s.path.sensor_id,
            s.samples.len()
        )));
    }
    raw.iter()
        .map(|s| s.normalized().map_err(|e| CliError::in_file(path, e)))
        .collect()
}

/// Simulates baseline and damaged datasets plus the truth manifest.
pub fn cmd_simulate(cfg: &PipelineConfig, log: &mut dyn Write) -> Result<()> {
    let layout = formats::read_layout(&cfg.layout)?;
    let params = cfg.sim_params()?;
    header(cfg, "simulate", "", log)?;
    let damages = cfg.damages();
    let sc = generate_scenario_reps(
        &layout,
        &damages,
        cfg.sim.repetitions,
        cfg.sim.damaged_repetitions,
        &params,
    )?;
    formats::write_signals(&cfg.artifact(BASELINE_CSV), &sc.baseline)?;
    formats::write_signals(&cfg.artifact(DAMAGED_CSV), &sc.damaged)?;
    formats::write_truth(&cfg.artifact("truth.json"), &sc.truth)?;
    log!(
        log,
        "wrote {} baseline and {} damaged waveforms, {} damage(s)",
        sc.baseline.len(),
        sc.damaged.len(),
        sc.truth.len()
    );
    Ok(())
}

/// Trains the autoencoder on the baseline set and writes the model and loss history.
pub fn cmd_train(cfg: &PipelineConfig, log: &mut dyn Write) -> Result<()> {
    let tc = cfg.train_config()?;
    let grid = cfg.grid()?;
    let extra = format!(
        "lr={} batch={} epochs={} wd={} gamma={}",
        fmt_f64(tc.learning_rate),
        tc.batch_size,
        tc.epochs,
        fmt_f64(tc.weight_decay),
        fmt_f64(tc.gamma)
    );
    let layout = formats::read_layout(&cfg.layout)?;
    let baseline = load_normalized(&cfg.artifact(BASELINE_CSV), &layout, cfg)?;
    header(cfg, "train", &extra, log)?;
    let mut widths = vec![baseline[0].samples.len()];
    widths.extend(&cfg.train.hidden_widths);
    let model = KaeModel::new_random(&widths, grid, cfg.seed)?;
    log!(log, "widths {:?}, {} parameters", widths, model.num_params());
    let mut lines = Vec::new();
    let (model, history) = train_with(model, &baseline, &tc, |e, t, v| {
        lines.push(format!("epoch {e} train_loss {} val_loss {}", fmt_f64(t), fmt_f64(v)));
    })?;
    for l in lines {
        log!(log, "{l}");
    }
    formats::write_model(&cfg.model_path(), &model)?;
    formats::write_history(&cfg.artifact("history.csv"), &history)?;
    Ok(())
}

/// Calibrates per-region thresholds on the held-out baseline repetitions.
pub fn cmd_calibrate(cfg: &PipelineConfig, log: &mut dyn Write) -> Result<()> {
    let layout = formats::read_layout(&cfg.layout)?;
    let model = formats::read_model(&cfg.model_path())?;
    let reduction = cfg.reduction()?;
    let baseline = load_normalized(&cfg.artifact(BASELINE_CSV), &layout, cfg)?;
    header(cfg, "calibrate", "", log)?;
    let (_, held_out) = split_by_repetition(&baseline, cfg.train.split_fraction)?;
    let mut sets = Vec::new();
    for region in layout.regions() {
        sets.extend(DamageIndexSet::score_per_repetition(
            &model, &layout, region.id, &held_out, reduction,
        )?);
    }
    let thresholds = calibrate_threshold(&sets)?;
    for t in &thresholds {
        log!(log, "region {} ThrV {}", t.region_id, fmt_f64(t.value));
    }
    formats::write_thresholds(&cfg.artifact("thresholds.json"), &thresholds, reduction)
}

fn current_reports(
    cfg: &PipelineConfig,
    layout: &SensorLayout,
    model: &KaeModel,
    signals: &[GwSignal],
) -> Result<Vec<HealthReport>> {
    let reduction = cfg.reduction()?;
    let thresholds = formats::read_thresholds(&cfg.artifact("thresholds.json"), reduction)?;
    let dis = path_dis(model, signals, reduction)?;
    layout
        .regions()
        .iter()
        .map(|r| {
            let t = thresholds
                .iter()
                .find(|t| t.region_id == r.id)
                .ok_or_else(|| CliError::Data(format!("region {} has no calibrated threshold", r.id)))?;
            let set = DamageIndexSet::for_region(layout, r.id, &dis)?;
            Ok(detect(&set, t)?)
        })
        .collect()
}

/// Scores the current signals and writes one health report per region.
///
/// With `fail_on_damage`, returns [`CliError::DamageFound`] after writing the
/// reports when any region is damaged.
pub fn cmd_detect(cfg: &PipelineConfig, fail_on_damage: bool, log: &mut dyn Write) -> Result<Vec<HealthReport>> {
    let layout = formats::read_layout(&cfg.layout)?;
    let model = formats::read_model(&cfg.model_path())?;
    let signals = load_normalized(&cfg.current_path(), &layout, cfg)?;
    header(cfg, "detect", "", log)?;
    let reports = current_reports(cfg, &layout, &model, &signals)?;
    for r in &reports {
        formats::write_report(&cfg.artifact(&format!("health_region_{}.json", r.region_id)), r)?;
        log!(
            log,
            "region {} HI {} ThrV {} damaged {}",
            r.region_id,
            fmt_f64(r.hi),
            fmt_f64(r.thr),
            r.damaged
        );
    }
    let damaged: Vec<String> = reports.iter().filter(|r| r.damaged).map(|r| r.region_id.to_string()).collect();
    if fail_on_damage && !damaged.is_empty() {
        return Err(CliError::DamageFound(damaged.join(", ")));
    }
    Ok(reports)
}

/// Images every damaged region and merges the peaks into final damages.
pub fn cmd_localize(cfg: &PipelineConfig, log: &mut dyn Write) -> Result<Vec<FinalDamage>> {
    let params = cfg.localize_params()?;
    let merge = cfg.merge_config()?;
    let layout = formats::read_layout(&cfg.layout)?;
    let model = formats::read_model(&cfg.model_path())?;
    let thresholds = formats::read_thresholds(&cfg.artifact("thresholds.json"), params.reduction)?;
    let signals = load_normalized(&cfg.current_path(), &layout, cfg)?;
    header(cfg, "localize", "", log)?;
    let loc = localize_all(&layout, &signals, &model, &thresholds, &params)?;
    for r in &loc.reports {
        formats::write_report(&cfg.artifact(&format!("health_region_{}.json", r.region_id)), r)?;
    }
    for (id, map) in &loc.maps {
        formats::write_map_csv(&cfg.artifact(&format!("map_region_{id}.csv")), map)?;
        formats::write_map_pgm(&cfg.artifact(&format!("map_region_{id}.pgm")), map)?;
        formats::write_peaks(&cfg.artifact(&format!("peaks_region_{id}.json")), &map.peaks)?;
        log!(log, "region {id}: {} peak(s)", map.peaks.len());
    }
    formats::write_candidates(&cfg.artifact("candidates.json"), &loc.candidates)?;
    let merged = merge_duplicates(&loc.candidates, &merge);
    formats::write_final_damages(&cfg.artifact("final_damages.json"), &merged)?;
    for d in &merged {
        log!(
            log,
            "damage at ({}, {}) mm, score {}, regions {:?}",
            fmt_f64(d.x),
            fmt_f64(d.y),
            fmt_f64(d.score),
            d.contributing_regions
        );
    }
    Ok(merged)
}

/// Pairs each true damage with a distinct prediction, closest pairs first.
pub fn match_predictions(truth: &[DamageSpec], predictions: &[FinalDamage]) -> Vec<EvaluationPair> {
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(truth.len() * predictions.len());
    for (i, t) in truth.iter().enumerate() {
        for (j, p) in predictions.iter().enumerate() {
            cand.push(((p.x - t.center.0).hypot(p.y - t.center.1), i, j));
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_t = vec![false; truth.len()];
    let mut used_p = vec![false; predictions.len()];
    let mut pairs: Vec<(usize, EvaluationPair)> = Vec::new();
    for (_, i, j) in cand {
        if !used_t[i] && !used_p[j] {
            used_t[i] = true;
            used_p[j] = true;
            pairs.push((i, EvaluationPair::new(truth[i].center, (predictions[j].x, predictions[j].y))));
        }
    }
    pairs.sort_by_key(|(i, _)| *i);
    pairs.into_iter().map(|(_, p)| p).collect()
}

/// Scores final damages against the truth manifest.
pub fn cmd_evaluate(cfg: &PipelineConfig, log: &mut dyn Write) -> Result<MetricsJson> {
    let metric = cfg.metric_config();
    let truth = formats::read_truth(&cfg.artifact("truth.json"))?;
    let predictions = formats::read_final_damages(&cfg.artifact("final_damages.json"))?;
    header(cfg, "evaluate", &format!("L={}", fmt_f64(metric.length)), log)?;
    let pairs = match_predictions(&truth, &predictions);
    if pairs.is_empty() {
        return Err(CliError::Data(format!(
            "nothing to evaluate: {} true damage(s), {} prediction(s)",
            truth.len(),
            predictions.len()
        )));
    }
    let mape_percent = match mape(&pairs) {
        Ok(v) => Some(v),
        Err(gwkae_core::Error::Degenerate(msg)) => {
            log!(log, "MAPE undefined: {msg}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let report = MetricsJson {
        n: pairs.len(),
        rmse_mm: rmse(&pairs)?,
        mre_percent: mre(&pairs, &metric)?,
        mape_percent,
        l_mm: metric.length,
        missed: truth.len() - pairs.len(),
        unmatched_predictions: predictions.len() - pairs.len(),
        pairs: pairs.iter().map(PairJson::from).collect(),
    };
    log!(
        log,
        "n {} rmse_mm {} mre_percent {}",
        report.n,
        fmt_f64(report.rmse_mm),
        fmt_f64(report.mre_percent)
    );
    formats::write_json(&cfg.artifact("metrics.json"), &report)?;
    Ok(report)
}
