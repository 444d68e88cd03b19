//! Phenomenological guided-wave generator for ground-truth-known scenarios.
//!
//! Not a wave solver: no dispersion, mode conversion or boundary reflections.
//! A path's waveform is a delayed, attenuated Hann-windowed toneburst. A
//! damage shadows the direct arrival of paths whose ellipse passes near it
//! and adds a weak scattered arrival along the actuator-damage-sensor route.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::math::{cos, exp, hypot, mix64, round, sin};
use crate::signal::{GwSignal, SensingPath, Sensor, SensorLayout};
use crate::{Error, Result};

/// Generator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    /// Toneburst center frequency, Hz.
    pub center_freq: f64,
    /// Cycles in the burst.
    pub cycles: u32,
    /// Sampling rate, Hz.
    pub sample_rate: f64,
    /// Samples per waveform.
    pub n_samples: usize,
    /// Group velocity, mm/s.
    pub group_velocity: f64,
    /// Amplitude attenuation, 1/mm.
    pub attenuation: f64,
    /// Source amplitude.
    pub amplitude: f64,
    /// Standard deviation of additive white noise, in source-amplitude units.
    pub noise_sigma: f64,
    /// Relative amplitude of the scattered arrival.
    pub scatter_coeff: f64,
    /// Fractional loss of the direct arrival for a damage on the path.
    pub shadow_depth: f64,
    /// Width of the shadow on the ellipse-excess axis.
    pub shadow_width: f64,
    /// Seed of the noise generator.
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            center_freq: 80e3,
            cycles: 5,
            sample_rate: 12e6,
            n_samples: 6000,
            group_velocity: 1.5e6,
            attenuation: 1e-3,
            amplitude: 1.0,
            noise_sigma: 0.05,
            scatter_coeff: 0.02,
            shadow_depth: 0.7,
            shadow_width: 0.03,
            seed: 0,
        }
    }
}

impl SimParams {
    /// Range checks.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("center_freq", self.center_freq),
            ("sample_rate", self.sample_rate),
            ("group_velocity", self.group_velocity),
            ("amplitude", self.amplitude),
            ("shadow_width", self.shadow_width),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        let non_negative = [
            ("attenuation", self.attenuation),
            ("noise_sigma", self.noise_sigma),
            ("scatter_coeff", self.scatter_coeff),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be non-negative")));
            }
        }
        if !(0.0..=1.0).contains(&self.shadow_depth) {
            return Err(Error::Config(format!("shadow_depth {} outside [0, 1]", self.shadow_depth)));
        }
        if self.cycles == 0 || self.n_samples == 0 {
            return Err(Error::Config("cycles and n_samples must be at least 1".into()));
        }
        Ok(())
    }

    /// Burst length in samples, `cycles / f0 * fs` rounded.
    pub fn burst_len(&self) -> usize {
        round(self.cycles as f64 / self.center_freq * self.sample_rate) as usize
    }
}

/// A circular damage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamageSpec {
    /// Center, mm.
    pub center: (f64, f64),
    /// Diameter, mm.
    pub diameter: f64,
}

/// Hann-windowed toneburst at the start of an `n_samples` window.
pub fn hanning_toneburst(params: &SimParams) -> Result<Vec<f64>> {
    params.validate()?;
    let len = params.burst_len();
    if len > params.n_samples {
        return Err(Error::Config(format!(
            "burst of {len} samples does not fit a {}-sample window",
            params.n_samples
        )));
    }
    let f0 = params.center_freq;
    let mut out = vec![0.0; params.n_samples];
    for (n, v) in out.iter_mut().enumerate().take(len) {
        let t = n as f64 / params.sample_rate;
        let window = 0.5 * (1.0 - cos(2.0 * PI * f0 * t / params.cycles as f64));
        *v = window * sin(2.0 * PI * f0 * t);
    }
    Ok(out)
}

/// Ellipse excess of point `p` relative to the segment `a`-`s`.
fn excess(p: (f64, f64), a: &Sensor, s: &Sensor) -> f64 {
    let base = hypot(a.x - s.x, a.y - s.y);
    (hypot(p.0 - a.x, p.1 - a.y) + hypot(p.0 - s.x, p.1 - s.y)) / base - 1.0
}

/// Direct-arrival transmission factor of a path under the given damages.
pub fn shadow_factor(actuator: &Sensor, sensor: &Sensor, damages: &[DamageSpec], params: &SimParams) -> f64 {
    let two_var = 2.0 * params.shadow_width * params.shadow_width;
    damages
        .iter()
        .map(|d| {
            let e = excess(d.center, actuator, sensor);
            1.0 - params.shadow_depth * exp(-e * e / two_var)
        })
        .product()
}

/// Noise stream of baseline measurements.
pub const BASELINE_STREAM: u64 = 0;
/// Noise stream of damaged measurements.
pub const DAMAGED_STREAM: u64 = 1;

fn noise_seed(seed: u64, path: SensingPath, repetition: u32, stream: u64) -> u64 {
    let p = mix64(((path.actuator_id as u64) << 32) | path.sensor_id as u64);
    let r = mix64(repetition as u64 ^ (stream << 40));
    mix64(seed ^ p ^ r.rotate_left(17))
}

fn add_burst(out: &mut [f64], burst: &[f64], delay: usize, gain: f64) {
    for (o, b) in out.iter_mut().skip(delay).zip(burst) {
        *o += gain * b;
    }
}

/// Raw (unnormalized) waveform of one path, using the baseline noise stream.
pub fn simulate_path(
    actuator: &Sensor,
    sensor: &Sensor,
    damages: &[DamageSpec],
    params: &SimParams,
    repetition: u32,
) -> Result<GwSignal> {
    simulate_path_stream(actuator, sensor, damages, params, repetition, BASELINE_STREAM)
}

/// [`simulate_path`] with an explicit noise stream id.
///
/// Noise depends only on `(seed, path, repetition, stream)`, so two calls that
/// differ only in `damages` share the same noise realization.
pub fn simulate_path_stream(
    actuator: &Sensor,
    sensor: &Sensor,
    damages: &[DamageSpec],
    params: &SimParams,
    repetition: u32,
    stream: u64,
) -> Result<GwSignal> {
    params.validate()?;
    let path = SensingPath::new(actuator.id, sensor.id)?;
    let d_as = hypot(actuator.x - sensor.x, actuator.y - sensor.y);
    if !(d_as > 0.0) {
        return Err(Error::Geometry(format!(
            "sensors {} and {} coincide",
            actuator.id, sensor.id
        )));
    }
    let window = hanning_toneburst(params)?;
    let burst = &window[..params.burst_len()];
    let delay_of = |dist: f64| round(dist / params.group_velocity * params.sample_rate) as usize;
    let delay = delay_of(d_as);
    if delay + burst.len() > params.n_samples {
        return Err(Error::Config(format!(
            "direct arrival on path {}-{} ends at sample {} beyond the {}-sample window",
            path.actuator_id,
            path.sensor_id,
            delay + burst.len(),
            params.n_samples
        )));
    }
    let mut out = vec![0.0; params.n_samples];
    let t = shadow_factor(actuator, sensor, damages, params);
    add_burst(&mut out, burst, delay, t * params.amplitude * exp(-params.attenuation * d_as));
    for d in damages {
        let route = hypot(d.center.0 - actuator.x, d.center.1 - actuator.y)
            + hypot(d.center.0 - sensor.x, d.center.1 - sensor.y);
        let gain = params.scatter_coeff * params.amplitude * exp(-params.attenuation * route);
        add_burst(&mut out, burst, delay_of(route), gain);
    }
    if params.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(params.seed, path, repetition, stream));
        let normal = Normal::new(0.0, params.noise_sigma).map_err(|e| Error::Config(format!("{e}")))?;
        for v in &mut out {
            *v += normal.sample(&mut rng);
        }
    }
    GwSignal::new(path, repetition, out, params.sample_rate)
}

/// Baseline and damaged datasets of a scenario plus its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// `repetitions` pristine waveforms per path.
    pub baseline: Vec<GwSignal>,
    /// Damaged waveforms, `damaged_repetitions` per path.
    pub damaged: Vec<GwSignal>,
    /// True damages.
    pub truth: Vec<DamageSpec>,
}

/// Simulates every region path of the layout with one damaged measurement per path.
///
/// Baseline repetitions differ only in noise. The damaged set draws from a
/// separate noise stream, so with no damages it is a fresh pristine sample.
pub fn generate_scenario(
    layout: &SensorLayout,
    damages: &[DamageSpec],
    repetitions: u32,
    params: &SimParams,
) -> Result<Scenario> {
    generate_scenario_reps(layout, damages, repetitions, 1, params)
}

/// [`generate_scenario`] with `damaged_repetitions` damaged measurements per path.
pub fn generate_scenario_reps(
    layout: &SensorLayout,
    damages: &[DamageSpec],
    repetitions: u32,
    damaged_repetitions: u32,
    params: &SimParams,
) -> Result<Scenario> {
    params.validate()?;
    if let Some(d) = damages.iter().find(|d| !(d.diameter > 0.0)) {
        return Err(Error::Config(format!("damage diameter {} must be positive", d.diameter)));
    }
    let paths = layout.all_paths();
    let mut baseline = Vec::with_capacity(paths.len() * repetitions as usize);
    let mut damaged = Vec::with_capacity(paths.len() * damaged_repetitions as usize);
    for p in &paths {
        let a = layout.sensor(p.actuator_id).expect("path sensors exist");
        let s = layout.sensor(p.sensor_id).expect("path sensors exist");
        for rep in 0..repetitions {
            baseline.push(simulate_path_stream(a, s, &[], params, rep, BASELINE_STREAM)?);
        }
        for rep in 0..damaged_repetitions {
            damaged.push(simulate_path_stream(a, s, damages, params, rep, DAMAGED_STREAM)?);
        }
    }
    Ok(Scenario {
        baseline,
        damaged,
        truth: damages.to_vec(),
    })
}
