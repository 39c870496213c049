//! Seeded, bit-repeatable wind sequences and the upstream preview sensor.
//!
//! The generators stand in for an actively controlled tunnel inlet: the same
//! (kind, parameters, seed) triple always reproduces the same samples, so
//! different controllers can be compared on identical inflow realizations.
//! The preview sensor exposes future samples of the hub series directly
//! (frozen-turbulence idealization); optional Gaussian noise models an
//! imperfect upstream probe.

use crate::rng;
use std::fmt::Write as _;
use thiserror::Error;

/// Peak deviation of the gust shape per unit amplitude, `max |v - v0|` for
/// `A = 1`. Frozen from a dense grid maximization of the closed form (the
/// analytic maximum sits exactly at `tau = T/2`).
pub const GUST_PEAK_FACTOR: f64 = 0.74;

/// Wind samples are floored here so turbulence can never drive the hub wind
/// to zero or negative values.
pub const WIND_FLOOR: f64 = 0.5;

#[derive(Debug, Error)]
pub enum InflowError {
    #[error("invalid inflow input: {0}")]
    InvalidInput(String),
    #[error("malformed wind CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindKind {
    Constant,
    Step,
    Gust,
    Turbulence,
}

impl WindKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            WindKind::Constant => "constant",
            WindKind::Step => "step",
            WindKind::Gust => "gust",
            WindKind::Turbulence => "turbulence",
        }
    }
}

/// A hub-height wind speed series on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WindSequence {
    /// Sample spacing [s].
    pub dt: f64,
    /// Samples [m/s]; all finite and positive.
    pub samples: Vec<f64>,
    /// Seed the sequence was generated from (0 for deterministic kinds).
    pub seed: u64,
    pub kind: WindKind,
    /// Nominal base/mean wind of the scenario [m/s].
    pub mean: f64,
}

impl WindSequence {
    /// Time of the last sample [s].
    pub fn t_end(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    /// Nearest-sample lookup; `t` is clamped to the grid ends.
    pub fn sample_at(&self, t: f64) -> f64 {
        let idx = ((t / self.dt) + 0.5).floor() as isize;
        let idx = idx.clamp(0, self.samples.len() as isize - 1) as usize;
        self.samples[idx]
    }

    fn validate_positive(samples: &[f64], what: &str) -> Result<(), InflowError> {
        for (i, &s) in samples.iter().enumerate() {
            if !s.is_finite() || s <= 0.0 {
                return Err(InflowError::InvalidInput(format!(
                    "{what}: sample {i} = {s} is not a positive finite wind speed"
                )));
            }
        }
        Ok(())
    }

    /// Serialize as two-column CSV with a header comment recording the
    /// generation parameters.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# kind={} mean_mps={} seed={} dt_s={}",
            self.kind.as_str(),
            self.mean,
            self.seed,
            self.dt
        );
        out.push_str("t_s,v_mps\n");
        for (i, v) in self.samples.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i as f64 * self.dt, v);
        }
        out
    }

    /// Parse the CSV form produced by [`WindSequence::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self, InflowError> {
        let mut kind = WindKind::Constant;
        let mut seed = 0u64;
        let mut mean = f64::NAN;
        let mut times: Vec<f64> = Vec::new();
        let mut samples: Vec<f64> = Vec::new();
        let mut saw_header = false;

        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for tok in comment.split_whitespace() {
                    if let Some((k, v)) = tok.split_once('=') {
                        match k {
                            "kind" => {
                                kind = match v {
                                    "constant" => WindKind::Constant,
                                    "step" => WindKind::Step,
                                    "gust" => WindKind::Gust,
                                    "turbulence" => WindKind::Turbulence,
                                    other => {
                                        return Err(InflowError::Csv(format!(
                                            "unknown kind '{other}' in header comment"
                                        )))
                                    }
                                }
                            }
                            "seed" => {
                                seed = v.parse().map_err(|e| {
                                    InflowError::Csv(format!("bad seed '{v}': {e}"))
                                })?
                            }
                            "mean_mps" => {
                                mean = v.parse().map_err(|e| {
                                    InflowError::Csv(format!("bad mean '{v}': {e}"))
                                })?
                            }
                            _ => {}
                        }
                    }
                }
                continue;
            }
            if !saw_header {
                if line != "t_s,v_mps" {
                    return Err(InflowError::Csv(format!(
                        "line {}: expected header 't_s,v_mps', got '{line}'",
                        lineno + 1
                    )));
                }
                saw_header = true;
                continue;
            }
            let (t_str, v_str) = line.split_once(',').ok_or_else(|| {
                InflowError::Csv(format!("line {}: expected 't,v'", lineno + 1))
            })?;
            let t: f64 = t_str
                .trim()
                .parse()
                .map_err(|e| InflowError::Csv(format!("line {}: bad time: {e}", lineno + 1)))?;
            let v: f64 = v_str
                .trim()
                .parse()
                .map_err(|e| InflowError::Csv(format!("line {}: bad speed: {e}", lineno + 1)))?;
            if !t.is_finite() {
                return Err(InflowError::Csv(format!("line {}: non-finite time", lineno + 1)));
            }
            times.push(t);
            samples.push(v);
        }
        if samples.len() < 2 {
            return Err(InflowError::Csv("need at least two samples".into()));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(InflowError::Csv(format!("non-increasing time grid (dt = {dt})")));
        }
        for (i, w) in times.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(InflowError::Csv(format!(
                    "non-uniform time grid near row {} (dt {} vs {})",
                    i + 1,
                    step,
                    dt
                )));
            }
        }
        Self::validate_positive(&samples, "imported sequence")?;
        let mean = if mean.is_finite() {
            mean
        } else {
            samples.iter().sum::<f64>() / samples.len() as f64
        };
        Ok(WindSequence { dt, samples, seed, kind, mean })
    }
}

fn check_grid(duration: f64, dt: f64) -> Result<usize, InflowError> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(InflowError::InvalidInput(format!("duration = {duration} must be > 0")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(InflowError::InvalidInput(format!("dt = {dt} must be > 0")));
    }
    Ok((duration / dt).floor() as usize + 1)
}

/// Constant wind.
pub fn gen_constant(v: f64, duration: f64, dt: f64) -> Result<WindSequence, InflowError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(InflowError::InvalidInput(format!("wind speed {v} must be > 0")));
    }
    let n = check_grid(duration, dt)?;
    Ok(WindSequence { dt, samples: vec![v; n], seed: 0, kind: WindKind::Constant, mean: v })
}

/// Step change from `v0` to `v1` at `t_step`.
pub fn gen_step(
    v0: f64,
    v1: f64,
    t_step: f64,
    duration: f64,
    dt: f64,
) -> Result<WindSequence, InflowError> {
    if !(v0 > 0.0 && v1 > 0.0) || !v0.is_finite() || !v1.is_finite() {
        return Err(InflowError::InvalidInput(format!(
            "step speeds v0 = {v0}, v1 = {v1} must be positive"
        )));
    }
    if !(0.0..=duration).contains(&t_step) {
        return Err(InflowError::InvalidInput(format!(
            "t_step = {t_step} outside [0, {duration}]"
        )));
    }
    let n = check_grid(duration, dt)?;
    let samples = (0..n)
        .map(|i| if (i as f64 * dt) < t_step { v0 } else { v1 })
        .collect();
    Ok(WindSequence { dt, samples, seed: 0, kind: WindKind::Step, mean: v0 })
}

/// Deterministic extreme-operating-gust shape around `v0`:
/// `v(t) = v0 - 0.37 A sin(3 pi tau/T) (1 - cos(2 pi tau/T))` for
/// `tau = t - t_start` in `[0, T]`, `v0` elsewhere.
pub fn gen_gust(
    v0: f64,
    amplitude: f64,
    period: f64,
    t_start: f64,
    duration: f64,
    dt: f64,
) -> Result<WindSequence, InflowError> {
    if ![v0, amplitude, period, t_start].iter().all(|x| x.is_finite()) {
        return Err(InflowError::InvalidInput("non-finite gust parameter".into()));
    }
    if !(v0 > 0.0) {
        return Err(InflowError::InvalidInput(format!("v0 = {v0} must be > 0")));
    }
    if amplitude < 0.0 {
        return Err(InflowError::InvalidInput(format!("amplitude = {amplitude} must be >= 0")));
    }
    if !(period > 0.0) {
        return Err(InflowError::InvalidInput(format!("period = {period} must be > 0")));
    }
    let n = check_grid(duration, dt)?;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let tau = i as f64 * dt - t_start;
            if (0.0..=period).contains(&tau) {
                let s = tau / period;
                v0 - 0.37
                    * amplitude
                    * (3.0 * std::f64::consts::PI * s).sin()
                    * (1.0 - (2.0 * std::f64::consts::PI * s).cos())
            } else {
                v0
            }
        })
        .collect();
    WindSequence::validate_positive(&samples, "gust")?;
    Ok(WindSequence { dt, samples, seed: 0, kind: WindKind::Gust, mean: v0 })
}

/// Second-order Butterworth low-pass coefficients (bilinear transform).
/// Returns (b0, b1, b2, a1, a2) for
/// `y_k = b0 w_k + b1 w_{k-1} + b2 w_{k-2} - a1 y_{k-1} - a2 y_{k-2}`.
pub fn shaping_filter_coeffs(cutoff_hz: f64, dt: f64) -> (f64, f64, f64, f64, f64) {
    let k = (std::f64::consts::PI * cutoff_hz * dt).tan();
    let sqrt2 = std::f64::consts::SQRT_2;
    let norm = 1.0 / (1.0 + sqrt2 * k + k * k);
    let b0 = k * k * norm;
    let a1 = 2.0 * (k * k - 1.0) * norm;
    let a2 = (1.0 - sqrt2 * k + k * k) * norm;
    (b0, 2.0 * b0, b0, a1, a2)
}

/// Turbulence integral length scale [m] used to place the shaping-filter
/// cutoff at `v_mean / (2 pi L)`.
pub const TURBULENCE_LENGTH_SCALE: f64 = 5.0;

/// Seeded turbulence: white Gaussian noise shaped by a second-order low-pass
/// filter, rescaled so the sample standard deviation is exactly
/// `ti * v_mean`, then mean-shifted to `v_mean` and floored at
/// [`WIND_FLOOR`].
pub fn gen_turbulence(
    v_mean: f64,
    turbulence_intensity: f64,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<WindSequence, InflowError> {
    if !(v_mean > 0.0) || !v_mean.is_finite() {
        return Err(InflowError::InvalidInput(format!("v_mean = {v_mean} must be > 0")));
    }
    if !(turbulence_intensity > 0.0 && turbulence_intensity < 0.5) {
        return Err(InflowError::InvalidInput(format!(
            "turbulence_intensity = {turbulence_intensity} outside (0, 0.5)"
        )));
    }
    let n = check_grid(duration, dt)?;
    let cutoff_hz = v_mean / (2.0 * std::f64::consts::PI * TURBULENCE_LENGTH_SCALE);
    let (b0, b1, b2, a1, a2) = shaping_filter_coeffs(cutoff_hz, dt);

    // Let the filter reach stationarity before collecting samples.
    let warmup = (2.0 / (cutoff_hz * dt)).ceil() as usize;
    let mut rng = rng::stream(seed);
    let (mut w1, mut w2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    let mut shaped = Vec::with_capacity(n);
    for i in 0..warmup + n {
        let w = rng::standard_normal(&mut rng);
        let y = b0 * w + b1 * w1 + b2 * w2 - a1 * y1 - a2 * y2;
        (w2, w1) = (w1, w);
        (y2, y1) = (y1, y);
        if i >= warmup {
            shaped.push(y);
        }
    }

    let mean = shaped.iter().sum::<f64>() / n as f64;
    let var = shaped.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if std <= 0.0 {
        return Err(InflowError::InvalidInput(
            "degenerate turbulence realization (zero variance)".into(),
        ));
    }
    let scale = turbulence_intensity * v_mean / std;
    let samples: Vec<f64> = shaped
        .iter()
        .map(|y| (v_mean + scale * (y - mean)).max(WIND_FLOOR))
        .collect();
    Ok(WindSequence { dt, samples, seed, kind: WindKind::Turbulence, mean: v_mean })
}

/// The controller-visible slice of future hub wind.
#[derive(Debug, Clone, PartialEq)]
pub struct PreviewWindow {
    /// Number of future samples requested.
    pub horizon_len: usize,
    /// `horizon_len` values [m/s]; entries beyond `valid_len` repeat the last
    /// valid value.
    pub values: Vec<f64>,
    /// How many entries came from inside the sequence span.
    pub valid_len: usize,
}

/// Sample the sequence `Np` controller periods into the future starting at
/// `t`, optionally corrupted by Gaussian sensor noise.
///
/// The noise stream is deterministic per `(noise_seed, t, i)`, so repeated
/// calls with identical arguments return identical windows.
pub fn preview_at(
    seq: &WindSequence,
    t: f64,
    ctrl_period: f64,
    np: usize,
    noise_std: f64,
    noise_seed: u64,
) -> Result<PreviewWindow, InflowError> {
    if np == 0 {
        return Err(InflowError::InvalidInput("preview horizon must be >= 1".into()));
    }
    if !(ctrl_period > 0.0) {
        return Err(InflowError::InvalidInput(format!("ctrl_period = {ctrl_period} must be > 0")));
    }
    if t < -1e-12 || t > seq.t_end() + 1e-12 {
        return Err(InflowError::InvalidInput(format!(
            "t = {t} outside sequence span [0, {}]",
            seq.t_end()
        )));
    }
    let mut values = Vec::with_capacity(np);
    let mut valid_len = 0usize;
    for i in 0..np {
        let ti = t + i as f64 * ctrl_period;
        if ti <= seq.t_end() + 1e-9 * seq.dt {
            let mut v = seq.sample_at(ti);
            if noise_std > 0.0 {
                let mut stream =
                    rng::stream(rng::mix_seed(&[noise_seed, t.to_bits(), i as u64]));
                v += noise_std * rng::standard_normal(&mut stream);
            }
            values.push(v);
            valid_len = i + 1;
        } else {
            let last = *values.last().expect("valid_len >= 1 since t is within span");
            values.push(last);
        }
    }
    Ok(PreviewWindow { horizon_len: np, values, valid_len })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn step_is_constant_when_levels_equal() {
        let s = gen_step(7.0, 7.0, 3.0, 6.0, 0.01).unwrap();
        assert!(s.samples.iter().all(|&v| v == 7.0));
    }

    #[test]
    fn step_index_arithmetic() {
        let s = gen_step(7.0, 9.0, 5.0, 10.0, 0.001).unwrap();
        assert_eq!(s.samples.len(), 10_001);
        assert_eq!(s.samples[4999], 7.0);
        assert_eq!(s.samples[5000], 9.0);
        assert!(s.samples[5000..].iter().all(|&v| v == 9.0));
    }

    #[test]
    fn step_at_time_zero() {
        let s = gen_step(7.0, 9.0, 0.0, 1.0, 0.01).unwrap();
        assert!(s.samples.iter().all(|&v| v == 9.0));
    }

    #[test]
    fn step_rejects_nonpositive() {
        assert!(gen_step(0.0, 9.0, 0.0, 1.0, 0.01).is_err());
        assert!(gen_step(7.0, -1.0, 0.0, 1.0, 0.01).is_err());
    }

    #[test]
    fn gust_zero_amplitude_is_constant() {
        let s = gen_gust(8.0, 0.0, 6.0, 2.0, 12.0, 0.01).unwrap();
        assert!(s.samples.iter().all(|&v| v == 8.0));
    }

    #[test]
    fn gust_endpoints_return_to_base() {
        let s = gen_gust(8.0, 2.0, 6.0, 2.0, 12.0, 0.001).unwrap();
        assert_relative_eq!(s.sample_at(2.0), 8.0, epsilon = 1e-12);
        assert_relative_eq!(s.sample_at(8.0), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn gust_peak_matches_frozen_factor() {
        let s = gen_gust(8.0, 1.0, 6.0, 2.0, 12.0, 1e-4).unwrap();
        let peak = s
            .samples
            .iter()
            .map(|v| (v - 8.0).abs())
            .fold(0.0f64, f64::max);
        assert_relative_eq!(peak, GUST_PEAK_FACTOR, epsilon = 1e-6);
    }

    #[test]
    fn gust_rejects_nonfinite() {
        assert!(gen_gust(8.0, f64::NAN, 6.0, 2.0, 12.0, 0.01).is_err());
    }

    #[test]
    fn turbulence_is_bit_repeatable() {
        let a = gen_turbulence(7.0, 0.1, 20.0, 0.001, 42).unwrap();
        let b = gen_turbulence(7.0, 0.1, 20.0, 0.001, 42).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = gen_turbulence(7.0, 0.1, 20.0, 0.001, 43).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn turbulence_hits_requested_moments() {
        let s = gen_turbulence(7.0, 0.1, 300.0, 0.001, 42).unwrap();
        let n = s.samples.len() as f64;
        let mean = s.samples.iter().sum::<f64>() / n;
        let std =
            (s.samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        assert_relative_eq!(mean, 7.0, max_relative = 0.01);
        assert_relative_eq!(std, 0.7, max_relative = 0.05);
    }

    #[test]
    fn turbulence_rejects_bad_ti() {
        assert!(gen_turbulence(7.0, 0.0, 10.0, 0.001, 1).is_err());
        assert!(gen_turbulence(7.0, 0.6, 10.0, 0.001, 1).is_err());
    }

    #[test]
    fn preview_exact_when_noiseless() {
        let s = gen_step(7.0, 9.0, 0.5, 2.0, 0.001).unwrap();
        let w = preview_at(&s, 0.4, 0.01, 20, 0.0, 0).unwrap();
        assert_eq!(w.values[0], s.sample_at(0.4));
        assert_eq!(w.valid_len, 20);
        // The step at 0.5 s appears 10 preview slots ahead.
        assert_eq!(w.values[9], 7.0);
        assert_eq!(w.values[10], 9.0);
    }

    #[test]
    fn preview_constant_sequence() {
        let s = gen_constant(8.0, 1.0, 0.01).unwrap();
        let w = preview_at(&s, 0.2, 0.05, 8, 0.0, 0).unwrap();
        assert!(w.values.iter().all(|&v| v == 8.0));
    }

    #[test]
    fn preview_tail_padding_policy() {
        let s = gen_constant(8.0, 1.0, 0.01).unwrap(); // t_end = 1.0
        let w = preview_at(&s, 1.0 - 0.05, 0.05, 5, 0.0, 0).unwrap();
        assert_eq!(w.valid_len, 2);
        assert_eq!(w.values.len(), 5);
        assert!(w.values[2..].iter().all(|&v| v == w.values[1]));
    }

    #[test]
    fn preview_rejects_t_outside_span() {
        let s = gen_constant(8.0, 1.0, 0.01).unwrap();
        assert!(preview_at(&s, -0.1, 0.01, 4, 0.0, 0).is_err());
        assert!(preview_at(&s, 1.5, 0.01, 4, 0.0, 0).is_err());
    }

    #[test]
    fn preview_noise_is_deterministic() {
        let s = gen_constant(8.0, 1.0, 0.01).unwrap();
        let a = preview_at(&s, 0.3, 0.01, 6, 0.2, 99).unwrap();
        let b = preview_at(&s, 0.3, 0.01, 6, 0.2, 99).unwrap();
        assert_eq!(a.values, b.values);
        let c = preview_at(&s, 0.3, 0.01, 6, 0.2, 100).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let s = gen_turbulence(8.0, 0.12, 2.0, 0.001, 7).unwrap();
        let text = s.to_csv();
        let back = WindSequence::from_csv(&text).unwrap();
        assert_eq!(s.samples, back.samples);
        assert_eq!(s.kind, back.kind);
        assert_eq!(s.seed, back.seed);
        assert_eq!(s.dt, back.dt);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(WindSequence::from_csv("not,a header\n1,2\n").is_err());
        assert!(WindSequence::from_csv("t_s,v_mps\n0,1\n0,nope\n").is_err());
        assert!(WindSequence::from_csv("t_s,v_mps\n0,1\n0.1,-3\n").is_err());
    }

    #[test]
    fn spectrum_tracks_shaping_filter() {
        use rustfft::{num_complex::Complex, FftPlanner};

        let v_mean = 8.0;
        let dt = 0.001;
        let s = gen_turbulence(v_mean, 0.1, 600.0, dt, 42).unwrap();
        let mean = s.samples.iter().sum::<f64>() / s.samples.len() as f64;

        // Welch estimate: Hann window, 50% overlap.
        let seg = 1usize << 16;
        let hop = seg / 2;
        let window: Vec<f64> = (0..seg)
            .map(|i| {
                0.5 * (1.0
                    - (std::f64::consts::TAU * i as f64 / (seg - 1) as f64).cos())
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(seg);
        let mut psd = vec![0.0f64; seg / 2];
        let mut count = 0usize;
        let mut start = 0usize;
        while start + seg <= s.samples.len() {
            let mut buf: Vec<Complex<f64>> = (0..seg)
                .map(|i| Complex::new((s.samples[start + i] - mean) * window[i], 0.0))
                .collect();
            fft.process(&mut buf);
            for (k, p) in psd.iter_mut().enumerate() {
                *p += buf[k].norm_sqr();
            }
            count += 1;
            start += hop;
        }
        for p in psd.iter_mut() {
            *p /= count as f64;
        }

        // Compare the band-normalized estimate against |H(f)|^2 within 3 dB.
        let cutoff_hz = v_mean / (2.0 * std::f64::consts::PI * TURBULENCE_LENGTH_SCALE);
        let (b0, b1, b2, a1, a2) = shaping_filter_coeffs(cutoff_hz, dt);
        let h2 = |f_hz: f64| {
            let w = std::f64::consts::TAU * f_hz * dt;
            let z = Complex::new(w.cos(), -w.sin()); // z^-1 on the unit circle
            let num = Complex::new(b0, 0.0) + z * b1 + z * z * b2;
            let den = Complex::new(1.0, 0.0) + z * a1 + z * z * a2;
            (num / den).norm_sqr()
        };
        let df = 1.0 / (seg as f64 * dt);
        let band: Vec<usize> = (0..seg / 2)
            .filter(|&k| {
                let f = k as f64 * df;
                (0.02..=1.0).contains(&f)
            })
            .collect();
        let mean_ratio: f64 = band
            .iter()
            .map(|&k| psd[k] / h2(k as f64 * df))
            .sum::<f64>()
            / band.len() as f64;
        for &k in &band {
            let f = k as f64 * df;
            let ratio = psd[k] / h2(f) / mean_ratio;
            let db = 10.0 * ratio.log10();
            assert!(db.abs() <= 3.0, "PSD off by {db:.2} dB at {f:.3} Hz");
        }
    }
}
