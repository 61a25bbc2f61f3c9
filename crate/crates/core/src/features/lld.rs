//! Frame-level low-level descriptors.
//!
//! The signal is cut into Hann-windowed frames (25 ms / 10 ms hop by
//! default) and each frame yields twelve descriptors:
//!
//! * `f0` — autocorrelation peak in the 60–500 Hz lag range, refined by
//!   parabolic interpolation; exactly 0 on frames whose normalized peak
//!   falls below the 0.45 voicing threshold,
//! * `rms_energy`, `zero_crossing_rate`,
//! * `spectral_centroid`, `spectral_flux` (L2 magnitude difference, first
//!   frame 0), `spectral_slope` (least-squares magnitude-vs-frequency
//!   slope), `spectral_rolloff85` (85% of spectral power),
//! * `hnr_proxy` — `10 log10(r/(1-r))` of the normalized autocorrelation
//!   peak, clamped to [-60, 60] dB,
//! * `mfcc[1..=4]` — DCT-II of 26 log mel filterbank energies.

use super::{AudioSignal, FeatureError};
use crate::scalar::Real;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub const DEFAULT_FRAME_LEN_MS: f64 = 25.0;
pub const DEFAULT_HOP_MS: f64 = 10.0;
/// F0 search range in Hz.
pub const F0_MIN_HZ: f64 = 60.0;
pub const F0_MAX_HZ: f64 = 500.0;
/// A frame is voiced when its normalized autocorrelation peak reaches this.
pub const VOICING_THRESHOLD: f64 = 0.45;
pub const NUM_MEL_FILTERS: usize = 26;
/// Mel cepstral coefficients 1..=4 are kept (0 carries only gain).
pub const NUM_MFCC: usize = 4;
/// Floor applied to filterbank energies before the log.
pub const MEL_LOG_FLOOR: f64 = 1e-10;
/// Clamp range of the harmonicity proxy, in dB.
pub const HNR_RANGE_DB: f64 = 60.0;

/// Number of descriptor tracks in an [`LldSeries`].
pub const NUM_LLDS: usize = 8 + NUM_MFCC;

/// Per-frame descriptor tracks; all tracks have one entry per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LldSeries<T: Real> {
    pub f0: Vec<T>,
    pub rms_energy: Vec<T>,
    pub zero_crossing_rate: Vec<T>,
    pub spectral_centroid: Vec<T>,
    pub spectral_flux: Vec<T>,
    pub spectral_slope: Vec<T>,
    pub spectral_rolloff85: Vec<T>,
    pub hnr_proxy: Vec<T>,
    pub mfcc: [Vec<T>; NUM_MFCC],
    /// Voicing mask; `f0[i] > 0` exactly when `voiced[i]`.
    pub voiced: Vec<bool>,
    pub frame_len_ms: f64,
    pub hop_ms: f64,
}

impl<T: Real> LldSeries<T> {
    pub fn num_frames(&self) -> usize {
        self.f0.len()
    }

    /// The twelve tracks in their frozen aggregation order.
    pub fn tracks(&self) -> [(&'static str, &[T]); NUM_LLDS] {
        [
            ("f0", &self.f0),
            ("rms_energy", &self.rms_energy),
            ("zero_crossing_rate", &self.zero_crossing_rate),
            ("spectral_centroid", &self.spectral_centroid),
            ("spectral_flux", &self.spectral_flux),
            ("spectral_slope", &self.spectral_slope),
            ("spectral_rolloff85", &self.spectral_rolloff85),
            ("hnr_proxy", &self.hnr_proxy),
            ("mfcc1", &self.mfcc[0]),
            ("mfcc2", &self.mfcc[1]),
            ("mfcc3", &self.mfcc[2]),
            ("mfcc4", &self.mfcc[3]),
        ]
    }
}

/// Number of frames produced for a signal of `n` samples:
/// `(n - frame_len) / hop + 1`.
pub fn frame_count(n: usize, frame_len: usize, hop: usize) -> usize {
    if n < frame_len {
        0
    } else {
        (n - frame_len) / hop + 1
    }
}

fn ms_to_samples(sample_rate: u32, ms: f64) -> usize {
    (f64::from(sample_rate) * ms / 1000.0).round() as usize
}

/// Compute the descriptor tracks with the default 25 ms frames and 10 ms hop.
pub fn compute_llds<T: Real>(signal: &AudioSignal<T>) -> Result<LldSeries<T>, FeatureError> {
    compute_llds_with(signal, DEFAULT_FRAME_LEN_MS, DEFAULT_HOP_MS)
}

/// Compute the descriptor tracks with explicit framing.
pub fn compute_llds_with<T: Real>(
    signal: &AudioSignal<T>,
    frame_len_ms: f64,
    hop_ms: f64,
) -> Result<LldSeries<T>, FeatureError> {
    if !(frame_len_ms > 0.0) || !(hop_ms > 0.0) || !frame_len_ms.is_finite() || !hop_ms.is_finite()
    {
        return Err(FeatureError::InvalidFraming(format!(
            "frame length {frame_len_ms} ms / hop {hop_ms} ms must both be positive"
        )));
    }
    let rate = signal.sample_rate();
    let frame_len = ms_to_samples(rate, frame_len_ms);
    let hop = ms_to_samples(rate, hop_ms).max(1);
    if frame_len < 4 {
        return Err(FeatureError::InvalidFraming(format!(
            "frame length {frame_len_ms} ms is under 4 samples at {rate} Hz"
        )));
    }
    let samples = signal.samples();
    if samples.len() < frame_len {
        return Err(FeatureError::SignalTooShort {
            samples: samples.len(),
            frame_len,
        });
    }

    let frames = frame_count(samples.len(), frame_len, hop);
    let mut series = LldSeries {
        f0: Vec::with_capacity(frames),
        rms_energy: Vec::with_capacity(frames),
        zero_crossing_rate: Vec::with_capacity(frames),
        spectral_centroid: Vec::with_capacity(frames),
        spectral_flux: Vec::with_capacity(frames),
        spectral_slope: Vec::with_capacity(frames),
        spectral_rolloff85: Vec::with_capacity(frames),
        hnr_proxy: Vec::with_capacity(frames),
        mfcc: std::array::from_fn(|_| Vec::with_capacity(frames)),
        voiced: Vec::with_capacity(frames),
        frame_len_ms,
        hop_ms,
    };

    let window = hann_window::<T>(frame_len);
    let fft = FftPlanner::<T>::new().plan_fft_forward(frame_len);
    let num_bins = frame_len / 2 + 1;
    let bin_hz: Vec<T> = (0..num_bins)
        .map(|k| T::cast(k as f64 * f64::from(rate) / frame_len as f64))
        .collect();
    let filterbank = mel_filterbank::<T>(rate, frame_len, num_bins);
    let mut spectrum = vec![Complex::new(T::zero(), T::zero()); frame_len];
    let mut prev_magnitudes: Option<Vec<T>> = None;

    for f in 0..frames {
        let frame = &samples[f * hop..f * hop + frame_len];

        series.rms_energy.push(rms(frame));
        series.zero_crossing_rate.push(zcr(frame));

        let pitch = pitch_track(frame, rate);
        series.voiced.push(pitch.voiced);
        series.f0.push(pitch.f0);
        series.hnr_proxy.push(pitch.hnr);

        for (slot, (&x, &w)) in spectrum.iter_mut().zip(frame.iter().zip(&window)) {
            *slot = Complex::new(x * w, T::zero());
        }
        fft.process(&mut spectrum);
        let magnitudes: Vec<T> = spectrum[..num_bins].iter().map(|c| c.norm()).collect();

        series.spectral_centroid.push(centroid(&bin_hz, &magnitudes));
        series.spectral_flux.push(match &prev_magnitudes {
            None => T::zero(),
            Some(prev) => l2_diff(&magnitudes, prev),
        });
        series.spectral_slope.push(regression_slope(&bin_hz, &magnitudes));
        series.spectral_rolloff85.push(rolloff(&bin_hz, &magnitudes, T::cast(0.85)));

        let coeffs = mfcc(&magnitudes, &filterbank);
        for (track, c) in series.mfcc.iter_mut().zip(coeffs) {
            track.push(c);
        }

        prev_magnitudes = Some(magnitudes);
    }

    Ok(series)
}

fn hann_window<T: Real>(len: usize) -> Vec<T> {
    let denom = (len - 1) as f64;
    (0..len)
        .map(|i| T::cast(0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / denom).cos())))
        .collect()
}

fn rms<T: Real>(frame: &[T]) -> T {
    let sum_sq: T = frame.iter().map(|&x| x * x).sum();
    (sum_sq / T::cast(frame.len() as f64)).sqrt()
}

fn zcr<T: Real>(frame: &[T]) -> T {
    let crossings = frame
        .windows(2)
        .filter(|pair| pair[0] * pair[1] < T::zero())
        .count();
    T::cast(crossings as f64 / (frame.len() - 1) as f64)
}

struct PitchResult<T> {
    voiced: bool,
    f0: T,
    hnr: T,
}

/// Autocorrelation pitch tracker over the mean-removed frame.
///
/// The peak of `r(tau) / r(0)` is searched over lags corresponding to
/// 60–500 Hz; the discrete winner decides voicing and harmonicity, and a
/// three-point parabolic fit refines the lag before conversion to Hz.
fn pitch_track<T: Real>(frame: &[T], sample_rate: u32) -> PitchResult<T> {
    let unvoiced = PitchResult {
        voiced: false,
        f0: T::zero(),
        hnr: -T::cast(HNR_RANGE_DB),
    };

    let n = frame.len();
    let mean = frame.iter().cloned().sum::<T>() / T::cast(n as f64);
    let centered: Vec<T> = frame.iter().map(|&x| x - mean).collect();
    let r0: T = centered.iter().map(|&x| x * x).sum();
    if !(r0 > T::zero()) {
        return unvoiced;
    }

    let rate = f64::from(sample_rate);
    let tau_min = ((rate / F0_MAX_HZ).ceil() as usize).max(2);
    let tau_max = ((rate / F0_MIN_HZ).floor() as usize).min(n.saturating_sub(2));
    if tau_min > tau_max {
        return unvoiced;
    }

    let autocorr = |tau: usize| -> T {
        let mut sum = T::zero();
        for i in 0..n - tau {
            sum += centered[i] * centered[i + tau];
        }
        sum
    };

    let mut best_tau = tau_min;
    let mut best_r = T::neg_infinity();
    for tau in tau_min..=tau_max {
        let r = autocorr(tau);
        if r > best_r {
            best_r = r;
            best_tau = tau;
        }
    }

    let peak = (best_r / r0).as_f64();
    let r_clamped = T::cast(peak.clamp(1e-6, 1.0 - 1e-6));
    let ratio = r_clamped / (T::one() - r_clamped);
    let hnr_db = T::cast(10.0) * ratio.log10();
    let hnr = hnr_db.min(T::cast(HNR_RANGE_DB)).max(-T::cast(HNR_RANGE_DB));
    if peak < VOICING_THRESHOLD {
        return PitchResult { voiced: false, f0: T::zero(), hnr };
    }

    // Parabolic refinement around the discrete peak.
    let left = autocorr(best_tau - 1).as_f64();
    let mid = best_r.as_f64();
    let right = autocorr(best_tau + 1).as_f64();
    let denom = left - 2.0 * mid + right;
    let delta = if denom.abs() < 1e-12 {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-1.0, 1.0)
    };
    let f0 = T::cast(rate / (best_tau as f64 + delta));
    PitchResult { voiced: true, f0, hnr }
}

fn centroid<T: Real>(freqs: &[T], magnitudes: &[T]) -> T {
    let total: T = magnitudes.iter().cloned().sum();
    if !(total > T::zero()) {
        return T::zero();
    }
    let weighted: T = freqs.iter().zip(magnitudes).map(|(&f, &m)| f * m).sum();
    weighted / total
}

fn l2_diff<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

fn regression_slope<T: Real>(freqs: &[T], magnitudes: &[T]) -> T {
    let n = T::cast(freqs.len() as f64);
    let f_mean = freqs.iter().cloned().sum::<T>() / n;
    let m_mean = magnitudes.iter().cloned().sum::<T>() / n;
    let mut cov = T::zero();
    let mut var = T::zero();
    for (&f, &m) in freqs.iter().zip(magnitudes) {
        let df = f - f_mean;
        cov += df * (m - m_mean);
        var += df * df;
    }
    if !(var > T::zero()) {
        return T::zero();
    }
    cov / var
}

fn rolloff<T: Real>(freqs: &[T], magnitudes: &[T], fraction: T) -> T {
    let total: T = magnitudes.iter().map(|&m| m * m).sum();
    if !(total > T::zero()) {
        return T::zero();
    }
    let target = fraction * total;
    let mut cum = T::zero();
    for (&f, &m) in freqs.iter().zip(magnitudes) {
        cum += m * m;
        if cum >= target {
            return f;
        }
    }
    *freqs.last().expect("non-empty spectrum")
}

fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_inv(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank as dense per-filter bin weights.
fn mel_filterbank<T: Real>(sample_rate: u32, frame_len: usize, num_bins: usize) -> Vec<Vec<T>> {
    let nyquist = f64::from(sample_rate) / 2.0;
    let top_mel = mel(nyquist);
    let edges: Vec<f64> = (0..NUM_MEL_FILTERS + 2)
        .map(|i| mel_inv(top_mel * i as f64 / (NUM_MEL_FILTERS + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * f64::from(sample_rate) / frame_len as f64;

    (0..NUM_MEL_FILTERS)
        .map(|b| {
            let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..num_bins)
                .map(|k| {
                    let f = bin_hz(k);
                    let w = ((f - lo) / (mid - lo)).min((hi - f) / (hi - mid)).max(0.0);
                    T::cast(w)
                })
                .collect()
        })
        .collect()
}

/// Mel cepstral coefficients 1..=NUM_MFCC from a magnitude spectrum.
///
/// The log energies are shifted by the first entry before the DCT;
/// coefficients 1 and up are invariant to any constant shift in exact
/// arithmetic, and shifting first makes the invariance hold in floating
/// point too (a flat spectrum gives exact zeros instead of rounding
/// residue).
fn mfcc<T: Real>(magnitudes: &[T], filterbank: &[Vec<T>]) -> [T; NUM_MFCC] {
    let b = filterbank.len();
    let mut log_energies: Vec<T> = filterbank
        .iter()
        .map(|weights| {
            let e: T = weights
                .iter()
                .zip(magnitudes)
                .map(|(&w, &m)| w * m * m)
                .sum();
            e.max(T::cast(MEL_LOG_FLOOR)).ln()
        })
        .collect();
    let shift = log_energies[0];
    for l in log_energies.iter_mut() {
        *l -= shift;
    }
    let scale = T::cast((2.0 / b as f64).sqrt());
    std::array::from_fn(|i| {
        let n = (i + 1) as f64;
        let sum: T = log_energies
            .iter()
            .enumerate()
            .map(|(j, &l)| l * T::cast((std::f64::consts::PI * n * (j as f64 + 0.5) / b as f64).cos()))
            .sum();
        scale * sum
    })
}
