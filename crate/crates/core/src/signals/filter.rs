//! Zero-phase FIR low-pass (Kaiser-windowed sinc, FFT convolution).

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::Waveform;
use crate::error::{Error, Result};

/// Design parameters for [`lowpass_with`].
///
/// `cutoff_hz` is the passband edge; the stopband starts at
/// `cutoff_hz · (1 + transition_ratio)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowpassDesign {
    pub stopband_attenuation_db: f64,
    pub transition_ratio: f64,
}

impl Default for LowpassDesign {
    fn default() -> Self {
        Self {
            stopband_attenuation_db: 180.0,
            transition_ratio: 0.5,
        }
    }
}

impl LowpassDesign {
    /// Symmetric odd-length kernel with unit DC gain.
    pub fn kernel(&self, sample_rate_hz: u32, cutoff_hz: f64) -> Result<Vec<f64>> {
        let fs = sample_rate_hz as f64;
        let nyquist = fs / 2.0;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
            return Err(Error::param(
                "cutoff_hz",
                format!("{cutoff_hz} Hz is outside (0, {nyquist}) Hz"),
            ));
        }
        if !(self.transition_ratio > 0.0) || !(self.stopband_attenuation_db > 21.0) {
            return Err(Error::param(
                "lowpass design",
                "transition ratio must be positive and attenuation above 21 dB",
            ));
        }
        let atten = self.stopband_attenuation_db;
        let stop_edge = (cutoff_hz * (1.0 + self.transition_ratio)).min(nyquist);
        let transition = stop_edge - cutoff_hz;
        let center = (cutoff_hz + stop_edge) / 2.0 / fs;

        // Kaiser's empirical design formulas.
        let beta = if atten > 50.0 {
            0.1102 * (atten - 8.7)
        } else {
            0.5842 * (atten - 21.0).powf(0.4) + 0.07886 * (atten - 21.0)
        };
        let dw = 2.0 * std::f64::consts::PI * transition / fs;
        let mut taps = ((atten - 8.0) / (2.285 * dw)).ceil() as usize;
        if taps.is_multiple_of(2) {
            taps += 1;
        }
        let half = (taps / 2) as f64;
        let i0_beta = bessel_i0(beta);
        let mut h: Vec<f64> = (0..taps)
            .map(|i| {
                let m = i as f64 - half;
                let r = m / half;
                let window = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                2.0 * center * sinc(2.0 * center * m) * window
            })
            .collect();
        let sum: f64 = h.iter().sum();
        h.iter_mut().for_each(|c| *c /= sum);
        Ok(h)
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Zero-phase low-pass with the default design (≥ 60 dB at 1.5 × cutoff,
/// sub-millidecibel passband ripple). Output has the input's length; the
/// ends are mirror-extended before filtering.
pub fn lowpass(input: &Waveform, cutoff_hz: f64) -> Result<Waveform> {
    lowpass_with(input, cutoff_hz, LowpassDesign::default())
}

pub fn lowpass_with(input: &Waveform, cutoff_hz: f64, design: LowpassDesign) -> Result<Waveform> {
    let h = design.kernel(input.sample_rate_hz(), cutoff_hz)?;
    Ok(input.with_samples(apply_kernel(input.samples(), &h)))
}

fn mirror_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut k = i.rem_euclid(period);
    if k >= n as isize {
        k = period - k;
    }
    k as usize
}

/// Centered ("same" length) convolution with a symmetric kernel over a
/// mirror-extended copy of `x`.
pub(crate) fn apply_kernel(x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = x.len();
    let half = h.len() / 2;
    let padded_len = n + 2 * half;
    let conv_len = padded_len + h.len() - 1;
    let fft_len = conv_len.next_power_of_two();

    let mut a: Vec<Complex64> = (0..fft_len)
        .map(|i| {
            if i < padded_len {
                Complex64::new(x[mirror_index(i as isize - half as isize, n)], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let mut b: Vec<Complex64> = (0..fft_len)
        .map(|i| Complex64::new(h.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);
    fwd.process(&mut a);
    fwd.process(&mut b);
    a.iter_mut().zip(&b).for_each(|(x, y)| *x *= y);
    inv.process(&mut a);

    let scale = 1.0 / fft_len as f64;
    // Output k of the valid region sits at full-convolution index k + 2·half.
    (0..n).map(|k| a[k + 2 * half].re * scale).collect()
}
