//! Butterworth band-pass built from second-order sections, applied
//! forward-backward for zero phase.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    // Bilinear-transform sections with frequency prewarping.
    fn lowpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    fn highpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = self.b[0] * *v + z1;
            z1 = self.b[1] * *v - self.a[0] * y + z2;
            z2 = self.b[2] * *v - self.a[1] * y;
            *v = y;
        }
    }
}

/// Fourth-order Butterworth high-pass at `lo` cascaded with a fourth-order
/// low-pass at `hi`.
#[derive(Debug, Clone)]
pub struct BandPass {
    sections: Vec<Biquad>,
}

// Pole-pair quality factors of a 4th-order Butterworth prototype.
const BUTTER4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_5];

impl BandPass {
    pub fn new(lo: f64, hi: f64, fs: f64) -> Self {
        let mut sections = Vec::with_capacity(4);
        for q in BUTTER4_Q {
            sections.push(Biquad::highpass(lo, fs, q));
        }
        for q in BUTTER4_Q {
            sections.push(Biquad::lowpass(hi, fs, q));
        }
        Self { sections }
    }

    /// Zero-phase application: forward pass, reverse, forward pass, reverse.
    pub fn filtfilt(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x);
        }
        x.reverse();
        for s in &self.sections {
            s.run(x);
        }
        x.reverse();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone_gain(f: f64, bp: &BandPass, fs: f64) -> f64 {
        let n = 20_000;
        let mut x: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
        bp.filtfilt(&mut x);
        let mid = &x[5_000..15_000];
        (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64 * 2.0).sqrt()
    }

    #[test]
    fn passes_band_and_rejects_outside() {
        let fs = 5120.0;
        let bp = BandPass::new(100.0, 1000.0, fs);
        assert!((tone_gain(400.0, &bp, fs) - 1.0).abs() < 0.02);
        assert!(tone_gain(20.0, &bp, fs) < 0.01);
        assert!(tone_gain(2500.0, &bp, fs) < 0.01);
        // zero-phase squared magnitude is -6 dB at the corners
        assert!((tone_gain(1000.0, &bp, fs) - 0.5).abs() < 0.05);
    }
}
