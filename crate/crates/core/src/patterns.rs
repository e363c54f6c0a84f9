//! Deterministic synthetic patterns: a colour-circle test chart and smooth
//! pseudo-random colour fields. Handy for demos, sweeps, and as stand-ins
//! for photographic originals in tests. No external RNG so the output is
//! stable across platforms and dependency versions.

use crate::imaging::PatternImage;

/// splitmix64; good enough scrambling for pattern synthesis.
struct SplitMix64(u64);

impl SplitMix64 {
    fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }
}

/// Test chart of one red, one green and one blue disc on black.
pub fn rgb_circles(width: usize, height: usize, pixel_pitch: f64) -> PatternImage {
    let mut img = PatternImage::constant(width, height, pixel_pitch, [0.0; 3]);
    let w = width as f64;
    let h = height as f64;
    let radius = 0.16 * w.min(h);
    let centres = [
        (0.25 * w, 0.5 * h, [1.0, 0.0, 0.0]),
        (0.50 * w, 0.5 * h, [0.0, 1.0, 0.0]),
        (0.75 * w, 0.5 * h, [0.0, 0.0, 1.0]),
    ];
    for j in 0..height {
        for i in 0..width {
            let (x, y) = (i as f64 + 0.5, j as f64 + 0.5);
            for (cx, cy, rgb) in centres {
                if (x - cx).hypot(y - cy) <= radius {
                    img.set(i, j, rgb);
                }
            }
        }
    }
    img
}

/// Textured full-colour field built from plane-wave modes of 3 to 16
/// cycles per image at random orientations, amplitudes falling as
/// 1/sqrt(f). Each channel is standardized to mean 0.5 and a fixed
/// contrast before clamping, so every seed yields an image of comparable
/// variance. Distinct seeds give essentially uncorrelated images.
pub fn smooth_field(seed: u64, width: usize, height: usize, pixel_pitch: f64) -> PatternImage {
    let mut rng = SplitMix64::new(seed.wrapping_mul(0x9E37_79B9).wrapping_add(1));
    const MODES: usize = 16;
    const TARGET_STD: f64 = 0.22;
    // (fx, fy, phase, amplitude) per channel
    let mut modes = [[(0.0f64, 0.0f64, 0.0f64, 0.0f64); MODES]; 3];
    for ch_modes in modes.iter_mut() {
        for slot in ch_modes.iter_mut() {
            let theta = rng.uniform(0.0, std::f64::consts::PI);
            let f = 3.0 * (16.0f64 / 3.0).powf(rng.uniform(0.0, 1.0));
            *slot = (
                f * theta.cos(),
                f * theta.sin(),
                rng.uniform(0.0, std::f64::consts::TAU),
                1.0 / f.sqrt(),
            );
        }
    }
    let mut raw = vec![[0.0f64; 3]; width * height];
    for j in 0..height {
        let sy = (j as f64 + 0.5) / height as f64;
        for i in 0..width {
            let sx = (i as f64 + 0.5) / width as f64;
            let px = &mut raw[j * width + i];
            for (c, ch_modes) in modes.iter().enumerate() {
                for &(fx, fy, phase, amp) in ch_modes {
                    px[c] += amp * (std::f64::consts::TAU * (fx * sx + fy * sy) + phase).cos();
                }
            }
        }
    }
    let n = raw.len() as f64;
    let mut img = PatternImage::constant(width, height, pixel_pitch, [0.0; 3]);
    for c in 0..3 {
        let mean = raw.iter().map(|p| p[c]).sum::<f64>() / n;
        let var = raw.iter().map(|p| (p[c] - mean).powi(2)).sum::<f64>() / n;
        let scale = if var > 1e-18 {
            TARGET_STD / var.sqrt()
        } else {
            0.0
        };
        for (out, src) in img.pixels.iter_mut().zip(&raw) {
            out[c] = (0.5 + scale * (src[c] - mean)).clamp(0.0, 1.0);
        }
    }
    img
}
