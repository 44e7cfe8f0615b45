//! Band-limited procedural textures.
//!
//! Hashed white noise on an integer lattice is box-filtered (3x3) and then
//! interpolated with a cubic B-spline between lattice points spaced `CELL`
//! pixels apart, which keeps the texture twice continuously differentiable.
//! The texture is defined on the whole plane, so moving layers never run out
//! of pattern.

/// Lattice spacing in pixels.
pub const CELL: f64 = 3.0;

/// Gain applied around mid-gray before saturating into `[0, 1]`.
const CONTRAST: f64 = 4.0;

#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn lattice(seed: u64, i: i64, j: i64) -> f64 {
    let h = mix64(seed ^ mix64((i as u64).wrapping_mul(0x8CB9_2BA7_2F3D_8DD7) ^ (j as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

#[inline]
fn smoothed(seed: u64, i: i64, j: i64) -> f64 {
    let mut s = 0.0;
    for dj in -1..=1 {
        for di in -1..=1 {
            s += lattice(seed, i + di, j + dj);
        }
    }
    s / 9.0
}

/// A seeded texture with a mean brightness.
#[derive(Debug, Clone, Copy)]
pub struct Texture {
    seed: u64,
    brightness: f64,
}

impl Texture {
    pub fn new(seed: u64, brightness: f64) -> Self {
        Self { seed, brightness }
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let gx = x / CELL;
        let gy = y / CELL;
        let i = libm::floor(gx);
        let j = libm::floor(gy);
        let wx = bspline_weights(gx - i);
        let wy = bspline_weights(gy - j);
        let (i, j) = (i as i64, j as i64);
        let mut s = 0.0;
        for (dj, wy) in wy.iter().enumerate() {
            let mut row = 0.0;
            for (di, wx) in wx.iter().enumerate() {
                row += wx * smoothed(self.seed, i + di as i64 - 1, j + dj as i64 - 1);
            }
            s += wy * row;
        }
        // smooth saturation instead of a clamp, so the texture has no kinks
        let room = 0.98 * self.brightness.min(1.0 - self.brightness).max(0.05);
        (self.brightness + room * libm::tanh(CONTRAST * (s - 0.5) / room)).clamp(0.0, 1.0)
    }
}

/// Uniform cubic B-spline weights of lattice points `-1, 0, 1, 2` at offset `t`.
#[inline]
fn bspline_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    let u = 1.0 - t;
    [
        u * u * u / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}
