//! Middlebury-style flow color coding.
//!
//! Hue encodes direction through the 55-entry color wheel, saturation encodes
//! magnitude relative to `max_mag`. Vectors longer than `max_mag` are darkened.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::flow::FlowField;
use crate::image::ImageBuffer;

const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;

/// Number of entries in the wheel.
pub const WHEEL_SIZE: usize = RY + YG + GC + CB + BM + MR;

/// The wheel, as RGB in `[0, 255]`.
pub fn color_wheel() -> [[f64; 3]; WHEEL_SIZE] {
    let mut wheel = [[0.0; 3]; WHEEL_SIZE];
    let mut col = 0;
    for i in 0..RY {
        wheel[col] = [255.0, libm::floor(255.0 * i as f64 / RY as f64), 0.0];
        col += 1;
    }
    for i in 0..YG {
        wheel[col] = [255.0 - libm::floor(255.0 * i as f64 / YG as f64), 255.0, 0.0];
        col += 1;
    }
    for i in 0..GC {
        wheel[col] = [0.0, 255.0, libm::floor(255.0 * i as f64 / GC as f64)];
        col += 1;
    }
    for i in 0..CB {
        wheel[col] = [0.0, 255.0 - libm::floor(255.0 * i as f64 / CB as f64), 255.0];
        col += 1;
    }
    for i in 0..BM {
        wheel[col] = [libm::floor(255.0 * i as f64 / BM as f64), 0.0, 255.0];
        col += 1;
    }
    for i in 0..MR {
        wheel[col] = [255.0, 0.0, 255.0 - libm::floor(255.0 * i as f64 / MR as f64)];
        col += 1;
    }
    wheel
}

/// Color of a single vector with magnitude already normalized by `max_mag`.
fn encode(wheel: &[[f64; 3]; WHEEL_SIZE], u: f64, v: f64, rad: f64) -> [f64; 3] {
    let a = libm::atan2(-v, -u) / PI;
    let fk = (a + 1.0) / 2.0 * (WHEEL_SIZE - 1) as f64;
    let k0 = (libm::floor(fk) as usize).min(WHEEL_SIZE - 1);
    let k1 = (k0 + 1) % WHEEL_SIZE;
    let f = fk - k0 as f64;
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let col0 = wheel[k0][c] / 255.0;
        let col1 = wheel[k1][c] / 255.0;
        let col = (1.0 - f) * col0 + f * col1;
        *o = if rad <= 1.0 {
            1.0 - rad * (1.0 - col)
        } else {
            col * 0.75
        };
    }
    out
}

/// 99th-percentile flow magnitude, or 1 for an all-zero field.
pub fn default_max_magnitude(flow: &FlowField) -> f64 {
    let mut mags: Vec<f64> = flow
        .u()
        .iter()
        .zip(flow.v())
        .map(|(u, v)| libm::hypot(*u, *v))
        .collect();
    if mags.is_empty() {
        return 1.0;
    }
    mags.sort_by(f64::total_cmp);
    let rank = libm::ceil(0.99 * mags.len() as f64) as usize;
    let p = mags[rank.saturating_sub(1).min(mags.len() - 1)];
    if p > 0.0 {
        p
    } else {
        1.0
    }
}

/// Renders a flow field as an RGB image in `[0, 1]`; zero flow is white.
pub fn flow_to_color(flow: &FlowField, max_mag: Option<f64>) -> ImageBuffer {
    let max_mag = match max_mag {
        Some(m) if m > 0.0 => m,
        _ => default_max_magnitude(flow),
    };
    let wheel = color_wheel();
    let mut data = Vec::with_capacity(flow.len() * 3);
    for (u, v) in flow.u().iter().zip(flow.v()) {
        let rad = libm::hypot(*u, *v) / max_mag;
        data.extend_from_slice(&encode(&wheel, *u, *v, rad));
    }
    ImageBuffer::from_vec(flow.width(), flow.height(), 3, data).expect("colors are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_flow_is_white() {
        let img = flow_to_color(&FlowField::zeros(3, 2), None);
        assert!(img.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn full_turn_gives_same_color() {
        let theta = 0.7f64;
        let turned = theta + 2.0 * PI;
        let a = FlowField::constant(1, 1, 3.0 * libm::cos(theta), 3.0 * libm::sin(theta));
        let b = FlowField::constant(1, 1, 3.0 * libm::cos(turned), 3.0 * libm::sin(turned));
        assert_eq!(
            flow_to_color(&a, Some(4.0)).to_u8(),
            flow_to_color(&b, Some(4.0)).to_u8()
        );
    }

    #[test]
    fn magnitude_changes_saturation_not_hue() {
        // Direction (1, 2) with magnitudes m and 2m, max_mag = 2m.
        let m = libm::sqrt(5.0);
        let wheel = color_wheel();
        let half = flow_to_color(&FlowField::constant(1, 1, 1.0, 2.0), Some(2.0 * m));
        let full = flow_to_color(&FlowField::constant(1, 1, 2.0, 4.0), Some(2.0 * m));
        let base = encode(&wheel, 1.0, 2.0, 1.0);
        for (c, b) in base.iter().enumerate() {
            // rad = 1/2 interpolates halfway between white and the wheel color.
            assert!((half.data()[c] - (1.0 - 0.5 * (1.0 - b))).abs() < 1e-12);
            assert!((full.data()[c] - b).abs() < 1e-12);
        }
        assert_ne!(half.data(), full.data());
    }

    #[test]
    fn wheel_has_standard_layout() {
        let w = color_wheel();
        assert_eq!(w.len(), 55);
        assert_eq!(w[0], [255.0, 0.0, 0.0]);
        assert_eq!(w[RY], [255.0, 255.0, 0.0]);
        assert_eq!(w[RY + YG], [0.0, 255.0, 0.0]);
    }

    proptest! {
        #[test]
        fn scale_invariant_bytes(
            u in prop::collection::vec(-20.0f64..20.0, 9),
            v in prop::collection::vec(-20.0f64..20.0, 9),
            exp in -4i32..6,
            max_mag in 0.5f64..30.0,
        ) {
            let s = libm::pow(2.0, exp as f64);
            let f = FlowField::from_components(3, 3, u, v).unwrap();
            let a = flow_to_color(&f, Some(max_mag)).to_u8();
            let b = flow_to_color(&f.scaled(s), Some(max_mag * s)).to_u8();
            prop_assert_eq!(a, b);
        }
    }
}
