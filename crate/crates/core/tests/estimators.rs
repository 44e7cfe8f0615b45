use flowfusion_core::estimate::{Frame, HornSchunck, HsParams, LkParams, LucasKanade, TwoFrameEstimator};
use flowfusion_core::image::{ImageBuffer, Mask};
use flowfusion_core::metrics::aepe;
use flowfusion_core::synth::{generate, Motion, SceneSpec};
use flowfusion_core::FlowField;

const SIZE: usize = 64;
const BORDER: usize = 6;

fn translated_pair(vx: f64, vy: f64, seed: u64) -> (ImageBuffer, ImageBuffer) {
    let mut spec = SceneSpec::new(SIZE, SIZE, 3);
    spec.background_seed = seed;
    spec.background_motion = Motion::ConstantVelocity { vx, vy };
    let s = generate(&spec, seed).unwrap();
    (s.frames[0].clone(), s.frames[1].clone())
}

fn interior(w: usize, h: usize) -> Mask {
    Mask::from_fn(w, h, |x, y| {
        x >= BORDER && y >= BORDER && x + BORDER < w && y + BORDER < h
    })
}

fn interior_aepe(flow: &FlowField, gt: &FlowField) -> f64 {
    aepe(flow, gt, Some(&interior(flow.width(), flow.height())))
        .unwrap()
        .unwrap()
}

fn estimators() -> Vec<Box<dyn TwoFrameEstimator>> {
    vec![Box::new(HornSchunck::default()), Box::new(LucasKanade::default())]
}

fn run(est: &dyn TwoFrameEstimator, a: &ImageBuffer, b: &ImageBuffer) -> FlowField {
    est.estimate(Frame::new(0, a), Frame::new(1, b)).unwrap()
}

#[test]
fn stationary_pair_gives_zero_flow() {
    let (a, _) = translated_pair(0.0, 0.0, 3);
    for est in estimators() {
        let f = run(est.as_ref(), &a, &a);
        let e = aepe(&f, &FlowField::zeros(SIZE, SIZE), None).unwrap().unwrap();
        println!("{} stationary aepe {e:.4}", est.name());
        assert!(e < 0.05, "{}: {e}", est.name());
    }
}

#[test]
fn one_pixel_translation() {
    let (a, b) = translated_pair(1.0, 0.0, 11);
    let gt = FlowField::constant(SIZE, SIZE, 1.0, 0.0);
    for est in estimators() {
        let f = run(est.as_ref(), &a, &b);
        let e = interior_aepe(&f, &gt);
        println!("{} 1px aepe {e:.4}", est.name());
        assert!(e < 0.3, "{}: {e}", est.name());
        assert!(f.is_finite());
    }
}

#[test]
fn subpixel_diagonal_translation() {
    let (a, b) = translated_pair(1.6, -0.7, 5);
    let gt = FlowField::constant(SIZE, SIZE, 1.6, -0.7);
    for est in estimators() {
        let e = interior_aepe(&run(est.as_ref(), &a, &b), &gt);
        println!("{} diag aepe {e:.4}", est.name());
        assert!(e < 0.3, "{}: {e}", est.name());
    }
}

#[test]
fn swapping_inputs_negates_flow() {
    let (a, b) = translated_pair(1.0, 0.5, 21);
    for est in estimators() {
        let fwd = run(est.as_ref(), &a, &b);
        let bwd = run(est.as_ref(), &b, &a);
        let e = interior_aepe(&bwd, &fwd.negated());
        println!("{} swap aepe {e:.4}", est.name());
        assert!(e < 0.3, "{}: {e}", est.name());
    }
}

#[test]
fn shift_equivariance() {
    // Shifting both frames by an integer translation shifts the estimate. The
    // shift is a multiple of the coarsest pyramid stride so levels stay aligned.
    let (a, b) = translated_pair(1.0, 0.0, 8);
    let shift = 8;
    let n = SIZE - shift;
    let crop = |img: &ImageBuffer, x0: usize| img.crop(x0, 0, n, SIZE).unwrap();
    for est in estimators() {
        let f0 = run(est.as_ref(), &crop(&a, 0), &crop(&b, 0));
        let f1 = run(est.as_ref(), &crop(&a, shift), &crop(&b, shift));
        // f1 at x corresponds to f0 at x + shift.
        let overlap = n - shift;
        let f0o = f0.crop(shift, 0, overlap, SIZE).unwrap();
        let f1o = f1.crop(0, 0, overlap, SIZE).unwrap();
        let e = interior_aepe(&f1o, &f0o);
        println!("{} shift-equivariance aepe {e:.4}", est.name());
        assert!(e < 0.1, "{}: {e}", est.name());
    }
}

#[test]
fn untextured_images() {
    let flat = ImageBuffer::filled(32, 32, 1, 0.4);
    let hs = run(&HornSchunck::default(), &flat, &flat);
    assert!(hs.u().iter().chain(hs.v()).all(|&x| x == 0.0));
    let lk = run(&LucasKanade::default(), &flat, &flat);
    assert_eq!(lk.valid().unwrap().count(), 0);
    assert!(lk.is_finite());
}

#[test]
fn lucas_kanade_flags_flat_region_only() {
    let (a, _) = translated_pair(0.0, 0.0, 2);
    // Flatten the left half.
    let img = ImageBuffer::from_fn(SIZE, SIZE, 1, |x, y, _| if x < SIZE / 2 { 0.5 } else { a.get(x, y, 0) });
    let f = run(&LucasKanade::default(), &img, &img);
    let valid = f.valid().unwrap();
    assert!(!valid.get(4, 30));
    assert!(valid.get(SIZE - 10, 30));
    // Textured pixels get zero flow.
    let (u, v) = f.at(SIZE - 10, 30);
    assert!(u.abs() < 1e-9 && v.abs() < 1e-9);
}

#[test]
fn deterministic_and_dimension_checked() {
    let (a, b) = translated_pair(0.5, 0.5, 13);
    for est in estimators() {
        assert_eq!(run(est.as_ref(), &a, &b), run(est.as_ref(), &a, &b));
        let small = ImageBuffer::new(10, 10, 1);
        assert!(est.estimate(Frame::new(0, &a), Frame::new(1, &small)).is_err());
    }
}

#[test]
fn invalid_parameters_rejected() {
    assert!(HornSchunck::new(HsParams {
        alpha: 0.0,
        ..Default::default()
    })
    .is_err());
    assert!(HornSchunck::new(HsParams {
        iterations: 0,
        ..Default::default()
    })
    .is_err());
    assert!(LucasKanade::new(LkParams {
        window_radius: 0,
        ..Default::default()
    })
    .is_err());
    assert!(LucasKanade::new(LkParams {
        min_eigen_threshold: -1.0,
        ..Default::default()
    })
    .is_err());
}

#[test]
fn rgb_inputs_are_accepted() {
    let mut spec = SceneSpec::new(48, 48, 3);
    spec.channels = 3;
    spec.background_motion = Motion::ConstantVelocity { vx: 1.0, vy: 0.0 };
    let s = generate(&spec, 4).unwrap();
    let f = run(&HornSchunck::default(), &s.frames[0], &s.frames[1]);
    assert_eq!(f.dims(), (48, 48));
    assert!(interior_aepe(&f, &s.gt_fwd[0]) < 0.3);
}
