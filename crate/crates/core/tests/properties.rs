use proptest::prelude::*;
use rppg_core::model::{
    build_model, forward, Arch, ModelSpec, ShiftPolicy, WeightSet, WindowInput,
};
use rppg_core::ops::{avg_pool, conv2d, conv3d, PoolWindow};
use rppg_core::rng;
use rppg_core::tensor::Tensor;
use rppg_core::tsm::{
    apply_mask, attention_mask, temporal_shift, temporal_shift_adjoint, ShiftSpec,
};

fn tensor(dims: &[usize], seed: u64) -> Tensor<f64> {
    let mut r = rng::seeded(seed);
    Tensor::from_fn(dims, |_| rng::uniform(&mut r, -1.0, 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv2d_is_linear_in_input(t in 1usize..3, h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
        let x = tensor(&[t, h, w, 2], seed);
        let y = tensor(&[t, h, w, 2], seed ^ 1);
        let k = tensor(&[3, 3, 2, 3], seed ^ 2);
        let zero = Tensor::zeros(&[3]);
        let sum = Tensor::new(x.dims().to_vec(), x.data().iter().zip(y.data()).map(|(a, b)| 2.0 * a - b).collect()).unwrap();
        let lhs = conv2d(&sum, &k, &zero).unwrap();
        let (cx, cy) = (conv2d(&x, &k, &zero).unwrap(), conv2d(&y, &k, &zero).unwrap());
        for i in 0..lhs.len() {
            prop_assert!((lhs.data()[i] - (2.0 * cx.data()[i] - cy.data()[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn conv3d_with_flat_kernel_is_conv2d(t in 1usize..5, h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
        let x = tensor(&[t, h, w, 2], seed);
        let k2 = tensor(&[3, 3, 2, 2], seed ^ 3);
        let b = tensor(&[2], seed ^ 4);
        let mut k3 = Tensor::zeros(&[3, 3, 3, 2, 2]);
        let slab = k2.len();
        k3.data_mut()[slab..2 * slab].copy_from_slice(k2.data());
        let a = conv2d(&x, &k2, &b).unwrap();
        let c = conv3d(&x, &k3, &b).unwrap();
        for (p, q) in a.data().iter().zip(c.data()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn pooling_inverts_block_upsampling(t in 1usize..3, h in 1usize..5, w in 1usize..5, seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let small = Tensor::from_fn(&[2 * t, h, w, 2], |_| rand::Rng::random_range(&mut r, -64i32..64) as f64 / 8.0);
        let big = Tensor::from_fn(&[2 * t, 2 * h, 2 * w, 2], |i| {
            let c = i % 2;
            let x = (i / 2) % (2 * w);
            let y = (i / 2 / (2 * w)) % (2 * h);
            let f = i / 2 / (2 * w) / (2 * h);
            small.at(&[f, y / 2, x / 2, c])
        });
        prop_assert!(avg_pool(&big, PoolWindow::Spatial).unwrap().bitwise_eq(&small));
    }

    #[test]
    fn attention_mask_sums_to_half_the_positions(
        t in 1usize..4, h in 1usize..8, w in 1usize..8, cin in 1usize..5, seed in any::<u64>(),
    ) {
        let xa = tensor(&[t, h, w, cin], seed);
        let omega = tensor(&[1, 1, cin, 1], seed ^ 5).map(|v| 3.0 * v);
        let bias = tensor(&[1], seed ^ 6);
        let m = attention_mask(&xa, &omega, &bias).unwrap();
        let hw = (h * w) as f64;
        for f in 0..t {
            let s: f64 = m.slice_outer(f).data().iter().sum();
            prop_assert!((s / (hw / 2.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_then_unshift_restores_interior_frames(
        windows in 1usize..3, len in 2usize..6, c in 1usize..8, seed in any::<u64>(),
    ) {
        let x = tensor(&[windows * len, 2, 2, c], seed);
        let spec = ShiftSpec::thirds(c, len);
        let back = temporal_shift_adjoint(&temporal_shift(&x, &spec).unwrap(), &spec).unwrap();
        for f in 0..windows * len {
            let pos = f % len;
            for p in 0..4 {
                for ch in 0..c {
                    let idx = (f * 4 + p) * c + ch;
                    // advanced channels never deliver frame 0, delayed ones the last frame
                    let lost = (ch < spec.left_chunk && pos == 0)
                        || (ch >= spec.left_chunk && ch < spec.left_chunk + spec.right_chunk && pos == len - 1);
                    let want = if lost { 0.0 } else { x.data()[idx] };
                    prop_assert_eq!(back.data()[idx].to_bits(), want.to_bits());
                }
            }
        }
    }

    #[test]
    fn single_frame_mask_broadcasts(t in 1usize..4, seed in any::<u64>()) {
        let x = tensor(&[t, 3, 3, 2], seed);
        let m = tensor(&[1, 3, 3, 1], seed ^ 7);
        let y = apply_mask(&x, &m).unwrap();
        for i in 0..x.len() {
            let p = (i / 2) % 9;
            prop_assert_eq!(y.data()[i], x.data()[i] * m.data()[p]);
        }
    }
}

#[test]
fn zero_weight_mask_is_exactly_one_half() {
    let xa = tensor(&[2, 5, 7, 3], 9);
    let m = attention_mask(&xa, &Tensor::zeros(&[1, 1, 3, 1]), &Tensor::zeros(&[1])).unwrap();
    assert!(m.data().iter().all(|&v| v == 0.5));
}

fn small(arch: Arch) -> ModelSpec {
    ModelSpec {
        input_size: 8,
        filters: [3, 3, 6, 6],
        hidden: 5,
        window_len: 4,
        ..ModelSpec::new(arch)
    }
}

#[test]
fn tscan_adds_no_parameters() {
    for mt in [false, true] {
        let t = ModelSpec::new(Arch::Tscan).multi_task(mt);
        let c = ModelSpec::new(Arch::Can2d).multi_task(mt);
        assert_eq!(t.param_count(), c.param_count());
        assert_eq!(t.param_shapes(), c.param_shapes());
    }
}

#[test]
fn unshifted_tscan_reproduces_can2d_with_averaged_appearance() {
    // can2d with every appearance frame equal to the window mean sees the
    // same per-frame masks as tscan's single averaged frame
    let mut tscan = small(Arch::Tscan);
    tscan.shift = ShiftPolicy::Disabled;
    let can2d = small(Arch::Can2d);
    let w: WeightSet<f32> = build_model(&tscan, 4).unwrap();
    let s = tscan.input_size;
    let motion = tensor(&[4, s, s, 3], 1).cast::<f32>();
    let raw = tensor(&[4, s, s, 3], 2).cast::<f32>();
    let mean = raw.mean_outer();
    let repeated = Tensor::stack(&vec![mean.clone(); 4]).unwrap();
    let a = forward(
        &tscan,
        &w,
        &WindowInput::from_frames(Arch::Tscan, motion.clone(), &raw),
        false,
        0,
    )
    .unwrap();
    let b = forward(
        &can2d,
        &w,
        &WindowInput {
            motion,
            appearance: repeated,
        },
        false,
        0,
    )
    .unwrap();
    assert_eq!(
        a.bvp.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.bvp.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn duplicated_heads_agree_exactly() {
    let spec = small(Arch::Tscan).multi_task(true);
    let mut w = build_model(&spec, 8).unwrap();
    for part in ["fc1.w", "fc1.b", "fc2.w", "fc2.b"] {
        let t = w.get(&format!("bvp.{part}")).unwrap().clone();
        w.insert(format!("resp.{part}"), t);
    }
    let s = spec.input_size;
    let raw = tensor(&[4, s, s, 3], 3).cast::<f32>();
    let input = WindowInput::from_frames(spec.arch, tensor(&[4, s, s, 3], 4).cast(), &raw);
    let out = forward(&spec, &w, &input, false, 0).unwrap();
    assert_eq!(out.bvp, out.resp.unwrap());
}
