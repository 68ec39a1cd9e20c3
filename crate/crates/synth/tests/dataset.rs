use rppg_core::train::{load_dataset, save_dataset, Split};
use rppg_synth::dataset::{clip_windows, derivative_target};
use rppg_synth::io::{export_rgb24, load_clip, save_clip};
use rppg_synth::{make_dataset, render_clip, SynthParams};

#[test]
fn thirty_seconds_give_89_windows_of_10() {
    let mut p = SynthParams::new(30.0, 30.0);
    p.height = 36;
    p.width = 36;
    let w = make_dataset(&[p], 10, 36).unwrap();
    assert_eq!(w.len(), 89);
    for x in &w {
        assert_eq!(x.motion.dims(), &[10, 36, 36, 3]);
        assert_eq!(x.raw.dims(), &[10, 36, 36, 3]);
        assert_eq!((x.bvp.len(), x.resp.len()), (10, 10));
    }
}

#[test]
fn targets_are_aligned_differences() {
    let x = [0.0, 1.0, 3.0, 6.0, 10.0];
    let d = derivative_target(&x);
    // differences 1, 2, 3, 4: mean 2.5, sd √1.25
    let sd = 1.25f64.sqrt();
    for (i, v) in d.iter().enumerate() {
        assert!((*v as f64 - ((i + 1) as f64 - 2.5) / sd).abs() < 1e-6);
    }
}

#[test]
fn short_clip_is_rejected() {
    let r = render_clip(&SynthParams::new(30.0, 0.3)).unwrap();
    assert!(clip_windows(&r, 10, 36).is_err());
}

#[test]
fn dataset_round_trip_is_bitwise() {
    let w = make_dataset(&[SynthParams::new(30.0, 2.0)], 10, 36).unwrap();
    let split: Vec<_> = w
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, x)| {
            (
                x,
                if i % 2 == 0 {
                    Split::Train
                } else {
                    Split::Test
                },
            )
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &split).unwrap();
    let (_, train) = load_dataset(dir.path(), Split::Train).unwrap();
    let expect: Vec<_> = w.iter().step_by(2).cloned().collect();
    assert_eq!(train.len(), expect.len());
    for (a, b) in train.iter().zip(&expect) {
        assert!(a.motion.bitwise_eq(&b.motion) && a.raw.bitwise_eq(&b.raw));
        assert_eq!(a.bvp, b.bvp);
        assert_eq!(a.resp, b.resp);
    }
}

#[test]
fn clip_files_round_trip() {
    let p = SynthParams::new(30.0, 1.0);
    let r = render_clip(&p).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.vtf");
    save_clip(&path, &r, &p).unwrap();
    let (back, q) = load_clip(&path).unwrap();
    assert_eq!(q, p);
    assert!(back.clip.frames.bitwise_eq(&r.clip.frames));
    assert!(back.mask.bitwise_eq(&r.mask));
    assert_eq!(back.truth, r.truth);

    let raw = dir.path().join("clip.rgb");
    export_rgb24(&r.clip, &raw).unwrap();
    assert_eq!(std::fs::metadata(&raw).unwrap().len(), 30 * 72 * 72 * 3);
}
