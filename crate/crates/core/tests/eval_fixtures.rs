use tsdetect::eval::{ap_at, evaluate, pair_frames, EvalConfig};
use tsdetect::geom::BBox;
use tsdetect::synth::{generate_ground_truth, SynthConfig};

/// Shifts `b` right so that its IoU with the original equals `t`.
fn shift_to_iou(b: &BBox, t: f64, score: f64) -> BBox {
    let d = b.width() * (1.0 - t) / (1.0 + t);
    BBox::new(b.x1() + d, b.y1(), b.x2() + d, b.y2(), score).unwrap()
}

#[test]
fn degraded_localisation_keeps_ap50_and_loses_ap75() {
    let cfg = SynthConfig {
        n_frames: 200,
        seed: 3,
        ..SynthConfig::default()
    };
    let gt = generate_ground_truth(&cfg).unwrap();
    let preds = gt.map_frames(|bs| {
        bs.iter()
            .enumerate()
            .map(|(i, b)| shift_to_iou(b, 0.6, 0.9 - 0.01 * i as f64))
            .collect()
    });
    let pairs = pair_frames(&preds, &gt).unwrap();
    let r = evaluate(&preds, &gt, &EvalConfig::default()).unwrap();
    assert!((r.ap50 - 1.0).abs() < 1e-12);
    assert_eq!(r.ap75, 0.0);
    let mut prev = f64::INFINITY;
    for (t, ap) in &r.ap_per_threshold {
        assert!(*ap <= prev, "AP rose at {t}");
        prev = *ap;
    }
    assert!(ap_at(&pairs, 0.55, None).unwrap() > 0.99);
    assert_eq!(ap_at(&pairs, 0.65, None).unwrap(), 0.0);
}

#[test]
fn identical_predictions_score_one_everywhere() {
    let gt = generate_ground_truth(&SynthConfig { n_frames: 50, ..SynthConfig::default() }).unwrap();
    let r = evaluate(&gt, &gt, &EvalConfig::default()).unwrap();
    assert!(r.ap_per_threshold.iter().all(|&(_, ap)| ap == 1.0));
    assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
}
