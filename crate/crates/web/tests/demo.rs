use tsdetect::geom::BBox;
use tsdetect::pac::{pac_select, PacParams};
use tsdetect_web::*;

#[test]
fn frame_view_matches_core_selection() {
    let req = FrameRequest::default();
    let v = frame_view(&req).unwrap();
    assert_eq!(v.candidates.len(), 8);
    assert!(!v.pac_kept.is_empty() && !v.nms_kept.is_empty());
    for c in &v.candidates {
        assert!((0.0..=1.0).contains(&c.corrected));
        let expect = (c.score + c.enhancement - c.suppression).clamp(0.0, 1.0);
        assert!((c.corrected - expect).abs() < 1e-12);
    }
    let boxes: Vec<BBox> = v
        .candidates
        .iter()
        .map(|c| BBox::new(c.corners[0], c.corners[1], c.corners[2], c.corners[3], c.score).unwrap())
        .collect();
    let kept = pac_select(&boxes, &PacParams::default());
    assert_eq!(kept.len(), v.pac_kept.len());
    for (k, &i) in kept.iter().zip(&v.pac_kept) {
        assert_eq!(k.corners(), boxes[i].corners());
    }
}

#[test]
fn json_defaults_and_errors() {
    let text = frame_view_json("").unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["candidates"].as_array().unwrap().len(), 8);
    assert_eq!(frame_view_json("{}").unwrap(), text);
    assert!(frame_view_json(r#"{"delta": 0.3}"#).unwrap_err().contains("delta"));
    assert!(frame_view_json(r#"{"bogus": 1}"#).unwrap_err().contains("bogus"));
    assert!(delta_sweep_json(r#"{"deltas": [1.5]}"#).is_err());
}

#[test]
fn curve_has_one_point_per_rho() {
    let req = CurveRequest {
        rhos: vec![-1.0, 0.0, 1.0],
        n_frames: 60,
        ..CurveRequest::default()
    };
    let pts = discrepancy_curve(&req).unwrap();
    assert_eq!(pts.iter().map(|p| p.rho).collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
    for p in &pts {
        assert!((0.0..=1.0).contains(&p.discrepancy));
        assert!(p.pac_top1_iou > 0.0 && p.nms_top1_iou > 0.0);
    }
    // perfectly correlated scores leave no frame where the top box is not the best
    assert_eq!(pts[2].discrepancy, 0.0);
    assert!(pts[0].discrepancy > pts[1].discrepancy);
}

#[test]
fn sweep_starts_with_baseline() {
    let req = SweepRequest {
        deltas: vec![0.6, 0.9],
        n_frames: 60,
        ..SweepRequest::default()
    };
    let rows = delta_sweep(&req).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].delta, None);
    assert_eq!(rows[1].delta, Some(0.6));
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.ap50));
        assert!(r.ap75 <= r.ap50 + 1e-12);
    }
    let text = delta_sweep_json(r#"{"deltas": [0.6, 0.9], "n_frames": 60}"#).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v[0]["delta"].is_null());
}
