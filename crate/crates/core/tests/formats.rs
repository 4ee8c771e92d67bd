use std::path::PathBuf;

use proptest::prelude::*;
use tsdetect::geom::{BBox, FrameDetections, SequenceDataset};
use tsdetect::io::{
    decode_weights, encode_weights, format_detections, read_detections, BoxKind, WeightMap,
    WEIGHTS_MAGIC,
};
use tsdetect::synth::{generate, SynthConfig};
use tsdetect::tensor::Tensor;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn arb_box() -> impl Strategy<Value = BBox> {
    (0.0..500.0f64, 0.0..500.0f64, 0.01..200.0f64, 0.01..200.0f64, 0.0..=1.0f64)
        .prop_map(|(x, y, w, h, s)| BBox::new(x, y, x + w, y + h, s).unwrap())
}

fn arb_dataset() -> impl Strategy<Value = SequenceDataset> {
    prop::collection::vec(
        (0u8..3, 0u32..4, prop::collection::vec(arb_box(), 0..5)),
        0..12,
    )
    .prop_map(|rows| {
        let mut next = [0u32; 3];
        let frames = rows
            .into_iter()
            .map(|(seq, gap, boxes)| {
                let idx = next[seq as usize] + gap;
                next[seq as usize] = idx + 1;
                FrameDetections::new(format!("seq{seq}"), idx, boxes)
            })
            .collect();
        SequenceDataset::new(frames)
    })
}

fn arb_weights() -> impl Strategy<Value = WeightMap> {
    prop::collection::btree_map(
        "[a-zA-Z0-9_.]{1,24}",
        prop::collection::vec(1usize..4, 1..4).prop_flat_map(|dims| {
            let n: usize = dims.iter().product();
            prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), n)
                .prop_map(move |vals| {
                    Tensor::new(dims.clone(), vals.into_iter().map(f64::from).collect()).unwrap()
                })
        }),
        0..6,
    )
}

proptest! {
    #[test]
    fn detections_text_is_canonical(ds in arb_dataset()) {
        let text = format_detections(&ds, BoxKind::Scored);
        let back = read_detections(text.as_bytes(), BoxKind::Scored).unwrap();
        prop_assert_eq!(format_detections(&back, BoxKind::Scored), text);
        prop_assert_eq!(back.len(), ds.len());
        for (a, b) in ds.frames.iter().zip(&back.frames) {
            prop_assert_eq!(a.key(), b.key());
            for (x, y) in a.boxes.iter().zip(&b.boxes) {
                for (u, v) in x.corners().iter().zip(y.corners()) {
                    prop_assert!((u - v).abs() <= 5e-7);
                }
                prop_assert!((x.score() - y.score()).abs() <= 5e-7);
            }
        }
    }

    #[test]
    fn weights_round_trip_bit_exact(map in arb_weights()) {
        let bytes = encode_weights(&map).unwrap();
        let back = decode_weights(&bytes).unwrap();
        prop_assert_eq!(&back, &map);
        prop_assert_eq!(encode_weights(&back).unwrap(), bytes);
    }
}

fn sample_container() -> (Vec<u8>, Vec<usize>) {
    // two entries; records the offsets of every structural byte
    let mut map = WeightMap::new();
    map.insert("weight".into(), Tensor::new(vec![1], vec![1.0]).unwrap());
    map.insert("x.b".into(), Tensor::new(vec![2, 3], vec![0.5; 6]).unwrap());
    let bytes = encode_weights(&map).unwrap();
    let mut structural: Vec<usize> = (0..WEIGHTS_MAGIC.len()).collect();
    let mut pos = WEIGHTS_MAGIC.len();
    for (name, t) in &map {
        let header = 2 + name.len() + 1 + 4 * t.rank();
        structural.extend([pos, pos + 1]);
        structural.push(pos + 2 + name.len());
        structural.extend(pos + 3 + name.len()..pos + header);
        pos += header + 4 * t.len();
    }
    assert_eq!(pos, bytes.len());
    (bytes, structural)
}

#[test]
fn single_byte_corruption_of_structure_is_rejected() {
    let (bytes, structural) = sample_container();
    assert!(decode_weights(&bytes).is_ok());
    let mut checked = 0;
    for &at in &structural {
        for value in 0..=255u8 {
            if value == bytes[at] {
                continue;
            }
            let mut m = bytes.clone();
            m[at] = value;
            assert!(
                decode_weights(&m).is_err(),
                "byte {at} set to {value:#04x} was accepted"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, structural.len() * 255);
}

#[test]
fn truncation_at_every_length_is_rejected() {
    let (bytes, _) = sample_container();
    for n in 0..bytes.len() {
        if n == WEIGHTS_MAGIC.len() {
            continue;
        }
        let r = decode_weights(&bytes[..n]);
        // cutting exactly between entries yields a valid shorter container
        let boundary = n == WEIGHTS_MAGIC.len() + 2 + 6 + 1 + 4 + 4;
        assert_eq!(r.is_ok(), boundary, "length {n}");
    }
}

fn golden_config() -> SynthConfig {
    SynthConfig {
        n_sequences: 2,
        n_frames: 30,
        image_w: 256,
        image_h: 192,
        start: [60.0, 100.0],
        velocity: [2.5, -1.0],
        size_range: [20.0, 44.0],
        occlusion_prob: 0.1,
        dropout_prob: 0.05,
        clutter_prob: 0.2,
        rho: 0.3,
        n_candidates: 4,
        seed: 42,
        ..SynthConfig::default()
    }
}

fn check_golden(name: &str, text: &str) {
    let path = fixture(name);
    if std::env::var_os("TSDETECT_BLESS").is_some() {
        std::fs::write(&path, text).unwrap();
    }
    let frozen = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, frozen, "{name} drifted; rerun with TSDETECT_BLESS=1 only if intended");
}

#[test]
fn synth_seed_42_matches_golden_files() {
    let (gt, cand) = generate(&golden_config()).unwrap();
    check_golden("synth_seed42_gt.txt", &format_detections(&gt, BoxKind::GroundTruth));
    check_golden("synth_seed42_cand.txt", &format_detections(&cand, BoxKind::Scored));
}

#[test]
fn golden_files_parse_to_the_generated_dataset() {
    let (gt, cand) = generate(&golden_config()).unwrap();
    let text = std::fs::read_to_string(fixture("synth_seed42_gt.txt")).unwrap();
    let parsed = read_detections(text.as_bytes(), BoxKind::GroundTruth).unwrap();
    assert_eq!(parsed.len(), gt.len());
    assert_eq!(
        format_detections(&parsed, BoxKind::GroundTruth),
        format_detections(&gt, BoxKind::GroundTruth)
    );
    let text = std::fs::read_to_string(fixture("synth_seed42_cand.txt")).unwrap();
    let parsed = read_detections(text.as_bytes(), BoxKind::Scored).unwrap();
    assert_eq!(parsed.num_boxes(), cand.num_boxes());
}
