use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsdetect::geom::{iou, BBox};
use tsdetect::pac::{build_graph, classical_nms, corrections, pac_select, PacParams};

fn top_iou(selected: &[BBox], gt: &BBox) -> f64 {
    iou(&selected[0], gt)
}

/// Searches random 4-box clusters for one where the best-localised box has
/// the second-highest raw score and gains enough from its low neighbours to
/// overtake a top-scored box that has none.
fn find_cluster(params: &PacParams) -> Option<(Vec<BBox>, BBox)> {
    let gt = BBox::gt(100.0, 100.0, 200.0, 200.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200_000 {
        let boxes: Vec<BBox> = (0..4)
            .map(|_| {
                let j: Vec<f64> = (0..4).map(|_| rng.random_range(-12.0..12.0)).collect();
                BBox::new(100.0 + j[0], 100.0 + j[1], 200.0 + j[2], 200.0 + j[3], rng.random()).unwrap()
            })
            .collect();
        let mut by_score: Vec<usize> = (0..4).collect();
        by_score.sort_by(|&a, &b| boxes[b].score().total_cmp(&boxes[a].score()));
        let best_iou = (0..4)
            .max_by(|&a, &b| iou(&boxes[a], &gt).total_cmp(&iou(&boxes[b], &gt)))
            .unwrap();
        if best_iou != by_score[1] {
            continue;
        }
        let g = build_graph(&boxes, params.theta()).unwrap();
        let corr = corrections(&g, params.delta()).unwrap();
        let top = by_score[0];
        if corr[top].enhancement != 0.0 || corr[best_iou].enhancement == 0.0 {
            continue;
        }
        let pac = pac_select(&boxes, params);
        let nms = classical_nms(&boxes, params.nms_iou());
        if pac[0].corners() == boxes[best_iou].corners() && nms[0].corners() == boxes[top].corners() {
            return Some((boxes, gt));
        }
    }
    None
}

#[test]
fn pac_prefers_the_well_localised_box_in_a_constructed_cluster() {
    let params = PacParams::default();
    let (boxes, gt) = find_cluster(&params).expect("a separating cluster exists");
    let pac = pac_select(&boxes, &params);
    let nms = classical_nms(&boxes, params.nms_iou());
    assert!(top_iou(&pac, &gt) > top_iou(&nms, &gt));
}
