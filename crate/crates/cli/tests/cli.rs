use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tsdetect::eval::{pair_frames, top1_mean_iou};
use tsdetect::io::{read_detections, BoxKind};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn tsdetect(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsdetect"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = tsdetect(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = tsdetect(dir, args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn report_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("{key} missing from\n{report}"))
        .parse()
        .unwrap()
}

#[test]
fn pac_on_empty_file_writes_empty_output() {
    let d = TempDir::new().unwrap();
    std::fs::write(d.path().join("empty.txt"), "").unwrap();
    ok(d.path(), &["postprocess", "--method", "pac", "--in", "empty.txt", "--out", "out.txt"]);
    assert_eq!(read(d.path(), "out.txt"), "");
}

#[test]
fn pac_equals_nms_when_theta_exceeds_every_iou() {
    let d = TempDir::new().unwrap();
    let input = fixture("disjoint.txt");
    let input = input.to_str().unwrap();
    ok(d.path(), &["postprocess", "--method", "pac", "--theta", "0.95", "--delta", "0.97", "--in", input, "--out", "pac.txt"]);
    ok(d.path(), &["postprocess", "--method", "nms", "--in", input, "--out", "nms.txt"]);
    assert_eq!(read(d.path(), "pac.txt"), read(d.path(), "nms.txt"));
}

#[test]
fn exit_codes() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    std::fs::write(p.join("empty.txt"), "").unwrap();
    std::fs::write(p.join("bad.txt"), "s 0 1 2 3\n").unwrap();

    assert_eq!(code(p, &["postprocess", "--method", "bogus", "--in", "empty.txt", "--out", "o"]).0, 2);
    assert_eq!(code(p, &["frobnicate"]).0, 2);
    assert_eq!(code(p, &["postprocess", "--method", "nms", "--theta", "0.5", "--in", "empty.txt", "--out", "o"]).0, 2);
    assert_eq!(code(p, &["postprocess", "--method", "pac", "--sigma", "0.5", "--in", "empty.txt", "--out", "o"]).0, 2);
    assert_eq!(code(p, &["postprocess", "--method", "pac", "--delta", "0.4", "--in", "empty.txt", "--out", "o"]).0, 2);
    assert_eq!(code(p, &["sweep-delta", "--in", "empty.txt", "--gt", "empty.txt", "--deltas", ""]).0, 2);

    let (c, err) = code(p, &["postprocess", "--method", "pac", "--in", "missing.txt", "--out", "o"]);
    assert_eq!(c, 1);
    assert!(err.contains("missing.txt"), "{err}");
    let (c, err) = code(p, &["postprocess", "--method", "pac", "--in", "bad.txt", "--out", "o"]);
    assert_eq!(c, 1);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn config_unknown_key_is_named() {
    let d = TempDir::new().unwrap();
    let cfg = fixture("bad_config.toml");
    let (c, err) = code(d.path(), &["--config", cfg.to_str().unwrap(), "synth", "--out-gt", "g", "--out-cand", "c"]);
    assert_eq!(c, 2);
    assert!(err.contains("frame_count"), "{err}");
}

#[test]
fn eval_identical_predictions_and_empty_predictions() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    std::fs::write(p.join("cfg.toml"), "[synth]\nn_frames = 40\nocclusion_prob = 0.2\n").unwrap();
    ok(p, &["--config", "cfg.toml", "synth", "--out-gt", "gt.txt", "--out-cand", "cand.txt"]);
    let gt = read_detections(read(p, "gt.txt").as_bytes(), BoxKind::GroundTruth).unwrap();
    let as_pred = tsdetect::io::format_detections(&gt, BoxKind::Scored);
    std::fs::write(p.join("perfect.txt"), as_pred).unwrap();
    let report = ok(p, &["eval", "--pred", "perfect.txt", "--gt", "gt.txt"]);
    for line in report.lines().filter(|l| l.starts_with("AP@0.")) {
        assert!(line.ends_with("\t1.000000"), "{line}");
    }

    std::fs::write(p.join("none.txt"), "").unwrap();
    let report = ok(p, &["eval", "--pred", "none.txt", "--gt", "gt.txt", "--negative"]);
    assert_eq!(report_value(&report, "recall"), 0.0);
    assert!(report.contains("false_positive_rate\t0.000000"));

    let (c, err) = code(p, &["eval", "--pred", "../nowhere.txt", "--gt", "gt.txt"]);
    assert_eq!(c, 1, "{err}");
}

#[test]
fn eval_sequence_mismatch_lists_ids() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    std::fs::write(p.join("gt.txt"), "a 0 0 0 5 5\n").unwrap();
    std::fs::write(p.join("pred.txt"), "zz 0 0 0 5 5 0.9\nyy 0\n").unwrap();
    let (c, err) = code(p, &["eval", "--pred", "pred.txt", "--gt", "gt.txt"]);
    assert_eq!(c, 1);
    assert!(err.contains("zz, yy"), "{err}");
}

#[test]
fn degraded_fixture_loses_ap_at_strict_thresholds() {
    let d = TempDir::new().unwrap();
    let (gt, pred) = (fixture("degraded_gt.txt"), fixture("degraded_pred.txt"));
    let report = ok(d.path(), &["eval", "--pred", pred.to_str().unwrap(), "--gt", gt.to_str().unwrap(), "--trace", "trace.tsv"]);
    let ap50 = report_value(&report, "AP_0.5");
    let ap75 = report_value(&report, "AP_0.75");
    assert!(ap50 > 0.9 && ap75 < 0.05 && ap50 > ap75, "{report}");
    let trace = read(d.path(), "trace.tsv");
    assert!(trace.starts_with("sequence\tframe\tn_gt\tn_hit\thits\n"));
}

#[test]
fn pac_improves_top1_iou_on_the_discrepancy_fixture() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(p, &["synth", "--out-gt", "gt.txt", "--out-cand", "cand.txt"]);
    ok(p, &["postprocess", "--method", "pac", "--in", "cand.txt", "--out", "pac.txt"]);
    ok(p, &["postprocess", "--method", "nms", "--in", "cand.txt", "--out", "nms.txt"]);
    let gt = read_detections(read(p, "gt.txt").as_bytes(), BoxKind::GroundTruth).unwrap();
    let top1 = |name: &str| {
        let ds = read_detections(read(p, name).as_bytes(), BoxKind::Scored).unwrap();
        top1_mean_iou(&pair_frames(&ds, &gt).unwrap()).unwrap()
    };
    let (pac, nms) = (top1("pac.txt"), top1("nms.txt"));
    assert!(pac - nms >= 0.0163, "pac {pac} nms {nms}");
}

#[test]
fn single_delta_sweep_equals_postprocess_then_eval() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(p, &["synth", "--seed", "21", "--out-gt", "gt.txt", "--out-cand", "cand.txt"]);
    for delta in ["0.6", "0.8"] {
        ok(p, &["sweep-delta", "--in", "cand.txt", "--gt", "gt.txt", "--deltas", delta, "--report-dir", "rep"]);
        ok(p, &["postprocess", "--method", "pac", "--delta", delta, "--in", "cand.txt", "--out", "pp.txt"]);
        let direct = ok(p, &["eval", "--pred", "pp.txt", "--gt", "gt.txt"]);
        assert_eq!(read(p, &format!("rep/report_delta_{delta}0.tsv")), direct);
    }
}

#[test]
fn duplicate_deltas_are_dropped_with_a_warning() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(p, &["synth", "--out-gt", "gt.txt", "--out-cand", "cand.txt"]);
    let out = tsdetect(p, &["sweep-delta", "--in", "cand.txt", "--gt", "gt.txt", "--deltas", "0.8,0.7,0.80"]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate delta 0.8"));
}

#[test]
fn softnms_keeps_every_box() {
    let d = TempDir::new().unwrap();
    let input = fixture("disjoint.txt");
    ok(d.path(), &["postprocess", "--method", "softnms", "--in", input.to_str().unwrap(), "--out", "s.txt"]);
    let ds = read_detections(read(d.path(), "s.txt").as_bytes(), BoxKind::Scored).unwrap();
    assert_eq!(ds.num_boxes(), 7);
}

#[test]
fn temporal_demo_zero_weights_give_zero_summaries() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(p, &["init-weights", "--zero", "--out", "zero.tsdw"]);
    let text = ok(p, &["temporal-demo", "--weights", "zero.tsdw", "--n-frames", "5"]);
    let rows: Vec<&str> = text.lines().filter(|l| l.contains("\thqim\t")).collect();
    assert_eq!(rows.len(), 5 * 4);
    assert!(rows.iter().all(|r| r.ends_with("\t0.000000\t0.000000")), "{text}");
    assert!(text.contains("reduction invariant holds"));
}

#[test]
fn temporal_demo_k1_and_zero_calibration() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(p, &["init-weights", "--zero-calibration", "--seed", "4", "--k", "1", "--out", "w.tsdw"]);
    let text = ok(p, &["temporal-demo", "--weights", "w.tsdw", "--k", "1", "--n-frames", "3"]);
    assert!(text.starts_with("# frames 3 k 1 channels 4\n"));
    assert!(text.contains("reduction invariant holds"));
    assert_eq!(text.lines().filter(|l| l.starts_with("2\t")).count(), 8);
}

#[test]
fn temporal_demo_lists_missing_weights() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(p, &["init-weights", "--k", "2", "--out", "w.tsdw"]);
    let (c, err) = code(p, &["temporal-demo", "--weights", "w.tsdw", "--k", "4"]);
    assert_eq!(c, 1);
    for name in ["hqim.acc.reducer2.weight", "hqim.acc.reducer5.bias"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn temporal_demo_seeded_golden_summary() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(p, &["init-weights", "--seed", "3", "--out", "w.tsdw"]);
    let text = ok(p, &["temporal-demo", "--weights", "w.tsdw", "--n-frames", "6", "--size", "16x16"]);
    let golden = fixture("temporal_seed3_summary.tsv");
    if std::env::var_os("TSDETECT_BLESS").is_some() {
        std::fs::write(&golden, &text).unwrap();
    }
    assert_eq!(text, std::fs::read_to_string(golden).unwrap());
    assert!(!text.contains("reduction invariant"));
}

#[test]
fn threads_env_is_validated() {
    let d = TempDir::new().unwrap();
    std::fs::write(d.path().join("e.txt"), "").unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_tsdetect"))
        .args(["postprocess", "--method", "nms", "--in", "e.txt", "--out", "o.txt"])
        .env("TSDETECT_THREADS", "lots")
        .current_dir(d.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));
    let status = Command::new(env!("CARGO_BIN_EXE_tsdetect"))
        .args(["postprocess", "--method", "nms", "--in", "e.txt", "--out", "o.txt"])
        .env("TSDETECT_THREADS", "2")
        .current_dir(d.path())
        .status()
        .unwrap();
    assert!(status.success());
}
