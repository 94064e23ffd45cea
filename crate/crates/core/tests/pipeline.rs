mod common;

use common::*;
use flowmask::metrics::{fmt_real, SummaryTable, REPORT_CSV_HEADER};
use flowmask::synthetic::ScheduledArtifact;
use flowmask::*;

fn rect(w: usize, h: usize) -> Shape {
    Shape::Rectangle { width: w, height: h }
}

fn scene(background: Velocity, artifacts: Vec<ScheduledArtifact>) -> SceneSpec {
    SceneSpec {
        width: 48,
        height: 32,
        background_velocity: background,
        sprites: vec![Sprite {
            shape: rect(8, 6),
            position: (4, 10),
            velocity: Velocity::new(2, 0),
            intensity: None,
        }],
        frame_count: 8,
        artifact_schedule: artifacts,
        noise_amplitude: 40,
    }
}

fn flow_masks(clip: &SyntheticClip, t: f64) -> Vec<BinaryMask> {
    let p = MagnitudeParams::new(t).unwrap();
    clip.true_flows.iter().map(|f| magnitude_method(f, p)).collect()
}

fn paired_segs(clip: &SyntheticClip) -> Vec<BinaryMask> {
    let mut segs = clip.segmentation_masks();
    segs.truncate(clip.true_flows.len());
    segs
}

#[test]
fn static_background_rectangle_is_recovered() {
    let clip = render_clip(&scene(Velocity::ZERO, vec![]), 1).unwrap();
    assert_eq!(clip.frames.len(), 8);
    assert_eq!(clip.true_flows.len(), 7);
    for (i, f) in clip.true_flows.iter().enumerate() {
        let x0 = 4 + 2 * i;
        let expected = BinaryMask::from_fn(48, 32, |x, y| (x0..x0 + 8).contains(&x) && (10..16).contains(&y)).unwrap();
        for y in 0..32 {
            for x in 0..48 {
                let want = if expected.get(x, y) { [2.0, 0.0] } else { [0.0, 0.0] };
                assert_eq!(f.get(x, y), want, "frame {i} ({x},{y})");
            }
        }
        assert_eq!(magnitude_method(f, MagnitudeParams::default()), expected);
        assert_eq!(clip.true_masks[i], expected);
    }
}

#[test]
fn frames_translate_exactly() {
    let mut spec = scene(Velocity::ZERO, vec![]);
    spec.background_velocity = Velocity::new(1, 0);
    spec.sprites.clear();
    let clip = render_clip(&spec, 4).unwrap();
    for i in 0..clip.frames.len() - 1 {
        let (a, b) = (&clip.frames[i], &clip.frames[i + 1]);
        for y in 0..32 {
            for x in 0..47 {
                assert_eq!(a.get(x, y), b.get(x + 1, y));
            }
        }
    }
}

#[test]
fn rendering_is_deterministic_per_seed() {
    let spec = scene(Velocity::ZERO, vec![]);
    assert_eq!(render_clip(&spec, 9).unwrap(), render_clip(&spec, 9).unwrap());
    assert_ne!(render_clip(&spec, 9).unwrap().frames, render_clip(&spec, 10).unwrap().frames);
}

#[test]
fn pipeline_identity_without_artifacts() {
    let clip = render_clip(&scene(Velocity::ZERO, vec![]), 2).unwrap();
    for t in [0.5, 1.0, 1.9] {
        let report = evaluate_clip("id", &flow_masks(&clip, t), &paired_segs(&clip)).unwrap();
        assert!(report.frames.iter().all(|f| f.loss == 0.0));
        assert_eq!(report.average_loss, 0.0);
    }
}

#[test]
fn scheduled_artifact_yields_one_region_on_its_frame() {
    let blob = ScheduledArtifact {
        frame_index: 3,
        shape: Shape::Disc { radius: 2 },
        position: (40, 4),
    };
    let clip = render_clip(&scene(Velocity::ZERO, vec![blob]), 3).unwrap();
    let truths = flow_masks(&clip, 1.0);
    for (i, (truth, seg)) in truths.iter().zip(paired_segs(&clip)).enumerate() {
        let regions = artifact_candidates(&seg, truth, 1, Connectivity::Eight).unwrap();
        if i == 3 {
            assert_eq!(regions.len(), 1);
            assert_eq!(regions[0].area, 13);
            assert_eq!(regions[0].centroid, (40.0, 4.0));
        } else {
            assert!(regions.is_empty(), "frame {i}: {regions:?}");
        }
    }
}

#[test]
fn closed_form_artifact_loss() {
    let sprite_area = 8 * 6;
    for (shape, frame) in [(rect(3, 3), 0), (Shape::Disc { radius: 3 }, 5), (rect(10, 2), 2)] {
        let a = shape.area();
        let art = ScheduledArtifact {
            frame_index: frame,
            shape,
            position: (34, 22),
        };
        let clip = render_clip(&scene(Velocity::ZERO, vec![art]), 5).unwrap();
        let report = evaluate_clip("a", &flow_masks(&clip, 1.0), &paired_segs(&clip)).unwrap();
        for f in &report.frames {
            if f.frame_index == frame {
                assert_eq!((f.counts.tp, f.counts.fp, f.counts.fn_), (sprite_area, a as u64, 0));
                assert_eq!(f.loss, 1.0 - sprite_area as f64 / (sprite_area + a as u64) as f64);
                assert!((f.loss - a as f64 / (sprite_area as f64 + a as f64)).abs() < 1e-15);
            } else {
                assert_eq!(f.loss, 0.0);
            }
        }
    }
}

#[test]
fn moving_background_floods_the_flow_mask() {
    let still = render_clip(&scene(Velocity::ZERO, vec![]), 6).unwrap();
    let moving = render_clip(&scene(Velocity::new(2, 0), vec![]), 6).unwrap();
    let r_still = evaluate_clip("s", &flow_masks(&still, 1.0), &paired_segs(&still)).unwrap();
    let r_moving = evaluate_clip("m", &flow_masks(&moving, 1.0), &paired_segs(&moving)).unwrap();
    assert!(r_moving.average_loss > r_still.average_loss);
    for m in flow_masks(&moving, 1.0) {
        assert_eq!(m.count(), 48 * 32);
    }
    // Ground truth still marks only the sprite, so the detector output would
    // have scored perfectly against it.
    let ideal = evaluate_clip("t", &moving.true_masks[..7], &paired_segs(&moving)).unwrap();
    assert_eq!(ideal.average_loss, 0.0);
}

#[test]
fn evaluate_clip_matches_independent_recount() {
    let mut r = rng(17);
    let truths: Vec<BinaryMask> = (0..5).map(|_| random_mask(&mut r, 20, 12, 0.4)).collect();
    let segs: Vec<BinaryMask> = (0..5).map(|_| random_mask(&mut r, 20, 12, 0.3)).collect();
    let report = evaluate_clip("five", &truths, &segs).unwrap();
    let mut sum_loss = 0.0;
    let mut sum_iou = 0.0;
    for (i, f) in report.frames.iter().enumerate() {
        let (tp, fp, tn, fnn) = naive_confusion(&truths[i], &segs[i]);
        assert_eq!((f.counts.tp, f.counts.fp, f.counts.tn, f.counts.fn_), (tp, fp, tn, fnn));
        let i_naive = naive_iou(&truths[i], &segs[i]);
        assert_eq!(f.iou, i_naive);
        assert_eq!(f.loss, 1.0 - i_naive);
        sum_loss += 1.0 - i_naive;
        sum_iou += i_naive;
    }
    assert_eq!(report.average_loss, sum_loss / 5.0);
    assert_eq!(report.average_iou, sum_iou / 5.0);
}

#[test]
fn evaluate_clip_errors() {
    let m = BinaryMask::empty(4, 4).unwrap();
    let other = BinaryMask::empty(4, 5).unwrap();
    assert!(matches!(evaluate_clip("e", &[], &[]), Err(Error::EmptyClip)));
    assert!(matches!(evaluate_clip("e", std::slice::from_ref(&m), &[]), Err(Error::LengthMismatch { .. })));
    assert!(matches!(evaluate_clip("e", &[m], &[other]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn averages_of_point_two_and_point_four() {
    // tp=4, fp=1 -> IOU 0.8; tp=3, fp=2 -> IOU 0.6.
    let truth_a = BinaryMask::new(5, 1, vec![true, true, true, true, false]).unwrap();
    let seg_a = BinaryMask::full(5, 1).unwrap();
    let truth_b = BinaryMask::new(5, 1, vec![true, true, true, false, false]).unwrap();
    let report = evaluate_clip("two", &[truth_a, truth_b], &[seg_a.clone(), seg_a]).unwrap();
    assert!((report.frames[0].loss - 0.2).abs() < 1e-15);
    assert!((report.frames[1].loss - 0.4).abs() < 1e-15);
    assert!((report.average_loss - 0.3).abs() < 1e-15);
}

fn crafted_sweep_clip() -> (Vec<FlowField>, Vec<BinaryMask>) {
    let mags = [[0.0, 0.5, 1.0, 1.5], [2.0, 2.5, 3.0, 0.0], [0.7, 1.2, 0.0, 4.0], [0.0, 0.0, 2.2, 0.9]];
    let f0 = FlowField::from_fn(4, 4, |x, y| [mags[y][x], 0.0]).unwrap();
    let f1 = FlowField::from_fn(4, 4, |x, y| [0.0, -mags[x][y]]).unwrap();
    let f2 = FlowField::from_fn(4, 4, |x, y| {
        let m = mags[3 - y][x];
        [0.6 * m, 0.8 * m]
    })
    .unwrap();
    let seg = |bits: [u8; 16]| BinaryMask::new(4, 4, bits.iter().map(|&b| b == 1).collect()).unwrap();
    let segs = vec![
        seg([0, 0, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0]),
        seg([1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
        BinaryMask::empty(4, 4).unwrap(),
    ];
    (vec![f0, f1, f2], segs)
}

#[test]
fn sweep_matches_brute_force() {
    let (flows, segs) = crafted_sweep_clip();
    let thresholds = [0.0, 1.0, 2.4];
    let rows = threshold_sweep(&flows, &segs, &thresholds).unwrap();
    assert_eq!(rows.len(), 3);
    for (row, &t) in rows.iter().zip(&thresholds) {
        assert_eq!(row.threshold, t);
        let mut ious = Vec::new();
        for (f, s) in flows.iter().zip(&segs) {
            let truth = BinaryMask::from_fn(4, 4, |x, y| {
                let [u, v] = f.get(x, y);
                ((u as f64).powi(2) + (v as f64).powi(2)).sqrt() > t
            })
            .unwrap();
            ious.push(naive_iou(&truth, s));
        }
        let avg_iou = ious.iter().sum::<f64>() / 3.0;
        let avg_loss = ious.iter().map(|i| 1.0 - i).sum::<f64>() / 3.0;
        assert!((row.average_iou - avg_iou).abs() < 1e-12, "t={t}");
        assert!((row.average_loss - avg_loss).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn sweep_edge_cases() {
    let (flows, segs) = crafted_sweep_clip();
    let huge = threshold_sweep(&flows[..1], &segs[..1], &[0.0, 1e6]).unwrap();
    assert_eq!(huge[1].average_loss, 1.0);
    assert!(threshold_sweep(&flows, &segs, &[]).is_err());
    assert!(matches!(threshold_sweep(&flows, &segs[..2], &[1.0]), Err(Error::LengthMismatch { .. })));
    let perfect = magnitude_method(&flows[0], MagnitudeParams::new(1.0).unwrap());
    let row = &threshold_sweep(&flows[..1], &[perfect], &[1.0]).unwrap()[0];
    assert_eq!((row.average_loss, row.average_iou), (0.0, 1.0));
}

fn parse_csv(bytes: &[u8]) -> Vec<Vec<String>> {
    std::str::from_utf8(bytes)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn report_csv_parses_back() {
    let mut r = rng(23);
    let truths: Vec<BinaryMask> = (0..6).map(|_| random_mask(&mut r, 9, 7, 0.5)).collect();
    let segs: Vec<BinaryMask> = (0..6).map(|_| random_mask(&mut r, 9, 7, 0.5)).collect();
    let report = evaluate_clip("csv", &truths, &segs).unwrap();
    let rows = parse_csv(&write_report_csv(&report));
    assert_eq!(rows[0].join(","), REPORT_CSV_HEADER);
    assert_eq!(rows.len(), 1 + 6 + 1);
    let mut loss_sum = 0.0;
    let mut iou_sum = 0.0;
    for (i, row) in rows[1..7].iter().enumerate() {
        assert_eq!(row[0], i.to_string());
        let n: Vec<u64> = row[1..5].iter().map(|s| s.parse().unwrap()).collect();
        let (tp, fp, tn, fnn) = naive_confusion(&truths[i], &segs[i]);
        assert_eq!(n, vec![tp, fp, tn, fnn]);
        let iou_v = tp as f64 / (tp + fp + fnn) as f64;
        assert_eq!(row[5], format!("{iou_v:.6}"));
        assert_eq!(row[6], format!("{:.6}", 1.0 - iou_v));
        iou_sum += iou_v;
        loss_sum += 1.0 - iou_v;
    }
    let last = &rows[7];
    assert_eq!(&last[..5], &["average", "", "", "", ""]);
    assert_eq!(last[5], format!("{:.6}", iou_sum / 6.0));
    assert_eq!(last[6], format!("{:.6}", loss_sum / 6.0));
}

#[test]
fn perfect_frame_row() {
    let truth = BinaryMask::from_fn(4, 3, |x, _| x < 1).unwrap();
    let report = evaluate_clip("p", std::slice::from_ref(&truth), std::slice::from_ref(&truth)).unwrap();
    let csv = String::from_utf8(write_report_csv(&report)).unwrap();
    assert_eq!(csv, "frame,tp,fp,tn,fn,iou,loss\n0,3,0,9,0,1.000000,0.000000\naverage,,,,,1.000000,0.000000\n");
}

#[test]
fn json_mirrors_report() {
    let truth = BinaryMask::from_fn(4, 3, |x, y| x == y).unwrap();
    let pred = BinaryMask::from_fn(4, 3, |x, _| x == 0).unwrap();
    let report = evaluate_clip("j", &[truth], &[pred]).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&write_report_json(&report)).unwrap();
    assert_eq!(v["clip_name"], "j");
    assert_eq!(v["frames"][0]["counts"]["tp"], 1);
    assert_eq!(v["frames"][0]["counts"]["fn"], 2);
    assert_eq!(v["frames"][0]["counts"]["fp"], 2);
    assert_eq!(v["average_iou"].as_f64().unwrap(), 0.2);
    assert_eq!(write_report_json(&report), write_report_json(&report));
}

#[test]
fn half_even_formatting() {
    assert_eq!(fmt_real(0.0078125), "0.007812");
    assert_eq!(fmt_real(0.0234375), "0.023438");
    assert_eq!(fmt_real(1.0), "1.000000");
}

#[test]
fn summary_table_layout() {
    let eval = |seed| {
        let mut r = rng(seed);
        let t: Vec<BinaryMask> = (0..3).map(|_| random_mask(&mut r, 8, 8, 0.5)).collect();
        let s: Vec<BinaryMask> = (0..3).map(|_| random_mask(&mut r, 8, 8, 0.5)).collect();
        evaluate_clip("c", &t, &s).unwrap()
    };
    let mut table = SummaryTable::new(vec!["mask_rcnn".into(), "refinenet".into()]);
    let mut expected = String::from("clip,mask_rcnn,refinenet\n");
    let mut cols = [0.0, 0.0];
    for (k, name) in ["a", "b", "c"].iter().enumerate() {
        let reports = [eval(k as u64 * 2), eval(k as u64 * 2 + 1)];
        table.push(*name, &reports).unwrap();
        expected.push_str(&format!(
            "{name},{},{}\n",
            fmt_real(reports[0].average_loss),
            fmt_real(reports[1].average_loss)
        ));
        cols[0] += reports[0].average_loss;
        cols[1] += reports[1].average_loss;
    }
    expected.push_str(&format!("average,{},{}\n", fmt_real(cols[0] / 3.0), fmt_real(cols[1] / 3.0)));
    assert_eq!(String::from_utf8(table.to_csv()).unwrap(), expected);
}

#[test]
fn artifact_candidates_respects_min_area() {
    let seg = BinaryMask::from_fn(8, 8, |x, y| {
        matches!((x, y), (1, 1) | (2, 1) | (2, 2)) || (x, y) == (6, 6) || (4..8).contains(&x) && y == 0
    })
    .unwrap();
    let flow = BinaryMask::from_fn(8, 8, |x, y| y == 0 && x >= 4).unwrap();
    let regions = artifact_candidates(&seg, &flow, 2, Connectivity::Eight).unwrap();
    assert_eq!(regions.len(), 1);
    let fp = seg.and_not(&flow).unwrap();
    let blob = flood_fill_components(&fp, true).into_iter().find(|c| c.len() == 3).unwrap();
    assert_eq!(regions[0].area, blob.len());
    assert_eq!(
        (regions[0].bounding_box.min_x, regions[0].bounding_box.min_y, regions[0].bounding_box.max_x, regions[0].bounding_box.max_y),
        (1, 1, 2, 2)
    );
    assert!(artifact_candidates(&seg, &seg, 1, Connectivity::Eight).unwrap().is_empty());
    let full = BinaryMask::full(5, 4).unwrap();
    let all = artifact_candidates(&full, &BinaryMask::empty(5, 4).unwrap(), 1, Connectivity::Four).unwrap();
    assert_eq!(all.len(), 1);
    assert_eq!(all[0].area, 20);
}

#[test]
fn sprite_out_of_bounds_is_rejected() {
    let mut spec = scene(Velocity::ZERO, vec![]);
    spec.sprites[0].velocity = Velocity::new(6, 0);
    assert!(matches!(render_clip(&spec, 0), Err(Error::SpriteOutOfBounds { .. })));
}

#[test]
fn scene_spec_from_json() {
    let json = r#"{
        "width": 32, "height": 24, "frame_count": 4,
        "sprites": [{"shape": {"disc": {"radius": 3}}, "position": [8, 8], "velocity": {"dx": 1, "dy": 1}}],
        "artifact_schedule": [{"frame_index": 1, "shape": {"rectangle": {"width": 2, "height": 2}}, "position": [28, 2]}]
    }"#;
    let spec: SceneSpec = serde_json::from_str(json).unwrap();
    let clip = render_clip(&spec, 0).unwrap();
    assert_eq!(clip.detector_masks[1].len(), 2);
    assert_eq!(clip.detector_masks[0].len(), 1);
    assert_eq!(clip.true_masks[0].count(), 29);
}

#[test]
fn summary_average_row_is_the_column_mean() {
    let mut table = SummaryTable::new(vec!["refinenet".into(), "mask_rcnn".into()]);
    for (clip, losses) in [
        ("street", [0.7651, 0.7306]),
        ("sidewalk", [0.8396, 0.8460]),
        ("highway", [0.8904, 0.9075]),
    ] {
        table.clips.push(flowmask::metrics::SummaryRow {
            clip_name: clip.into(),
            average_losses: losses.to_vec(),
        });
    }
    let means = table.column_means();
    assert_eq!(format!("{:.4}", means[0]), "0.8317");
    assert_eq!(format!("{:.4}", means[1]), "0.8280");
    let csv = String::from_utf8(table.to_csv()).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "clip,refinenet,mask_rcnn");
    assert_eq!(csv.lines().count(), 5);
}
