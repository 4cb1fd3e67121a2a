//! Acceptance suite. Runs every primary criterion at its stated tolerance and
//! prints one PASS/FAIL line per criterion; exits non-zero if any fail.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use diagraph_cli::RUN_MANIFEST_FILE;
use diagraph_core::aggregator::{recognize, AggregatorConfig};
use diagraph_core::detectsim::{perturb, NoiseConfig};
use diagraph_core::formats::{
    coco_to_dota, dota_to_coco, parse_detection_file, read_detections, read_dota, write_detections, write_dota,
    CocoDocument, CoordinateSpace, DotaSidecar,
};
use diagraph_core::geometry::{contains_point, rotated_iou, OrientedBox, Point};
use diagraph_core::metrics::{average_precision, match_class, match_tuples, Evaluator};
use diagraph_core::model::{AnnotationSet, DiagramKind, DiagramObject, Keypoints, ObjectClass, TextBlock};
use diagraph_core::synthesizer::{synthesize_diagram, SynthesisConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const KINDS: [DiagramKind; 2] = [DiagramKind::Ownership, DiagramKind::Organization];

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn round_trip() -> Result<String, String> {
    let start = Instant::now();
    let cfg = SynthesisConfig::default();
    let agg = AggregatorConfig::default();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for kind in KINDS {
        for seed in 0..500 {
            let d = synthesize_diagram(kind, &cfg, seed).map_err(|e| format!("{kind} seed {seed}: {e}"))?;
            let got = recognize(&d.ground_truth, &agg).tuples;
            let c = match_tuples(&got, &d.topology.tuples()).map_err(|e| e.to_string())?;
            tp += c.tp;
            fp += c.fp;
            fn_ += c.fn_;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let prf = diagraph_core::metrics::prf_from_counts(tp, fp, fn_);
    let perfect = prf.precision == 1.0 && prf.recall == 1.0 && prf.f1 == 1.0;
    ensure(
        perfect && secs < 60.0,
        format!(
            "P={} R={} F1={} over {tp} tuples (fp {fp}, fn {fn_}) in {secs:.2} s",
            prf.precision, prf.recall, prf.f1
        ),
    )
}

fn self_evaluation() -> Result<String, String> {
    let cfg = SynthesisConfig::default();
    let mut e = Evaluator::default();
    for kind in KINDS {
        for seed in 0..200 {
            let gt = synthesize_diagram(kind, &cfg, seed)
                .map_err(|e| e.to_string())?
                .ground_truth;
            e.add_detections(&gt.objects, &gt.objects);
        }
    }
    let r = e.report();
    let mut bad = Vec::new();
    for (c, m) in &r.classes {
        if m.tp == 0 || [m.precision, m.recall, m.f1, m.ap] != [1.0; 4] {
            bad.push(format!("{c}: {m:?}"));
        }
    }
    let k = r.keypoints;
    if k.tp == 0 || [k.precision, k.recall, k.f1, k.ap] != [1.0; 4] {
        bad.push(format!("keypoints: {k:?}"));
    }
    if r.map != 1.0 {
        bad.push(format!("mAP {}", r.map));
    }
    let counts: Vec<String> = r.classes.iter().map(|(c, m)| format!("{c} {}", m.tp)).collect();
    ensure(
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "all 1.0 over {} diagrams ({}, keypoints {})",
                r.diagrams,
                counts.join(", "),
                k.tp
            )
        } else {
            bad.join("; ")
        },
    )
}

fn random_box(rng: &mut ChaCha8Rng) -> OrientedBox {
    OrientedBox::new(
        rng.random_range(-10.0..10.0),
        rng.random_range(-10.0..10.0),
        rng.random_range(1.0..20.0),
        rng.random_range(1.0..20.0),
        rng.random_range(-3.2..3.2),
    )
    .expect("positive sides")
}

fn sampled_iou(a: &OrientedBox, b: &OrientedBox, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.aabb();
    let (bx0, by0, bx1, by1) = b.aabb();
    let (x0, y0, x1, y1) = (ax0.min(bx0), ay0.min(by0), ax1.max(bx1), ay1.max(by1));
    let (mut inter, mut union) = (0usize, 0usize);
    for _ in 0..samples {
        let p = Point::new(rng.random_range(x0..x1), rng.random_range(y0..y1));
        let (ia, ib) = (contains_point(a, p), contains_point(b, p));
        inter += (ia && ib) as usize;
        union += (ia || ib) as usize;
    }
    inter as f64 / union.max(1) as f64
}

fn iou_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pairs = 10_000;
    let (mut within, mut worst, mut overlapping) = (0usize, 0.0f64, 0usize);
    for i in 0..pairs {
        let a = random_box(&mut rng);
        // Every other pair is centred nearby so that most pairs overlap.
        let b = if i % 2 == 0 {
            let mut b = random_box(&mut rng);
            b = OrientedBox::new(a.cx() + b.cx() * 0.3, a.cy() + b.cy() * 0.3, b.w(), b.h(), b.theta()).unwrap();
            b
        } else {
            random_box(&mut rng)
        };
        let exact = rotated_iou(&a, &b);
        overlapping += (exact > 0.0) as usize;
        let err = (exact - sampled_iou(&a, &b, 100_000, &mut rng)).abs();
        within += (err <= 0.01) as usize;
        worst = worst.max(err);
    }
    let frac = within as f64 / pairs as f64;
    ensure(
        frac >= 0.99 && worst <= 0.03,
        format!(
            "{:.2}% of {pairs} pairs within 0.01, worst {worst:.4}, {overlapping} overlapping",
            frac * 100.0
        ),
    )
}

fn ap_hand_case() -> Result<String, String> {
    let b = |cx: f64| OrientedBox::new(cx, 50.0, 20.0, 10.0, 0.0).unwrap();
    let gts: Vec<DiagramObject> = (0..3)
        .map(|i| DiagramObject::ground_truth(i, ObjectClass::Node, b(100.0 * i as f64 + 50.0)))
        .collect();
    let det = |id, cx, score| DiagramObject {
        score,
        ..DiagramObject::ground_truth(id, ObjectClass::Node, b(cx))
    };
    let dets = vec![det(10, 50.0, 0.9), det(11, 900.0, 0.8), det(12, 150.0, 0.7)];
    let ap = average_precision(&match_class(&dets, &gts, 0.5));
    ensure(
        (ap - 5.0 / 9.0).abs() <= 1e-9,
        format!("AP {ap:.12} vs 5/9 = {:.12}", 5.0 / 9.0),
    )
}

fn random_set(seed: u64) -> AnnotationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (rng.random_range(200.0..2000.0), rng.random_range(200.0..2000.0));
    let kind = KINDS[rng.random_range(0..2)];
    let mut s = AnnotationSet::new(format!("set-{seed}"), kind, w, h);
    let n = rng.random_range(1..30);
    for id in 0..n {
        let class = ObjectClass::ALL[rng.random_range(0..3)];
        let bbox = OrientedBox::new(
            rng.random_range(60.0..w - 60.0),
            rng.random_range(60.0..h - 60.0),
            rng.random_range(4.0..120.0),
            rng.random_range(4.0..60.0),
            if rng.random_bool(0.5) {
                0.0
            } else {
                rng.random_range(-3.0..3.0)
            },
        )
        .unwrap();
        let mut o = DiagramObject::ground_truth(id, class, bbox);
        o.score = rng.random_range(0.0..=1.0);
        if class == ObjectClass::Line && rng.random_bool(0.5) {
            let (a, b) = bbox.short_side_midpoints();
            o.keypoints = Some(Keypoints { start: a, end: b });
        }
        s.objects.push(o);
    }
    for k in 0..rng.random_range(0..6) {
        s.texts.push(TextBlock {
            id: n + k,
            bbox: OrientedBox::new(
                rng.random_range(20.0..w - 20.0),
                rng.random_range(20.0..h - 20.0),
                30.0,
                12.0,
                0.0,
            )
            .unwrap(),
            content: format!("{}.{}%", rng.random_range(1..100), rng.random_range(0..10)),
        });
    }
    s
}

/// Largest coordinate deviation between two sets with matching structure.
fn set_deviation(a: &AnnotationSet, b: &AnnotationSet) -> Result<f64, String> {
    if (a.diagram_id.as_str(), a.kind, a.width, a.height) != (b.diagram_id.as_str(), b.kind, b.width, b.height) {
        return Err(format!("{}: metadata differs", a.diagram_id));
    }
    if a.objects.len() != b.objects.len() || a.texts != b.texts {
        return Err(format!("{}: object or text lists differ", a.diagram_id));
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.objects.iter().zip(&b.objects) {
        if (x.id, x.class) != (y.id, y.class) || x.keypoints.is_some() != y.keypoints.is_some() {
            return Err(format!("{}: object {} differs", a.diagram_id, x.id));
        }
        worst = worst
            .max(box_deviation(&x.bbox, &y.bbox))
            .max((x.score - y.score).abs());
        if let (Some(p), Some(q)) = (x.keypoints, y.keypoints) {
            worst = worst.max(p.start.distance(q.start)).max(p.end.distance(q.end));
        }
    }
    Ok(worst)
}

/// Boxes compared through their vertex sets, which are invariant to the
/// equivalent (w, h, theta) parameterizations.
fn box_deviation(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let va = diagraph_core::geometry::vertices_of(a).coords();
    let vb = diagraph_core::geometry::vertices_of(b).coords();
    let pa: Vec<Point> = va.chunks(2).map(|c| Point::new(c[0], c[1])).collect();
    let pb: Vec<Point> = vb.chunks(2).map(|c| Point::new(c[0], c[1])).collect();
    pa.iter()
        .map(|p| pb.iter().map(|q| p.distance(*q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn format_round_trips() -> Result<String, String> {
    let sets: Vec<AnnotationSet> = (0..100).map(|s| random_set(s).sorted()).collect();
    let mut dota: f64 = 0.0;
    for s in &sets {
        let (text, sidecar) = write_dota(s);
        let side: DotaSidecar = serde_json::from_str(&sidecar).map_err(|e| e.to_string())?;
        let back = read_dota(&text, &side).map_err(|e| e.to_string())?;
        dota = dota.max(set_deviation(s, &back.sorted())?);
    }
    let json = serde_json::to_string(&dota_to_coco(&sets)).map_err(|e| e.to_string())?;
    let doc: CocoDocument = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    let back = coco_to_dota(&doc).map_err(|e| e.to_string())?;
    if back.len() != sets.len() {
        return Err(format!("COCO returned {} of {} sets", back.len(), sets.len()));
    }
    let mut coco: f64 = 0.0;
    for (a, b) in sets.iter().zip(&back) {
        coco = coco.max(set_deviation(a, &b.sorted())?);
    }
    let mut scaled: f64 = 0.0;
    for s in &sets {
        for space in [CoordinateSpace::Native, CoordinateSpace::Scaled1024] {
            let f = write_detections(&s.diagram_id, &s.objects, s.width, s.height, space);
            let json = serde_json::to_string(&f).map_err(|e| e.to_string())?;
            let f2 = parse_detection_file(&json).map_err(|e| e.to_string())?;
            let objs = read_detections(&f2, s.width, s.height).map_err(|e| e.to_string())?;
            let mut back = s.clone();
            back.objects = objs;
            scaled = scaled.max(set_deviation(s, &back)?);
        }
    }
    ensure(
        dota <= 1e-6 && coco <= 1e-6 && scaled <= 1e-9,
        format!("DOTA max dev {dota:.2e}, COCO {coco:.2e}, rescaling {scaled:.2e} over 100 sets"),
    )
}

fn hash_tree(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).expect("readable dir") {
            let p = e.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != RUN_MANIFEST_FILE) {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                let digest = Sha256::digest(fs::read(&p).expect("readable file"));
                out.insert(rel, digest.iter().map(|b| format!("{b:02x}")).collect());
            }
        }
    }
    out
}

fn dataset_scale() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut times = Vec::new();
    let mut files = Vec::new();
    for pass in ["a", "b"] {
        let start = Instant::now();
        for (kind, count) in [("ownership", 8050), ("organization", 4450)] {
            let out = tmp.path().join(pass).join(kind);
            let out = out.to_string_lossy().into_owned();
            let c = count.to_string();
            let code = diagraph_cli::run([
                "diagraph",
                "synthesize",
                "--kind",
                kind,
                "--count",
                &c,
                "--seed",
                "0",
                "--out",
                &out,
            ]);
            if code != 0 {
                return Err(format!("synthesize {kind} exited {code}"));
            }
        }
        times.push(start.elapsed().as_secs_f64());
        files.push(hash_tree(&tmp.path().join(pass)));
    }
    let diagrams = files[0].keys().filter(|k| k.ends_with(".svg")).count();
    ensure(
        diagrams == 12_500 && files[0] == files[1] && times[0] < 600.0,
        format!(
            "{diagrams} diagrams, {} files, runs {:.1} s and {:.1} s, rerun {}",
            files[0].len(),
            times[0],
            times[1],
            if files[0] == files[1] {
                "hash-identical"
            } else {
                "DIFFERS"
            }
        ),
    )
}

fn robustness() -> Result<String, String> {
    let cfg = SynthesisConfig::default();
    let agg = AggregatorConfig::default();
    let rates = [0.0, 0.05, 0.1, 0.2];
    let mut lines = Vec::new();
    let mut ok = true;
    for kind in KINDS {
        let diagrams: Vec<_> = (0..50)
            .map(|d| synthesize_diagram(kind, &cfg, d))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let mut recall = Vec::new();
        for rate in rates {
            let (mut tp, mut gold) = (0usize, 0usize);
            for d in &diagrams {
                let want = d.topology.tuples();
                for seed in 0..5 {
                    let p =
                        perturb(&d.ground_truth, &NoiseConfig::lines_dropped(rate), seed).map_err(|e| e.to_string())?;
                    tp += match_tuples(&recognize(&p, &agg).tuples, &want)
                        .map_err(|e| e.to_string())?
                        .tp;
                    gold += want.len();
                }
            }
            recall.push(tp as f64 / gold as f64);
        }
        ok &= recall.windows(2).all(|w| w[1] <= w[0]);
        lines.push(format!(
            "{kind} {}",
            recall.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(" ≥ ")
        ));
    }
    ensure(ok, format!("recall at drop rates {rates:?}: {}", lines.join("; ")))
}

fn map_exclusion() -> Result<String, String> {
    let cfg = SynthesisConfig::default();
    let noise = NoiseConfig {
        jitter_sigma: 1.5,
        spurious_rate: 0.05,
        ..NoiseConfig::lines_dropped(0.1)
    };
    let mut clean = Evaluator::default();
    let mut broken = Evaluator::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..100 {
        let gt = synthesize_diagram(KINDS[seed as usize % 2], &cfg, seed)
            .map_err(|e| e.to_string())?
            .ground_truth;
        let dets = perturb(&gt, &noise, seed).map_err(|e| e.to_string())?;
        let mut bad = dets.objects.clone();
        for o in &mut bad {
            if let Some(kp) = o.keypoints.as_mut() {
                match rng.random_range(0..3) {
                    0 => std::mem::swap(&mut kp.start, &mut kp.end),
                    1 => kp.end = Point::new(kp.end.x + 40.0, kp.end.y - 40.0),
                    _ => o.keypoints = None,
                }
            }
        }
        clean.add_detections(&dets.objects, &gt.objects);
        broken.add_detections(&bad, &gt.objects);
    }
    let (a, b) = (clean.report(), broken.report());
    ensure(
        a.map == b.map && b.keypoints.f1 < a.keypoints.f1,
        format!(
            "mAP {} vs {} with keypoint F1 {:.4} → {:.4}",
            a.map, b.map, a.keypoints.f1, b.keypoints.f1
        ),
    )
}

fn main() {
    let checks: [(&str, Check); 8] = [
        ("end-to-end round trip (500+500, P=R=F1=1, <60 s)", round_trip),
        ("self-evaluation saturates every metric", self_evaluation),
        ("IoU vs 1e5-sample Monte Carlo on 10k pairs", iou_oracle),
        ("AP hand case equals 5/9", ap_hand_case),
        ("DOTA/COCO round trips and 1024 rescaling", format_round_trips),
        ("dataset scale 8050+4450 in <10 min, hash-stable", dataset_scale),
        ("tuple recall non-increasing in line drop rate", robustness),
        ("keypoint errors leave mAP unchanged", map_exclusion),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {name}: {detail} [{:.1} s]", start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
