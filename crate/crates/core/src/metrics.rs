//! Detection and extraction metrics: per-class precision/recall/F1 and AP at a
//! rotated-IoU threshold, mAP over the three object classes, arrow keypoint
//! metrics and tuple-level scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rotated_iou, Point};
use crate::model::{DiagramKind, DiagramObject, ObjectClass, ObjectId, RelationTuple};

pub const IOU_THRESHOLD: f64 = 0.5;
/// Keypoint match radius in native units.
pub const KEYPOINT_RADIUS: f64 = 8.0;
pub const PERCENTAGE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("tuple kinds differ: {expected} vs {found}")]
    KindMismatch { expected: DiagramKind, found: DiagramKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMatch {
    pub detection: ObjectId,
    pub ground_truth: Option<ObjectId>,
    pub score: f64,
}

/// Matching outcome for one class. `matches` is in processing order
/// (descending score, then id).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub matches: Vec<DetectionMatch>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MatchResult {
    pub fn gt_count(&self) -> usize {
        self.tp + self.fn_
    }

    /// Pools another result into this one, as when accumulating a corpus.
    pub fn merge(&mut self, other: MatchResult) {
        self.matches.extend(other.matches);
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Greedy matcher shared by boxes and keypoints. `affinity(d, g)` is `None`
/// when the pair is not acceptable, else a value where larger is better.
fn greedy_match(
    dets: &[(ObjectId, f64)],
    gts: &[ObjectId],
    affinity: impl Fn(usize, usize) -> Option<f64>,
) -> MatchResult {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].1.total_cmp(&dets[a].1).then(dets[a].0.cmp(&dets[b].0)));
    let mut gt_order: Vec<usize> = (0..gts.len()).collect();
    gt_order.sort_by_key(|&g| gts[g]);
    let mut taken = vec![false; gts.len()];
    let mut out = MatchResult::default();
    for d in order {
        let mut best: Option<(f64, usize)> = None;
        for &g in &gt_order {
            if taken[g] {
                continue;
            }
            if let Some(a) = affinity(d, g) {
                if best.is_none_or(|(ba, _)| a > ba) {
                    best = Some((a, g));
                }
            }
        }
        let ground_truth = best.map(|(_, g)| {
            taken[g] = true;
            gts[g]
        });
        if ground_truth.is_some() {
            out.tp += 1;
        } else {
            out.fp += 1;
        }
        out.matches.push(DetectionMatch {
            detection: dets[d].0,
            ground_truth,
            score: dets[d].1,
        });
    }
    out.fn_ = gts.len() - out.tp;
    out
}

/// Greedy single-class matching: by descending score (ties: lower id), each
/// detection takes the unmatched ground truth of highest rotated IoU at or
/// above the threshold.
pub fn match_class(dets: &[DiagramObject], gts: &[DiagramObject], iou_threshold: f64) -> MatchResult {
    let d: Vec<(ObjectId, f64)> = dets.iter().map(|o| (o.id, o.score)).collect();
    let g: Vec<ObjectId> = gts.iter().map(|o| o.id).collect();
    greedy_match(&d, &g, |i, j| {
        let iou = rotated_iou(&dets[i].bbox, &gts[j].bbox);
        (iou >= iou_threshold).then_some(iou)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from counts. An empty denominator scores 1.0
/// when there was nothing to find or report.
pub fn prf_from_counts(tp: usize, fp: usize, fn_: usize) -> Prf {
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

pub fn precision_recall_f1(m: &MatchResult) -> Prf {
    prf_from_counts(m.tp, m.fp, m.fn_)
}

/// All-points interpolated AP: area under the precision envelope.
pub fn average_precision(m: &MatchResult) -> f64 {
    let n_gt = m.gt_count();
    if n_gt == 0 {
        return if m.matches.is_empty() { 1.0 } else { 0.0 };
    }
    let mut ranked: Vec<&DetectionMatch> = m.matches.iter().collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(ranked.len());
    for d in ranked {
        if d.ground_truth.is_some() {
            tp += 1;
        } else {
            fp += 1;
        }
        curve.push((tp as f64 / n_gt as f64, tp as f64 / (tp + fp) as f64));
    }
    for i in (0..curve.len().saturating_sub(1)).rev() {
        curve[i].1 = curve[i].1.max(curve[i + 1].1);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in curve {
        ap += (r - prev_recall) * p;
        prev_recall = r;
    }
    ap
}

/// Unweighted mean of per-class APs.
pub fn mean_ap(aps: &[f64]) -> f64 {
    if aps.is_empty() {
        return 0.0;
    }
    aps.iter().sum::<f64>() / aps.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Role {
    Start,
    End,
}

fn keypoints_of(lines: &[DiagramObject]) -> Vec<(ObjectId, Role, Point, f64)> {
    lines
        .iter()
        .filter(|o| o.class == ObjectClass::Line)
        .filter_map(|o| o.keypoints.map(|k| (o, k)))
        .flat_map(|(o, k)| [(o.id, Role::Start, k.start, o.score), (o.id, Role::End, k.end, o.score)])
        .collect()
}

/// Matches arrow keypoints: same role, within `radius`, nearest first,
/// greedy by the owning line's score. Ids in the result are line ids.
pub fn match_keypoints(pred: &[DiagramObject], gt: &[DiagramObject], radius: f64) -> MatchResult {
    let p = keypoints_of(pred);
    let g = keypoints_of(gt);
    let dets: Vec<(ObjectId, f64)> = p.iter().map(|k| (k.0, k.3)).collect();
    let gts: Vec<ObjectId> = g.iter().map(|k| k.0).collect();
    greedy_match(&dets, &gts, |i, j| {
        if p[i].1 != g[j].1 {
            return None;
        }
        let d = p[i].2.distance(g[j].2);
        (d <= radius).then_some(-d)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ap: f64,
}

pub fn keypoint_metrics(pred: &[DiagramObject], gt: &[DiagramObject], radius: f64) -> KeypointScores {
    let m = match_keypoints(pred, gt, radius);
    let prf = precision_recall_f1(&m);
    KeypointScores {
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        ap: average_precision(&m),
    }
}

fn normalize_name(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whether a predicted tuple counts as a correct extraction of a gold one.
pub fn tuples_match(pred: &RelationTuple, gold: &RelationTuple) -> bool {
    if pred.kind() != gold.kind()
        || normalize_name(pred.parent()) != normalize_name(gold.parent())
        || normalize_name(pred.child()) != normalize_name(gold.child())
    {
        return false;
    }
    match (pred.percentage(), gold.percentage()) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= PERCENTAGE_TOLERANCE,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TupleCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl TupleCounts {
    pub fn prf(&self) -> Prf {
        prf_from_counts(self.tp, self.fp, self.fn_)
    }
}

fn check_kinds(pred: &[RelationTuple], gold: &[RelationTuple]) -> Result<(), MetricsError> {
    let mut all = pred.iter().chain(gold);
    if let Some(first) = all.next() {
        let expected = first.kind();
        if let Some(t) = all.find(|t| t.kind() != expected) {
            return Err(MetricsError::KindMismatch {
                expected,
                found: t.kind(),
            });
        }
    }
    Ok(())
}

/// One-to-one greedy tuple matching.
pub fn match_tuples(pred: &[RelationTuple], gold: &[RelationTuple]) -> Result<TupleCounts, MetricsError> {
    check_kinds(pred, gold)?;
    let mut used = vec![false; gold.len()];
    let mut tp = 0;
    for p in pred {
        if let Some(i) = (0..gold.len()).find(|&i| !used[i] && tuples_match(p, &gold[i])) {
            used[i] = true;
            tp += 1;
        }
    }
    Ok(TupleCounts {
        tp,
        fp: pred.len() - tp,
        fn_: gold.len() - tp,
    })
}

pub fn tuple_metrics(pred: &[RelationTuple], gold: &[RelationTuple]) -> Result<Prf, MetricsError> {
    Ok(match_tuples(pred, gold)?.prf())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ap: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ClassReport {
    fn from_match(m: &MatchResult) -> Self {
        let prf = precision_recall_f1(m);
        ClassReport {
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            ap: average_precision(m),
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TupleReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub diagrams: usize,
    pub iou_threshold: f64,
    pub keypoint_radius: f64,
    pub classes: BTreeMap<ObjectClass, ClassReport>,
    #[serde(rename = "mAP")]
    pub map: f64,
    pub keypoints: ClassReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuples: Option<TupleReport>,
}

/// Accumulates per-diagram results into corpus-level metrics. AP is computed
/// over the pooled ranking of all detections.
#[derive(Debug, Clone)]
pub struct Evaluator {
    iou_threshold: f64,
    keypoint_radius: f64,
    classes: BTreeMap<ObjectClass, MatchResult>,
    keypoints: MatchResult,
    tuples: Option<TupleCounts>,
    diagrams: usize,
}

impl Evaluator {
    pub fn new(iou_threshold: f64, keypoint_radius: f64) -> Self {
        Evaluator {
            iou_threshold,
            keypoint_radius,
            classes: ObjectClass::ALL.iter().map(|&c| (c, MatchResult::default())).collect(),
            keypoints: MatchResult::default(),
            tuples: None,
            diagrams: 0,
        }
    }

    pub fn add_detections(&mut self, dets: &[DiagramObject], gts: &[DiagramObject]) {
        self.diagrams += 1;
        for c in ObjectClass::ALL {
            let d: Vec<DiagramObject> = dets.iter().filter(|o| o.class == c).cloned().collect();
            let g: Vec<DiagramObject> = gts.iter().filter(|o| o.class == c).cloned().collect();
            let m = match_class(&d, &g, self.iou_threshold);
            self.classes.get_mut(&c).expect("all classes present").merge(m);
        }
        self.keypoints.merge(match_keypoints(dets, gts, self.keypoint_radius));
    }

    pub fn add_tuples(&mut self, pred: &[RelationTuple], gold: &[RelationTuple]) -> Result<(), MetricsError> {
        let c = match_tuples(pred, gold)?;
        let acc = self.tuples.get_or_insert_with(TupleCounts::default);
        acc.tp += c.tp;
        acc.fp += c.fp;
        acc.fn_ += c.fn_;
        Ok(())
    }

    pub fn report(&self) -> EvaluationReport {
        let classes: BTreeMap<ObjectClass, ClassReport> = self
            .classes
            .iter()
            .map(|(&c, m)| (c, ClassReport::from_match(m)))
            .collect();
        let aps: Vec<f64> = classes.values().map(|r| r.ap).collect();
        EvaluationReport {
            diagrams: self.diagrams,
            iou_threshold: self.iou_threshold,
            keypoint_radius: self.keypoint_radius,
            map: mean_ap(&aps),
            classes,
            keypoints: ClassReport::from_match(&self.keypoints),
            tuples: self.tuples.map(|c| {
                let prf = c.prf();
                TupleReport {
                    precision: prf.precision,
                    recall: prf.recall,
                    f1: prf.f1,
                    tp: c.tp,
                    fp: c.fp,
                    fn_: c.fn_,
                }
            }),
        }
    }
}

impl Default for Evaluator {
    fn default() -> Self {
        Evaluator::new(IOU_THRESHOLD, KEYPOINT_RADIUS)
    }
}
