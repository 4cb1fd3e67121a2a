use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use diagraph_core::aggregator::{recognize, AggregatorConfig, Diagnostic};
use diagraph_core::detectsim::{perturb, NoiseConfig};
use diagraph_core::formats::{save_dota, write_detections, CodecRegistry, CoordinateSpace};
use diagraph_core::io::atomic_write;
use diagraph_core::metrics::{EvaluationReport, Evaluator, TupleReport, KEYPOINT_RADIUS};
use diagraph_core::model::{tuples_to_jsonl, AnnotationSet, RelationTuple};
use diagraph_core::synthesizer::{synthesize_dataset, SynthesisConfig};
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::input::{load_sets, load_tuple_dir, read_json_config, LoadContext};
use crate::manifest::RunManifest;
use crate::{ConvertArgs, EvaluateArgs, OutputFormat, PerturbArgs, RecognizeArgs, SourceArgs, SynthesizeArgs};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    atomic_write(path, s.as_bytes()).map_err(CliError::io(path))
}

fn load_source(src: &SourceArgs) -> Result<Vec<AnnotationSet>, CliError> {
    let reference = match &src.reference {
        Some(p) => load_sets(p, &LoadContext::default())?,
        None => Vec::new(),
    };
    let sets = load_sets(&src.input, &LoadContext::with_reference(src.kind, &reference))?;
    if sets.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no annotation sets found",
            src.input.display()
        )));
    }
    Ok(sets)
}

fn source_inputs(src: &SourceArgs) -> Vec<std::path::PathBuf> {
    std::iter::once(src.input.clone())
        .chain(src.reference.clone())
        .collect()
}

pub fn cmd_synthesize(a: &SynthesizeArgs, args: &[String]) -> Result<RunManifest, CliError> {
    let config: SynthesisConfig = match &a.config {
        Some(p) => read_json_config(p)?,
        None => SynthesisConfig::default(),
    };
    let settings = json!({ "kind": a.kind, "count": a.count, "synthesis": config });
    let mut m = RunManifest::new("synthesize", args, settings, Some(a.seed));
    m.inputs.extend(a.config.clone());
    let dataset = synthesize_dataset(a.kind, &config, a.count, a.seed, &a.out)?;
    log::info!(
        "wrote {} {} diagrams to {}",
        dataset.entries.len(),
        a.kind,
        a.out.display()
    );
    m.outputs = vec![a.out.clone(), dataset.path];
    m.write(&a.out)?;
    Ok(m)
}

pub fn cmd_convert(a: &ConvertArgs, args: &[String]) -> Result<RunManifest, CliError> {
    let sets = load_source(&a.source)?;
    let space = CoordinateSpace::from(a.space);
    let settings = json!({ "to": format!("{:?}", a.to).to_lowercase(), "space": space.as_str() });
    let mut m = RunManifest::new("convert", args, settings, None);
    m.inputs = source_inputs(&a.source);
    match a.to {
        OutputFormat::Dota | OutputFormat::Coco => {
            let registry = CodecRegistry::default();
            let name = if a.to == OutputFormat::Dota { "dota" } else { "coco" };
            let codec = registry.get(name).expect("built-in codec registered");
            for f in codec.export(&sets) {
                let path = a.out.join(&f.path);
                atomic_write(&path, &f.bytes).map_err(CliError::io(&path))?;
            }
        }
        OutputFormat::Detections => {
            for s in &sets {
                let doc = write_detections(&s.diagram_id, &s.objects, s.width, s.height, space);
                write_json(&a.out.join(format!("{}.json", s.diagram_id)), &doc)?;
            }
        }
    }
    log::info!("converted {} sets to {:?}", sets.len(), a.to);
    m.outputs = vec![a.out.clone()];
    m.write(&a.out)?;
    Ok(m)
}

pub fn cmd_perturb(a: &PerturbArgs, args: &[String]) -> Result<RunManifest, CliError> {
    let noise: NoiseConfig = match &a.noise {
        Some(p) => read_json_config(p)?,
        None => NoiseConfig::default(),
    };
    noise.validate()?;
    let sets = load_source(&a.source)?;
    let space = CoordinateSpace::from(a.space);
    let mut m = RunManifest::new(
        "perturb",
        args,
        json!({ "noise": noise, "space": space.as_str() }),
        Some(a.seed),
    );
    m.inputs = source_inputs(&a.source);
    m.inputs.extend(a.noise.clone());
    for s in &sets {
        let p = perturb(s, &noise, a.seed)?;
        let dota = a.out.join(format!("{}.txt", p.diagram_id));
        save_dota(&p, &dota).map_err(|e| CliError::from_format(&dota, e))?;
        let doc = write_detections(&p.diagram_id, &p.objects, p.width, p.height, space);
        write_json(&a.out.join("detections").join(format!("{}.json", p.diagram_id)), &doc)?;
    }
    log::info!("perturbed {} sets", sets.len());
    m.outputs = vec![a.out.clone()];
    m.write(&a.out)?;
    Ok(m)
}

#[derive(Debug, Serialize)]
struct DiagramDiagnostics<'a> {
    diagram_id: &'a str,
    tuples: usize,
    diagnostics: &'a [Diagnostic],
}

pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";

fn aggregator_config(path: Option<&Path>) -> Result<AggregatorConfig, CliError> {
    let cfg: AggregatorConfig = match path {
        Some(p) => read_json_config(p)?,
        None => AggregatorConfig::default(),
    };
    if !(cfg.snap_radius.is_finite() && cfg.snap_radius > 0.0) {
        return Err(CliError::validation(format!(
            "snap_radius must be positive, got {}",
            cfg.snap_radius
        )));
    }
    Ok(cfg)
}

/// Writes `tuples/<diagram_id>.jsonl` per set and one `diagnostics.json`.
pub fn cmd_recognize(a: &RecognizeArgs, args: &[String]) -> Result<RunManifest, CliError> {
    let cfg = aggregator_config(a.config.as_deref())?;
    let sets = load_source(&a.source)?;
    let mut m = RunManifest::new("recognize", args, json!({ "aggregator": cfg }), None);
    m.inputs = source_inputs(&a.source);
    m.inputs.extend(a.config.clone());
    let results: Vec<_> = sets.iter().map(|s| (s, recognize(s, &cfg))).collect();
    for (s, r) in &results {
        let path = a.out.join("tuples").join(format!("{}.jsonl", s.diagram_id));
        atomic_write(&path, tuples_to_jsonl(&r.tuples).as_bytes()).map_err(CliError::io(&path))?;
    }
    let report: Vec<DiagramDiagnostics> = results
        .iter()
        .map(|(s, r)| DiagramDiagnostics {
            diagram_id: &s.diagram_id,
            tuples: r.tuples.len(),
            diagnostics: &r.diagnostics,
        })
        .collect();
    let flagged = report.iter().filter(|d| !d.diagnostics.is_empty()).count();
    write_json(&a.out.join(DIAGNOSTICS_FILE), &json!({ "diagrams": report }))?;
    log::info!("recognized {} sets, {flagged} with diagnostics", sets.len());
    m.outputs = vec![a.out.clone()];
    m.write(&a.out)?;
    Ok(m)
}

/// Contents of `report.json`. Either part is absent when its inputs were not given.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct EvaluateReport {
    pub diagrams: usize,
    pub detection: Option<EvaluationReport>,
    pub tuples: Option<TupleReport>,
}

pub const REPORT_FILE: &str = "report.json";

pub fn cmd_evaluate(a: &EvaluateArgs, args: &[String]) -> Result<RunManifest, CliError> {
    if !(a.iou_threshold > 0.0 && a.iou_threshold <= 1.0) {
        return Err(CliError::validation(format!(
            "--iou-threshold must be in (0, 1], got {}",
            a.iou_threshold
        )));
    }
    if a.input.is_none() && a.tuples.is_none() {
        return Err(CliError::validation("evaluate needs --in, --tuples or both"));
    }
    let cfg = aggregator_config(a.config.as_deref())?;
    let gt = load_sets(&a.gt, &LoadContext::default())?;
    let pred = match &a.input {
        Some(p) => Some(load_sets(p, &LoadContext::with_reference(None, &gt))?),
        None => None,
    };
    let settings = json!({ "iou_threshold": a.iou_threshold, "keypoint_radius": KEYPOINT_RADIUS, "aggregator": cfg });
    let mut m = RunManifest::new("evaluate", args, settings, None);
    m.inputs = [
        Some(&a.gt),
        a.input.as_ref(),
        a.tuples.as_ref(),
        a.gold.as_ref(),
        a.config.as_ref(),
    ]
    .into_iter()
    .flatten()
    .cloned()
    .collect();

    let gt_by_id: BTreeMap<&str, &AnnotationSet> = gt.iter().map(|s| (s.diagram_id.as_str(), s)).collect();
    let pred_by_id: BTreeMap<&str, &AnnotationSet> =
        pred.iter().flatten().map(|s| (s.diagram_id.as_str(), s)).collect();
    let mut ids: BTreeSet<&str> = gt_by_id.keys().copied().collect();
    ids.extend(pred_by_id.keys().copied());
    for id in pred_by_id.keys().filter(|id| !gt_by_id.contains_key(*id)) {
        log::warn!("{id}: predictions without ground truth count as false positives");
    }

    let mut detection = Evaluator::new(a.iou_threshold, KEYPOINT_RADIUS);
    if pred.is_some() {
        for id in &ids {
            let dets = pred_by_id.get(id).map(|s| s.objects.as_slice()).unwrap_or(&[]);
            let gts = gt_by_id.get(id).map(|s| s.objects.as_slice()).unwrap_or(&[]);
            detection.add_detections(dets, gts);
        }
    }

    let pred_tuples = match &a.tuples {
        Some(d) => Some(load_tuple_dir(d)?),
        None => pred.as_ref().map(|sets| {
            sets.iter()
                .map(|s| (s.diagram_id.clone(), recognize(s, &cfg).tuples))
                .collect()
        }),
    };
    let tuples = match pred_tuples {
        Some(pred_tuples) => {
            let gold: BTreeMap<String, Vec<RelationTuple>> = match &a.gold {
                Some(d) => load_tuple_dir(d)?,
                None => gt
                    .iter()
                    .map(|s| (s.diagram_id.clone(), recognize(s, &cfg).tuples))
                    .collect(),
            };
            let mut all: BTreeSet<&str> = ids.clone();
            all.extend(pred_tuples.keys().map(String::as_str));
            all.extend(gold.keys().map(String::as_str));
            let mut acc = Evaluator::default();
            for id in all {
                let p = pred_tuples.get(id).map(Vec::as_slice).unwrap_or(&[]);
                let g = gold.get(id).map(Vec::as_slice).unwrap_or(&[]);
                acc.add_tuples(p, g)
                    .map_err(|e| CliError::validation(format!("{id}: {e}")))?;
            }
            acc.report().tuples
        }
        None => None,
    };

    let report = EvaluateReport {
        diagrams: ids.len(),
        detection: pred.is_some().then(|| detection.report()),
        tuples,
    };
    write_json(&a.out.join(REPORT_FILE), &report)?;
    if let Some(d) = &report.detection {
        log::info!("mAP {:.4} over {} diagrams", d.map, report.diagrams);
    }
    if let Some(t) = &report.tuples {
        log::info!("tuple P {:.4} R {:.4} F1 {:.4}", t.precision, t.recall, t.f1);
    }
    m.outputs = vec![a.out.join(REPORT_FILE)];
    m.write(&a.out)?;
    Ok(m)
}
