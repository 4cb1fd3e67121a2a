//! Turns detected primitives and text blocks into a directed node graph and
//! relation tuples.
//!
//! Text inside a node names it; numeric text elsewhere labels the nearest
//! line. Every line endpoint snaps to the nearest object within the snap
//! radius. Lines snapped to each other form chains; a chain between two
//! nodes is one edge, and chains ending on a bus form a junction whose
//! parent-side nodes connect to every child-side node.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::geometry::{contains_point, point_box_distance, Point};
use crate::model::{
    sort_tuples, AnnotationSet, DiagramKind, DiagramObject, ObjectClass, ObjectId, Percentage, RelationTuple, TextBlock,
};

/// Default snap radius in native diagram units.
pub const SNAP_RADIUS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregatorConfig {
    pub snap_radius: f64,
    /// Distances closer than this count as ties.
    pub tie_tolerance: f64,
}

impl Default for AggregatorConfig {
    fn default() -> Self {
        Self {
            snap_radius: SNAP_RADIUS,
            tie_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledObject {
    pub object: DiagramObject,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percentage: Option<Percentage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Diagnostic {
    UnattachedText {
        text: ObjectId,
        content: String,
        reason: String,
    },
    UnnamedNode {
        node: ObjectId,
    },
    DanglingLine {
        line: ObjectId,
        endpoint: usize,
        point: Point,
    },
    Cycle {
        lines: Vec<ObjectId>,
    },
    BranchingChain {
        lines: Vec<ObjectId>,
        termini: usize,
    },
    SelfLoop {
        node: ObjectId,
        lines: Vec<ObjectId>,
    },
    BusBridge {
        lines: Vec<ObjectId>,
    },
    OneSidedJunction {
        bus: ObjectId,
    },
    ManyToManyJunction {
        bus: ObjectId,
        parents: Vec<ObjectId>,
        children: Vec<ObjectId>,
    },
    DuplicateEdge {
        from: ObjectId,
        to: ObjectId,
    },
    MissingPercentage {
        from: ObjectId,
        to: ObjectId,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: ObjectId,
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: ObjectId,
    pub to: ObjectId,
    /// Lines and buses merged into this edge, ascending.
    pub primitives: Vec<ObjectId>,
    pub percentage: Option<Percentage>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagramGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Recognition {
    pub tuples: Vec<RelationTuple>,
    pub graph: DiagramGraph,
    pub diagnostics: Vec<Diagnostic>,
}

fn better(d: f64, area: f64, id: ObjectId, best: Option<(f64, f64, ObjectId)>, tol: f64) -> bool {
    match best {
        None => true,
        Some((bd, ba, bi)) => {
            if d < bd - tol {
                true
            } else if d > bd + tol {
                false
            } else {
                (area, id) < (ba, bi)
            }
        }
    }
}

/// Names nodes and attaches percentages to lines.
pub fn attach_text(
    objects: &[DiagramObject],
    texts: &[TextBlock],
    kind: DiagramKind,
    config: &AggregatorConfig,
) -> (Vec<LabeledObject>, Vec<Diagnostic>) {
    let mut objects: Vec<DiagramObject> = objects.to_vec();
    objects.sort_by_key(|o| o.id);
    let mut texts: Vec<&TextBlock> = texts.iter().collect();
    texts.sort_by_key(|t| t.id);
    let mut diagnostics = Vec::new();
    let mut names: HashMap<ObjectId, Vec<&TextBlock>> = HashMap::new();
    // line id -> (distance, text)
    let mut claims: HashMap<ObjectId, Vec<(f64, &TextBlock, Percentage)>> = HashMap::new();
    let tol = config.tie_tolerance;
    for t in texts {
        let c = t.bbox.center();
        let mut host: Option<(f64, f64, ObjectId)> = None;
        for o in objects.iter().filter(|o| o.class == ObjectClass::Node) {
            if contains_point(&o.bbox, c) && better(0.0, o.bbox.area(), o.id, host, tol) {
                host = Some((0.0, o.bbox.area(), o.id));
            }
        }
        if let Some((_, _, node)) = host {
            names.entry(node).or_default().push(t);
            continue;
        }
        let unattached = |reason: &str| Diagnostic::UnattachedText {
            text: t.id,
            content: t.content.clone(),
            reason: reason.to_string(),
        };
        if kind == DiagramKind::Organization {
            diagnostics.push(unattached("text outside every node"));
            continue;
        }
        let Some(pct) = Percentage::parse(&t.content) else {
            diagnostics.push(unattached("non-numeric text outside every node"));
            continue;
        };
        let mut nearest: Option<(f64, f64, ObjectId)> = None;
        for o in objects.iter().filter(|o| o.class == ObjectClass::Line) {
            let d = point_box_distance(c, &o.bbox);
            if better(d, o.bbox.area(), o.id, nearest, tol) {
                nearest = Some((d, o.bbox.area(), o.id));
            }
        }
        match nearest {
            Some((d, _, line)) => claims.entry(line).or_default().push((d, t, pct)),
            None => diagnostics.push(unattached("no line to attach to")),
        }
    }
    let mut labeled: Vec<LabeledObject> = objects
        .into_iter()
        .map(|object| LabeledObject {
            object,
            name: None,
            percentage: None,
        })
        .collect();
    for l in labeled.iter_mut() {
        if let Some(mut blocks) = names.remove(&l.object.id) {
            blocks.sort_by(|a, b| {
                a.bbox
                    .cy()
                    .total_cmp(&b.bbox.cy())
                    .then(a.bbox.cx().total_cmp(&b.bbox.cx()))
                    .then(a.id.cmp(&b.id))
            });
            let joined = blocks
                .iter()
                .map(|b| b.content.trim())
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            if !joined.is_empty() {
                l.name = Some(joined);
            }
        }
        if let Some(mut cs) = claims.remove(&l.object.id) {
            cs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
            let mut it = cs.into_iter();
            let (_, _, pct) = it.next().expect("claims are non-empty");
            l.percentage = Some(pct);
            for (_, t, _) in it {
                diagnostics.push(Diagnostic::UnattachedText {
                    text: t.id,
                    content: t.content.clone(),
                    reason: format!("line {} already has a percentage", l.object.id),
                });
            }
        }
    }
    diagnostics.sort_by_key(|d| match d {
        Diagnostic::UnattachedText { text, .. } => *text,
        _ => 0,
    });
    (labeled, diagnostics)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Node(ObjectId),
    Bus(ObjectId),
    Line(ObjectId),
}

fn class_rank(c: ObjectClass) -> u8 {
    match c {
        ObjectClass::Node => 0,
        ObjectClass::Bus => 1,
        ObjectClass::Line => 2,
    }
}

struct Index<'a> {
    objs: Vec<&'a LabeledObject>,
    by_id: HashMap<ObjectId, usize>,
}

impl<'a> Index<'a> {
    fn get(&self, id: ObjectId) -> &'a LabeledObject {
        self.objs[self.by_id[&id]]
    }
}

/// Nearest object to a line endpoint within the snap radius.
fn resolve(ix: &Index, line: ObjectId, p: Point, config: &AggregatorConfig) -> Option<Target> {
    let tol = config.tie_tolerance;
    let mut best: Option<(f64, u8, f64, f64, ObjectId)> = None;
    for l in &ix.objs {
        let o = &l.object;
        if o.id == line {
            continue;
        }
        let d = point_box_distance(p, &o.bbox);
        if d > config.snap_radius {
            continue;
        }
        let rank = class_rank(o.class);
        let end_gap = if o.class == ObjectClass::Line {
            let (a, b) = o.endpoints();
            p.distance(a).min(p.distance(b))
        } else {
            0.0
        };
        let key = (d, rank, end_gap, o.bbox.area(), o.id);
        let take = match best {
            None => true,
            Some(b) => {
                if d < b.0 - tol {
                    true
                } else if d > b.0 + tol {
                    false
                } else {
                    (key.1, key.2, key.3, key.4) < (b.1, b.2, b.3, b.4)
                }
            }
        };
        if take {
            best = Some(key);
        }
    }
    best.map(|(_, _, _, _, id)| match ix.get(id).object.class {
        ObjectClass::Node => Target::Node(id),
        ObjectClass::Bus => Target::Bus(id),
        ObjectClass::Line => Target::Line(id),
    })
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

struct Stub {
    node: ObjectId,
    lines: Vec<ObjectId>,
    /// Whether the stub arrives at the node (node on the child side), when
    /// the stub carries an arrow.
    into_node: Option<bool>,
}

/// Builds the directed connection graph from labeled objects.
pub fn build_connection_graph(labeled: &[LabeledObject], config: &AggregatorConfig) -> DiagramGraph {
    let mut objs: Vec<&LabeledObject> = labeled.iter().collect();
    objs.sort_by_key(|l| l.object.id);
    let by_id = objs.iter().enumerate().map(|(i, l)| (l.object.id, i)).collect();
    let ix = Index { objs, by_id };
    let mut graph = DiagramGraph {
        nodes: ix
            .objs
            .iter()
            .filter(|l| l.object.class == ObjectClass::Node)
            .map(|l| GraphNode {
                id: l.object.id,
                name: l.name.clone(),
            })
            .collect(),
        ..DiagramGraph::default()
    };
    let lines: Vec<ObjectId> = ix
        .objs
        .iter()
        .filter(|l| l.object.class == ObjectClass::Line)
        .map(|l| l.object.id)
        .collect();
    let pos: HashMap<ObjectId, usize> = lines.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut targets: Vec<[Option<Target>; 2]> = Vec::with_capacity(lines.len());
    for &id in &lines {
        let (a, b) = ix.get(id).object.endpoints();
        targets.push([resolve(&ix, id, a, config), resolve(&ix, id, b, config)]);
    }

    let mut uf: Vec<usize> = (0..lines.len()).collect();
    let mut links: BTreeSet<(ObjectId, ObjectId)> = BTreeSet::new();
    for (i, t) in targets.iter().enumerate() {
        for tgt in t.iter().flatten() {
            if let Target::Line(other) = tgt {
                let j = pos[other];
                let (a, b) = (find(&mut uf, i), find(&mut uf, j));
                uf[a] = b;
                links.insert((lines[i].min(*other), lines[i].max(*other)));
            }
        }
    }
    let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..lines.len() {
        let r = find(&mut uf, i);
        comps.entry(r).or_default().push(i);
    }
    let mut adjacency: HashMap<ObjectId, Vec<ObjectId>> = HashMap::new();
    for &(a, b) in &links {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }

    let center = |id: ObjectId| ix.get(id).object.bbox.center();
    let mut chain_edges: Vec<GraphEdge> = Vec::new();
    let mut stubs: BTreeMap<ObjectId, Vec<Stub>> = BTreeMap::new();
    let mut comp_list: Vec<Vec<usize>> = comps.into_values().collect();
    comp_list.sort_by_key(|c| lines[c[0]]);
    for comp in comp_list {
        let ids: Vec<ObjectId> = comp.iter().map(|&i| lines[i]).collect();
        let mut dangling = false;
        for &i in &comp {
            for (k, t) in targets[i].iter().enumerate() {
                if t.is_none() {
                    dangling = true;
                    let (a, b) = ix.get(lines[i]).object.endpoints();
                    graph.diagnostics.push(Diagnostic::DanglingLine {
                        line: lines[i],
                        endpoint: k,
                        point: if k == 0 { a } else { b },
                    });
                }
            }
        }
        if dangling {
            continue;
        }
        let internal = links.iter().filter(|(a, b)| ids.contains(a) && ids.contains(b)).count();
        if internal >= ids.len() {
            graph.diagnostics.push(Diagnostic::Cycle { lines: ids });
            continue;
        }
        let mut termini: Vec<(ObjectId, usize, Target)> = Vec::new();
        for &i in &comp {
            for (k, t) in targets[i].iter().enumerate() {
                match t {
                    Some(Target::Line(_)) | None => {}
                    Some(t) => termini.push((lines[i], k, *t)),
                }
            }
        }
        if termini.len() != 2 {
            graph.diagnostics.push(Diagnostic::BranchingChain {
                lines: ids,
                termini: termini.len(),
            });
            continue;
        }
        let arrow_line = ids.iter().copied().find(|&id| ix.get(id).object.keypoints.is_some());
        // Terminus reached when leaving `line` through endpoint `k`.
        let reach = |line: ObjectId, k: usize| -> Option<Target> {
            if let Some(t) = termini.iter().find(|(l, kk, _)| *l == line && *kk == k) {
                return Some(t.2);
            }
            let Some(Target::Line(start)) = targets[pos[&line]][k] else {
                return None;
            };
            let mut seen: BTreeSet<ObjectId> = BTreeSet::from([line, start]);
            let mut queue = VecDeque::from([start]);
            while let Some(cur) = queue.pop_front() {
                if let Some(t) = termini.iter().find(|(l, _, _)| *l == cur) {
                    return Some(t.2);
                }
                for &n in adjacency.get(&cur).into_iter().flatten() {
                    if seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
            None
        };
        match (termini[0].2, termini[1].2) {
            (Target::Node(a), Target::Node(b)) => {
                if a == b {
                    graph.diagnostics.push(Diagnostic::SelfLoop { node: a, lines: ids });
                    continue;
                }
                let (from, to) = if let Some(l) = arrow_line {
                    match reach(l, 1) {
                        Some(Target::Node(child)) if child == a => (b, a),
                        _ => (a, b),
                    }
                } else {
                    let pts: Vec<Point> = ids
                        .iter()
                        .flat_map(|&id| {
                            let (u, v) = ix.get(id).object.endpoints();
                            [u, v]
                        })
                        .collect();
                    let span = |f: fn(&Point) -> f64| {
                        let vs = pts.iter().map(f);
                        vs.clone().fold(f64::NEG_INFINITY, f64::max) - vs.fold(f64::INFINITY, f64::min)
                    };
                    let (ca, cb) = (center(a), center(b));
                    let a_first = if span(|q| q.y) >= span(|q| q.x) {
                        (ca.y, ca.x) < (cb.y, cb.x)
                    } else {
                        (ca.x, ca.y) < (cb.x, cb.y)
                    };
                    if a_first {
                        (a, b)
                    } else {
                        (b, a)
                    }
                };
                let percentage = ids.iter().find_map(|&id| ix.get(id).percentage.clone());
                chain_edges.push(GraphEdge {
                    from,
                    to,
                    primitives: ids,
                    percentage,
                });
            }
            (Target::Node(n), Target::Bus(bus)) | (Target::Bus(bus), Target::Node(n)) => {
                let into_node = arrow_line.map(|l| reach(l, 1) == Some(Target::Node(n)));
                stubs.entry(bus).or_default().push(Stub {
                    node: n,
                    lines: ids,
                    into_node,
                });
            }
            _ => graph.diagnostics.push(Diagnostic::BusBridge { lines: ids }),
        }
    }

    let mut bus_edges: Vec<GraphEdge> = Vec::new();
    for (bus, ss) in stubs {
        let b = &ix.get(bus).object.bbox;
        let horizontal = b.theta().cos().abs() >= b.theta().sin().abs();
        let mut parents: BTreeMap<ObjectId, Vec<ObjectId>> = BTreeMap::new();
        let mut children: BTreeMap<ObjectId, Vec<ObjectId>> = BTreeMap::new();
        for s in ss {
            let parent_side = match s.into_node {
                Some(into) => !into,
                None => {
                    let c = center(s.node);
                    if horizontal {
                        c.y < b.cy()
                    } else {
                        c.x < b.cx()
                    }
                }
            };
            let side = if parent_side { &mut parents } else { &mut children };
            side.entry(s.node).or_default().extend(s.lines);
        }
        if parents.is_empty() || children.is_empty() {
            graph.diagnostics.push(Diagnostic::OneSidedJunction { bus });
            continue;
        }
        if parents.len() >= 2 && children.len() >= 2 {
            graph.diagnostics.push(Diagnostic::ManyToManyJunction {
                bus,
                parents: parents.keys().copied().collect(),
                children: children.keys().copied().collect(),
            });
            continue;
        }
        for (&p, pl) in &parents {
            for (&c, cl) in &children {
                let mut prims: Vec<ObjectId> = pl.iter().chain(cl.iter()).copied().collect();
                prims.sort_unstable();
                prims.dedup();
                let percentage = prims.iter().find_map(|&id| ix.get(id).percentage.clone());
                prims.push(bus);
                prims.sort_unstable();
                bus_edges.push(GraphEdge {
                    from: p,
                    to: c,
                    primitives: prims,
                    percentage,
                });
            }
        }
    }

    let mut all: Vec<GraphEdge> = chain_edges.into_iter().chain(bus_edges).collect();
    all.sort_by(|a, b| (a.from, a.to, &a.primitives).cmp(&(b.from, b.to, &b.primitives)));
    for e in all {
        match graph.edges.last_mut() {
            Some(last) if last.from == e.from && last.to == e.to => {
                graph
                    .diagnostics
                    .push(Diagnostic::DuplicateEdge { from: e.from, to: e.to });
                if last.percentage.is_none() {
                    last.percentage = e.percentage;
                }
            }
            _ => graph.edges.push(e),
        }
    }
    graph
}

/// Relation tuples from a graph, sorted by (parent, child). Edges touching an
/// unnamed node are skipped and reported.
pub fn extract_tuples(graph: &DiagramGraph, kind: DiagramKind) -> (Vec<RelationTuple>, Vec<Diagnostic>) {
    let names: HashMap<ObjectId, &Option<String>> = graph.nodes.iter().map(|n| (n.id, &n.name)).collect();
    let mut out = Vec::new();
    let mut diagnostics = Vec::new();
    let mut unnamed = BTreeSet::new();
    for e in &graph.edges {
        let name = |id| names.get(&id).and_then(|n| n.as_ref()).cloned();
        let (Some(parent), Some(child)) = (name(e.from), name(e.to)) else {
            for id in [e.from, e.to] {
                if name(id).is_none() {
                    unnamed.insert(id);
                }
            }
            continue;
        };
        out.push(match kind {
            DiagramKind::Ownership => {
                if e.percentage.is_none() {
                    diagnostics.push(Diagnostic::MissingPercentage { from: e.from, to: e.to });
                }
                RelationTuple::Ownership {
                    owner: parent,
                    percentage: e.percentage.as_ref().map(|p| p.value),
                    owned: child,
                }
            }
            DiagramKind::Organization => RelationTuple::Organization {
                supervisor: parent,
                subordinate: child,
            },
        });
    }
    diagnostics.extend(unnamed.into_iter().map(|node| Diagnostic::UnnamedNode { node }));
    sort_tuples(&mut out);
    (out, diagnostics)
}

/// Full pipeline over one annotation set.
pub fn recognize(set: &AnnotationSet, config: &AggregatorConfig) -> Recognition {
    recognize_parts(&set.objects, &set.texts, set.kind, config)
}

/// Full pipeline over detected objects plus separately supplied text blocks.
pub fn recognize_parts(
    objects: &[DiagramObject],
    texts: &[TextBlock],
    kind: DiagramKind,
    config: &AggregatorConfig,
) -> Recognition {
    let (labeled, mut diagnostics) = attach_text(objects, texts, kind, config);
    let graph = build_connection_graph(&labeled, config);
    let (tuples, more) = extract_tuples(&graph, kind);
    diagnostics.extend(graph.diagnostics.iter().cloned());
    diagnostics.extend(more);
    Recognition {
        tuples,
        graph,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{enclosing_box, OrientedBox};
    use crate::model::Keypoints;

    fn node(id: ObjectId, cx: f64, cy: f64) -> DiagramObject {
        DiagramObject::ground_truth(
            id,
            ObjectClass::Node,
            OrientedBox::new(cx, cy, 80.0, 30.0, 0.0).unwrap(),
        )
    }

    fn seg(id: ObjectId, a: (f64, f64), b: (f64, f64)) -> DiagramObject {
        let bx = enclosing_box(&[Point::new(a.0, a.1), Point::new(b.0, b.1)], 4.0).unwrap();
        DiagramObject::ground_truth(id, ObjectClass::Line, bx)
    }

    fn arrow(mut o: DiagramObject, a: (f64, f64), b: (f64, f64)) -> DiagramObject {
        o.keypoints = Some(Keypoints {
            start: Point::new(a.0, a.1),
            end: Point::new(b.0, b.1),
        });
        o
    }

    fn text(id: ObjectId, cx: f64, cy: f64, s: &str) -> TextBlock {
        TextBlock {
            id,
            bbox: OrientedBox::new(cx, cy, 30.0, 12.0, 0.0).unwrap(),
            content: s.to_string(),
        }
    }

    fn set(kind: DiagramKind, objects: Vec<DiagramObject>, texts: Vec<TextBlock>) -> AnnotationSet {
        let mut s = AnnotationSet::new("t", kind, 1000.0, 1000.0);
        s.objects = objects;
        s.texts = texts;
        s
    }

    fn own(a: &str, p: Option<f64>, b: &str) -> RelationTuple {
        RelationTuple::Ownership {
            owner: a.into(),
            percentage: p,
            owned: b.into(),
        }
    }

    #[test]
    fn vertical_line_upper_node_is_parent() {
        let s = set(
            DiagramKind::Ownership,
            vec![
                node(0, 100.0, 100.0),
                node(1, 100.0, 300.0),
                seg(2, (100.0, 115.0), (100.0, 285.0)),
            ],
            vec![
                text(3, 100.0, 100.0, "A"),
                text(4, 100.0, 300.0, "B"),
                text(5, 125.0, 200.0, "60.0%"),
            ],
        );
        let r = recognize(&s, &AggregatorConfig::default());
        assert_eq!(r.tuples, vec![own("A", Some(60.0), "B")]);
        assert!(r.diagnostics.is_empty(), "{:?}", r.diagnostics);
    }

    #[test]
    fn wide_chain_reads_left_to_right() {
        let s = set(
            DiagramKind::Organization,
            vec![
                node(0, 400.0, 100.0),
                node(1, 100.0, 110.0),
                seg(2, (140.0, 105.0), (360.0, 105.0)),
            ],
            vec![text(3, 400.0, 100.0, "Right"), text(4, 100.0, 110.0, "Left")],
        );
        let r = recognize(&s, &AggregatorConfig::default());
        assert_eq!(
            r.tuples,
            vec![RelationTuple::Organization {
                supervisor: "Left".into(),
                subordinate: "Right".into()
            }]
        );
    }

    #[test]
    fn arrow_overrides_default_direction() {
        let l = arrow(seg(2, (100.0, 115.0), (100.0, 285.0)), (100.0, 285.0), (100.0, 115.0));
        let s = set(
            DiagramKind::Organization,
            vec![node(0, 100.0, 100.0), node(1, 100.0, 300.0), l],
            vec![text(3, 100.0, 100.0, "Top"), text(4, 100.0, 300.0, "Bottom")],
        );
        let r = recognize(&s, &AggregatorConfig::default());
        assert_eq!(
            r.tuples,
            vec![RelationTuple::Organization {
                supervisor: "Bottom".into(),
                subordinate: "Top".into()
            }]
        );
    }

    #[test]
    fn elbow_chain_merges_into_one_edge() {
        let a = seg(2, (100.0, 115.0), (100.0, 200.0));
        let b = seg(3, (100.0, 200.0), (300.0, 200.0));
        let c = arrow(seg(4, (300.0, 200.0), (300.0, 285.0)), (300.0, 200.0), (300.0, 285.0));
        let s = set(
            DiagramKind::Ownership,
            vec![node(0, 100.0, 100.0), node(1, 300.0, 300.0), a, b, c],
            vec![
                text(5, 100.0, 100.0, "P"),
                text(6, 300.0, 300.0, "C"),
                text(7, 200.0, 190.0, "30%"),
            ],
        );
        let r = recognize(&s, &AggregatorConfig::default());
        assert_eq!(r.tuples, vec![own("P", Some(30.0), "C")]);
        assert_eq!(r.graph.edges[0].primitives, vec![2, 3, 4]);
    }

    #[test]
    fn bus_fan_out() {
        let mut objs = vec![
            node(0, 300.0, 100.0),
            node(1, 100.0, 300.0),
            node(2, 300.0, 300.0),
            node(3, 500.0, 300.0),
        ];
        objs.push(seg(4, (300.0, 115.0), (300.0, 200.0)));
        for (i, x) in [100.0, 300.0, 500.0].into_iter().enumerate() {
            objs.push(seg(5 + i as ObjectId, (x, 200.0), (x, 285.0)));
        }
        objs.push(DiagramObject::ground_truth(
            8,
            ObjectClass::Bus,
            enclosing_box(&[Point::new(100.0, 200.0), Point::new(500.0, 200.0)], 4.0).unwrap(),
        ));
        let texts = vec![
            text(10, 300.0, 100.0, "Parent"),
            text(11, 100.0, 300.0, "C1"),
            text(12, 300.0, 300.0, "C2"),
            text(13, 500.0, 300.0, "C3"),
            text(14, 125.0, 250.0, "10%"),
            text(15, 325.0, 250.0, "20%"),
            text(16, 525.0, 250.0, "70%"),
        ];
        let r = recognize(&set(DiagramKind::Ownership, objs, texts), &AggregatorConfig::default());
        assert_eq!(
            r.tuples,
            vec![
                own("Parent", Some(10.0), "C1"),
                own("Parent", Some(20.0), "C2"),
                own("Parent", Some(70.0), "C3")
            ]
        );
        assert!(r.diagnostics.is_empty(), "{:?}", r.diagnostics);
    }

    #[test]
    fn dangling_line_is_reported_and_dropped() {
        let s = set(
            DiagramKind::Organization,
            vec![node(0, 100.0, 100.0), seg(1, (100.0, 115.0), (100.0, 250.0))],
            vec![text(2, 100.0, 100.0, "A")],
        );
        let r = recognize(&s, &AggregatorConfig::default());
        assert!(r.tuples.is_empty());
        assert!(matches!(
            r.diagnostics[0],
            Diagnostic::DanglingLine {
                line: 1,
                endpoint: 1,
                ..
            }
        ));
    }

    #[test]
    fn missing_percentage_is_flagged() {
        let s = set(
            DiagramKind::Ownership,
            vec![
                node(0, 100.0, 100.0),
                node(1, 100.0, 300.0),
                seg(2, (100.0, 115.0), (100.0, 285.0)),
            ],
            vec![text(3, 100.0, 100.0, "A"), text(4, 100.0, 300.0, "B")],
        );
        let r = recognize(&s, &AggregatorConfig::default());
        assert_eq!(r.tuples, vec![own("A", None, "B")]);
        assert!(r
            .diagnostics
            .contains(&Diagnostic::MissingPercentage { from: 0, to: 1 }));
    }

    #[test]
    fn multi_block_names_join_top_to_bottom() {
        let big = DiagramObject::ground_truth(
            0,
            ObjectClass::Node,
            OrientedBox::new(100.0, 100.0, 120.0, 60.0, 0.0).unwrap(),
        );
        let (l, d) = attach_text(
            &[big],
            &[text(2, 100.0, 115.0, "Holdings"), text(1, 100.0, 90.0, "Acme")],
            DiagramKind::Ownership,
            &AggregatorConfig::default(),
        );
        assert!(d.is_empty());
        assert_eq!(l[0].name.as_deref(), Some("Acme Holdings"));
    }

    #[test]
    fn organization_free_text_is_unattached() {
        let (_, d) = attach_text(
            &[node(0, 100.0, 100.0), seg(1, (100.0, 115.0), (100.0, 285.0))],
            &[text(2, 120.0, 200.0, "50%")],
            DiagramKind::Organization,
            &AggregatorConfig::default(),
        );
        assert!(matches!(d[0], Diagnostic::UnattachedText { text: 2, .. }));
    }

    #[test]
    fn two_numbers_two_lines_match_exhaustive_nearest() {
        // Oracle: every text goes to the line with minimal distance, found by
        // checking every (text, line) pair.
        let lines = [seg(0, (0.0, 0.0), (0.0, 100.0)), seg(1, (60.0, 0.0), (60.0, 100.0))];
        let texts = [text(2, 15.0, 50.0, "10%"), text(3, 52.0, 30.0, "20%")];
        let (l, d) = attach_text(&lines, &texts, DiagramKind::Ownership, &AggregatorConfig::default());
        assert!(d.is_empty());
        for t in &texts {
            let c = t.bbox.center();
            let best = lines
                .iter()
                .min_by(|a, b| point_box_distance(c, &a.bbox).total_cmp(&point_box_distance(c, &b.bbox)))
                .unwrap();
            let got = l.iter().find(|o| o.object.id == best.id).unwrap();
            assert_eq!(got.percentage.as_ref().unwrap().text, t.content);
        }
    }

    #[test]
    fn empty_set_gives_nothing() {
        let r = recognize(
            &set(DiagramKind::Ownership, vec![], vec![]),
            &AggregatorConfig::default(),
        );
        assert!(r.tuples.is_empty() && r.diagnostics.is_empty());
    }

    #[test]
    fn many_to_many_bus_is_flagged() {
        let mut objs = vec![
            node(0, 100.0, 100.0),
            node(1, 300.0, 100.0),
            node(2, 100.0, 300.0),
            node(3, 300.0, 300.0),
        ];
        objs.push(seg(4, (100.0, 115.0), (100.0, 200.0)));
        objs.push(seg(5, (300.0, 115.0), (300.0, 200.0)));
        objs.push(seg(6, (100.0, 200.0), (100.0, 285.0)));
        objs.push(seg(7, (300.0, 200.0), (300.0, 285.0)));
        objs.push(DiagramObject::ground_truth(
            8,
            ObjectClass::Bus,
            enclosing_box(&[Point::new(100.0, 200.0), Point::new(300.0, 200.0)], 4.0).unwrap(),
        ));
        let r = recognize(
            &set(DiagramKind::Organization, objs, vec![]),
            &AggregatorConfig::default(),
        );
        assert!(r.graph.edges.is_empty());
        assert!(matches!(
            r.diagnostics[0],
            Diagnostic::ManyToManyJunction { bus: 8, .. }
        ));
    }
}
