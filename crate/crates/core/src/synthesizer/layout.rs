use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{enclosing_box, point_box_distance, rotated_iou, OrientedBox, Point};
use crate::model::{DiagramKind, ObjectId, Topology, SNAP_TOLERANCE};

use super::config::{Palette, StyleConfig};
use super::SynthError;

/// Minimum thickness of a line or bus ground-truth box.
pub const LINE_THICKNESS: f64 = 4.0;

const MARGIN: f64 = 30.0;
const NODE_GAP: f64 = 40.0;
const BASE_GAP: f64 = 56.0;
const TRACK_SPACING: f64 = 12.0;
const PORT_SPACING: f64 = 22.0;
const CORRIDOR_GAP: f64 = 30.0;
const CORRIDOR_STEP: f64 = 16.0;
const MAX_BULGE: f64 = 10.0;
const MIN_ELBOW_JOG: f64 = 8.0;
const LABEL_CLEARANCE: f64 = 1.0;
const MAX_RETRIES: usize = 10;
const ROW_STAGGER: f64 = 7.0;
const CURVE_SAMPLES: usize = 32;

/// Approximate advance width of `s` at `font_size`.
pub fn text_width(s: &str, font_size: f64) -> f64 {
    s.chars().map(|c| if c.is_ascii() { 0.6 } else { 1.0 }).sum::<f64>() * font_size
}

pub fn text_height(font_size: f64) -> f64 {
    1.2 * font_size
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    TopDown,
    LeftRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeShape {
    Rectangle,
    Rounded,
}

/// Style choices resolved for one diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramStyle {
    pub orientation: Orientation,
    pub node_shape: NodeShape,
    pub palette: Palette,
    pub line_width: f64,
    pub arrowheads: bool,
    pub font_size: f64,
    pub max_incline_angle: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextPlacement {
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub content: String,
    pub font_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePlacement {
    pub entity: ObjectId,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub name: TextPlacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Stroke {
    Straight { from: Point, to: Point },
    Quadratic { from: Point, control: Point, to: Point },
}

impl Stroke {
    pub fn start(&self) -> Point {
        match *self {
            Stroke::Straight { from, .. } | Stroke::Quadratic { from, .. } => from,
        }
    }

    pub fn end(&self) -> Point {
        match *self {
            Stroke::Straight { to, .. } | Stroke::Quadratic { to, .. } => to,
        }
    }

    pub fn point_at(&self, t: f64) -> Point {
        match *self {
            Stroke::Straight { from, to } => from.lerp(to, t),
            Stroke::Quadratic { from, control, to } => {
                let s = 1.0 - t;
                from * (s * s) + control * (2.0 * s * t) + to * (t * t)
            }
        }
    }

    /// Unit tangent at parameter `t`.
    pub fn tangent_at(&self, t: f64) -> Point {
        let d = match *self {
            Stroke::Straight { from, to } => to - from,
            Stroke::Quadratic { from, control, to } => {
                (control - from) * (2.0 * (1.0 - t)) + (to - control) * (2.0 * t)
            }
        };
        d * (1.0 / d.norm())
    }

    /// Polyline approximation; exact for straight strokes.
    pub fn samples(&self) -> Vec<Point> {
        match self {
            Stroke::Straight { from, to } => vec![*from, *to],
            Stroke::Quadratic { .. } => (0..=CURVE_SAMPLES)
                .map(|i| self.point_at(i as f64 / CURVE_SAMPLES as f64))
                .collect(),
        }
    }

    pub fn length(&self) -> f64 {
        self.samples().windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Min-area box of the polyline, grown to the line thickness floor.
    pub fn ground_truth_box(&self) -> OrientedBox {
        enclosing_box(&self.samples(), LINE_THICKNESS).expect("thickness floor is positive")
    }
}

/// One drawn line primitive and the topology edges it carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub stroke: Stroke,
    pub edges: Vec<usize>,
    /// Arrowhead at the stroke end.
    pub arrow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusSegment {
    pub from: Point,
    pub to: Point,
    pub edges: Vec<usize>,
}

impl BusSegment {
    pub fn ground_truth_box(&self) -> OrientedBox {
        enclosing_box(&[self.from, self.to], LINE_THICKNESS).expect("thickness floor is positive")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeLabel {
    pub edge: usize,
    /// Primitive the label is placed against.
    pub primitive: usize,
    pub text: TextPlacement,
}

/// Fully placed diagram, in canvas coordinates (y down).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramLayout {
    pub diagram_id: String,
    pub kind: DiagramKind,
    pub width: f64,
    pub height: f64,
    pub style: DiagramStyle,
    pub edge_count: usize,
    pub nodes: Vec<NodePlacement>,
    pub primitives: Vec<Primitive>,
    pub buses: Vec<BusSegment>,
    pub labels: Vec<EdgeLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayoutViolation {
    UnmappedEdge(usize),
    NodeOverlap(usize, usize),
    DanglingEndpoint { primitive: usize, end: usize },
}

impl DiagramLayout {
    pub fn primitives_of(&self, edge: usize) -> impl Iterator<Item = (usize, &Primitive)> {
        self.primitives
            .iter()
            .enumerate()
            .filter(move |(_, p)| p.edges.contains(&edge))
    }

    /// Checks the structural invariants of a layout.
    pub fn check(&self) -> Vec<LayoutViolation> {
        let mut out = Vec::new();
        for e in 0..self.edge_count {
            if self.primitives_of(e).next().is_none() {
                out.push(LayoutViolation::UnmappedEdge(e));
            }
        }
        for i in 0..self.nodes.len() {
            for j in i + 1..self.nodes.len() {
                if rotated_iou(&self.nodes[i].bbox, &self.nodes[j].bbox) > 0.0 {
                    out.push(LayoutViolation::NodeOverlap(i, j));
                }
            }
        }
        let prim_boxes: Vec<OrientedBox> = self.primitives.iter().map(|p| p.stroke.ground_truth_box()).collect();
        let bus_boxes: Vec<OrientedBox> = self.buses.iter().map(|b| b.ground_truth_box()).collect();
        for (i, p) in self.primitives.iter().enumerate() {
            for (end, q) in [p.stroke.start(), p.stroke.end()].into_iter().enumerate() {
                let near = |b: &OrientedBox| point_box_distance(q, b) <= SNAP_TOLERANCE;
                let ok =
                    self.nodes.iter().any(|n| near(&n.bbox))
                        || bus_boxes.iter().any(near)
                        || self.primitives.iter().enumerate().any(|(j, o)| {
                            j != i && o.edges.iter().any(|e| p.edges.contains(e)) && near(&prim_boxes[j])
                        });
                if !ok {
                    out.push(LayoutViolation::DanglingEndpoint { primitive: i, end });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct EdgeDraw {
    curved: bool,
    inclined: bool,
    bend: f64,
    overlap: bool,
}

/// Lays out a topology as a layered drawing.
///
/// Levels become rows (top-down) or columns (left-right). Each edge leaves its
/// parent and enters its child through its own port. Orthogonal routes run
/// along horizontal tracks allocated in the gap between levels; shortcut
/// edges detour through a corridor beyond the widest level. When a label
/// cannot be placed unambiguously the spacing is widened and the layout is
/// retried.
pub fn layout_diagram(t: &Topology, style: &StyleConfig, seed: u64) -> Result<DiagramLayout, SynthError> {
    style.validate()?;
    let bad = t.validate();
    if !bad.is_empty() {
        return Err(SynthError::Layout(format!("invalid topology: {bad:?}")));
    }
    if t.entities.is_empty() {
        return Err(SynthError::Layout("topology has no entities".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let (flo, fhi) = style.font_size_range;
    let ds = DiagramStyle {
        orientation: if rng.random_bool(style.left_right_probability) {
            Orientation::LeftRight
        } else {
            Orientation::TopDown
        },
        node_shape: if rng.random_bool(style.rounded_probability) {
            NodeShape::Rounded
        } else {
            NodeShape::Rectangle
        },
        palette: style.palettes[rng.random_range(0..style.palettes.len())].clone(),
        line_width: style.line_width,
        arrowheads: rng.random_bool(style.arrowhead_probability),
        font_size: ((flo + (fhi - flo) * rng.random::<f64>()) * 2.0).round() / 2.0,
        max_incline_angle: style.max_incline_angle,
        curvature: style.curvature,
    };
    let draws: Vec<EdgeDraw> = t
        .edges
        .iter()
        .map(|_| EdgeDraw {
            curved: rng.random_bool(style.curve_probability),
            inclined: rng.random_bool(style.incline_probability),
            bend: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            overlap: rng.random_bool(style.label_overlap_probability),
        })
        .collect();
    let mut last = String::new();
    for attempt in 0..=MAX_RETRIES {
        let spread = 1.0 + 0.5 * attempt as f64;
        let stagger = ROW_STAGGER * (attempt % 3) as f64;
        match attempt_layout(t, &ds, &draws, spread, stagger) {
            Ok(mut layout) => {
                layout.diagram_id = format!("{}-{seed:06}", t.kind);
                return Ok(layout);
            }
            Err(e) => {
                log::debug!("seed {seed}: layout attempt {attempt} rejected: {e}");
                last = e;
            }
        }
    }
    Err(SynthError::Layout(format!(
        "no valid layout after {MAX_RETRIES} widening retries: {last}"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum PortKey {
    Edge(usize),
    Trunk(usize),
    Branch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum TrackUser {
    Bus(usize),
    Elbow(usize),
    ShortcutOut(usize),
    ShortcutIn(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Route {
    Direct,
    Curve,
    Elbow,
    Shortcut,
}

const TOP: usize = 0;
const BOTTOM: usize = 1;

fn aabb_overlap(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64), margin: f64) -> bool {
    a.0 < b.2 + margin && b.0 < a.2 + margin && a.1 < b.3 + margin && b.1 < a.3 + margin
}

fn attempt_layout(
    t: &Topology,
    ds: &DiagramStyle,
    draws: &[EdgeDraw],
    spread: f64,
    stagger: f64,
) -> Result<DiagramLayout, String> {
    let n = t.entities.len();
    let idx: HashMap<ObjectId, usize> = t.entities.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
    let level = |i: usize| t.levels[i];
    let m = t.levels.iter().copied().max().unwrap_or(0) + 1;
    let fs = ds.font_size;
    let td = ds.orientation == Orientation::TopDown;
    let screen = |o: f64, r: f64| if td { Point::new(o, r) } else { Point::new(r, o) };
    let ends: Vec<(usize, usize)> = t.edges.iter().map(|e| (idx[&e.parent], idx[&e.child])).collect();

    let mut edge_bus: Vec<Option<usize>> = vec![None; t.edges.len()];
    let mut bus_members: Vec<Vec<usize>> = vec![Vec::new(); t.bus_groups.len()];
    for (g, bg) in t.bus_groups.iter().enumerate() {
        for (e, edge) in t.edges.iter().enumerate() {
            if edge_bus[e].is_none() && bg.parents.contains(&edge.parent) && bg.children.contains(&edge.child) {
                edge_bus[e] = Some(g);
                bus_members[g].push(e);
            }
        }
        if bus_members[g].is_empty() {
            return Err(format!("bus group {g} has no edges"));
        }
    }
    let fan_out = |g: usize| t.bus_groups[g].parents.len() == 1;

    // Port requests per node side.
    let mut side_ports: Vec<[Vec<PortKey>; 2]> = vec![[Vec::new(), Vec::new()]; n];
    for (g, bg) in t.bus_groups.iter().enumerate() {
        if fan_out(g) {
            side_ports[idx[&bg.parents[0]]][BOTTOM].push(PortKey::Trunk(g));
            for c in &bg.children {
                side_ports[idx[c]][TOP].push(PortKey::Branch(g, idx[c]));
            }
        } else {
            for p in &bg.parents {
                side_ports[idx[p]][BOTTOM].push(PortKey::Branch(g, idx[p]));
            }
            side_ports[idx[&bg.children[0]]][TOP].push(PortKey::Trunk(g));
        }
    }
    for (e, &(p, c)) in ends.iter().enumerate() {
        if edge_bus[e].is_none() {
            side_ports[p][BOTTOM].push(PortKey::Edge(e));
            side_ports[c][TOP].push(PortKey::Edge(e));
        }
    }

    // Node extents along the level axis (o) and across it (r).
    let pad = 0.8 * fs;
    let mut o_ext = vec![0.0; n];
    let mut r_ext = vec![0.0; n];
    let mut name_w = vec![0.0; n];
    for i in 0..n {
        let tw = text_width(&t.entities[i].name, fs);
        let th = text_height(fs);
        name_w[i] = tw;
        let k = side_ports[i][TOP].len().max(side_ports[i][BOTTOM].len());
        let need = (k + 1) as f64 * PORT_SPACING;
        if td {
            o_ext[i] = (tw + 2.0 * pad).max(need);
            r_ext[i] = th + pad;
        } else {
            o_ext[i] = (th + pad).max(need);
            r_ext[i] = tw + 2.0 * pad;
        }
    }

    // Order within levels by parent barycenter.
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); m];
    for i in 0..n {
        rows[level(i)].push(i);
    }
    let mut rank = vec![0.0; n];
    for (l, row) in rows.iter_mut().enumerate() {
        if l > 0 {
            let bary: HashMap<usize, f64> = row
                .iter()
                .map(|&i| {
                    let ps: Vec<f64> = ends.iter().filter(|&&(_, c)| c == i).map(|&(p, _)| rank[p]).collect();
                    let b = if ps.is_empty() {
                        rank[i]
                    } else {
                        ps.iter().sum::<f64>() / ps.len() as f64
                    };
                    (i, b)
                })
                .collect();
            row.sort_by(|a, b| bary[a].total_cmp(&bary[b]).then(a.cmp(b)));
        }
        let len = row.len() as f64;
        for (j, &i) in row.iter().enumerate() {
            rank[i] = (j as f64 + 0.5) / len;
        }
    }

    let gap = NODE_GAP * spread;
    let row_len: Vec<f64> = rows
        .iter()
        .map(|row| row.iter().map(|&i| o_ext[i]).sum::<f64>() + gap * (row.len().saturating_sub(1)) as f64)
        .collect();
    let widest = row_len.iter().copied().fold(0.0, f64::max);
    let mut o_left = vec![0.0; n];
    for (l, row) in rows.iter().enumerate() {
        let mut o = MARGIN + (widest - row_len[l]) / 2.0 + if l % 2 == 1 { stagger } else { 0.0 };
        for &i in row {
            o_left[i] = o;
            o += o_ext[i] + gap;
        }
    }
    let center_o = |i: usize| o_left[i] + o_ext[i] / 2.0;
    let is_shortcut = |e: usize| level(ends[e].1) - level(ends[e].0) >= 2;

    // Port positions, ordered along each side by where their other end lies.
    let mut port_o: HashMap<(usize, usize, PortKey), f64> = HashMap::new();
    for i in 0..n {
        for side in [TOP, BOTTOM] {
            let target = |key: &PortKey| -> f64 {
                match *key {
                    PortKey::Edge(e) => {
                        if is_shortcut(e) {
                            1e9 + e as f64
                        } else {
                            let (p, c) = ends[e];
                            center_o(if p == i { c } else { p })
                        }
                    }
                    PortKey::Trunk(g) => {
                        let bg = &t.bus_groups[g];
                        let others = if fan_out(g) { &bg.children } else { &bg.parents };
                        others.iter().map(|id| center_o(idx[id])).sum::<f64>() / others.len() as f64
                    }
                    PortKey::Branch(g, _) => {
                        let bg = &t.bus_groups[g];
                        let trunk = if fan_out(g) { bg.parents[0] } else { bg.children[0] };
                        center_o(idx[&trunk])
                    }
                }
            };
            let mut keys = side_ports[i][side].clone();
            keys.sort_by(|a, b| target(a).total_cmp(&target(b)));
            let k = keys.len() as f64;
            for (j, key) in keys.into_iter().enumerate() {
                port_o.insert((i, side, key), o_left[i] + (j as f64 + 1.0) * o_ext[i] / (k + 1.0));
            }
        }
    }

    // Route choice for edges not drawn through a bus.
    let min_gap = BASE_GAP * spread;
    let mut routes: Vec<Option<Route>> = vec![None; t.edges.len()];
    for (e, &(p, c)) in ends.iter().enumerate() {
        if edge_bus[e].is_some() {
            continue;
        }
        if is_shortcut(e) {
            routes[e] = Some(Route::Shortcut);
            continue;
        }
        let dpo = port_o[&(c, TOP, PortKey::Edge(e))] - port_o[&(p, BOTTOM, PortKey::Edge(e))];
        let fits = dpo.abs().atan2(min_gap) <= ds.max_incline_angle;
        routes[e] = Some(if draws[e].curved && fits {
            Route::Curve
        } else if (draws[e].inclined && fits) || dpo.abs() < MIN_ELBOW_JOG {
            Route::Direct
        } else {
            Route::Elbow
        });
    }

    // Track allocation in the gaps between levels.
    let mut gap_users: Vec<Vec<TrackUser>> = vec![Vec::new(); m.saturating_sub(1)];
    for (g, bg) in t.bus_groups.iter().enumerate() {
        gap_users[level(idx[&bg.parents[0]])].push(TrackUser::Bus(g));
    }
    for (e, r) in routes.iter().enumerate() {
        match r {
            Some(Route::Elbow) => gap_users[level(ends[e].0)].push(TrackUser::Elbow(e)),
            Some(Route::Shortcut) => {
                gap_users[level(ends[e].0)].push(TrackUser::ShortcutOut(e));
                gap_users[level(ends[e].1) - 1].push(TrackUser::ShortcutIn(e));
            }
            _ => {}
        }
    }
    // A drop from an upper port must end above any rise to a lower port at
    // the same position, or the two would overlap.
    let drops = |u: &TrackUser| -> (Vec<f64>, Vec<f64>) {
        match *u {
            TrackUser::Bus(g) => {
                let bg = &t.bus_groups[g];
                if fan_out(g) {
                    let p = idx[&bg.parents[0]];
                    (
                        vec![port_o[&(p, BOTTOM, PortKey::Trunk(g))]],
                        bg.children
                            .iter()
                            .map(|c| port_o[&(idx[c], TOP, PortKey::Branch(g, idx[c]))])
                            .collect(),
                    )
                } else {
                    let c = idx[&bg.children[0]];
                    (
                        bg.parents
                            .iter()
                            .map(|p| port_o[&(idx[p], BOTTOM, PortKey::Branch(g, idx[p]))])
                            .collect(),
                        vec![port_o[&(c, TOP, PortKey::Trunk(g))]],
                    )
                }
            }
            TrackUser::Elbow(e) => (
                vec![port_o[&(ends[e].0, BOTTOM, PortKey::Edge(e))]],
                vec![port_o[&(ends[e].1, TOP, PortKey::Edge(e))]],
            ),
            TrackUser::ShortcutOut(e) => (vec![port_o[&(ends[e].0, BOTTOM, PortKey::Edge(e))]], Vec::new()),
            TrackUser::ShortcutIn(e) => (Vec::new(), vec![port_o[&(ends[e].1, TOP, PortKey::Edge(e))]]),
        }
    };
    for users in gap_users.iter_mut() {
        let spans: Vec<_> = users.iter().map(drops).collect();
        let k = users.len();
        let mut before = vec![Vec::new(); k];
        let mut indegree = vec![0usize; k];
        for a in 0..k {
            for b in 0..k {
                let clash = a != b
                    && spans[a]
                        .0
                        .iter()
                        .any(|&x| spans[b].1.iter().any(|&y| (x - y).abs() < LINE_THICKNESS * 1.5));
                if clash {
                    before[a].push(b);
                    indegree[b] += 1;
                }
            }
        }
        let mut order = Vec::with_capacity(k);
        let mut done = vec![false; k];
        while order.len() < k {
            let next = (0..k)
                .find(|&i| !done[i] && indegree[i] == 0)
                .ok_or_else(|| "cyclic track constraints".to_string())?;
            done[next] = true;
            order.push(users[next]);
            for &b in &before[next] {
                indegree[b] -= 1;
            }
        }
        *users = order;
    }
    let lane: Vec<f64> = rows
        .iter()
        .map(|row| row.iter().map(|&i| r_ext[i]).fold(0.0, f64::max))
        .collect();
    let mut lane_start = vec![MARGIN; m];
    let mut gap_size = vec![0.0; m.saturating_sub(1)];
    for l in 0..m.saturating_sub(1) {
        gap_size[l] = min_gap + TRACK_SPACING * gap_users[l].len() as f64;
        lane_start[l + 1] = lane_start[l] + lane[l] + gap_size[l];
    }
    let mut track: HashMap<TrackUser, f64> = HashMap::new();
    for (l, users) in gap_users.iter().enumerate() {
        let k = users.len() as f64;
        for (j, u) in users.iter().enumerate() {
            track.insert(*u, lane_start[l] + lane[l] + (j as f64 + 1.0) * gap_size[l] / (k + 1.0));
        }
    }
    let center_r = |i: usize| lane_start[level(i)] + lane[level(i)] / 2.0;
    let top_r = |i: usize| center_r(i) - r_ext[i] / 2.0;
    let bottom_r = |i: usize| center_r(i) + r_ext[i] / 2.0;
    let max_o = (0..n).map(|i| o_left[i] + o_ext[i]).fold(0.0, f64::max);

    // Primitives.
    let seg = |a: (f64, f64), b: (f64, f64)| Stroke::Straight {
        from: screen(a.0, a.1),
        to: screen(b.0, b.1),
    };
    let node_center = |i: usize| screen(center_o(i), center_r(i));
    // Whether an arrowless chain would be read in the wrong direction.
    let misread = |p: usize, c: usize, strokes: &[Stroke]| {
        let (a, b) = (node_center(p), node_center(c));
        let pts: Vec<Point> = strokes
            .iter()
            .flat_map(|s| {
                let (u, v) = s.ground_truth_box().short_side_midpoints();
                [u, v]
            })
            .collect();
        let span = |f: fn(&Point) -> f64| {
            let vs = pts.iter().map(f);
            vs.clone().fold(f64::NEG_INFINITY, f64::max) - vs.fold(f64::INFINITY, f64::min)
        };
        let default_parent_is_p = if span(|q| q.y) >= span(|q| q.x) {
            a.y < b.y
        } else {
            a.x < b.x
        };
        !default_parent_is_p
    };
    let mut prims: Vec<Primitive> = Vec::new();
    let mut host: Vec<Option<usize>> = vec![None; t.edges.len()];
    let mut corridor = 0usize;
    for (e, &(p, c)) in ends.iter().enumerate() {
        let Some(route) = routes[e] else { continue };
        let pp = (port_o[&(p, BOTTOM, PortKey::Edge(e))], bottom_r(p));
        let cc = (port_o[&(c, TOP, PortKey::Edge(e))], top_r(c));
        let strokes: Vec<Stroke> = match route {
            Route::Direct => vec![seg(pp, cc)],
            Route::Curve => {
                let (a, b) = (screen(pp.0, pp.1), screen(cc.0, cc.1));
                let d = b - a;
                let len = d.norm();
                let normal = Point::new(-d.y, d.x) * (1.0 / len);
                let bulge = (ds.curvature * len).min(MAX_BULGE) * draws[e].bend;
                if bulge.abs() < 1.0 {
                    vec![seg(pp, cc)]
                } else {
                    vec![Stroke::Quadratic {
                        from: a,
                        control: a.lerp(b, 0.5) + normal * (2.0 * bulge),
                        to: b,
                    }]
                }
            }
            Route::Elbow => {
                let tr = track[&TrackUser::Elbow(e)];
                vec![seg(pp, (pp.0, tr)), seg((pp.0, tr), (cc.0, tr)), seg((cc.0, tr), cc)]
            }
            Route::Shortcut => {
                let t1 = track[&TrackUser::ShortcutOut(e)];
                let t2 = track[&TrackUser::ShortcutIn(e)];
                let oc = max_o + CORRIDOR_GAP * spread + corridor as f64 * CORRIDOR_STEP;
                corridor += 1;
                vec![
                    seg(pp, (pp.0, t1)),
                    seg((pp.0, t1), (oc, t1)),
                    seg((oc, t1), (oc, t2)),
                    seg((oc, t2), (cc.0, t2)),
                    seg((cc.0, t2), cc),
                ]
            }
        };
        let arrow = ds.arrowheads || misread(p, c, &strokes);
        let k = strokes.len();
        let first = prims.len();
        for (j, stroke) in strokes.into_iter().enumerate() {
            prims.push(Primitive {
                stroke,
                edges: vec![e],
                arrow: arrow && j + 1 == k,
            });
        }
        host[e] = (first..prims.len()).max_by(|&a, &b| {
            prims[a]
                .stroke
                .length()
                .total_cmp(&prims[b].stroke.length())
                .then(b.cmp(&a))
        });
    }

    let mut buses = Vec::new();
    for (g, bg) in t.bus_groups.iter().enumerate() {
        let tr = track[&TrackUser::Bus(g)];
        let members = bus_members[g].clone();
        let mut os = Vec::new();
        if fan_out(g) {
            let p = idx[&bg.parents[0]];
            let tp = (port_o[&(p, BOTTOM, PortKey::Trunk(g))], bottom_r(p));
            os.push(tp.0);
            prims.push(Primitive {
                stroke: seg(tp, (tp.0, tr)),
                edges: members.clone(),
                arrow: false,
            });
            for &e in &members {
                let c = ends[e].1;
                let b = (port_o[&(c, TOP, PortKey::Branch(g, c))], top_r(c));
                os.push(b.0);
                host[e] = Some(prims.len());
                prims.push(Primitive {
                    stroke: seg((b.0, tr), b),
                    edges: vec![e],
                    arrow: ds.arrowheads,
                });
            }
        } else {
            let c = idx[&bg.children[0]];
            let tc = (port_o[&(c, TOP, PortKey::Trunk(g))], top_r(c));
            os.push(tc.0);
            for &e in &members {
                let p = ends[e].0;
                let b = (port_o[&(p, BOTTOM, PortKey::Branch(g, p))], bottom_r(p));
                os.push(b.0);
                host[e] = Some(prims.len());
                prims.push(Primitive {
                    stroke: seg(b, (b.0, tr)),
                    edges: vec![e],
                    arrow: false,
                });
            }
            prims.push(Primitive {
                stroke: seg((tc.0, tr), tc),
                edges: members.clone(),
                arrow: ds.arrowheads,
            });
        }
        let lo = os.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = os.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        buses.push(BusSegment {
            from: screen(lo, tr),
            to: screen(hi, tr),
            edges: members,
        });
    }

    // Nodes and their names.
    let th = text_height(fs);
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let c = node_center(i);
        let (w, h) = if td { (o_ext[i], r_ext[i]) } else { (r_ext[i], o_ext[i]) };
        let bbox = OrientedBox::new(c.x, c.y, w, h, 0.0).map_err(|e| e.to_string())?;
        let name_box = OrientedBox::new(c.x, c.y, name_w[i], th, 0.0).map_err(|e| e.to_string())?;
        nodes.push(NodePlacement {
            entity: t.entities[i].id,
            bbox,
            name: TextPlacement {
                bbox: name_box,
                content: t.entities[i].name.clone(),
                font_size: fs,
            },
        });
    }

    // Percentage labels.
    let prim_boxes: Vec<OrientedBox> = prims.iter().map(|p| p.stroke.ground_truth_box()).collect();
    let node_aabbs: Vec<_> = nodes.iter().map(|n| n.bbox.aabb()).collect();
    let mut labels: Vec<EdgeLabel> = Vec::new();
    let lfs = 0.85 * fs;
    for (e, edge) in t.edges.iter().enumerate() {
        let Some(pct) = &edge.label else { continue };
        let h = host[e].ok_or_else(|| format!("edge {e} has no primitive"))?;
        let stroke = prims[h].stroke;
        let (tw, lh) = (text_width(&pct.text, lfs), text_height(lfs));
        let overlap_first = draws[e].overlap;
        let mut placed = None;
        'modes: for mode in 0..3 {
            let offset_sign = match (overlap_first, mode) {
                (true, 0) | (false, 2) => 0.0,
                (true, 1) | (false, 0) => 1.0,
                _ => -1.0,
            };
            for tpos in [0.5, 0.4, 0.6, 0.3, 0.7, 0.2, 0.8] {
                let q = stroke.point_at(tpos);
                let u = stroke.tangent_at(tpos);
                let nrm = Point::new(-u.y, u.x);
                let reach = nrm.x.abs() * tw / 2.0 + nrm.y.abs() * lh / 2.0 + LINE_THICKNESS / 2.0 + 2.0;
                let center = q + nrm * (offset_sign * reach);
                let bbox = OrientedBox::new(center.x, center.y, tw, lh, 0.0).map_err(|e| e.to_string())?;
                let ab = bbox.aabb();
                if ab.0 < 1.0 || ab.1 < 1.0 {
                    continue;
                }
                if node_aabbs.iter().any(|na| aabb_overlap(ab, *na, 2.0)) {
                    continue;
                }
                if labels.iter().any(|l| aabb_overlap(ab, l.text.bbox.aabb(), 2.0)) {
                    continue;
                }
                let own = point_box_distance(center, &prim_boxes[h]);
                let clear = prim_boxes
                    .iter()
                    .enumerate()
                    .all(|(j, b)| j == h || point_box_distance(center, b) >= own + LABEL_CLEARANCE);
                if clear {
                    placed = Some(bbox);
                    break 'modes;
                }
            }
        }
        let bbox = placed.ok_or_else(|| format!("no unambiguous label position for edge {e}"))?;
        labels.push(EdgeLabel {
            edge: e,
            primitive: h,
            text: TextPlacement {
                bbox,
                content: pct.text.clone(),
                font_size: lfs,
            },
        });
    }

    let mut xmax: f64 = 0.0;
    let mut ymax: f64 = 0.0;
    let mut grow = |x: f64, y: f64| {
        xmax = xmax.max(x);
        ymax = ymax.max(y);
    };
    for a in &node_aabbs {
        grow(a.2, a.3);
    }
    for b in prim_boxes
        .iter()
        .chain(buses.iter().map(|b| b.ground_truth_box()).collect::<Vec<_>>().iter())
    {
        let a = b.aabb();
        grow(a.2, a.3);
    }
    for l in &labels {
        let a = l.text.bbox.aabb();
        grow(a.2, a.3);
    }
    let layout = DiagramLayout {
        diagram_id: String::new(),
        kind: t.kind,
        width: (xmax + MARGIN).ceil(),
        height: (ymax + MARGIN).ceil(),
        style: ds.clone(),
        edge_count: t.edges.len(),
        nodes,
        primitives: prims,
        buses,
        labels,
    };
    let violations = layout.check();
    if violations.is_empty() {
        Ok(layout)
    } else {
        Err(format!("layout invariants violated: {violations:?}"))
    }
}
