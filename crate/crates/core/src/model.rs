//! Shared vocabulary: diagram kinds, object classes, annotation sets,
//! generating topologies and extracted relation tuples.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::geometry::{point_box_distance, OrientedBox, Point};

pub type ObjectId = u32;

/// Distance within which a generated endpoint counts as touching its target.
pub const SNAP_TOLERANCE: f64 = 3.0;

/// Boxes may poke this far outside the canvas.
pub const CANVAS_SLACK: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagramKind {
    Ownership,
    Organization,
}

impl DiagramKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagramKind::Ownership => "ownership",
            DiagramKind::Organization => "organization",
        }
    }
}

impl fmt::Display for DiagramKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DiagramKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ownership" => Ok(DiagramKind::Ownership),
            "organization" | "organisation" => Ok(DiagramKind::Organization),
            other => Err(format!("unknown diagram kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Node,
    Line,
    Bus,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 3] = [ObjectClass::Node, ObjectClass::Line, ObjectClass::Bus];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::Node => "node",
            ObjectClass::Line => "line",
            ObjectClass::Bus => "bus",
        }
    }

    /// Numeric id used by NMS and the COCO category table.
    pub fn id(self) -> u32 {
        match self {
            ObjectClass::Node => 1,
            ObjectClass::Line => 2,
            ObjectClass::Bus => 3,
        }
    }

    pub fn from_id(id: u32) -> Option<ObjectClass> {
        ObjectClass::ALL.into_iter().find(|c| c.id() == id)
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "node" => Ok(ObjectClass::Node),
            "line" => Ok(ObjectClass::Line),
            "bus" => Ok(ObjectClass::Bus),
            other => Err(format!("unknown object class `{other}`")),
        }
    }
}

/// Start and end of an arrowed line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoints {
    pub start: Point,
    pub end: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramObject {
    pub id: ObjectId,
    pub class: ObjectClass,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    /// 1.0 for ground truth.
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<Keypoints>,
}

impl DiagramObject {
    pub fn ground_truth(id: ObjectId, class: ObjectClass, bbox: OrientedBox) -> Self {
        Self {
            id,
            class,
            bbox,
            score: 1.0,
            keypoints: None,
        }
    }

    /// Line endpoints: the keypoints when present, otherwise the midpoints of
    /// the short sides.
    pub fn endpoints(&self) -> (Point, Point) {
        match self.keypoints {
            Some(k) => (k.start, k.end),
            None => self.bbox.short_side_midpoints(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBlock {
    pub id: ObjectId,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub content: String,
}

/// Ground truth or detections for one diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub diagram_id: String,
    pub kind: DiagramKind,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub objects: Vec<DiagramObject>,
    #[serde(default)]
    pub texts: Vec<TextBlock>,
}

impl AnnotationSet {
    pub fn new(diagram_id: impl Into<String>, kind: DiagramKind, width: f64, height: f64) -> Self {
        Self {
            diagram_id: diagram_id.into(),
            kind,
            width,
            height,
            objects: Vec::new(),
            texts: Vec::new(),
        }
    }

    pub fn objects_of(&self, class: ObjectClass) -> impl Iterator<Item = &DiagramObject> {
        self.objects.iter().filter(move |o| o.class == class)
    }

    /// Objects and texts sorted by id; the order writers emit.
    pub fn sorted(&self) -> AnnotationSet {
        let mut s = self.clone();
        s.objects.sort_by_key(|o| o.id);
        s.texts.sort_by_key(|t| t.id);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation sets always serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    DuplicateId,
    KeypointsOnNonLine,
    DegenerateKeypoints,
    KeypointOutsideBox,
    ScoreOutOfRange,
    OutsideCanvas,
    EmptyText,
    InvalidCanvas,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::DuplicateId => "duplicate id",
            Rule::KeypointsOnNonLine => "keypoints on non-line",
            Rule::DegenerateKeypoints => "keypoint start equals end",
            Rule::KeypointOutsideBox => "keypoint outside box",
            Rule::ScoreOutOfRange => "score outside [0,1]",
            Rule::OutsideCanvas => "box outside canvas",
            Rule::EmptyText => "empty text",
            Rule::InvalidCanvas => "invalid canvas size",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub id: Option<ObjectId>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.id {
            Some(id) => write!(f, "#{id}: {} ({})", self.rule, self.detail),
            None => write!(f, "{} ({})", self.rule, self.detail),
        }
    }
}

/// Checks every annotation-set invariant; an empty report means valid.
pub fn validate(set: &AnnotationSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |id: Option<ObjectId>, rule: Rule, detail: String| out.push(Violation { id, rule, detail });

    if !(set.width.is_finite() && set.height.is_finite() && set.width > 0.0 && set.height > 0.0) {
        push(None, Rule::InvalidCanvas, format!("{}x{}", set.width, set.height));
    }

    let mut seen: HashMap<ObjectId, usize> = HashMap::new();
    let ids = set.objects.iter().map(|o| o.id).chain(set.texts.iter().map(|t| t.id));
    for id in ids {
        let n = seen.entry(id).or_insert(0);
        *n += 1;
        if *n > 1 {
            push(Some(id), Rule::DuplicateId, format!("occurrence {n}"));
        }
    }

    let (x0, y0) = (-CANVAS_SLACK, -CANVAS_SLACK);
    let (x1, y1) = (set.width + CANVAS_SLACK, set.height + CANVAS_SLACK);
    let inside = |b: &OrientedBox| {
        let (a, b2, c, d) = b.aabb();
        a >= x0 && b2 >= y0 && c <= x1 && d <= y1
    };

    for o in &set.objects {
        if !(0.0..=1.0).contains(&o.score) {
            push(Some(o.id), Rule::ScoreOutOfRange, format!("{}", o.score));
        }
        if !inside(&o.bbox) {
            push(Some(o.id), Rule::OutsideCanvas, format!("{:?}", o.bbox.aabb()));
        }
        if let Some(k) = &o.keypoints {
            if o.class != ObjectClass::Line {
                push(Some(o.id), Rule::KeypointsOnNonLine, o.class.to_string());
                continue;
            }
            if k.start == k.end {
                push(Some(o.id), Rule::DegenerateKeypoints, format!("{:?}", k.start));
            }
            for p in [k.start, k.end] {
                let d = point_box_distance(p, &o.bbox);
                if d > SNAP_TOLERANCE {
                    push(Some(o.id), Rule::KeypointOutsideBox, format!("distance {d:.3}"));
                }
            }
        }
    }
    for t in &set.texts {
        if t.content.trim().is_empty() {
            push(Some(t.id), Rule::EmptyText, String::new());
        }
        if !inside(&t.bbox) {
            push(Some(t.id), Rule::OutsideCanvas, format!("{:?}", t.bbox.aabb()));
        }
    }
    out
}

/// An ownership share: the parsed number plus the text it was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percentage {
    pub value: f64,
    pub text: String,
}

static PERCENT_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d+(?:\.\d+)?|\.\d+)\s*[%％]?$").expect("valid regex"));

impl Percentage {
    /// Parses "60", "60%", "60.0％" and the like. Negative, zero and
    /// malformed values are rejected.
    pub fn parse(text: &str) -> Option<Percentage> {
        let t = text.trim();
        let caps = PERCENT_RE.captures(t)?;
        let value: f64 = caps[1].parse().ok()?;
        (value.is_finite() && value > 0.0).then(|| Percentage {
            value,
            text: t.to_string(),
        })
    }

    /// One-decimal label as drawn by the synthesizer, e.g. "51.0%".
    pub fn from_tenths(tenths: u32) -> Percentage {
        let value = tenths as f64 / 10.0;
        Percentage {
            value,
            text: format!("{value:.1}%"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: ObjectId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyEdge {
    pub parent: ObjectId,
    pub child: ObjectId,
    /// Percentage for ownership diagrams, `None` for organization diagrams.
    pub label: Option<Percentage>,
}

/// Edges drawn through one shared bus; one side always has a single member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusGroup {
    pub parents: Vec<ObjectId>,
    pub children: Vec<ObjectId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    OneToOne,
    OneToMany,
    ManyToOne,
}

/// One pattern draw between adjacent levels and the edges it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionGroup {
    /// The pattern drawn; a group may end up smaller than the pattern
    /// suggests when its level runs out of nodes.
    pub pattern: Pattern,
    pub parents: Vec<ObjectId>,
    pub children: Vec<ObjectId>,
}

/// Abstract generating graph of a synthesized diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub kind: DiagramKind,
    pub entities: Vec<Entity>,
    /// Level index of each entity, parallel to `entities`.
    pub levels: Vec<usize>,
    pub edges: Vec<TopologyEdge>,
    pub bus_groups: Vec<BusGroup>,
    #[serde(default)]
    pub groups: Vec<ConnectionGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopologyViolation {
    MissingEntity(ObjectId),
    SelfEdge(ObjectId),
    BadLabel { parent: ObjectId, child: ObjectId },
    ManyToManyBus(usize),
    LevelCount,
}

impl Topology {
    pub fn entity(&self, id: ObjectId) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn level_of(&self, id: ObjectId) -> Option<usize> {
        self.entities.iter().position(|e| e.id == id).map(|i| self.levels[i])
    }

    pub fn validate(&self) -> Vec<TopologyViolation> {
        let mut out = Vec::new();
        if self.levels.len() != self.entities.len() {
            out.push(TopologyViolation::LevelCount);
        }
        for e in &self.edges {
            for id in [e.parent, e.child] {
                if self.entity(id).is_none() {
                    out.push(TopologyViolation::MissingEntity(id));
                }
            }
            if e.parent == e.child {
                out.push(TopologyViolation::SelfEdge(e.parent));
            }
            let label_ok = match (self.kind, &e.label) {
                (DiagramKind::Ownership, Some(p)) => p.value > 0.0 && p.value <= 100.0,
                (DiagramKind::Organization, None) => true,
                _ => false,
            };
            if !label_ok {
                out.push(TopologyViolation::BadLabel {
                    parent: e.parent,
                    child: e.child,
                });
            }
        }
        for (i, g) in self.bus_groups.iter().enumerate() {
            if g.parents.len() != 1 && g.children.len() != 1 {
                out.push(TopologyViolation::ManyToManyBus(i));
            }
        }
        out
    }

    /// The relation tuples this topology should produce, sorted.
    pub fn tuples(&self) -> Vec<RelationTuple> {
        let name = |id| self.entity(id).map(|e| e.name.clone()).unwrap_or_default();
        let mut out: Vec<RelationTuple> = self
            .edges
            .iter()
            .map(|e| match self.kind {
                DiagramKind::Ownership => RelationTuple::Ownership {
                    owner: name(e.parent),
                    percentage: e.label.as_ref().map(|p| p.value),
                    owned: name(e.child),
                },
                DiagramKind::Organization => RelationTuple::Organization {
                    supervisor: name(e.parent),
                    subordinate: name(e.child),
                },
            })
            .collect();
        sort_tuples(&mut out);
        out
    }
}

/// Extraction output: `(Owner, Percentage, Owned)` or `(Supervisor, Subordinate)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RelationTuple {
    Ownership {
        owner: String,
        percentage: Option<f64>,
        owned: String,
    },
    Organization {
        supervisor: String,
        subordinate: String,
    },
}

impl RelationTuple {
    pub fn kind(&self) -> DiagramKind {
        match self {
            RelationTuple::Ownership { .. } => DiagramKind::Ownership,
            RelationTuple::Organization { .. } => DiagramKind::Organization,
        }
    }

    pub fn parent(&self) -> &str {
        match self {
            RelationTuple::Ownership { owner, .. } => owner,
            RelationTuple::Organization { supervisor, .. } => supervisor,
        }
    }

    pub fn child(&self) -> &str {
        match self {
            RelationTuple::Ownership { owned, .. } => owned,
            RelationTuple::Organization { subordinate, .. } => subordinate,
        }
    }

    pub fn percentage(&self) -> Option<f64> {
        match self {
            RelationTuple::Ownership { percentage, .. } => *percentage,
            RelationTuple::Organization { .. } => None,
        }
    }
}

/// Deterministic order: parent name, child name, then percentage.
pub fn sort_tuples(tuples: &mut [RelationTuple]) {
    tuples.sort_by(|a, b| {
        a.parent()
            .cmp(b.parent())
            .then_with(|| a.child().cmp(b.child()))
            .then_with(|| {
                let pa = a.percentage().unwrap_or(f64::NEG_INFINITY);
                let pb = b.percentage().unwrap_or(f64::NEG_INFINITY);
                pa.total_cmp(&pb)
            })
    });
}

/// Tuples as JSON lines.
pub fn tuples_to_jsonl(tuples: &[RelationTuple]) -> String {
    let mut s = String::new();
    for t in tuples {
        s.push_str(&serde_json::to_string(t).expect("tuples serialize"));
        s.push('\n');
    }
    s
}

pub fn tuples_from_jsonl(text: &str) -> serde_json::Result<Vec<RelationTuple>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: ObjectId, cx: f64) -> DiagramObject {
        DiagramObject::ground_truth(
            id,
            ObjectClass::Node,
            OrientedBox::new(cx, 20.0, 30.0, 10.0, 0.0).unwrap(),
        )
    }

    fn base() -> AnnotationSet {
        let mut s = AnnotationSet::new("d0", DiagramKind::Ownership, 200.0, 100.0);
        s.objects.push(node(0, 30.0));
        s.objects.push(node(1, 120.0));
        s.texts.push(TextBlock {
            id: 2,
            bbox: OrientedBox::new(30.0, 20.0, 20.0, 8.0, 0.0).unwrap(),
            content: "Acme".into(),
        });
        s
    }

    #[test]
    fn well_formed_set_is_clean() {
        assert!(validate(&base()).is_empty());
    }

    #[test]
    fn keypoints_on_node_flagged() {
        let mut s = base();
        s.objects[0].keypoints = Some(Keypoints {
            start: Point::new(20.0, 20.0),
            end: Point::new(40.0, 20.0),
        });
        let v = validate(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::KeypointsOnNonLine);
        assert_eq!(v[0].rule.to_string(), "keypoints on non-line");
        assert_eq!(v[0].id, Some(0));
    }

    #[test]
    fn duplicate_ids_match_counting_oracle() {
        let mut s = base();
        let ids = [0u32, 1, 1, 5, 5, 5, 7];
        s.objects = ids.iter().map(|&i| node(i, 30.0 + i as f64 * 10.0)).collect();
        s.texts[0].id = 7;
        // Oracle: items minus distinct ids.
        let all: Vec<u32> = ids.iter().copied().chain([7]).collect();
        let mut distinct = all.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let expected = all.len() - distinct.len();
        let dupes = validate(&s).iter().filter(|v| v.rule == Rule::DuplicateId).count();
        assert_eq!(dupes, expected);
    }

    #[test]
    fn other_rules() {
        let mut s = base();
        s.objects[1].score = 1.5;
        s.texts[0].content = "  ".into();
        s.objects.push(DiagramObject::ground_truth(
            9,
            ObjectClass::Line,
            OrientedBox::new(500.0, 20.0, 10.0, 4.0, 0.0).unwrap(),
        ));
        let rules: Vec<Rule> = validate(&s).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::ScoreOutOfRange));
        assert!(rules.contains(&Rule::EmptyText));
        assert!(rules.contains(&Rule::OutsideCanvas));

        let mut s = base();
        s.objects.push(DiagramObject {
            keypoints: Some(Keypoints {
                start: Point::new(60.0, 20.0),
                end: Point::new(60.0, 20.0),
            }),
            ..DiagramObject::ground_truth(
                3,
                ObjectClass::Line,
                OrientedBox::new(70.0, 20.0, 20.0, 4.0, 0.0).unwrap(),
            )
        });
        let rules: Vec<Rule> = validate(&s).into_iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec![Rule::DegenerateKeypoints]);
    }

    #[test]
    fn percentage_rules() {
        for ok in ["60", "60%", "60.0％", " 51.0% ", ".5%", "100"] {
            assert!(Percentage::parse(ok).is_some(), "{ok}");
        }
        for bad in ["60.0.0", "-5", "-5%", "abc", "", "0", "0.0%", "5%%", "1e3"] {
            assert!(Percentage::parse(bad).is_none(), "{bad}");
        }
        assert_eq!(Percentage::parse("60.0％").unwrap().value, 60.0);
        assert_eq!(Percentage::from_tenths(510).text, "51.0%");
    }

    #[test]
    fn canonical_json_shape() {
        let mut s = base();
        s.objects[0].class = ObjectClass::Line;
        s.objects[0].keypoints = Some(Keypoints {
            start: Point::new(16.0, 20.0),
            end: Point::new(44.0, 20.0),
        });
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        let o = &v["objects"][0];
        assert_eq!(o["class"], "line");
        assert_eq!(o["box"]["cx"], 30.0);
        assert_eq!(o["keypoints"]["start"], serde_json::json!([16.0, 20.0]));
        assert_eq!(v["kind"], "ownership");
        assert_eq!(AnnotationSet::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn tuple_json_lines() {
        let t = vec![
            RelationTuple::Ownership {
                owner: "A".into(),
                percentage: Some(60.0),
                owned: "B".into(),
            },
            RelationTuple::Organization {
                supervisor: "CEO".into(),
                subordinate: "CFO".into(),
            },
        ];
        let text = tuples_to_jsonl(&t);
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"kind":"ownership","owner":"A","percentage":60.0,"owned":"B"}"#
        );
        assert_eq!(
            text.lines().nth(1).unwrap(),
            r#"{"kind":"organization","supervisor":"CEO","subordinate":"CFO"}"#
        );
        assert_eq!(tuples_from_jsonl(&text).unwrap(), t);
    }

    #[test]
    fn topology_validation() {
        let t = Topology {
            kind: DiagramKind::Ownership,
            entities: vec![
                Entity {
                    id: 0,
                    name: "A".into(),
                },
                Entity {
                    id: 1,
                    name: "B".into(),
                },
            ],
            levels: vec![0, 1],
            edges: vec![
                TopologyEdge {
                    parent: 0,
                    child: 1,
                    label: Some(Percentage::from_tenths(600)),
                },
                TopologyEdge {
                    parent: 1,
                    child: 1,
                    label: None,
                },
                TopologyEdge {
                    parent: 0,
                    child: 4,
                    label: Some(Percentage::from_tenths(1)),
                },
            ],
            bus_groups: vec![BusGroup {
                parents: vec![0, 1],
                children: vec![0, 1],
            }],
            groups: vec![],
        };
        let v = t.validate();
        assert!(v.contains(&TopologyViolation::SelfEdge(1)));
        assert!(v.contains(&TopologyViolation::BadLabel { parent: 1, child: 1 }));
        assert!(v.contains(&TopologyViolation::MissingEntity(4)));
        assert!(v.contains(&TopologyViolation::ManyToManyBus(0)));
        assert_eq!(t.tuples()[0].parent(), "A");
    }
}
