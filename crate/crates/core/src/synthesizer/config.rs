use serde::{Deserialize, Serialize};

use crate::model::DiagramKind;

use super::SynthError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternWeights {
    pub one_to_one: f64,
    pub one_to_many: f64,
    pub many_to_one: f64,
}

impl Default for PatternWeights {
    fn default() -> Self {
        Self {
            one_to_one: 0.45,
            one_to_many: 0.35,
            many_to_one: 0.2,
        }
    }
}

/// Names drawn as nodes, per diagram kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityPool {
    pub ownership: Vec<String>,
    pub organization: Vec<String>,
}

impl EntityPool {
    pub fn for_kind(&self, kind: DiagramKind) -> &[String] {
        match kind {
            DiagramKind::Ownership => &self.ownership,
            DiagramKind::Organization => &self.organization,
        }
    }
}

const COMPANY_STEMS: &[&str] = &[
    "Acme",
    "Borealis",
    "Cobalt",
    "Dawnstar",
    "Evergreen",
    "Fairway",
    "Granite",
    "Harbor",
    "Ironwood",
    "Jadeite",
    "Keystone",
    "Lumen",
    "Meridian",
    "Northgate",
    "Orchid",
    "Pinnacle",
    "Quarry",
    "Redwood",
    "Summit",
    "Tidewater",
    "Umber",
    "Vantage",
    "Westbrook",
    "Xenon",
    "Yarrow",
    "Zenith",
    "Aurora",
    "Bluefin",
    "Citadel",
    "Delta",
];
const COMPANY_SUFFIXES: &[&str] = &[
    "Holdings",
    "Capital",
    "Investment Co.",
    "Technology Ltd.",
    "Industrial Group",
    "Trading Co.",
];
const PERSON_NAMES: &[&str] = &[
    "Zhang Wei",
    "Li Na",
    "Wang Fang",
    "Liu Yang",
    "Chen Jie",
    "Yang Min",
    "Zhao Lei",
    "Huang Yan",
    "Zhou Tao",
    "Wu Hui",
];
const DEPARTMENTS: &[&str] = &[
    "Finance",
    "Audit",
    "Legal",
    "Human Resources",
    "Research",
    "Marketing",
    "Sales",
    "Operations",
    "Procurement",
    "Logistics",
    "Risk Control",
    "Compliance",
    "Treasury",
    "IT",
    "Security",
    "Strategy",
    "Investor Relations",
    "Quality",
    "Production",
    "Engineering",
    "Customer Service",
    "Administration",
    "Planning",
    "Internal Control",
];
const ORG_SUFFIXES: &[&str] = &["Department", "Center", "Office"];
const EXECUTIVES: &[&str] = &[
    "Shareholders Meeting",
    "Board of Directors",
    "Board of Supervisors",
    "General Manager",
    "Strategy Committee",
    "Audit Committee",
    "Nomination Committee",
    "Board Secretary",
    "Chief Financial Officer",
    "Deputy General Manager",
];

impl Default for EntityPool {
    fn default() -> Self {
        let mut ownership: Vec<String> = PERSON_NAMES.iter().map(|s| s.to_string()).collect();
        for stem in COMPANY_STEMS {
            for suffix in COMPANY_SUFFIXES {
                ownership.push(format!("{stem} {suffix}"));
            }
        }
        let mut organization: Vec<String> = EXECUTIVES.iter().map(|s| s.to_string()).collect();
        for d in DEPARTMENTS {
            for s in ORG_SUFFIXES {
                organization.push(format!("{d} {s}"));
            }
        }
        Self {
            ownership,
            organization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub node_fill: String,
    pub node_stroke: String,
    pub line: String,
}

fn default_palettes() -> Vec<Palette> {
    [
        ("#ffffff", "#000000", "#000000"),
        ("#dbe9f6", "#1f4e79", "#1f4e79"),
        ("#fdebd0", "#a04000", "#6e2c00"),
        ("#e8f6f3", "#117864", "#0b5345"),
        ("#f2f3f4", "#515a5a", "#212f3d"),
    ]
    .into_iter()
    .map(|(f, s, l)| Palette {
        node_fill: f.into(),
        node_stroke: s.into(),
        line: l.into(),
    })
    .collect()
}

/// Drawing settings. Probabilities are sampled per diagram (orientation,
/// shape, palette, arrowheads, font) or per edge (route, label placement).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleConfig {
    pub rounded_probability: f64,
    pub palettes: Vec<Palette>,
    pub line_width: f64,
    pub arrowhead_probability: f64,
    pub left_right_probability: f64,
    pub incline_probability: f64,
    /// Largest deviation of a direct line from the level axis, radians.
    pub max_incline_angle: f64,
    pub curve_probability: f64,
    /// Curve bulge as a fraction of the chord length.
    pub curvature: f64,
    pub font_size_range: (f64, f64),
    pub label_overlap_probability: f64,
}

impl Default for StyleConfig {
    fn default() -> Self {
        Self {
            rounded_probability: 0.4,
            palettes: default_palettes(),
            line_width: 1.5,
            arrowhead_probability: 0.5,
            left_right_probability: 0.2,
            incline_probability: 0.5,
            max_incline_angle: std::f64::consts::FRAC_PI_4,
            curve_probability: 0.15,
            curvature: 0.15,
            font_size_range: (12.0, 16.0),
            label_overlap_probability: 0.3,
        }
    }
}

impl StyleConfig {
    /// Straight orthogonal drawing: no incline, curves or arrows.
    pub fn plain() -> Self {
        Self {
            rounded_probability: 0.0,
            arrowhead_probability: 0.0,
            left_right_probability: 0.0,
            incline_probability: 0.0,
            curve_probability: 0.0,
            label_overlap_probability: 0.0,
            font_size_range: (14.0, 14.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let probs = [
            ("rounded_probability", self.rounded_probability),
            ("arrowhead_probability", self.arrowhead_probability),
            ("left_right_probability", self.left_right_probability),
            ("incline_probability", self.incline_probability),
            ("curve_probability", self.curve_probability),
            ("label_overlap_probability", self.label_overlap_probability),
        ];
        for (name, p) in probs {
            check_probability(name, p)?;
        }
        let max = std::f64::consts::FRAC_PI_3;
        if !(self.max_incline_angle > 0.0 && self.max_incline_angle <= max + 1e-12) {
            return Err(SynthError::Config(format!(
                "max_incline_angle must lie in (0, pi/3], got {}",
                self.max_incline_angle
            )));
        }
        if !(0.0..=0.5).contains(&self.curvature) {
            return Err(SynthError::Config("curvature must lie in [0, 0.5]".into()));
        }
        let (lo, hi) = self.font_size_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(SynthError::Config(
                "font_size_range must be positive and ordered".into(),
            ));
        }
        if !(self.line_width > 0.0 && self.line_width.is_finite()) {
            return Err(SynthError::Config("line_width must be positive".into()));
        }
        if self.palettes.is_empty() {
            return Err(SynthError::Config("at least one palette is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub node_count_range: (usize, usize),
    pub level_count_range: (usize, usize),
    pub pattern_probabilities: PatternWeights,
    pub shortcut_probability: f64,
    pub bus_probability: f64,
    pub style: StyleConfig,
    pub entity_pool: EntityPool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            node_count_range: (3, 12),
            level_count_range: (2, 4),
            pattern_probabilities: PatternWeights::default(),
            shortcut_probability: 0.1,
            bus_probability: 0.5,
            style: StyleConfig::default(),
            entity_pool: EntityPool::default(),
        }
    }
}

fn check_probability(name: &str, p: f64) -> Result<(), SynthError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SynthError::Config(format!("{name} must lie in [0, 1], got {p}")))
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let (nmin, nmax) = self.node_count_range;
        let (lmin, lmax) = self.level_count_range;
        if nmin < 2 || nmin > nmax {
            return Err(SynthError::Config(format!(
                "node_count_range must satisfy 2 <= min <= max, got ({nmin}, {nmax})"
            )));
        }
        if lmin < 2 || lmin > lmax {
            return Err(SynthError::Config(format!(
                "level_count_range must satisfy 2 <= min <= max, got ({lmin}, {lmax})"
            )));
        }
        let w = &self.pattern_probabilities;
        for (name, p) in [
            ("one_to_one", w.one_to_one),
            ("one_to_many", w.one_to_many),
            ("many_to_one", w.many_to_one),
        ] {
            check_probability(name, p)?;
        }
        let sum = w.one_to_one + w.one_to_many + w.many_to_one;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SynthError::Config(format!("pattern weights must sum to 1, got {sum}")));
        }
        check_probability("shortcut_probability", self.shortcut_probability)?;
        check_probability("bus_probability", self.bus_probability)?;
        self.style.validate()
    }

    /// Short stable digest of the configuration (FNV-1a over its JSON).
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", crate::io::fnv1a(json.as_bytes()))
    }
}
