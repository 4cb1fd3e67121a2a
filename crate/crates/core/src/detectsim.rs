//! Simulated detector. Perturbs ground truth into scored detections so the
//! aggregation and metrics stack can run without a trained network. The noise
//! is purely geometric plus drops, spurious boxes and text corruption.
//!
//! Every object consumes the same random draws whatever the configured rates,
//! so for a fixed seed the objects dropped at a lower rate are a subset of
//! those dropped at a higher one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{OrientedBox, Point};
use crate::io::fnv1a;
use crate::model::{AnnotationSet, DiagramObject, Keypoints, ObjectClass, ObjectId, Percentage};

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("{field} must be in [0, 1], got {value}")]
    Rate { field: &'static str, value: f64 },
    #[error("{field} must be finite and non-negative, got {value}")]
    Sigma { field: &'static str, value: f64 },
    #[error("score distribution parameters must be positive, got ({alpha}, {beta})")]
    Score { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassRates {
    pub node: f64,
    pub line: f64,
    pub bus: f64,
}

impl ClassRates {
    pub fn get(&self, c: ObjectClass) -> f64 {
        match c {
            ObjectClass::Node => self.node,
            ObjectClass::Line => self.line,
            ObjectClass::Bus => self.bus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ScoreDistribution {
    fn default() -> Self {
        ScoreDistribution { alpha: 8.0, beta: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub drop_rate: ClassRates,
    /// Standard deviation for center and size, native units.
    pub jitter_sigma: f64,
    /// Radians.
    pub angle_sigma: f64,
    /// Scores of kept objects; spurious boxes use the mirrored distribution.
    pub score_distribution: ScoreDistribution,
    /// Probability, per ground-truth object, of adding one spurious box.
    pub spurious_rate: f64,
    pub keypoint_drop_rate: f64,
    /// Probability of one digit substitution in each percentage text.
    pub text_corruption_rate: f64,
}

impl NoiseConfig {
    pub fn lines_dropped(rate: f64) -> Self {
        NoiseConfig {
            drop_rate: ClassRates {
                line: rate,
                ..ClassRates::default()
            },
            ..NoiseConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let rates = [
            ("drop_rate.node", self.drop_rate.node),
            ("drop_rate.line", self.drop_rate.line),
            ("drop_rate.bus", self.drop_rate.bus),
            ("spurious_rate", self.spurious_rate),
            ("keypoint_drop_rate", self.keypoint_drop_rate),
            ("text_corruption_rate", self.text_corruption_rate),
        ];
        for (field, value) in rates {
            if !(0.0..=1.0).contains(&value) {
                return Err(NoiseError::Rate { field, value });
            }
        }
        for (field, value) in [("jitter_sigma", self.jitter_sigma), ("angle_sigma", self.angle_sigma)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(NoiseError::Sigma { field, value });
            }
        }
        let ScoreDistribution { alpha, beta } = self.score_distribution;
        if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0) {
            return Err(NoiseError::Score { alpha, beta });
        }
        Ok(())
    }
}

const MIN_SIDE: f64 = 1.0;
const MAX_SCORE: f64 = 1.0 - 1e-9;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn draw_score(rng: &mut ChaCha8Rng, dist: &Beta<f64>) -> f64 {
    dist.sample(rng).clamp(1e-9, MAX_SCORE)
}

fn corrupt_digit(text: &str, pick: f64, replacement: u32) -> String {
    let digits: Vec<usize> = text
        .char_indices()
        .filter(|(_, c)| c.is_ascii_digit())
        .map(|(i, _)| i)
        .collect();
    if digits.is_empty() {
        return text.to_string();
    }
    let at = digits[((pick * digits.len() as f64) as usize).min(digits.len() - 1)];
    let old = text.as_bytes()[at] - b'0';
    let new = (old as u32 + 1 + replacement % 9) % 10;
    let mut out = text.to_string();
    out.replace_range(at..at + 1, &new.to_string());
    out
}

/// Perturbs a ground-truth set into simulated detections. Pure in
/// `(set, noise, seed)`; the diagram id is mixed into the seed so one seed
/// gives independent noise across diagrams.
pub fn perturb(set: &AnnotationSet, noise: &NoiseConfig, seed: u64) -> Result<AnnotationSet, NoiseError> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(set.diagram_id.as_bytes()));
    let ScoreDistribution { alpha, beta } = noise.score_distribution;
    let keep_dist = Beta::new(alpha, beta).map_err(|_| NoiseError::Score { alpha, beta })?;
    let spurious_dist = Beta::new(beta, alpha).map_err(|_| NoiseError::Score { alpha, beta })?;
    let sorted = set.sorted();
    let mut next_id: ObjectId = sorted
        .objects
        .iter()
        .map(|o| o.id)
        .chain(sorted.texts.iter().map(|t| t.id))
        .max()
        .map_or(0, |m| m + 1);
    let mut out = AnnotationSet::new(set.diagram_id.clone(), set.kind, set.width, set.height);
    let (sx, sa) = (noise.jitter_sigma, noise.angle_sigma);
    let mut spurious = Vec::new();
    for o in &sorted.objects {
        let u_drop: f64 = rng.random();
        let jitter: [f64; 5] = std::array::from_fn(|_| normal(&mut rng));
        let u_kp: f64 = rng.random();
        let kp_jitter: [f64; 4] = std::array::from_fn(|_| normal(&mut rng));
        let score = draw_score(&mut rng, &keep_dist);
        let u_spur: f64 = rng.random();
        let spur: [f64; 6] = std::array::from_fn(|_| rng.random());
        let spur_score = draw_score(&mut rng, &spurious_dist);

        if u_spur < noise.spurious_rate {
            let class = ObjectClass::ALL[((spur[0] * 3.0) as usize).min(2)];
            let w = 10.0 + 90.0 * spur[3];
            let h = 4.0 + 36.0 * spur[4];
            let theta = if spur[5] < 0.8 {
                0.0
            } else {
                (spur[5] - 0.8) * 5.0 * std::f64::consts::PI
            };
            if let Ok(bbox) = OrientedBox::new(spur[1] * set.width, spur[2] * set.height, w, h, theta) {
                spurious.push(DiagramObject {
                    id: 0,
                    class,
                    bbox,
                    score: spur_score,
                    keypoints: None,
                });
            }
        }
        if u_drop < noise.drop_rate.get(o.class) {
            continue;
        }
        let b = &o.bbox;
        let bbox = if sx == 0.0 && sa == 0.0 {
            *b
        } else {
            OrientedBox::new(
                b.cx() + sx * jitter[0],
                b.cy() + sx * jitter[1],
                (b.w() + sx * jitter[2]).max(MIN_SIDE),
                (b.h() + sx * jitter[3]).max(MIN_SIDE),
                b.theta() + sa * jitter[4],
            )
            .unwrap_or(*b)
        };
        let keypoints = match o.keypoints {
            Some(k) if u_kp >= noise.keypoint_drop_rate => {
                let shift = |p: Point, i: usize| Point::new(p.x + sx * kp_jitter[i], p.y + sx * kp_jitter[i + 1]);
                Some(Keypoints {
                    start: shift(k.start, 0),
                    end: shift(k.end, 2),
                })
            }
            _ => None,
        };
        out.objects.push(DiagramObject {
            id: o.id,
            class: o.class,
            bbox,
            score,
            keypoints,
        });
    }
    for mut s in spurious {
        s.id = next_id;
        next_id += 1;
        out.objects.push(s);
    }
    for t in &sorted.texts {
        let u: f64 = rng.random();
        let pick: f64 = rng.random();
        let replacement: u32 = rng.random();
        let mut t = t.clone();
        if u < noise.text_corruption_rate && Percentage::parse(&t.content).is_some() {
            t.content = corrupt_digit(&t.content, pick, replacement);
        }
        out.texts.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiagramKind, TextBlock};

    fn sample() -> AnnotationSet {
        let mut s = AnnotationSet::new("d", DiagramKind::Ownership, 400.0, 300.0);
        s.objects.push(DiagramObject::ground_truth(
            0,
            ObjectClass::Node,
            OrientedBox::new(100.0, 50.0, 80.0, 30.0, 0.0).unwrap(),
        ));
        let mut l = DiagramObject::ground_truth(
            1,
            ObjectClass::Line,
            OrientedBox::new(100.0, 120.0, 100.0, 4.0, std::f64::consts::FRAC_PI_2).unwrap(),
        );
        l.keypoints = Some(Keypoints {
            start: Point::new(100.0, 70.0),
            end: Point::new(100.0, 170.0),
        });
        s.objects.push(l);
        s.texts.push(TextBlock {
            id: 2,
            bbox: OrientedBox::new(130.0, 120.0, 30.0, 12.0, 0.0).unwrap(),
            content: "51.0%".into(),
        });
        s
    }

    #[test]
    fn zero_noise_keeps_geometry() {
        let s = sample();
        let p = perturb(&s, &NoiseConfig::default(), 3).unwrap();
        assert_eq!(p.objects.len(), 2);
        for (a, b) in s.objects.iter().zip(&p.objects) {
            assert_eq!(a.bbox, b.bbox);
            assert_eq!(a.keypoints, b.keypoints);
            assert!(b.score > 0.0 && b.score < 1.0);
        }
        assert_eq!(p.texts, s.texts);
    }

    #[test]
    fn drop_all_lines() {
        let p = perturb(&sample(), &NoiseConfig::lines_dropped(1.0), 0).unwrap();
        assert_eq!(p.objects_of(ObjectClass::Line).count(), 0);
        assert_eq!(p.objects_of(ObjectClass::Node).count(), 1);
    }

    #[test]
    fn same_seed_same_output() {
        let noise = NoiseConfig {
            jitter_sigma: 2.0,
            angle_sigma: 0.05,
            spurious_rate: 0.5,
            text_corruption_rate: 0.5,
            ..NoiseConfig::default()
        };
        assert_eq!(
            perturb(&sample(), &noise, 9).unwrap(),
            perturb(&sample(), &noise, 9).unwrap()
        );
    }

    #[test]
    fn corruption_changes_exactly_one_digit() {
        let t = corrupt_digit("51.0%", 0.4, 7);
        assert_ne!(t, "51.0%");
        let diff = t.chars().zip("51.0%".chars()).filter(|(a, b)| a != b).count();
        assert_eq!(diff, 1);
        assert!(Percentage::parse(&t).is_some() || t.starts_with('0'));
    }

    #[test]
    fn invalid_rates_rejected() {
        let bad = NoiseConfig {
            spurious_rate: 1.5,
            ..NoiseConfig::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(NoiseError::Rate {
                field: "spurious_rate",
                ..
            })
        ));
        let neg = NoiseConfig {
            jitter_sigma: -1.0,
            ..NoiseConfig::default()
        };
        assert!(neg.validate().is_err());
    }
}
