use serde::{Deserialize, Serialize};

use crate::geometry::{box_from_quad, vertices_of, OrientedBox, Point, Quad};
use crate::model::{DiagramObject, Keypoints, ObjectClass, ObjectId};

use super::FormatError;

/// Long side of the detector input in the scaled coordinate space.
pub const SCALED_LONG_SIDE: f64 = 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordinateSpace {
    Native,
    Scaled1024,
}

impl CoordinateSpace {
    pub fn as_str(self) -> &'static str {
        match self {
            CoordinateSpace::Native => "native",
            CoordinateSpace::Scaled1024 => "scaled-1024",
        }
    }

    pub fn parse(s: &str) -> Result<Self, FormatError> {
        match s {
            "native" => Ok(CoordinateSpace::Native),
            "scaled-1024" => Ok(CoordinateSpace::Scaled1024),
            other => Err(FormatError::parse(format!("unknown coordinate_space {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<ObjectId>,
    pub class: ObjectClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad: Option<[f64; 8]>,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<OrientedBox>,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<Keypoints>,
}

/// Output of an external detector for one diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFile {
    pub diagram_id: String,
    pub image_width: f64,
    pub image_height: f64,
    /// `native` or `scaled-1024`.
    pub coordinate_space: String,
    pub detections: Vec<Detection>,
}

pub fn parse_detection_file(text: &str) -> Result<DetectionFile, FormatError> {
    serde_json::from_str(text).map_err(|e| FormatError::Parse {
        line: Some(e.line()),
        message: e.to_string(),
    })
}

fn scale_factor(space: CoordinateSpace, width: f64, height: f64) -> f64 {
    match space {
        CoordinateSpace::Native => 1.0,
        CoordinateSpace::Scaled1024 => width.max(height) / SCALED_LONG_SIDE,
    }
}

/// Converts detections to native canvas coordinates. Scaled files are
/// multiplied by `max(width, height) / 1024`.
pub fn read_detections(doc: &DetectionFile, width: f64, height: f64) -> Result<Vec<DiagramObject>, FormatError> {
    let space = CoordinateSpace::parse(&doc.coordinate_space)?;
    if !(width > 0.0 && height > 0.0) {
        return Err(FormatError::parse("canvas size must be positive"));
    }
    let k = scale_factor(space, width, height);
    let mut out = Vec::with_capacity(doc.detections.len());
    for (i, d) in doc.detections.iter().enumerate() {
        let which = format!("detection {i}");
        if !(0.0..=1.0).contains(&d.score) {
            return Err(FormatError::parse(format!("{which}: score {} outside [0, 1]", d.score)));
        }
        let bbox = match (&d.quad, &d.bbox) {
            (Some(q), _) => {
                let q = Quad::from_coords(q.map(|v| v * k)).map_err(|e| FormatError::parse(format!("{which}: {e}")))?;
                box_from_quad(&q).map_err(|e| FormatError::parse(format!("{which}: {e}")))?
            }
            (None, Some(b)) if k == 1.0 => *b,
            (None, Some(b)) => b.scaled(k).map_err(|e| FormatError::parse(format!("{which}: {e}")))?,
            (None, None) => return Err(FormatError::parse(format!("{which}: needs a quad or a box"))),
        };
        let scale = |p: Point| Point::new(p.x * k, p.y * k);
        out.push(DiagramObject {
            id: d.id.unwrap_or(i as ObjectId),
            class: d.class,
            bbox,
            score: d.score,
            keypoints: d.keypoints.map(|kp| Keypoints {
                start: scale(kp.start),
                end: scale(kp.end),
            }),
        });
    }
    Ok(out)
}

/// Writes objects as a detection file in the requested space, boxes as quads.
pub fn write_detections(
    diagram_id: &str,
    objects: &[DiagramObject],
    width: f64,
    height: f64,
    space: CoordinateSpace,
) -> DetectionFile {
    let k = 1.0 / scale_factor(space, width, height);
    let scale = |p: Point| Point::new(p.x * k, p.y * k);
    let (iw, ih) = match space {
        CoordinateSpace::Native => (width, height),
        CoordinateSpace::Scaled1024 => (width * k, height * k),
    };
    DetectionFile {
        diagram_id: diagram_id.to_string(),
        image_width: iw,
        image_height: ih,
        coordinate_space: space.as_str().to_string(),
        detections: objects
            .iter()
            .map(|o| Detection {
                id: Some(o.id),
                class: o.class,
                quad: Some(vertices_of(&o.bbox).coords().map(|v| v * k)),
                bbox: None,
                score: o.score,
                keypoints: o.keypoints.map(|kp| Keypoints {
                    start: scale(kp.start),
                    end: scale(kp.end),
                }),
            })
            .collect(),
    }
}
