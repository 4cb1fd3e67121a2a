use serde::{Deserialize, Serialize};

use crate::geometry::{box_from_quad, vertices_of, Point, Quad};
use crate::model::{AnnotationSet, DiagramKind, DiagramObject, Keypoints, ObjectClass, ObjectId, TextBlock};

use super::FormatError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub width: f64,
    pub height: f64,
    pub file_name: String,
    pub diagram_id: String,
    pub kind: DiagramKind,
    #[serde(default)]
    pub texts: Vec<TextBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u32,
    pub name: String,
    pub supercategory: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keypoints: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skeleton: Vec<[u32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u32,
    #[serde(default)]
    pub segmentation: Option<Vec<Vec<f64>>>,
    pub bbox: [f64; 4],
    pub area: f64,
    pub iscrowd: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_keypoints: Option<u32>,
    #[serde(default = "one")]
    pub score: f64,
    pub object_id: ObjectId,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoDocument {
    pub images: Vec<CocoImage>,
    pub categories: Vec<CocoCategory>,
    pub annotations: Vec<CocoAnnotation>,
}

fn categories() -> Vec<CocoCategory> {
    ObjectClass::ALL
        .into_iter()
        .map(|c| CocoCategory {
            id: c.id(),
            name: c.as_str().to_string(),
            supercategory: "diagram".to_string(),
            keypoints: if c == ObjectClass::Line {
                vec!["start".into(), "end".into()]
            } else {
                Vec::new()
            },
            skeleton: if c == ObjectClass::Line {
                vec![[1, 2]]
            } else {
                Vec::new()
            },
        })
        .collect()
}

/// Builds one COCO document over several sets. Image and annotation ids
/// start at 1; objects keep their ids in `object_id`.
pub fn dota_to_coco(sets: &[AnnotationSet]) -> CocoDocument {
    let mut images = Vec::with_capacity(sets.len());
    let mut annotations = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let image_id = i as u64 + 1;
        let set = set.sorted();
        images.push(CocoImage {
            id: image_id,
            width: set.width,
            height: set.height,
            file_name: format!("{}.svg", set.diagram_id),
            diagram_id: set.diagram_id.clone(),
            kind: set.kind,
            texts: set.texts.clone(),
        });
        for o in &set.objects {
            let q = vertices_of(&o.bbox);
            let (x0, y0, x1, y1) = o.bbox.aabb();
            annotations.push(CocoAnnotation {
                id: annotations.len() as u64 + 1,
                image_id,
                category_id: o.class.id(),
                segmentation: Some(vec![q.coords().to_vec()]),
                bbox: [x0, y0, x1 - x0, y1 - y0],
                area: q.area(),
                iscrowd: 0,
                keypoints: o
                    .keypoints
                    .map(|k| vec![k.start.x, k.start.y, 2.0, k.end.x, k.end.y, 2.0]),
                num_keypoints: o.keypoints.map(|_| 2),
                score: o.score,
                object_id: o.id,
            });
        }
    }
    CocoDocument {
        images,
        categories: categories(),
        annotations,
    }
}

/// Inverse of [`dota_to_coco`]: one set per image, in image order.
pub fn coco_to_dota(doc: &CocoDocument) -> Result<Vec<AnnotationSet>, FormatError> {
    let mut sets: Vec<AnnotationSet> = doc
        .images
        .iter()
        .map(|img| {
            let mut s = AnnotationSet::new(img.diagram_id.clone(), img.kind, img.width, img.height);
            s.texts = img.texts.clone();
            s
        })
        .collect();
    for a in &doc.annotations {
        let slot =
            doc.images.iter().position(|img| img.id == a.image_id).ok_or_else(|| {
                FormatError::parse(format!("annotation {} refers to unknown image {}", a.id, a.image_id))
            })?;
        let class = ObjectClass::from_id(a.category_id)
            .ok_or_else(|| FormatError::parse(format!("annotation {}: unknown category {}", a.id, a.category_id)))?;
        let seg = a
            .segmentation
            .as_ref()
            .and_then(|s| s.first())
            .ok_or_else(|| FormatError::parse(format!("annotation {} has no segmentation", a.id)))?;
        let coords: [f64; 8] = seg.as_slice().try_into().map_err(|_| {
            FormatError::parse(format!(
                "annotation {}: polygon has {} numbers, expected 8",
                a.id,
                seg.len()
            ))
        })?;
        let quad = Quad::from_coords(coords).map_err(|e| FormatError::parse(format!("annotation {}: {e}", a.id)))?;
        let bbox = box_from_quad(&quad).map_err(|e| FormatError::parse(format!("annotation {}: {e}", a.id)))?;
        let keypoints = match &a.keypoints {
            None => None,
            Some(k) if k.len() == 6 => Some(Keypoints {
                start: Point::new(k[0], k[1]),
                end: Point::new(k[3], k[4]),
            }),
            Some(k) => {
                return Err(FormatError::parse(format!(
                    "annotation {}: keypoints have {} numbers, expected 6",
                    a.id,
                    k.len()
                )))
            }
        };
        sets[slot].objects.push(DiagramObject {
            id: a.object_id,
            class,
            bbox,
            score: a.score,
            keypoints,
        });
    }
    Ok(sets.into_iter().map(|s| s.sorted()).collect())
}
