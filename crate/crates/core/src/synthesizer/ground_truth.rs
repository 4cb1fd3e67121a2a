use crate::model::{AnnotationSet, DiagramObject, Keypoints, ObjectClass, ObjectId, TextBlock};

use super::layout::DiagramLayout;

/// Exact annotations for a layout.
///
/// Ids are assigned in the order nodes, line primitives, buses, then text
/// blocks (entity names followed by edge labels). Line keypoints are set only
/// where an arrowhead was drawn.
pub fn emit_ground_truth(layout: &DiagramLayout) -> AnnotationSet {
    let mut set = AnnotationSet::new(layout.diagram_id.clone(), layout.kind, layout.width, layout.height);
    let mut next: ObjectId = 0;
    let mut id = || {
        let v = next;
        next += 1;
        v
    };
    for n in &layout.nodes {
        set.objects
            .push(DiagramObject::ground_truth(id(), ObjectClass::Node, n.bbox));
    }
    for p in &layout.primitives {
        let mut o = DiagramObject::ground_truth(id(), ObjectClass::Line, p.stroke.ground_truth_box());
        if p.arrow {
            o.keypoints = Some(Keypoints {
                start: p.stroke.start(),
                end: p.stroke.end(),
            });
        }
        set.objects.push(o);
    }
    for b in &layout.buses {
        set.objects.push(DiagramObject::ground_truth(
            id(),
            ObjectClass::Bus,
            b.ground_truth_box(),
        ));
    }
    for t in layout
        .nodes
        .iter()
        .map(|n| &n.name)
        .chain(layout.labels.iter().map(|l| &l.text))
    {
        set.texts.push(TextBlock {
            id: id(),
            bbox: t.bbox,
            content: t.content.clone(),
        });
    }
    set
}
