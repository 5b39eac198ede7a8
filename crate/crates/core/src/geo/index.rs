use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};

use super::{buffer_bbox, BBox, GeoError, GeoPoint};

type Entry = GeomWithData<Rectangle<[f64; 2]>, usize>;

/// Static R-tree over buffered bounding boxes.
///
/// Items are addressed by their position in the slice given to
/// [`SegmentIndex::build`]. The tree is immutable after bulk loading.
#[derive(Debug, Clone)]
pub struct SegmentIndex {
    tree: RTree<Entry>,
    boxes: Vec<BBox>,
    buffer_m: f64,
}

impl SegmentIndex {
    /// Bulk-loads one entry per bbox, each grown by `buffer_m` metres.
    pub fn build(bboxes: &[BBox], buffer_m: f64) -> Result<Self, GeoError> {
        let boxes = bboxes.iter().map(|b| buffer_bbox(*b, buffer_m)).collect::<Result<Vec<_>, _>>()?;
        let entries = boxes
            .iter()
            .enumerate()
            .map(|(i, b)| GeomWithData::new(Rectangle::from_corners([b.min_lon, b.min_lat], [b.max_lon, b.max_lat]), i))
            .collect();
        Ok(Self { tree: RTree::bulk_load(entries), boxes, buffer_m })
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn buffer_m(&self) -> f64 {
        self.buffer_m
    }

    pub fn buffered_bbox(&self, item: usize) -> &BBox {
        &self.boxes[item]
    }

    /// Items whose buffered bbox contains `p`, ascending.
    pub fn query(&self, p: GeoPoint) -> Vec<usize> {
        let mut hits: Vec<usize> = self.tree.locate_all_at_point(&[p.lon, p.lat]).map(|e| e.data).collect();
        hits.sort_unstable();
        hits
    }

    /// Items whose buffered bbox intersects `b`, ascending.
    pub fn query_bbox(&self, b: &BBox) -> Vec<usize> {
        let env = AABB::from_corners([b.min_lon, b.min_lat], [b.max_lon, b.max_lat]);
        let mut hits: Vec<usize> = self.tree.locate_in_envelope_intersecting(&env).map(|e| e.data).collect();
        hits.sort_unstable();
        hits
    }
}
