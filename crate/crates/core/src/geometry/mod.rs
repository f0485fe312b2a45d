//! Vector regions, pixel masks and the shape descriptors computed on them.
//!
//! Shape descriptors (area, perimeter, extent, isoperimetric quotient) are
//! computed on vertices. Coverage and overlap measures are computed on
//! rasterized masks, where all counts are exact integers.

mod labels;
mod mask;
mod raster;
pub mod rle;
mod shape;

pub use labels::LabelMap;
pub use mask::{
    bbox_from_mask, boxes_to_mask, containment_ratio, coverage, image_coverage, iou, BBox, BitMask,
};
pub use raster::{crossing_x, rasterize};
pub use shape::{
    boundary_complexity, count_holes, extent, perimeter, polygon_count, polygon_descriptors,
    ring_structure, shoelace, PolygonDescriptor, RingStructure,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("ring needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("ring has a non-finite coordinate at vertex {0}")]
    NonFinite(usize),
    #[error("ring repeats vertex {0} consecutively")]
    RepeatedVertex(usize),
    #[error("region has no rings")]
    EmptyRegion,
    #[error("mask dimensions must be positive, got {width}x{height}")]
    EmptyRaster { width: u32, height: u32 },
    #[error("mask dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("containment ratio is undefined for an empty child mask")]
    EmptyChild,
    #[error("coverage is undefined for an empty container mask")]
    EmptyContainer,
    #[error("bounding box of an empty mask is undefined")]
    EmptyMask,
    #[error("region has zero area")]
    ZeroArea,
    #[error("region has zero perimeter")]
    ZeroPerimeter,
    #[error("region has a zero-area bounding box")]
    ZeroBoxArea,
    #[error("rings {0} and {1} cross")]
    CrossingRings(usize, usize),
    #[error("invalid box [{0}, {1}, {2}, {3}]")]
    BadBox(i64, i64, i64, i64),
    #[error("run lengths sum to {got}, expected {expected}")]
    RleLength { got: u64, expected: u64 },
    #[error("label run list has odd length {0}")]
    OddRuns(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Implicitly closed polygon boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    vertices: Vec<Point>,
}

impl Ring {
    /// Fails on fewer than three vertices, non-finite coordinates, or two
    /// consecutive identical vertices (including last-to-first).
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(GeometryError::NonFinite(i));
            }
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(GeometryError::RepeatedVertex((i + 1) % n));
            }
        }
        Ok(Ring { vertices })
    }

    /// Builds a ring from clicked points, dropping consecutive duplicates and
    /// an explicit closing vertex first.
    pub fn from_clicks(points: impl IntoIterator<Item = Point>) -> Result<Self, GeometryError> {
        let mut vertices: Vec<Point> = Vec::new();
        for p in points {
            if vertices.last() != Some(&p) {
                vertices.push(p);
            }
        }
        while vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        Ring::new(vertices)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Edges as `(from, to)` pairs including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Ring {
        Ring {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Ring {
        Ring {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point::new(p.x * k, p.y * k))
                .collect(),
        }
    }

    /// `(min_x, min_y, max_x, max_y)` of the vertices.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (
                f64::INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
            ),
            |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
        )
    }
}

/// One annotation's geometry: any number of rings under the even-odd rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    rings: Vec<Ring>,
}

impl Region {
    pub fn new(rings: Vec<Ring>) -> Result<Self, GeometryError> {
        if rings.is_empty() {
            return Err(GeometryError::EmptyRegion);
        }
        Ok(Region { rings })
    }

    pub fn single(ring: Ring) -> Self {
        Region { rings: vec![ring] }
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Region::single(
            Ring::new(vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ])
            .expect("rectangle with positive extent"),
        )
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn into_rings(self) -> Vec<Ring> {
        self.rings
    }

    pub fn map_rings(&self, f: impl Fn(&Ring) -> Ring) -> Region {
        Region {
            rings: self.rings.iter().map(f).collect(),
        }
    }
}

/// Area class with thresholds at 32² and 96² pixels, lower-inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeBucket {
    Small,
    Medium,
    Large,
}

impl SizeBucket {
    pub const SMALL_MAX: u64 = 32 * 32;
    pub const MEDIUM_MAX: u64 = 96 * 96;
    pub const ALL: [SizeBucket; 3] = [SizeBucket::Small, SizeBucket::Medium, SizeBucket::Large];

    pub fn as_str(self) -> &'static str {
        match self {
            SizeBucket::Small => "small",
            SizeBucket::Medium => "medium",
            SizeBucket::Large => "large",
        }
    }
}

pub fn size_bucket(area: u64) -> SizeBucket {
    if area < SizeBucket::SMALL_MAX {
        SizeBucket::Small
    } else if area < SizeBucket::MEDIUM_MAX {
        SizeBucket::Medium
    } else {
        SizeBucket::Large
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_rejects_bad_input() {
        let p = Point::new;
        assert_eq!(
            Ring::new(vec![p(0.0, 0.0), p(1.0, 0.0)]),
            Err(GeometryError::TooFewVertices(2))
        );
        assert_eq!(
            Ring::new(vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)]),
            Err(GeometryError::RepeatedVertex(2))
        );
        assert_eq!(
            Ring::new(vec![p(0.0, 0.0), p(1.0, 0.0), p(0.0, 0.0)]),
            Err(GeometryError::RepeatedVertex(0))
        );
        assert_eq!(
            Ring::new(vec![p(0.0, f64::NAN), p(1.0, 0.0), p(0.0, 1.0)]),
            Err(GeometryError::NonFinite(0))
        );
        assert_eq!(Region::new(vec![]), Err(GeometryError::EmptyRegion));
    }

    #[test]
    fn clicks_are_normalized() {
        let p = Point::new;
        let r = Ring::from_clicks([
            p(0.0, 0.0),
            p(2.0, 0.0),
            p(2.0, 0.0),
            p(2.0, 2.0),
            p(0.0, 0.0),
        ])
        .unwrap();
        assert_eq!(r.vertices().len(), 3);
    }

    #[test]
    fn size_bucket_boundaries() {
        assert_eq!(size_bucket(0), SizeBucket::Small);
        assert_eq!(size_bucket(900), SizeBucket::Small);
        assert_eq!(size_bucket(1023), SizeBucket::Small);
        assert_eq!(size_bucket(1024), SizeBucket::Medium);
        assert_eq!(size_bucket(9215), SizeBucket::Medium);
        assert_eq!(size_bucket(9216), SizeBucket::Large);
        assert_eq!(size_bucket(u64::MAX), SizeBucket::Large);
    }
}
