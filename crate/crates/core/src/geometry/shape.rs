use std::f64::consts::PI;

use super::{crossing_x, GeometryError, Point, Region, Ring};

/// Signed shoelace area; positive for counter-clockwise rings in a y-up frame.
pub fn shoelace(ring: &Ring) -> f64 {
    let v = ring.vertices();
    let o = v[0];
    let mut twice = 0.0;
    for i in 1..v.len() - 1 {
        let (a, b) = (v[i], v[i + 1]);
        twice += (a.x - o.x) * (b.y - o.y) - (b.x - o.x) * (a.y - o.y);
    }
    twice / 2.0
}

pub fn perimeter(ring: &Ring) -> f64 {
    ring.edges()
        .map(|(a, b)| (b.x - a.x).hypot(b.y - a.y))
        .sum()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Segments cross at a single point interior to both. Touching and collinear
/// overlap do not count.
fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    orient(a, b, p) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

fn point_in_ring(p: Point, ring: &Ring) -> bool {
    let mut inside = false;
    for (a, b) in ring.edges() {
        if (a.y > p.y) != (b.y > p.y) && crossing_x(a, b, p.y) > p.x {
            inside = !inside;
        }
    }
    inside
}

fn boxes_overlap(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> bool {
    a.0 <= b.2 && b.0 <= a.2 && a.1 <= b.3 && b.1 <= a.3
}

fn rings_cross(a: &Ring, b: &Ring) -> bool {
    if !boxes_overlap(a.bounds(), b.bounds()) {
        return false;
    }
    let b_edges: Vec<(Point, Point)> = b.edges().collect();
    a.edges().any(|(p1, p2)| {
        b_edges.iter().any(|&(q1, q2)| {
            p1.x.max(p2.x) >= q1.x.min(q2.x)
                && q1.x.max(q2.x) >= p1.x.min(p2.x)
                && p1.y.max(p2.y) >= q1.y.min(q2.y)
                && q1.y.max(q2.y) >= p1.y.min(p2.y)
                && segments_cross(p1, p2, q1, q2)
        })
    })
}

/// Whether `inner` lies inside `outer`, judged from the first vertex of
/// `inner` that is not on `outer`'s boundary.
fn ring_inside(inner: &Ring, outer: &Ring) -> bool {
    if !boxes_overlap(inner.bounds(), outer.bounds()) {
        return false;
    }
    inner
        .vertices()
        .iter()
        .find(|&&p| !outer.edges().any(|(a, b)| on_segment(p, a, b)))
        .is_some_and(|&p| point_in_ring(p, outer))
}

/// Ring nesting: depth counts enclosing rings, parent is the innermost one.
/// Even depth rings are outer boundaries, odd depth rings are holes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingStructure {
    pub depth: Vec<usize>,
    pub parent: Vec<Option<usize>>,
}

impl RingStructure {
    pub fn holes(&self) -> usize {
        self.depth.iter().filter(|d| *d % 2 == 1).count()
    }

    pub fn polygons(&self) -> usize {
        self.depth.iter().filter(|d| *d % 2 == 0).count()
    }

    /// `(outer ring, hole rings)` for every even-depth ring.
    pub fn polygon_rings(&self) -> Vec<(usize, Vec<usize>)> {
        (0..self.depth.len())
            .filter(|&i| self.depth[i].is_multiple_of(2))
            .map(|i| {
                let holes = (0..self.depth.len())
                    .filter(|&j| self.parent[j] == Some(i) && self.depth[j] % 2 == 1)
                    .collect();
                (i, holes)
            })
            .collect()
    }
}

pub fn ring_structure(region: &Region) -> Result<RingStructure, GeometryError> {
    let rings = region.rings();
    let n = rings.len();
    for i in 0..n {
        for j in i + 1..n {
            if rings_cross(&rings[i], &rings[j]) {
                return Err(GeometryError::CrossingRings(i, j));
            }
        }
    }
    let containers: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && ring_inside(&rings[i], &rings[j]))
                .collect()
        })
        .collect();
    let depth: Vec<usize> = containers.iter().map(Vec::len).collect();
    let parent = containers
        .iter()
        .map(|cs| cs.iter().copied().max_by_key(|&j| depth[j]))
        .collect();
    Ok(RingStructure { depth, parent })
}

pub fn count_holes(region: &Region) -> Result<usize, GeometryError> {
    Ok(ring_structure(region)?.holes())
}

pub fn polygon_count(region: &Region) -> Result<usize, GeometryError> {
    Ok(ring_structure(region)?.polygons())
}

/// Vector descriptors of one outer ring with its holes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolygonDescriptor {
    pub area: f64,
    pub perimeter: f64,
    pub bbox_area: f64,
}

impl PolygonDescriptor {
    /// `4πA / P²`, clamped to `[0, 1]`.
    pub fn isoperimetric(&self) -> f64 {
        (4.0 * PI * self.area / (self.perimeter * self.perimeter)).clamp(0.0, 1.0)
    }

    pub fn extent(&self) -> f64 {
        (self.area / self.bbox_area).clamp(0.0, 1.0)
    }
}

pub fn polygon_descriptors(region: &Region) -> Result<Vec<PolygonDescriptor>, GeometryError> {
    let rings = region.rings();
    let structure = ring_structure(region)?;
    Ok(structure
        .polygon_rings()
        .into_iter()
        .map(|(outer, holes)| {
            let ring = &rings[outer];
            let (x0, y0, x1, y1) = ring.bounds();
            let area = shoelace(ring).abs()
                - holes
                    .iter()
                    .map(|&h| shoelace(&rings[h]).abs())
                    .sum::<f64>();
            let perimeter =
                perimeter(ring) + holes.iter().map(|&h| perimeter(&rings[h])).sum::<f64>();
            PolygonDescriptor {
                area: area.max(0.0),
                perimeter,
                bbox_area: (x1 - x0) * (y1 - y0),
            }
        })
        .collect())
}

/// Isoperimetric quotient `4πA / P²`, averaged over the region's polygons.
/// Polygons with zero area are left out of the mean.
pub fn boundary_complexity(region: &Region) -> Result<f64, GeometryError> {
    let polys: Vec<_> = polygon_descriptors(region)?
        .into_iter()
        .filter(|p| p.area > 0.0)
        .collect();
    if polys.is_empty() {
        return Err(GeometryError::ZeroArea);
    }
    if polys.iter().any(|p| p.perimeter <= 0.0) {
        return Err(GeometryError::ZeroPerimeter);
    }
    Ok(polys
        .iter()
        .map(PolygonDescriptor::isoperimetric)
        .sum::<f64>()
        / polys.len() as f64)
}

/// Area over axis-aligned bounding-box area, averaged over the region's
/// polygons with positive area.
pub fn extent(region: &Region) -> Result<f64, GeometryError> {
    let polys: Vec<_> = polygon_descriptors(region)?
        .into_iter()
        .filter(|p| p.area > 0.0)
        .collect();
    if polys.is_empty() {
        return Err(GeometryError::ZeroArea);
    }
    if polys.iter().any(|p| p.bbox_area <= 0.0) {
        return Err(GeometryError::ZeroBoxArea);
    }
    Ok(polys.iter().map(PolygonDescriptor::extent).sum::<f64>() / polys.len() as f64)
}
