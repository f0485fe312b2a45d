use super::{BitMask, GeometryError, Point, Region};

/// X coordinate where the edge `a`–`b` crosses the horizontal line `y`.
///
/// The edge is always evaluated from its lower-y endpoint so the result is
/// bit-identical regardless of ring orientation. Callers must only pass
/// edges that straddle `y` under the half-open rule `(a.y > y) != (b.y > y)`.
#[inline]
pub fn crossing_x(a: Point, b: Point, y: f64) -> f64 {
    let (lo, hi) = if a.y < b.y { (a, b) } else { (b, a) };
    lo.x + (y - lo.y) * (hi.x - lo.x) / (hi.y - lo.y)
}

/// Rasterizes `region` by sampling pixel centers under the even-odd rule.
///
/// Pixel `(col j, row i)` is set iff an odd number of region edges cross the
/// ray from `(j + 0.5, i + 0.5)` toward +x strictly to its right. Vertices
/// outside the image are fine; only centers inside the raster are sampled.
pub fn rasterize(region: &Region, width: u32, height: u32) -> Result<BitMask, GeometryError> {
    let mut mask = BitMask::new(width, height)?;
    let (min_y, max_y) = region
        .rings()
        .iter()
        .map(|r| r.bounds())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
            (lo.min(b.1), hi.max(b.3))
        });
    let first_row = first_center_at_or_above(min_y, height);
    let mut xs: Vec<f64> = Vec::new();

    for row in first_row..height {
        let y = row as f64 + 0.5;
        if y > max_y {
            break;
        }
        xs.clear();
        for ring in region.rings() {
            for (a, b) in ring.edges() {
                if (a.y > y) != (b.y > y) {
                    xs.push(crossing_x(a, b, y));
                }
            }
        }
        if xs.is_empty() {
            continue;
        }
        xs.sort_unstable_by(f64::total_cmp);
        // Crossings per scanline come in pairs; the center x is inside iff
        // xs[2k] <= x < xs[2k + 1] for some k.
        for pair in xs.chunks_exact(2) {
            let start = first_center_at_or_above(pair[0], width);
            let end = first_center_at_or_above(pair[1], width);
            mask.fill_row(row, start, end);
        }
    }
    Ok(mask)
}

/// Smallest index `j` in `0..=limit` with `j + 0.5 >= v`, or `limit` if none.
fn first_center_at_or_above(v: f64, limit: u32) -> u32 {
    if v.is_nan() || v == f64::INFINITY {
        return limit;
    }
    let guess = (v - 0.5).ceil();
    let mut j = if guess <= 0.0 {
        0
    } else if guess >= limit as f64 {
        limit
    } else {
        guess as u32
    };
    // Correct the rounding in `v - 0.5` with exact comparisons.
    while j > 0 && (j - 1) as f64 + 0.5 >= v {
        j -= 1;
    }
    while j < limit && (j as f64 + 0.5) < v {
        j += 1;
    }
    j
}
