//! Per-pixel point-in-region test and random ring generators.

use rand::Rng;

pub type Ring = Vec<(f64, f64)>;

/// Row-major boolean grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub width: u32,
    pub height: u32,
    pub cells: Vec<bool>,
}

impl Grid {
    pub fn new(width: u32, height: u32) -> Self {
        Grid {
            width,
            height,
            cells: vec![false; (width * height) as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let mut g = Grid::new(width, height);
        for y in 0..height {
            for x in 0..width {
                g.cells[(y * width + x) as usize] = f(x, y);
            }
        }
        g
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.cells[(y * self.width + x) as usize]
    }

    pub fn area(&self) -> u64 {
        self.cells.iter().filter(|&&c| c).count() as u64
    }

    pub fn or(&self, other: &Grid) -> Grid {
        Grid {
            width: self.width,
            height: self.height,
            cells: self
                .cells
                .iter()
                .zip(&other.cells)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    pub fn and_count(&self, other: &Grid) -> u64 {
        self.cells
            .iter()
            .zip(&other.cells)
            .filter(|(a, b)| **a && **b)
            .count() as u64
    }

    pub fn or_count(&self, other: &Grid) -> u64 {
        self.cells
            .iter()
            .zip(&other.cells)
            .filter(|(a, b)| **a || **b)
            .count() as u64
    }

    /// Row-major runs starting with a background run.
    pub fn runs(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut current = false;
        let mut len = 0u64;
        for &c in &self.cells {
            if c == current {
                len += 1;
            } else {
                out.push(len);
                current = c;
                len = 1;
            }
        }
        out.push(len);
        out
    }
}

/// Even-odd membership of one point: count boundary crossings strictly to
/// the right of `(px, py)`. Crossings use the edge's lower endpoint as the
/// interpolation base, so ties resolve the same way for either orientation.
pub fn inside(rings: &[Ring], px: f64, py: f64) -> bool {
    let mut crossings = 0usize;
    for ring in rings {
        let n = ring.len();
        for i in 0..n {
            let a = ring[i];
            let b = ring[(i + 1) % n];
            if (a.1 > py) == (b.1 > py) {
                continue;
            }
            let (lo, hi) = if a.1 < b.1 { (a, b) } else { (b, a) };
            let cx = lo.0 + (py - lo.1) * (hi.0 - lo.0) / (hi.1 - lo.1);
            if cx > px {
                crossings += 1;
            }
        }
    }
    crossings % 2 == 1
}

/// Samples every pixel center.
pub fn even_odd_grid(rings: &[Ring], width: u32, height: u32) -> Grid {
    Grid::from_fn(width, height, |x, y| {
        inside(rings, x as f64 + 0.5, y as f64 + 0.5)
    })
}

fn clean(ring: Ring) -> Option<Ring> {
    let mut out: Ring = Vec::with_capacity(ring.len());
    for p in ring {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    (out.len() >= 3).then_some(out)
}

fn star<R: Rng>(rng: &mut R, cx: f64, cy: f64, radius: f64, n: usize) -> Ring {
    let mut angles: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
        .into_iter()
        .map(|t| {
            let r = radius * rng.gen_range(0.2..1.0);
            (cx + r * t.cos(), cy + r * t.sin())
        })
        .collect()
}

/// One random region on a `width x height` canvas: simple and
/// self-intersecting polygons, integer and half-integer vertices that put
/// edges through pixel centers, multi-ring regions with holes, and rings
/// that reach past the canvas.
pub fn random_rings<R: Rng>(rng: &mut R, width: u32, height: u32) -> Vec<Ring> {
    let (w, h) = (width as f64, height as f64);
    loop {
        let kind = rng.gen_range(0..6);
        let rings: Vec<Ring> = match kind {
            0 => {
                let n = rng.gen_range(3..12);
                vec![(0..n)
                    .map(|_| {
                        (
                            rng.gen_range(0..=width) as f64,
                            rng.gen_range(0..=height) as f64,
                        )
                    })
                    .collect()]
            }
            1 => {
                let n = rng.gen_range(3..40);
                let (cx, cy, r) = (
                    rng.gen_range(0.0..w),
                    rng.gen_range(0.0..h),
                    rng.gen_range(1.0..w.max(h)),
                );
                vec![star(rng, cx, cy, r, n)]
            }
            2 => {
                let half = |rng: &mut R, m: u32| rng.gen_range(0..=2 * m) as f64 / 2.0;
                let (x0, x1) = (half(rng, width), half(rng, width));
                let (y0, y1) = (half(rng, height), half(rng, height));
                vec![vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)]]
            }
            3 => {
                let (cx, cy) = (rng.gen_range(0.0..w), rng.gen_range(0.0..h));
                let r = rng.gen_range(2.0..w.max(h));
                let (n_outer, n_hole) = (rng.gen_range(3..16), rng.gen_range(3..10));
                let outer = star(rng, cx, cy, r, n_outer);
                let hole = star(rng, cx, cy, r * 0.4, n_hole);
                let (ox, oy) = (rng.gen_range(0.0..w), rng.gen_range(0.0..h));
                let other = star(rng, ox, oy, r * 0.5, 5);
                vec![outer, hole, other]
            }
            4 => {
                let n = rng.gen_range(3..10);
                vec![(0..n)
                    .map(|_| (rng.gen_range(-w..2.0 * w), rng.gen_range(-h..2.0 * h)))
                    .collect()]
            }
            _ => {
                let n = rng.gen_range(3..30);
                let mut p = (rng.gen_range(0.0..w), rng.gen_range(0.0..h));
                let walk: Ring = (0..n)
                    .map(|_| {
                        p = (
                            p.0 + rng.gen_range(-6.0..6.0),
                            p.1 + rng.gen_range(-6.0..6.0),
                        );
                        p
                    })
                    .collect();
                vec![walk]
            }
        };
        let cleaned: Option<Vec<Ring>> = rings.into_iter().map(clean).collect();
        if let Some(r) = cleaned {
            return r;
        }
    }
}
