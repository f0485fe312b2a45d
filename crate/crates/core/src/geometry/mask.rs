use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::fraction::Fraction;

/// Row-major binary raster packed 64 pixels per word. Bits past
/// `width * height` in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl std::fmt::Debug for BitMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "BitMask({}x{}, area {})",
            self.width,
            self.height,
            self.area()
        )
    }
}

impl BitMask {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptyRaster { width, height });
        }
        let len = width as usize * height as usize;
        Ok(BitMask {
            width,
            height,
            words: vec![0; len.div_ceil(64)],
        })
    }

    pub fn full(width: u32, height: u32) -> Result<Self, GeometryError> {
        let mut m = BitMask::new(width, height)?;
        m.fill_linear(0, m.len());
        Ok(m)
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> bool,
    ) -> Result<Self, GeometryError> {
        let mut m = BitMask::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        Ok(m)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Total pixel count `width * height`.
    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Number of set pixels.
    pub fn area(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    fn index(&self, x: u32, y: u32) -> usize {
        assert!(
            x < self.width && y < self.height,
            "pixel ({x}, {y}) out of bounds"
        );
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.get_linear(self.index(x, y))
    }

    pub fn get_linear(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.index(x, y);
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    /// Sets pixels `[start, end)` of row `y`.
    pub fn fill_row(&mut self, y: u32, start: u32, end: u32) {
        let end = end.min(self.width);
        if start >= end {
            return;
        }
        let base = y as usize * self.width as usize;
        self.fill_linear(base + start as usize, base + end as usize);
    }

    fn fill_linear(&mut self, start: usize, end: usize) {
        let mut i = start;
        while i < end {
            let word = i / 64;
            let lo = i % 64;
            let hi = (end - word * 64).min(64);
            let bits = if hi - lo == 64 {
                u64::MAX
            } else {
                ((1u64 << (hi - lo)) - 1) << lo
            };
            self.words[word] |= bits;
            i = word * 64 + hi;
        }
    }

    fn check_dims(&self, other: &BitMask) -> Result<(), GeometryError> {
        if self.dims() != other.dims() {
            return Err(GeometryError::DimensionMismatch {
                a: self.dims(),
                b: other.dims(),
            });
        }
        Ok(())
    }

    pub fn intersection_area(&self, other: &BitMask) -> Result<u64, GeometryError> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as u64)
            .sum())
    }

    pub fn union_area(&self, other: &BitMask) -> Result<u64, GeometryError> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as u64)
            .sum())
    }

    pub fn union_with(&mut self, other: &BitMask) -> Result<(), GeometryError> {
        self.check_dims(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }

    pub fn intersect(&self, other: &BitMask) -> Result<BitMask, GeometryError> {
        self.check_dims(other)?;
        Ok(BitMask {
            width: self.width,
            height: self.height,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        })
    }

    /// Iterates `(x, y)` of set pixels in row-major order.
    pub fn ones(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let i = wi * 64 + b;
                Some(((i % w) as u32, (i / w) as u32))
            })
        })
    }
}

/// Intersection over union. Two empty masks agree perfectly and score 1.
pub fn iou(a: &BitMask, b: &BitMask) -> Result<Fraction, GeometryError> {
    let inter = a.intersection_area(b)?;
    let union = a.union_area(b)?;
    if union == 0 {
        return Ok(Fraction::ONE);
    }
    Ok(Fraction::new(inter, union))
}

/// `|child ∩ parent| / |child|`.
pub fn containment_ratio(child: &BitMask, parent: &BitMask) -> Result<Fraction, GeometryError> {
    let inter = child.intersection_area(parent)?;
    let area = child.area();
    if area == 0 {
        return Err(GeometryError::EmptyChild);
    }
    Ok(Fraction::new(inter, area))
}

/// Share of the container's pixels occupied by the child:
/// `|child ∩ container| / |container|`.
pub fn coverage(child: &BitMask, container: &BitMask) -> Result<Fraction, GeometryError> {
    let inter = child.intersection_area(container)?;
    let area = container.area();
    if area == 0 {
        return Err(GeometryError::EmptyContainer);
    }
    Ok(Fraction::new(inter, area))
}

/// `|child| / (width * height)`.
pub fn image_coverage(child: &BitMask) -> Fraction {
    Fraction::new(child.area(), child.len() as u64)
}

/// Inclusive integer pixel box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[u32; 4]", try_from = "[i64; 4]")]
pub struct BBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Result<Self, GeometryError> {
        if x_min > x_max || y_min > y_max {
            return Err(GeometryError::BadBox(
                x_min as i64,
                y_min as i64,
                x_max as i64,
                y_max as i64,
            ));
        }
        Ok(BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn area(&self) -> u64 {
        (self.x_max - self.x_min + 1) as u64 * (self.y_max - self.y_min + 1) as u64
    }

    pub fn within(&self, width: u32, height: u32) -> bool {
        self.x_max < width && self.y_max < height
    }

    /// Clips to a `width x height` image; `None` when nothing remains.
    pub fn clip(&self, width: u32, height: u32) -> Option<BBox> {
        if self.x_min >= width || self.y_min >= height {
            return None;
        }
        Some(BBox {
            x_min: self.x_min,
            y_min: self.y_min,
            x_max: self.x_max.min(width - 1),
            y_max: self.y_max.min(height - 1),
        })
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl TryFrom<[i64; 4]> for BBox {
    type Error = GeometryError;

    /// Negative coordinates are clamped to zero; an inverted box is an error.
    fn try_from([x0, y0, x1, y1]: [i64; 4]) -> Result<Self, Self::Error> {
        if x0 > x1 || y0 > y1 || x1 < 0 || y1 < 0 {
            return Err(GeometryError::BadBox(x0, y0, x1, y1));
        }
        let c = |v: i64| v.clamp(0, u32::MAX as i64) as u32;
        BBox::new(c(x0), c(y0), c(x1), c(y1))
    }
}

pub fn bbox_from_mask(mask: &BitMask) -> Result<BBox, GeometryError> {
    let mut it = mask.ones();
    let (x, y) = it.next().ok_or(GeometryError::EmptyMask)?;
    let (mut x0, mut y0, mut x1, mut y1) = (x, y, x, y);
    for (x, y) in it {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    BBox::new(x0, y0, x1, y1)
}

/// Union of filled boxes, each clipped to the image.
pub fn boxes_to_mask(boxes: &[BBox], width: u32, height: u32) -> Result<BitMask, GeometryError> {
    let mut mask = BitMask::new(width, height)?;
    for b in boxes.iter().filter_map(|b| b.clip(width, height)) {
        for y in b.y_min..=b.y_max {
            mask.fill_row(y, b.x_min, b.x_max + 1);
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(w: u32, h: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> BitMask {
        BitMask::from_fn(w, h, |x, y| x >= x0 && x <= x1 && y >= y0 && y <= y1).unwrap()
    }

    #[test]
    fn fill_row_crosses_word_boundaries() {
        let mut m = BitMask::new(200, 3).unwrap();
        m.fill_row(1, 10, 190);
        assert_eq!(m.area(), 180);
        assert!(!m.get(9, 1) && m.get(10, 1) && m.get(189, 1) && !m.get(190, 1));
        assert!(!m.get(100, 0) && !m.get(100, 2));
        let full = BitMask::full(7, 13).unwrap();
        assert_eq!(full.area(), 91);
    }

    #[test]
    fn iou_examples() {
        let a = block(10, 10, 2, 2, 4, 4);
        assert_eq!(iou(&a, &a).unwrap(), Fraction::new(9, 9));
        let b = block(10, 10, 6, 6, 7, 7);
        assert_eq!(iou(&a, &b).unwrap().value(), 0.0);
        // 2x2 block against the same block shifted one column.
        let c = block(10, 10, 0, 0, 1, 1);
        let d = block(10, 10, 1, 0, 2, 1);
        assert_eq!(iou(&c, &d).unwrap(), Fraction::new(2, 6));
        let e = BitMask::new(10, 10).unwrap();
        assert_eq!(iou(&e, &e).unwrap(), Fraction::ONE);
        assert_eq!(iou(&e, &a).unwrap().value(), 0.0);
        let other = BitMask::new(5, 10).unwrap();
        assert!(matches!(
            iou(&a, &other),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn containment_examples() {
        let parent = block(10, 10, 0, 0, 5, 5);
        let inside = block(10, 10, 1, 1, 2, 2);
        assert_eq!(containment_ratio(&inside, &parent).unwrap().value(), 1.0);
        let outside = block(10, 10, 7, 7, 8, 8);
        assert_eq!(containment_ratio(&outside, &parent).unwrap().value(), 0.0);
        // 4-pixel child, two pixels inside the parent.
        let half = block(10, 10, 5, 0, 6, 1);
        assert_eq!(
            containment_ratio(&half, &parent).unwrap(),
            Fraction::new(2, 4)
        );
        let empty = BitMask::new(10, 10).unwrap();
        assert_eq!(
            containment_ratio(&empty, &parent),
            Err(GeometryError::EmptyChild)
        );
    }

    #[test]
    fn coverage_examples() {
        let c = block(10, 10, 0, 0, 3, 2);
        assert_eq!(coverage(&c, &c).unwrap().value(), 1.0);
        let empty = BitMask::new(10, 10).unwrap();
        assert_eq!(coverage(&empty, &c).unwrap().value(), 0.0);
        assert_eq!(image_coverage(&c), Fraction::new(12, 100));
        assert_eq!(coverage(&c, &empty), Err(GeometryError::EmptyContainer));
    }

    #[test]
    fn bbox_examples() {
        let mut m = BitMask::new(10, 10).unwrap();
        m.set(3, 7, true);
        assert_eq!(bbox_from_mask(&m).unwrap(), BBox::new(3, 7, 3, 7).unwrap());
        let full = BitMask::full(10, 8).unwrap();
        assert_eq!(
            bbox_from_mask(&full).unwrap(),
            BBox::new(0, 0, 9, 7).unwrap()
        );
        let mut two = BitMask::new(10, 10).unwrap();
        two.set(1, 1, true);
        two.set(5, 2, true);
        assert_eq!(
            bbox_from_mask(&two).unwrap(),
            BBox::new(1, 1, 5, 2).unwrap()
        );
        assert_eq!(
            bbox_from_mask(&BitMask::new(3, 3).unwrap()),
            Err(GeometryError::EmptyMask)
        );
    }

    #[test]
    fn boxes_to_mask_examples() {
        let one = BBox::new(0, 0, 1, 1).unwrap();
        assert_eq!(boxes_to_mask(&[one], 10, 10).unwrap().area(), 4);
        assert_eq!(boxes_to_mask(&[one, one], 10, 10).unwrap().area(), 4);
        let a = BBox::new(0, 0, 2, 2).unwrap();
        let b = BBox::new(1, 1, 3, 3).unwrap();
        // Inclusion-exclusion: 9 + 9 - 4.
        assert_eq!(boxes_to_mask(&[a, b], 10, 10).unwrap().area(), 9 + 9 - 4);
        assert_eq!(boxes_to_mask(&[], 4, 4).unwrap().area(), 0);
        let big = BBox::new(2, 2, 100, 100).unwrap();
        assert_eq!(boxes_to_mask(&[big], 4, 4).unwrap().area(), 4);
    }

    #[test]
    fn bbox_from_i64() {
        assert_eq!(
            BBox::try_from([-3, -1, 4, 5]).unwrap(),
            BBox::new(0, 0, 4, 5).unwrap()
        );
        assert!(BBox::try_from([5, 0, 4, 5]).is_err());
    }

    #[test]
    fn ones_iterates_row_major() {
        let mut m = BitMask::new(70, 2).unwrap();
        m.set(69, 0, true);
        m.set(0, 1, true);
        m.set(3, 1, true);
        assert_eq!(m.ones().collect::<Vec<_>>(), vec![(69, 0), (0, 1), (3, 1)]);
    }
}
