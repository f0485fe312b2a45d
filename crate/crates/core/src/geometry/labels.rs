use super::GeometryError;

/// Per-pixel label raster; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptyRaster { width, height });
        }
        Ok(LabelMap {
            width,
            height,
            labels: vec![0; width as usize * height as usize],
        })
    }

    pub fn from_vec(width: u32, height: u32, labels: Vec<u32>) -> Result<Self, GeometryError> {
        let map = LabelMap::new(width, height)?;
        if labels.len() != map.labels.len() {
            return Err(GeometryError::RleLength {
                got: labels.len() as u64,
                expected: map.labels.len() as u64,
            });
        }
        Ok(LabelMap { labels, ..map })
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, label: u32) {
        self.labels[y as usize * self.width as usize + x as usize] = label;
    }

    /// Paints `label` on every set pixel of `mask`.
    pub fn paint(&mut self, mask: &super::BitMask, label: u32) -> Result<(), GeometryError> {
        if mask.dims() != self.dims() {
            return Err(GeometryError::DimensionMismatch {
                a: self.dims(),
                b: mask.dims(),
            });
        }
        for (x, y) in mask.ones() {
            self.set(x, y, label);
        }
        Ok(())
    }

    /// Binary mask of pixels carrying `label`.
    pub fn mask_of(&self, label: u32) -> super::BitMask {
        let mut mask = super::BitMask::new(self.width, self.height).expect("positive dims");
        let w = self.width as usize;
        for (i, _) in self.labels.iter().enumerate().filter(|(_, &l)| l == label) {
            mask.set((i % w) as u32, (i / w) as u32, true);
        }
        mask
    }

    /// Flat `[value, length, value, length, ...]` runs in row-major order.
    pub fn encode_runs(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut iter = self.labels.iter();
        let Some(&first) = iter.next() else {
            return out;
        };
        let (mut value, mut len) = (first, 1u64);
        for &l in iter {
            if l == value {
                len += 1;
            } else {
                out.extend([value as u64, len]);
                value = l;
                len = 1;
            }
        }
        out.extend([value as u64, len]);
        out
    }

    pub fn decode_runs(width: u32, height: u32, runs: &[u64]) -> Result<Self, GeometryError> {
        if runs.len() % 2 == 1 {
            return Err(GeometryError::OddRuns(runs.len()));
        }
        let expected = width as u64 * height as u64;
        let total = runs
            .chunks_exact(2)
            .try_fold(0u64, |acc, c| acc.checked_add(c[1]))
            .unwrap_or(u64::MAX);
        if total != expected {
            return Err(GeometryError::RleLength {
                got: total,
                expected,
            });
        }
        let mut labels = Vec::with_capacity(expected as usize);
        for c in runs.chunks_exact(2) {
            let value = u32::try_from(c[0]).map_err(|_| GeometryError::OddRuns(runs.len()))?;
            labels.extend(std::iter::repeat_n(value, c[1] as usize));
        }
        LabelMap::from_vec(width, height, labels)
    }
}
