//! Run-length codec for binary masks.
//!
//! Runs are row-major and alternate starting with background, so the first
//! run may be zero. The runs must sum to `width * height`.

use super::{BitMask, GeometryError};

pub fn encode(mask: &BitMask) -> Vec<u64> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for i in 0..mask.len() {
        let bit = mask.get_linear(i);
        if bit != current {
            runs.push(run);
            run = 0;
            current = bit;
        }
        run += 1;
    }
    runs.push(run);
    runs
}

pub fn decode(width: u32, height: u32, runs: &[u64]) -> Result<BitMask, GeometryError> {
    let mut mask = BitMask::new(width, height)?;
    let expected = mask.len() as u64;
    let total = runs.iter().try_fold(0u64, |acc, &r| acc.checked_add(r));
    match total {
        Some(t) if t == expected => {}
        other => {
            return Err(GeometryError::RleLength {
                got: other.unwrap_or(u64::MAX),
                expected,
            })
        }
    }
    let w = width as u64;
    let mut pos = 0u64;
    for (k, &run) in runs.iter().enumerate() {
        if k % 2 == 1 {
            let (mut start, end) = (pos, pos + run);
            while start < end {
                let row = start / w;
                let row_end = ((row + 1) * w).min(end);
                mask.fill_row(row as u32, (start % w) as u32, (row_end - row * w) as u32);
                start = row_end;
            }
        }
        pos += run;
    }
    Ok(mask)
}
