//! Unscrambled Sobol points with Joe–Kuo direction numbers.
//!
//! Points are enumerated in Gray-code order, which makes the sequence
//! coincide with the usual reference implementations. Index 0 (the origin)
//! is never produced: the cursor starts at 1 because the points are mapped
//! through the inverse normal CDF.

use crate::error::{LrvError, Result};
use crate::sobol_table::{INIT, MAX_DIM, POLY};

const BITS: usize = 32;

#[derive(Clone, Debug)]
pub struct SobolSequence {
    dim: usize,
    cursor: u64,
    directions: Vec<[u32; BITS]>,
}

fn directions_for(dim_index: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim_index == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1u32 << (BITS - 1 - k);
        }
        return v;
    }
    let poly = POLY[dim_index];
    let degree = (32 - poly.leading_zeros() - 1) as usize;
    let init = &INIT[dim_index];
    for k in 0..degree.min(BITS) {
        v[k] = init[k] << (BITS - 1 - k);
    }
    for k in degree..BITS {
        let mut value = v[k - degree] ^ (v[k - degree] >> degree);
        for i in 1..degree {
            if (poly >> (degree - i)) & 1 == 1 {
                value ^= v[k - i];
            }
        }
        v[k] = value;
    }
    v
}

impl SobolSequence {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(LrvError::SobolDimension(dim, MAX_DIM));
        }
        Ok(Self { dim, cursor: 1, directions: (0..dim).map(directions_for).collect() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    /// Moves the cursor; `index` 0 is bumped to 1.
    pub fn seek(&mut self, index: u64) {
        self.cursor = index.max(1);
    }

    /// The `index`-th point without touching the cursor.
    pub fn point_at(&self, index: u64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let gray = index ^ (index >> 1);
        const SCALE: f64 = 1.0 / 4_294_967_296.0;
        for (x, dirs) in out.iter_mut().zip(&self.directions) {
            let mut acc = 0u32;
            let mut g = gray;
            let mut bit = 0;
            while g != 0 && bit < BITS {
                if g & 1 == 1 {
                    acc ^= dirs[bit];
                }
                g >>= 1;
                bit += 1;
            }
            *x = acc as f64 * SCALE;
        }
    }

    /// Writes the point under the cursor into `out` and advances.
    pub fn next_into(&mut self, out: &mut [f64]) {
        self.point_at(self.cursor, out);
        self.cursor += 1;
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.next_into(&mut out);
        out
    }
}
