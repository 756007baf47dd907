use rand::Rng;

use crate::error::{shape, Error, Result};
use crate::field::PrimeModulus;
use crate::pack::{unpack_digits, Axis, Direction, PackOrientation, PackedWord};
use crate::plan::CompressionPlan;
use crate::word::Word;

/// Dense row-major matrix of residues in `[0, p-1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl ResidueMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<u32>, m: PrimeModulus) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                left: shape(rows, cols),
                right: format!("{} values", data.len()),
            });
        }
        if let Some((i, &v)) = data.iter().enumerate().find(|(_, &v)| v >= m.p()) {
            return Err(Error::InvalidArgument(format!(
                "entry ({}, {}) = {v} is not a residue mod {}",
                i / cols.max(1),
                i % cols.max(1),
                m.p()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<u32>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Uniform-ish entries `x mod p` from 64-bit draws; the bias is below
    /// `p / 2^64`.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, m: PrimeModulus, rng: &mut R) -> Self {
        let p = m.p() as u64;
        let data = (0..rows * cols).map(|_| (rng.next_u64() % p) as u32).collect();
        Self::from_raw(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u32) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Sum of all entries mod 2^32.
    pub fn checksum(&self) -> u32 {
        self.data.iter().fold(0u32, |acc, &v| acc.wrapping_add(v))
    }
}

/// A residue matrix with one axis grouped `e` entries per word.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedMatrix<W: Word = f64> {
    pub(crate) logical_rows: usize,
    pub(crate) logical_cols: usize,
    pub(crate) stored_rows: usize,
    pub(crate) stored_cols: usize,
    pub(crate) orientation: PackOrientation,
    pub(crate) plan: CompressionPlan,
    pub(crate) data: Vec<PackedWord<W>>,
}

impl<W: Word> CompressedMatrix<W> {
    /// Packs `a` along `axis` in `direction`, `plan.e()` residues per word.
    pub fn pack(a: &ResidueMatrix, plan: &CompressionPlan, axis: Axis, direction: Direction) -> Self {
        let e = plan.e() as usize;
        let t = plan.t();
        let (stored_rows, stored_cols) = match axis {
            Axis::Row => (a.rows, a.cols.div_ceil(e)),
            Axis::Column => (a.rows.div_ceil(e), a.cols),
        };
        // Residue at position `i` of a group of `len` goes to slot `i`
        // (forward) or `e - 1 - i` (reversed, with the short tail padded
        // at the low end). Slots sit `t` bits apart and never overlap.
        let shift = |i: usize| -> u32 {
            match direction {
                Direction::Forward => t * i as u32,
                Direction::Reversed => t * (e - 1 - i) as u32,
            }
        };
        let mut words = vec![0u64; stored_rows * stored_cols];
        match axis {
            Axis::Row => {
                for r in 0..a.rows {
                    let out = &mut words[r * stored_cols..(r + 1) * stored_cols];
                    for (w, group) in out.iter_mut().zip(a.row(r).chunks(e)) {
                        *w = group
                            .iter()
                            .enumerate()
                            .fold(0, |acc, (i, &x)| acc | (x as u64) << shift(i));
                    }
                }
            }
            Axis::Column => {
                for r in 0..a.rows {
                    let s = shift(r % e);
                    let out = &mut words[(r / e) * stored_cols..(r / e + 1) * stored_cols];
                    for (w, &x) in out.iter_mut().zip(a.row(r)) {
                        *w |= (x as u64) << s;
                    }
                }
            }
        }
        let data = words.into_iter().map(|w| PackedWord::new(W::from_u64(w))).collect();
        Self {
            logical_rows: a.rows,
            logical_cols: a.cols,
            stored_rows,
            stored_cols,
            orientation: PackOrientation { direction, axis, slots: e },
            plan: *plan,
            data,
        }
    }

    pub fn logical_shape(&self) -> (usize, usize) {
        (self.logical_rows, self.logical_cols)
    }

    pub fn stored_shape(&self) -> (usize, usize) {
        (self.stored_rows, self.stored_cols)
    }

    pub fn orientation(&self) -> PackOrientation {
        self.orientation
    }

    pub fn plan(&self) -> &CompressionPlan {
        &self.plan
    }

    pub fn data(&self) -> &[PackedWord<W>] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> PackedWord<W> {
        self.data[r * self.stored_cols + c]
    }

    /// Unpacks every word. Digits must already be reduced below `p`.
    pub fn unpack(&self) -> Result<ResidueMatrix> {
        let e = self.orientation.slots;
        let t = self.plan.t();
        let p = self.plan.p();
        let mut out = ResidueMatrix::zeros(self.logical_rows, self.logical_cols);
        for sr in 0..self.stored_rows {
            for sc in 0..self.stored_cols {
                let x = self.get(sr, sc).to_u64();
                if t as usize * e < 64 && x >> (t as usize * e) != 0 {
                    return Err(Error::DigitOverflow { value: x as u128, t, digits: e });
                }
                for (i, digit) in unpack_digits(x, t, e).enumerate() {
                    let slot = match self.orientation.direction {
                        Direction::Forward => i,
                        Direction::Reversed => e - 1 - i,
                    };
                    let (r, c) = match self.orientation.axis {
                        Axis::Row => (sr, sc * e + slot),
                        Axis::Column => (sr * e + slot, sc),
                    };
                    if r >= self.logical_rows || c >= self.logical_cols {
                        continue;
                    }
                    if digit >= p as u64 {
                        return Err(Error::PlanMismatch(format!(
                            "digit {digit} at ({r}, {c}) is not reduced mod {p}"
                        )));
                    }
                    out.set(r, c, digit as u32);
                }
            }
        }
        Ok(out)
    }
}
