//! Sparse-parity zero-bit code.
//!
//! The key is a set of `r` weight-`t` parity checks over GF(2). Codewords
//! are uniform kernel elements (sampled by assigning the free columns of the
//! row-reduced system at random and back-solving the pivots, so every
//! kernel element is equally likely and per-position bit frequencies stay
//! balanced). Detection thresholds the fraction of satisfied checks: under
//! BSC(p) noise each weight-t check stays satisfied with probability
//! (1 + (1-2p)^t) / 2, while uniform inputs satisfy half of them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::prc::{CalibrationInfo, Detection};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpcKey {
    pub code_len: usize,
    pub alpha: f64,
    pub row_weight: usize,
    /// `r` parity checks; each row lists its `t` distinct column indices.
    pub rows: Vec<Vec<u32>>,
    /// Satisfied-check count threshold.
    pub tau_satisfied: usize,
    pub calib: CalibrationInfo,
    #[serde(skip)]
    pub(crate) solver: Option<KernelSolver>,
}

impl LdpcKey {
    pub fn generate<R: Rng + ?Sized>(
        code_len: usize,
        row_weight: usize,
        num_rows: usize,
        alpha: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if row_weight == 0 || row_weight >= code_len {
            return Err(Error::InvalidParams(format!(
                "row weight {row_weight} must be in 1..{code_len}"
            )));
        }
        if num_rows == 0 {
            return Err(Error::InvalidParams("need at least one parity row".into()));
        }
        let rows: Vec<Vec<u32>> = (0..num_rows)
            .map(|_| sample_distinct(rng, code_len, row_weight))
            .collect();
        let tau_satisfied =
            crate::prc::num::invert_binom_threshold(num_rows, 1, alpha).ok_or(Error::CodeTooShort)?;
        let mut key = LdpcKey {
            code_len,
            alpha,
            row_weight,
            rows,
            tau_satisfied,
            calib: CalibrationInfo::analytic(alpha),
            solver: None,
        };
        key.solver = Some(KernelSolver::build(&key.rows, code_len));
        Ok(key)
    }

    /// Rebuild derived state after deserialization.
    pub fn ensure_solver(&mut self) {
        if self.solver.is_none() {
            self.solver = Some(KernelSolver::build(&self.rows, self.code_len));
        }
    }

    pub fn kernel_dim(&self) -> usize {
        self.solver
            .as_ref()
            .expect("solver not built")
            .free_cols
            .len()
    }

    pub fn encode<R: Rng + ?Sized>(&self, rng: &mut R) -> BitVec {
        self.solver.as_ref().expect("solver not built").sample(rng)
    }

    pub fn satisfied_count(&self, bits: &BitVec) -> usize {
        self.rows
            .iter()
            .filter(|row| !row.iter().fold(false, |acc, &j| acc ^ bits.get(j as usize)))
            .count()
    }

    pub fn decode(&self, bits: &BitVec) -> Result<Option<Detection>> {
        if bits.is_empty() {
            return Err(Error::EmptyInput);
        }
        if bits.len() > self.code_len {
            return Err(Error::OverlongBlock {
                input: bits.len(),
                code_len: self.code_len,
            });
        }
        if bits.len() != self.code_len {
            // Parity checks need every column; shortened inputs cannot decode.
            return Ok(None);
        }
        let sat = self.satisfied_count(bits);
        if sat >= self.tau_satisfied {
            Ok(Some(Detection {
                score: sat as f64,
                codeword_index: 0,
            }))
        } else {
            Ok(None)
        }
    }
}

fn sample_distinct<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<u32> {
    let mut cols = Vec::with_capacity(k);
    while cols.len() < k {
        let c = rng.random_range(0..n) as u32;
        if !cols.contains(&c) {
            cols.push(c);
        }
    }
    cols.sort_unstable();
    cols
}

/// Fully reduced row-echelon form of the parity system, kept for kernel
/// sampling: assign free columns, back-solve each pivot.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct KernelSolver {
    code_len: usize,
    /// Reduced rows that contain a pivot, packed; paired with pivot column.
    pivot_rows: Vec<(u32, Vec<u64>)>,
    free_cols: Vec<u32>,
}

impl KernelSolver {
    fn build(rows: &[Vec<u32>], code_len: usize) -> Self {
        let words = code_len.div_ceil(64);
        let mut mat: Vec<Vec<u64>> = rows
            .iter()
            .map(|row| {
                let mut w = vec![0u64; words];
                for &c in row {
                    w[(c as usize) >> 6] |= 1u64 << (c & 63);
                }
                w
            })
            .collect();
        let mut pivot_cols: Vec<u32> = Vec::new();
        let mut is_pivot = vec![false; code_len];
        let mut rank = 0usize;
        for col in 0..code_len {
            let (wi, bit) = (col >> 6, 1u64 << (col & 63));
            let Some(sel) = (rank..mat.len()).find(|&r| mat[r][wi] & bit != 0) else {
                continue;
            };
            mat.swap(rank, sel);
            let pivot = mat[rank].clone();
            for (r, row) in mat.iter_mut().enumerate() {
                if r != rank && row[wi] & bit != 0 {
                    for (a, b) in row.iter_mut().zip(&pivot) {
                        *a ^= b;
                    }
                }
            }
            is_pivot[col] = true;
            pivot_cols.push(col as u32);
            rank += 1;
            if rank == mat.len() {
                break;
            }
        }
        // Rows keep getting reduced after their own pivot step, so the
        // solver rows are taken from the final state of the matrix.
        let pivot_rows: Vec<(u32, Vec<u64>)> = pivot_cols
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, mat[i].clone()))
            .collect();
        let free_cols = (0..code_len as u32)
            .filter(|&c| !is_pivot[c as usize])
            .collect();
        KernelSolver {
            code_len,
            pivot_rows,
            free_cols,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BitVec {
        let mut x = BitVec::zeros(self.code_len);
        for &c in &self.free_cols {
            if rng.random_bool(0.5) {
                x.set(c as usize, true);
            }
        }
        for (pivot_col, row) in &self.pivot_rows {
            // x[pivot] = parity of the row's free-column entries of x
            let mut acc = 0u64;
            for (w, xw) in row.iter().zip(x.words()) {
                acc ^= w & xw;
            }
            // the pivot column itself is still zero in x, so acc is the
            // parity over the free columns only
            if acc.count_ones() & 1 == 1 {
                x.set(*pivot_col as usize, true);
            }
        }
        x
    }
}
