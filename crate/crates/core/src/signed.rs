//! Dense users x items matrices over `{-1, 0, +1}`.

use alloc::vec::Vec;

/// A ratings matrix over `{-1, 0, +1}` (dislike, unknown, like), row-major.
///
/// Row and column ids keep the identifiers of the corpus the matrix was cut
/// from; synthetic matrices use `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<i8>,
    row_ids: Vec<u64>,
    col_ids: Vec<u64>,
}

/// Fractions of `+1` and `-1` entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignStats {
    pub positive: f64,
    pub negative: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignedMatrixError {
    #[error("expected {expected} entries for a {rows}x{cols} matrix, got {got}")]
    Shape { rows: usize, cols: usize, expected: usize, got: usize },
    #[error("entry {value} at ({row}, {col}) is not in {{-1, 0, 1}}")]
    Alphabet { row: usize, col: usize, value: i8 },
    #[error("expected {expected} {axis} ids, got {got}")]
    Ids { axis: &'static str, expected: usize, got: usize },
}

impl SignedMatrix {
    pub fn new(n_rows: usize, n_cols: usize, entries: Vec<i8>) -> Result<Self, SignedMatrixError> {
        let row_ids = (0..n_rows as u64).collect();
        let col_ids = (0..n_cols as u64).collect();
        Self::with_ids(n_rows, n_cols, entries, row_ids, col_ids)
    }

    pub fn with_ids(
        n_rows: usize,
        n_cols: usize,
        entries: Vec<i8>,
        row_ids: Vec<u64>,
        col_ids: Vec<u64>,
    ) -> Result<Self, SignedMatrixError> {
        let expected = n_rows * n_cols;
        if entries.len() != expected {
            return Err(SignedMatrixError::Shape {
                rows: n_rows,
                cols: n_cols,
                expected,
                got: entries.len(),
            });
        }
        if let Some(pos) = entries.iter().position(|v| !(-1..=1).contains(v)) {
            return Err(SignedMatrixError::Alphabet {
                row: pos / n_cols,
                col: pos % n_cols,
                value: entries[pos],
            });
        }
        if row_ids.len() != n_rows {
            return Err(SignedMatrixError::Ids { axis: "row", expected: n_rows, got: row_ids.len() });
        }
        if col_ids.len() != n_cols {
            return Err(SignedMatrixError::Ids { axis: "column", expected: n_cols, got: col_ids.len() });
        }
        Ok(Self { n_rows, n_cols, entries, row_ids, col_ids })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.entries[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[u64] {
        &self.col_ids
    }

    /// Recomputed from the entries on every call.
    pub fn stats(&self) -> SignStats {
        let total = self.entries.len().max(1) as f64;
        let positive = self.entries.iter().filter(|&&v| v == 1).count() as f64;
        let negative = self.entries.iter().filter(|&&v| v == -1).count() as f64;
        SignStats { positive: positive / total, negative: negative / total }
    }

    /// Sum of row `row`.
    pub fn row_sum(&self, row: usize) -> i64 {
        self.row(row).iter().map(|&v| v as i64).sum()
    }
}
