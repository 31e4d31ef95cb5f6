//! Minimal column-major matrix used for inbag counts, per-tree predictions,
//! and feature storage. Column-major fits the access patterns here: trees
//! fill one column each, and the estimators sweep tree columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    /// Length `rows * cols`, column-major.
    data: Vec<T>,
}

impl<T: Clone> Mat<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Mat {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }
}

impl<T: Clone + Default> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::default())
    }
}

impl<T> Mat<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Input(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        debug_assert!(row < self.rows && col < self.cols);
        &self.data[col * self.rows + row]
    }

    #[inline]
    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut T {
        debug_assert!(row < self.rows && col < self.cols);
        &mut self.data[col * self.rows + row]
    }

    /// Contiguous slice holding one column.
    #[inline]
    pub fn col(&self, col: usize) -> &[T] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, col: usize) -> &mut [T] {
        &mut self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
}

impl<T: Copy> Mat<T> {
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> T {
        *self.get(row, col)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_major_layout() {
        let m = Mat::from_vec(2, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(m.at(0, 0), 1);
        assert_eq!(m.at(1, 0), 2);
        assert_eq!(m.at(0, 1), 3);
        assert_eq!(m.col(2), &[5, 6]);
    }

    #[test]
    fn rejects_bad_length() {
        assert!(Mat::from_vec(2, 3, vec![0u32; 5]).is_err());
    }
}
