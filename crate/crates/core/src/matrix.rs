//! Dense matrices over the rationals.

use std::fmt;

use num_traits::{One, Zero};

use crate::error::Error;
use crate::rational::{format_rational, Rational};

#[derive(Clone, PartialEq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            entries: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.set(i, i, Rational::one());
        }
        m
    }

    /// All-ones matrix J.
    pub fn ones(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            entries: vec![Rational::one(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Rational) -> Self {
        let entries = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        RationalMatrix {
            rows,
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Rational {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Rational) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Rational] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).clone())
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| (0..r).all(|c| self.get(r, c) == self.get(c, r)))
    }

    pub fn scale(&self, s: &Rational) -> Self {
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, Error> {
        self.check_same_shape(other)?;
        Ok(RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, Error> {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn mul(&self, other: &Self) -> Result<Self, Error> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for (t, a) in self.row(r).iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let b = other.get(t, c);
                    if !b.is_zero() {
                        let slot = &mut out.entries[r * other.cols + c];
                        *slot += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Result<Vec<Rational>, Error> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by a vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .filter(|(a, _)| !a.is_zero())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// Exact inverse by Gauss-Jordan elimination; `None` if singular.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a.get(r, col).is_zero())?;
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let p = a.get(col, col).clone();
            a.scale_row(col, &p);
            inv.scale_row(col, &p);
            for r in 0..n {
                if r == col || a.get(r, col).is_zero() {
                    continue;
                }
                let factor = a.get(r, col).clone();
                a.eliminate(r, col, &factor);
                inv.eliminate(r, col, &factor);
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for c in 0..self.cols {
            self.entries.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// row r ← row r / divisor
    fn scale_row(&mut self, r: usize, divisor: &Rational) {
        for v in &mut self.entries[r * self.cols..(r + 1) * self.cols] {
            *v /= divisor;
        }
    }

    /// row r ← row r − factor · row src
    fn eliminate(&mut self, r: usize, src: usize, factor: &Rational) {
        for c in 0..self.cols {
            let s = self.get(src, c);
            if !s.is_zero() {
                let delta = factor * s;
                self.entries[r * self.cols + c] -= delta;
            }
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<(), Error> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RationalMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(format_rational).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn inverse_of_small_matrix() {
        let m = RationalMatrix::from_fn(2, 2, |r, c| [[int(2), int(1)], [int(1), int(1)]][r][c].clone());
        let inv = m.inverse().unwrap();
        assert_eq!(inv.get(0, 0), &int(1));
        assert_eq!(inv.get(0, 1), &int(-1));
        assert_eq!(inv.get(1, 1), &int(2));
        assert_eq!(m.mul(&inv).unwrap(), RationalMatrix::identity(2));
    }

    #[test]
    fn inverse_needs_pivoting() {
        let m = RationalMatrix::from_fn(3, 3, |r, c| {
            [[int(0), int(1), int(0)], [ratio(1, 3), int(0), int(0)], [int(0), int(0), int(5)]][r][c]
                .clone()
        });
        let inv = m.inverse().unwrap();
        assert_eq!(inv.mul(&m).unwrap(), RationalMatrix::identity(3));
        assert_eq!(inv.get(0, 1), &int(3));
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m = RationalMatrix::ones(3, 3);
        assert!(m.inverse().is_none());
    }

    #[test]
    fn shape_errors() {
        let a = RationalMatrix::zeros(2, 3);
        assert!(a.mul(&a).is_err());
        assert!(a.mul_vec(&[int(1)]).is_err());
        assert!(a.add(&RationalMatrix::zeros(3, 2)).is_err());
        assert_eq!(a.transpose().rows(), 3);
    }
}
