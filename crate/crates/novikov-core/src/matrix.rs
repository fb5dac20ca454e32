//! Dense matrices of Novikov series with the elimination kernels used by
//! torsion computation, basis changes, and determinant identities.
//!
//! Pivots are chosen by minimal leading grade with a deterministic
//! tie-break, so runs are reproducible; a randomized column order can be
//! injected to check pivot-order independence.

use std::sync::Arc;

use crate::cyclotomic::FieldSummand;
use crate::error::{Error, Result};
use crate::grading::{Grade, GradedGroup};
use crate::series::{NovikovSeries, Trunc};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<NovikovSeries>,
}

impl Mat {
    pub fn zero(group: &Arc<GradedGroup>, coeff_order: u32, rows: usize, cols: usize) -> Self {
        let z = NovikovSeries::zero(group, coeff_order, Trunc::Infinite);
        Mat { rows, cols, data: vec![z; rows * cols] }
    }

    pub fn identity(group: &Arc<GradedGroup>, coeff_order: u32, n: usize) -> Self {
        let mut m = Self::zero(group, coeff_order, n, n);
        for i in 0..n {
            m.set(i, i, NovikovSeries::one(group, coeff_order, Trunc::Infinite));
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<NovikovSeries>>, group: &Arc<GradedGroup>, coeff_order: u32, cols: usize) -> Result<Self> {
        let nrows = rows.len();
        let mut data = Vec::with_capacity(nrows * cols);
        for row in &rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: row.len() });
            }
            data.extend(row.iter().cloned());
        }
        if data.is_empty() {
            return Ok(Self::zero(group, coeff_order, nrows, cols));
        }
        Ok(Mat { rows: nrows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &NovikovSeries {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: NovikovSeries) {
        self.data[r * self.cols + c] = v;
    }

    pub fn map<F: Fn(&NovikovSeries) -> NovikovSeries>(&self, f: F) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn project_summand(&self, summand: &FieldSummand) -> Mat {
        self.map(|e| e.project_summand(summand))
    }

    pub fn truncate_to(&self, bound: &Trunc) -> Mat {
        self.map(|e| e.truncate_to(bound))
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matrix dimensions must agree");
        let proto = self
            .data
            .first()
            .or(other.data.first())
            .expect("degenerate products not used");
        let group = proto.group().clone();
        let order = proto.coeff_order();
        let mut out = Mat::zero(&group, order, self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = NovikovSeries::zero(&group, order, Trunc::Infinite);
                for k in 0..self.cols {
                    acc = acc.add(&self.get(r, k).mul(other.get(k, c)));
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    /// In-place column operation `col_p += factor * col_q`.
    pub fn col_addmul(&mut self, p: usize, q: usize, factor: &NovikovSeries) {
        for r in 0..self.rows {
            let v = self.get(r, p).add(&self.get(r, q).mul(factor));
            self.set(r, p, v);
        }
    }

    /// In-place row operation `row_q += factor * row_p`.
    pub fn row_addmul(&mut self, q: usize, p: usize, factor: &NovikovSeries) {
        for c in 0..self.cols {
            let v = self.get(q, c).add(&self.get(p, c).mul(factor));
            self.set(q, c, v);
        }
    }

    pub fn col_scale(&mut self, p: usize, factor: &NovikovSeries) {
        for r in 0..self.rows {
            let v = self.get(r, p).mul(factor);
            self.set(r, p, v);
        }
    }

    pub fn row_scale(&mut self, p: usize, factor: &NovikovSeries) {
        for c in 0..self.cols {
            let v = self.get(p, c).mul(factor);
            self.set(p, c, v);
        }
    }

    pub fn delete_row_col(&self, del_row: Option<usize>, del_col: Option<usize>) -> Mat {
        let rows: Vec<usize> = (0..self.rows).filter(|&r| Some(r) != del_row).collect();
        let cols: Vec<usize> = (0..self.cols).filter(|&c| Some(c) != del_col).collect();
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &r in &rows {
            for &c in &cols {
                data.push(self.get(r, c).clone());
            }
        }
        Mat { rows: rows.len(), cols: cols.len(), data }
    }

    /// Determinant by elimination at the given window; exact zero matrices
    /// give the zero series, an uncertifiable pivot reports truncation loss.
    pub fn det(&self, window: &Trunc) -> Result<NovikovSeries> {
        assert_eq!(self.rows, self.cols, "determinant of a square matrix");
        let group = self.data[0].group().clone();
        let order = self.data[0].coeff_order();
        if self.rows == 0 {
            return Ok(NovikovSeries::one(&group, order, Trunc::Infinite));
        }
        let active: Vec<usize> = (0..self.rows).collect();
        let col_order: Vec<usize> = (0..self.cols).collect();
        match select_invertible(self, &active, &col_order, window, &group, order)? {
            Some(sel) => Ok(sel.det),
            None => Ok(NovikovSeries::zero(&group, order, window.clone())),
        }
    }

    /// Inverse by Gauss-Jordan elimination; pivots must be invertible
    /// through their leading monomials.
    pub fn inverse(&self, window: &Trunc) -> Result<Mat> {
        assert_eq!(self.rows, self.cols, "inverse of a square matrix");
        let n = self.rows;
        if n == 0 {
            return Ok(self.clone());
        }
        let group = self.data[0].group().clone();
        let order = self.data[0].coeff_order();
        let mut work = self.clone();
        let mut inv = Mat::identity(&group, order, n);
        let mut pivoted_rows: Vec<usize> = Vec::new();
        let mut pivot_of_col: Vec<Option<usize>> = vec![None; n];
        for c in 0..n {
            // Choose the remaining row whose entry in column c has minimal
            // leading grade.
            let mut best: Option<(Grade, usize)> = None;
            for r in 0..n {
                if pivoted_rows.contains(&r) {
                    continue;
                }
                if let Some(v) = work.get(r, c).valuation() {
                    if best.as_ref().is_none_or(|(g, _)| v < *g) {
                        best = Some((v, r));
                    }
                }
            }
            let Some((_, prow)) = best else {
                return Err(Error::NotInvertible);
            };
            let pivot = work.get(prow, c).clone();
            let pivot_inv = pivot
                .invert(window)
                .map_err(|e| match e {
                    Error::LeadingNotMonomial => Error::NotInvertible,
                    other => other,
                })?
                .to_series();
            work.row_scale(prow, &pivot_inv);
            inv.row_scale(prow, &pivot_inv);
            for r in 0..n {
                if r == prow {
                    continue;
                }
                let f = work.get(r, c).neg();
                if !f.is_zero() {
                    work.row_addmul(r, prow, &f);
                    inv.row_addmul(r, prow, &f);
                }
            }
            pivoted_rows.push(prow);
            pivot_of_col[c] = Some(prow);
        }
        // Undo the row permutation.
        let mut out = Mat::zero(&group, order, n, n);
        for c in 0..n {
            let prow = pivot_of_col[c].expect("all columns pivoted");
            for j in 0..n {
                out.set(c, j, inv.get(prow, j).clone());
            }
        }
        Ok(out)
    }
}

/// Outcome of a subbasis selection: chosen columns (paired in selection
/// order with the active rows they consumed), and the determinant of the
/// selected square submatrix in the natural row/column order.
pub struct Selection {
    pub cols: Vec<usize>,
    pub det: NovikovSeries,
}

/// Greedily select `active.len()` columns of `m` (restricted to the active
/// rows, scanning candidates in `col_order`) so that the square submatrix is
/// invertible, eliminating as it goes.
///
/// Returns `Ok(None)` when the submatrix is certifiably rank deficient
/// (exact zeros), an error when a would-be pivot is zero only modulo a
/// finite window, and the selection otherwise. Pivoting follows minimal
/// leading grade, breaking ties by column position then row position.
pub fn select_invertible(
    m: &Mat,
    active: &[usize],
    col_order: &[usize],
    window: &Trunc,
    group: &Arc<GradedGroup>,
    coeff_order: u32,
) -> Result<Option<Selection>> {
    let need = active.len();
    if need == 0 {
        return Ok(Some(Selection {
            cols: vec![],
            det: NovikovSeries::one(group, coeff_order, Trunc::Infinite),
        }));
    }
    let order = coeff_order;
    let mut work = m.clone();
    let mut remaining_rows: Vec<usize> = active.to_vec();
    let mut remaining_cols: Vec<usize> = col_order.to_vec();
    let mut pairs: Vec<(usize, usize)> = Vec::new(); // (row, col) in selection order
    let mut det = NovikovSeries::one(group, order, Trunc::Infinite);
    for _ in 0..need {
        let mut best: Option<(Grade, usize, usize)> = None; // grade, col slot, row slot
        for (cslot, &c) in remaining_cols.iter().enumerate() {
            for (rslot, &r) in remaining_rows.iter().enumerate() {
                if let Some(v) = work.get(r, c).valuation() {
                    let better = match &best {
                        None => true,
                        Some((g, _, _)) => v < *g,
                    };
                    if better {
                        best = Some((v, cslot, rslot));
                    }
                }
            }
        }
        let Some((_, cslot, rslot)) = best else {
            // No nonzero entry left: distinguish exact rank deficiency from
            // truncation blindness.
            for &c in &remaining_cols {
                for &r in &remaining_rows {
                    let e = work.get(r, c);
                    if e.is_zero() {
                        if let Trunc::Finite(g) = e.trunc() {
                            return Err(Error::TruncationTooSmall { available: g.to_string() });
                        }
                    }
                }
            }
            return Ok(None);
        };
        let prow = remaining_rows.remove(rslot);
        let pcol = remaining_cols.remove(cslot);
        let pivot = work.get(prow, pcol).clone();
        det = det.mul(&pivot);
        pairs.push((prow, pcol));
        if !remaining_rows.is_empty() {
            let pivot_inv = pivot.invert(window)?.to_series();
            for &r in &remaining_rows {
                let factor = work.get(r, pcol).mul(&pivot_inv).neg();
                if !factor.is_zero() {
                    work.row_addmul(r, prow, &factor);
                }
            }
        }
    }
    // Determinant sign: parity of the permutations taking the selection
    // order to the natural (sorted) row and column orders.
    let sign = permutation_parity(&pairs.iter().map(|p| p.0).collect::<Vec<_>>())
        * permutation_parity(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    if sign < 0 {
        det = det.neg();
    }
    let mut cols: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    cols.sort_unstable();
    Ok(Some(Selection { cols, det }))
}

fn permutation_parity(seq: &[usize]) -> i32 {
    let mut inversions = 0usize;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}
