use itertools::Itertools;

use crate::tensor::Matrix;
use crate::{Error, Result};

/// `M_k(A)`: all `k × k` minors of `A`, rows indexed by row subsets and
/// columns by column subsets, both in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct CompoundMatrix {
    pub source_rows: usize,
    pub source_cols: usize,
    pub order: usize,
    pub matrix: Matrix,
}

pub fn compound_matrix(a: &Matrix, k: usize) -> Result<CompoundMatrix> {
    if k == 0 || k > a.nrows().min(a.ncols()) {
        return Err(Error::invalid(format!("compound order {k} for a {}×{} matrix", a.nrows(), a.ncols())));
    }
    let rows: Vec<Vec<usize>> = (0..a.nrows()).combinations(k).collect();
    let cols: Vec<Vec<usize>> = (0..a.ncols()).combinations(k).collect();
    let matrix = Matrix::from_fn(rows.len(), cols.len(), |r, c| {
        Matrix::from_fn(k, k, |i, j| a[(rows[r][i], cols[c][j])]).determinant()
    });
    Ok(CompoundMatrix { source_rows: a.nrows(), source_cols: a.ncols(), order: k, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_three_by_four_example() {
        let (a1, a2, a3) = (0.7, -1.3, 2.1);
        let a = Matrix::from_row_slice(3, 4, &[a1, 1.0, 0.0, 0.0, a2, 0.0, 1.0, 0.0, a3, 0.0, 0.0, 1.0]);
        let m = compound_matrix(&a, 2).unwrap().matrix;
        let expect = Matrix::from_row_slice(
            3,
            6,
            &[-a2, a1, 0.0, 1.0, 0.0, 0.0, -a3, 0.0, a1, 0.0, 1.0, 0.0, 0.0, -a3, a2, 0.0, 0.0, 1.0],
        );
        assert!((m - expect).norm() < 1e-14);
    }

    #[test]
    fn trivial_orders() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(compound_matrix(&a, 1).unwrap().matrix, a);
        let m2 = compound_matrix(&a, 2).unwrap().matrix;
        assert_eq!(m2.shape(), (1, 1));
        assert!((m2[(0, 0)] + 2.0).abs() < 1e-14);
        assert!(compound_matrix(&a, 3).is_err());
    }
}
