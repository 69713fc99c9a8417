//! Small dense helpers shared by the modules. Everything in scope is at most
//! a few dozen rows, so plain `DMatrix` storage is used throughout.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Largest absolute imaginary part of any entry.
pub fn imag_residue(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
}

/// Real part, failing if any imaginary part exceeds `tol`.
pub fn real_checked(m: &CMat, tol: f64, block: &'static str) -> Result<RMat> {
    let residue = imag_residue(m);
    if residue > tol || !residue.is_finite() {
        return Err(Error::Conversion { block, residue });
    }
    Ok(m.map(|z| z.re))
}

/// Largest singular value.
pub fn norm2(m: &RMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn cnorm2(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn cmax_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn symmetrize(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

/// Builds a block matrix from a grid of blocks. Every block in a block-row
/// must share its row count and every block in a block-column its column
/// count.
pub fn block(rows: &[&[&RMat]], context: &str) -> Result<RMat> {
    let nbr = rows.len();
    if nbr == 0 {
        return Ok(RMat::zeros(0, 0));
    }
    let nbc = rows[0].len();
    let mut heights = vec![0usize; nbr];
    let mut widths = vec![0usize; nbc];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != nbc {
            return Err(Error::dim(context, format!("{nbc} block columns"), row.len()));
        }
        heights[i] = row[0].nrows();
        for (j, b) in row.iter().enumerate() {
            if i == 0 {
                widths[j] = b.ncols();
            }
            if b.nrows() != heights[i] || b.ncols() != widths[j] {
                return Err(Error::dim(
                    format!("{context} block ({},{})", i + 1, j + 1),
                    format!("{}x{}", heights[i], widths[j]),
                    format!("{}x{}", b.nrows(), b.ncols()),
                ));
            }
        }
    }
    let total_r: usize = heights.iter().sum();
    let total_c: usize = widths.iter().sum();
    let mut out = RMat::zeros(total_r, total_c);
    let mut r0 = 0;
    for (i, row) in rows.iter().enumerate() {
        let mut c0 = 0;
        for (j, b) in row.iter().enumerate() {
            out.view_mut((r0, c0), (heights[i], widths[j])).copy_from(*b);
            c0 += widths[j];
        }
        r0 += heights[i];
    }
    Ok(out)
}

pub fn check_square(m: &RMat, context: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::dim(
            context,
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(m.nrows())
}

pub fn check_shape(m: &RMat, rows: usize, cols: usize, context: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::dim(
            context,
            format!("{rows}x{cols}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

pub fn diag2(a: f64, b: f64) -> RMat {
    RMat::from_row_slice(2, 2, &[a, 0.0, 0.0, b])
}

pub fn rotation(theta: f64) -> RMat {
    let (s, c) = theta.sin_cos();
    RMat::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Rows `(j, m + j)` of a matrix in quadrature ordering: the two quadratures
/// of channel `j` out of `m`.
pub fn channel_rows(m: &RMat, j: usize, channels: usize) -> RMat {
    m.select_rows(&[j, channels + j])
}

pub fn channel_cols(m: &RMat, j: usize, channels: usize) -> RMat {
    m.select_columns(&[j, channels + j])
}

pub fn channel_block(m: &RMat, i: usize, j: usize, rows: usize, cols: usize) -> RMat {
    m.select_rows(&[i, rows + i]).select_columns(&[j, cols + j])
}
