use super::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Zeroes all but the `ceil(target_nz * size)` largest-magnitude entries.
/// Equal magnitudes keep the lower row-major index.
pub fn prune_magnitude(dense: &DenseMatrix, target_nz: f64) -> Result<DenseMatrix> {
    let size = dense.rows() * dense.cols();
    if size == 0 {
        return Err(Error::dim("cannot prune an empty matrix"));
    }
    if !(target_nz > 0.0 && target_nz <= 1.0) {
        return Err(Error::param(format!("target density {target_nz} not in (0, 1]")));
    }
    let keep = ((target_nz * size as f64).ceil() as usize).min(size);
    let data = dense.data();
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| data[b].abs().total_cmp(&data[a].abs()).then(a.cmp(&b)));
    let mut out = DenseMatrix::zeros(dense.rows(), dense.cols());
    for &i in &order[..keep] {
        out.data_mut()[i] = data[i];
    }
    Ok(out)
}
