//! Row-major multi-index helpers. Party 0 is the slowest index everywhere.

use crate::{CMatrix, C64};

pub fn total(dims: &[usize]) -> usize {
    dims.iter().product()
}

pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

pub fn unravel(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        idx[i] = flat % dims[i];
        flat /= dims[i];
    }
    idx
}

pub fn ravel(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i)
}

/// Reorders the axes of a row-major tensor: axis `j` of the output is axis
/// `order[j]` of the input.
pub fn permute<T: Copy + Default>(data: &[T], dims: &[usize], order: &[usize]) -> (Vec<T>, Vec<usize>) {
    debug_assert_eq!(order.len(), dims.len());
    let new_dims: Vec<usize> = order.iter().map(|&a| dims[a]).collect();
    let old_strides = strides(dims);
    let mut out = vec![T::default(); data.len()];
    let mut idx = vec![0usize; dims.len()];
    for slot in out.iter_mut() {
        let src: usize = idx.iter().zip(order).map(|(&i, &a)| i * old_strides[a]).sum();
        *slot = data[src];
        for j in (0..idx.len()).rev() {
            idx[j] += 1;
            if idx[j] < new_dims[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    (out, new_dims)
}

/// Inverse of an axis order.
pub fn inverse_order(order: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; order.len()];
    for (j, &a) in order.iter().enumerate() {
        inv[a] = j;
    }
    inv
}

/// Axis order putting `front` first (in the given order) and the remaining
/// axes after it in ascending order.
pub fn order_with_front(front: &[usize], k: usize) -> Vec<usize> {
    let mut order = front.to_vec();
    order.extend((0..k).filter(|a| !front.contains(a)));
    order
}

/// Matrix view with the `rows` axes as row index and every other axis
/// (ascending) as column index.
pub fn flatten(data: &[C64], dims: &[usize], rows: &[usize]) -> CMatrix {
    let order = order_with_front(rows, dims.len());
    let (p, _) = permute(data, dims, &order);
    let nr: usize = rows.iter().map(|&a| dims[a]).product();
    let nc = data.len() / nr.max(1);
    CMatrix::from_row_slice(nr, nc, &p)
}

/// Inverse of [`flatten`] for a matrix whose row axes have dims
/// `row_dims` and whose column axes fill the rest of `dims`.
pub fn unflatten(m: &CMatrix, dims: &[usize], rows: &[usize]) -> Vec<C64> {
    let order = order_with_front(rows, dims.len());
    let perm_dims: Vec<usize> = order.iter().map(|&a| dims[a]).collect();
    let mut flat = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            flat.push(m[(r, c)]);
        }
    }
    permute(&flat, &perm_dims, &inverse_order(&order)).0
}

/// Applies `op` (shape `out × dims[axis]`) to one axis of the tensor.
pub fn apply_local(data: &[C64], dims: &[usize], axis: usize, op: &CMatrix) -> (Vec<C64>, Vec<usize>) {
    assert_eq!(op.ncols(), dims[axis], "operator width must match the axis");
    let m = flatten(data, dims, &[axis]);
    let out = op * m;
    let mut new_dims = dims.to_vec();
    new_dims[axis] = op.nrows();
    (unflatten(&out, &new_dims, &[axis]), new_dims)
}
