//! Formatted H-arithmetic: exact blockwise operations followed by rank
//! truncation at low-rank leaves.

use faer::{Mat, MatRef};

use super::matrix::{HKind, HMatrix, HNode};
use super::rk::{rk_truncate, RkMatrix};
use crate::error::{AmlsError, Result};

/// An update destined for an H-block.
pub(crate) enum Update {
    Dense(Mat<f64>),
    LowRank(RkMatrix),
}

impl Update {
    fn rows(&self, start: usize, len: usize) -> Update {
        match self {
            Update::Dense(d) => Update::Dense(d.submatrix(start, 0, len, d.ncols()).to_owned()),
            Update::LowRank(r) => Update::LowRank(RkMatrix::new(
                r.a.submatrix(start, 0, len, r.rank()).to_owned(),
                r.b.clone(),
            )),
        }
    }

    fn cols(&self, start: usize, len: usize) -> Update {
        match self {
            Update::Dense(d) => Update::Dense(d.submatrix(0, start, d.nrows(), len).to_owned()),
            Update::LowRank(r) => Update::LowRank(RkMatrix::new(
                r.a.clone(),
                r.b.submatrix(start, 0, len, r.rank()).to_owned(),
            )),
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            Update::Dense(d) => d.norm_max() == 0.0,
            Update::LowRank(r) => r.rank() == 0 || r.a.norm_max() == 0.0 || r.b.norm_max() == 0.0,
        }
    }
}

fn check_shape(c: &HNode, rows: usize, cols: usize, what: &str) -> Result<()> {
    if c.nrows != rows || c.ncols != cols {
        return Err(AmlsError::StructureMismatch(format!(
            "{what}: block is {}x{}, operand is {rows}x{cols}",
            c.nrows, c.ncols
        )));
    }
    Ok(())
}

/// `c += u`, truncating low-rank targets to `eps`.
pub(crate) fn add_update(c: &mut HNode, u: Update, eps: f64) -> Result<()> {
    // exact zeros leave the target untouched instead of re-truncating it
    if u.is_zero() {
        return Ok(());
    }
    let (n0, m0) = c.split();
    let (nr, nc) = (c.nrows, c.ncols);
    match &mut c.kind {
        HKind::Full(f) => match u {
            Update::Dense(d) => *f += &d,
            Update::LowRank(r) => {
                if r.rank() > 0 {
                    *f += &r.a * r.b.transpose();
                }
            }
        },
        HKind::LowRank(r) => {
            let add = match u {
                Update::LowRank(x) => x,
                Update::Dense(d) => rk_truncate(d.as_ref(), eps)?,
            };
            *r = r.add(&add, eps)?;
        }
        HKind::Inner(sons) => {
            let (top, bottom) = (u.rows(0, n0), u.rows(n0, nr - n0));
            let [s00, s01, s10, s11] = &mut **sons;
            add_update(s00, top.cols(0, m0), eps)?;
            add_update(s01, top.cols(m0, nc - m0), eps)?;
            add_update(s10, bottom.cols(0, m0), eps)?;
            add_update(s11, bottom.cols(m0, nc - m0), eps)?;
        }
    }
    Ok(())
}

/// Replaces the contents of `c` by the dense matrix `d`.
pub(crate) fn assign_dense(c: &mut HNode, d: MatRef<'_, f64>, eps: f64) -> Result<()> {
    c.scale(0.0);
    clear_ranks(c);
    add_update(c, Update::Dense(d.to_owned()), eps)
}

fn clear_ranks(c: &mut HNode) {
    match &mut c.kind {
        HKind::LowRank(r) => *r = RkMatrix::zero(r.nrows(), r.ncols()),
        HKind::Inner(s) => s.iter_mut().for_each(clear_ranks),
        HKind::Full(_) => {}
    }
}

/// `alpha * a * b` for operands that are not both subdivided.
fn product(alpha: f64, a: &HNode, b: &HNode) -> Update {
    match (&a.kind, &b.kind) {
        (HKind::LowRank(r), _) => {
            let mut p = RkMatrix::new(r.a.clone(), b.apply_transpose(r.b.as_ref()));
            p.scale(alpha);
            Update::LowRank(p)
        }
        (_, HKind::LowRank(r)) => {
            let mut p = RkMatrix::new(a.apply(r.a.as_ref()), r.b.clone());
            p.scale(alpha);
            Update::LowRank(p)
        }
        (_, HKind::Full(f)) => Update::Dense(faer::Scale(alpha) * a.apply(f.as_ref())),
        (HKind::Full(f), _) => {
            Update::Dense(faer::Scale(alpha) * b.apply_transpose(f.transpose()).transpose())
        }
        _ => Update::Dense(faer::Scale(alpha) * a.apply(b.to_dense().as_ref())),
    }
}

/// `c += alpha * a * b` in formatted arithmetic.
pub fn mul_add(c: &mut HNode, alpha: f64, a: &HNode, b: &HNode, eps: f64) -> Result<()> {
    if a.ncols != b.nrows {
        return Err(AmlsError::StructureMismatch(format!(
            "product of {}x{} and {}x{}",
            a.nrows, a.ncols, b.nrows, b.ncols
        )));
    }
    check_shape(c, a.nrows, b.ncols, "product target")?;
    if let (HKind::Inner(cs), HKind::Inner(as_), HKind::Inner(bs)) = (&mut c.kind, &a.kind, &b.kind) {
        let split_ok = cs[0].nrows == as_[0].nrows && cs[0].ncols == bs[0].ncols && as_[0].ncols == bs[0].nrows;
        if split_ok {
            for i in 0..2 {
                for j in 0..2 {
                    for l in 0..2 {
                        mul_add(&mut cs[2 * i + j], alpha, &as_[2 * i + l], &bs[2 * l + j], eps)?;
                    }
                }
            }
            return Ok(());
        }
    }
    add_update(c, product(alpha, a, b), eps)
}

/// `c += alpha * b` in formatted arithmetic.
pub fn add_node(c: &mut HNode, alpha: f64, b: &HNode, eps: f64) -> Result<()> {
    check_shape(c, b.nrows, b.ncols, "sum")?;
    if let (HKind::Inner(cs), HKind::Inner(bs)) = (&mut c.kind, &b.kind) {
        if cs[0].nrows == bs[0].nrows && cs[0].ncols == bs[0].ncols {
            for (x, y) in cs.iter_mut().zip(bs.iter()) {
                add_node(x, alpha, y, eps)?;
            }
            return Ok(());
        }
    }
    let u = match &b.kind {
        HKind::LowRank(r) => {
            let mut r = r.clone();
            r.scale(alpha);
            Update::LowRank(r)
        }
        _ => Update::Dense(faer::Scale(alpha) * b.to_dense()),
    };
    add_update(c, u, eps)
}

fn check_trees(a: &HMatrix, b: &HMatrix) -> Result<()> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(AmlsError::StructureMismatch(format!(
            "sum of {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// `a + b` with the block structure of `a`.
pub fn h_add(a: &HMatrix, b: &HMatrix, eps: f64) -> Result<HMatrix> {
    check_trees(a, b)?;
    let mut c = a.root.clone();
    add_node(&mut c, 1.0, &b.root, eps)?;
    Ok(a.with_root(c))
}

/// `a b` with the block structure of the block tree over `a`'s rows and
/// `b`'s columns.
pub fn h_multiply(a: &HMatrix, b: &HMatrix, eps: f64) -> Result<HMatrix> {
    if a.ncols() != b.nrows() {
        return Err(AmlsError::StructureMismatch(format!(
            "product of {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let mut c = HMatrix::zeros(a.row_tree.clone(), a.root.row, b.col_tree.clone(), b.root.col, a.eta);
    mul_add(&mut c.root, 1.0, &a.root, &b.root, eps)?;
    Ok(c)
}
