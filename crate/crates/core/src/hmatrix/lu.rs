//! H-LU factorisation `A = 𝓛 𝓤` of a square H-block with block-triangular
//! solves. Dense diagonal leaves use partial pivoting, so their lower factor
//! is `Pᵀ L`.

use faer::prelude::{Reborrow, ReborrowMut};
use faer::{Mat, MatMut};

use super::arith::{assign_dense, mul_add};
use super::matrix::{HKind, HNode};
use crate::error::{AmlsError, Result};

pub enum LuNode {
    Leaf {
        /// Unit lower factor.
        l: Mat<f64>,
        u: Mat<f64>,
        /// `(P x)[i] = x[perm[i]]` with `P A = L U`.
        perm: Vec<usize>,
    },
    Inner {
        d0: Box<LuNode>,
        d1: Box<LuNode>,
        /// `𝓛00⁻¹ A01`.
        u01: HNode,
        /// `A10 𝓤00⁻¹`.
        l10: HNode,
    },
}

impl std::fmt::Debug for LuNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuNode").field("dim", &self.dim()).finish_non_exhaustive()
    }
}

impl LuNode {
    pub fn dim(&self) -> usize {
        match self {
            LuNode::Leaf { u, .. } => u.nrows(),
            LuNode::Inner { d0, d1, .. } => d0.dim() + d1.dim(),
        }
    }

    fn lead(&self) -> usize {
        match self {
            LuNode::Leaf { u, .. } => u.nrows(),
            LuNode::Inner { d0, .. } => d0.dim(),
        }
    }
}

/// Factorises the square block `a` in formatted arithmetic.
pub fn h_lu(a: &HNode, eps: f64) -> Result<LuNode> {
    if a.nrows != a.ncols {
        return Err(AmlsError::StructureMismatch(format!(
            "LU of a {}x{} block",
            a.nrows, a.ncols
        )));
    }
    match &a.kind {
        HKind::Inner(s) if s[0].nrows == s[0].ncols => {
            let d0 = h_lu(&s[0], eps)?;
            let mut u01 = s[1].clone();
            solve_lower(&d0, &mut u01, eps)?;
            let mut l10 = s[2].clone();
            solve_right_upper(&d0, &mut l10, eps)?;
            let mut a11 = s[3].clone();
            mul_add(&mut a11, -1.0, &l10, &u01, eps)?;
            let d1 = h_lu(&a11, eps)?;
            Ok(LuNode::Inner {
                d0: Box::new(d0),
                d1: Box::new(d1),
                u01,
                l10,
            })
        }
        _ => dense_leaf(a.to_dense()),
    }
}

fn dense_leaf(a: Mat<f64>) -> Result<LuNode> {
    let n = a.nrows();
    let scale = a.norm_max();
    let lu = a.partial_piv_lu();
    let u = lu.U().to_owned();
    let tiny = f64::EPSILON * n as f64 * scale;
    for i in 0..n {
        if !(u[(i, i)].abs() > tiny) {
            return Err(AmlsError::SingularBlock(format!("zero pivot {i} in a dense leaf of size {n}")));
        }
    }
    Ok(LuNode::Leaf {
        l: lu.L().to_owned(),
        u,
        perm: lu.P().arrays().0.to_vec(),
    })
}

fn permute_rows(perm: &[usize], mut x: MatMut<'_, f64>) {
    let src = x.to_owned();
    for (i, &p) in perm.iter().enumerate() {
        x.rb_mut().row_mut(i).copy_from(src.row(p));
    }
}

/// `x ← 𝓛⁻¹ x`.
pub fn lower_solve_dense(d: &LuNode, mut x: MatMut<'_, f64>) {
    match d {
        LuNode::Leaf { l, perm, .. } => {
            permute_rows(perm, x.rb_mut());
            l.solve_unit_lower_triangular_in_place(x);
        }
        LuNode::Inner { d0, d1, l10, .. } => {
            let (n0, k) = (d0.dim(), x.ncols());
            let (mut x0, mut x1) = x.split_at_row_mut(n0);
            lower_solve_dense(d0, x0.rb_mut());
            l10.apply_add(-1.0, x0.rb(), x1.rb_mut());
            debug_assert_eq!(x1.ncols(), k);
            lower_solve_dense(d1, x1);
        }
    }
}

/// `x ← 𝓤⁻¹ x`.
pub fn upper_solve_dense(d: &LuNode, mut x: MatMut<'_, f64>) {
    match d {
        LuNode::Leaf { u, .. } => u.solve_upper_triangular_in_place(x),
        LuNode::Inner { d0, d1, u01, .. } => {
            let (mut x0, mut x1) = x.rb_mut().split_at_row_mut(d0.dim());
            upper_solve_dense(d1, x1.rb_mut());
            u01.apply_add(-1.0, x1.rb(), x0.rb_mut());
            upper_solve_dense(d0, x0);
        }
    }
}

/// `x ← 𝓤⁻ᵀ x`.
pub fn upper_transpose_solve_dense(d: &LuNode, mut x: MatMut<'_, f64>) {
    match d {
        LuNode::Leaf { u, .. } => u.transpose().solve_lower_triangular_in_place(x),
        LuNode::Inner { d0, d1, u01, .. } => {
            let (mut x0, mut x1) = x.rb_mut().split_at_row_mut(d0.dim());
            upper_transpose_solve_dense(d0, x0.rb_mut());
            u01.apply_transpose_add(-1.0, x0.rb(), x1.rb_mut());
            upper_transpose_solve_dense(d1, x1);
        }
    }
}

/// `x ← 𝓛⁻ᵀ x`.
pub fn lower_transpose_solve_dense(d: &LuNode, mut x: MatMut<'_, f64>) {
    match d {
        LuNode::Leaf { l, perm, .. } => {
            l.transpose().solve_unit_upper_triangular_in_place(x.rb_mut());
            // x ← Pᵀ x
            let src = x.to_owned();
            for (i, &p) in perm.iter().enumerate() {
                x.rb_mut().row_mut(p).copy_from(src.row(i));
            }
        }
        LuNode::Inner { d0, d1, l10, .. } => {
            let (mut x0, mut x1) = x.rb_mut().split_at_row_mut(d0.dim());
            lower_transpose_solve_dense(d1, x1.rb_mut());
            l10.apply_transpose_add(-1.0, x1.rb(), x0.rb_mut());
            lower_transpose_solve_dense(d0, x0);
        }
    }
}

fn check_rows(d: &LuNode, b: &HNode) -> Result<()> {
    if d.dim() != b.nrows {
        return Err(AmlsError::StructureMismatch(format!(
            "factor of size {} against a block with {} rows",
            d.dim(),
            b.nrows
        )));
    }
    Ok(())
}

fn check_cols(d: &LuNode, b: &HNode) -> Result<()> {
    if d.dim() != b.ncols {
        return Err(AmlsError::StructureMismatch(format!(
            "factor of size {} against a block with {} columns",
            d.dim(),
            b.ncols
        )));
    }
    Ok(())
}

/// `b ← 𝓛⁻¹ b`.
pub fn solve_lower(d: &LuNode, b: &mut HNode, eps: f64) -> Result<()> {
    check_rows(d, b)?;
    match (&mut b.kind, d) {
        (HKind::LowRank(r), _) => lower_solve_dense(d, r.a.as_mut()),
        (HKind::Full(f), _) => lower_solve_dense(d, f.as_mut()),
        (HKind::Inner(s), LuNode::Inner { d0, d1, l10, .. }) if s[0].nrows == d.lead() => {
            let [b00, b01, b10, b11] = &mut **s;
            for (top, bottom) in [(b00, b10), (b01, b11)] {
                solve_lower(d0, top, eps)?;
                mul_add(bottom, -1.0, l10, top, eps)?;
                solve_lower(d1, bottom, eps)?;
            }
        }
        _ => {
            let mut x = b.to_dense();
            lower_solve_dense(d, x.as_mut());
            assign_dense(b, x.as_ref(), eps)?;
        }
    }
    Ok(())
}

/// `b ← 𝓤⁻¹ b`.
pub fn solve_upper(d: &LuNode, b: &mut HNode, eps: f64) -> Result<()> {
    check_rows(d, b)?;
    match (&mut b.kind, d) {
        (HKind::LowRank(r), _) => upper_solve_dense(d, r.a.as_mut()),
        (HKind::Full(f), _) => upper_solve_dense(d, f.as_mut()),
        (HKind::Inner(s), LuNode::Inner { d0, d1, u01, .. }) if s[0].nrows == d.lead() => {
            let [b00, b01, b10, b11] = &mut **s;
            for (top, bottom) in [(b00, b10), (b01, b11)] {
                solve_upper(d1, bottom, eps)?;
                mul_add(top, -1.0, u01, bottom, eps)?;
                solve_upper(d0, top, eps)?;
            }
        }
        _ => {
            let mut x = b.to_dense();
            upper_solve_dense(d, x.as_mut());
            assign_dense(b, x.as_ref(), eps)?;
        }
    }
    Ok(())
}

/// `b ← b 𝓤⁻¹`.
pub fn solve_right_upper(d: &LuNode, b: &mut HNode, eps: f64) -> Result<()> {
    check_cols(d, b)?;
    match (&mut b.kind, d) {
        (HKind::LowRank(r), _) => upper_transpose_solve_dense(d, r.b.as_mut()),
        (HKind::Full(f), _) => {
            let mut t = f.transpose().to_owned();
            upper_transpose_solve_dense(d, t.as_mut());
            *f = t.transpose().to_owned();
        }
        (HKind::Inner(s), LuNode::Inner { d0, d1, u01, .. }) if s[0].ncols == d.lead() => {
            let [b00, b01, b10, b11] = &mut **s;
            for (left, right) in [(b00, b01), (b10, b11)] {
                solve_right_upper(d0, left, eps)?;
                mul_add(right, -1.0, left, u01, eps)?;
                solve_right_upper(d1, right, eps)?;
            }
        }
        _ => {
            let mut t = b.to_dense().transpose().to_owned();
            upper_transpose_solve_dense(d, t.as_mut());
            assign_dense(b, t.transpose(), eps)?;
        }
    }
    Ok(())
}

/// `x ← A⁻¹ x` for the factorised `A`.
pub fn lu_solve_dense(d: &LuNode, mut x: MatMut<'_, f64>) {
    lower_solve_dense(d, x.rb_mut());
    upper_solve_dense(d, x);
}
