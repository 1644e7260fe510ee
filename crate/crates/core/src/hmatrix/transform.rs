//! Block `L D Lᵀ` transformation of an H-matrix pencil at the root 2×2 level.

use faer::{Mat, MatRef};

use super::arith::mul_add;
use super::lu::{h_lu, solve_lower, solve_upper, LuNode};
use super::matrix::{HKind, HMatrix, HNode};
use crate::error::{AmlsError, Result};

/// `K = L diag[K11, K̃22] Lᵀ` where the leading block is root son `lead`.
#[derive(Debug)]
pub struct HBlockLdlt {
    /// Root son index (0 or 1) of the leading block.
    pub lead: usize,
    pub n1: usize,
    pub n2: usize,
    pub k11: HMatrix,
    pub k11_lu: LuNode,
    /// `K11⁻¹ K12`, the transposed coupling, `n1 × n2`.
    pub solved: HMatrix,
    /// `K22 - K21 K11⁻¹ K12` in the structure of `K22`.
    pub schur: HMatrix,
}

impl HBlockLdlt {
    pub fn trail(&self) -> usize {
        1 - self.lead
    }

    /// `K21 K11⁻¹`, `n2 × n1`.
    pub fn coupling(&self) -> HMatrix {
        self.solved.transpose()
    }

    /// `L⁻ᵀ [Z1; Z2]` in leading-then-trailing order: `[Z1 - K11⁻¹ K12 Z2; Z2]`.
    pub fn back_transform(&self, z: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let (n1, n2) = (self.n1, self.n2);
        if z.nrows() != n1 + n2 {
            return Err(AmlsError::DimensionMismatch(format!(
                "Z has {} rows, expected {}",
                z.nrows(),
                n1 + n2
            )));
        }
        let mut out = z.to_owned();
        let z2 = z.submatrix(n1, 0, n2, z.ncols());
        self.solved
            .root
            .apply_add(-1.0, z2, out.as_mut().submatrix_mut(0, 0, n1, z.ncols()));
        Ok(out)
    }
}

fn root_sons(h: &HMatrix) -> Result<&[HNode; 4]> {
    match &h.root.kind {
        HKind::Inner(s) if s[0].nrows == s[0].ncols && s[3].nrows == s[3].ncols => Ok(s),
        _ => Err(AmlsError::Config(
            "the root block must be subdivided into square diagonal blocks".into(),
        )),
    }
}

/// Computes `K11⁻¹ K12` through the H-LU of `K11` and the Schur complement
/// in formatted arithmetic with accuracy `eps`.
pub fn h_block_ldlt(k: &HMatrix, lead: usize, eps: f64) -> Result<HBlockLdlt> {
    assert!(lead < 2, "leading son index is 0 or 1");
    let s = root_sons(k)?;
    let trail = 1 - lead;
    let (k11, k12, k21, k22) = (
        &s[3 * lead],
        &s[2 * lead + trail],
        &s[2 * trail + lead],
        &s[3 * trail],
    );
    let k11_lu = h_lu(k11, eps)?;
    let mut solved = k12.clone();
    solve_lower(&k11_lu, &mut solved, eps)?;
    solve_upper(&k11_lu, &mut solved, eps)?;
    let mut schur = k22.clone();
    mul_add(&mut schur, -1.0, k21, &solved, eps)?;
    if !schur.to_dense().norm_max().is_finite() {
        return Err(AmlsError::SingularBlock("non-finite Schur complement".into()));
    }
    Ok(HBlockLdlt {
        lead,
        n1: k11.nrows,
        n2: k22.nrows,
        k11: k.with_root(k11.clone()),
        k11_lu,
        solved: k.with_root(solved),
        schur: k.with_root(schur),
    })
}

/// `M̃ = L⁻¹ M L⁻ᵀ` blockwise: `M̃11 = M11`, `M̃21 = M21 - G M11`,
/// `M̃22 = M22 - G M12 - M̃21 Gᵀ` with `G = K21 K11⁻¹`. The result keeps the
/// root layout of `m`.
pub fn h_transform_mass(m: &HMatrix, f: &HBlockLdlt, eps: f64) -> Result<HMatrix> {
    let s = root_sons(m)?;
    let (lead, trail) = (f.lead, f.trail());
    if s[3 * lead].nrows != f.n1 || s[3 * trail].nrows != f.n2 {
        return Err(AmlsError::StructureMismatch(format!(
            "mass blocks {}/{} against factor blocks {}/{}",
            s[3 * lead].nrows,
            s[3 * trail].nrows,
            f.n1,
            f.n2
        )));
    }
    let g = f.solved.root.transpose();
    let m11 = &s[3 * lead];
    let m12 = &s[2 * lead + trail];
    let mut m21t = s[2 * trail + lead].clone();
    mul_add(&mut m21t, -1.0, &g, m11, eps)?;
    let mut m22t = s[3 * trail].clone();
    mul_add(&mut m22t, -1.0, &g, m12, eps)?;
    mul_add(&mut m22t, -1.0, &m21t, &f.solved.root, eps)?;

    let mut sons = s.clone();
    sons[2 * lead + trail] = m21t.transpose();
    sons[2 * trail + lead] = m21t;
    sons[3 * trail] = m22t;
    let root = HNode {
        kind: HKind::Inner(Box::new(sons)),
        ..m.root.clone_shell()
    };
    Ok(m.with_root(root))
}

impl HNode {
    fn clone_shell(&self) -> HNode {
        HNode {
            row: self.row,
            col: self.col,
            nrows: self.nrows,
            ncols: self.ncols,
            kind: HKind::Full(Mat::zeros(0, 0)),
        }
    }
}
