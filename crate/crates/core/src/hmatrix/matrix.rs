use std::sync::Arc;

use faer::prelude::ReborrowMut;
use faer::{Mat, MatMut, MatRef};
use rayon::prelude::*;
use serde::Serialize;

use super::block::{is_admissible, BlockClusterTree, BlockKind};
use super::cluster::ClusterTree;
use super::rk::{rk_truncate, RkMatrix};
use crate::error::{AmlsError, Result};

#[derive(Debug, Clone)]
pub enum HKind {
    Full(Mat<f64>),
    LowRank(RkMatrix),
    /// Sons `(0,0), (0,1), (1,0), (1,1)`.
    Inner(Box<[HNode; 4]>),
}

/// A block of an H-matrix. `row` and `col` are cluster ids; all index
/// arithmetic is local to the block.
#[derive(Debug, Clone)]
pub struct HNode {
    pub row: usize,
    pub col: usize,
    pub nrows: usize,
    pub ncols: usize,
    pub kind: HKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafKind {
    Full,
    LowRank,
}

/// A leaf block in local coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LeafInfo {
    pub row_offset: usize,
    pub col_offset: usize,
    pub nrows: usize,
    pub ncols: usize,
    pub row_cluster: usize,
    pub col_cluster: usize,
    pub kind: LeafKind,
    pub rank: usize,
}

impl HNode {
    /// Zero matrix with the block structure below `(s, t)`.
    pub fn zeros(row: &ClusterTree, s: usize, col: &ClusterTree, t: usize, eta: f64) -> HNode {
        let (rs, ct) = (row.node(s), col.node(t));
        let n_min = row.n_min.max(col.n_min);
        let kind = if is_admissible(row, s, col, t, eta) {
            HKind::LowRank(RkMatrix::zero(rs.len, ct.len))
        } else if rs.len.min(ct.len) <= n_min || rs.sons.is_none() || ct.sons.is_none() {
            HKind::Full(Mat::zeros(rs.len, ct.len))
        } else {
            let [s0, s1] = rs.sons.expect("inner");
            let [t0, t1] = ct.sons.expect("inner");
            HKind::Inner(Box::new([
                HNode::zeros(row, s0, col, t0, eta),
                HNode::zeros(row, s0, col, t1, eta),
                HNode::zeros(row, s1, col, t0, eta),
                HNode::zeros(row, s1, col, t1, eta),
            ]))
        };
        HNode {
            row: s,
            col: t,
            nrows: rs.len,
            ncols: ct.len,
            kind,
        }
    }

    /// Row count of the leading son row (`n0`) and column count of the
    /// leading son column (`m0`).
    pub(crate) fn split(&self) -> (usize, usize) {
        match &self.kind {
            HKind::Inner(s) => (s[0].nrows, s[0].ncols),
            _ => (self.nrows, self.ncols),
        }
    }

    pub fn is_leaf(&self) -> bool {
        !matches!(self.kind, HKind::Inner(_))
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut out = Mat::zeros(self.nrows, self.ncols);
        self.write_dense(out.as_mut());
        out
    }

    fn write_dense(&self, mut out: MatMut<'_, f64>) {
        match &self.kind {
            HKind::Full(f) => out.copy_from(f),
            HKind::LowRank(r) => out.copy_from(r.to_dense()),
            HKind::Inner(sons) => {
                let (n0, m0) = self.split();
                let (n1, m1) = (self.nrows - n0, self.ncols - m0);
                sons[0].write_dense(out.rb_mut().submatrix_mut(0, 0, n0, m0));
                sons[1].write_dense(out.rb_mut().submatrix_mut(0, m0, n0, m1));
                sons[2].write_dense(out.rb_mut().submatrix_mut(n0, 0, n1, m0));
                sons[3].write_dense(out.rb_mut().submatrix_mut(n0, m0, n1, m1));
            }
        }
    }

    /// `y += alpha * self * x`.
    pub fn apply_add(&self, alpha: f64, x: MatRef<'_, f64>, mut y: MatMut<'_, f64>) {
        debug_assert_eq!(x.nrows(), self.ncols);
        debug_assert_eq!(y.nrows(), self.nrows);
        match &self.kind {
            HKind::Full(f) => y += faer::Scale(alpha) * (f * x),
            HKind::LowRank(r) => {
                if r.rank() > 0 {
                    let t = r.b.transpose() * x;
                    y += faer::Scale(alpha) * (&r.a * t);
                }
            }
            HKind::Inner(sons) => {
                let (n0, m0) = self.split();
                let (n1, m1) = (self.nrows - n0, self.ncols - m0);
                let k = x.ncols();
                let (x0, x1) = (x.submatrix(0, 0, m0, k), x.submatrix(m0, 0, m1, k));
                sons[0].apply_add(alpha, x0, y.rb_mut().submatrix_mut(0, 0, n0, k));
                sons[1].apply_add(alpha, x1, y.rb_mut().submatrix_mut(0, 0, n0, k));
                sons[2].apply_add(alpha, x0, y.rb_mut().submatrix_mut(n0, 0, n1, k));
                sons[3].apply_add(alpha, x1, y.rb_mut().submatrix_mut(n0, 0, n1, k));
            }
        }
    }

    /// `y += alpha * selfᵀ * x`.
    pub fn apply_transpose_add(&self, alpha: f64, x: MatRef<'_, f64>, mut y: MatMut<'_, f64>) {
        debug_assert_eq!(x.nrows(), self.nrows);
        debug_assert_eq!(y.nrows(), self.ncols);
        match &self.kind {
            HKind::Full(f) => y += faer::Scale(alpha) * (f.transpose() * x),
            HKind::LowRank(r) => {
                if r.rank() > 0 {
                    let t = r.a.transpose() * x;
                    y += faer::Scale(alpha) * (&r.b * t);
                }
            }
            HKind::Inner(sons) => {
                let (n0, m0) = self.split();
                let (n1, m1) = (self.nrows - n0, self.ncols - m0);
                let k = x.ncols();
                let (x0, x1) = (x.submatrix(0, 0, n0, k), x.submatrix(n0, 0, n1, k));
                sons[0].apply_transpose_add(alpha, x0, y.rb_mut().submatrix_mut(0, 0, m0, k));
                sons[2].apply_transpose_add(alpha, x1, y.rb_mut().submatrix_mut(0, 0, m0, k));
                sons[1].apply_transpose_add(alpha, x0, y.rb_mut().submatrix_mut(m0, 0, m1, k));
                sons[3].apply_transpose_add(alpha, x1, y.rb_mut().submatrix_mut(m0, 0, m1, k));
            }
        }
    }

    pub fn apply(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        let mut y = Mat::zeros(self.nrows, x.ncols());
        self.apply_add(1.0, x, y.as_mut());
        y
    }

    pub fn apply_transpose(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        let mut y = Mat::zeros(self.ncols, x.ncols());
        self.apply_transpose_add(1.0, x, y.as_mut());
        y
    }

    pub fn transpose(&self) -> HNode {
        let kind = match &self.kind {
            HKind::Full(f) => HKind::Full(f.transpose().to_owned()),
            HKind::LowRank(r) => HKind::LowRank(r.transpose()),
            HKind::Inner(s) => HKind::Inner(Box::new([
                s[0].transpose(),
                s[2].transpose(),
                s[1].transpose(),
                s[3].transpose(),
            ])),
        };
        HNode {
            row: self.col,
            col: self.row,
            nrows: self.ncols,
            ncols: self.nrows,
            kind,
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        match &mut self.kind {
            HKind::Full(f) => *f *= faer::Scale(alpha),
            HKind::LowRank(r) => r.scale(alpha),
            HKind::Inner(s) => s.iter_mut().for_each(|c| c.scale(alpha)),
        }
    }

    /// Leaves in depth-first order, offsets relative to this block.
    pub fn leaves(&self) -> Vec<LeafInfo> {
        let mut out = Vec::new();
        self.collect_leaves(0, 0, &mut out);
        out
    }

    fn collect_leaves(&self, r0: usize, c0: usize, out: &mut Vec<LeafInfo>) {
        let (kind, rank) = match &self.kind {
            HKind::Full(_) => (LeafKind::Full, self.nrows.min(self.ncols)),
            HKind::LowRank(r) => (LeafKind::LowRank, r.rank()),
            HKind::Inner(s) => {
                let (n0, m0) = self.split();
                s[0].collect_leaves(r0, c0, out);
                s[1].collect_leaves(r0, c0 + m0, out);
                s[2].collect_leaves(r0 + n0, c0, out);
                s[3].collect_leaves(r0 + n0, c0 + m0, out);
                return;
            }
        };
        out.push(LeafInfo {
            row_offset: r0,
            col_offset: c0,
            nrows: self.nrows,
            ncols: self.ncols,
            row_cluster: self.row,
            col_cluster: self.col,
            kind,
            rank,
        });
    }

    /// Stored reals: `n m` per full leaf, `k (n + m)` per low-rank leaf.
    pub fn storage(&self) -> usize {
        match &self.kind {
            HKind::Full(f) => f.nrows() * f.ncols(),
            HKind::LowRank(r) => r.storage(),
            HKind::Inner(s) => s.iter().map(HNode::storage).sum(),
        }
    }

    pub fn max_rank(&self) -> usize {
        match &self.kind {
            HKind::Full(_) => 0,
            HKind::LowRank(r) => r.rank(),
            HKind::Inner(s) => s.iter().map(HNode::max_rank).max().unwrap_or(0),
        }
    }

    /// Whether both blocks have identical son sizes and leaf kinds.
    pub fn same_structure(&self, other: &HNode) -> bool {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return false;
        }
        match (&self.kind, &other.kind) {
            (HKind::Full(_), HKind::Full(_)) | (HKind::LowRank(_), HKind::LowRank(_)) => true,
            (HKind::Inner(a), HKind::Inner(b)) => a.iter().zip(b.iter()).all(|(x, y)| x.same_structure(y)),
            _ => false,
        }
    }

    pub(crate) fn son(&self, i: usize, j: usize) -> Option<&HNode> {
        match &self.kind {
            HKind::Inner(s) => Some(&s[2 * i + j]),
            _ => None,
        }
    }
}

/// Storage accounting of an H-matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StorageStats {
    /// Stored reals.
    pub bytes_equivalent: usize,
    pub max_rank: usize,
    /// Stored reals over `n m`.
    pub compression_ratio: f64,
    pub full_leaves: usize,
    pub low_rank_leaves: usize,
}

/// H-matrix over a pair of cluster trees. The block `root` spans the
/// clusters `root.row × root.col`; dense views use the cluster ordering.
#[derive(Debug, Clone)]
pub struct HMatrix {
    pub row_tree: Arc<ClusterTree>,
    pub col_tree: Arc<ClusterTree>,
    pub eta: f64,
    pub root: HNode,
}

impl HMatrix {
    /// Builds the H-matrix approximation over `bct`: admissible leaves are
    /// compressed to accuracy `eps`, inadmissible leaves are stored densely.
    /// `entry(i, j)` is evaluated at original (unpermuted) indices.
    pub fn approximate<F>(bct: &BlockClusterTree, eps: f64, entry: F) -> Result<HMatrix>
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        if !(eps > 0.0) {
            return Err(AmlsError::Config(format!("truncation accuracy must be positive, got {eps}")));
        }
        let (rt, ct) = (&*bct.row, &*bct.col);
        let leaves: Vec<usize> = (0..bct.nodes.len())
            .filter(|&id| !matches!(bct.node(id).kind, BlockKind::Inner(_)))
            .collect();
        let built: Vec<Result<(usize, HKind)>> = leaves
            .par_iter()
            .map(|&id| {
                let b = bct.node(id);
                let (rs, cs) = (rt.node(b.row), ct.node(b.col));
                let block = Mat::from_fn(rs.len, cs.len, |i, j| {
                    entry(rt.perm[rs.start + i], ct.perm[cs.start + j])
                });
                let kind = match b.kind {
                    BlockKind::Admissible => HKind::LowRank(rk_truncate(block.as_ref(), eps)?),
                    _ => HKind::Full(block),
                };
                Ok((id, kind))
            })
            .collect();
        let mut slots: Vec<Option<HKind>> = (0..bct.nodes.len()).map(|_| None).collect();
        for r in built {
            let (id, kind) = r?;
            slots[id] = Some(kind);
        }
        let root = assemble(bct, BlockClusterTree::ROOT, &mut slots);
        Ok(HMatrix {
            row_tree: bct.row.clone(),
            col_tree: bct.col.clone(),
            eta: bct.eta,
            root,
        })
    }

    /// Compresses a dense matrix given in the original ordering.
    pub fn from_dense(a: MatRef<'_, f64>, bct: &BlockClusterTree, eps: f64) -> Result<HMatrix> {
        if a.nrows() != bct.row.len() || a.ncols() != bct.col.len() {
            return Err(AmlsError::DimensionMismatch(format!(
                "matrix is {}x{}, block tree covers {}x{}",
                a.nrows(),
                a.ncols(),
                bct.row.len(),
                bct.col.len()
            )));
        }
        Self::approximate(bct, eps, |i, j| a[(i, j)])
    }

    /// Zero H-matrix with the block structure below `(s, t)`.
    pub fn zeros(row_tree: Arc<ClusterTree>, s: usize, col_tree: Arc<ClusterTree>, t: usize, eta: f64) -> HMatrix {
        let root = HNode::zeros(&row_tree, s, &col_tree, t, eta);
        HMatrix {
            row_tree,
            col_tree,
            eta,
            root,
        }
    }

    pub(crate) fn with_root(&self, root: HNode) -> HMatrix {
        HMatrix {
            row_tree: self.row_tree.clone(),
            col_tree: self.col_tree.clone(),
            eta: self.eta,
            root,
        }
    }

    pub fn nrows(&self) -> usize {
        self.root.nrows
    }

    pub fn ncols(&self) -> usize {
        self.root.ncols
    }

    /// Dense matrix in the cluster ordering.
    pub fn to_dense(&self) -> Mat<f64> {
        self.root.to_dense()
    }

    /// Original indices of the rows of this block, in cluster order.
    pub fn row_indices(&self) -> &[usize] {
        &self.row_tree.perm[self.row_tree.node(self.root.row).range()]
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_tree.perm[self.col_tree.node(self.root.col).range()]
    }

    /// Dense matrix in the original ordering. Only defined for blocks over
    /// the full index sets.
    pub fn to_dense_original(&self) -> Mat<f64> {
        assert!(
            self.root.row == ClusterTree::ROOT && self.root.col == ClusterTree::ROOT,
            "original ordering is only defined at the root block"
        );
        let d = self.to_dense();
        let (ri, ci) = (&self.row_tree.inv_perm, &self.col_tree.inv_perm);
        Mat::from_fn(d.nrows(), d.ncols(), |i, j| d[(ri[i], ci[j])])
    }

    /// `H x` with `x` and the result in the cluster ordering.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols(), "vector length");
        let xm = MatRef::from_column_major_slice(x, x.len(), 1);
        let y = self.root.apply(xm);
        y.col(0).iter().copied().collect()
    }

    pub fn transpose(&self) -> HMatrix {
        HMatrix {
            row_tree: self.col_tree.clone(),
            col_tree: self.row_tree.clone(),
            eta: self.eta,
            root: self.root.transpose(),
        }
    }

    /// Son block `(i, j)` sharing this matrix's cluster trees.
    pub fn son(&self, i: usize, j: usize) -> Option<HMatrix> {
        self.root.son(i, j).map(|n| self.with_root(n.clone()))
    }

    pub fn storage_stats(&self) -> StorageStats {
        let leaves = self.root.leaves();
        let stored = self.root.storage();
        let total = self.nrows() * self.ncols();
        StorageStats {
            bytes_equivalent: stored,
            max_rank: self.root.max_rank(),
            compression_ratio: if total == 0 { 0.0 } else { stored as f64 / total as f64 },
            full_leaves: leaves.iter().filter(|l| l.kind == LeafKind::Full).count(),
            low_rank_leaves: leaves.iter().filter(|l| l.kind == LeafKind::LowRank).count(),
        }
    }

    /// Leaf description for external visualisation, with positions in the
    /// cluster ordering of the full trees.
    pub fn dump_json(&self) -> serde_json::Value {
        let r0 = self.row_tree.node(self.root.row).start;
        let c0 = self.col_tree.node(self.root.col).start;
        let blocks: Vec<serde_json::Value> = self
            .root
            .leaves()
            .into_iter()
            .map(|l| {
                serde_json::json!({
                    "row_start": r0 + l.row_offset,
                    "col_start": c0 + l.col_offset,
                    "nrows": l.nrows,
                    "ncols": l.ncols,
                    "admissible": l.kind == LeafKind::LowRank,
                    "rank": l.rank,
                })
            })
            .collect();
        serde_json::json!({
            "nrows": self.nrows(),
            "ncols": self.ncols(),
            "eta": self.eta,
            "stats": self.storage_stats(),
            "blocks": blocks,
        })
    }
}

fn assemble(bct: &BlockClusterTree, id: usize, slots: &mut [Option<HKind>]) -> HNode {
    let b = *bct.node(id);
    let kind = match b.kind {
        BlockKind::Inner(sons) => HKind::Inner(Box::new(sons.map(|c| assemble(bct, c, slots)))),
        _ => slots[id].take().expect("every leaf is built once"),
    };
    HNode {
        row: b.row,
        col: b.col,
        nrows: bct.row.node(b.row).len,
        ncols: bct.col.node(b.col).len,
        kind,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::DiscreteProblem;

    fn log_h(n: usize, eps: f64) -> (DiscreteProblem, HMatrix) {
        let p = DiscreteProblem::log_kernel(n).unwrap();
        let t = Arc::new(ClusterTree::from_grid(&p.grid, 16));
        let bct = BlockClusterTree::build(t.clone(), t, 1.0);
        let h = HMatrix::from_dense(p.k.as_ref(), &bct, eps).unwrap();
        (p, h)
    }

    #[test]
    fn lossless_limit_reproduces_input() {
        let (p, h) = log_h(200, 1e-14);
        let err = (h.to_dense_original() - &p.k).norm_l2() / p.k.norm_l2();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn compressed_log_kernel_is_accurate() {
        let (p, h) = log_h(200, 1e-6);
        let err = (h.to_dense_original() - &p.k).norm_l2() / p.k.norm_l2();
        assert!(err <= 1e-5, "{err}");
        assert!(h.storage_stats().low_rank_leaves > 0);
    }

    #[test]
    fn diagonal_mass_has_rank_zero_off_diagonal() {
        let p = DiscreteProblem::log_kernel(128).unwrap();
        let t = Arc::new(ClusterTree::from_grid(&p.grid, 16));
        let bct = BlockClusterTree::build(t.clone(), t, 1.0);
        let h = HMatrix::from_dense(p.m.as_ref(), &bct, 1e-8).unwrap();
        assert_eq!(h.storage_stats().max_rank, 0);
        assert!((h.to_dense_original() - &p.m).norm_max() == 0.0);
    }

    #[test]
    fn all_full_storage_ratio_is_one() {
        let pts: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let t = Arc::new(ClusterTree::from_points(&pts, 16));
        let bct = BlockClusterTree::build(t.clone(), t, 1.0);
        let h = HMatrix::approximate(&bct, 1e-8, |i, j| (i + j) as f64).unwrap();
        assert_eq!(h.storage_stats().compression_ratio, 1.0);
    }

    #[test]
    fn matvec_identity_and_zero() {
        let pts: Vec<f64> = (0..50).map(|i| i as f64 / 50.0).collect();
        let t = Arc::new(ClusterTree::from_points(&pts, 4));
        let bct = BlockClusterTree::build(t.clone(), t, 1.0);
        let id = HMatrix::approximate(&bct, 1e-8, |i, j| if i == j { 1.0 } else { 0.0 }).unwrap();
        let x: Vec<f64> = (0..50).map(|i| (i as f64).cos()).collect();
        assert_eq!(id.matvec(&x), x);
        let (_, h) = log_h(64, 1e-6);
        assert!(h.matvec(&[0.0; 64]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matvec_matches_densified_matrix() {
        let (_, h) = log_h(256, 1e-6);
        let x: Vec<f64> = (0..256).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let y = h.matvec(&x);
        let d = h.to_dense();
        let xm = MatRef::from_column_major_slice(&x, 256, 1);
        let yd = &d * xm;
        let diff: f64 = (0..256).map(|i| (y[i] - yd[(i, 0)]).powi(2)).sum::<f64>().sqrt();
        assert!(diff <= 1e-13 * yd.norm_l2());
    }

    #[test]
    fn transpose_of_symmetric_matrix_densifies_equal() {
        let (_, h) = log_h(128, 1e-8);
        let d = h.to_dense();
        let dt = h.transpose().to_dense();
        assert!((d.transpose() - &dt).norm_max() == 0.0);
        let x = Mat::from_fn(128, 2, |i, j| (i + j) as f64);
        assert!((h.root.apply_transpose(x.as_ref()) - d.transpose() * &x).norm_max() < 1e-12 * d.norm_max() * 256.0);
    }

    #[test]
    fn leaves_match_block_tree() {
        let p = DiscreteProblem::log_kernel(100).unwrap();
        let t = Arc::new(ClusterTree::from_grid(&p.grid, 8));
        let bct = BlockClusterTree::build(t.clone(), t.clone(), 1.0);
        let h = HMatrix::from_dense(p.k.as_ref(), &bct, 1e-6).unwrap();
        let mut a: Vec<(usize, usize)> = h.root.leaves().iter().map(|l| (l.row_cluster, l.col_cluster)).collect();
        let mut b: Vec<(usize, usize)> = bct.leaves().map(|l| (l.row, l.col)).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
        let zero = HNode::zeros(&t, 0, &t, 0, 1.0);
        assert!(zero.same_structure(&h.root));
    }

    #[test]
    fn dump_lists_every_leaf() {
        let (_, h) = log_h(64, 1e-6);
        let v = h.dump_json();
        assert_eq!(v["blocks"].as_array().unwrap().len(), h.root.leaves().len());
    }
}
