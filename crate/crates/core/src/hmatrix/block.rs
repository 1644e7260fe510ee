use std::sync::Arc;

use serde::Serialize;

use super::cluster::ClusterTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Admissible,
    DenseLeaf,
    /// Son blocks in row-major order `(s0,t0), (s0,t1), (s1,t0), (s1,t1)`.
    Inner([usize; 4]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockNode {
    pub row: usize,
    pub col: usize,
    pub kind: BlockKind,
}

/// Block cluster tree over `row × col`.
#[derive(Debug, Clone)]
pub struct BlockClusterTree {
    pub row: Arc<ClusterTree>,
    pub col: Arc<ClusterTree>,
    pub nodes: Vec<BlockNode>,
    pub eta: f64,
}

/// `min{diam(Ω_s), diam(Ω_t)} ≤ η dist(Ω_s, Ω_t)` on the support hulls.
pub fn is_admissible(row: &ClusterTree, s: usize, col: &ClusterTree, t: usize, eta: f64) -> bool {
    let (ds, dt) = (row.node(s).support, col.node(t).support);
    let dist = ds.dist(&dt);
    dist > 0.0 && ds.diam().min(dt.diam()) <= eta * dist
}

impl BlockClusterTree {
    pub const ROOT: usize = 0;

    pub fn build(row: Arc<ClusterTree>, col: Arc<ClusterTree>, eta: f64) -> Self {
        Self::build_at(row, ClusterTree::ROOT, col, ClusterTree::ROOT, eta)
    }

    /// Block tree below the cluster pair `(s, t)`.
    pub fn build_at(row: Arc<ClusterTree>, s: usize, col: Arc<ClusterTree>, t: usize, eta: f64) -> Self {
        let mut bct = Self {
            row,
            col,
            nodes: Vec::new(),
            eta,
        };
        bct.grow(s, t);
        bct
    }

    fn grow(&mut self, s: usize, t: usize) -> usize {
        let id = self.nodes.len();
        let n_min = self.row.n_min.max(self.col.n_min);
        let (rs, ct) = (self.row.node(s), self.col.node(t));
        let kind = if is_admissible(&self.row, s, &self.col, t, self.eta) {
            BlockKind::Admissible
        } else if rs.len.min(ct.len) <= n_min || rs.sons.is_none() || ct.sons.is_none() {
            BlockKind::DenseLeaf
        } else {
            BlockKind::Inner([0; 4])
        };
        self.nodes.push(BlockNode { row: s, col: t, kind });
        if let BlockKind::Inner(_) = kind {
            let [s0, s1] = self.row.node(s).sons.expect("inner row cluster");
            let [t0, t1] = self.col.node(t).sons.expect("inner column cluster");
            let sons = [
                self.grow(s0, t0),
                self.grow(s0, t1),
                self.grow(s1, t0),
                self.grow(s1, t1),
            ];
            self.nodes[id].kind = BlockKind::Inner(sons);
        }
        id
    }

    pub fn node(&self, id: usize) -> &BlockNode {
        &self.nodes[id]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &BlockNode> {
        self.nodes
            .iter()
            .filter(|b| !matches!(b.kind, BlockKind::Inner(_)))
    }
}
