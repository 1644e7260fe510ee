use serde::Serialize;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn diam(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn dist(&self, other: &Interval) -> f64 {
        (other.lo - self.hi).max(self.lo - other.hi).max(0.0)
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn hull(self, other: Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterNode {
    /// First position of the cluster in the reordered index set.
    pub start: usize,
    pub len: usize,
    /// Interval produced by the geometric bisection.
    pub bisection: Interval,
    /// Hull of the supports of the cluster's basis functions.
    pub support: Interval,
    pub sons: Option<[usize; 2]>,
    pub depth: usize,
}

impl ClusterNode {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }

    pub fn is_leaf(&self) -> bool {
        self.sons.is_none()
    }
}

/// Binary cluster tree from recursive geometric bisection.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterTree {
    pub nodes: Vec<ClusterNode>,
    /// `perm[p]` is the original index at reordered position `p`.
    pub perm: Vec<usize>,
    /// `inv_perm[i]` is the reordered position of original index `i`.
    pub inv_perm: Vec<usize>,
    pub n_min: usize,
}

// a bisection that leaves one side empty is retried on the occupied half
const MAX_EMPTY_SPLITS: usize = 64;

impl ClusterTree {
    pub const ROOT: usize = 0;

    /// Builds the tree over basis functions with nodal points `points` and
    /// supports `supports`. Clusters of at most `n_min` indices are leaves.
    pub fn build(points: &[f64], supports: &[Interval], n_min: usize) -> Self {
        assert_eq!(points.len(), supports.len());
        assert!(!points.is_empty(), "cannot cluster an empty index set");
        let n_min = n_min.max(1);
        let hull = supports
            .iter()
            .copied()
            .reduce(Interval::hull)
            .expect("non-empty");
        let mut tree = ClusterTree {
            nodes: Vec::new(),
            perm: Vec::with_capacity(points.len()),
            inv_perm: vec![0; points.len()],
            n_min,
        };
        let idx: Vec<usize> = (0..points.len()).collect();
        tree.grow(points, supports, idx, hull, 0);
        for (p, &i) in tree.perm.iter().enumerate() {
            tree.inv_perm[i] = p;
        }
        tree
    }

    /// Point clusters with zero-width supports.
    pub fn from_points(points: &[f64], n_min: usize) -> Self {
        let supports: Vec<Interval> = points.iter().map(|&x| Interval::point(x)).collect();
        Self::build(points, &supports, n_min)
    }

    /// Clusters the cells of an equispaced grid.
    pub fn from_grid(grid: &crate::mesh::Grid1D, n_min: usize) -> Self {
        let supports: Vec<Interval> = grid
            .cells()
            .into_iter()
            .map(|(a, b)| Interval::new(a, b))
            .collect();
        Self::build(&grid.nodal_points, &supports, n_min)
    }

    fn grow(
        &mut self,
        points: &[f64],
        supports: &[Interval],
        idx: Vec<usize>,
        mut bisection: Interval,
        depth: usize,
    ) -> usize {
        let id = self.nodes.len();
        let support = idx
            .iter()
            .map(|&i| supports[i])
            .reduce(Interval::hull)
            .expect("clusters are never empty");
        self.nodes.push(ClusterNode {
            start: self.perm.len(),
            len: idx.len(),
            bisection,
            support,
            sons: None,
            depth,
        });
        if idx.len() <= self.n_min {
            self.perm.extend_from_slice(&idx);
            return id;
        }

        let mut halves = None;
        for _ in 0..MAX_EMPTY_SPLITS {
            let mid = bisection.mid();
            let (left, right): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| points[i] < mid);
            if left.is_empty() {
                bisection = Interval::new(mid, bisection.hi);
            } else if right.is_empty() {
                bisection = Interval::new(bisection.lo, mid);
            } else {
                halves = Some((left, right, mid));
                break;
            }
        }
        let Some((left, right, mid)) = halves else {
            // coincident points cannot be separated
            self.perm.extend_from_slice(&idx);
            return id;
        };
        self.nodes[id].bisection = bisection;
        let l = self.grow(points, supports, left, Interval::new(bisection.lo, mid), depth + 1);
        let r = self.grow(points, supports, right, Interval::new(mid, bisection.hi), depth + 1);
        self.nodes[id].sons = Some([l, r]);
        id
    }

    pub fn node(&self, id: usize) -> &ClusterNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> &ClusterNode {
        &self.nodes[Self::ROOT]
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &ClusterNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_grid;

    #[test]
    fn power_of_two_points() {
        let pts: Vec<f64> = (0..8).map(|i| i as f64 + 0.5).collect();
        let t = ClusterTree::from_points(&pts, 2);
        assert_eq!(t.depth(), 2);
        assert!(t.leaves().all(|l| l.len == 2));
        assert_eq!(t.leaves().count(), 4);
        assert_eq!(t.perm, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn large_leaf_size_gives_single_root() {
        let pts = [0.3, 0.1, 0.2];
        let t = ClusterTree::from_points(&pts, 3);
        assert_eq!(t.nodes.len(), 1);
        assert!(t.root().is_leaf());
    }

    #[test]
    fn root_split_matches_midpoint_partition() {
        let g = build_grid(0.0, 1.0, 200).unwrap();
        let t = ClusterTree::from_grid(&g, 32);
        let [l, r] = t.root().sons.unwrap();
        assert_eq!((t.node(l).len, t.node(r).len), (100, 100));
        assert_eq!(t.node(l).bisection.hi, 0.5);
    }

    #[test]
    fn permutation_sorts_by_position() {
        let pts = [0.9, 0.1, 0.5, 0.3, 0.7, 0.2];
        let t = ClusterTree::from_points(&pts, 1);
        let sorted: Vec<f64> = t.perm.iter().map(|&i| pts[i]).collect();
        assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
        for (p, &i) in t.perm.iter().enumerate() {
            assert_eq!(t.inv_perm[i], p);
        }
    }

    #[test]
    fn sons_partition_parent() {
        let g = build_grid(0.0, 1.0, 37).unwrap();
        let t = ClusterTree::from_grid(&g, 4);
        for n in &t.nodes {
            if let Some([a, b]) = n.sons {
                let (a, b) = (t.node(a), t.node(b));
                assert_eq!(a.start, n.start);
                assert_eq!(b.start, a.start + a.len);
                assert_eq!(a.len + b.len, n.len);
                assert_eq!(a.bisection.hi, b.bisection.lo);
            } else {
                assert!(n.len <= 4);
            }
        }
    }

    #[test]
    fn coincident_points_form_a_leaf() {
        let t = ClusterTree::from_points(&[1.0; 5], 2);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.root().len, 5);
    }

    #[test]
    fn interval_metrics() {
        let a = Interval::new(0.0, 0.25);
        let b = Interval::new(0.75, 1.0);
        assert_eq!(a.dist(&b), 0.5);
        assert_eq!(b.dist(&a), 0.5);
        assert_eq!(a.dist(&Interval::new(0.25, 0.5)), 0.0);
    }
}
