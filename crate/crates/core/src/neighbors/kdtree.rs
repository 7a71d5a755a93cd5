//! Exact k-nearest-neighbour search over encoded rows.
//!
//! Distances are always the squared Euclidean distance computed by
//! [`squared_distance`] on the original row slices, so results coincide bit
//! for bit with an exhaustive scan. Box lower bounds accumulate per-dimension
//! gaps in the same dimension order; since every per-dimension gap is no
//! larger than the corresponding coordinate difference and floating-point
//! addition is monotone, a bound never exceeds the true distance of any point
//! inside the box.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::encoder::{squared_distance, EncodedMatrix};

const LEAF_SIZE: usize = 16;
const NO_CHILD: usize = usize::MAX;

/// A neighbour hit: squared distance and row index in the indexed matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub d2: f64,
    pub index: usize,
}

impl Neighbor {
    /// Total order used everywhere: by distance, then by row index.
    pub fn cmp_key(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_key(other)
    }
}

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    left: usize,
    right: usize,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: EncodedMatrix,
    order: Vec<usize>,
    nodes: Vec<Node>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl KdTree {
    pub fn build(points: EncodedMatrix) -> Self {
        let n = points.n_rows();
        let mut tree = KdTree { points, order: (0..n).collect(), nodes: Vec::new(), lo: Vec::new(), hi: Vec::new() };
        if n > 0 {
            tree.build_node(0, n);
        }
        tree
    }

    pub fn points(&self) -> &EncodedMatrix {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.n_cols()
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let d = self.dim();
        let id = self.nodes.len();
        self.nodes.push(Node { start, end, left: NO_CHILD, right: NO_CHILD });
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &p in &self.order[start..end] {
            for (j, &v) in self.points.row(p).iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let (split, spread) =
            (0..d).map(|j| (j, hi[j] - lo[j])).fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        self.lo.extend_from_slice(&lo);
        self.hi.extend_from_slice(&hi);
        if end - start <= LEAF_SIZE || spread <= 0.0 {
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points.row(a)[split].total_cmp(&points.row(b)[split]).then(a.cmp(&b))
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id].left = left;
        self.nodes[id].right = right;
        id
    }

    fn lower_bound(&self, node: usize, q: &[f64]) -> f64 {
        let d = self.dim();
        let lo = &self.lo[node * d..(node + 1) * d];
        let hi = &self.hi[node * d..(node + 1) * d];
        let mut acc = 0.0;
        for j in 0..d {
            let c = q[j].clamp(lo[j], hi[j]);
            let g = q[j] - c;
            acc += g * g;
        }
        acc
    }

    /// The `k` nearest rows to `q` sorted by `(d2, index)`, optionally
    /// skipping one row by index. Returns fewer than `k` hits only when the
    /// tree holds fewer eligible rows.
    pub fn knn(&self, q: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        debug_assert_eq!(q.len(), self.dim());
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        self.search(0, q, k, exclude, &mut heap);
        let mut out = heap.into_vec();
        out.sort_unstable();
        out
    }

    /// Nearest row to `q`.
    pub fn nearest(&self, q: &[f64]) -> Option<Neighbor> {
        self.knn(q, 1, None).into_iter().next()
    }

    fn search(&self, node: usize, q: &[f64], k: usize, exclude: Option<usize>, heap: &mut BinaryHeap<Neighbor>) {
        let n = &self.nodes[node];
        if n.left == NO_CHILD {
            for &p in &self.order[n.start..n.end] {
                if Some(p) == exclude {
                    continue;
                }
                let cand = Neighbor { d2: squared_distance(q, self.points.row(p)), index: p };
                if heap.len() < k {
                    heap.push(cand);
                } else if cand < *heap.peek().expect("heap is full") {
                    heap.pop();
                    heap.push(cand);
                }
            }
            return;
        }
        let bl = self.lower_bound(n.left, q);
        let br = self.lower_bound(n.right, q);
        let (first, fb, second, sb) = if bl <= br { (n.left, bl, n.right, br) } else { (n.right, br, n.left, bl) };
        for (child, bound) in [(first, fb), (second, sb)] {
            if heap.len() == k && bound > heap.peek().expect("heap is full").d2 {
                continue;
            }
            self.search(child, q, k, exclude, heap);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute(m: &EncodedMatrix, q: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = (0..m.n_rows())
            .filter(|&i| Some(i) != exclude)
            .map(|i| Neighbor { d2: squared_distance(q, m.row(i)), index: i })
            .collect();
        all.sort_by(Neighbor::cmp_key);
        all.truncate(k);
        all
    }

    fn random_matrix(rng: &mut crate::seed::Rng, n: usize, d: usize, grid: bool) -> EncodedMatrix {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| if grid { f64::from(rng.random_range(0..3u8)) / 2.0 } else { rng.random::<f64>() })
                    .collect()
            })
            .collect();
        EncodedMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn matches_brute_force_with_ties() {
        let mut rng = crate::seed::rng(11);
        for trial in 0..40 {
            let n = rng.random_range(1..300);
            let d = rng.random_range(1..8);
            let m = random_matrix(&mut rng, n, d, trial % 2 == 0);
            let tree = KdTree::build(m.clone());
            for i in 0..n.min(25) {
                let k = rng.random_range(1..10);
                assert_eq!(tree.knn(m.row(i), k, Some(i)), brute(&m, m.row(i), k, Some(i)));
                let q: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 1.2 - 0.1).collect();
                assert_eq!(tree.knn(&q, k, None), brute(&m, &q, k, None));
            }
        }
    }

    #[test]
    fn all_identical_points() {
        let m = EncodedMatrix::from_rows(&vec![vec![0.5, 0.5]; 40]).unwrap();
        let tree = KdTree::build(m);
        let hits = tree.knn(&[0.5, 0.5], 3, Some(0));
        assert_eq!(hits.iter().map(|h| h.index).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(hits.iter().all(|h| h.d2 == 0.0));
    }

    #[test]
    fn k_larger_than_population() {
        let m = EncodedMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let tree = KdTree::build(m);
        assert_eq!(tree.knn(&[0.2], 5, Some(0)).len(), 1);
        assert_eq!(tree.nearest(&[0.9]).unwrap().index, 1);
    }
}
