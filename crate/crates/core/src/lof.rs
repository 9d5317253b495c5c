//! Exact k-nearest-neighbor search and Local Outlier Factor scores.
//!
//! LOF follows Breunig et al. (2000): with `k-distance(o)` the distance from
//! `o` to its k-th nearest neighbor,
//!
//! ```text
//! reach_k(p, o) = max(k-distance(o), d(p, o))
//! lrd_k(p)      = 1 / mean_{o ∈ N_k(p)} reach_k(p, o)
//! LOF_k(p)      = mean_{o ∈ N_k(p)} lrd_k(o) / lrd_k(p)
//! ```
//!
//! Neighbors are ordered by squared Euclidean distance with ties broken by
//! the lower index, so the k-d tree and the brute-force search return
//! identical neighborhoods.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::{Error, Result};
#[allow(unused_imports)] // shadowed by the inherent methods when std is linked
use num_traits::Float;

/// Points stored row-major with a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: coords.len() % dim,
            });
        }
        Ok(Points { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(1, |r| r.as_ref().len());
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            coords.extend_from_slice(r);
        }
        Points::new(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LofConfig {
    pub k: usize,
}

impl Default for LofConfig {
    fn default() -> Self {
        LofConfig { k: 100 }
    }
}

/// The `k` nearest other points of every point, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    k: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl Neighborhoods {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    /// Distance to the k-th nearest neighbor.
    pub fn k_distance(&self, i: usize) -> f64 {
        self.distances[(i + 1) * self.k - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn validate(points: &Points, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    if points.len() < k + 1 {
        return Err(Error::TooFewPoints {
            points: points.len(),
            k,
        });
    }
    if let Some(pos) = points.as_flat().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            index: pos / points.dim(),
        });
    }
    Ok(())
}

fn assemble(k: usize, per_point: impl Iterator<Item = Vec<Candidate>>, n: usize) -> Neighborhoods {
    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for cands in per_point {
        for c in cands {
            indices.push(c.index);
            distances.push(c.d2.sqrt());
        }
    }
    Neighborhoods {
        k,
        indices,
        distances,
    }
}

/// Exhaustive O(n²) neighbor search.
pub fn knn_brute_force(points: &Points, k: usize) -> Result<Neighborhoods> {
    validate(points, k)?;
    let n = points.len();
    let per_point = (0..n).map(|i| {
        let p = points.row(i);
        let mut all: Vec<Candidate> = (0..n)
            .filter(|&j| j != i)
            .map(|j| Candidate {
                d2: squared_distance(p, points.row(j)),
                index: j,
            })
            .collect();
        all.select_nth_unstable(k - 1);
        all.truncate(k);
        all.sort_unstable();
        all
    });
    Ok(assemble(k, per_point, n))
}

/// Exact neighbor search; uses a k-d tree for larger inputs.
pub fn knn(points: &Points, k: usize) -> Result<Neighborhoods> {
    validate(points, k)?;
    if points.len() <= 256 {
        return knn_brute_force(points, k);
    }
    let tree = KdTree::build(points);
    let mut heap = BinaryHeap::with_capacity(k + 1);
    let per_point = (0..points.len()).map(|i| {
        tree.nearest(points.row(i), i, k, &mut heap);
        let mut v: Vec<Candidate> = heap.drain().collect();
        v.sort_unstable();
        v
    });
    Ok(assemble(k, per_point, points.len()))
}

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

struct KdTree {
    dim: usize,
    /// Coordinates permuted into tree order.
    coords: Vec<f64>,
    /// Original index of each permuted point.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    fn build(points: &Points) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        Self::build_node(points, &mut order, 0, points.len(), &mut nodes);
        let mut coords = Vec::with_capacity(points.as_flat().len());
        for &i in &order {
            coords.extend_from_slice(points.row(i));
        }
        KdTree {
            dim: points.dim(),
            coords,
            order,
            nodes,
        }
    }

    fn build_node(
        points: &Points,
        order: &mut [usize],
        start: usize,
        end: usize,
        nodes: &mut Vec<Node>,
    ) -> usize {
        let id = nodes.len();
        if end - start <= LEAF_SIZE {
            nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &mut order[start..end];
        let axis = (0..points.dim())
            .max_by(|&a, &b| {
                let spread = |ax: usize| {
                    let (lo, hi) =
                        slice
                            .iter()
                            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                                let v = points.row(i)[ax];
                                (lo.min(v), hi.max(v))
                            });
                    hi - lo
                };
                spread(a).total_cmp(&spread(b))
            })
            .unwrap_or(0);
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            points.row(a)[axis].total_cmp(&points.row(b)[axis])
        });
        let value = points.row(slice[mid])[axis];
        // Left holds coordinates <= value, right holds coordinates >= value.
        nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = Self::build_node(points, order, start, start + mid, nodes);
        let right = Self::build_node(points, order, start + mid, end, nodes);
        nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn nearest(&self, query: &[f64], exclude: usize, k: usize, heap: &mut BinaryHeap<Candidate>) {
        heap.clear();
        self.visit(0, query, exclude, k, heap);
    }

    fn visit(
        &self,
        node: usize,
        query: &[f64],
        exclude: usize,
        k: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let index = self.order[slot];
                    if index == exclude {
                        continue;
                    }
                    let p = &self.coords[slot * self.dim..(slot + 1) * self.dim];
                    let cand = Candidate {
                        d2: squared_distance(query, p),
                        index,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if let Some(mut worst) = heap.peek_mut() {
                        if cand < *worst {
                            *worst = cand;
                        }
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.visit(near, query, exclude, k, heap);
                // Any point beyond the plane is at least |diff| away; equal
                // bounds are still visited so index tie-breaks stay exact.
                if heap.len() < k || diff * diff <= heap.peek().expect("heap is full").d2 {
                    self.visit(far, query, exclude, k, heap);
                }
            }
        }
    }
}

/// One LOF score per point, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct LofScores(pub Vec<f64>);

impl LofScores {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lower bound on the mean reachability distance when forming densities, so
/// points sitting on `k` or more duplicates get a large finite density.
pub const REACH_FLOOR: f64 = 1e-10;

pub fn lof_scores(points: &Points, cfg: LofConfig) -> Result<LofScores> {
    let hoods = knn(points, cfg.k)?;
    Ok(lof_from_neighborhoods(&hoods))
}

/// LOF from precomputed neighborhoods.
///
/// A point whose neighbors all coincide with it scores exactly 1.
pub fn lof_from_neighborhoods(hoods: &Neighborhoods) -> LofScores {
    let n = hoods.len();
    let k = hoods.k() as f64;
    let mean_reach: Vec<f64> = (0..n)
        .map(|i| {
            let sum: f64 = hoods
                .neighbors(i)
                .iter()
                .zip(hoods.distances(i))
                .map(|(&o, &d)| hoods.k_distance(o).max(d))
                .sum();
            sum / k
        })
        .collect();
    let lrd: Vec<f64> = mean_reach
        .iter()
        .map(|&r| 1.0 / r.max(REACH_FLOOR))
        .collect();
    let scores = (0..n)
        .map(|i| {
            if mean_reach[i] == 0.0 {
                return 1.0;
            }
            let neighbor_lrd: f64 = hoods.neighbors(i).iter().map(|&o| lrd[o]).sum();
            (neighbor_lrd / k) / lrd[i]
        })
        .collect();
    LofScores(scores)
}
