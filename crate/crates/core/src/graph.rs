//! Skeleton topology, spatial partitioning and the normalized adjacency stack.
//!
//! Each joint's 1-hop neighborhood is split into three groups: the joint
//! itself, neighbors closer to the body center, and neighbors at least as far
//! from it. "Closer" is measured in graph hops to a fixed center joint.
//! Matrix rows index the target joint and columns its neighbor, so
//! `raw[k][(i, j)] == 1` iff joint `j` falls in group `k` of joint `i`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Array3, Axis};

use crate::error::{Error, Result};

/// Number of neighbor groups (spatial kernel size).
pub const NUM_GROUPS: usize = 3;

/// Default degree regularizer.
pub const DEFAULT_ALPHA: f64 = 0.001;

/// OpenPose 18-joint layout of the Kinetics skeleton release; joint 1 (neck)
/// is the center.
const KINETICS18_EDGES: [(usize, usize); 17] = [
    (4, 3),
    (3, 2),
    (7, 6),
    (6, 5),
    (13, 12),
    (12, 11),
    (10, 9),
    (9, 8),
    (11, 5),
    (8, 2),
    (5, 1),
    (2, 1),
    (0, 1),
    (15, 0),
    (14, 0),
    (17, 15),
    (16, 14),
];

/// Kinect v2 25-joint layout (1-based as usually published); joint 21
/// (spine at shoulders) is the center.
const NTU25_EDGES_1BASED: [(usize, usize); 24] = [
    (1, 2),
    (2, 21),
    (3, 21),
    (4, 3),
    (5, 21),
    (6, 5),
    (7, 6),
    (8, 7),
    (9, 21),
    (10, 9),
    (11, 10),
    (12, 11),
    (13, 1),
    (14, 13),
    (15, 14),
    (16, 15),
    (17, 1),
    (18, 17),
    (19, 18),
    (20, 19),
    (22, 23),
    (23, 8),
    (24, 25),
    (25, 12),
];

/// Named skeleton layouts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Topology {
    Kinetics18,
    Ntu25,
    /// Path graph `0 - 1 - ... - (n-1)` centered on joint 0.
    Chain(usize),
    /// Edge-list file (see [`Skeleton::from_edge_list`]).
    File(String),
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Kinetics18 => write!(f, "kinetics18"),
            Topology::Ntu25 => write!(f, "ntu25"),
            Topology::Chain(n) => write!(f, "chain{n}"),
            Topology::File(p) => write!(f, "file:{p}"),
        }
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kinetics18" | "kinetics" => Ok(Topology::Kinetics18),
            "ntu25" | "ntu" => Ok(Topology::Ntu25),
            _ => {
                if let Some(path) = s.strip_prefix("file:") {
                    return Ok(Topology::File(path.to_string()));
                }
                s.strip_prefix("chain")
                    .and_then(|n| n.parse().ok())
                    .filter(|&n: &usize| n >= 1)
                    .map(Topology::Chain)
                    .ok_or_else(|| Error::Config(format!("unknown topology `{s}`")))
            }
        }
    }
}

/// Partition group of a neighbor relative to a target joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NeighborGroup {
    /// The joint itself.
    Root = 0,
    /// Strictly closer to the center than the target.
    Centripetal = 1,
    /// As far from the center as the target, or farther.
    Centrifugal = 2,
}

impl NeighborGroup {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone)]
pub struct Skeleton {
    num_joints: usize,
    edges: Vec<(usize, usize)>,
    center: usize,
    hops: Array2<usize>,
}

impl Skeleton {
    /// Validates a connected simple graph and computes all-pairs hop counts.
    pub fn new(num_joints: usize, edges: Vec<(usize, usize)>, center: usize) -> Result<Self> {
        if num_joints == 0 {
            return Err(Error::Graph("a skeleton needs at least one joint".into()));
        }
        if center >= num_joints {
            return Err(Error::Graph(format!(
                "center joint {center} out of range for {num_joints} joints"
            )));
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &edges {
            if a >= num_joints || b >= num_joints {
                return Err(Error::Graph(format!(
                    "edge ({a}, {b}) out of range for {num_joints} joints"
                )));
            }
            if a == b {
                return Err(Error::Graph(format!("self-loop on joint {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Graph(format!("duplicate edge ({a}, {b})")));
            }
        }

        let mut adj = vec![Vec::new(); num_joints];
        for &(a, b) in &edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut hops = Array2::from_elem((num_joints, num_joints), usize::MAX);
        for src in 0..num_joints {
            hops[(src, src)] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(v) = queue.pop_front() {
                let d = hops[(src, v)];
                for &w in &adj[v] {
                    if hops[(src, w)] == usize::MAX {
                        hops[(src, w)] = d + 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        let unreachable: Vec<usize> = (0..num_joints)
            .filter(|&j| hops[(center, j)] == usize::MAX)
            .collect();
        if !unreachable.is_empty() {
            return Err(Error::Disconnected(unreachable));
        }

        Ok(Skeleton {
            num_joints,
            edges,
            center,
            hops,
        })
    }

    pub fn preset(topology: &Topology) -> Result<Self> {
        match topology {
            Topology::Kinetics18 => Skeleton::new(18, KINETICS18_EDGES.to_vec(), 1),
            Topology::Ntu25 => Skeleton::new(
                25,
                NTU25_EDGES_1BASED.iter().map(|&(a, b)| (a - 1, b - 1)).collect(),
                20,
            ),
            Topology::Chain(n) => Skeleton::new(*n, (1..*n).map(|j| (j - 1, j)).collect(), 0),
            Topology::File(path) => Skeleton::load_edge_list(path),
        }
    }

    /// Parses an edge list: first line `N center_joint`, then one `i j` pair
    /// per line. Blank lines and `#` comments are ignored.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let pair = |lineno: usize, line: &str| -> Result<(usize, usize)> {
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Graph(format!("line {lineno}: {e}")))?;
            match nums[..] {
                [a, b] => Ok((a, b)),
                _ => Err(Error::Graph(format!(
                    "line {lineno}: expected two integers, got `{line}`"
                ))),
            }
        };
        let (lineno, header) = lines
            .next()
            .ok_or_else(|| Error::Graph("empty edge list".into()))?;
        let (n, center) = pair(lineno, header)?;
        let edges = lines
            .map(|(i, l)| pair(i, l))
            .collect::<Result<Vec<_>>>()?;
        Skeleton::new(n, edges, center)
    }

    pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Self> {
        Skeleton::from_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{} {}\n", self.num_joints, self.center);
        for (a, b) in &self.edges {
            s.push_str(&format!("{a} {b}\n"));
        }
        s
    }

    pub fn num_joints(&self) -> usize {
        self.num_joints
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn hop_distance(&self) -> &Array2<usize> {
        &self.hops
    }

    pub fn hop(&self, a: usize, b: usize) -> usize {
        self.hops[(a, b)]
    }

    /// 0/1 adjacency of the spatial edges (no self-loops).
    pub fn adjacency(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.num_joints, self.num_joints));
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Group of neighbor `j` relative to target `i`, or `None` if `j` is not
    /// within one hop of `i`.
    pub fn group(&self, i: usize, j: usize) -> Option<NeighborGroup> {
        if i == j {
            Some(NeighborGroup::Root)
        } else if self.hops[(i, j)] != 1 {
            None
        } else if self.hop(j, self.center) < self.hop(i, self.center) {
            Some(NeighborGroup::Centripetal)
        } else {
            Some(NeighborGroup::Centrifugal)
        }
    }

    /// Every `(target, neighbor, group)` triple over 1-hop neighborhoods.
    pub fn partition_neighbors(&self) -> Vec<(usize, usize, NeighborGroup)> {
        let n = self.num_joints;
        (0..n)
            .flat_map(|i| (0..n).filter_map(move |j| self.group(i, j).map(|g| (i, j, g))))
            .collect()
    }
}

/// Stack of per-group adjacency matrices, raw (0/1) and normalized
/// `Λ^{-1/2} Ā Λ^{-1/2}` with `Λ_ii = Σ_j Ā_ij + α`.
#[derive(Debug, Clone)]
pub struct PartitionedAdjacency {
    raw: Array3<f64>,
    normalized: Array3<f64>,
    alpha: f64,
}

impl PartitionedAdjacency {
    pub fn new(skeleton: &Skeleton, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        let n = skeleton.num_joints();
        let mut raw = Array3::zeros((NUM_GROUPS, n, n));
        for (i, j, g) in skeleton.partition_neighbors() {
            raw[(g.index(), i, j)] = 1.0;
        }
        let mut normalized = Array3::zeros((NUM_GROUPS, n, n));
        for k in 0..NUM_GROUPS {
            let inv_sqrt: Vec<f64> = raw
                .index_axis(Axis(0), k)
                .rows()
                .into_iter()
                .map(|row| 1.0 / (row.sum() + alpha).sqrt())
                .collect();
            for i in 0..n {
                for j in 0..n {
                    normalized[(k, i, j)] = inv_sqrt[i] * raw[(k, i, j)] * inv_sqrt[j];
                }
            }
        }
        Ok(PartitionedAdjacency {
            raw,
            normalized,
            alpha,
        })
    }

    pub fn num_joints(&self) -> usize {
        self.raw.shape()[1]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `(K, N, N)` 0/1 group matrices.
    pub fn raw(&self) -> &Array3<f64> {
        &self.raw
    }

    /// `(K, N, N)` normalized matrices.
    pub fn normalized(&self) -> &Array3<f64> {
        &self.normalized
    }

    /// Normalized matrix of group `k`, row-major.
    pub fn group_matrix(&self, k: usize) -> Vec<f64> {
        self.normalized.index_axis(Axis(0), k).iter().copied().collect()
    }
}
