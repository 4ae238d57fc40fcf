//! Reference computations written directly from their definitions, sharing
//! no code with the library beyond `Tensor` storage.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

/// Random connected simple graph on `n` vertices: a random spanning tree plus
/// up to `extra` additional edges.
pub fn random_connected_graph(rng: &mut impl Rng, n: usize, extra: usize) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 1..n {
        let parent = order[rng.random_range(0..i)];
        edges.push((parent, order[i]));
    }
    for _ in 0..extra {
        if n < 2 {
            break;
        }
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let exists = edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a));
        if a != b && !exists {
            edges.push((a, b));
        }
    }
    edges
}

pub fn neighbors(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj
}

pub fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Group (0 self, 1 closer to center, 2 otherwise) of neighbor `j` for
/// target `i`.
pub fn group_of(i: usize, j: usize, to_center: &[usize]) -> usize {
    if i == j {
        0
    } else if to_center[j] < to_center[i] {
        1
    } else {
        2
    }
}

/// Explicit per-joint neighbor sum over `B_i` for a `(C_in, T, N)` input,
/// weights `w[k][c_out][c_in]`. `weighting(k, i, j)` scales each term.
pub fn neighbor_sum(
    x: &[f64],
    (c_in, t, n): (usize, usize, usize),
    w: &[Vec<Vec<f64>>],
    edges: &[(usize, usize)],
    center: usize,
    weighting: impl Fn(usize, usize, usize) -> f64,
) -> Vec<f64> {
    let adj = neighbors(n, edges);
    let to_center = bfs(&adj, center);
    let c_out = w[0].len();
    let mut out = vec![0.0; c_out * t * n];
    for i in 0..n {
        let mut ball = vec![i];
        ball.extend(adj[i].iter().copied());
        for &j in &ball {
            let k = group_of(i, j, &to_center);
            let scale = weighting(k, i, j);
            for co in 0..c_out {
                for ci in 0..c_in {
                    for f in 0..t {
                        out[(co * t + f) * n + i] += w[k][co][ci] * x[(ci * t + f) * n + j] * scale;
                    }
                }
            }
        }
    }
    out
}

/// `Λ_k[i] = |{j ∈ B_i : group(i, j) = k}| + α` for every group and joint.
pub fn group_degrees(n: usize, edges: &[(usize, usize)], center: usize, alpha: f64) -> Vec<Vec<f64>> {
    let adj = neighbors(n, edges);
    let to_center = bfs(&adj, center);
    let mut deg = vec![vec![alpha; n]; 3];
    for i in 0..n {
        deg[0][i] += 1.0;
        for &j in &adj[i] {
            deg[group_of(i, j, &to_center)][i] += 1.0;
        }
    }
    deg
}

/// Neighbor sum with symmetric degree weighting `1/sqrt(Λ_k[i] Λ_k[j])`.
pub fn symmetric_neighbor_sum(
    x: &[f64],
    dims: (usize, usize, usize),
    w: &[Vec<Vec<f64>>],
    edges: &[(usize, usize)],
    center: usize,
    alpha: f64,
) -> Vec<f64> {
    let deg = group_degrees(dims.2, edges, center, alpha);
    neighbor_sum(x, dims, w, edges, center, |k, i, j| 1.0 / (deg[k][i] * deg[k][j]).sqrt())
}

/// Neighbor sum weighted by the inverse cardinality of the target's group.
pub fn cardinality_neighbor_sum(
    x: &[f64],
    dims: (usize, usize, usize),
    w: &[Vec<Vec<f64>>],
    edges: &[(usize, usize)],
    center: usize,
) -> Vec<f64> {
    let deg = group_degrees(dims.2, edges, center, 0.0);
    neighbor_sum(x, dims, w, edges, center, |k, i, _| 1.0 / deg[k][i])
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}
