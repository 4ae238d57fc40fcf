use prgcn_core::graph::{PartitionedAdjacency, Skeleton, DEFAULT_ALPHA, NUM_GROUPS};
use prgcn_core::layers::{GraphConvLayer, ResidualKind};
use prgcn_core::Tensor;
use rand::Rng;

use super::oracles::{cardinality_neighbor_sum, random_connected_graph, symmetric_neighbor_sum};
use super::{rng, uniform};

pub struct EqReport {
    pub skeletons: usize,
    /// Largest elementwise gap between the layer and the symmetric-degree
    /// neighbor sum.
    pub max_gap: f64,
    /// Largest elementwise gap between the layer and the neighbor sum
    /// weighted by inverse group cardinality.
    pub cardinality_gap: f64,
}

/// Compares the graph-conv aggregation (mask all ones) with explicit
/// neighbor sums on `count` random skeletons of at most 6 joints.
pub fn eq_oracle(count: usize, seed: u64) -> EqReport {
    let mut r = rng(seed);
    let mut report = EqReport {
        skeletons: count,
        max_gap: 0.0,
        cardinality_gap: 0.0,
    };
    for _ in 0..count {
        let n = r.random_range(1..=6);
        let extra = r.random_range(0..=2);
        let edges = random_connected_graph(&mut r, n, extra);
        let center = r.random_range(0..n);
        let (c_in, c_out, t) = (r.random_range(1..=3), r.random_range(1..=3), r.random_range(1..=3));

        let skeleton = Skeleton::new(n, edges.clone(), center).unwrap();
        let adj = PartitionedAdjacency::new(&skeleton, DEFAULT_ALPHA).unwrap();
        let mut layer = GraphConvLayer::<f64>::new("g", c_in, c_out, n, ResidualKind::None, &mut r).unwrap();
        let flat = uniform(&mut r, NUM_GROUPS * c_out * c_in, -1.0, 1.0);
        layer.weight_mut().set_data(flat.clone()).unwrap();
        let w: Vec<Vec<Vec<f64>>> = (0..NUM_GROUPS)
            .map(|k| {
                (0..c_out)
                    .map(|o| flat[(k * c_out + o) * c_in..(k * c_out + o + 1) * c_in].to_vec())
                    .collect()
            })
            .collect();

        let x = uniform(&mut r, c_in * t * n, -1.0, 1.0);
        let xt = Tensor::from_vec(x.clone(), &[1, c_in, t, n]).unwrap();
        let got = layer.aggregate(&xt, &adj).unwrap().to_vec();
        let want = symmetric_neighbor_sum(&x, (c_in, t, n), &w, &edges, center, DEFAULT_ALPHA);
        let literal = cardinality_neighbor_sum(&x, (c_in, t, n), &w, &edges, center);
        for ((g, s), l) in got.iter().zip(&want).zip(&literal) {
            report.max_gap = report.max_gap.max((g - s).abs());
            report.cardinality_gap = report.cardinality_gap.max((g - l).abs());
        }
    }
    report
}
