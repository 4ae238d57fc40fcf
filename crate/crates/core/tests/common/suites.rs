//! Finite-difference suites shared by the gradient tests and the acceptance
//! report. Each returns `(case, worst relative error)`.

use prgcn_core::graph::{PartitionedAdjacency, Skeleton, Topology, DEFAULT_ALPHA};
use prgcn_core::layers::{max_pool_time, BatchNorm, GraphConvLayer, PointwiseConv, ResidualKind, TemporalConvLayer};
use prgcn_core::modules::{
    ChannelSemantics, ClassifierHead, FusionBackbone, FusionMode, FusionWidths, PoseRefinement, TemporalAggregation,
};
use prgcn_core::{Mode, ModelConfig, Module, PrGcnModel, Tensor};

use super::{check_leaves, check_module, probe, random_tensor, rng, uniform, worst};

pub fn chain_adjacency(n: usize) -> PartitionedAdjacency {
    PartitionedAdjacency::new(&Skeleton::preset(&Topology::Chain(n)).unwrap(), DEFAULT_ALPHA).unwrap()
}

fn randomize<M: Module<f64>>(m: &mut M, seed: u64) {
    let mut r = rng(seed);
    for p in m.parameters_mut() {
        let n = p.numel();
        p.set_data(uniform(&mut r, n, -0.8, 0.8)).unwrap();
    }
}

fn module_case<M: Module<f64>>(
    out: &mut Vec<(String, f64)>,
    name: &str,
    module: &mut M,
    x: &Tensor<f64>,
    forward: impl Fn(&M, &Tensor<f64>) -> prgcn_core::Result<Tensor<f64>>,
) {
    let params = check_module(module, |m| probe(&forward(m, x)?, 11));
    let (pname, perr) = worst(&params);
    out.push((format!("{name} params (worst: {pname})"), perr));
    let input = check_leaves(std::slice::from_ref(x), |xs| probe(&forward(module, &xs[0])?, 11));
    out.push((format!("{name} input"), input));
}

/// Every layer type, each module, and the differentiable ops they rely on.
pub fn layer_suite() -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut r = rng(100);
    let adj = chain_adjacency(3);

    let x = random_tensor(&mut r, &[2, 3, 6, 3]);
    let mut bn = BatchNorm::<f64>::new("bn", 3).unwrap();
    randomize(&mut bn, 1);
    module_case(&mut out, "batch_norm/train", &mut bn, &x, |m, x| m.forward(x, Mode::Train));
    module_case(&mut out, "batch_norm/eval", &mut bn, &x, |m, x| m.forward(x, Mode::Eval));

    let mut pw = PointwiseConv::<f64>::new("pw", 3, 4, &mut r).unwrap();
    module_case(&mut out, "pointwise_conv", &mut pw, &x, |m, x| m.forward(x));

    for (cin, cout) in [(3, 4), (3, 3)] {
        let mut g = GraphConvLayer::<f64>::new("g", cin, cout, 3, ResidualKind::Auto, &mut r).unwrap();
        randomize(&mut g, 2);
        module_case(&mut out, &format!("graph_conv {cin}->{cout}"), &mut g, &x, |m, x| {
            m.forward(x, &adj, Mode::Train)
        });
    }

    for (cin, cout, stride) in [(3, 3, 1), (3, 4, 2), (3, 3, 3)] {
        let mut t = TemporalConvLayer::<f64>::new("t", cin, cout, stride, ResidualKind::Auto, &mut r).unwrap();
        randomize(&mut t, 3);
        module_case(&mut out, &format!("temporal_conv {cin}->{cout} s{stride}"), &mut t, &x, |m, x| {
            m.forward(x, Mode::Train)
        });
    }

    let pooled = check_leaves(std::slice::from_ref(&x), |xs| probe(&max_pool_time(&xs[0], 3)?, 5));
    out.push(("max_pool_time input".into(), pooled));

    let mut prm = PoseRefinement::<f64>::new("prm", 4, 3, ChannelSemantics::XyConf, &mut r).unwrap();
    randomize(&mut prm, 4);
    module_case(&mut out, "pose_refinement", &mut prm, &x, |m, x| m.forward(x, &adj, Mode::Train));

    let widths = FusionWidths { pos: [4, 4, 4], mot: 4, tconv1: 4, tconv2: 4 };
    for mode in FusionMode::ALL {
        let mut b = FusionBackbone::<f64>::new("gfm", mode, &widths, 3, &mut r).unwrap();
        randomize(&mut b, 5);
        module_case(&mut out, &format!("fusion {mode}"), &mut b, &x, |m, x| m.forward(x, &adj, Mode::Train));
    }

    let f = random_tensor(&mut r, &[2, 8, 2, 3]);
    let mut tam = TemporalAggregation::<f64>::new("tam", 8, 4, 3, &mut r).unwrap();
    randomize(&mut tam, 6);
    module_case(&mut out, "temporal_aggregation", &mut tam, &f, |m, x| m.forward(x, &adj, Mode::Train));

    let tam = TemporalAggregation::<f64>::new("tam", 8, 4, 3, &mut r).unwrap();
    let mut head = ClassifierHead::new(Some(tam), 8, 3, &mut r).unwrap();
    randomize(&mut head, 7);
    module_case(&mut out, "classifier_head", &mut head, &f, |m, x| m.forward(x, &adj, Mode::Train));

    let logits = random_tensor(&mut r, &[3, 4]);
    let ce = check_leaves(std::slice::from_ref(&logits), |xs| xs[0].softmax(1)?.cross_entropy(&[0, 3, 1]));
    out.push(("softmax + cross_entropy".into(), ce));

    let kernel = random_tensor(&mut r, &[4, 3, 3]);
    let conv = check_leaves(&[x.clone(), kernel], |xs| probe(&xs[0].conv_time(&xs[1], 2, 1)?, 8));
    out.push(("conv_time".into(), conv));

    let a = random_tensor(&mut r, &[2, 3, 4]);
    let b = random_tensor(&mut r, &[4, 5]);
    let mm = check_leaves(&[a, b], |xs| probe(&xs[0].matmul(&xs[1])?, 9));
    out.push(("matmul (broadcast batch)".into(), mm));

    out
}

/// The whole toy network: 3-joint chain, 6 frames, 2 classes, with pose
/// refinement and temporal aggregation, two persons per clip.
pub fn toy_model_suite() -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let cfg = ModelConfig::toy(3, 6, 2);
    let mut model = PrGcnModel::<f64>::new(cfg).unwrap();
    randomize(&mut model, 21);
    let mut r = rng(22);
    let x = random_tensor(&mut r, &[2, 2, 3, 6, 3]);
    let labels = [0, 1];
    for mode in [Mode::Train, Mode::Eval] {
        let params = check_module(&mut model, |m| m.forward(&x, mode)?.cross_entropy(&labels));
        let (pname, perr) = worst(&params);
        out.push((format!("toy model {mode:?} params (worst: {pname})"), perr));
        let input = check_leaves(std::slice::from_ref(&x), |xs| model.forward(&xs[0], mode)?.cross_entropy(&labels));
        out.push((format!("toy model {mode:?} input"), input));
    }
    out
}
