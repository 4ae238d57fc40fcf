use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::INPUT_CHANNELS;
use crate::error::{Error, Result};
use crate::graph::PartitionedAdjacency;
use crate::layers::{max_pool_time, BatchNorm, GraphConvLayer, Mode, Module, ResidualKind, TemporalConvLayer};
use crate::numerics::{Float, Parameter, Tensor};

/// Total temporal downsampling of the fusion backbone (strides 2 then 3).
pub const TEMPORAL_REDUCTION: usize = 6;
const STRIDES: [usize; 2] = [2, 3];

/// Frame differences `M[t] = P[t] - P[t-1]` of a `(B, C, T, N)` tensor, with
/// `M[0] = 0`.
pub fn compute_motion<F: Float>(p: &Tensor<F>) -> Result<Tensor<F>> {
    if p.rank() != 4 {
        return Err(Error::shape("compute_motion", format!("expected (B, C, T, N), got {:?}", p.shape())));
    }
    let t = p.shape()[2];
    if t == 1 {
        return Ok(Tensor::zeros(p.shape()));
    }
    let diff = p.narrow(2, 1, t - 1)?.sub(&p.narrow(2, 0, t - 1)?)?;
    diff.pad(2, 1, 0)
}

/// Max-pools `pos` along time down to `mot`'s frame count and stacks the two
/// along channels (position channels first).
pub fn scale_concat<F: Float>(pos: &Tensor<F>, mot: &Tensor<F>) -> Result<Tensor<F>> {
    if pos.rank() != 4 || mot.rank() != 4 {
        return Err(Error::shape("scale_concat", "expected (B, C, T, N) operands"));
    }
    let (t, t_mot) = (pos.shape()[2], mot.shape()[2]);
    if t % t_mot != 0 {
        return Err(Error::shape(
            "scale_concat",
            format!("position frames {t} are not a multiple of motion frames {t_mot}"),
        ));
    }
    let pooled = max_pool_time(pos, t / t_mot)?;
    Tensor::concat(&[pooled, mot.clone()], 1)
}

/// Layout of the fusion backbone, i.e. which ablation variant is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    /// Position flow on P, motion flow on M, gradually fused.
    ParallelPm,
    /// Both flows consume P.
    ParallelPp,
    /// Single stack of graph and temporal convolutions on P.
    SequentialP,
    /// Single stack on the channel concatenation of P and M.
    SequentialPm,
}

impl FusionMode {
    pub const ALL: [FusionMode; 4] = [
        FusionMode::ParallelPm,
        FusionMode::ParallelPp,
        FusionMode::SequentialP,
        FusionMode::SequentialPm,
    ];
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::ParallelPm => "parallel_pm",
            FusionMode::ParallelPp => "parallel_pp",
            FusionMode::SequentialP => "sequential_p",
            FusionMode::SequentialPm => "sequential_pm",
        })
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionMode::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown fusion mode `{s}`")))
    }
}

/// Channel widths of the fusion backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionWidths {
    /// Outputs of the three position-flow graph convolutions.
    pub pos: [usize; 3],
    /// Output of the motion-flow graph convolution.
    pub mot: usize,
    /// Output of the stride-2 temporal convolution.
    pub tconv1: usize,
    /// Output of the stride-3 temporal convolution.
    pub tconv2: usize,
}

impl FusionWidths {
    pub fn fuse1(&self) -> usize {
        self.pos[0] + self.mot
    }

    pub fn fuse2(&self) -> usize {
        self.pos[1] + self.tconv1
    }

    /// Channels leaving the backbone.
    pub fn fused(&self) -> usize {
        self.pos[2] + self.tconv2
    }
}

impl Default for FusionWidths {
    fn default() -> Self {
        FusionWidths {
            pos: [64, 64, 64],
            mot: 64,
            tconv1: 128,
            tconv2: 192,
        }
    }
}

/// Parallel position and motion flows fused at three temporal scales.
#[derive(Debug)]
pub struct GradualFusion<F: Float = f32> {
    mode: FusionMode,
    pos: Vec<GraphConvLayer<F>>,
    mot_gconv: GraphConvLayer<F>,
    mot_tconv1: TemporalConvLayer<F>,
    mot_tconv2: TemporalConvLayer<F>,
}

impl<F: Float> GradualFusion<F> {
    pub fn new(
        name: &str,
        mode: FusionMode,
        widths: &FusionWidths,
        num_joints: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if !matches!(mode, FusionMode::ParallelPm | FusionMode::ParallelPp) {
            return Err(Error::Config(format!("{mode} is not a parallel layout")));
        }
        let n = num_joints;
        let mut pos = Vec::with_capacity(3);
        let mut c_in = INPUT_CHANNELS;
        for (i, &c_out) in widths.pos.iter().enumerate() {
            pos.push(GraphConvLayer::new(&format!("{name}.pos{}", i + 1), c_in, c_out, n, ResidualKind::Auto, rng)?);
            c_in = c_out;
        }
        Ok(GradualFusion {
            mode,
            pos,
            mot_gconv: GraphConvLayer::new(&format!("{name}.mot_gconv"), INPUT_CHANNELS, widths.mot, n, ResidualKind::Auto, rng)?,
            mot_tconv1: TemporalConvLayer::new(
                &format!("{name}.mot_tconv1"),
                widths.fuse1(),
                widths.tconv1,
                STRIDES[0],
                ResidualKind::Auto,
                rng,
            )?,
            mot_tconv2: TemporalConvLayer::new(
                &format!("{name}.mot_tconv2"),
                widths.fuse2(),
                widths.tconv2,
                STRIDES[1],
                ResidualKind::Auto,
                rng,
            )?,
        })
    }

    /// What the motion flow consumes for refined positions `p`.
    pub fn motion_input(&self, p: &Tensor<F>) -> Result<Tensor<F>> {
        match self.mode {
            FusionMode::ParallelPm => compute_motion(p),
            _ => Ok(p.clone()),
        }
    }

    pub fn forward(&self, p: &Tensor<F>, adj: &PartitionedAdjacency, mode: Mode) -> Result<Tensor<F>> {
        let s1 = self.pos[0].forward(p, adj, mode)?;
        let s2 = self.pos[1].forward(&s1, adj, mode)?;
        let s3 = self.pos[2].forward(&s2, adj, mode)?;

        let m = self.mot_gconv.forward(&self.motion_input(p)?, adj, mode)?;
        let f1 = scale_concat(&s1, &m)?;
        let h1 = self.mot_tconv1.forward(&f1, mode)?;
        let f2 = scale_concat(&s2, &h1)?;
        let h2 = self.mot_tconv2.forward(&f2, mode)?;
        scale_concat(&s3, &h2)
    }

    pub fn flops(&self, t: usize, n: usize) -> u64 {
        let pos: u64 = self.pos.iter().map(|g| g.flops(t, n)).sum();
        pos + self.mot_gconv.flops(t, n)
            + self.mot_tconv1.flops(t, n)
            + self.mot_tconv2.flops(self.mot_tconv1.output_frames(t), n)
    }
}

impl<F: Float> Module<F> for GradualFusion<F> {
    fn parameters(&self) -> Vec<&Parameter<F>> {
        let mut p: Vec<_> = self.pos.iter().flat_map(|g| g.parameters()).collect();
        p.extend(self.mot_gconv.parameters());
        p.extend(self.mot_tconv1.parameters());
        p.extend(self.mot_tconv2.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut p: Vec<_> = self.pos.iter_mut().flat_map(|g| g.parameters_mut()).collect();
        p.extend(self.mot_gconv.parameters_mut());
        p.extend(self.mot_tconv1.parameters_mut());
        p.extend(self.mot_tconv2.parameters_mut());
        p
    }

    fn batch_norms(&self) -> Vec<&BatchNorm<F>> {
        let mut b: Vec<_> = self.pos.iter().flat_map(|g| g.batch_norms()).collect();
        b.extend(self.mot_gconv.batch_norms());
        b.extend(self.mot_tconv1.batch_norms());
        b.extend(self.mot_tconv2.batch_norms());
        b
    }
}

/// Single-flow stack: three graph convolutions, then the stride-2 and stride-3
/// temporal convolutions, ending at the same width as the parallel layout.
#[derive(Debug)]
pub struct SequentialFlow<F: Float = f32> {
    mode: FusionMode,
    gconvs: Vec<GraphConvLayer<F>>,
    tconv1: TemporalConvLayer<F>,
    tconv2: TemporalConvLayer<F>,
}

impl<F: Float> SequentialFlow<F> {
    pub fn new(
        name: &str,
        mode: FusionMode,
        widths: &FusionWidths,
        num_joints: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut c_in = match mode {
            FusionMode::SequentialP => INPUT_CHANNELS,
            FusionMode::SequentialPm => 2 * INPUT_CHANNELS,
            other => return Err(Error::Config(format!("{other} is not a sequential layout"))),
        };
        let mut gconvs = Vec::with_capacity(3);
        for (i, &c_out) in widths.pos.iter().enumerate() {
            gconvs.push(GraphConvLayer::new(&format!("{name}.gconv{}", i + 1), c_in, c_out, num_joints, ResidualKind::Auto, rng)?);
            c_in = c_out;
        }
        Ok(SequentialFlow {
            mode,
            gconvs,
            tconv1: TemporalConvLayer::new(&format!("{name}.tconv1"), c_in, widths.tconv1, STRIDES[0], ResidualKind::Auto, rng)?,
            tconv2: TemporalConvLayer::new(
                &format!("{name}.tconv2"),
                widths.tconv1,
                widths.fused(),
                STRIDES[1],
                ResidualKind::Auto,
                rng,
            )?,
        })
    }

    pub fn forward(&self, p: &Tensor<F>, adj: &PartitionedAdjacency, mode: Mode) -> Result<Tensor<F>> {
        let mut h = match self.mode {
            FusionMode::SequentialPm => Tensor::concat(&[p.clone(), compute_motion(p)?], 1)?,
            _ => p.clone(),
        };
        for g in &self.gconvs {
            h = g.forward(&h, adj, mode)?;
        }
        let h = self.tconv1.forward(&h, mode)?;
        self.tconv2.forward(&h, mode)
    }

    pub fn flops(&self, t: usize, n: usize) -> u64 {
        let g: u64 = self.gconvs.iter().map(|g| g.flops(t, n)).sum();
        g + self.tconv1.flops(t, n) + self.tconv2.flops(self.tconv1.output_frames(t), n)
    }
}

impl<F: Float> Module<F> for SequentialFlow<F> {
    fn parameters(&self) -> Vec<&Parameter<F>> {
        let mut p: Vec<_> = self.gconvs.iter().flat_map(|g| g.parameters()).collect();
        p.extend(self.tconv1.parameters());
        p.extend(self.tconv2.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut p: Vec<_> = self.gconvs.iter_mut().flat_map(|g| g.parameters_mut()).collect();
        p.extend(self.tconv1.parameters_mut());
        p.extend(self.tconv2.parameters_mut());
        p
    }

    fn batch_norms(&self) -> Vec<&BatchNorm<F>> {
        let mut b: Vec<_> = self.gconvs.iter().flat_map(|g| g.batch_norms()).collect();
        b.extend(self.tconv1.batch_norms());
        b.extend(self.tconv2.batch_norms());
        b
    }
}

/// The backbone between pose refinement and the head.
#[derive(Debug)]
pub enum FusionBackbone<F: Float = f32> {
    Parallel(GradualFusion<F>),
    Sequential(SequentialFlow<F>),
}

impl<F: Float> FusionBackbone<F> {
    pub fn new(
        name: &str,
        mode: FusionMode,
        widths: &FusionWidths,
        num_joints: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(match mode {
            FusionMode::ParallelPm | FusionMode::ParallelPp => {
                FusionBackbone::Parallel(GradualFusion::new(name, mode, widths, num_joints, rng)?)
            }
            FusionMode::SequentialP | FusionMode::SequentialPm => {
                FusionBackbone::Sequential(SequentialFlow::new(name, mode, widths, num_joints, rng)?)
            }
        })
    }

    pub fn forward(&self, p: &Tensor<F>, adj: &PartitionedAdjacency, mode: Mode) -> Result<Tensor<F>> {
        let t = p.shape().get(2).copied().unwrap_or(0);
        if t % TEMPORAL_REDUCTION != 0 {
            return Err(Error::shape(
                "fusion",
                format!("{t} frames are not divisible by {TEMPORAL_REDUCTION}"),
            ));
        }
        match self {
            FusionBackbone::Parallel(g) => g.forward(p, adj, mode),
            FusionBackbone::Sequential(s) => s.forward(p, adj, mode),
        }
    }

    pub fn flops(&self, t: usize, n: usize) -> u64 {
        match self {
            FusionBackbone::Parallel(g) => g.flops(t, n),
            FusionBackbone::Sequential(s) => s.flops(t, n),
        }
    }
}

impl<F: Float> Module<F> for FusionBackbone<F> {
    fn parameters(&self) -> Vec<&Parameter<F>> {
        match self {
            FusionBackbone::Parallel(g) => g.parameters(),
            FusionBackbone::Sequential(s) => s.parameters(),
        }
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        match self {
            FusionBackbone::Parallel(g) => g.parameters_mut(),
            FusionBackbone::Sequential(s) => s.parameters_mut(),
        }
    }

    fn batch_norms(&self) -> Vec<&BatchNorm<F>> {
        match self {
            FusionBackbone::Parallel(g) => g.batch_norms(),
            FusionBackbone::Sequential(s) => s.batch_norms(),
        }
    }
}
