//! Architecture blocks: pose refinement, gradual fusion of position and
//! motion flows, and temporal aggregation with the classifier head.

mod fusion;
mod refine;
mod tam;

pub use fusion::{
    compute_motion, scale_concat, FusionBackbone, FusionMode, FusionWidths, GradualFusion,
    SequentialFlow, TEMPORAL_REDUCTION,
};
pub use refine::PoseRefinement;
pub use tam::{ClassifierHead, TemporalAggregation};

/// Meaning of the three input channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelSemantics {
    /// 2-D coordinates plus detection confidence.
    XyConf,
    /// 3-D coordinates.
    Xyz,
}

impl ChannelSemantics {
    /// Channels carrying coordinates (refined, augmented).
    pub fn coord_channels(self) -> usize {
        match self {
            ChannelSemantics::XyConf => 2,
            ChannelSemantics::Xyz => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelSemantics::XyConf => "xy_conf",
            ChannelSemantics::Xyz => "xyz",
        }
    }
}

impl std::str::FromStr for ChannelSemantics {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "xy_conf" | "xyconf" | "2d" => Ok(ChannelSemantics::XyConf),
            "xyz" | "3d" => Ok(ChannelSemantics::Xyz),
            _ => Err(crate::Error::Config(format!("unknown channel semantics `{s}`"))),
        }
    }
}

/// Input channels of every supported skeleton format.
pub const INPUT_CHANNELS: usize = 3;
