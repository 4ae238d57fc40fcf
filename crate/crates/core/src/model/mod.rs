//! End-to-end network assembly, configuration, parameter and FLOP
//! accounting, and checkpoints.

mod accounting;
mod checkpoint;
mod config;
mod network;

pub use accounting::{count_flops, count_params, FlopReport, ParamReport};
pub use checkpoint::{checkpoint_config, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use config::{parse_kv, parse_override, ModelConfig};
pub(crate) use config::parse_value;
pub use network::PrGcnModel;
