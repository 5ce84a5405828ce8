//! TimeGAN: embedder, recovery, generator, supervisor and discriminator
//! networks, their three training phases, checkpoints, snapshots and
//! generation.

mod checkpoint;
mod config;
mod losses;
mod model;
mod snapshot;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FILE, CHECKPOINT_VERSION};
pub use config::{LossWeights, TimeGanConfig, TrainSchedule};
pub use losses::{bce_with_logits, moment_loss, mse, supervised_loss};
pub use model::{generate, TimeGanModel};
pub use snapshot::{select_snapshot, DirectoryArchive, ScoreRow, ScoringSink, SnapshotSelection};
pub use train::{
    check_update_gradients, DiscardSink, JointLosses, LossHistory, MemorySink, Optimizers, Phase,
    SchedulePosition, Snapshot, SnapshotSink, Trainer, OPTIMIZERS,
};
