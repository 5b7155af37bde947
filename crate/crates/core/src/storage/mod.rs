//! On-disk formats: episode files indexed by a hashed manifest, window
//! datasets and model checkpoints.

mod checkpoint;
mod container;
mod dataset;
mod episode;
mod manifest;

pub use container::{read_file as read_artifact, write_file as write_artifact};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use dataset::WindowDataset;
pub use episode::{decode_episode, encode_episode, read_episode, write_episode};
pub use manifest::{load_episodes, load_record, sha256_hex, DatasetManifest, EpisodeRecord, MANIFEST_VERSION};
