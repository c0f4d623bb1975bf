//! Experiment harness: configuration, sources, the episode loop, baselines,
//! sweeps and trace files.

pub mod baselines;
pub mod config;
pub mod episode;
pub mod source;
pub mod sweep;
pub mod trace;

pub use config::{RunConfig, Scheme};
pub use episode::{run_episode, run_setup, Episode, EpisodeSetup, EpisodeSummary, StepTrace};
