//! Configuration, Monte Carlo campaigns and the built-in self test.

pub mod campaign;
pub mod config;
pub mod selftest;

pub use campaign::{compute_rmse, run_campaign, Manifest, RmseCurve};
pub use config::{load_config, parse_config, CampaignConfig};
