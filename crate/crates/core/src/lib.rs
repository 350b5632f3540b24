pub mod domain;
pub mod envs;
pub mod harness;
pub mod nn;
pub mod play;
pub mod policy;
pub mod reward;
