// Validation uses `!(x > 0.0)` on purpose so NaN is rejected too. Joint and
// rotor loops index several parallel arrays, which reads better by index.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod arm;
pub mod clock;
pub mod config;
pub mod contact;
pub mod control;
pub mod envserver;
pub mod error;
pub mod fauna;
pub mod fluid;
pub mod math;
pub mod media;
pub mod scenarios;
pub mod sensors;
pub mod vehicle;
pub mod world;
