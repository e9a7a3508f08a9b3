#![allow(dead_code)]

pub mod bodies;
pub mod stats;
