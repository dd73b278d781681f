//! Analysis of planar Filippov systems with a straight switching line, and a
//! case atlas for the fold–saddle family.

pub mod atlas;
pub mod family;
pub mod field;
pub mod integrator;
pub mod sigma;

pub use family::{build_system, landmarks, FoldSaddleParams, Landmarks, Tau};
pub use field::{AffineField, NonSmoothSystem, Point, Side};
pub use sigma::{
    classify_sigma_point, direction_function, find_pseudo_equilibria, find_tangencies,
    partition_sigma, sliding_vector, FoldKind, PseudoEquilibrium, PseudoStability, SigmaClass,
    SigmaPartition, SigmaTolerances, Tangency,
};
