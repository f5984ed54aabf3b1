//! A minimal interface shared by factor Cayley graphs, the free product and finite balls.

use std::fmt::Debug;
use std::hash::Hash;

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("realization cap exceeded: {count} realizations exist")]
pub struct RealizationCapExceeded {
    pub count: u64,
}

pub trait Geometry {
    type Point: Clone + Eq + Hash + Debug;

    fn base(&self) -> Self::Point;

    fn dist(&self, a: &Self::Point, b: &Self::Point) -> u64;

    /// Every geodesic from the base point to `x`, as vertex sequences.
    fn realizations(&self, x: &Self::Point, cap: usize) -> Result<Vec<Vec<Self::Point>>, RealizationCapExceeded>;

    fn norm(&self, x: &Self::Point) -> u64 {
        self.dist(&self.base(), x)
    }
}
