//! Exact free-product geometry, empirical Morse gauges, combinatorial Morse boundaries
//! and the boundary-homeomorphism matching procedure, all checked on finite balls.

pub mod checks;
pub mod factors;
pub mod geometry;
pub mod graph;
pub mod matching;
pub mod morse;
pub mod rational;
pub mod rays;
pub mod words;
