//! Analysis of one-dimensional piecewise-autonomous periodic equations:
//! Poincaré maps and their derivatives, limit-cycle search and
//! classification, rotated-family continuation and the bundled
//! population models.

pub mod equation;
pub mod field;
pub mod poly;
pub mod flow;
pub mod numeric;
pub mod poincare;
pub mod cycles;
pub mod continuation;
pub mod models;
