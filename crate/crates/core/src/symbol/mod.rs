//! Symbols, spatial expressions, frequency lattices and growth-order fits.

pub mod expr;
pub mod lattice;
pub mod matrix;
pub mod order;
pub mod trig;

pub use expr::SpatialExpr;
pub use lattice::{Lattice, TimeGrid};
pub use matrix::{MatrixSymbol, SymbolEntry};
pub use order::{estimate_order, OrderFit, OrderVerdict};
pub use trig::TrigPolynomial;
