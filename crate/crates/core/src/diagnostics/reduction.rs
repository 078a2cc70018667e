//! Reduction of `D_t^m + sum_j D_t^{m-j} q_j(D_x)` to a first-order system.

use crate::error::{Error, Result};
use crate::symbol::expr::Expr;
use crate::symbol::{MatrixSymbol, SpatialExpr, SymbolEntry, TrigPolynomial};

/// Companion matrix `C(xi)` of the scalar equation: ones on the
/// superdiagonal and last row `-q_m(xi), ..., -q_1(xi)`. With
/// `v = (u, D_t u, ..., D_t^{m-1} u)` the equation reads `D_t v - C v = g`,
/// so the system operator is `D_t + Q` with `Q = -C` (see [`companion_operator`]).
pub fn reduce_higher_order(q: &[SpatialExpr], n: usize) -> Result<MatrixSymbol> {
    let m = q.len();
    if m == 0 {
        return Err(Error::InvalidInput("need at least one coefficient".into()));
    }
    if let Some(e) = q.iter().find(|e| e.max_component() > n) {
        return Err(Error::DimensionMismatch(format!("`{e}` uses more than {n} frequency variables")));
    }
    let one = || SymbolEntry { time: TrigPolynomial::real_constant(1.0), space: SpatialExpr::constant(1.0) };
    let entries = (0..m)
        .map(|r| {
            (0..m)
                .map(|c| {
                    if r + 1 == m {
                        let qj = &q[m - 1 - c];
                        if qj.is_zero() {
                            SymbolEntry::zero()
                        } else {
                            SymbolEntry {
                                time: TrigPolynomial::real_constant(1.0),
                                space: SpatialExpr::from_ast(Expr::Neg(Box::new(qj.ast().clone()))),
                            }
                        }
                    } else if c == r + 1 {
                        one()
                    } else {
                        SymbolEntry::zero()
                    }
                })
                .collect()
        })
        .collect();
    MatrixSymbol::new(m, n, entries)
}

/// Symbol `Q = -C` of the equivalent system `D_t + Q(D_x)`.
pub fn companion_operator(q: &[SpatialExpr], n: usize) -> Result<MatrixSymbol> {
    Ok(reduce_higher_order(q, n)?.negated())
}
