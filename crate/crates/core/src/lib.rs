//! Minimum-complexity symbolic regression with a global-optimality
//! certificate.
//!
//! Given observations `(x, y)`, a set of candidate operators and a bound
//! `eps`, the solver finds the expression tree with the fewest nodes (or the
//! smallest operator weight) whose relative squared error
//! `sum_i (f(x_i)/y_i - 1)^2` is at most `eps`. Structures are explored by
//! best-first branch-and-bound over a fixed full binary template; interval
//! arithmetic prunes partial structures and certifies that cheaper
//! structures cannot reach the error bound for any constant values.
//!
//! ```
//! use exactsr::{data::Dataset, solver::{solve, SolverConfig}};
//!
//! let x: Vec<Vec<f64>> = (1..=5).map(|i| vec![i as f64]).collect();
//! let y: Vec<f64> = (1..=5).map(|i| i as f64).collect();
//! let ds = Dataset::new(vec!["x".into()], "y", x, y, "identity").unwrap();
//! let sol = solve(&ds, &SolverConfig::new(1e-4)).unwrap();
//! assert_eq!(sol.render(&ds), "x");
//! ```

pub mod bounds;
pub mod constfit;
pub mod data;
pub mod expr;
pub mod grammar;
pub mod solver;
pub mod text;

pub use expr::{Expr, OpKind, Operator, OperatorSet};
