//! The structure space: tree templates, the assignment variables and their
//! constraints, symmetry breaking, and branching over partial assignments.

mod assignment;
mod canonical;
mod count;
mod partial;
mod template;

use thiserror::Error;

use crate::expr::{Expr, OpKind, OperatorSet};

pub use assignment::{Assignment, Label, Violation};
pub use canonical::{canonical_key, canonicalize, structure_key};
pub use count::COUNT_GUARD;
pub use partial::PartialAssignment;
pub use template::{TreeTemplate, DEFAULT_MAX_DEPTH};

/// Default limit on constant leaves per structure.
pub const DEFAULT_MAX_CONSTANTS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("template depth {depth} exceeds the maximum {max}")]
    DepthTooLarge { depth: usize, max: usize },
    #[error("invalid assignment: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))]
    InvalidAssignment(Vec<Violation>),
    #[error("expression does not fit the template")]
    DoesNotFit,
    #[error("operator `{0}` is not in the operator set")]
    UnknownOperator(OpKind),
    #[error("variable index {index} out of range ({vars} variables)")]
    VariableOutOfRange { index: usize, vars: usize },
    #[error("too many variables ({0}; at most 999)")]
    TooManyVariables(usize),
    #[error("structure count exceeds {limit}")]
    TooLarge { limit: u64 },
}

/// Quantity minimized by the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    /// Number of active nodes.
    #[default]
    NodeCount,
    /// Sum of operator weights.
    Weighted,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::NodeCount => "node-count",
            Objective::Weighted => "weighted",
        }
    }

    pub fn from_name(s: &str) -> Option<Objective> {
        match s {
            "node-count" | "nodes" => Some(Objective::NodeCount),
            "weighted" => Some(Objective::Weighted),
            _ => None,
        }
    }

    /// Value of a complete expression; operators missing from `ops` weigh 1.
    pub fn value(self, expr: &Expr, ops: &OperatorSet) -> f64 {
        match self {
            Objective::NodeCount => expr.complexity() as f64,
            Objective::Weighted => expr.weighted_complexity(ops).unwrap_or_else(|_| {
                expr.operators().len() as f64
            }),
        }
    }
}

/// Template, operators and variable count, plus the structural limits that
/// together define which expression trees are admissible.
#[derive(Debug, Clone)]
pub struct Grammar {
    template: TreeTemplate,
    ops: OperatorSet,
    n_vars: usize,
    max_constants: Option<usize>,
    symmetry: bool,
}

impl Grammar {
    /// A grammar with the default constant limit and symmetry breaking on.
    pub fn new(template: TreeTemplate, ops: OperatorSet, n_vars: usize) -> Result<Self, GrammarError> {
        if n_vars > 999 {
            return Err(GrammarError::TooManyVariables(n_vars));
        }
        Ok(Grammar {
            template,
            ops,
            n_vars,
            max_constants: Some(DEFAULT_MAX_CONSTANTS),
            symmetry: true,
        })
    }

    /// `None` removes the limit; `Some(0)` forbids constants.
    pub fn with_max_constants(mut self, max: Option<usize>) -> Self {
        self.max_constants = max;
        self
    }

    pub fn with_symmetry_breaking(mut self, on: bool) -> Self {
        self.symmetry = on;
        self
    }

    pub fn template(&self) -> &TreeTemplate {
        &self.template
    }

    pub fn ops(&self) -> &OperatorSet {
        &self.ops
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn max_constants(&self) -> Option<usize> {
        self.max_constants
    }

    pub fn symmetry_breaking(&self) -> bool {
        self.symmetry
    }

    /// Smallest objective value any completion of `p` can have.
    pub fn objective_lower_bound(&self, p: &PartialAssignment, objective: Objective) -> f64 {
        match objective {
            Objective::NodeCount => self.min_complexity(p) as f64,
            Objective::Weighted => p.op_weight(),
        }
    }
}
