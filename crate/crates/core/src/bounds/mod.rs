//! Interval enclosures of node values under partial structures, and the
//! lower bound on the relative error that drives pruning.

mod interval;

pub use interval::Interval;

use thiserror::Error;

use crate::data::Dataset;
use crate::expr::{Arity, Expr, DEFAULT_MAGNITUDE_BOUND};
use crate::grammar::{Grammar, Label, Objective, PartialAssignment};

/// Default half-width of the box constants are searched in.
pub const DEFAULT_CONST_BOX: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("target value of observation {0} is zero")]
    ZeroTarget(usize),
    #[error("constant box must be positive and finite, got {0}")]
    InvalidBox(f64),
    #[error("range of variable {0} is not finite")]
    NonFiniteRange(usize),
}

/// Variable ranges, constant box `[-C, C]` and the magnitude cap applied
/// to every intermediate value.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundContext {
    var_ranges: Vec<Interval>,
    const_box: f64,
    magnitude: f64,
}

impl BoundContext {
    pub fn new(var_ranges: Vec<Interval>, const_box: f64, magnitude: f64) -> Result<Self, BoundsError> {
        if !(const_box > 0.0 && const_box.is_finite()) {
            return Err(BoundsError::InvalidBox(const_box));
        }
        if magnitude.is_nan() || magnitude <= 0.0 {
            return Err(BoundsError::InvalidBox(magnitude));
        }
        if let Some(d) = var_ranges
            .iter()
            .position(|r| r.is_empty() || !r.lo.is_finite() || !r.hi.is_finite())
        {
            return Err(BoundsError::NonFiniteRange(d));
        }
        Ok(BoundContext {
            var_ranges,
            const_box,
            magnitude,
        })
    }

    /// Ranges taken from the dataset's columns.
    pub fn for_dataset(ds: &Dataset, const_box: f64, magnitude: f64) -> Result<Self, BoundsError> {
        let ranges = (0..ds.n_vars())
            .map(|d| {
                ds.x().iter().fold(Interval::EMPTY, |acc, row| acc.hull(&Interval::point(row[d])))
            })
            .collect();
        BoundContext::new(ranges, const_box, magnitude)
    }

    pub fn with_default_magnitude(var_ranges: Vec<Interval>, const_box: f64) -> Result<Self, BoundsError> {
        BoundContext::new(var_ranges, const_box, DEFAULT_MAGNITUDE_BOUND)
    }

    pub fn var_ranges(&self) -> &[Interval] {
        &self.var_ranges
    }

    pub fn const_box(&self) -> f64 {
        self.const_box
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }
}

/// Some node that every completion contains has no admissible value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Infeasible {
    pub node: usize,
}

/// Per-node enclosures; `None` for nodes that are (or must be) inactive.
pub type NodeIntervals = Vec<Option<Interval>>;

/// Encloses, for every possibly active node, the values any completion of
/// `p` can take at input `x`.
pub fn propagate(
    grammar: &Grammar,
    p: &PartialAssignment,
    ctx: &BoundContext,
    x: &[f64],
) -> Result<NodeIntervals, Infeasible> {
    propagate_with(grammar, p, ctx, |d| Interval::point(x[d]))
}

/// As [`propagate`], with every variable ranging over its observed range.
pub fn propagate_ranges(
    grammar: &Grammar,
    p: &PartialAssignment,
    ctx: &BoundContext,
) -> Result<NodeIntervals, Infeasible> {
    propagate_with(grammar, p, ctx, |d| ctx.var_ranges[d])
}

fn propagate_with(
    grammar: &Grammar,
    p: &PartialAssignment,
    ctx: &BoundContext,
    var: impl Fn(usize) -> Interval,
) -> Result<NodeIntervals, Infeasible> {
    let template = grammar.template();
    let hulls = undecided_hulls(grammar, p, ctx, &var);
    let mut out: NodeIntervals = vec![None; template.len()];
    for n in (0..template.len()).rev() {
        out[n] = match p.label(n) {
            Some(Label::Inactive) => None,
            Some(Label::Var(d)) => Some(var(d)),
            Some(Label::Const) => Some(Interval::symmetric(ctx.const_box)),
            Some(Label::Op(o)) => {
                let op = grammar.ops().get(o).kind;
                let (l, r) = template.children(n).expect("operator at a leaf");
                let a = out[l].expect("operand of a decided operator is active");
                let v = match op.arity() {
                    Arity::Unary => a.apply1(op),
                    Arity::Binary => {
                        let b = out[r].expect("operand of a decided operator is active");
                        a.apply2(op, &b)
                    }
                }
                .clip(ctx.magnitude);
                if v.is_empty() {
                    return Err(Infeasible { node: n });
                }
                Some(v)
            }
            None => match grammar.required_active(p, n) {
                Some(false) => None,
                _ => Some(hulls[template.height(n)]),
            },
        };
    }
    Ok(out)
}

/// `hulls[h]` encloses every value a subtree of height at most `h` built
/// from the labels still available to `p` can take.
fn undecided_hulls(
    grammar: &Grammar,
    p: &PartialAssignment,
    ctx: &BoundContext,
    var: &impl Fn(usize) -> Interval,
) -> Vec<Interval> {
    let mut base = (0..grammar.n_vars()).fold(Interval::EMPTY, |acc, d| acc.hull(&var(d)));
    if grammar.max_constants().is_none_or(|m| p.constants() < m) {
        base = base.hull(&Interval::symmetric(ctx.const_box));
    }
    let depth = grammar.template().depth();
    let mut hulls = Vec::with_capacity(depth + 1);
    hulls.push(base);
    for h in 1..=depth {
        let below = hulls[h - 1];
        let mut acc = base;
        for o in 0..grammar.ops().len() {
            if p.op_count(o) >= grammar.ops().cap(o) {
                continue;
            }
            let op = grammar.ops().get(o).kind;
            let img = match op.arity() {
                Arity::Unary => below.apply1(op),
                Arity::Binary => below.apply2(op, &below),
            };
            acc = acc.hull(&img.clip(ctx.magnitude));
        }
        hulls.push(acc);
    }
    hulls
}

/// Encloses the value of a complete expression whose constants range over
/// `consts` (in left-to-right leaf order).
pub fn expr_interval(expr: &Expr, x: &[f64], consts: &[Interval], magnitude: f64) -> Interval {
    let mut next = 0;
    expr_interval_rec(expr, x, consts, &mut next, magnitude)
}

fn expr_interval_rec(e: &Expr, x: &[f64], consts: &[Interval], next: &mut usize, mag: f64) -> Interval {
    match e {
        Expr::Const(v) => {
            let i = consts.get(*next).copied().unwrap_or(Interval::point(*v));
            *next += 1;
            i
        }
        Expr::Var(d) => Interval::point(x[*d]).clip(mag),
        Expr::Unary(op, c) => expr_interval_rec(c, x, consts, next, mag).apply1(*op).clip(mag),
        Expr::Binary(op, l, r) => {
            let a = expr_interval_rec(l, x, consts, next, mag);
            let b = expr_interval_rec(r, x, consts, next, mag);
            a.apply2(*op, &b).clip(mag)
        }
    }
}

/// Squared distance from 1 of `value / target`; 0 when the ratio interval
/// contains 1, infinite for an empty interval.
pub fn ratio_gap(value: &Interval, target: f64) -> f64 {
    if value.is_empty() {
        return f64::INFINITY;
    }
    let (lo, hi) = if target > 0.0 {
        (value.lo / target, value.hi / target)
    } else {
        (value.hi / target, value.lo / target)
    };
    let gap = if lo > 1.0 {
        lo - 1.0
    } else if hi < 1.0 {
        1.0 - hi
    } else {
        return 0.0;
    };
    // shave a little so rounding in the division cannot overstate the gap
    let gap = gap * (1.0 - 1e-12);
    gap * gap
}

/// `sum_i dist(root_i / y_i, 1)^2`: no completion whose root values lie in
/// the given intervals has a smaller error.
pub fn error_lower_bound(root: &[Interval], y: &[f64]) -> Result<f64, BoundsError> {
    if let Some(i) = y.iter().position(|&t| t == 0.0) {
        return Err(BoundsError::ZeroTarget(i));
    }
    Ok(root.iter().zip(y).map(|(v, &t)| ratio_gap(v, t)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PruneReason {
    /// The error bound exceeds the tolerance.
    Bound,
    /// Every completion is worse than the incumbent.
    Dominated,
    /// Some forced operator has no admissible input.
    Infeasible,
}

impl PruneReason {
    pub fn name(self) -> &'static str {
        match self {
            PruneReason::Bound => "bound",
            PruneReason::Dominated => "dominated",
            PruneReason::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneDecision {
    Keep,
    Prune(PruneReason),
}

/// Decides whether the completions of `p` can be discarded. `incumbent` is
/// the objective value of the best feasible model so far; subtrees whose
/// bound equals it are kept so ties can still be resolved.
#[allow(clippy::too_many_arguments)]
pub fn prune(
    grammar: &Grammar,
    p: &PartialAssignment,
    incumbent: Option<f64>,
    objective: Objective,
    data: &Dataset,
    eps: f64,
    ctx: &BoundContext,
) -> PruneDecision {
    if let Some(best) = incumbent {
        if grammar.objective_lower_bound(p, objective) > best {
            return PruneDecision::Prune(PruneReason::Dominated);
        }
    }
    let root = grammar.template().root();
    let mut total = 0.0;
    for (x, &y) in data.x().iter().zip(data.y()) {
        let iv = match propagate(grammar, p, ctx, x) {
            Ok(iv) => iv,
            Err(_) => return PruneDecision::Prune(PruneReason::Infeasible),
        };
        let Some(r) = iv[root] else {
            return PruneDecision::Prune(PruneReason::Infeasible);
        };
        total += ratio_gap(&r, y);
        if total > eps {
            return PruneDecision::Prune(PruneReason::Bound);
        }
    }
    PruneDecision::Keep
}
