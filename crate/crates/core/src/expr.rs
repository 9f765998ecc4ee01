//! Concrete expression trees and the operator registry.
//!
//! An [`Expr`] is a fully labelled expression: every leaf is a constant or an
//! input variable and every internal node carries an operator of matching
//! arity. Variables are indexed from zero; `Var(0)` is the first column of a
//! dataset.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default bound on the absolute value of any intermediate result.
pub const DEFAULT_MAGNITUDE_BOUND: f64 = 1e8;

/// Default per-operator occurrence cap.
pub const DEFAULT_OP_CAP: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arity {
    Unary,
    Binary,
}

impl Arity {
    pub fn children(self) -> usize {
        match self {
            Arity::Unary => 1,
            Arity::Binary => 2,
        }
    }
}

/// Admissible input region of an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// Defined everywhere on the reals.
    Real,
    /// Argument must be `>= 0`.
    NonNegative,
    /// Second argument must be nonzero.
    NonZeroDivisor,
    /// `a^b` with `a > 0`, or `a == 0` and `b > 0`, or `a < 0` and integral `b`.
    PowerBase,
}

/// The built-in operator semantics. The numeric order of the variants is the
/// rank used by canonical keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Sqrt,
    Cbrt,
}

impl OpKind {
    pub const ALL: [OpKind; 7] = [
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::Div,
        OpKind::Pow,
        OpKind::Sqrt,
        OpKind::Cbrt,
    ];

    /// Textual id, as accepted by `--ops` and the expression parser.
    pub fn symbol(self) -> &'static str {
        match self {
            OpKind::Add => "+",
            OpKind::Sub => "-",
            OpKind::Mul => "*",
            OpKind::Div => "/",
            OpKind::Pow => "pow",
            OpKind::Sqrt => "sqrt",
            OpKind::Cbrt => "cbrt",
        }
    }

    pub fn from_symbol(s: &str) -> Option<OpKind> {
        match s {
            "+" | "add" => Some(OpKind::Add),
            "-" | "sub" => Some(OpKind::Sub),
            "*" | "mul" => Some(OpKind::Mul),
            "/" | "div" => Some(OpKind::Div),
            "^" | "pow" => Some(OpKind::Pow),
            "sqrt" => Some(OpKind::Sqrt),
            "cbrt" => Some(OpKind::Cbrt),
            _ => None,
        }
    }

    pub fn arity(self) -> Arity {
        match self {
            OpKind::Sqrt | OpKind::Cbrt => Arity::Unary,
            _ => Arity::Binary,
        }
    }

    pub fn domain(self) -> Domain {
        match self {
            OpKind::Sqrt => Domain::NonNegative,
            OpKind::Div => Domain::NonZeroDivisor,
            OpKind::Pow => Domain::PowerBase,
            _ => Domain::Real,
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, OpKind::Add | OpKind::Mul)
    }

    pub(crate) fn rank(self) -> u8 {
        self as u8
    }

    /// Applies a unary operator. `None` signals a domain violation.
    pub fn apply1(self, a: f64) -> Option<f64> {
        match self {
            OpKind::Sqrt => (a >= 0.0).then(|| a.sqrt()),
            OpKind::Cbrt => Some(a.cbrt()),
            _ => None,
        }
    }

    /// Applies a binary operator. `None` signals a domain violation.
    pub fn apply2(self, a: f64, b: f64) -> Option<f64> {
        match self {
            OpKind::Add => Some(a + b),
            OpKind::Sub => Some(a - b),
            OpKind::Mul => Some(a * b),
            OpKind::Div => (b != 0.0).then(|| a / b),
            OpKind::Pow => {
                let admissible = a > 0.0 || (a == 0.0 && b > 0.0) || (a < 0.0 && b.fract() == 0.0);
                admissible.then(|| a.powf(b))
            }
            _ => None,
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A candidate operator together with its complexity weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Operator {
    pub kind: OpKind,
    pub weight: f64,
}

impl Operator {
    pub fn new(kind: OpKind) -> Self {
        Operator { kind, weight: 1.0 }
    }

    pub fn with_weight(kind: OpKind, weight: f64) -> Self {
        Operator { kind, weight }
    }

    pub fn id(&self) -> &'static str {
        self.kind.symbol()
    }

    pub fn arity(&self) -> Arity {
        self.kind.arity()
    }

    pub fn domain(&self) -> Domain {
        self.kind.domain()
    }

    pub fn is_commutative(&self) -> bool {
        self.kind.is_commutative()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorSetError {
    #[error("unknown operator `{0}`")]
    Unknown(String),
    #[error("operator `{0}` listed twice")]
    Duplicate(String),
    #[error("operator `{0}` has multiplicity cap 0")]
    ZeroCap(String),
    #[error("operator `{0}` has a negative or non-finite weight")]
    BadWeight(String),
}

/// The candidate operators `O = U ∪ B` with per-operator occurrence caps.
///
/// Operators are indexed unary-first: indices `0..unary().len()` are the
/// unary operators, followed by the binary ones. Assignments and partial
/// assignments refer to operators by this index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSet {
    unary: Vec<Operator>,
    binary: Vec<Operator>,
    caps: Vec<u32>,
}

impl OperatorSet {
    /// Builds a set from operators and their caps (same order).
    pub fn new(ops: Vec<(Operator, u32)>) -> Result<Self, OperatorSetError> {
        let mut unary = Vec::new();
        let mut binary = Vec::new();
        let mut ucaps = Vec::new();
        let mut bcaps = Vec::new();
        for (i, (op, cap)) in ops.iter().enumerate() {
            if ops[..i].iter().any(|(o, _)| o.kind == op.kind) {
                return Err(OperatorSetError::Duplicate(op.id().to_string()));
            }
            if *cap == 0 {
                return Err(OperatorSetError::ZeroCap(op.id().to_string()));
            }
            if !(op.weight.is_finite() && op.weight >= 0.0) {
                return Err(OperatorSetError::BadWeight(op.id().to_string()));
            }
            match op.arity() {
                Arity::Unary => {
                    unary.push(*op);
                    ucaps.push(*cap);
                }
                Arity::Binary => {
                    binary.push(*op);
                    bcaps.push(*cap);
                }
            }
        }
        ucaps.extend(bcaps);
        Ok(OperatorSet { unary, binary, caps: ucaps })
    }

    /// Parses a comma-separated list such as `+,*,sqrt,cbrt`, every operator
    /// with weight 1 and the given cap.
    pub fn parse(list: &str, cap: u32) -> Result<Self, OperatorSetError> {
        let ops = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                OpKind::from_symbol(s)
                    .map(|k| (Operator::new(k), cap))
                    .ok_or_else(|| OperatorSetError::Unknown(s.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(ops)
    }

    /// `+, *, sqrt, cbrt`, each capped at 3.
    pub fn exoplanet() -> Self {
        Self::parse("+,*,sqrt,cbrt", DEFAULT_OP_CAP).expect("builtin operator list")
    }

    /// The exoplanet set plus `-`.
    pub fn pendulum() -> Self {
        Self::parse("+,-,*,sqrt,cbrt", DEFAULT_OP_CAP).expect("builtin operator list")
    }

    pub fn unary(&self) -> &[Operator] {
        &self.unary
    }

    pub fn binary(&self) -> &[Operator] {
        &self.binary
    }

    pub fn len(&self) -> usize {
        self.unary.len() + self.binary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, index: usize) -> &Operator {
        if index < self.unary.len() {
            &self.unary[index]
        } else {
            &self.binary[index - self.unary.len()]
        }
    }

    pub fn cap(&self, index: usize) -> u32 {
        self.caps[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Operator> {
        self.unary.iter().chain(self.binary.iter())
    }

    pub fn index_of(&self, kind: OpKind) -> Option<usize> {
        self.iter().position(|o| o.kind == kind)
    }

    /// Comma-separated operator ids, in registry order.
    pub fn ids(&self) -> String {
        self.iter().map(Operator::id).collect::<Vec<_>>().join(",")
    }

    /// Returns a copy with every cap replaced by `cap`.
    pub fn with_uniform_cap(&self, cap: u32) -> Self {
        let mut out = self.clone();
        out.caps.iter_mut().for_each(|c| *c = cap);
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("operator `{op}` applied outside its domain")]
    DomainViolation { op: OpKind },
    #[error("intermediate value exceeds magnitude bound {bound}")]
    Overflow { bound: f64 },
    #[error("variable index {index} out of range for input of length {len}")]
    VariableOutOfRange { index: usize, len: usize },
    #[error("operator `{0}` is not in the operator set")]
    UnknownOperator(OpKind),
}

/// A concrete expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Unary(OpKind, Box<Expr>),
    Binary(OpKind, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    pub fn unary(op: OpKind, child: Expr) -> Expr {
        debug_assert_eq!(op.arity(), Arity::Unary);
        Expr::Unary(op, Box::new(child))
    }

    pub fn binary(op: OpKind, left: Expr, right: Expr) -> Expr {
        debug_assert_eq!(op.arity(), Arity::Binary);
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Expr::Const(_) | Expr::Var(_))
    }

    /// Checks arity and variable-range invariants.
    pub fn is_well_formed(&self, n_vars: usize) -> bool {
        match self {
            Expr::Const(v) => v.is_finite(),
            Expr::Var(d) => *d < n_vars,
            Expr::Unary(op, c) => op.arity() == Arity::Unary && c.is_well_formed(n_vars),
            Expr::Binary(op, l, r) => {
                op.arity() == Arity::Binary && l.is_well_formed(n_vars) && r.is_well_formed(n_vars)
            }
        }
    }

    /// Evaluates at `x` with the default magnitude bound.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.evaluate_bounded(x, DEFAULT_MAGNITUDE_BOUND)
    }

    pub fn evaluate_bounded(&self, x: &[f64], bound: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(v) => *v,
            Expr::Var(d) => *x.get(*d).ok_or(EvalError::VariableOutOfRange {
                index: *d,
                len: x.len(),
            })?,
            Expr::Unary(op, c) => {
                let a = c.evaluate_bounded(x, bound)?;
                op.apply1(a).ok_or(EvalError::DomainViolation { op: *op })?
            }
            Expr::Binary(op, l, r) => {
                let a = l.evaluate_bounded(x, bound)?;
                let b = r.evaluate_bounded(x, bound)?;
                op.apply2(a, b).ok_or(EvalError::DomainViolation { op: *op })?
            }
        };
        if v.is_nan() {
            return Err(EvalError::DomainViolation {
                op: self.root_op().unwrap_or(OpKind::Add),
            });
        }
        if v.abs() > bound {
            return Err(EvalError::Overflow { bound });
        }
        Ok(v)
    }

    fn root_op(&self) -> Option<OpKind> {
        match self {
            Expr::Unary(op, _) | Expr::Binary(op, _, _) => Some(*op),
            _ => None,
        }
    }

    /// Number of nodes in the tree.
    pub fn complexity(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, c) => 1 + c.complexity(),
            Expr::Binary(_, l, r) => 1 + l.complexity() + r.complexity(),
        }
    }

    /// Sum of operator weights over operator nodes; leaves contribute nothing.
    pub fn weighted_complexity(&self, ops: &OperatorSet) -> Result<f64, EvalError> {
        match self {
            Expr::Const(_) | Expr::Var(_) => Ok(0.0),
            Expr::Unary(op, c) => Ok(op_weight(ops, *op)? + c.weighted_complexity(ops)?),
            Expr::Binary(op, l, r) => Ok(op_weight(ops, *op)?
                + l.weighted_complexity(ops)?
                + r.weighted_complexity(ops)?),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 0,
            Expr::Unary(_, c) => 1 + c.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    pub fn count_constants(&self) -> usize {
        match self {
            Expr::Const(_) => 1,
            Expr::Var(_) => 0,
            Expr::Unary(_, c) => c.count_constants(),
            Expr::Binary(_, l, r) => l.count_constants() + r.count_constants(),
        }
    }

    /// Constant values in left-to-right (pre-order) leaf order.
    pub fn constants(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |e| {
            if let Expr::Const(v) = e {
                out.push(*v)
            }
        });
        out
    }

    /// Replaces constants, in left-to-right order, with `values`.
    pub fn with_constants(&self, values: &[f64]) -> Expr {
        let mut it = values.iter().copied();
        let out = self.map_constants(&mut it);
        debug_assert!(it.next().is_none(), "too many constant values");
        out
    }

    fn map_constants(&self, it: &mut impl Iterator<Item = f64>) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(it.next().unwrap_or(*v)),
            Expr::Var(d) => Expr::Var(*d),
            Expr::Unary(op, c) => Expr::Unary(*op, Box::new(c.map_constants(it))),
            Expr::Binary(op, l, r) => {
                let l = l.map_constants(it);
                let r = r.map_constants(it);
                Expr::Binary(*op, Box::new(l), Box::new(r))
            }
        }
    }

    fn visit_leaves(&self, f: &mut impl FnMut(&Expr)) {
        match self {
            Expr::Const(_) | Expr::Var(_) => f(self),
            Expr::Unary(_, c) => c.visit_leaves(f),
            Expr::Binary(_, l, r) => {
                l.visit_leaves(f);
                r.visit_leaves(f);
            }
        }
    }

    /// Operators used, with multiplicity.
    pub fn operators(&self) -> Vec<OpKind> {
        let mut out = Vec::new();
        self.collect_ops(&mut out);
        out
    }

    fn collect_ops(&self, out: &mut Vec<OpKind>) {
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Unary(op, c) => {
                out.push(*op);
                c.collect_ops(out);
            }
            Expr::Binary(op, l, r) => {
                out.push(*op);
                l.collect_ops(out);
                r.collect_ops(out);
            }
        }
    }

    /// Replaces every operator subtree whose leaves are all constants by a
    /// single constant holding its value.
    pub fn fold_constants(&self) -> Result<Expr, EvalError> {
        self.fold_bounded(DEFAULT_MAGNITUDE_BOUND)
    }

    pub fn fold_bounded(&self, bound: f64) -> Result<Expr, EvalError> {
        match self {
            Expr::Const(_) | Expr::Var(_) => Ok(self.clone()),
            Expr::Unary(op, c) => {
                let c = c.fold_bounded(bound)?;
                if let Expr::Const(a) = c {
                    return Expr::Const(a).unary_value(*op, bound).map(Expr::Const);
                }
                Ok(Expr::Unary(*op, Box::new(c)))
            }
            Expr::Binary(op, l, r) => {
                let l = l.fold_bounded(bound)?;
                let r = r.fold_bounded(bound)?;
                if let (Expr::Const(_), Expr::Const(_)) = (&l, &r) {
                    let folded = Expr::Binary(*op, Box::new(l), Box::new(r));
                    return folded.evaluate_bounded(&[], bound).map(Expr::Const);
                }
                Ok(Expr::Binary(*op, Box::new(l), Box::new(r)))
            }
        }
    }

    fn unary_value(self, op: OpKind, bound: f64) -> Result<f64, EvalError> {
        Expr::Unary(op, Box::new(self)).evaluate_bounded(&[], bound)
    }
}

fn op_weight(ops: &OperatorSet, kind: OpKind) -> Result<f64, EvalError> {
    ops.iter()
        .find(|o| o.kind == kind)
        .map(|o| o.weight)
        .ok_or(EvalError::UnknownOperator(kind))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::text::render(self, &[]))
    }
}

#[cfg(test)]
pub(crate) use tests::figure_tree;

#[cfg(test)]
mod tests {
    use super::*;

    /// `2*(w1+w2)^3+1`, shaped like the worked example tree.
    pub(crate) fn figure_tree() -> Expr {
        Expr::binary(
            OpKind::Add,
            Expr::binary(
                OpKind::Mul,
                Expr::constant(2.0),
                Expr::binary(
                    OpKind::Pow,
                    Expr::binary(OpKind::Add, Expr::var(0), Expr::var(1)),
                    Expr::constant(3.0),
                ),
            ),
            Expr::constant(1.0),
        )
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(figure_tree().evaluate(&[1.0, 1.0]).unwrap(), 17.0);
        assert_eq!(Expr::var(0).evaluate(&[3.5, 0.0]).unwrap(), 3.5);
        let bad = Expr::unary(OpKind::Sqrt, Expr::constant(-4.0));
        assert_eq!(
            bad.evaluate(&[]),
            Err(EvalError::DomainViolation { op: OpKind::Sqrt })
        );
    }

    #[test]
    fn evaluate_overflow_and_range() {
        let big = Expr::binary(OpKind::Mul, Expr::var(0), Expr::var(0));
        assert!(matches!(big.evaluate(&[1e5]), Err(EvalError::Overflow { .. })));
        assert!(big.evaluate(&[1e3]).is_ok());
        assert!(matches!(
            Expr::var(2).evaluate(&[1.0]),
            Err(EvalError::VariableOutOfRange { index: 2, len: 1 })
        ));
        let div = Expr::binary(OpKind::Div, Expr::var(0), Expr::constant(0.0));
        assert!(matches!(div.evaluate(&[1.0]), Err(EvalError::DomainViolation { .. })));
    }

    #[test]
    fn cbrt_is_total() {
        let e = Expr::unary(OpKind::Cbrt, Expr::constant(-8.0));
        assert_eq!(e.evaluate(&[]).unwrap(), -2.0);
    }

    #[test]
    fn complexity_examples() {
        assert_eq!(Expr::var(0).complexity(), 1);
        assert_eq!(figure_tree().complexity(), 9);
        let e = Expr::binary(OpKind::Add, Expr::var(0), Expr::constant(2.0));
        assert_eq!(e.complexity(), 3);
    }

    #[test]
    fn weighted_complexity_examples() {
        let ops = OperatorSet::parse("+,*,pow", 3).unwrap();
        assert_eq!(Expr::var(0).weighted_complexity(&ops).unwrap(), 0.0);
        assert_eq!(figure_tree().weighted_complexity(&ops).unwrap(), 4.0);

        let heavy = OperatorSet::new(vec![(Operator::with_weight(OpKind::Add, 2.0), 3)]).unwrap();
        let e = Expr::binary(OpKind::Add, Expr::var(0), Expr::var(1));
        assert_eq!(e.weighted_complexity(&heavy).unwrap(), 2.0);

        let missing = OperatorSet::parse("+", 3).unwrap();
        assert_eq!(
            figure_tree().weighted_complexity(&missing),
            Err(EvalError::UnknownOperator(OpKind::Mul))
        );
    }

    #[test]
    fn fold_examples() {
        let e = Expr::binary(OpKind::Add, Expr::constant(1.0), Expr::constant(2.0));
        assert_eq!(e.fold_constants().unwrap(), Expr::constant(3.0));
        assert_eq!(Expr::var(0).fold_constants().unwrap(), Expr::var(0));
        assert_eq!(figure_tree().fold_constants().unwrap(), figure_tree());
        let bad = Expr::unary(OpKind::Sqrt, Expr::constant(-1.0));
        assert!(bad.fold_constants().is_err());
    }

    #[test]
    fn operator_set_rules() {
        assert!(matches!(
            OperatorSet::parse("+,+", 3),
            Err(OperatorSetError::Duplicate(_))
        ));
        assert!(matches!(OperatorSet::parse("+,exp", 3), Err(OperatorSetError::Unknown(_))));
        assert!(matches!(OperatorSet::parse("+", 0), Err(OperatorSetError::ZeroCap(_))));
        let ops = OperatorSet::exoplanet();
        assert_eq!(ops.len(), 4);
        // unary first
        assert_eq!(ops.get(0).kind, OpKind::Sqrt);
        assert_eq!(ops.get(2).kind, OpKind::Add);
        assert_eq!(ops.ids(), "sqrt,cbrt,+,*");
        assert_eq!(OperatorSet::pendulum().index_of(OpKind::Sub), Some(3));
    }

    #[test]
    fn constants_roundtrip_order() {
        let e = Expr::binary(
            OpKind::Add,
            Expr::binary(OpKind::Mul, Expr::constant(1.0), Expr::var(0)),
            Expr::constant(2.0),
        );
        assert_eq!(e.constants(), vec![1.0, 2.0]);
        assert_eq!(e.with_constants(&[5.0, 6.0]).constants(), vec![5.0, 6.0]);
    }
}
