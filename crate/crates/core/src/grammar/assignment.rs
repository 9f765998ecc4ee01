use std::fmt;

use crate::expr::{Arity, Expr};

use super::{Grammar, GrammarError};

/// What a template node holds in a (partial) structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Inactive,
    /// Operator by index into the grammar's operator set.
    Op(usize),
    Var(usize),
    Const,
}

/// The decision variables of the structure space, in indicator form.
///
/// `u[n]` marks node `n` active, `z[n][o]` assigns operator `o`, `w[n][d]`
/// assigns variable `d`, `q[n]` assigns a constant whose value is `c[n]`.
/// `None` is an unset entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub u: Vec<Option<bool>>,
    pub z: Vec<Vec<Option<bool>>>,
    pub w: Vec<Vec<Option<bool>>>,
    pub q: Vec<Option<bool>>,
    pub c: Vec<f64>,
}

impl Assignment {
    pub fn unset(nodes: usize, ops: usize, vars: usize) -> Self {
        Assignment {
            u: vec![None; nodes],
            z: vec![vec![None; ops]; nodes],
            w: vec![vec![None; vars]; nodes],
            q: vec![None; nodes],
            c: vec![0.0; nodes],
        }
    }

    /// Indicator form of per-node labels. Undecided nodes stay unset.
    pub fn from_labels(labels: &[Option<Label>], ops: usize, vars: usize, values: &[f64]) -> Self {
        let mut a = Assignment::unset(labels.len(), ops, vars);
        for (n, label) in labels.iter().enumerate() {
            let Some(label) = label else { continue };
            a.u[n] = Some(*label != Label::Inactive);
            a.q[n] = Some(*label == Label::Const);
            for o in 0..ops {
                a.z[n][o] = Some(*label == Label::Op(o));
            }
            for d in 0..vars {
                a.w[n][d] = Some(*label == Label::Var(d));
            }
            if let Some(v) = values.get(n) {
                a.c[n] = *v;
            }
        }
        a
    }

    pub fn is_fully_set(&self) -> bool {
        self.u.iter().chain(&self.q).all(Option::is_some)
            && self.z.iter().chain(&self.w).flatten().all(Option::is_some)
    }

    /// Reads the label of node `n`, if its entries are set and pick exactly
    /// one of inactive / operator / variable / constant.
    pub fn label(&self, n: usize) -> Option<Label> {
        let u = self.u[n]?;
        let q = self.q[n]?;
        let ops: Vec<usize> = indices(&self.z[n])?;
        let vars: Vec<usize> = indices(&self.w[n])?;
        match (u, q, ops.as_slice(), vars.as_slice()) {
            (false, false, [], []) => Some(Label::Inactive),
            (true, true, [], []) => Some(Label::Const),
            (true, false, [o], []) => Some(Label::Op(*o)),
            (true, false, [], [d]) => Some(Label::Var(*d)),
            _ => None,
        }
    }
}

fn indices(v: &[Option<bool>]) -> Option<Vec<usize>> {
    let mut out = Vec::new();
    for (i, x) in v.iter().enumerate() {
        if (*x)? {
            out.push(i);
        }
    }
    Some(out)
}

/// A violated constraint of the structure space.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Dimensions,
    Unset { node: usize },
    EqOps { node: usize },
    SuccessorBinary { node: usize },
    SuccessorUnary { node: usize },
    LeafOperator { node: usize },
    RootActive,
    ExtraConstantChildren { node: usize },
    Multiplicity { op: usize, count: u32, cap: u32 },
    MaxConstants { count: usize, max: usize },
}

impl Violation {
    /// Constraint family identifier.
    pub fn family(&self) -> &'static str {
        match self {
            Violation::Dimensions => "dimensions",
            Violation::Unset { .. } => "unset",
            Violation::EqOps { .. } => "eq-ops",
            Violation::SuccessorBinary { .. } => "successor-binary",
            Violation::SuccessorUnary { .. } => "successor-unary",
            Violation::LeafOperator { .. } => "leaf-operator",
            Violation::RootActive => "root-active",
            Violation::ExtraConstantChildren { .. } => "extra-constant-children",
            Violation::Multiplicity { .. } => "multiplicity",
            Violation::MaxConstants { .. } => "max-constants",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unset { node }
            | Violation::EqOps { node }
            | Violation::SuccessorBinary { node }
            | Violation::SuccessorUnary { node }
            | Violation::LeafOperator { node }
            | Violation::ExtraConstantChildren { node } => {
                write!(f, "{} at node {node}", self.family())
            }
            Violation::Multiplicity { op, count, cap } => {
                write!(f, "multiplicity: operator #{op} used {count} times (cap {cap})")
            }
            Violation::MaxConstants { count, max } => {
                write!(f, "max-constants: {count} constants (max {max})")
            }
            _ => f.write_str(self.family()),
        }
    }
}

fn bit(x: Option<bool>) -> u32 {
    u32::from(x.unwrap_or(false))
}

impl Grammar {
    /// Checks every constraint family on a fully set assignment. An empty
    /// result means the assignment encodes a valid expression tree.
    pub fn validate(&self, a: &Assignment) -> Vec<Violation> {
        let nodes = self.template.len();
        let n_ops = self.ops.len();
        let n_unary = self.ops.unary().len();
        let dims_ok = a.u.len() == nodes
            && a.q.len() == nodes
            && a.c.len() == nodes
            && a.z.len() == nodes
            && a.w.len() == nodes
            && a.z.iter().all(|r| r.len() == n_ops)
            && a.w.iter().all(|r| r.len() == self.n_vars);
        if !dims_ok {
            return vec![Violation::Dimensions];
        }

        let mut out = Vec::new();
        let unset: Vec<bool> = (0..nodes)
            .map(|n| {
                a.u[n].is_none()
                    || a.q[n].is_none()
                    || a.z[n].iter().any(Option::is_none)
                    || a.w[n].iter().any(Option::is_none)
            })
            .collect();
        for (n, &flag) in unset.iter().enumerate() {
            if flag {
                out.push(Violation::Unset { node: n });
            }
        }

        let mut op_counts = vec![0u32; n_ops];
        for n in 0..nodes {
            if unset[n] {
                continue;
            }
            let z_sum: u32 = a.z[n].iter().map(|x| bit(*x)).sum();
            let z_binary: u32 = a.z[n][n_unary..].iter().map(|x| bit(*x)).sum();
            let w_sum: u32 = a.w[n].iter().map(|x| bit(*x)).sum();
            if bit(a.q[n]) + w_sum + z_sum != bit(a.u[n]) {
                out.push(Violation::EqOps { node: n });
            }
            for (o, x) in a.z[n].iter().enumerate() {
                op_counts[o] += bit(*x);
            }
            match self.template.children(n) {
                None => {
                    if z_sum > 0 {
                        out.push(Violation::LeafOperator { node: n });
                    }
                }
                Some((l, r)) => {
                    if !unset[r] && bit(a.u[r]) != z_binary {
                        out.push(Violation::SuccessorBinary { node: n });
                    }
                    if !unset[l] && bit(a.u[l]) != z_sum {
                        out.push(Violation::SuccessorUnary { node: n });
                    }
                    if !unset[l] && !unset[r] && z_sum > 0 {
                        let const_left = bit(a.q[l]) == 1;
                        let const_right = bit(a.q[r]) == 1;
                        let unary_const = z_binary == 0 && const_left;
                        if unary_const || (z_binary > 0 && const_left && const_right) {
                            out.push(Violation::ExtraConstantChildren { node: n });
                        }
                    }
                }
            }
        }
        if !unset[0] && bit(a.u[0]) != 1 {
            out.push(Violation::RootActive);
        }
        for (o, &count) in op_counts.iter().enumerate() {
            let cap = self.ops.cap(o);
            if count > cap {
                out.push(Violation::Multiplicity { op: o, count, cap });
            }
        }
        if let Some(max) = self.max_constants {
            let count = a.q.iter().filter(|x| **x == Some(true)).count();
            if count > max {
                out.push(Violation::MaxConstants { count, max });
            }
        }
        out
    }

    /// Builds the expression tree over the active nodes.
    pub fn decode(&self, a: &Assignment) -> Result<Expr, GrammarError> {
        let violations = self.validate(a);
        if !violations.is_empty() {
            return Err(GrammarError::InvalidAssignment(violations));
        }
        Ok(self.decode_node(a, 0))
    }

    fn decode_node(&self, a: &Assignment, n: usize) -> Expr {
        match a.label(n) {
            Some(Label::Const) => Expr::Const(a.c[n]),
            Some(Label::Var(d)) => Expr::Var(d),
            Some(Label::Op(o)) => {
                let op = self.ops.get(o).kind;
                let (l, r) = self.template.children(n).expect("validated: operator at non-leaf");
                match op.arity() {
                    Arity::Unary => Expr::unary(op, self.decode_node(a, l)),
                    Arity::Binary => {
                        Expr::binary(op, self.decode_node(a, l), self.decode_node(a, r))
                    }
                }
            }
            Some(Label::Inactive) | None => unreachable!("validated: active node has a label"),
        }
    }

    /// Labels of the template nodes when `expr` is placed at the root, plus
    /// the constant values per node.
    pub fn labels_of(&self, expr: &Expr) -> Result<(Vec<Option<Label>>, Vec<f64>), GrammarError> {
        let nodes = self.template.len();
        let mut labels = vec![Some(Label::Inactive); nodes];
        let mut values = vec![0.0; nodes];
        self.place(expr, 0, &mut labels, &mut values)?;
        Ok((labels, values))
    }

    fn place(
        &self,
        expr: &Expr,
        n: usize,
        labels: &mut [Option<Label>],
        values: &mut [f64],
    ) -> Result<(), GrammarError> {
        match expr {
            Expr::Const(v) => {
                labels[n] = Some(Label::Const);
                values[n] = *v;
            }
            Expr::Var(d) => {
                if *d >= self.n_vars {
                    return Err(GrammarError::VariableOutOfRange { index: *d, vars: self.n_vars });
                }
                labels[n] = Some(Label::Var(*d));
            }
            Expr::Unary(op, c) | Expr::Binary(op, c, _) => {
                let o = self.ops.index_of(*op).ok_or(GrammarError::UnknownOperator(*op))?;
                let (l, r) = self.template.children(n).ok_or(GrammarError::DoesNotFit)?;
                labels[n] = Some(Label::Op(o));
                self.place(c, l, labels, values)?;
                if let Expr::Binary(_, _, right) = expr {
                    self.place(right, r, labels, values)?;
                }
            }
        }
        Ok(())
    }

    /// Indicator-form assignment encoding `expr`. Inverse of [`Grammar::decode`].
    pub fn encode(&self, expr: &Expr) -> Result<Assignment, GrammarError> {
        let (labels, values) = self.labels_of(expr)?;
        Ok(Assignment::from_labels(&labels, self.ops.len(), self.n_vars, &values))
    }
}
