use std::cmp::Ordering;

use crate::expr::{Arity, Expr};

use super::assignment::{Assignment, Label};
use super::canonical::structure_key;
use super::{Grammar, GrammarError};

/// A structure under construction. Nodes are decided in breadth-first
/// order; every node before `next` carries a label, every node from `next`
/// on is undecided.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialAssignment {
    labels: Vec<Option<Label>>,
    next: usize,
    op_counts: Vec<u32>,
    constants: usize,
    active: usize,
    op_weight: f64,
}

impl PartialAssignment {
    pub fn labels(&self) -> &[Option<Label>] {
        &self.labels
    }

    pub fn label(&self, n: usize) -> Option<Label> {
        self.labels[n]
    }

    /// The next node to decide, if any.
    pub fn next_node(&self) -> Option<usize> {
        (self.next < self.labels.len()).then_some(self.next)
    }

    pub fn is_complete(&self) -> bool {
        self.next >= self.labels.len()
    }

    pub fn op_count(&self, op: usize) -> u32 {
        self.op_counts[op]
    }

    pub fn constants(&self) -> usize {
        self.constants
    }

    /// Sum of weights of the operators placed so far.
    pub fn op_weight(&self) -> f64 {
        self.op_weight
    }

    pub fn to_assignment(&self, ops: usize, vars: usize) -> Assignment {
        Assignment::from_labels(&self.labels, ops, vars, &[])
    }
}

impl Grammar {
    /// The empty structure: nothing decided.
    pub fn root_partial(&self) -> PartialAssignment {
        PartialAssignment {
            labels: vec![None; self.template.len()],
            next: 0,
            op_counts: vec![0; self.ops.len()],
            constants: 0,
            active: 0,
            op_weight: 0.0,
        }
    }

    /// The complete partial assignment for `expr` placed at the root.
    pub fn partial_from_expr(&self, expr: &Expr) -> Result<PartialAssignment, GrammarError> {
        let (labels, _) = self.labels_of(expr)?;
        let mut p = self.root_partial();
        for (n, label) in labels.into_iter().enumerate() {
            self.set_label(&mut p, n, label.expect("labels_of sets every node"));
        }
        p.next = p.labels.len();
        Ok(p)
    }

    fn set_label(&self, p: &mut PartialAssignment, n: usize, label: Label) {
        p.labels[n] = Some(label);
        match label {
            Label::Inactive => return,
            Label::Op(o) => {
                p.op_counts[o] += 1;
                p.op_weight += self.ops.get(o).weight;
            }
            Label::Const => p.constants += 1,
            Label::Var(_) => {}
        }
        p.active += 1;
    }

    /// Expression encoded by a complete `p`, constants set to 0.
    pub fn structure_of(&self, p: &PartialAssignment) -> Expr {
        assert!(p.is_complete(), "structure_of needs a complete assignment");
        self.subtree_expr(&p.labels, self.template.root())
    }

    /// Whether node `n` must be active, decided by its predecessor's label.
    /// `None` while the predecessor is undecided.
    pub fn required_active(&self, p: &PartialAssignment, n: usize) -> Option<bool> {
        let Some(parent) = self.template.parent(n) else {
            return Some(true);
        };
        match p.labels[parent]? {
            Label::Op(o) => Some(match self.ops.get(o).arity() {
                Arity::Binary => true,
                Arity::Unary => self.template.is_left_child(n),
            }),
            _ => Some(false),
        }
    }

    /// Number of nodes every completion of `p` must activate: the active
    /// decided nodes plus the undecided nodes forced active by a decided
    /// predecessor.
    pub fn min_complexity(&self, p: &PartialAssignment) -> usize {
        let forced = (p.next..p.labels.len())
            .filter(|&n| self.required_active(p, n) == Some(true))
            .count();
        p.active + forced
    }

    fn constant_allowed(&self, p: &PartialAssignment, n: usize) -> bool {
        if self.max_constants.is_some_and(|max| p.constants >= max) {
            return false;
        }
        let Some(parent) = self.template.parent(n) else {
            return true;
        };
        match p.labels[parent] {
            Some(Label::Op(o)) => match self.ops.get(o).arity() {
                Arity::Unary => false,
                Arity::Binary => {
                    let sibling_is_const = !self.template.is_left_child(n)
                        && p.labels[n - 1] == Some(Label::Const);
                    !sibling_is_const
                }
            },
            _ => true,
        }
    }

    fn label_rank(&self, label: Label) -> (u8, usize) {
        match label {
            Label::Const => (0, 0),
            Label::Var(d) => (1, d),
            Label::Op(o) => (2, self.ops.get(o).kind.rank() as usize),
            Label::Inactive => (3, 0),
        }
    }

    /// Symmetry rule at the level of root labels: under a commutative
    /// parent, the right child may not rank below its left sibling.
    fn sibling_order_ok(&self, p: &PartialAssignment, n: usize, label: Label) -> bool {
        if !self.symmetry || self.template.is_left_child(n) {
            return true;
        }
        let Some(parent) = self.template.parent(n) else {
            return true;
        };
        let Some(Label::Op(o)) = p.labels[parent] else {
            return true;
        };
        if !self.ops.get(o).is_commutative() {
            return true;
        }
        let left = p.labels[n - 1].expect("left sibling decided before right");
        self.label_rank(left) <= self.label_rank(label)
    }

    /// Expression of a fully decided subtree, constants as placeholders.
    fn subtree_expr(&self, labels: &[Option<Label>], n: usize) -> Expr {
        match labels[n] {
            Some(Label::Const) => Expr::Const(0.0),
            Some(Label::Var(d)) => Expr::Var(d),
            Some(Label::Op(o)) => {
                let op = self.ops.get(o).kind;
                let (l, r) = self.template.children(n).expect("operator at non-leaf");
                match op.arity() {
                    Arity::Unary => Expr::unary(op, self.subtree_expr(labels, l)),
                    Arity::Binary => Expr::binary(
                        op,
                        self.subtree_expr(labels, l),
                        self.subtree_expr(labels, r),
                    ),
                }
            }
            Some(Label::Inactive) | None => panic!("subtree at node {n} is not decided"),
        }
    }

    /// Full-key symmetry check for commutative nodes whose two subtrees
    /// became decided while `next` advanced from `from` to `to`.
    fn completed_pairs_ok(&self, p: &PartialAssignment, from: usize, to: usize) -> bool {
        if !self.symmetry {
            return true;
        }
        for n in 0..self.template.first_leaf() {
            let Some(Label::Op(o)) = p.labels[n] else { continue };
            if !self.ops.get(o).is_commutative() {
                continue;
            }
            let (l, r) = self.template.children(n).expect("non-leaf");
            let last = self.template.last_descendant(r);
            if last < from || last >= to {
                continue;
            }
            if p.labels[l] != p.labels[r] || !matches!(p.labels[l], Some(Label::Op(_))) {
                continue;
            }
            let kl = structure_key(&self.subtree_expr(&p.labels, l));
            let kr = structure_key(&self.subtree_expr(&p.labels, r));
            if kl.cmp(&kr) == Ordering::Greater {
                return false;
            }
        }
        true
    }

    /// Labels admissible at the next node, in branching order: operators,
    /// variables, constant (or only `Inactive` when the node must be off).
    pub fn candidate_labels(&self, p: &PartialAssignment) -> Vec<Label> {
        let Some(n) = p.next_node() else {
            return Vec::new();
        };
        match self.required_active(p, n) {
            Some(false) => return vec![Label::Inactive],
            Some(true) => {}
            None => unreachable!("breadth-first order decides predecessors first"),
        }
        let mut out = Vec::new();
        if !self.template.is_leaf(n) {
            for o in 0..self.ops.len() {
                if p.op_counts[o] < self.ops.cap(o) {
                    out.push(Label::Op(o));
                }
            }
        }
        out.extend((0..self.n_vars).map(Label::Var));
        if self.constant_allowed(p, n) {
            out.push(Label::Const);
        }
        out.retain(|&label| self.sibling_order_ok(p, n, label));
        out
    }

    /// Children of `p`: the next node fixed to each admissible label, then
    /// every following node whose predecessor forces it off fixed to
    /// `Inactive`. Children breaking a successor rule, a cap, or the
    /// symmetry order are not emitted. The children partition the
    /// (symmetry-reduced) completions of `p`.
    pub fn branch(&self, p: &PartialAssignment) -> Vec<PartialAssignment> {
        let Some(n) = p.next_node() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for label in self.candidate_labels(p) {
            let mut child = p.clone();
            self.set_label(&mut child, n, label);
            child.next = n + 1;
            while child.next < child.labels.len()
                && self.required_active(&child, child.next) == Some(false)
            {
                child.labels[child.next] = Some(Label::Inactive);
                child.next += 1;
            }
            if self.completed_pairs_ok(&child, n, child.next) {
                out.push(child);
            }
        }
        out
    }
}
