use std::collections::HashMap;

use crate::expr::{Arity, Expr};

use super::{Grammar, GrammarError};

/// Counts above this are reported as [`GrammarError::TooLarge`].
pub const COUNT_GUARD: u64 = 1_000_000_000;

/// Subtree census key: operator usage (empty when no operator is capped
/// below the template size), constants used, root is a constant.
type Census = HashMap<(Vec<u8>, u8, bool), u128>;

impl Grammar {
    /// Exact number of valid complete assignments on the template, before
    /// symmetry reduction, honoring caps, the constant-children exclusions
    /// and the constant limit. Computed by a recursion over template
    /// levels that tracks operator usage and constants per subtree.
    pub fn count_structures(&self) -> Result<u64, GrammarError> {
        let n_ops = self.ops.len();
        let nodes = self.template.len() as u32;
        let tracked: Vec<usize> = (0..n_ops).filter(|&o| self.ops.cap(o) < nodes).collect();
        let const_cap = self.max_constants.unwrap_or(usize::MAX).min(255) as u8;
        let constants_on = self.max_constants != Some(0);

        let mut level: Census = HashMap::new();
        let zero = vec![0u8; tracked.len()];
        for _ in 0..self.n_vars {
            *level.entry((zero.clone(), 0, false)).or_default() += 1;
        }
        if constants_on {
            *level.entry((zero.clone(), 1, true)).or_default() += 1;
        }
        let leaves = level.clone();

        for _ in 0..self.template.depth() {
            let below = level;
            let mut next = leaves.clone();
            for o in 0..n_ops {
                let slot = tracked.iter().position(|&t| t == o);
                let bump = |usage: &[u8]| -> Option<Vec<u8>> {
                    let mut u = usage.to_vec();
                    if let Some(s) = slot {
                        u[s] += 1;
                        if u32::from(u[s]) > self.ops.cap(o) {
                            return None;
                        }
                    }
                    Some(u)
                };
                match self.ops.get(o).arity() {
                    Arity::Unary => {
                        for ((usage, k, is_const), count) in &below {
                            if *is_const {
                                continue;
                            }
                            if let Some(u) = bump(usage) {
                                *next.entry((u, *k, false)).or_default() += count;
                            }
                        }
                    }
                    Arity::Binary => {
                        for ((ul, kl, cl), nl) in &below {
                            for ((ur, kr, cr), nr) in &below {
                                if *cl && *cr {
                                    continue;
                                }
                                let k = kl + kr;
                                if k > const_cap {
                                    continue;
                                }
                                let mut sum: Vec<u8> =
                                    ul.iter().zip(ur).map(|(a, b)| a + b).collect();
                                if tracked
                                    .iter()
                                    .zip(&sum)
                                    .any(|(&t, &c)| u32::from(c) > self.ops.cap(t))
                                {
                                    continue;
                                }
                                let Some(u) = bump(&sum) else { continue };
                                sum = u;
                                *next.entry((sum, k, false)).or_default() += nl * nr;
                            }
                        }
                    }
                }
            }
            let total: u128 = next.values().sum();
            if total > u128::from(COUNT_GUARD) * 16 {
                return Err(GrammarError::TooLarge { limit: COUNT_GUARD });
            }
            level = next;
        }
        let total: u128 = level.values().sum();
        if total >= u128::from(COUNT_GUARD) {
            return Err(GrammarError::TooLarge { limit: COUNT_GUARD });
        }
        Ok(total as u64)
    }

    /// Every valid expression on the template, enumerated directly by
    /// recursion over subtree heights (no symmetry reduction). Fails with
    /// `TooLarge` once more than `limit` trees would be produced.
    pub fn enumerate_exprs(&self, limit: usize) -> Result<Vec<Expr>, GrammarError> {
        let too_large = || GrammarError::TooLarge { limit: limit as u64 };
        let mut leaves: Vec<Expr> = (0..self.n_vars).map(Expr::Var).collect();
        if self.max_constants != Some(0) {
            leaves.push(Expr::Const(0.0));
        }
        let mut trees = leaves.clone();
        for _ in 0..self.template.depth() {
            let below = trees;
            trees = leaves.clone();
            for op in self.ops.iter() {
                match op.arity() {
                    Arity::Unary => {
                        for c in below.iter().filter(|c| !matches!(c, Expr::Const(_))) {
                            trees.push(Expr::unary(op.kind, c.clone()));
                        }
                    }
                    Arity::Binary => {
                        for l in &below {
                            for r in &below {
                                if matches!((l, r), (Expr::Const(_), Expr::Const(_))) {
                                    continue;
                                }
                                if trees.len() > limit.saturating_mul(8) {
                                    return Err(too_large());
                                }
                                trees.push(Expr::binary(op.kind, l.clone(), r.clone()));
                            }
                        }
                    }
                }
            }
        }
        trees.retain(|t| self.within_limits(t));
        if trees.len() > limit {
            return Err(too_large());
        }
        Ok(trees)
    }

    /// Caps and constant limit.
    pub fn within_limits(&self, expr: &Expr) -> bool {
        if self.max_constants.is_some_and(|m| expr.count_constants() > m) {
            return false;
        }
        let used = expr.operators();
        (0..self.ops.len()).all(|o| {
            let kind = self.ops.get(o).kind;
            used.iter().filter(|&&k| k == kind).count() as u32 <= self.ops.cap(o)
        })
    }
}
