use crate::expr::Expr;

/// Key invariant under swapping the children of commutative operators.
///
/// Keys are prefix-free strings whose lexicographic order puts constants
/// first, then variables by index, then operator-rooted subtrees (by
/// operator rank, then children). Children of commutative nodes are sorted
/// by key before concatenation.
pub fn canonical_key(expr: &Expr) -> String {
    match expr {
        Expr::Const(v) => format!("0:{v:e};"),
        Expr::Var(d) => format!("1:{d:03}"),
        Expr::Unary(op, c) => format!("2{:02}({})", op.rank(), canonical_key(c)),
        Expr::Binary(op, l, r) => {
            let (mut kl, mut kr) = (canonical_key(l), canonical_key(r));
            if op.is_commutative() && kl > kr {
                std::mem::swap(&mut kl, &mut kr);
            }
            format!("2{:02}({},{})", op.rank(), kl, kr)
        }
    }
}

/// Key of the structure: like [`canonical_key`] but with every constant
/// treated as the same placeholder.
pub fn structure_key(expr: &Expr) -> String {
    canonical_key(&expr.with_constants(&vec![0.0; expr.count_constants()]))
}

/// Returns the tree with the children of every commutative node ordered by
/// key, i.e. the representative kept by symmetry breaking.
pub fn canonicalize(expr: &Expr) -> Expr {
    match expr {
        Expr::Const(_) | Expr::Var(_) => expr.clone(),
        Expr::Unary(op, c) => Expr::unary(*op, canonicalize(c)),
        Expr::Binary(op, l, r) => {
            let (l, r) = (canonicalize(l), canonicalize(r));
            if op.is_commutative() && structure_key(&l) > structure_key(&r) {
                Expr::binary(*op, r, l)
            } else {
                Expr::binary(*op, l, r)
            }
        }
    }
}
