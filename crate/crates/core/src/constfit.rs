//! Fitting the constants of a fixed structure to minimize the relative
//! squared error, and interval branch-and-bound certification that no
//! constants in the box meet the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{expr_interval, ratio_gap, Interval, DEFAULT_CONST_BOX};
use crate::data::Dataset;
use crate::expr::{Expr, OpKind, DEFAULT_MAGNITUDE_BOUND};
use crate::grammar::structure_key;

/// Per-dimension starting values of the multistart descent.
pub const START_GRID: [f64; 13] = [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 5.0, -5.0, 10.0, -10.0, 50.0, -50.0];
pub const MAX_STARTS: usize = 200;
pub const MAX_ITERATIONS: usize = 100;
pub const STEP_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_CERT_BUDGET: usize = 100_000;
const SNAP_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("target value of observation {0} is zero")]
    ZeroTarget(usize),
    #[error("structure has no domain-valid evaluation for any constants in the box")]
    NeverEvaluable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitStatus {
    Feasible,
    /// No constants in the box reach the tolerance (proven).
    InfeasibleCertified,
    /// Local search failed and certification ran out of budget.
    InfeasibleHeuristic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub constants: Vec<f64>,
    pub residual: f64,
    pub status: FitStatus,
    /// Proven lower bound on the residual over the box, when certified.
    pub lower_bound: Option<f64>,
    pub cert_boxes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub const_box: f64,
    pub magnitude: f64,
    pub cert_budget: usize,
    pub seed: u64,
    pub parallel: bool,
    pub snap: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            const_box: DEFAULT_CONST_BOX,
            magnitude: DEFAULT_MAGNITUDE_BOUND,
            cert_budget: DEFAULT_CERT_BUDGET,
            seed: 42,
            parallel: false,
            snap: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Instr {
    Const(usize),
    Var(usize),
    Unary(OpKind),
    Binary(OpKind),
}

/// Postfix program for an expression with its constants as parameters;
/// evaluates values and forward-mode gradients in the constants.
#[derive(Debug, Clone)]
pub struct Tape {
    code: Vec<Instr>,
    n_consts: usize,
}

impl Tape {
    pub fn compile(expr: &Expr) -> Tape {
        let mut t = Tape {
            code: Vec::new(),
            n_consts: 0,
        };
        t.emit(expr);
        t
    }

    fn emit(&mut self, e: &Expr) {
        match e {
            Expr::Const(_) => {
                self.code.push(Instr::Const(self.n_consts));
                self.n_consts += 1;
            }
            Expr::Var(d) => self.code.push(Instr::Var(*d)),
            Expr::Unary(op, c) => {
                self.emit(c);
                self.code.push(Instr::Unary(*op));
            }
            Expr::Binary(op, l, r) => {
                self.emit(l);
                self.emit(r);
                self.code.push(Instr::Binary(*op));
            }
        }
    }

    pub fn n_consts(&self) -> usize {
        self.n_consts
    }

    /// Value at `x`; `None` on a domain violation or a value beyond `bound`.
    pub fn eval(&self, x: &[f64], c: &[f64], bound: f64) -> Option<f64> {
        let mut stack: Vec<f64> = Vec::with_capacity(8);
        for ins in &self.code {
            let v = match *ins {
                Instr::Const(i) => c[i],
                Instr::Var(d) => x[d],
                Instr::Unary(op) => op.apply1(stack.pop()?)?,
                Instr::Binary(op) => {
                    let b = stack.pop()?;
                    let a = stack.pop()?;
                    op.apply2(a, b)?
                }
            };
            if v.is_nan() || v.abs() > bound {
                return None;
            }
            stack.push(v);
        }
        stack.pop()
    }

    /// Value and gradient with respect to the constants, written to `grad`.
    pub fn eval_grad(&self, x: &[f64], c: &[f64], bound: f64, grad: &mut [f64]) -> Option<f64> {
        let k = self.n_consts;
        let mut vals: Vec<f64> = Vec::with_capacity(8);
        let mut grads: Vec<f64> = Vec::with_capacity(8 * k.max(1));
        for ins in &self.code {
            match *ins {
                Instr::Const(i) => {
                    vals.push(c[i]);
                    grads.extend((0..k).map(|j| if j == i { 1.0 } else { 0.0 }));
                }
                Instr::Var(d) => {
                    vals.push(x[d]);
                    grads.extend(std::iter::repeat_n(0.0, k));
                }
                Instr::Unary(op) => {
                    let a = *vals.last()?;
                    let v = op.apply1(a)?;
                    let da = match op {
                        OpKind::Sqrt => 0.5 / v,
                        OpKind::Cbrt => 1.0 / (3.0 * v * v),
                        _ => return None,
                    };
                    let base = grads.len() - k;
                    for g in &mut grads[base..] {
                        *g = finite_or_zero(*g * da);
                    }
                    *vals.last_mut()? = v;
                }
                Instr::Binary(op) => {
                    let b = vals.pop()?;
                    let a = *vals.last()?;
                    let v = op.apply2(a, b)?;
                    let (da, db) = match op {
                        OpKind::Add => (1.0, 1.0),
                        OpKind::Sub => (1.0, -1.0),
                        OpKind::Mul => (b, a),
                        OpKind::Div => (1.0 / b, -a / (b * b)),
                        OpKind::Pow => (
                            if b == 0.0 { 0.0 } else { b * a.powf(b - 1.0) },
                            if a > 0.0 { v * a.ln() } else { 0.0 },
                        ),
                        _ => return None,
                    };
                    let gb_start = grads.len() - k;
                    let ga_start = gb_start - k;
                    for j in 0..k {
                        let g = grads[ga_start + j] * da + grads[gb_start + j] * db;
                        grads[ga_start + j] = finite_or_zero(g);
                    }
                    grads.truncate(gb_start);
                    *vals.last_mut()? = v;
                }
            }
            let v = *vals.last()?;
            if v.is_nan() || v.abs() > bound {
                return None;
            }
        }
        grad.copy_from_slice(&grads[grads.len() - k..]);
        vals.pop()
    }
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// `sum_i (f(x_i)/y_i - 1)^2`, or `None` if some observation cannot be
/// evaluated.
pub fn residual(tape: &Tape, data: &Dataset, c: &[f64], bound: f64) -> Option<f64> {
    let mut sum = 0.0;
    for (x, &y) in data.x().iter().zip(data.y()) {
        let r = tape.eval(x, c, bound)? / y - 1.0;
        sum += r * r;
    }
    sum.is_finite().then_some(sum)
}

/// Residual of a complete expression through the tree evaluator.
pub fn expr_residual(expr: &Expr, data: &Dataset, bound: f64) -> Option<f64> {
    let mut sum = 0.0;
    for (x, &y) in data.x().iter().zip(data.y()) {
        let r = expr.evaluate_bounded(x, bound).ok()? / y - 1.0;
        sum += r * r;
    }
    sum.is_finite().then_some(sum)
}

fn check_targets(data: &Dataset) -> Result<(), FitError> {
    match data.y().iter().position(|&t| t == 0.0) {
        Some(i) => Err(FitError::ZeroTarget(i)),
        None => Ok(()),
    }
}

/// Damped Gauss-Newton from `start`, constants clamped to `[-box, box]`.
fn descend(tape: &Tape, data: &Dataset, start: &[f64], opts: &FitOptions) -> Option<(Vec<f64>, f64)> {
    let k = tape.n_consts();
    let n = data.len();
    let clamp = |v: f64| v.clamp(-opts.const_box, opts.const_box);
    let mut c: Vec<f64> = start.iter().map(|&v| clamp(v)).collect();
    let mut grad = vec![0.0; k];
    let mut jac = DMatrix::<f64>::zeros(n, k);
    let mut res = DVector::<f64>::zeros(n);

    let linearize = |c: &[f64], jac: &mut DMatrix<f64>, res: &mut DVector<f64>, grad: &mut [f64]| {
        let mut f = 0.0;
        for (i, (x, &y)) in data.x().iter().zip(data.y()).enumerate() {
            let v = tape.eval_grad(x, c, opts.magnitude, grad)?;
            res[i] = v / y - 1.0;
            f += res[i] * res[i];
            for j in 0..k {
                jac[(i, j)] = grad[j] / y;
            }
        }
        f.is_finite().then_some(f)
    };

    let mut f = linearize(&c, &mut jac, &mut res, &mut grad)?;
    for _ in 0..MAX_ITERATIONS {
        let jt = jac.transpose();
        let mut normal = &jt * &jac;
        let max_diag = (0..k).map(|j| normal[(j, j)]).fold(0.0, f64::max);
        for j in 0..k {
            normal[(j, j)] += 1e-12 * (1.0 + max_diag);
        }
        let rhs = -(&jt * &res);
        let Some(delta) = normal.clone().cholesky().map(|ch| ch.solve(&rhs)).or_else(|| normal.lu().solve(&rhs))
        else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = c.iter().zip(delta.iter()).map(|(&ci, &d)| clamp(ci + t * d)).collect();
            if let Some(fc) = residual(tape, data, &cand, opts.magnitude) {
                if fc < f {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, fc)) = accepted else { break };
        let step = cand.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        c = cand;
        f = fc;
        if step < STEP_TOLERANCE || f == 0.0 {
            break;
        }
        f = linearize(&c, &mut jac, &mut res, &mut grad)?;
    }
    Some((c, f))
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Multistart points: the full grid product, or a seeded subsample of it.
fn starts(k: usize, seed: u64) -> Vec<Vec<f64>> {
    let g = START_GRID.len();
    let total = g.checked_pow(k as u32).unwrap_or(usize::MAX);
    let decode = |mut idx: usize| -> Vec<f64> {
        (0..k)
            .map(|_| {
                let v = START_GRID[idx % g];
                idx /= g;
                v
            })
            .collect()
    };
    if total <= MAX_STARTS {
        return (0..total).map(decode).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if total == usize::MAX {
        use rand::Rng;
        return (0..MAX_STARTS)
            .map(|_| (0..k).map(|_| START_GRID[rng.random_range(0..g)]).collect())
            .collect();
    }
    let mut picked: Vec<usize> = sample(&mut rng, total, MAX_STARTS).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(decode).collect()
}

fn better(a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)) -> bool {
    match a.1.total_cmp(&b.1) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => {
            a.0.iter().zip(&b.0).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()) == Some(Ordering::Less)
        }
    }
}

/// Best local minimum over the multistart points, if any start evaluates.
pub fn multistart(tape: &Tape, data: &Dataset, opts: &FitOptions, seed: u64) -> Option<(Vec<f64>, f64)> {
    let points = starts(tape.n_consts(), seed);
    let results: Vec<Option<(Vec<f64>, f64)>> = if opts.parallel {
        points.par_iter().map(|s| descend(tape, data, s, opts)).collect()
    } else {
        points.iter().map(|s| descend(tape, data, s, opts)).collect()
    };
    results.into_iter().flatten().fold(None, |best, cand| match best {
        Some(b) if !better(&cand, &b) => Some(b),
        _ => Some(cand),
    })
}

/// Fits the constants of `structure` (in left-to-right order). Structures
/// without constants are simply evaluated.
pub fn fit(structure: &Expr, data: &Dataset, eps: f64, opts: &FitOptions) -> Result<FitResult, FitError> {
    check_targets(data)?;
    let tape = Tape::compile(structure);
    let k = tape.n_consts();
    if k == 0 {
        let r = residual(&tape, data, &[], opts.magnitude).ok_or(FitError::NeverEvaluable)?;
        let status = if r <= eps {
            FitStatus::Feasible
        } else {
            FitStatus::InfeasibleCertified
        };
        return Ok(FitResult {
            constants: Vec::new(),
            residual: r,
            status,
            lower_bound: (status == FitStatus::InfeasibleCertified).then_some(r),
            cert_boxes: 0,
        });
    }

    let seed = opts.seed ^ fnv1a(&structure_key(structure));
    let best = multistart(&tape, data, opts, seed);
    if let Some((c, r)) = &best {
        if *r <= eps {
            let (c, r) = if opts.snap { snap(&tape, data, eps, c.clone(), *r, opts) } else { (c.clone(), *r) };
            return Ok(FitResult {
                constants: c,
                residual: r,
                status: FitStatus::Feasible,
                lower_bound: None,
                cert_boxes: 0,
            });
        }
    }

    let cert = certify_infeasible(structure, data, eps, opts.const_box, opts.cert_budget, opts.magnitude);
    match cert.outcome {
        CertOutcome::Witness(w) => {
            let polished = descend(&tape, data, &w, opts)
                .filter(|(_, r)| *r <= eps)
                .unwrap_or_else(|| {
                    let r = residual(&tape, data, &w, opts.magnitude).unwrap_or(f64::INFINITY);
                    (w, r)
                });
            Ok(FitResult {
                constants: polished.0,
                residual: polished.1,
                status: FitStatus::Feasible,
                lower_bound: None,
                cert_boxes: cert.boxes,
            })
        }
        CertOutcome::Certified if cert.never_evaluable => Err(FitError::NeverEvaluable),
        outcome => {
            let (constants, residual) = best.unwrap_or_else(|| (vec![0.0; k], f64::INFINITY));
            let certified = outcome == CertOutcome::Certified;
            Ok(FitResult {
                constants,
                residual,
                status: if certified {
                    FitStatus::InfeasibleCertified
                } else {
                    FitStatus::InfeasibleHeuristic
                },
                lower_bound: certified.then_some(cert.lower_bound),
                cert_boxes: cert.boxes,
            })
        }
    }
}

/// Rounds near-integer constants, keeping each rounding only if the model
/// stays within tolerance.
fn snap(tape: &Tape, data: &Dataset, eps: f64, mut c: Vec<f64>, mut r: f64, opts: &FitOptions) -> (Vec<f64>, f64) {
    for j in 0..c.len() {
        let rounded = c[j].round();
        if rounded == c[j] || (c[j] - rounded).abs() >= SNAP_TOLERANCE * c[j].abs().max(1.0) {
            continue;
        }
        let mut trial = c.clone();
        trial[j] = rounded;
        if let Some(rt) = residual(tape, data, &trial, opts.magnitude) {
            if rt <= eps {
                c = trial;
                r = rt;
            }
        }
    }
    (c, r)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertOutcome {
    /// Every box was discarded: the residual exceeds the tolerance everywhere.
    Certified,
    /// Budget exhausted with boxes left.
    Undecided,
    /// A box midpoint meets the tolerance.
    Witness(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certification {
    pub outcome: CertOutcome,
    /// Smallest residual bound over the boxes examined.
    pub lower_bound: f64,
    pub boxes: usize,
    /// Certified and no box admitted a domain-valid evaluation.
    pub never_evaluable: bool,
}

struct BoxEntry {
    bound: f64,
    seq: usize,
    dims: Vec<Interval>,
}

impl PartialEq for BoxEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for BoxEntry {}
impl PartialOrd for BoxEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for BoxEntry {
    // reversed: the heap pops the smallest bound, then the oldest box
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound.total_cmp(&self.bound).then(o.seq.cmp(&self.seq))
    }
}

fn box_bound(structure: &Expr, data: &Dataset, dims: &[Interval], magnitude: f64) -> f64 {
    data.x()
        .iter()
        .zip(data.y())
        .map(|(x, &y)| ratio_gap(&expr_interval(structure, x, dims, magnitude), y))
        .sum()
}

/// Interval branch-and-bound over `[-box, box]^k`: boxes whose residual
/// bound exceeds `eps` are discarded, the rest split along their widest
/// side. `budget` limits the number of splits.
pub fn certify_infeasible(
    structure: &Expr,
    data: &Dataset,
    eps: f64,
    const_box: f64,
    budget: usize,
    magnitude: f64,
) -> Certification {
    let k = structure.count_constants();
    let undecided = |lb: f64, boxes: usize| Certification {
        outcome: CertOutcome::Undecided,
        lower_bound: lb,
        boxes,
        never_evaluable: false,
    };
    if budget == 0 {
        return undecided(0.0, 0);
    }
    let tape = Tape::compile(structure);
    let root = vec![Interval::symmetric(const_box); k];
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    let mut splits = 0;
    let mut discarded_min = f64::INFINITY;
    heap.push(BoxEntry {
        bound: box_bound(structure, data, &root, magnitude),
        seq,
        dims: root,
    });
    while let Some(entry) = heap.pop() {
        if entry.bound > eps {
            discarded_min = discarded_min.min(entry.bound);
            return Certification {
                outcome: CertOutcome::Certified,
                lower_bound: discarded_min,
                boxes: splits,
                never_evaluable: discarded_min.is_infinite(),
            };
        }
        let mid: Vec<f64> = entry.dims.iter().map(Interval::midpoint).collect();
        if residual(&tape, data, &mid, magnitude).is_some_and(|r| r <= eps) {
            return Certification {
                outcome: CertOutcome::Witness(mid),
                lower_bound: entry.bound,
                boxes: splits,
                never_evaluable: false,
            };
        }
        if splits >= budget {
            return undecided(entry.bound, splits);
        }
        splits += 1;
        let widest = (0..k)
            .max_by(|&a, &b| entry.dims[a].width().total_cmp(&entry.dims[b].width()).then(b.cmp(&a)))
            .expect("at least one constant");
        let (lo, hi) = entry.dims[widest].split();
        for half in [lo, hi] {
            let mut dims = entry.dims.clone();
            dims[widest] = half;
            let bound = box_bound(structure, data, &dims, magnitude);
            if bound > eps {
                discarded_min = discarded_min.min(bound);
                continue;
            }
            seq += 1;
            heap.push(BoxEntry { bound, seq, dims });
        }
    }
    Certification {
        outcome: CertOutcome::Certified,
        lower_bound: discarded_min,
        boxes: splits,
        never_evaluable: discarded_min.is_infinite(),
    }
}
