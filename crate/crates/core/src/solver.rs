//! Best-first branch-and-bound over structures, returning the
//! minimum-complexity expression within the error tolerance together with a
//! certificate of how that optimality was established.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{prune, BoundContext, PruneDecision, PruneReason, DEFAULT_CONST_BOX};
use crate::constfit::{certify_infeasible, fit, CertOutcome, FitError, FitOptions, FitStatus, DEFAULT_CERT_BUDGET};
use crate::data::Dataset;
use crate::expr::{Expr, OperatorSet, DEFAULT_MAGNITUDE_BOUND};
use crate::grammar::{canonical_key, Grammar, GrammarError, Objective, PartialAssignment, TreeTemplate, DEFAULT_MAX_CONSTANTS};

/// Exhaustive enumeration refuses grammars with more structures than this.
pub const EXHAUSTIVE_LIMIT: u64 = 1_000_000;
pub const DEFAULT_DEPTH: usize = 3;
pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(6 * 3600);
pub const DEFAULT_SEED: u64 = 42;

/// Sum-form tolerance for a root-mean-square relative error of `percent`
/// over `n` observations: `n (percent / 100)^2`.
pub fn epsilon_from_percent(percent: f64, n: usize) -> f64 {
    n as f64 * (percent / 100.0).powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Bound on `sum_i (f(x_i)/y_i - 1)^2`.
    pub epsilon: f64,
    pub depth: usize,
    pub operators: OperatorSet,
    pub objective: Objective,
    pub const_box: f64,
    pub max_constants: Option<usize>,
    pub time_limit: Duration,
    pub node_limit: Option<u64>,
    pub seed: u64,
    pub prune: bool,
    pub threads: usize,
    pub cert_budget: usize,
    pub magnitude: f64,
}

impl SolverConfig {
    pub fn new(epsilon: f64) -> Self {
        SolverConfig {
            epsilon,
            depth: DEFAULT_DEPTH,
            operators: OperatorSet::exoplanet(),
            objective: Objective::NodeCount,
            const_box: DEFAULT_CONST_BOX,
            max_constants: Some(DEFAULT_MAX_CONSTANTS),
            time_limit: DEFAULT_TIME_LIMIT,
            node_limit: None,
            seed: DEFAULT_SEED,
            prune: true,
            threads: 1,
            cert_budget: DEFAULT_CERT_BUDGET,
            magnitude: DEFAULT_MAGNITUDE_BOUND,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.time_limit.is_zero() {
            return bad("time limit must be positive".into());
        }
        if !(self.const_box > 0.0 && self.const_box.is_finite()) {
            return bad(format!("constant box must be positive, got {}", self.const_box));
        }
        if self.magnitude.is_nan() || self.magnitude <= 0.0 {
            return bad(format!("magnitude bound must be positive, got {}", self.magnitude));
        }
        if self.threads == 0 {
            return bad("thread count must be at least 1".into());
        }
        Ok(())
    }

    fn grammar(&self, n_vars: usize) -> Result<Grammar, SolverError> {
        let template = TreeTemplate::new(self.depth).map_err(|e| SolverError::InvalidConfig(e.to_string()))?;
        Ok(Grammar::new(template, self.operators.clone(), n_vars)
            .map_err(|e| SolverError::InvalidConfig(e.to_string()))?
            .with_max_constants(self.max_constants))
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            const_box: self.const_box,
            magnitude: self.magnitude,
            cert_budget: self.cert_budget,
            seed: self.seed,
            parallel: self.threads > 1,
            snap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Certificate {
    /// Search exhausted; every cheaper structure was proven infeasible.
    GlobalOptimal,
    /// Search exhausted, but some cheaper structure was rejected only by
    /// local fitting.
    OptimalUpToContinuousHeuristic,
    /// A time or node limit stopped the search.
    IncumbentOnly,
}

impl Certificate {
    pub fn name(self) -> &'static str {
        match self {
            Certificate::GlobalOptimal => "global-optimal",
            Certificate::OptimalUpToContinuousHeuristic => "optimal-up-to-continuous-heuristic",
            Certificate::IncumbentOnly => "incumbent-only",
        }
    }

    pub fn from_name(s: &str) -> Option<Certificate> {
        [
            Certificate::GlobalOptimal,
            Certificate::OptimalUpToContinuousHeuristic,
            Certificate::IncumbentOnly,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    pub nodes_explored: u64,
    pub pruned_bound: u64,
    pub pruned_dominated: u64,
    pub pruned_infeasible: u64,
    pub duplicates: u64,
    pub structures_fitted: u64,
    pub certified_rejections: u64,
    pub heuristic_rejections: u64,
    pub limit_hit: bool,
    pub wall_time: Duration,
}

impl SearchStats {
    fn count_prune(&mut self, reason: PruneReason) {
        match reason {
            PruneReason::Bound => self.pruned_bound += 1,
            PruneReason::Dominated => self.pruned_dominated += 1,
            PruneReason::Infeasible => self.pruned_infeasible += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// The model, constants filled in.
    pub expression: Expr,
    /// Canonical key of the structure (constants zeroed).
    pub structure_key: String,
    /// Node count.
    pub complexity: usize,
    /// Objective value under the configured objective.
    pub objective_value: f64,
    pub residual: f64,
    pub constants: Vec<f64>,
    pub certificate: Certificate,
    pub stats: SearchStats,
}

impl Solution {
    pub fn render(&self, ds: &Dataset) -> String {
        crate::text::render(&self.expression, ds.variable_names())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no feasible model{}", best_residual.map(|r| format!(" (best residual {r:.6e})")).unwrap_or_default())]
    NoFeasibleModel {
        best_residual: Option<f64>,
        stats: Box<SearchStats>,
    },
    #[error("structure space too large for exhaustive enumeration (limit {limit})")]
    TooLarge { limit: u64 },
    #[error("target value of observation {0} is zero")]
    ZeroTarget(usize),
}

/// A feasible structure with fitted constants.
#[derive(Debug, Clone)]
struct Candidate {
    expr: Expr,
    key: String,
    value: f64,
    residual: f64,
    constants: Vec<f64>,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        match self.value.total_cmp(&other.value) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.key < other.key,
        }
    }
}

/// A structure rejected by local fitting alone.
struct Pending {
    structure: Expr,
    key: String,
    value: f64,
}

struct Entry {
    bound: f64,
    seq: u64,
    partial: PartialAssignment,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound.total_cmp(&self.bound).then(o.seq.cmp(&self.seq))
    }
}

fn check_targets(ds: &Dataset) -> Result<(), SolverError> {
    match ds.y().iter().position(|&t| t == 0.0) {
        Some(i) => Err(SolverError::ZeroTarget(i)),
        None => Ok(()),
    }
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Finds the minimum-complexity expression with error at most
/// `config.epsilon`. Deterministic for a fixed configuration, independent
/// of the thread count.
pub fn solve(ds: &Dataset, config: &SolverConfig) -> Result<Solution, SolverError> {
    config.validate()?;
    check_targets(ds)?;
    let grammar = config.grammar(ds.n_vars())?;
    let ctx = BoundContext::for_dataset(ds, config.const_box, config.magnitude)
        .map_err(|e| SolverError::InvalidConfig(e.to_string()))?;
    with_threads(config.threads, || Search::new(ds, config, &grammar, &ctx).run())
}

struct Search<'a> {
    ds: &'a Dataset,
    config: &'a SolverConfig,
    grammar: &'a Grammar,
    ctx: &'a BoundContext,
    fit_opts: FitOptions,
    stats: SearchStats,
    incumbent: Option<Candidate>,
    pending: Vec<Pending>,
    best_residual: Option<f64>,
}

impl<'a> Search<'a> {
    fn new(ds: &'a Dataset, config: &'a SolverConfig, grammar: &'a Grammar, ctx: &'a BoundContext) -> Self {
        // certification is deferred until the final incumbent is known
        let fit_opts = FitOptions {
            cert_budget: 0,
            ..config.fit_options()
        };
        Search {
            ds,
            config,
            grammar,
            ctx,
            fit_opts,
            stats: SearchStats::default(),
            incumbent: None,
            pending: Vec::new(),
            best_residual: None,
        }
    }

    fn incumbent_value(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|c| c.value)
    }

    fn note_residual(&mut self, r: f64) {
        if r.is_finite() {
            self.best_residual = Some(self.best_residual.map_or(r, |b| b.min(r)));
        }
    }

    fn offer(&mut self, cand: Candidate) {
        if self.incumbent.as_ref().is_none_or(|inc| cand.beats(inc)) {
            self.incumbent = Some(cand);
        }
    }

    fn run(mut self) -> Result<Solution, SolverError> {
        let start = Instant::now();
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        let mut seen = HashSet::new();
        let root = self.grammar.root_partial();
        heap.push(Entry {
            bound: self.grammar.objective_lower_bound(&root, self.config.objective),
            seq,
            partial: root,
        });

        while let Some(entry) = heap.pop() {
            if self.incumbent_value().is_some_and(|v| entry.bound > v) {
                // best-first: everything left is at least as bad
                self.stats.pruned_dominated += 1 + heap.len() as u64;
                heap.clear();
                break;
            }
            if self.config.node_limit.is_some_and(|l| self.stats.nodes_explored >= l)
                || (self.stats.nodes_explored.is_multiple_of(256) && start.elapsed() >= self.config.time_limit)
            {
                self.stats.limit_hit = true;
                break;
            }
            self.stats.nodes_explored += 1;
            let p = entry.partial;
            if self.config.prune {
                if let PruneDecision::Prune(reason) = prune(
                    self.grammar,
                    &p,
                    self.incumbent_value(),
                    self.config.objective,
                    self.ds,
                    self.config.epsilon,
                    self.ctx,
                ) {
                    self.stats.count_prune(reason);
                    if p.is_complete() && reason != PruneReason::Dominated {
                        self.stats.certified_rejections += 1;
                    }
                    continue;
                }
            }
            if p.is_complete() {
                let structure = self.grammar.structure_of(&p);
                let key = canonical_key(&structure);
                if !seen.insert(key.clone()) {
                    self.stats.duplicates += 1;
                    continue;
                }
                self.evaluate(structure, key);
                continue;
            }
            for child in self.grammar.branch(&p) {
                let bound = self.grammar.objective_lower_bound(&child, self.config.objective);
                if self.incumbent_value().is_some_and(|v| bound > v) {
                    self.stats.pruned_dominated += 1;
                    continue;
                }
                seq += 1;
                heap.push(Entry {
                    bound,
                    seq,
                    partial: child,
                });
            }
        }

        let heuristic_below = self.resolve_pending();
        self.stats.wall_time = start.elapsed();
        let Some(best) = self.incumbent.take() else {
            return Err(SolverError::NoFeasibleModel {
                best_residual: self.best_residual,
                stats: Box::new(self.stats),
            });
        };
        let certificate = if self.stats.limit_hit {
            Certificate::IncumbentOnly
        } else if heuristic_below {
            Certificate::OptimalUpToContinuousHeuristic
        } else {
            Certificate::GlobalOptimal
        };
        Ok(Solution {
            complexity: best.expr.complexity(),
            expression: best.expr,
            structure_key: best.key,
            objective_value: best.value,
            residual: best.residual,
            constants: best.constants,
            certificate,
            stats: self.stats,
        })
    }

    fn evaluate(&mut self, structure: Expr, key: String) {
        self.stats.structures_fitted += 1;
        let value = self.config.objective.value(&structure, self.grammar.ops());
        match fit(&structure, self.ds, self.config.epsilon, &self.fit_opts) {
            Err(FitError::NeverEvaluable) | Err(FitError::ZeroTarget(_)) => {
                self.stats.certified_rejections += 1;
            }
            Ok(f) => {
                self.note_residual(f.residual);
                match f.status {
                    FitStatus::Feasible => self.offer(Candidate {
                        expr: structure.with_constants(&f.constants),
                        key,
                        value,
                        residual: f.residual,
                        constants: f.constants,
                    }),
                    FitStatus::InfeasibleCertified => self.stats.certified_rejections += 1,
                    FitStatus::InfeasibleHeuristic => self.pending.push(Pending { structure, key, value }),
                }
            }
        }
    }

    /// Certifies the locally rejected structures that could still beat the
    /// incumbent, in (objective, key) order. A certification that finds a
    /// feasible point promotes that structure. Returns whether some
    /// rejection below the final incumbent stays heuristic.
    fn resolve_pending(&mut self) -> bool {
        let mut pending = std::mem::take(&mut self.pending);
        pending.sort_by(|a, b| a.value.total_cmp(&b.value).then_with(|| a.key.cmp(&b.key)));
        let relevant = |p: &Pending, inc: Option<&Candidate>| {
            inc.is_none_or(|c| p.value < c.value || (p.value == c.value && p.key < c.key))
        };
        pending.retain(|p| relevant(p, self.incumbent.as_ref()));
        let budget = self.config.cert_budget;
        let eps = self.config.epsilon;
        let (ds, cbox, mag) = (self.ds, self.config.const_box, self.config.magnitude);
        let certs: Vec<_> = if self.config.threads > 1 {
            pending
                .par_iter()
                .map(|p| certify_infeasible(&p.structure, ds, eps, cbox, budget, mag))
                .collect()
        } else {
            pending
                .iter()
                .map(|p| certify_infeasible(&p.structure, ds, eps, cbox, budget, mag))
                .collect()
        };
        let mut heuristic = Vec::new();
        for (p, cert) in pending.into_iter().zip(certs) {
            match cert.outcome {
                CertOutcome::Certified => self.stats.certified_rejections += 1,
                CertOutcome::Undecided => {
                    self.stats.heuristic_rejections += 1;
                    heuristic.push(p);
                }
                CertOutcome::Witness(_) => {
                    let opts = FitOptions {
                        cert_budget: budget,
                        ..self.fit_opts.clone()
                    };
                    match fit(&p.structure, ds, eps, &opts) {
                        Ok(f) if f.status == FitStatus::Feasible => {
                            self.note_residual(f.residual);
                            self.offer(Candidate {
                                expr: p.structure.with_constants(&f.constants),
                                key: p.key,
                                value: p.value,
                                residual: f.residual,
                                constants: f.constants,
                            });
                        }
                        _ => {
                            self.stats.heuristic_rejections += 1;
                            heuristic.push(p);
                        }
                    }
                }
            }
        }
        let inc = self.incumbent.as_ref();
        heuristic.iter().any(|p| inc.is_none_or(|c| p.value < c.value))
    }
}

/// A tolerance and the outcome of solving at it.
pub type SweepPoint = (f64, Result<Solution, SolverError>);

/// One solve per tolerance, in the given order. Tolerances must be
/// positive and ascending.
pub fn sweep(ds: &Dataset, config: &SolverConfig, epsilons: &[f64]) -> Result<Vec<SweepPoint>, SolverError> {
    if epsilons.is_empty() {
        return Err(SolverError::InvalidConfig("empty tolerance list".into()));
    }
    if epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) || epsilons.windows(2).any(|w| w[0] > w[1]) {
        return Err(SolverError::InvalidConfig("tolerances must be positive and ascending".into()));
    }
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let cfg = SolverConfig {
                epsilon: eps,
                ..config.clone()
            };
            (eps, solve(ds, &cfg))
        })
        .collect())
}

/// Brute-force reference: fits every valid structure on the template,
/// without pruning or symmetry reduction, and returns the best by
/// (objective, canonical key).
pub fn enumerate_exhaustive(ds: &Dataset, config: &SolverConfig) -> Result<Solution, SolverError> {
    config.validate()?;
    check_targets(ds)?;
    let grammar = config.grammar(ds.n_vars())?.with_symmetry_breaking(false);
    let too_large = SolverError::TooLarge { limit: EXHAUSTIVE_LIMIT };
    match grammar.count_structures() {
        Ok(n) if n <= EXHAUSTIVE_LIMIT => {}
        Ok(_) | Err(GrammarError::TooLarge { .. }) => return Err(too_large),
        Err(e) => return Err(SolverError::InvalidConfig(e.to_string())),
    }
    let exprs = grammar
        .enumerate_exprs(EXHAUSTIVE_LIMIT as usize)
        .map_err(|_| too_large)?;
    let start = Instant::now();
    let opts = config.fit_options();
    let mut stats = SearchStats::default();
    let mut best: Option<Candidate> = None;
    let mut best_residual: Option<f64> = None;
    let mut heuristic: Vec<(f64, String)> = Vec::new();
    for structure in exprs {
        stats.nodes_explored += 1;
        stats.structures_fitted += 1;
        let key = canonical_key(&structure);
        let value = config.objective.value(&structure, grammar.ops());
        let Ok(f) = fit(&structure, ds, config.epsilon, &opts) else {
            stats.certified_rejections += 1;
            continue;
        };
        if f.residual.is_finite() {
            best_residual = Some(best_residual.map_or(f.residual, |b: f64| b.min(f.residual)));
        }
        match f.status {
            FitStatus::Feasible => {
                let cand = Candidate {
                    expr: structure.with_constants(&f.constants),
                    key,
                    value,
                    residual: f.residual,
                    constants: f.constants,
                };
                if best.as_ref().is_none_or(|b| cand.beats(b)) {
                    best = Some(cand);
                }
            }
            FitStatus::InfeasibleCertified => stats.certified_rejections += 1,
            FitStatus::InfeasibleHeuristic => {
                stats.heuristic_rejections += 1;
                heuristic.push((value, key));
            }
        }
    }
    stats.wall_time = start.elapsed();
    let Some(best) = best else {
        return Err(SolverError::NoFeasibleModel {
            best_residual,
            stats: Box::new(stats),
        });
    };
    let certificate = if heuristic.iter().any(|(v, _)| *v < best.value) {
        Certificate::OptimalUpToContinuousHeuristic
    } else {
        Certificate::GlobalOptimal
    };
    Ok(Solution {
        complexity: best.expr.complexity(),
        expression: best.expr,
        structure_key: best.key,
        objective_value: best.value,
        residual: best.residual,
        constants: best.constants,
        certificate,
        stats,
    })
}
