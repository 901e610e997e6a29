//! Multicut separation and the cutting-plane loop.
//!
//! An integer incumbent is checked by union-find over its dormant edges. Each
//! active edge inside a component closes a dormant path into a violated cycle;
//! those cycles become new inequalities and the MILP is solved again.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::formulation::{build_2d_model, CycleInequality, GridInstance, Params};
use crate::grid::{Cycle, EdgeId, EdgeLabeling, GridGraph, NodeId};
use crate::heuristic::{region_fusion, segmentation_to_edges, Schedule};
use crate::postprocess::Segmentation;
use crate::solver::{backend_from_env, evaluate_labeling, load_model, LinearBackend, SolveLimits, SolveStatus};
use crate::{Error, Result};

/// Result of checking a labeling (and, after search, the cuts it produced).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeparationOutcome {
    pub feasible: bool,
    pub violated_edges: Vec<EdgeId>,
    pub new_cuts: Vec<CycleInequality>,
    pub facet_only: bool,
}

/// Active edges whose endpoints are joined by dormant edges.
pub fn check_feasibility(g: &GridGraph, x: &EdgeLabeling) -> SeparationOutcome {
    let comp = g.connected_components(x);
    let violated_edges: Vec<EdgeId> = x
        .active_edges()
        .filter(|&e| {
            let (u, v) = g.endpoints(e);
            comp[u] == comp[v]
        })
        .collect();
    SeparationOutcome { feasible: violated_edges.is_empty(), violated_edges, new_cuts: Vec::new(), facet_only: false }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    #[default]
    Plain,
    /// Only chordless cycles; these define facets of the multicut polytope.
    FacetDefining,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub mode: SearchMode,
    /// Longest dormant path explored by the depth-first search, in edges.
    pub max_depth: usize,
    /// Paths collected per violated edge.
    pub max_paths: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { mode: SearchMode::Plain, max_depth: 10, max_paths: 16 }
    }
}

const DFS_EXPANSION_CAP: usize = 200_000;

fn manhattan(g: &GridGraph, a: NodeId, b: NodeId) -> usize {
    let (ai, aj) = g.coords(a);
    let (bi, bj) = g.coords(b);
    ai.abs_diff(bi) + aj.abs_diff(bj)
}

struct Dfs<'a> {
    g: &'a GridGraph,
    x: &'a EdgeLabeling,
    target: NodeId,
    cfg: SearchConfig,
    on_path: Vec<bool>,
    path: Vec<NodeId>,
    found: Vec<Vec<NodeId>>,
    expansions: usize,
}

impl Dfs<'_> {
    fn run(&mut self) {
        if self.found.len() >= self.cfg.max_paths || self.expansions >= DFS_EXPANSION_CAP {
            return;
        }
        self.expansions += 1;
        let cur = *self.path.last().expect("non-empty path");
        if cur == self.target {
            self.found.push(self.path.clone());
            return;
        }
        let used = self.path.len() - 1;
        if used >= self.cfg.max_depth {
            return;
        }
        let mut next: Vec<NodeId> =
            self.g.neighbors(cur).filter(|&(u, e)| !self.x.is_active(e) && !self.on_path[u]).map(|(u, _)| u).collect();
        next.sort_by_key(|&u| manhattan(self.g, u, self.target));
        for u in next {
            if manhattan(self.g, u, self.target) + used + 1 > self.cfg.max_depth {
                continue;
            }
            if self.cfg.mode == SearchMode::FacetDefining && !self.chord_free(u) {
                continue;
            }
            self.on_path[u] = true;
            self.path.push(u);
            self.run();
            self.path.pop();
            self.on_path[u] = false;
            if self.found.len() >= self.cfg.max_paths {
                return;
            }
        }
    }

    /// `u` must not touch any path node other than its parent, except that the
    /// target closes onto the start.
    fn chord_free(&self, u: NodeId) -> bool {
        let k = self.path.len() - 1;
        self.path[..k].iter().enumerate().all(|(i, &a)| !self.g.adjacent(u, a) || (u == self.target && i == 0))
    }
}

fn bfs_path(g: &GridGraph, x: &EdgeLabeling, s: NodeId, t: NodeId) -> Option<Vec<NodeId>> {
    let mut parent = vec![usize::MAX; g.num_nodes()];
    parent[s] = s;
    let mut q = VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        if v == t {
            let mut path = vec![t];
            let mut c = t;
            while c != s {
                c = parent[c];
                path.push(c);
            }
            path.reverse();
            return Some(path);
        }
        for (u, e) in g.neighbors(v) {
            if !x.is_active(e) && parent[u] == usize::MAX {
                parent[u] = v;
                q.push_back(u);
            }
        }
    }
    None
}

fn active_count(g: &GridGraph, x: &EdgeLabeling, nodes: &[NodeId]) -> usize {
    let k = nodes.len();
    (0..k).filter(|&t| g.edge_between(nodes[t], nodes[(t + 1) % k]).is_some_and(|e| x.is_active(e))).count()
}

/// Split along chords until chordless, keeping the part with one active edge.
fn reduce_chords(g: &GridGraph, x: &EdgeLabeling, mut nodes: Vec<NodeId>) -> Vec<NodeId> {
    'outer: loop {
        let k = nodes.len();
        for a in 0..k {
            for b in (a + 2)..k {
                if a == 0 && b == k - 1 {
                    continue;
                }
                if g.adjacent(nodes[a], nodes[b]) {
                    let inner: Vec<NodeId> = nodes[a..=b].to_vec();
                    let outer: Vec<NodeId> = nodes[..=a].iter().chain(&nodes[b..]).copied().collect();
                    nodes = if active_count(g, x, &inner) == 1 { inner } else { outer };
                    debug_assert_eq!(active_count(g, x, &nodes), 1);
                    continue 'outer;
                }
            }
        }
        return nodes;
    }
}

/// Violated cycles through `violated`: dormant paths between its endpoints
/// closed by the edge itself. Each returned cycle has exactly one active edge.
pub fn find_cycles(g: &GridGraph, x: &EdgeLabeling, violated: EdgeId, cfg: &SearchConfig) -> Result<Vec<Cycle>> {
    g.check_edge(violated)?;
    if x.len() != g.num_edges() {
        return Err(Error::DimensionMismatch { what: "edge labeling", expected: g.num_edges(), found: x.len() });
    }
    let (s, t) = g.endpoints(violated);
    let mut dfs = Dfs { g, x, target: t, cfg: *cfg, on_path: vec![false; g.num_nodes()], path: vec![s], found: Vec::new(), expansions: 0 };
    dfs.on_path[s] = true;
    dfs.run();
    let mut paths = dfs.found;
    if paths.is_empty() {
        let p = bfs_path(g, x, s, t)
            .ok_or_else(|| Error::InvalidCycle(format!("edge {violated} is not violated: no dormant path joins its endpoints")))?;
        paths.push(match cfg.mode {
            SearchMode::Plain => p,
            SearchMode::FacetDefining => reduce_chords(g, x, p),
        });
    }
    paths.into_iter().map(|p| Cycle::from_nodes(g, p)).collect()
}

/// The unique active edge of a violated cycle.
pub fn cycle_target(x: &EdgeLabeling, cycle: &Cycle) -> Option<EdgeId> {
    let mut act = cycle.edges.iter().copied().filter(|&e| x.is_active(e));
    let first = act.next()?;
    act.next().is_none().then_some(first)
}

/// Deduplicating store of inequalities in insertion order.
#[derive(Clone, Debug, Default)]
pub struct CutPool {
    cuts: Vec<CycleInequality>,
    seen: HashSet<CycleInequality>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// `false` when the inequality is already present.
    pub fn insert(&mut self, cut: CycleInequality) -> bool {
        if self.seen.contains(&cut) {
            return false;
        }
        self.seen.insert(cut.clone());
        self.cuts.push(cut);
        true
    }

    pub fn contains(&self, cut: &CycleInequality) -> bool {
        self.seen.contains(cut)
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn cuts(&self) -> &[CycleInequality] {
        &self.cuts
    }
}

/// Phase 1 plus cycle search, with new cuts registered in `pool`.
pub fn separate(g: &GridGraph, x: &EdgeLabeling, cfg: &SearchConfig, max_cuts: usize, pool: &mut CutPool) -> Result<SeparationOutcome> {
    let mut out = check_feasibility(g, x);
    out.facet_only = cfg.mode == SearchMode::FacetDefining;
    'edges: for &e in &out.violated_edges {
        for cycle in find_cycles(g, x, e, cfg)? {
            let target = cycle_target(x, &cycle).expect("violated cycle has one active edge");
            let cut = CycleInequality::new(&cycle.edges, target);
            if pool.insert(cut.clone()) {
                out.new_cuts.push(cut);
                if out.new_cuts.len() >= max_cuts {
                    break 'edges;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialCycles {
    #[default]
    None,
    Four,
    FourEight,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarmStart {
    #[default]
    None,
    Heuristic,
    Labeling(EdgeLabeling),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantConfig {
    pub name: String,
    pub initial_cycles: InitialCycles,
    pub warm_start: WarmStart,
    pub search: SearchConfig,
    /// Skip the MILP and report the heuristic labeling.
    pub heuristic_only: bool,
    pub max_cuts_per_round: usize,
    pub max_rounds: usize,
    pub schedule: Schedule,
}

impl Default for VariantConfig {
    fn default() -> Self {
        Variant::Mp.config()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "mp")]
    Mp,
    #[serde(rename = "mph")]
    Mph,
    #[serde(rename = "mph-4")]
    Mph4,
    #[serde(rename = "mph-4-8")]
    Mph48,
    #[serde(rename = "mph-f")]
    MphF,
    #[serde(rename = "mph-4-f")]
    Mph4F,
    #[serde(rename = "heuristic")]
    Heuristic,
}

impl Variant {
    pub const ALL: [Variant; 7] =
        [Variant::Mp, Variant::Mph, Variant::Mph4, Variant::Mph48, Variant::MphF, Variant::Mph4F, Variant::Heuristic];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Mp => "mp",
            Variant::Mph => "mph",
            Variant::Mph4 => "mph-4",
            Variant::Mph48 => "mph-4-8",
            Variant::MphF => "mph-f",
            Variant::Mph4F => "mph-4-f",
            Variant::Heuristic => "heuristic",
        }
    }

    pub fn config(&self) -> VariantConfig {
        let (initial_cycles, warm, mode) = match self {
            Variant::Mp => (InitialCycles::None, false, SearchMode::Plain),
            Variant::Mph | Variant::Heuristic => (InitialCycles::None, true, SearchMode::Plain),
            Variant::Mph4 => (InitialCycles::Four, true, SearchMode::Plain),
            Variant::Mph48 => (InitialCycles::FourEight, true, SearchMode::Plain),
            Variant::MphF => (InitialCycles::None, true, SearchMode::FacetDefining),
            Variant::Mph4F => (InitialCycles::Four, true, SearchMode::FacetDefining),
        };
        VariantConfig {
            name: self.name().to_string(),
            initial_cycles,
            warm_start: if warm { WarmStart::Heuristic } else { WarmStart::None },
            search: SearchConfig { mode, ..SearchConfig::default() },
            heuristic_only: *self == Variant::Heuristic,
            max_cuts_per_round: 1000,
            max_rounds: 100,
            schedule: Schedule::default(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('&', "-");
        Variant::ALL.into_iter().find(|v| v.name() == key).ok_or_else(|| Error::InvalidParameter(format!("unknown variant `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub status: SolveStatus,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub node_count: u64,
    pub wall_time: f64,
    pub violated_edges: usize,
    pub cuts_added: usize,
}

/// Final answer of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct FitSolution {
    pub variant: String,
    pub status: SolveStatus,
    /// Empty when `status` is `no-solution` or `infeasible`.
    pub w: Vec<f64>,
    pub x: EdgeLabeling,
    pub objective: f64,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub node_count: Option<u64>,
    pub wall_time: f64,
    pub params: Params,
    /// Inequalities in the model before the first solve.
    pub initial_cuts: usize,
    pub rounds: Vec<RoundTrace>,
    /// Every inequality added by separation, in order.
    pub cuts: Vec<CycleInequality>,
    pub first_incumbent: Option<f64>,
    /// LP value of the warm-start labeling.
    pub heuristic_objective: Option<f64>,
    /// The last incumbent violated the multicut constraints and was projected
    /// onto its components.
    pub repaired: bool,
}

impl FitSolution {
    pub fn cuts_added(&self) -> usize {
        self.rounds.iter().map(|r| r.cuts_added).sum()
    }

    pub fn has_incumbent(&self) -> bool {
        !self.w.is_empty()
    }

    /// Number of re-solves after the first one.
    pub fn separation_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| r.cuts_added > 0).count()
    }
}

pub fn cutting_plane_solve(instance: &GridInstance, params: &Params, config: &VariantConfig, limits: &SolveLimits) -> Result<FitSolution> {
    let backend = backend_from_env()?;
    cutting_plane_solve_with(backend.as_ref(), instance, params, config, limits)
}

fn relative_gap(objective: f64, bound: f64) -> f64 {
    if objective == bound {
        0.0
    } else {
        (objective - bound).abs() / objective.abs().max(1e-10)
    }
}

pub fn cutting_plane_solve_with(
    backend: &dyn LinearBackend,
    instance: &GridInstance,
    params: &Params,
    config: &VariantConfig,
    limits: &SolveLimits,
) -> Result<FitSolution> {
    let started = Instant::now();
    let g = *instance.graph();
    let initial: Vec<Cycle> = match config.initial_cycles {
        InitialCycles::None => Vec::new(),
        InitialCycles::Four => g.enumerate_4cycles(),
        InitialCycles::FourEight => {
            let mut c = g.enumerate_4cycles();
            c.extend(g.enumerate_8cycles());
            c
        }
    };
    let model = build_2d_model(instance, params, &initial)?;

    let mut pool = CutPool::new();
    for c in &initial {
        for ineq in CycleInequality::all_for_cycle(c) {
            pool.insert(ineq);
        }
    }
    let initial_cuts = pool.len();

    let x0 = match &config.warm_start {
        WarmStart::None => None,
        WarmStart::Heuristic => Some(region_fusion(instance, params, &config.schedule)?.1),
        WarmStart::Labeling(x) => Some(x.clone()),
    };
    let heuristic_value = match &x0 {
        Some(x) => Some(evaluate_labeling(backend, &model, x)?),
        None => None,
    };

    let mut sol = FitSolution {
        variant: config.name.clone(),
        status: SolveStatus::NoSolution,
        w: Vec::new(),
        x: EdgeLabeling::all_dormant(0),
        objective: f64::NAN,
        best_bound: None,
        gap: None,
        node_count: None,
        wall_time: 0.0,
        params: params.clone(),
        initial_cuts,
        rounds: Vec::new(),
        cuts: Vec::new(),
        first_incumbent: None,
        heuristic_objective: heuristic_value.as_ref().map(|h| h.objective),
        repaired: false,
    };

    if config.heuristic_only {
        let (x, hv) = match (x0, heuristic_value) {
            (Some(x), Some(hv)) => (x, hv),
            _ => {
                let x = region_fusion(instance, params, &config.schedule)?.1;
                let hv = evaluate_labeling(backend, &model, &x)?;
                (x, hv)
            }
        };
        sol.status = SolveStatus::FeasibleLimit;
        sol.objective = hv.objective;
        sol.first_incumbent = Some(hv.objective);
        sol.w = hv.w;
        sol.x = x;
        sol.wall_time = started.elapsed().as_secs_f64();
        return Ok(sol);
    }

    let mut handle = load_model(backend, &model)?;
    if let Some(x) = &x0 {
        handle.warm_start(x)?;
    }

    let mut nodes_total = 0u64;
    let mut last: Option<crate::solver::SolveReport> = None;
    let mut exhausted = false;
    for round in 0.. {
        let remaining = limits.time_limit - started.elapsed().as_secs_f64();
        if remaining <= 1e-3 {
            exhausted = true;
            break;
        }
        let report = handle.solve(&limits.with_time_limit(remaining))?;
        nodes_total += report.node_count;
        if round == 0 {
            sol.first_incumbent = report.improvements.first().map(|p| p.1).or(report.incumbent.as_ref().map(|_| report.objective));
        }
        let mut trace = RoundTrace {
            round,
            status: report.status,
            objective: report.objective,
            best_bound: report.best_bound,
            gap: report.gap,
            node_count: report.node_count,
            wall_time: report.wall_time,
            violated_edges: 0,
            cuts_added: 0,
        };
        let Some(inc) = report.incumbent.as_ref() else {
            sol.rounds.push(trace);
            if report.status == SolveStatus::Infeasible {
                sol.status = SolveStatus::Infeasible;
            }
            // Keep the previous round's incumbent, if any, for repair below.
            exhausted = report.status != SolveStatus::Infeasible;
            break;
        };
        let cap = config.max_cuts_per_round;
        let outcome = separate(&g, &inc.x, &config.search, cap, &mut pool)?;
        trace.violated_edges = outcome.violated_edges.len();
        if outcome.feasible {
            sol.rounds.push(trace);
            last = Some(report);
            break;
        }
        let timed_out = report.status != SolveStatus::Optimal;
        if timed_out || round + 1 >= config.max_rounds || outcome.new_cuts.is_empty() {
            sol.rounds.push(trace);
            last = Some(report);
            exhausted = true;
            break;
        }
        handle.add_constraints(&outcome.new_cuts)?;
        trace.cuts_added = outcome.new_cuts.len();
        log::debug!("round {round}: {} violated edges, {} cuts", outcome.violated_edges.len(), outcome.new_cuts.len());
        sol.cuts.extend(outcome.new_cuts);
        sol.rounds.push(trace);
        last = Some(report);
    }
    sol.node_count = Some(nodes_total);

    let Some(report) = last else {
        sol.wall_time = started.elapsed().as_secs_f64();
        if sol.status != SolveStatus::Infeasible {
            sol.status = SolveStatus::NoSolution;
        }
        return Ok(sol);
    };
    let inc = report.incumbent.expect("recorded rounds carry an incumbent");
    sol.best_bound = Some(report.best_bound);
    if check_feasibility(&g, &inc.x).feasible {
        sol.status = if exhausted && report.status == SolveStatus::Optimal { SolveStatus::FeasibleLimit } else { report.status };
        sol.objective = report.objective;
        sol.gap = Some(report.gap);
        sol.w = inc.w;
        sol.x = inc.x;
    } else {
        let comp = g.connected_components(&inc.x);
        let seg = Segmentation::from_labels(&g, &comp)?;
        let x = segmentation_to_edges(&seg, &g);
        let v = evaluate_labeling(backend, &model, &x)?;
        sol.status = SolveStatus::FeasibleLimit;
        sol.objective = v.objective;
        sol.gap = Some(relative_gap(v.objective, report.best_bound));
        sol.w = v.w;
        sol.x = x;
        sol.repaired = true;
    }
    sol.wall_time = started.elapsed().as_secs_f64();
    Ok(sol)
}
