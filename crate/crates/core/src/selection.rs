//! CoMP-cell selection: the single-BS extension filter and the greedy pass
//! that applies it to every (UE, candidate BS) pair.

use serde::Serialize;

use crate::allocation::{demand_map_h, solve_optimal, AllocationSolution, FixedPointConfig};
use crate::error::{Error, Result};
use crate::model::{Association, NetworkScenario};

/// Acceptance rule of the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterRule {
    /// Accept iff the added BS's load does not grow under one demand-map
    /// step at the current optimum.
    LoadCondition,
    /// [`FilterRule::LoadCondition`], and additionally the re-solved
    /// objective must not decrease.
    Certified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub fixed_point: FixedPointConfig,
    pub rule: FilterRule,
    /// Re-solve the optimum after each accepted filter (otherwise the
    /// starting association's optimum feeds every load condition).
    pub resolve_after_accept: bool,
    /// Relative slack on the load comparison.
    pub tie_tolerance: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            fixed_point: FixedPointConfig::default(),
            rule: FilterRule::Certified,
            resolve_after_accept: true,
            tie_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterDecision {
    pub ue: usize,
    pub bs: usize,
    pub accepted: bool,
    /// Whether the load condition held (accepted implies this).
    pub condition: bool,
    #[serde(skip)]
    pub kappa_out: Association,
    pub lhs_load: f64,
    pub rhs_load: f64,
    /// Relative change of the UE's demand under the extended association.
    pub mu: f64,
    /// `|eta*|_1` before and after the filter.
    pub eta_before: f64,
    pub eta_after: f64,
    /// Optimum of `kappa_out` when it was solved.
    #[serde(skip)]
    pub solution_out: Option<AllocationSolution>,
}

/// JSON-lines trace record of one filter evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub ue: usize,
    pub bs: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub accepted: bool,
    pub eta_before: f64,
    pub eta_after: f64,
}

impl From<&FilterDecision> for TraceRecord {
    fn from(d: &FilterDecision) -> Self {
        Self {
            ue: d.ue,
            bs: d.bs,
            lhs: d.lhs_load,
            rhs: d.rhs_load,
            accepted: d.accepted,
            eta_before: d.eta_before,
            eta_after: d.eta_after,
        }
    }
}

/// Adds `bs_set` to the serving set of `ue`.
pub fn extend(
    scenario: &NetworkScenario,
    assoc: &Association,
    ue: usize,
    bs_set: &[usize],
) -> Result<Association> {
    assoc.check_dims(scenario)?;
    if ue >= scenario.num_ues() {
        return Err(Error::IndexOutOfRange {
            what: "UE",
            index: ue,
            len: scenario.num_ues(),
        });
    }
    let mut out = assoc.clone();
    for &i in bs_set {
        if i >= scenario.num_bs() {
            return Err(Error::IndexOutOfRange {
                what: "BS",
                index: i,
                len: scenario.num_bs(),
            });
        }
        let (bc, uc) = (scenario.base_stations[i].cluster, scenario.users[ue].cluster);
        if bc != uc {
            return Err(Error::ClusterViolation {
                bs: i,
                ue,
                bs_cluster: bc,
                ue_cluster: uc,
            });
        }
        out.set(i, ue, true);
    }
    Ok(out)
}

/// Filter evaluation against a precomputed optimum of `assoc`.
///
/// `basis` supplies the allocation and QoS used in the load condition;
/// `current` is the optimum of `assoc` itself (they differ only when
/// re-solving is disabled).
pub fn filter_with(
    scenario: &NetworkScenario,
    assoc: &Association,
    basis: &AllocationSolution,
    current: &AllocationSolution,
    ue: usize,
    bs: usize,
    cfg: &SelectionConfig,
) -> Result<FilterDecision> {
    let extended = extend(scenario, assoc, ue, &[bs])?;
    let alpha = &basis.alpha_star;
    let eta_before = current.objective();

    if assoc.is_serving(bs, ue) {
        let load: f64 = (0..scenario.num_ues())
            .filter(|&k| assoc.is_serving(bs, k))
            .map(|k| alpha[k])
            .sum();
        return Ok(FilterDecision {
            ue,
            bs,
            accepted: true,
            condition: true,
            kappa_out: extended,
            lhs_load: load,
            rhs_load: load,
            mu: 1.0,
            eta_before,
            eta_after: eta_before,
            solution_out: Some(current.clone()),
        });
    }

    let updated = demand_map_h(scenario, &extended, alpha, &basis.eta_star.eta)?;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for k in (0..scenario.num_ues()).filter(|&k| extended.is_serving(bs, k)) {
        lhs += updated[k];
        rhs += alpha[k];
    }
    let mu = updated[ue] / alpha[ue];
    let condition = lhs <= rhs + cfg.tie_tolerance * rhs.max(1.0);

    let mut decision = FilterDecision {
        ue,
        bs,
        accepted: false,
        condition,
        kappa_out: assoc.clone(),
        lhs_load: lhs,
        rhs_load: rhs,
        mu,
        eta_before,
        eta_after: eta_before,
        solution_out: Some(current.clone()),
    };
    if !condition {
        return Ok(decision);
    }

    let warm = cfg
        .fixed_point
        .clone()
        .with_initial(current.alpha_star.iter().map(|a| a.max(1e-12)).collect());
    let solved = solve_optimal(scenario, &extended, &warm);
    let accept = match (cfg.rule, &solved) {
        (FilterRule::LoadCondition, _) => true,
        (FilterRule::Certified, Ok(sol)) => sol.objective() >= eta_before,
        (FilterRule::Certified, Err(_)) => false,
    };
    if accept {
        let sol = solved?;
        decision.accepted = true;
        decision.kappa_out = extended;
        decision.eta_after = sol.objective();
        decision.solution_out = Some(sol);
    }
    Ok(decision)
}

/// Filter for UE `ue` and BS `bs` at association `assoc`.
pub fn filter(
    scenario: &NetworkScenario,
    assoc: &Association,
    ue: usize,
    bs: usize,
    cfg: &SelectionConfig,
) -> Result<FilterDecision> {
    let sol = solve_optimal(scenario, assoc, &cfg.fixed_point)?;
    filter_with(scenario, assoc, &sol, &sol, ue, bs, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub association: Association,
    pub solution: AllocationSolution,
    pub initial_solution: AllocationSolution,
    pub decisions: Vec<FilterDecision>,
}

impl SelectionOutcome {
    pub fn trace(&self) -> impl Iterator<Item = TraceRecord> + '_ {
        self.decisions.iter().map(TraceRecord::from)
    }

    /// Links added on top of the starting association.
    pub fn added_links(&self, kappa_init: &Association) -> usize {
        self.association.links() - kappa_init.links()
    }
}

/// Applies the filter to every UE (ascending) and every BS of its cluster
/// (ascending), then returns the final association and its optimum.
pub fn run_algorithm1(
    scenario: &NetworkScenario,
    kappa_init: &Association,
    cfg: &SelectionConfig,
) -> Result<SelectionOutcome> {
    kappa_init.check_dims(scenario)?;
    if let Some(ue) = kappa_init.first_unserved() {
        return Err(Error::EmptyServingSet { ue });
    }
    let initial = solve_optimal(scenario, kappa_init, &cfg.fixed_point)?;
    let mut assoc = kappa_init.clone();
    let mut current = initial.clone();
    let mut decisions = Vec::new();

    for ue in 0..scenario.num_ues() {
        for bs in scenario.candidate_bs(ue) {
            let basis = if cfg.resolve_after_accept {
                &current
            } else {
                &initial
            };
            let mut d = filter_with(scenario, &assoc, basis, &current, ue, bs, cfg)?;
            if d.accepted {
                assoc = d.kappa_out.clone();
                if let Some(sol) = d.solution_out.take() {
                    current = sol;
                }
            }
            d.solution_out = None;
            decisions.push(d);
        }
    }

    Ok(SelectionOutcome {
        association: assoc,
        solution: current,
        initial_solution: initial,
        decisions,
    })
}

/// Each UE served by the single strongest BS of its cluster
/// (`|coeff| sqrt(p)`), ties to the lowest index.
pub fn default_initial_association(scenario: &NetworkScenario) -> Result<Association> {
    let sets = (0..scenario.num_ues())
        .map(|j| {
            let mut best: Option<(usize, f64)> = None;
            for i in scenario.candidate_bs(j) {
                let bs = &scenario.base_stations[i];
                let strength = bs.gains[j].magnitude() * bs.power_per_ru.sqrt();
                if best.is_none_or(|(_, s)| strength > s) {
                    best = Some((i, strength));
                }
            }
            best.map(|(i, _)| vec![i]).ok_or_else(|| {
                Error::Infeasible(format!("UE {j} has no BS in its cluster"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Association::from_serving_sets(scenario, &sets)
}
