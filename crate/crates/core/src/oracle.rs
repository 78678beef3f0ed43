//! Brute-force verifiers for small instances.
//!
//! Nothing here goes through the allocation solvers' fixed-point code: the
//! required allocation at a given QoS is recomputed from the channel model
//! by plain monotone iteration from zero.

use serde::Serialize;

use crate::allocation::{solve_optimal, AllocationSolution, FixedPointConfig};
use crate::channel;
use crate::error::{Error, Result};
use crate::model::{Association, NetworkScenario};
use crate::scenario::{self, CnfFormula, SatInstance};

/// Relative slack on the load and fronthaul limits.
pub const LIMIT_SLACK: f64 = 1e-9;
/// Largest association space (log2) the enumerator accepts.
pub const ENUMERATION_LIMIT_LOG2: usize = 20;

const MAX_SWEEP_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "constraint", rename_all = "kebab-case")]
pub enum ConstraintViolation {
    /// A UE cannot be given any rate (empty serving set or zero gain).
    DemandCoupling { ue: usize },
    LoadLimit { bs: usize },
    FronthaulLimit { bs: usize },
}

impl ConstraintViolation {
    pub fn id(&self) -> &'static str {
        match self {
            ConstraintViolation::DemandCoupling { .. } => "demand-coupling",
            ConstraintViolation::LoadLimit { .. } => "load-limit",
            ConstraintViolation::FronthaulLimit { .. } => "fronthaul-limit",
        }
    }
}

impl std::fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstraintViolation::DemandCoupling { ue } => write!(f, "{} (UE {ue})", self.id()),
            ConstraintViolation::LoadLimit { bs } | ConstraintViolation::FronthaulLimit { bs } => {
                write!(f, "{} (BS {bs})", self.id())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    /// Minimal allocation meeting the demand at the requested QoS.
    Feasible { alpha: Vec<f64> },
    Violated(ConstraintViolation),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// Whether every UE can carry `eta` times its demand under `assoc`.
pub fn feasibility_check(scenario: &NetworkScenario, assoc: &Association, eta: f64) -> Feasibility {
    let q = scenario.num_ues();
    for j in 0..q {
        let zero = vec![0.0; scenario.num_bs()];
        match channel::sinr(scenario, assoc, &zero, j) {
            Ok(g) if g > 0.0 => {}
            _ => return Feasibility::Violated(ConstraintViolation::DemandCoupling { ue: j }),
        }
    }
    for (i, bs) in scenario.base_stations.iter().enumerate() {
        let used: f64 = (0..q)
            .filter(|&j| assoc.is_serving(i, j))
            .map(|j| eta * scenario.demand_volume(j))
            .sum();
        if used > bs.fronthaul_capacity * (1.0 + LIMIT_SLACK) {
            return Feasibility::Violated(ConstraintViolation::FronthaulLimit { bs: i });
        }
    }
    required_allocation(scenario, assoc, eta, vec![0.0; q])
}

/// Monotone iteration `alpha <- eta V / (C(alpha) |T|)` from `start`, which
/// must lie below the fixed point (zero, or the fixed point at a smaller
/// QoS). Stops as soon as a load exceeds the cap.
fn required_allocation(
    scenario: &NetworkScenario,
    assoc: &Association,
    eta: f64,
    start: Vec<f64>,
) -> Feasibility {
    let q = scenario.num_ues();
    let cap = scenario.max_load * (1.0 + LIMIT_SLACK);
    let mut alpha = start;
    for _ in 0..MAX_SWEEP_ITERATIONS {
        let rho = channel::loads(assoc, &alpha);
        if let Some((bs, _)) = rho
            .iter()
            .enumerate()
            .filter(|(_, &r)| r > cap)
            .max_by(|a, b| a.1.total_cmp(b.1))
        {
            return Feasibility::Violated(ConstraintViolation::LoadLimit { bs });
        }
        let mut change: f64 = 0.0;
        let next: Vec<f64> = (0..q)
            .map(|j| {
                let c = channel::rate_at_loads(scenario, assoc, &rho, j)
                    .expect("serving sets checked");
                let a = eta * scenario.demand_volume(j) / (c * scenario.period_seconds);
                change = change.max((a - alpha[j]).abs() / a.max(1e-300));
                a
            })
            .collect();
        alpha = next;
        if change < 1e-14 {
            break;
        }
    }
    let rho = channel::loads(assoc, &alpha);
    match rho
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > cap)
        .max_by(|a, b| a.1.total_cmp(b.1))
    {
        Some((bs, _)) => Feasibility::Violated(ConstraintViolation::LoadLimit { bs }),
        None => Feasibility::Feasible { alpha },
    }
}

/// Iterator over every association that respects cluster membership and
/// serves every UE.
#[derive(Debug, Clone)]
pub struct Associations<'a> {
    scenario: &'a NetworkScenario,
    candidates: Vec<Vec<usize>>,
    // per-UE subset mask, 1..2^k - 1
    masks: Vec<u32>,
    done: bool,
}

impl Iterator for Associations<'_> {
    type Item = Association;

    fn next(&mut self) -> Option<Association> {
        if self.done {
            return None;
        }
        let mut assoc = Association::empty(self.scenario.num_bs(), self.scenario.num_ues());
        for (j, (cands, &mask)) in self.candidates.iter().zip(&self.masks).enumerate() {
            for (b, &i) in cands.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    assoc.set(i, j, true);
                }
            }
        }
        // advance the mixed-radix counter
        self.done = true;
        for (cands, mask) in self.candidates.iter().zip(self.masks.iter_mut()) {
            if *mask + 1 < (1u32 << cands.len()) {
                *mask += 1;
                self.done = false;
                break;
            }
            *mask = 1;
        }
        Some(assoc)
    }
}

/// Number of associations [`enumerate_associations`] yields.
pub fn association_count(scenario: &NetworkScenario) -> u128 {
    (0..scenario.num_ues())
        .map(|j| (1u128 << scenario.candidate_bs(j).len()) - 1)
        .product()
}

pub fn enumerate_associations(scenario: &NetworkScenario) -> Result<Associations<'_>> {
    let candidates: Vec<Vec<usize>> = (0..scenario.num_ues())
        .map(|j| scenario.candidate_bs(j))
        .collect();
    let log2_size: usize = candidates.iter().map(Vec::len).sum();
    if log2_size > ENUMERATION_LIMIT_LOG2 {
        return Err(Error::TooLarge {
            log2_size,
            limit: ENUMERATION_LIMIT_LOG2,
        });
    }
    let done = candidates.iter().any(Vec::is_empty);
    Ok(Associations {
        scenario,
        masks: vec![1; candidates.len()],
        candidates,
        done,
    })
}

/// Best association by exhaustive search over [`enumerate_associations`].
pub fn global_optimum(
    scenario: &NetworkScenario,
    cfg: &FixedPointConfig,
) -> Result<(Association, AllocationSolution)> {
    let mut best: Option<(Association, AllocationSolution)> = None;
    for assoc in enumerate_associations(scenario)? {
        let sol = solve_optimal(scenario, &assoc, cfg)?;
        if best
            .as_ref()
            .is_none_or(|(_, b)| sol.objective() > b.objective())
        {
            best = Some((assoc, sol));
        }
    }
    best.ok_or_else(|| Error::Infeasible("no association serves every UE".into()))
}

/// Number of grid points in [`allocation_cross_check`].
pub const CROSS_CHECK_GRID: usize = 100_000;

/// Largest common QoS that passes [`feasibility_check`], by an ascending
/// sweep of `grid` points up to an analytic upper bound, refined by
/// bisection.
pub fn max_feasible_eta(scenario: &NetworkScenario, assoc: &Association, grid: usize) -> f64 {
    let q = scenario.num_ues();
    if q == 0 {
        return 0.0;
    }
    // eta can exceed neither the fronthaul level nor the interference-free
    // load-limited level of any UE
    let zero = vec![0.0; scenario.num_bs()];
    let mut upper = crate::allocation::fronthaul_nu(scenario, assoc);
    for j in 0..q {
        let Ok(c0) = channel::rate_at_loads(scenario, assoc, &zero, j) else {
            return 0.0;
        };
        upper = upper.min(scenario.max_load * c0 * scenario.period_seconds / scenario.demand_volume(j));
    }
    let upper = upper * (1.0 + 2.0 * LIMIT_SLACK);

    let fronthaul_ok = |eta: f64| {
        scenario.base_stations.iter().enumerate().all(|(i, bs)| {
            let used: f64 = (0..q)
                .filter(|&j| assoc.is_serving(i, j))
                .map(|j| eta * scenario.demand_volume(j))
                .sum();
            used <= bs.fronthaul_capacity * (1.0 + LIMIT_SLACK)
        })
    };
    let check = |eta: f64, start: &[f64]| -> Option<Vec<f64>> {
        if !fronthaul_ok(eta) {
            return None;
        }
        match required_allocation(scenario, assoc, eta, start.to_vec()) {
            Feasibility::Feasible { alpha } => Some(alpha),
            Feasibility::Violated(_) => None,
        }
    };

    let mut lo = 0.0;
    let mut lo_alpha = vec![0.0; q];
    let mut hi = None;
    for k in 1..=grid {
        let eta = upper * k as f64 / grid as f64;
        match check(eta, &lo_alpha) {
            Some(a) => {
                lo = eta;
                lo_alpha = a;
            }
            None => {
                hi = Some(eta);
                break;
            }
        }
    }
    let Some(mut hi) = hi else {
        return lo;
    };
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match check(mid, &lo_alpha) {
            Some(a) => {
                lo = mid;
                lo_alpha = a;
            }
            None => hi = mid,
        }
    }
    lo
}

/// Relative gap between the solver's common QoS and the sweep oracle's.
pub fn allocation_cross_check(
    scenario: &NetworkScenario,
    assoc: &Association,
    cfg: &FixedPointConfig,
) -> Result<f64> {
    if scenario.num_ues() > 3 {
        return Err(Error::InvalidConfig(
            "cross check is limited to at most 3 UEs".into(),
        ));
    }
    let sol = solve_optimal(scenario, assoc, cfg)?;
    let oracle = max_feasible_eta(scenario, assoc, CROSS_CHECK_GRID);
    let solver = sol.common_eta();
    Ok(sol
        .eta_star
        .eta
        .iter()
        .map(|e| (e - oracle).abs() / oracle.max(solver).max(1e-300))
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// 3-SAT certification
// ---------------------------------------------------------------------------

/// First satisfying assignment in truth-table order, if any.
pub fn truth_table_sat(formula: &CnfFormula) -> Option<Vec<bool>> {
    let n = formula.n_vars;
    assert!(n < 32, "truth table limited to 31 variables");
    (0u64..1 << n)
        .map(|bits| (0..n).map(|v| bits >> v & 1 == 1).collect::<Vec<bool>>())
        .find(|a| formula.evaluate(a))
}

/// First association (enumeration order) feasible at the instance's target
/// QoS, if any.
pub fn reduction_witness(instance: &SatInstance) -> Result<Option<Association>> {
    let target = instance.meta.target_eta;
    for assoc in enumerate_associations(&instance.scenario)? {
        if feasibility_check(&instance.scenario, &assoc, target).is_feasible() {
            return Ok(Some(assoc));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub satisfiable: bool,
    pub feasible: bool,
    pub assignment: Option<Vec<bool>>,
    /// Serving sets of the feasible association, if any.
    pub association: Option<Vec<Vec<usize>>>,
    /// Assignment decoded from the feasible association.
    pub decoded_assignment: Option<Vec<bool>>,
}

impl Certificate {
    pub fn consistent(&self) -> bool {
        self.satisfiable == self.feasible
    }
}

/// Satisfiability by truth table next to feasibility of the reduction
/// instance by association enumeration.
pub fn certify(formula: &CnfFormula) -> Result<Certificate> {
    let instance = scenario::build_sat_instance(formula)?;
    let assignment = truth_table_sat(formula);
    let witness = reduction_witness(&instance)?;
    Ok(Certificate {
        satisfiable: assignment.is_some(),
        feasible: witness.is_some(),
        decoded_assignment: witness
            .as_ref()
            .and_then(|a| scenario::association_to_assignment(&instance.meta, a)),
        association: witness.map(|a| a.serving_sets()),
        assignment,
    })
}
