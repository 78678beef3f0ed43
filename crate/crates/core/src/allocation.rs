//! Optimal time-frequency resource allocation for a fixed association.
//!
//! Two fixed points are computed. The load-limited one normalizes the
//! demand map so that the most loaded BS sits exactly at the load cap; the
//! fronthaul-limited one iterates the demand map at the fronthaul QoS level
//! `nu`. The optimum is their elementwise minimum, and the resulting QoS is
//! identical for every UE.
//!
//! All demand quantities use the fraction of the period needed to carry
//! `eta * V_j` bits at rate `C_j`: `eta * V_j / (C_j * |T|)`.

use serde::Serialize;

use crate::channel::{self, shannon_rate};
use crate::error::{Error, Result};
use crate::model::{Allocation, Association, NetworkScenario, QosResult};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
pub const DEFAULT_INITIAL_ALPHA: f64 = 1e-3;

const RESIDUAL_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointConfig {
    /// Elementwise relative residual at which iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Starting point; `None` means every entry at [`DEFAULT_INITIAL_ALPHA`].
    pub initial_alpha: Option<Vec<f64>>,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            initial_alpha: None,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if let Some(init) = &self.initial_alpha {
            if init.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                return Err(Error::InvalidConfig(
                    "initial_alpha must be strictly positive".into(),
                ));
            }
        }
        Ok(())
    }

    fn start(&self, q: usize) -> Result<Vec<f64>> {
        self.validate()?;
        match &self.initial_alpha {
            Some(v) if v.len() != q => Err(Error::DimensionMismatch {
                what: "initial_alpha",
                expected: q,
                got: v.len(),
            }),
            Some(v) => Ok(v.clone()),
            None => Ok(vec![DEFAULT_INITIAL_ALPHA; q]),
        }
    }

    pub fn with_initial(mut self, alpha: Vec<f64>) -> Self {
        self.initial_alpha = Some(alpha);
        self
    }
}

/// Which limit determined a UE's optimal allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binding {
    LoadLimited,
    FronthaulLimited,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binding: Option<Binding>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationSolution {
    pub alpha_star: Allocation,
    pub alpha_load: Allocation,
    /// `None` stands for `+inf` in every entry: the fronthaul iteration
    /// diverged, so the load limit binds.
    pub alpha_fh: Option<Allocation>,
    pub eta_star: QosResult,
    pub binding: Vec<Binding>,
    pub report: SolveReport,
    pub load_report: SolveReport,
    pub fronthaul_report: Option<SolveReport>,
}

impl AllocationSolution {
    /// `|eta*|_1`.
    pub fn objective(&self) -> f64 {
        self.eta_star.eta.iter().sum()
    }

    /// Common QoS level (every entry of `eta*` agrees), 0 with no UEs.
    pub fn common_eta(&self) -> f64 {
        let q = self.eta_star.eta.len();
        if q == 0 {
            0.0
        } else {
            self.objective() / q as f64
        }
    }
}

// ---------------------------------------------------------------------------
// Demand map
// ---------------------------------------------------------------------------

/// `eta_j * V_j / (C_j(alpha) * |T|)`.
pub fn demand_map_t(
    scenario: &NetworkScenario,
    assoc: &Association,
    alloc: &[f64],
    eta_j: f64,
    ue: usize,
) -> Result<f64> {
    let c = channel::rate(scenario, assoc, alloc, ue)?;
    if c <= 0.0 {
        return Err(Error::ZeroRate { ue });
    }
    Ok(eta_j * scenario.demand_volume(ue) / (c * scenario.period_seconds))
}

/// The demand map applied to every UE, with per-UE QoS `eta`.
pub fn demand_map_h(
    scenario: &NetworkScenario,
    assoc: &Association,
    alloc: &[f64],
    eta: &[f64],
) -> Result<Allocation> {
    if eta.len() != scenario.num_ues() {
        return Err(Error::DimensionMismatch {
            what: "eta",
            expected: scenario.num_ues(),
            got: eta.len(),
        });
    }
    let rho = channel::loads(assoc, alloc);
    let out = (0..scenario.num_ues())
        .map(|j| {
            let c = channel::rate_at_loads(scenario, assoc, &rho, j)?;
            if c <= 0.0 {
                return Err(Error::ZeroRate { ue: j });
            }
            Ok(eta[j] * scenario.demand_volume(j) / (c * scenario.period_seconds))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Allocation::from_vec_unchecked(out))
}

/// `|kappa alpha|_inf`, the largest BS load.
pub fn kappa_norm(assoc: &Association, alloc: &[f64]) -> f64 {
    channel::loads(assoc, alloc).max()
}

/// Precomputed coupling structure of one (scenario, association) pair, used
/// by the fixed-point loops.
pub(crate) struct Coupling<'a> {
    scenario: &'a NetworkScenario,
    assoc: &'a Association,
    /// Useful received power per UE (load independent).
    signal: Vec<f64>,
    /// Non-serving BSs with nonzero received power, per UE.
    interferers: Vec<Vec<(usize, f64)>>,
    /// `V_j / |T|`, bits per second.
    demand_rate: Vec<f64>,
}

impl<'a> Coupling<'a> {
    pub(crate) fn new(scenario: &'a NetworkScenario, assoc: &'a Association) -> Result<Self> {
        assoc.check_dims(scenario)?;
        if let Some(ue) = assoc.first_unserved() {
            return Err(Error::EmptyServingSet { ue });
        }
        let q = scenario.num_ues();
        let mut signal = Vec::with_capacity(q);
        let mut interferers = Vec::with_capacity(q);
        // The signal is load independent, so one SINR evaluation at zero
        // load recovers it exactly (interference is zero there).
        let zero = vec![0.0; scenario.num_bs()];
        for j in 0..q {
            let s = channel::sinr(scenario, assoc, &zero, j)? * scenario.noise_power;
            if s <= 0.0 {
                return Err(Error::ZeroRate { ue: j });
            }
            signal.push(s);
            interferers.push(
                scenario
                    .base_stations
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| !assoc.is_serving(*k, j))
                    .map(|(k, b)| (k, b.power_per_ru * b.gains[j].norm_sqr()))
                    .filter(|(_, g)| *g > 0.0)
                    .collect(),
            );
        }
        let demand_rate = (0..q)
            .map(|j| scenario.demand_volume(j) / scenario.period_seconds)
            .collect();
        Ok(Self {
            scenario,
            assoc,
            signal,
            interferers,
            demand_rate,
        })
    }

    pub(crate) fn loads(&self, alpha: &[f64]) -> Vec<f64> {
        channel::loads(self.assoc, alpha).into_inner()
    }

    /// `H(alpha, eta)` with a common scalar QoS, written into `out`.
    /// Returns the largest BS load of `alpha`.
    pub(crate) fn apply(&self, alpha: &[f64], eta: f64, out: &mut [f64]) -> f64 {
        let rho = self.loads(alpha);
        for (j, slot) in out.iter_mut().enumerate() {
            let interference: f64 = self.interferers[j].iter().map(|&(k, g)| g * rho[k]).sum();
            let sinr = self.signal[j] / (interference + self.scenario.noise_power);
            *slot = eta * self.demand_rate[j] / shannon_rate(self.scenario, sinr);
        }
        rho.iter().copied().fold(0.0, f64::max)
    }
}

fn relative_residual(next: &[f64], prev: &[f64]) -> f64 {
    next.iter()
        .zip(prev)
        .map(|(n, p)| (n - p).abs() / p.abs().max(RESIDUAL_FLOOR))
        .fold(0.0, f64::max)
}

fn check_demands(scenario: &NetworkScenario) -> Result<()> {
    for j in 0..scenario.num_ues() {
        if !(scenario.demand_volume(j) > 0.0) {
            return Err(Error::ZeroDemand { ue: j });
        }
    }
    Ok(())
}

/// Load-limited fixed point: `alpha <- rho_max * H(alpha, 1) / |H(alpha, 1)|_kappa`,
/// normalized every step. At the fixed point the largest BS load is exactly
/// the load cap.
pub fn solve_alpha_load(
    scenario: &NetworkScenario,
    assoc: &Association,
    cfg: &FixedPointConfig,
) -> Result<(Allocation, SolveReport)> {
    let coupling = Coupling::new(scenario, assoc)?;
    check_demands(scenario)?;
    let q = scenario.num_ues();
    let mut alpha = cfg.start(q)?;
    if q == 0 {
        return Ok((
            Allocation::zeros(0),
            SolveReport {
                iterations: 0,
                residual: 0.0,
                binding: None,
            },
        ));
    }
    let mut h = vec![0.0; q];
    let mut residual = f64::INFINITY;
    for it in 1..=cfg.max_iterations {
        coupling.apply(&alpha, 1.0, &mut h);
        let norm = coupling.loads(&h).into_iter().fold(0.0, f64::max);
        let scale = scenario.max_load / norm;
        h.iter_mut().for_each(|x| *x *= scale);
        residual = relative_residual(&h, &alpha);
        std::mem::swap(&mut alpha, &mut h);
        if residual < cfg.tolerance {
            return Ok((
                Allocation::from_vec_unchecked(alpha),
                SolveReport {
                    iterations: it,
                    residual,
                    binding: None,
                },
            ));
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
        residual,
    })
}

/// Fronthaul QoS level: smallest `c_i / (sum of V_j served by i)` over BSs
/// carrying demand; `+inf` when none does.
pub fn fronthaul_nu(scenario: &NetworkScenario, assoc: &Association) -> f64 {
    (0..scenario.num_bs())
        .filter_map(|i| {
            let demand: f64 = (0..scenario.num_ues())
                .filter(|&j| assoc.is_serving(i, j))
                .map(|j| scenario.demand_volume(j))
                .sum();
            (demand > 0.0).then(|| scenario.base_stations[i].fronthaul_capacity / demand)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Divergence guard on the fronthaul iteration's largest BS load.
pub fn divergence_limit(scenario: &NetworkScenario) -> f64 {
    10.0 * scenario.max_load.max(1.0)
}

/// Iterates `alpha <- H(alpha, eta)` from the configured start.
pub(crate) fn iterate_at_level(
    coupling: &Coupling<'_>,
    scenario: &NetworkScenario,
    eta: f64,
    cfg: &FixedPointConfig,
) -> Result<(Allocation, SolveReport)> {
    let q = scenario.num_ues();
    let mut alpha = cfg.start(q)?;
    if q == 0 {
        return Ok((
            Allocation::zeros(0),
            SolveReport {
                iterations: 0,
                residual: 0.0,
                binding: None,
            },
        ));
    }
    if !eta.is_finite() {
        return Err(Error::Diverged {
            iterations: 0,
            max_load: f64::INFINITY,
        });
    }
    let guard = divergence_limit(scenario);
    let mut next = vec![0.0; q];
    let mut residual = f64::INFINITY;
    for it in 1..=cfg.max_iterations {
        coupling.apply(&alpha, eta, &mut next);
        let max_load = coupling.loads(&next).into_iter().fold(0.0, f64::max);
        if max_load > guard {
            return Err(Error::Diverged {
                iterations: it,
                max_load,
            });
        }
        residual = relative_residual(&next, &alpha);
        std::mem::swap(&mut alpha, &mut next);
        if residual < cfg.tolerance {
            return Ok((
                Allocation::from_vec_unchecked(alpha),
                SolveReport {
                    iterations: it,
                    residual,
                    binding: None,
                },
            ));
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
        residual,
    })
}

/// Fronthaul-limited fixed point: `alpha <- H(alpha, nu)`.
pub fn solve_alpha_fronthaul(
    scenario: &NetworkScenario,
    assoc: &Association,
    cfg: &FixedPointConfig,
) -> Result<(Allocation, SolveReport)> {
    let coupling = Coupling::new(scenario, assoc)?;
    let nu = fronthaul_nu(scenario, assoc);
    iterate_at_level(&coupling, scenario, nu, cfg)
}

/// Optimal allocation and QoS for a fixed association.
pub fn solve_optimal(
    scenario: &NetworkScenario,
    assoc: &Association,
    cfg: &FixedPointConfig,
) -> Result<AllocationSolution> {
    let coupling = Coupling::new(scenario, assoc)?;
    let q = scenario.num_ues();
    let (alpha_load, load_report) = solve_alpha_load(scenario, assoc, cfg)?;

    let mut t_load = vec![0.0; q];
    coupling.apply(&alpha_load, 1.0, &mut t_load);
    let lambda = if q == 0 {
        0.0
    } else {
        alpha_load
            .iter()
            .zip(&t_load)
            .map(|(a, t)| a / t)
            .fold(f64::INFINITY, f64::min)
    };
    let nu = fronthaul_nu(scenario, assoc);

    // When nu >= lambda the fronthaul fixed point dominates the load one
    // and only matters for diagnostics, so failing to reach it is harmless.
    let fh_start = cfg.clone().with_initial(alpha_load.to_vec());
    let (alpha_fh, fronthaul_report) = match iterate_at_level(&coupling, scenario, nu, &fh_start)
    {
        Ok((a, r)) => (Some(a), Some(r)),
        Err(Error::Diverged { .. }) => (None, None),
        Err(Error::NoConvergence { .. }) if nu >= lambda => (None, None),
        Err(e) => return Err(e),
    };

    let mut alpha_star = alpha_load.to_vec();
    let mut binding = vec![Binding::LoadLimited; q];
    if let Some(fh) = &alpha_fh {
        for j in 0..q {
            if fh[j] < alpha_star[j] {
                alpha_star[j] = fh[j];
                binding[j] = Binding::FronthaulLimited;
            }
        }
    }

    let mut t_star = vec![0.0; q];
    coupling.apply(&alpha_star, 1.0, &mut t_star);
    let eta: Vec<f64> = alpha_star
        .iter()
        .zip(&t_star)
        .map(|(a, t)| (a / t).min(nu))
        .collect();
    let loads = coupling.loads(&alpha_star);
    let fronthaul_usage = (0..scenario.num_bs())
        .map(|i| {
            (0..q)
                .filter(|&j| assoc.is_serving(i, j))
                .map(|j| eta[j] * scenario.demand_volume(j))
                .fold(0.0, |acc, v| acc + v)
        })
        .collect();

    let overall = if binding.contains(&Binding::FronthaulLimited) {
        Binding::FronthaulLimited
    } else {
        Binding::LoadLimited
    };
    let report = SolveReport {
        iterations: load_report.iterations
            + fronthaul_report.as_ref().map_or(0, |r| r.iterations),
        residual: fronthaul_report
            .as_ref()
            .map_or(load_report.residual, |r| r.residual.max(load_report.residual)),
        binding: Some(overall),
    };
    Ok(AllocationSolution {
        alpha_star: Allocation::from_vec_unchecked(alpha_star),
        alpha_load,
        alpha_fh,
        eta_star: QosResult {
            eta,
            lambda,
            nu,
            loads,
            fronthaul_usage,
        },
        binding,
        report,
        load_report,
        fronthaul_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::jain_fairness;
    use crate::model::tests::{one_cluster, unit_scenario};
    use crate::model::{BaseStation, EffectiveGain, TrafficTrace, User};
    use proptest::prelude::*;

    fn cfg() -> FixedPointConfig {
        FixedPointConfig::default()
    }

    /// Two isolated BS-UE pairs in separate clusters.
    fn isolated_pairs(v0: f64, v1: f64, g0: f64, g1: f64) -> (NetworkScenario, Association) {
        let mut s = one_cluster(&[&[g0, 0.0], &[0.0, g1]]);
        s.users[0].traffic = TrafficTrace::constant(1.0, v0);
        s.users[1].traffic = TrafficTrace::constant(1.0, v1);
        let a = Association::from_serving_sets(&s, &[vec![0], vec![1]]).unwrap();
        (s, a)
    }

    /// Two BS-UE pairs that interfere with each other.
    pub(crate) fn coupled_pair(cross: f64) -> (NetworkScenario, Association) {
        let mut s = one_cluster(&[&[2.0, cross], &[cross, 1.5]]);
        s.users[0].traffic = TrafficTrace::constant(1.0, 0.8);
        s.users[1].traffic = TrafficTrace::constant(1.0, 0.5);
        let a = Association::from_serving_sets(&s, &[vec![0], vec![1]]).unwrap();
        (s, a)
    }

    #[test]
    fn demand_map_t_examples() {
        let s = unit_scenario();
        let a = Association::from_serving_sets(&s, &[vec![0]]).unwrap();
        // V = C * 1 s with C = 1 bit/s
        assert!((demand_map_t(&s, &a, &[0.3], 1.0, 0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(demand_map_t(&s, &a, &[0.3], 0.0, 0).unwrap(), 0.0);
        let empty = Association::empty(1, 1);
        assert_eq!(
            demand_map_t(&s, &empty, &[0.3], 1.0, 0),
            Err(Error::EmptyServingSet { ue: 0 })
        );
    }

    #[test]
    fn demand_map_divides_by_period() {
        let mut s = unit_scenario();
        s.period_seconds = 0.5;
        s.users[0].traffic = TrafficTrace::constant(0.5, 0.25);
        let a = Association::from_serving_sets(&s, &[vec![0]]).unwrap();
        // 0.25 bits at 1 bit/s takes 0.25 s = half the period
        assert!((demand_map_t(&s, &a, &[0.0], 1.0, 0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kappa_norm_examples() {
        let s = one_cluster(&[&[1.0, 1.0]]);
        let a = Association::from_serving_sets(&s, &[vec![0], vec![0]]).unwrap();
        assert_eq!(kappa_norm(&a, &[0.0, 0.0]), 0.0);
        assert!((kappa_norm(&a, &[0.3, 0.4]) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn load_fixed_point_isolated_symmetric() {
        let (s, a) = isolated_pairs(1.0, 1.0, 1.0, 1.0);
        let (alpha, rep) = solve_alpha_load(&s, &a, &cfg()).unwrap();
        assert!((alpha[0] - 1.0).abs() < 1e-12 && (alpha[1] - 1.0).abs() < 1e-12);
        assert!(rep.iterations >= 1);
    }

    #[test]
    fn load_fixed_point_single_ue() {
        let mut s = unit_scenario();
        s.max_load = 0.8;
        let a = Association::from_serving_sets(&s, &[vec![0]]).unwrap();
        let (alpha, _) = solve_alpha_load(&s, &a, &cfg()).unwrap();
        assert!((alpha[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_demand_is_rejected() {
        let (s, a) = isolated_pairs(1.0, 0.0, 1.0, 1.0);
        assert_eq!(
            solve_alpha_load(&s, &a, &cfg()).unwrap_err(),
            Error::ZeroDemand { ue: 1 }
        );
    }

    #[test]
    fn unserved_ue_is_rejected() {
        let (s, _) = isolated_pairs(1.0, 1.0, 1.0, 1.0);
        let a = Association::from_serving_sets(&s, &[vec![0], vec![]]).unwrap();
        assert_eq!(
            solve_optimal(&s, &a, &cfg()).unwrap_err(),
            Error::EmptyServingSet { ue: 1 }
        );
    }

    #[test]
    fn no_convergence_is_reported() {
        let (s, a) = coupled_pair(1.0);
        let c = FixedPointConfig {
            max_iterations: 1,
            ..cfg()
        };
        assert!(matches!(
            solve_alpha_load(&s, &a, &c),
            Err(Error::NoConvergence { iterations: 1, .. })
        ));
    }

    /// Bisection oracle for the load fixed point of a 2-UE system: for a
    /// trial alpha_0, the UE-0 equation fixes lambda and the UE-1 equation
    /// alpha_1 = lambda T_1 is solved by an inner bisection; the max-load
    /// normalization closes the system.
    fn bisection_load_oracle(g: [[f64; 2]; 2], v: [f64; 2], rho_max: f64) -> [f64; 2] {
        // serving: BS0 -> UE0, BS1 -> UE1; loads equal alphas.
        let t = |j: usize, other_load: f64| {
            let other = 1 - j;
            let sinr = g[j][j].powi(2) / (g[other][j].powi(2) * other_load + 1.0);
            v[j] / (1.0 + sinr).log2()
        };
        // For given lambda, the SIF fixed point alpha = lambda * T(alpha)
        // by monotone iteration from 0, then bisect lambda on max(alpha) = rho_max.
        let fixed = |lambda: f64| {
            let mut a = [0.0f64; 2];
            for _ in 0..100_000 {
                let n = [lambda * t(0, a[1]), lambda * t(1, a[0])];
                if (n[0] - a[0]).abs() < 1e-16 && (n[1] - a[1]).abs() < 1e-16 {
                    return n;
                }
                a = n;
                if a[0] > 1e6 {
                    return a;
                }
            }
            a
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        while fixed(hi)[0].max(fixed(hi)[1]) < rho_max {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let f = fixed(mid);
            if f[0].max(f[1]) < rho_max {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        fixed(0.5 * (lo + hi))
    }

    #[test]
    fn load_fixed_point_matches_bisection_oracle() {
        let (s, a) = coupled_pair(0.9);
        let (alpha, _) = solve_alpha_load(&s, &a, &cfg()).unwrap();
        let oracle = bisection_load_oracle([[2.0, 0.9], [0.9, 1.5]], [0.8, 0.5], 1.0);
        for j in 0..2 {
            assert!(
                (alpha[j] - oracle[j]).abs() < 1e-8,
                "{j}: {} vs {}",
                alpha[j],
                oracle[j]
            );
        }
        assert!((kappa_norm(&a, &alpha) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fronthaul_fixed_point_without_interference() {
        let (mut s, a) = isolated_pairs(1.0, 2.0, 1.0, 3.0);
        s.base_stations[0].fronthaul_capacity = 0.5;
        s.base_stations[1].fronthaul_capacity = 4.0;
        let nu = fronthaul_nu(&s, &a);
        assert_eq!(nu, 0.5);
        let (alpha, _) = solve_alpha_fronthaul(&s, &a, &cfg()).unwrap();
        let c = [1.0f64, (1.0f64 + 9.0).log2()];
        assert!((alpha[0] - nu * 1.0 / c[0]).abs() < 1e-12);
        assert!((alpha[1] - nu * 2.0 / c[1]).abs() < 1e-12);

        // scaling nu by c scales alpha by c
        for bs in &mut s.base_stations {
            bs.fronthaul_capacity *= 1.5;
        }
        let (scaled, _) = solve_alpha_fronthaul(&s, &a, &cfg()).unwrap();
        for j in 0..2 {
            assert!((scaled[j] - 1.5 * alpha[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn fronthaul_fixed_point_matches_monotone_iteration() {
        let (mut s, a) = coupled_pair(0.7);
        for bs in &mut s.base_stations {
            bs.fronthaul_capacity = 0.3;
        }
        let nu = fronthaul_nu(&s, &a);
        let (alpha, _) = solve_alpha_fronthaul(&s, &a, &cfg()).unwrap();
        // oracle: plain iteration from zero, written out by hand
        let t = |j: usize, other_load: f64, g: [[f64; 2]; 2], v: [f64; 2]| {
            let sinr = g[j][j].powi(2) / (g[1 - j][j].powi(2) * other_load + 1.0);
            nu * v[j] / (1.0 + sinr).log2()
        };
        let g = [[2.0, 0.7], [0.7, 1.5]];
        let v = [0.8, 0.5];
        let mut x = [0.0f64; 2];
        loop {
            let n = [t(0, x[1], g, v), t(1, x[0], g, v)];
            let done = (n[0] - x[0]).abs().max((n[1] - x[1]).abs()) < 1e-12;
            x = n;
            if done {
                break;
            }
        }
        for j in 0..2 {
            assert!((alpha[j] - x[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn optimal_single_link_load_limited() {
        let mut s = unit_scenario();
        s.max_load = 0.6;
        s.users[0].traffic = TrafficTrace::constant(1.0, 2.0);
        let a = Association::from_serving_sets(&s, &[vec![0]]).unwrap();
        let sol = solve_optimal(&s, &a, &cfg()).unwrap();
        // lambda = rho_max * C / V = 0.6 * 1 / 2
        assert!((sol.eta_star.eta[0] - 0.3).abs() < 1e-12);
        assert!((sol.eta_star.lambda - 0.3).abs() < 1e-12);
        assert_eq!(sol.binding, vec![Binding::LoadLimited]);
    }

    #[test]
    fn optimal_single_link_fronthaul_limited() {
        let mut s = unit_scenario();
        s.users[0].traffic = TrafficTrace::constant(1.0, 2.0);
        s.base_stations[0].fronthaul_capacity = 0.2;
        let a = Association::from_serving_sets(&s, &[vec![0]]).unwrap();
        let sol = solve_optimal(&s, &a, &cfg()).unwrap();
        assert!((sol.eta_star.eta[0] - 0.1).abs() < 1e-12);
        assert_eq!(sol.eta_star.nu, 0.1);
        assert_eq!(sol.binding, vec![Binding::FronthaulLimited]);
        assert!((sol.eta_star.fronthaul_usage[0] - 0.2).abs() < 1e-12);
        assert!(sol.eta_star.loads[0] <= s.max_load);
    }

    /// Largest common eta with a feasible allocation, by sweeping eta and
    /// checking constraints through monotone iteration from zero.
    fn grid_oracle(s: &NetworkScenario, a: &Association) -> f64 {
        let feasible = |eta: f64| -> bool {
            let q = s.num_ues();
            let mut x = vec![0.0; q];
            for _ in 0..20_000 {
                let rho = channel::loads(a, &x);
                if rho.max() > s.max_load * (1.0 + 1e-12) {
                    return false;
                }
                let n: Vec<f64> = (0..q)
                    .map(|j| {
                        eta * s.demand_volume(j)
                            / (channel::rate_at_loads(s, a, &rho, j).unwrap() * s.period_seconds)
                    })
                    .collect();
                let diff = n.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                x = n;
                if diff < 1e-14 {
                    break;
                }
            }
            let fh_ok = (0..s.num_bs()).all(|i| {
                let used: f64 = (0..q)
                    .filter(|&j| a.is_serving(i, j))
                    .map(|j| eta * s.demand_volume(j))
                    .sum();
                used <= s.base_stations[i].fronthaul_capacity * (1.0 + 1e-12)
            });
            channel::loads(a, &x).max() <= s.max_load * (1.0 + 1e-12) && fh_ok
        };
        let mut hi = 1.0;
        while feasible(hi) {
            hi *= 2.0;
        }
        let steps = 2000;
        let mut best = 0.0;
        for k in 1..=steps {
            let e = hi * k as f64 / steps as f64;
            if feasible(e) {
                best = e;
            } else {
                break;
            }
        }
        let (mut lo, mut up) = (best, best + hi / steps as f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + up);
            if feasible(mid) {
                lo = mid;
            } else {
                up = mid;
            }
        }
        lo
    }

    #[test]
    fn optimal_three_ue_matches_grid_oracle() {
        let mut s = one_cluster(&[&[2.0, 0.6, 0.3], &[0.5, 1.8, 0.2], &[0.4, 0.7, 2.5]]);
        s.users[0].traffic = TrafficTrace::constant(1.0, 0.7);
        s.users[1].traffic = TrafficTrace::constant(1.0, 0.4);
        s.users[2].traffic = TrafficTrace::constant(1.0, 1.1);
        let a = Association::from_serving_sets(&s, &[vec![0], vec![1], vec![2]]).unwrap();
        let sol = solve_optimal(&s, &a, &cfg()).unwrap();
        let oracle = grid_oracle(&s, &a);
        let eta = sol.common_eta();
        assert!(((eta - oracle) / oracle).abs() < 1e-6, "{eta} vs {oracle}");
    }

    #[test]
    fn no_users_is_trivial() {
        let mut s = unit_scenario();
        s.users.clear();
        s.base_stations[0].gains.clear();
        let a = Association::empty(1, 0);
        let sol = solve_optimal(&s, &a, &cfg()).unwrap();
        assert!(sol.eta_star.eta.is_empty());
        assert_eq!(sol.eta_star.nu, f64::INFINITY);
    }

    #[test]
    fn coupling_matches_public_demand_map() {
        let (s, a) = coupled_pair(0.8);
        let c = Coupling::new(&s, &a).unwrap();
        let alpha = [0.3, 0.45];
        let mut fast = [0.0; 2];
        c.apply(&alpha, 1.7, &mut fast);
        let slow = demand_map_h(&s, &a, &alpha, &[1.7, 1.7]).unwrap();
        for j in 0..2 {
            assert!((fast[j] - slow[j]).abs() < 1e-14 * slow[j]);
        }
    }

    // -------------------------------------------------------------------
    // Random-instance properties
    // -------------------------------------------------------------------

    /// Random single-cluster instance with one serving BS per UE.
    fn arb_instance() -> impl Strategy<Value = (NetworkScenario, Association)> {
        (1usize..4, 1usize..5)
            .prop_flat_map(|(m, q)| {
                (
                    prop::collection::vec(prop::collection::vec(0.05f64..3.0, q), m),
                    prop::collection::vec(0..m, q),
                    prop::collection::vec(0.1f64..2.0, q),
                    prop::collection::vec(0.05f64..5.0, m),
                    0.3f64..=1.0,
                )
            })
            .prop_map(|(gains, serving, demand, fh, rho_max)| {
                let q = demand.len();
                let s = NetworkScenario {
                    clusters: vec![1],
                    base_stations: gains
                        .iter()
                        .zip(&fh)
                        .map(|(row, &c)| BaseStation {
                            cluster: 1,
                            position: [0.0, 0.0],
                            power_per_ru: 1.0,
                            fronthaul_capacity: c,
                            gains: row.iter().map(|&g| EffectiveGain::real(g)).collect(),
                        })
                        .collect(),
                    users: demand
                        .iter()
                        .map(|&v| User {
                            cluster: 1,
                            position: [0.0, 0.0],
                            traffic: TrafficTrace::constant(1.0, v),
                        })
                        .collect(),
                    noise_power: 1.0,
                    rus_per_bs: 1,
                    ru_bandwidth_hz: 1.0,
                    max_load: rho_max,
                    period_seconds: 1.0,
                };
                let sets: Vec<Vec<usize>> = serving.iter().map(|&i| vec![i]).collect();
                let a = Association::from_serving_sets(&s, &sets).unwrap();
                assert_eq!(a.num_ues(), q);
                (s, a)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn load_fixed_point_is_start_independent(
            (s, a) in arb_instance(),
            x in prop::collection::vec(1e-4f64..5.0, 4),
            y in prop::collection::vec(1e-4f64..5.0, 4),
        ) {
            let q = s.num_ues();
            let c1 = cfg().with_initial(x[..q].to_vec());
            let c2 = cfg().with_initial(y[..q].to_vec());
            let (a1, _) = solve_alpha_load(&s, &a, &c1).unwrap();
            let (a2, _) = solve_alpha_load(&s, &a, &c2).unwrap();
            for j in 0..q {
                prop_assert!((a1[j] - a2[j]).abs() <= 10.0 * DEFAULT_TOLERANCE * a1[j].max(1e-3) * 10.0);
            }
            // the cap binds at the most loaded BS
            prop_assert!((kappa_norm(&a, &a1) - s.max_load).abs() <= 1e-9 * s.max_load);
        }

        #[test]
        fn optimum_is_fair_and_feasible((s, a) in arb_instance()) {
            let sol = solve_optimal(&s, &a, &cfg()).unwrap();
            let eta = &sol.eta_star.eta;
            let mean = sol.common_eta();
            let spread = eta.iter().fold(f64::MIN, |m, &e| m.max(e)) - eta.iter().fold(f64::MAX, |m, &e| m.min(e));
            prop_assert!(spread <= 1e-8 * mean);
            prop_assert!(jain_fairness(eta).unwrap() >= 1.0 - 1e-6);
            // binding is uniform and eta = min(lambda, nu)
            prop_assert!(sol.binding.iter().all(|b| *b == sol.binding[0]) ||
                ((sol.eta_star.lambda - sol.eta_star.nu).abs() <= 1e-8 * sol.eta_star.lambda));
            let expect = sol.eta_star.lambda.min(sol.eta_star.nu);
            prop_assert!((mean - expect).abs() <= 1e-8 * expect);
            // direct substitution into the constraints
            for (i, bs) in s.base_stations.iter().enumerate() {
                prop_assert!(sol.eta_star.loads[i] <= s.max_load * (1.0 + 1e-9));
                prop_assert!(sol.eta_star.fronthaul_usage[i] <= bs.fronthaul_capacity * (1.0 + 1e-9));
            }
            let needed = demand_map_h(&s, &a, &sol.alpha_star, eta).unwrap();
            for j in 0..s.num_ues() {
                prop_assert!(sol.alpha_star[j] >= needed[j] * (1.0 - 1e-8));
                let fh = sol.alpha_fh.as_ref().map_or(f64::INFINITY, |f| f[j]);
                prop_assert_eq!(sol.alpha_star[j], sol.alpha_load[j].min(fh));
            }
        }

        #[test]
        fn demand_map_is_standard_interference_function(
            (s, a) in arb_instance(),
            base in prop::collection::vec(0.0f64..2.0, 4),
            bump in prop::collection::vec(0.0f64..1.0, 4),
            c in 1.001f64..10.0,
            nu in 0.01f64..10.0,
        ) {
            let q = s.num_ues();
            let x = &base[..q];
            let y: Vec<f64> = x.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let hx = demand_map_h(&s, &a, x, &vec![nu; q]).unwrap();
            let hy = demand_map_h(&s, &a, &y, &vec![nu; q]).unwrap();
            let cx: Vec<f64> = x.iter().map(|v| v * c).collect();
            let hcx = demand_map_h(&s, &a, &cx, &vec![nu; q]).unwrap();
            for j in 0..q {
                prop_assert!(hx[j] > 0.0);
                prop_assert!(hx[j] <= hy[j] + 1e-12);
                prop_assert!(c * hx[j] > hcx[j] - 1e-12);
            }
        }

        #[test]
        fn fronthaul_iterates_from_zero_are_nondecreasing((s, a) in arb_instance()) {
            let coupling = Coupling::new(&s, &a).unwrap();
            let nu = fronthaul_nu(&s, &a);
            let q = s.num_ues();
            let mut x = vec![0.0; q];
            let mut n = vec![0.0; q];
            for _ in 0..200 {
                coupling.apply(&x, nu, &mut n);
                for j in 0..q {
                    prop_assert!(n[j] >= x[j] * (1.0 - 1e-12));
                }
                if coupling.loads(&n).into_iter().fold(0.0, f64::max) > 1e6 { break; }
                std::mem::swap(&mut x, &mut n);
            }
        }
    }
}
