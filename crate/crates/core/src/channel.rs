//! Link quality under joint transmission: SINR, Shannon rate and BS load.

use std::ops::Deref;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Association, NetworkScenario};

/// Per-BS occupied-RU fraction. Also the probability that the BS is
/// transmitting on any given RU, and therefore interfering.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct LoadVector(Vec<f64>);

impl LoadVector {
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for LoadVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `rho_k = sum of alpha_j over UEs served by k`.
pub fn loads(assoc: &Association, alloc: &[f64]) -> LoadVector {
    let q = assoc.num_ues();
    debug_assert_eq!(alloc.len(), q);
    LoadVector(
        (0..assoc.num_bs())
            .map(|i| {
                (0..q)
                    .filter(|&j| assoc.is_serving(i, j))
                    .map(|j| alloc[j])
                    .fold(0.0, |acc, a| acc + a)
            })
            .collect(),
    )
}

/// SINR of `ue` given interferer activity `loads`.
///
/// The useful signal is the coherent sum of `sqrt(p_i) * coeff_ij` over the
/// serving set; every other BS `k` contributes `p_k |coeff_kj|^2 rho_k` of
/// interference.
pub fn sinr(
    scenario: &NetworkScenario,
    assoc: &Association,
    loads: &[f64],
    ue: usize,
) -> Result<f64> {
    if ue >= scenario.num_ues() {
        return Err(Error::IndexOutOfRange {
            what: "UE",
            index: ue,
            len: scenario.num_ues(),
        });
    }
    let mut signal = [Complex64::new(0.0, 0.0); 2];
    let mut interference = 0.0;
    let mut served = false;
    for (k, bs) in scenario.base_stations.iter().enumerate() {
        let g = &bs.gains[ue];
        if assoc.is_serving(k, ue) {
            served = true;
            let amp = bs.power_per_ru.sqrt();
            let c = g.padded();
            signal[0] += c[0] * amp;
            signal[1] += c[1] * amp;
        } else {
            interference += bs.power_per_ru * g.norm_sqr() * loads[k];
        }
    }
    if !served {
        return Err(Error::EmptyServingSet { ue });
    }
    let num = signal[0].norm_sqr() + signal[1].norm_sqr();
    Ok(num / (interference + scenario.noise_power))
}

/// Shannon rate in bits/s for a given SINR: `M * B * log2(1 + sinr)`.
pub fn shannon_rate(scenario: &NetworkScenario, sinr: f64) -> f64 {
    scenario.rus_per_bs as f64 * scenario.ru_bandwidth_hz * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Achievable rate of `ue` under allocation `alloc`.
pub fn rate(
    scenario: &NetworkScenario,
    assoc: &Association,
    alloc: &[f64],
    ue: usize,
) -> Result<f64> {
    let rho = loads(assoc, alloc);
    rate_at_loads(scenario, assoc, &rho, ue)
}

pub fn rate_at_loads(
    scenario: &NetworkScenario,
    assoc: &Association,
    loads: &[f64],
    ue: usize,
) -> Result<f64> {
    Ok(shannon_rate(scenario, sinr(scenario, assoc, loads, ue)?))
}

/// Jain's fairness index `|eta|_1^2 / (q |eta|_2^2)`.
pub fn jain_fairness(eta: &[f64]) -> Result<f64> {
    let l1: f64 = eta.iter().sum();
    let l2sq: f64 = eta.iter().map(|e| e * e).sum();
    if eta.is_empty() || l2sq == 0.0 {
        return Err(Error::AllZero);
    }
    Ok(l1 * l1 / (eta.len() as f64 * l2sq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{one_cluster, unit_scenario};
    use crate::model::EffectiveGain;
    use proptest::prelude::*;

    #[test]
    fn zero_allocation_zero_load() {
        let s = one_cluster(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let a = Association::from_serving_sets(&s, &[vec![0], vec![1]]).unwrap();
        assert_eq!(&*loads(&a, &[0.0, 0.0]), &[0.0, 0.0]);
    }

    #[test]
    fn idle_bs_load_is_positive_zero() {
        let s = one_cluster(&[&[1.0], &[1.0]]);
        let a = Association::from_serving_sets(&s, &[vec![0]]).unwrap();
        assert!(loads(&a, &[0.5])[1].is_sign_positive());
    }

    #[test]
    fn load_is_direct_sum() {
        let s = one_cluster(&[&[1.0, 1.0]]);
        let a = Association::from_serving_sets(&s, &[vec![0], vec![0]]).unwrap();
        assert!((loads(&a, &[0.3, 0.4])[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn single_link_sinr() {
        let s = unit_scenario();
        let a = Association::from_serving_sets(&s, &[vec![0]]).unwrap();
        assert_eq!(sinr(&s, &a, &[0.0], 0).unwrap(), 1.0);
        assert_eq!(rate(&s, &a, &[0.5], 0).unwrap(), 1.0);
    }

    #[test]
    fn empty_serving_set() {
        let s = unit_scenario();
        let a = Association::empty(1, 1);
        assert_eq!(sinr(&s, &a, &[0.0], 0), Err(Error::EmptyServingSet { ue: 0 }));
        assert!(rate(&s, &a, &[0.0], 0).is_err());
    }

    #[test]
    fn interferer_load_scales_interference_linearly() {
        // UE 0 served by BS 0, BS 1 interferes with unit gain and load rho.
        let s = one_cluster(&[&[1.0, 0.0], &[1.0, 1.0]]);
        let a = Association::from_serving_sets(&s, &[vec![0], vec![1]]).unwrap();
        for rho in [0.0, 0.25, 0.6, 1.0] {
            let g = sinr(&s, &a, &[0.0, rho], 0).unwrap();
            assert!((g - 1.0 / (1.0 + rho)).abs() < 1e-15);
        }
    }

    #[test]
    fn orthogonal_joint_transmission_adds_power() {
        let mut s = one_cluster(&[&[1.0], &[1.0]]);
        s.base_stations[0].gains[0] =
            EffectiveGain::pair(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        s.base_stations[1].gains[0] =
            EffectiveGain::pair(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        let a = Association::from_serving_sets(&s, &[vec![0, 1]]).unwrap();
        assert!((sinr(&s, &a, &[0.0, 0.0], 0).unwrap() - 2.0).abs() < 1e-15);
        // scalar in-phase coefficients combine coherently instead
        let c = one_cluster(&[&[1.0], &[1.0]]);
        let a = Association::from_serving_sets(&c, &[vec![0, 1]]).unwrap();
        assert!((sinr(&c, &a, &[0.0, 0.0], 0).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn rate_constants() {
        let mut s = unit_scenario();
        s.rus_per_bs = 100;
        s.ru_bandwidth_hz = 180e3;
        assert!((shannon_rate(&s, 3.0) - 36e6).abs() < 1e-6);
    }

    #[test]
    fn jain_closed_forms() {
        assert!((jain_fairness(&[2.5; 7]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(jain_fairness(&[1.0, 0.0]).unwrap(), 0.5);
        assert!((jain_fairness(&[1.0, 2.0, 3.0]).unwrap() - 6.0 / 7.0).abs() < 1e-15);
        assert_eq!(jain_fairness(&[0.0, 0.0]), Err(Error::AllZero));
        assert_eq!(jain_fairness(&[]), Err(Error::AllZero));
    }

    fn random_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>, Vec<f64>)> {
        (2usize..5, 1usize..5).prop_flat_map(|(m, q)| {
            (
                prop::collection::vec(prop::collection::vec(0.01f64..3.0, q), m),
                prop::collection::vec(0..m, q),
                prop::collection::vec(0.0f64..1.0, q),
            )
        })
    }

    fn build(gains: &[Vec<f64>], serving: &[usize]) -> (NetworkScenario, Association) {
        let rows: Vec<&[f64]> = gains.iter().map(|r| r.as_slice()).collect();
        let s = one_cluster(&rows);
        let sets: Vec<Vec<usize>> = serving.iter().map(|&i| vec![i]).collect();
        let a = Association::from_serving_sets(&s, &sets).unwrap();
        (s, a)
    }

    proptest! {
        #[test]
        fn loads_match_per_bs_brute_force((gains, serving, alpha) in random_instance()) {
            let (_, a) = build(&gains, &serving);
            let rho = loads(&a, &alpha);
            for (i, r) in rho.iter().enumerate() {
                let mut sum = 0.0;
                for (j, &owner) in serving.iter().enumerate() {
                    if owner == i { sum += alpha[j]; }
                }
                prop_assert!((r - sum).abs() <= 1e-12);
            }
        }

        #[test]
        fn rate_matches_direct_formula((gains, serving, alpha) in random_instance()) {
            let (s, a) = build(&gains, &serving);
            for j in 0..alpha.len() {
                let mut interference = 0.0;
                for k in 0..gains.len() {
                    if k != serving[j] {
                        let rho_k: f64 = (0..alpha.len()).filter(|&u| serving[u] == k).map(|u| alpha[u]).sum();
                        interference += gains[k][j] * gains[k][j] * rho_k;
                    }
                }
                let g = gains[serving[j]][j].powi(2) / (interference + 1.0);
                let expected = (1.0 + g).log2();
                let got = rate(&s, &a, &alpha, j).unwrap();
                prop_assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
            }
        }

        #[test]
        fn sinr_decreases_in_interferer_load((gains, serving, alpha) in random_instance(), bump in 0.01f64..1.0) {
            let (s, a) = build(&gains, &serving);
            let rho = loads(&a, &alpha).into_inner();
            for j in 0..alpha.len() {
                for k in 0..gains.len() {
                    if k == serving[j] { continue; }
                    let mut up = rho.clone();
                    up[k] += bump;
                    prop_assert!(sinr(&s, &a, &up, j).unwrap() < sinr(&s, &a, &rho, j).unwrap());
                }
            }
        }

        #[test]
        fn sinr_increases_when_bs_joins((gains, serving, alpha) in random_instance()) {
            let (s, a) = build(&gains, &serving);
            let rho = loads(&a, &alpha).into_inner();
            for j in 0..alpha.len() {
                for k in 0..gains.len() {
                    if k == serving[j] { continue; }
                    let mut sets = a.serving_sets();
                    sets[j].push(k);
                    let joined = Association::from_serving_sets(&s, &sets).unwrap();
                    prop_assert!(sinr(&s, &joined, &rho, j).unwrap() > sinr(&s, &a, &rho, j).unwrap());
                }
            }
        }

        #[test]
        fn jain_is_scale_invariant(eta in prop::collection::vec(0.0f64..10.0, 1..8), c in 0.01f64..100.0) {
            prop_assume!(eta.iter().any(|&e| e > 0.0));
            let scaled: Vec<f64> = eta.iter().map(|e| e * c).collect();
            let j0 = jain_fairness(&eta).unwrap();
            prop_assert!((j0 - jain_fairness(&scaled).unwrap()).abs() < 1e-12);
            prop_assert!(j0 >= 1.0 / eta.len() as f64 - 1e-12 && j0 <= 1.0 + 1e-12);
        }
    }
}
