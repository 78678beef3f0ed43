//! Problem-instance types: the network, the BS-UE association and the
//! per-UE resource allocation.
//!
//! Everything here is immutable once built. Solvers borrow a
//! [`NetworkScenario`] and an [`Association`] and never mutate either.

use std::collections::BTreeSet;
use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ClusterId = u32;

/// Composed channel/precoder coefficient `h^H w` of one BS-UE pair, without
/// the transmit power. Dimension 1 for simulated scenarios, 2 for the
/// orthogonal pairs of the SAT reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveGain {
    coeff: [Complex64; 2],
    dim: u8,
}

impl EffectiveGain {
    pub const ZERO: EffectiveGain = EffectiveGain {
        coeff: [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
        dim: 1,
    };

    pub fn scalar(c: Complex64) -> Self {
        Self {
            coeff: [c, Complex64::new(0.0, 0.0)],
            dim: 1,
        }
    }

    /// Nonnegative real amplitude, zero phase.
    pub fn real(amplitude: f64) -> Self {
        Self::scalar(Complex64::new(amplitude, 0.0))
    }

    pub fn pair(first: Complex64, second: Complex64) -> Self {
        Self {
            coeff: [first, second],
            dim: 2,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn components(&self) -> &[Complex64] {
        &self.coeff[..self.dim()]
    }

    /// Zero-padded to two components, for coherent summation across
    /// mixed dimensions.
    pub(crate) fn padded(&self) -> [Complex64; 2] {
        self.coeff
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeff[0].norm_sqr() + self.coeff[1].norm_sqr()
    }

    pub fn magnitude(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeff.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// One constant-rate piece of a traffic trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficSegment {
    pub duration_s: f64,
    pub rate_bps: f64,
}

/// Piecewise-constant traffic density over the scheduling period.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficTrace {
    pub segments: Vec<TrafficSegment>,
}

impl TrafficTrace {
    /// A single segment carrying `volume_bits` uniformly over `period_s`.
    pub fn constant(period_s: f64, volume_bits: f64) -> Self {
        Self {
            segments: vec![TrafficSegment {
                duration_s: period_s,
                rate_bps: volume_bits / period_s,
            }],
        }
    }

    /// Integral of the density over the trace.
    pub fn volume(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s * s.rate_bps).sum()
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseStation {
    pub cluster: ClusterId,
    pub position: [f64; 2],
    /// Watts per RU.
    pub power_per_ru: f64,
    /// Bits per scheduling period.
    pub fronthaul_capacity: f64,
    /// One entry per UE.
    pub gains: Vec<EffectiveGain>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub cluster: ClusterId,
    pub position: [f64; 2],
    pub traffic: TrafficTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    pub clusters: Vec<ClusterId>,
    pub base_stations: Vec<BaseStation>,
    pub users: Vec<User>,
    /// Watts per RU band.
    pub noise_power: f64,
    pub rus_per_bs: u32,
    pub ru_bandwidth_hz: f64,
    pub max_load: f64,
    pub period_seconds: f64,
}

/// A single failed scenario invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub message: String,
}

impl Violation {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl NetworkScenario {
    pub fn num_bs(&self) -> usize {
        self.base_stations.len()
    }

    pub fn num_ues(&self) -> usize {
        self.users.len()
    }

    /// Demand volume `V_j` in bits over the period.
    pub fn demand_volume(&self, ue: usize) -> f64 {
        self.users[ue].traffic.volume()
    }

    pub fn gain(&self, bs: usize, ue: usize) -> &EffectiveGain {
        &self.base_stations[bs].gains[ue]
    }

    /// BS indices located in `cluster`, ascending.
    pub fn cluster_bs(&self, cluster: ClusterId) -> Vec<usize> {
        self.base_stations
            .iter()
            .enumerate()
            .filter(|(_, b)| b.cluster == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    /// BSs allowed to serve `ue` (same cluster), ascending.
    pub fn candidate_bs(&self, ue: usize) -> Vec<usize> {
        self.cluster_bs(self.users[ue].cluster)
    }

    /// Every invariant violation; empty when the scenario is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let known: BTreeSet<ClusterId> = self.clusters.iter().copied().collect();
        if known.len() != self.clusters.len() {
            out.push(Violation::new("duplicate-cluster", "cluster ids are not unique"));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            out.push(Violation::new(
                "nonpositive-noise",
                format!("noise power {} must be positive", self.noise_power),
            ));
        }
        if !(self.max_load > 0.0 && self.max_load <= 1.0) {
            out.push(Violation::new(
                "max-load-range",
                format!("max load {} outside (0, 1]", self.max_load),
            ));
        }
        if self.rus_per_bs < 1 {
            out.push(Violation::new("zero-rus", "rus_per_bs must be at least 1"));
        }
        if !(self.ru_bandwidth_hz > 0.0 && self.ru_bandwidth_hz.is_finite()) {
            out.push(Violation::new("nonpositive-bandwidth", "RU bandwidth must be positive"));
        }
        if !(self.period_seconds > 0.0 && self.period_seconds.is_finite()) {
            out.push(Violation::new("nonpositive-period", "period must be positive"));
        }

        let q = self.num_ues();
        for (i, bs) in self.base_stations.iter().enumerate() {
            if !known.contains(&bs.cluster) {
                out.push(Violation::new(
                    "unknown-cluster",
                    format!("BS {i} references unknown cluster {}", bs.cluster),
                ));
            }
            if !(bs.power_per_ru > 0.0 && bs.power_per_ru.is_finite()) {
                out.push(Violation::new(
                    "nonpositive-power",
                    format!("BS {i} power {} must be positive", bs.power_per_ru),
                ));
            }
            if !(bs.fronthaul_capacity > 0.0) {
                out.push(Violation::new(
                    "nonpositive-fronthaul",
                    format!("BS {i} fronthaul {} must be positive", bs.fronthaul_capacity),
                ));
            }
            if bs.gains.len() != q {
                out.push(Violation::new(
                    "gain-count",
                    format!("BS {i} has {} gains for {q} UEs", bs.gains.len()),
                ));
            }
            if let Some(j) = bs.gains.iter().position(|g| !g.is_finite()) {
                out.push(Violation::new(
                    "nonfinite-gain",
                    format!("BS {i} gain toward UE {j} is not finite"),
                ));
            }
        }

        let tol = 1e-9 * self.period_seconds.abs().max(1.0);
        for (j, ue) in self.users.iter().enumerate() {
            if !known.contains(&ue.cluster) {
                out.push(Violation::new(
                    "unknown-cluster",
                    format!("UE {j} references unknown cluster {}", ue.cluster),
                ));
            }
            let segs = &ue.traffic.segments;
            if segs
                .iter()
                .any(|s| !(s.rate_bps >= 0.0 && s.rate_bps.is_finite()))
            {
                out.push(Violation::new(
                    "negative-traffic",
                    format!("UE {j} has a negative or non-finite traffic rate"),
                ));
            }
            if segs.iter().any(|s| !(s.duration_s >= 0.0)) {
                out.push(Violation::new(
                    "negative-duration",
                    format!("UE {j} has a negative segment duration"),
                ));
            }
            if (ue.traffic.duration() - self.period_seconds).abs() > tol {
                out.push(Violation::new(
                    "trace-coverage",
                    format!(
                        "UE {j} trace covers {} s, period is {} s",
                        ue.traffic.duration(),
                        self.period_seconds
                    ),
                ));
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}

/// Binary BS x UE association matrix honoring cluster obligations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Association {
    num_bs: usize,
    num_ues: usize,
    // row-major, num_bs x num_ues
    cells: Vec<bool>,
}

impl Association {
    pub fn empty(num_bs: usize, num_ues: usize) -> Self {
        Self {
            num_bs,
            num_ues,
            cells: vec![false; num_bs * num_ues],
        }
    }

    /// Builds from per-UE serving sets, rejecting any cross-cluster pair.
    pub fn from_serving_sets(scenario: &NetworkScenario, sets: &[Vec<usize>]) -> Result<Self> {
        let (m, q) = (scenario.num_bs(), scenario.num_ues());
        if sets.len() != q {
            return Err(Error::DimensionMismatch {
                what: "serving sets",
                expected: q,
                got: sets.len(),
            });
        }
        let mut out = Self::empty(m, q);
        for (j, set) in sets.iter().enumerate() {
            for &i in set {
                if i >= m {
                    return Err(Error::IndexOutOfRange {
                        what: "BS",
                        index: i,
                        len: m,
                    });
                }
                check_cluster(scenario, i, j)?;
                out.cells[i * q + j] = true;
            }
        }
        Ok(out)
    }

    /// Builds from an explicit `m x q` matrix, rejecting any cross-cluster 1.
    pub fn from_matrix(scenario: &NetworkScenario, rows: &[Vec<bool>]) -> Result<Self> {
        let (m, q) = (scenario.num_bs(), scenario.num_ues());
        if rows.len() != m {
            return Err(Error::DimensionMismatch {
                what: "association rows",
                expected: m,
                got: rows.len(),
            });
        }
        let mut out = Self::empty(m, q);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != q {
                return Err(Error::DimensionMismatch {
                    what: "association columns",
                    expected: q,
                    got: row.len(),
                });
            }
            for (j, &on) in row.iter().enumerate() {
                if on {
                    check_cluster(scenario, i, j)?;
                    out.cells[i * q + j] = true;
                }
            }
        }
        Ok(out)
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    #[inline]
    pub fn is_serving(&self, bs: usize, ue: usize) -> bool {
        self.cells[bs * self.num_ues + ue]
    }

    pub(crate) fn set(&mut self, bs: usize, ue: usize, on: bool) {
        self.cells[bs * self.num_ues + ue] = on;
    }

    /// `{i : kappa_ij = 1}`, ascending. May be empty.
    pub fn serving_set(&self, ue: usize) -> Result<Vec<usize>> {
        if ue >= self.num_ues {
            return Err(Error::IndexOutOfRange {
                what: "UE",
                index: ue,
                len: self.num_ues,
            });
        }
        Ok((0..self.num_bs).filter(|&i| self.is_serving(i, ue)).collect())
    }

    /// `{j : kappa_ij = 1}`, ascending. May be empty.
    pub fn served_users(&self, bs: usize) -> Result<Vec<usize>> {
        if bs >= self.num_bs {
            return Err(Error::IndexOutOfRange {
                what: "BS",
                index: bs,
                len: self.num_bs,
            });
        }
        Ok((0..self.num_ues).filter(|&j| self.is_serving(bs, j)).collect())
    }

    /// All serving sets, one per UE.
    pub fn serving_sets(&self) -> Vec<Vec<usize>> {
        (0..self.num_ues)
            .map(|j| (0..self.num_bs).filter(|&i| self.is_serving(i, j)).collect())
            .collect()
    }

    /// First UE whose serving set is empty, if any.
    pub fn first_unserved(&self) -> Option<usize> {
        (0..self.num_ues).find(|&j| (0..self.num_bs).all(|i| !self.is_serving(i, j)))
    }

    /// Number of ones in the matrix.
    pub fn links(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn check_dims(&self, scenario: &NetworkScenario) -> Result<()> {
        if self.num_bs != scenario.num_bs() {
            return Err(Error::DimensionMismatch {
                what: "association BS count",
                expected: scenario.num_bs(),
                got: self.num_bs,
            });
        }
        if self.num_ues != scenario.num_ues() {
            return Err(Error::DimensionMismatch {
                what: "association UE count",
                expected: scenario.num_ues(),
                got: self.num_ues,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&AssociationDoc {
            num_bs: self.num_bs,
            serving: self.serving_sets(),
        })
        .expect("association serializes")
    }

    pub fn from_json(scenario: &NetworkScenario, text: &str) -> Result<Self> {
        let doc: AssociationDoc = serde_json::from_str(text)?;
        if doc.num_bs != scenario.num_bs() {
            return Err(Error::DimensionMismatch {
                what: "association BS count",
                expected: scenario.num_bs(),
                got: doc.num_bs,
            });
        }
        Self::from_serving_sets(scenario, &doc.serving)
    }
}

fn check_cluster(scenario: &NetworkScenario, bs: usize, ue: usize) -> Result<()> {
    let bc = scenario.base_stations[bs].cluster;
    let uc = scenario.users[ue].cluster;
    if bc != uc {
        return Err(Error::ClusterViolation {
            bs,
            ue,
            bs_cluster: bc,
            ue_cluster: uc,
        });
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AssociationDoc {
    pub num_bs: usize,
    pub serving: Vec<Vec<usize>>,
}

/// Per-UE fraction of RUs allocated at each of its serving BSs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation(Vec<f64>);

impl Allocation {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(j) = values.iter().position(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "allocation entry {j} = {} is not a finite nonnegative number",
                values[j]
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Allocation {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// QoS scaling and the quantities it was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosResult {
    pub eta: Vec<f64>,
    /// Common QoS level reachable under the load limit alone.
    pub lambda: f64,
    /// Common QoS level reachable under the fronthaul limit alone;
    /// `+inf` when no BS carries demand.
    #[serde(with = "infinite_as_null")]
    pub nu: f64,
    pub loads: Vec<f64>,
    /// Bits per period sent over each BS's fronthaul.
    pub fronthaul_usage: Vec<f64>,
}

pub(crate) mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

// ---------------------------------------------------------------------------
// JSON document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum GainDoc {
    Scalar([f64; 2]),
    Vector(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BsDoc {
    cluster: ClusterId,
    pos: [f64; 2],
    power_per_ru_w: f64,
    fronthaul_bits: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gains: Option<Vec<GainDoc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct UeDoc {
    cluster: ClusterId,
    pos: [f64; 2],
    demand_bits: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    traffic: Option<Vec<TrafficSegment>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioDoc {
    clusters: Vec<ClusterId>,
    bs: Vec<BsDoc>,
    ues: Vec<UeDoc>,
    noise_w: f64,
    #[serde(rename = "M")]
    m: u32,
    #[serde(rename = "B_hz")]
    b_hz: f64,
    max_load: f64,
    period_s: f64,
}

impl From<&EffectiveGain> for GainDoc {
    fn from(g: &EffectiveGain) -> Self {
        match g.dim() {
            1 => GainDoc::Scalar([g.coeff[0].re, g.coeff[0].im]),
            _ => GainDoc::Vector(g.components().iter().map(|c| [c.re, c.im]).collect()),
        }
    }
}

impl GainDoc {
    fn to_gain(&self) -> Result<EffectiveGain> {
        match self {
            GainDoc::Scalar([re, im]) => Ok(EffectiveGain::scalar(Complex64::new(*re, *im))),
            GainDoc::Vector(v) => match v.as_slice() {
                [a] => Ok(EffectiveGain::scalar(Complex64::new(a[0], a[1]))),
                [a, b] => Ok(EffectiveGain::pair(
                    Complex64::new(a[0], a[1]),
                    Complex64::new(b[0], b[1]),
                )),
                _ => Err(Error::InvalidScenario(format!(
                    "gain vectors must have dimension 1 or 2, got {}",
                    v.len()
                ))),
            },
        }
    }
}

impl NetworkScenario {
    /// Serializes to the scenario JSON document (pretty-printed, stable
    /// field order).
    pub fn to_json(&self) -> String {
        let doc = ScenarioDoc {
            clusters: self.clusters.clone(),
            bs: self
                .base_stations
                .iter()
                .map(|b| BsDoc {
                    cluster: b.cluster,
                    pos: b.position,
                    power_per_ru_w: b.power_per_ru,
                    fronthaul_bits: b.fronthaul_capacity,
                    gains: Some(b.gains.iter().map(GainDoc::from).collect()),
                })
                .collect(),
            ues: self
                .users
                .iter()
                .map(|u| {
                    let single = u.traffic.segments.len() == 1;
                    UeDoc {
                        cluster: u.cluster,
                        pos: u.position,
                        demand_bits: u.traffic.volume(),
                        traffic: (!single).then(|| u.traffic.segments.clone()),
                    }
                })
                .collect(),
            noise_w: self.noise_power,
            m: self.rus_per_bs,
            b_hz: self.ru_bandwidth_hz,
            max_load: self.max_load,
            period_s: self.period_seconds,
        };
        serde_json::to_string_pretty(&doc).expect("scenario serializes")
    }

    /// Parses the scenario JSON document. BSs without a `gains` array get
    /// zero-phase gains from the default path-loss model, without shadowing.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScenarioDoc = serde_json::from_str(text)?;
        let q = doc.ues.len();
        let users: Vec<User> = doc
            .ues
            .iter()
            .map(|u| User {
                cluster: u.cluster,
                position: u.pos,
                traffic: match &u.traffic {
                    Some(segs) => TrafficTrace {
                        segments: segs.clone(),
                    },
                    None => TrafficTrace::constant(doc.period_s, u.demand_bits),
                },
            })
            .collect();
        let mut base_stations = Vec::with_capacity(doc.bs.len());
        for b in &doc.bs {
            let gains = match &b.gains {
                Some(g) => g.iter().map(GainDoc::to_gain).collect::<Result<Vec<_>>>()?,
                None => users
                    .iter()
                    .map(|u| {
                        let d = crate::scenario::distance(b.pos, u.position);
                        let pl = crate::scenario::PathLossModel::default().loss_db(d);
                        EffectiveGain::real(10f64.powf(-pl / 20.0))
                    })
                    .collect(),
            };
            if gains.len() != q {
                return Err(Error::InvalidScenario(format!(
                    "BS has {} gains for {q} UEs",
                    gains.len()
                )));
            }
            base_stations.push(BaseStation {
                cluster: b.cluster,
                position: b.pos,
                power_per_ru: b.power_per_ru_w,
                fronthaul_capacity: b.fronthaul_bits,
                gains,
            });
        }
        Ok(Self {
            clusters: doc.clusters,
            base_stations,
            users,
            noise_power: doc.noise_w,
            rus_per_bs: doc.m,
            ru_bandwidth_hz: doc.b_hz,
            max_load: doc.max_load,
            period_seconds: doc.period_s,
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// One cluster, one BS, one UE, unit everything.
    pub(crate) fn unit_scenario() -> NetworkScenario {
        NetworkScenario {
            clusters: vec![1],
            base_stations: vec![BaseStation {
                cluster: 1,
                position: [0.0, 0.0],
                power_per_ru: 1.0,
                fronthaul_capacity: 1e9,
                gains: vec![EffectiveGain::real(1.0)],
            }],
            users: vec![User {
                cluster: 1,
                position: [10.0, 0.0],
                traffic: TrafficTrace::constant(1.0, 1.0),
            }],
            noise_power: 1.0,
            rus_per_bs: 1,
            ru_bandwidth_hz: 1.0,
            max_load: 1.0,
            period_seconds: 1.0,
        }
    }

    /// `m` BSs and `q` UEs in a single cluster with the given real gains.
    pub(crate) fn one_cluster(gains: &[&[f64]]) -> NetworkScenario {
        let q = gains[0].len();
        NetworkScenario {
            clusters: vec![1],
            base_stations: gains
                .iter()
                .map(|row| BaseStation {
                    cluster: 1,
                    position: [0.0, 0.0],
                    power_per_ru: 1.0,
                    fronthaul_capacity: 1e12,
                    gains: row.iter().map(|&g| EffectiveGain::real(g)).collect(),
                })
                .collect(),
            users: (0..q)
                .map(|_| User {
                    cluster: 1,
                    position: [0.0, 0.0],
                    traffic: TrafficTrace::constant(1.0, 1.0),
                })
                .collect(),
            noise_power: 1.0,
            rus_per_bs: 1,
            ru_bandwidth_hz: 1.0,
            max_load: 1.0,
            period_seconds: 1.0,
        }
    }

    #[test]
    fn minimal_scenario_is_valid() {
        assert!(unit_scenario().validate().is_empty());
    }

    #[test]
    fn unknown_ue_cluster_is_reported() {
        let mut s = unit_scenario();
        s.users[0].cluster = 9;
        let v = s.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, "unknown-cluster");
    }

    #[test]
    fn every_violation_is_collected() {
        let mut s = unit_scenario();
        s.noise_power = 0.0;
        s.max_load = 1.5;
        s.base_stations[0].gains.clear();
        s.users[0].traffic.segments[0].duration_s = 0.5;
        let codes: Vec<_> = s.validate().iter().map(|v| v.code).collect();
        assert!(codes.contains(&"nonpositive-noise"));
        assert!(codes.contains(&"max-load-range"));
        assert!(codes.contains(&"gain-count"));
        assert!(codes.contains(&"trace-coverage"));
    }

    #[test]
    fn serving_sets_of_empty_association() {
        let s = one_cluster(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let a = Association::empty(2, 2);
        assert!(a.serving_set(0).unwrap().is_empty());
        assert!(a.served_users(1).unwrap().is_empty());
        assert_eq!(a.first_unserved(), Some(0));
        assert!(a.check_dims(&s).is_ok());
    }

    #[test]
    fn single_entry_and_full_column() {
        let s = one_cluster(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        let a = Association::from_serving_sets(&s, &[vec![3], vec![]]).unwrap();
        assert_eq!(a.serving_set(0).unwrap(), vec![3]);
        let full = Association::from_serving_sets(&s, &[vec![], vec![0, 1, 2, 3]]).unwrap();
        for i in 0..4 {
            assert_eq!(full.served_users(i).unwrap(), vec![1]);
        }
    }

    #[test]
    fn out_of_range_indices() {
        let a = Association::empty(2, 2);
        assert!(matches!(
            a.serving_set(2),
            Err(Error::IndexOutOfRange { what: "UE", .. })
        ));
        assert!(matches!(
            a.served_users(5),
            Err(Error::IndexOutOfRange { what: "BS", .. })
        ));
    }

    #[test]
    fn cross_cluster_rejected() {
        let mut s = one_cluster(&[&[1.0], &[1.0]]);
        s.clusters.push(2);
        s.base_stations[1].cluster = 2;
        let err = Association::from_matrix(&s, &[vec![false], vec![true]]).unwrap_err();
        assert!(matches!(err, Error::ClusterViolation { bs: 1, ue: 0, .. }));
        assert!(Association::from_serving_sets(&s, &[vec![1]]).is_err());
        assert!(Association::from_serving_sets(&s, &[vec![0]]).is_ok());
    }

    #[test]
    fn scenario_json_round_trip() {
        let mut s = one_cluster(&[&[0.5, 2.0], &[1.0, 0.25]]);
        s.base_stations[0].gains[1] =
            EffectiveGain::pair(Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0));
        s.users[1].traffic = TrafficTrace {
            segments: vec![
                TrafficSegment {
                    duration_s: 0.25,
                    rate_bps: 4.0,
                },
                TrafficSegment {
                    duration_s: 0.75,
                    rate_bps: 0.0,
                },
            ],
        };
        let text = s.to_json();
        let back = NetworkScenario::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn omitted_gains_come_from_path_loss() {
        let text = r#"{"clusters":[1],"bs":[{"cluster":1,"pos":[0,0],"power_per_ru_w":0.2,"fronthaul_bits":1e9}],
            "ues":[{"cluster":1,"pos":[100,0],"demand_bits":1e6}],"noise_w":1e-15,"M":100,"B_hz":180000,"max_load":1,"period_s":1}"#;
        let s = NetworkScenario::from_json(text).unwrap();
        assert!(s.is_valid());
        let g = s.gain(0, 0);
        assert_eq!(g.dim(), 1);
        let expected_db = 36.7 * 2.0 + 22.7 + 26.0 * 2f64.log10();
        assert!((-10.0 * g.norm_sqr().log10() - expected_db).abs() < 1e-9);
    }

    #[test]
    fn association_json_round_trip() {
        let s = one_cluster(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let a = Association::from_serving_sets(&s, &[vec![0, 1], vec![1]]).unwrap();
        let back = Association::from_json(&s, &a.to_json()).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn allocation_rejects_negative() {
        assert!(Allocation::new(vec![0.1, -0.2]).is_err());
        assert!(Allocation::new(vec![0.1, f64::NAN]).is_err());
        assert_eq!(&*Allocation::new(vec![0.0, 0.5]).unwrap(), &[0.0, 0.5]);
    }
}
