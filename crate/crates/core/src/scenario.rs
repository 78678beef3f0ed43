//! Instance generation: random hexagonal C-RAN deployments and the
//! 3-SAT reduction construction.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Association, BaseStation, ClusterId, EffectiveGain, NetworkScenario, TrafficTrace, User,
};

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Log-distance micro-cell path loss, `slope * log10(d) + intercept +
/// freq_coeff * log10(f_GHz)` with `d` floored at `min_distance_m`.
/// Defaults to the urban-micro NLOS constants at 2 GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub slope_db: f64,
    pub intercept_db: f64,
    pub freq_coeff_db: f64,
    pub carrier_ghz: f64,
    pub min_distance_m: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            slope_db: 36.7,
            intercept_db: 22.7,
            freq_coeff_db: 26.0,
            carrier_ghz: 2.0,
            min_distance_m: 10.0,
        }
    }
}

impl PathLossModel {
    pub fn loss_db(&self, distance_m: f64) -> f64 {
        self.slope_db * distance_m.max(self.min_distance_m).log10()
            + self.intercept_db
            + self.freq_coeff_db * self.carrier_ghz.log10()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_clusters: usize,
    /// Hexagon circumradius.
    pub cluster_radius_m: f64,
    pub bs_per_cluster: usize,
    pub ues_per_cluster: usize,
    pub carrier_ghz: f64,
    pub ru_bandwidth_hz: f64,
    pub rus_per_bs: u32,
    pub noise_dbm_per_hz: f64,
    pub tx_power_mw_per_ru: f64,
    pub fronthaul_gbps: f64,
    pub shadowing_sigma_db: f64,
    pub max_load: f64,
    pub demand_bits: f64,
    pub period_s: f64,
    pub rng_seed: u64,
    pub path_loss: PathLossModel,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_clusters: 3,
            cluster_radius_m: 500.0,
            bs_per_cluster: 4,
            ues_per_cluster: 20,
            carrier_ghz: 2.0,
            ru_bandwidth_hz: 180e3,
            rus_per_bs: 100,
            noise_dbm_per_hz: -174.0,
            tx_power_mw_per_ru: 200.0,
            fronthaul_gbps: 2.5,
            shadowing_sigma_db: 3.0,
            max_load: 1.0,
            demand_bits: 1e6,
            period_s: 0.2,
            rng_seed: 0,
            path_loss: PathLossModel::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cluster_radius_m", self.cluster_radius_m),
            ("carrier_ghz", self.carrier_ghz),
            ("ru_bandwidth_hz", self.ru_bandwidth_hz),
            ("tx_power_mw_per_ru", self.tx_power_mw_per_ru),
            ("fronthaul_gbps", self.fronthaul_gbps),
            ("demand_bits", self.demand_bits),
            ("period_s", self.period_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_clusters == 0 || self.bs_per_cluster == 0 {
            return Err(Error::InvalidConfig(
                "n_clusters and bs_per_cluster must be at least 1".into(),
            ));
        }
        if self.rus_per_bs == 0 {
            return Err(Error::InvalidConfig("rus_per_bs must be at least 1".into()));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::InvalidConfig("shadowing_sigma_db must be nonnegative".into()));
        }
        if !(self.max_load > 0.0 && self.max_load <= 1.0) {
            return Err(Error::InvalidConfig("max_load must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn noise_watts_per_ru(&self) -> f64 {
        let dbm = self.noise_dbm_per_hz + 10.0 * self.ru_bandwidth_hz.log10();
        10f64.powf(dbm / 10.0) * 1e-3
    }
}

/// Axial coordinates of the `n` hexagons nearest the origin, in spiral
/// order: center first, then each ring.
fn hex_spiral(n: usize) -> Vec<(i64, i64)> {
    const DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
    let mut out = vec![(0, 0)];
    let mut ring = 1;
    while out.len() < n {
        // start at direction 4 scaled by ring, walk each side
        let (mut q, mut r) = (DIRS[4].0 * ring, DIRS[4].1 * ring);
        for dir in DIRS {
            for _ in 0..ring {
                out.push((q, r));
                q += dir.0;
                r += dir.1;
            }
        }
        ring += 1;
    }
    out.truncate(n);
    out
}

/// Centers of `n` pointy-top hexagons of circumradius `radius` tiling the
/// plane around the origin.
pub fn hex_centers(n: usize, radius: f64) -> Vec<[f64; 2]> {
    hex_spiral(n)
        .into_iter()
        .map(|(q, r)| {
            let (q, r) = (q as f64, r as f64);
            [radius * 3f64.sqrt() * (q + r / 2.0), radius * 1.5 * r]
        })
        .collect()
}

/// Whether `p` lies in the pointy-top hexagon of circumradius `radius`
/// centered at `center`.
pub fn in_hexagon(p: [f64; 2], center: [f64; 2], radius: f64) -> bool {
    let x = (p[0] - center[0]).abs();
    let y = (p[1] - center[1]).abs();
    x <= radius * 3f64.sqrt() / 2.0 && y <= radius - x / 3f64.sqrt()
}

fn uniform_in_hexagon<R: Rng>(rng: &mut R, center: [f64; 2], radius: f64) -> [f64; 2] {
    let half_w = radius * 3f64.sqrt() / 2.0;
    loop {
        let p = [
            center[0] + rng.random_range(-half_w..=half_w),
            center[1] + rng.random_range(-radius..=radius),
        ];
        if in_hexagon(p, center, radius) {
            return p;
        }
    }
}

/// Random hexagonal deployment. A pure function of `cfg`: the seed is the
/// only source of randomness.
pub fn generate(cfg: &GeneratorConfig) -> Result<NetworkScenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let centers = hex_centers(cfg.n_clusters, cfg.cluster_radius_m);
    let period = cfg.period_s;

    let mut bs_sites: Vec<(ClusterId, [f64; 2])> = Vec::new();
    let mut ue_sites: Vec<(ClusterId, [f64; 2])> = Vec::new();
    for (c, &center) in centers.iter().enumerate() {
        let id = c as ClusterId + 1;
        bs_sites.push((id, center));
        for _ in 1..cfg.bs_per_cluster {
            bs_sites.push((id, uniform_in_hexagon(&mut rng, center, cfg.cluster_radius_m)));
        }
        for _ in 0..cfg.ues_per_cluster {
            ue_sites.push((id, uniform_in_hexagon(&mut rng, center, cfg.cluster_radius_m)));
        }
    }

    let path_loss = PathLossModel {
        carrier_ghz: cfg.carrier_ghz,
        ..cfg.path_loss
    };
    let shadow = Normal::new(0.0, cfg.shadowing_sigma_db)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let base_stations = bs_sites
        .iter()
        .map(|&(cluster, pos)| BaseStation {
            cluster,
            position: pos,
            power_per_ru: cfg.tx_power_mw_per_ru * 1e-3,
            fronthaul_capacity: cfg.fronthaul_gbps * 1e9 * period,
            gains: ue_sites
                .iter()
                .map(|&(_, upos)| {
                    let loss_db = path_loss.loss_db(distance(pos, upos)) + shadow.sample(&mut rng);
                    EffectiveGain::real(10f64.powf(-loss_db / 20.0))
                })
                .collect(),
        })
        .collect();
    let users = ue_sites
        .iter()
        .map(|&(cluster, pos)| User {
            cluster,
            position: pos,
            traffic: TrafficTrace::constant(period, cfg.demand_bits),
        })
        .collect();

    Ok(NetworkScenario {
        clusters: (1..=cfg.n_clusters as ClusterId).collect(),
        base_stations,
        users,
        noise_power: cfg.noise_watts_per_ru(),
        rus_per_bs: cfg.rus_per_bs,
        ru_bandwidth_hz: cfg.ru_bandwidth_hz,
        max_load: cfg.max_load,
        period_seconds: period,
    })
}

// ---------------------------------------------------------------------------
// 3-SAT reduction
// ---------------------------------------------------------------------------

/// 3-CNF formula. Literals are nonzero `i32`: `+v` for variable `v`,
/// `-v` for its negation, variables numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfFormula {
    pub n_vars: usize,
    pub clauses: Vec<[i32; 3]>,
}

impl CnfFormula {
    pub fn new(n_vars: usize, clauses: Vec<[i32; 3]>) -> Result<Self> {
        let f = Self { n_vars, clauses };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, c) in self.clauses.iter().enumerate() {
            for &lit in c {
                if lit == 0 || lit.unsigned_abs() as usize > self.n_vars {
                    return Err(Error::InvalidFormula(format!(
                        "clause {k} has literal {lit} outside 1..={}",
                        self.n_vars
                    )));
                }
            }
            if c[0] == c[1] || c[0] == c[2] || c[1] == c[2] {
                return Err(Error::InvalidFormula(format!(
                    "clause {k} repeats a literal: {c:?}"
                )));
            }
        }
        Ok(())
    }

    /// Whether `assignment` (indexed by variable - 1) satisfies every clause.
    pub fn evaluate(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|&lit| {
                let v = assignment[lit.unsigned_abs() as usize - 1];
                if lit > 0 {
                    v
                } else {
                    !v
                }
            })
        })
    }

    /// Parses DIMACS CNF. Every clause must have exactly three literals.
    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut literals: Vec<i32> = Vec::new();
        let mut clauses = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 || parts[1] != "cnf" {
                    return Err(Error::InvalidFormula(format!("bad header line: {line}")));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| Error::InvalidFormula(format!("bad header number: {s}")))
                };
                header = Some((parse(parts[2])?, parse(parts[3])?));
                continue;
            }
            if header.is_none() {
                return Err(Error::InvalidFormula("clause before header".into()));
            }
            for tok in line.split_whitespace() {
                let lit: i32 = tok
                    .parse()
                    .map_err(|_| Error::InvalidFormula(format!("bad literal: {tok}")))?;
                if lit == 0 {
                    let clause: [i32; 3] = literals.as_slice().try_into().map_err(|_| {
                        Error::InvalidFormula(format!(
                            "clause {} has {} literals, expected 3",
                            clauses.len(),
                            literals.len()
                        ))
                    })?;
                    clauses.push(clause);
                    literals.clear();
                } else {
                    literals.push(lit);
                }
            }
        }
        let (n_vars, n_clauses) =
            header.ok_or_else(|| Error::InvalidFormula("missing header".into()))?;
        if !literals.is_empty() {
            return Err(Error::InvalidFormula("unterminated clause".into()));
        }
        if clauses.len() != n_clauses {
            return Err(Error::InvalidFormula(format!(
                "header declares {n_clauses} clauses, found {}",
                clauses.len()
            )));
        }
        Self::new(n_vars, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.n_vars, self.clauses.len());
        for c in &self.clauses {
            s.push_str(&format!("{} {} {} 0\n", c[0], c[1], c[2]));
        }
        s
    }

    /// Random formula with `n_clauses` clauses over three distinct
    /// variables each, random signs. Needs `n_vars >= 3`.
    pub fn random<R: Rng>(rng: &mut R, n_vars: usize, n_clauses: usize) -> Result<Self> {
        if n_vars < 3 {
            return Err(Error::InvalidFormula(
                "random clauses need at least 3 variables".into(),
            ));
        }
        let clauses = (0..n_clauses)
            .map(|_| {
                let vars = rand::seq::index::sample(rng, n_vars, 3);
                let mut c = [0i32; 3];
                for (slot, v) in c.iter_mut().zip(vars.iter()) {
                    let v = v as i32 + 1;
                    *slot = if rng.random_bool(0.5) { v } else { -v };
                }
                c
            })
            .collect();
        Self::new(n_vars, clauses)
    }
}

/// Index bookkeeping for a reduction instance. BS and UE indices refer to
/// positions in the generated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionMeta {
    pub n_vars: usize,
    pub n_clauses: usize,
    /// UE that only the high-power BS can serve.
    pub anchor_ue: usize,
    pub anchor_bs: usize,
    /// UE per variable (index `v - 1`).
    pub variable_ues: Vec<usize>,
    /// `[false_bs, true_bs]` per variable: serving the variable UE from
    /// `true_bs` encodes `true`.
    pub variable_bs: Vec<[usize; 2]>,
    pub clause_ues: Vec<usize>,
    pub clause_bs: Vec<usize>,
    /// For each clause, the literal BSs that interfere with its UE.
    pub clause_literal_bs: Vec<[usize; 3]>,
    /// Common QoS level a feasible association must reach.
    pub target_eta: f64,
}

impl ReductionMeta {
    /// BS that is idle exactly when `literal` is true.
    pub fn literal_bs(&self, literal: i32) -> usize {
        let [false_bs, true_bs] = self.variable_bs[literal.unsigned_abs() as usize - 1];
        if literal > 0 {
            false_bs
        } else {
            true_bs
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionOptions {
    /// Amplitude used for "negligible" BS-UE pairs.
    pub negligible_gain: f64,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            negligible_gain: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatInstance {
    pub scenario: NetworkScenario,
    pub meta: ReductionMeta,
}

pub fn build_sat_instance(formula: &CnfFormula) -> Result<SatInstance> {
    build_sat_instance_with(formula, ReductionOptions::default())
}

/// Network whose feasible associations at unit QoS correspond to
/// satisfying assignments of `formula`.
///
/// Layout (`N1` variables, `N2` clauses):
/// * UEs: anchor `u0`, then `u1..uN1` (variables), then one per clause.
/// * BSs: `a_v, a'_v` per variable, then `A0`, then `A_c` per clause.
/// * Each variable UE may be served by `a_v` or `a'_v` only; `u0` by `A0`
///   only; each clause UE by its `A_c` only.
pub fn build_sat_instance_with(
    formula: &CnfFormula,
    opts: ReductionOptions,
) -> Result<SatInstance> {
    formula.validate()?;
    let n1 = formula.n_vars;
    let n2 = formula.clauses.len();
    let q = 1 + n1 + n2;

    let anchor_ue = 0;
    let variable_ues: Vec<usize> = (1..=n1).collect();
    let clause_ues: Vec<usize> = (n1 + 1..n1 + 1 + n2).collect();
    let variable_bs: Vec<[usize; 2]> = (0..n1).map(|v| [2 * v, 2 * v + 1]).collect();
    let anchor_bs = 2 * n1;
    let clause_bs: Vec<usize> = (0..n2).map(|c| 2 * n1 + 1 + c).collect();

    let mut meta = ReductionMeta {
        n_vars: n1,
        n_clauses: n2,
        anchor_ue,
        anchor_bs,
        variable_ues,
        variable_bs,
        clause_ues,
        clause_bs,
        clause_literal_bs: Vec::new(),
        target_eta: 1.0,
    };
    meta.clause_literal_bs = formula
        .clauses
        .iter()
        .map(|c| [meta.literal_bs(c[0]), meta.literal_bs(c[1]), meta.literal_bs(c[2])])
        .collect();

    let anchor_cluster: ClusterId = 1;
    let var_cluster = |v: usize| (2 + v) as ClusterId;
    let clause_cluster = |c: usize| (2 + n1 + c) as ClusterId;

    let zero = Complex64::new(0.0, 0.0);
    let e1 = |amp: f64| EffectiveGain::pair(Complex64::new(amp, 0.0), zero);
    let e2 = |amp: f64| EffectiveGain::pair(zero, Complex64::new(amp, 0.0));
    let negligible = e1(opts.negligible_gain);

    let mut gains = vec![vec![negligible; q]; 2 * n1 + 1 + n2];
    for v in 0..n1 {
        let [a, a_prime] = meta.variable_bs[v];
        let u = meta.variable_ues[v];
        // orthogonal unit coefficients toward the variable UE
        gains[a][u] = e1(1.0);
        gains[a_prime][u] = e2(1.0);
        gains[a][anchor_ue] = e1(1.0);
        gains[a_prime][anchor_ue] = e1(1.0);
    }
    gains[anchor_bs][anchor_ue] = e1(1.0);
    for (c, lits) in meta.clause_literal_bs.iter().enumerate() {
        let u = meta.clause_ues[c];
        for &b in lits {
            gains[b][u] = e1(1.0);
        }
        // received power 3 from the clause BS
        gains[meta.clause_bs[c]][u] = e1(3f64.sqrt());
    }

    let volume = 1.0;
    let fronthaul = 10.0 * volume * q as f64;
    let mut base_stations = Vec::with_capacity(2 * n1 + 1 + n2);
    for v in 0..n1 {
        for (k, &b) in meta.variable_bs[v].iter().enumerate() {
            base_stations.push(BaseStation {
                cluster: var_cluster(v),
                position: [v as f64 * 100.0, k as f64 * 50.0],
                power_per_ru: 1.0,
                fronthaul_capacity: fronthaul,
                gains: std::mem::take(&mut gains[b]),
            });
        }
    }
    base_stations.push(BaseStation {
        cluster: anchor_cluster,
        position: [0.0, -100.0],
        power_per_ru: (n1 + 1) as f64,
        fronthaul_capacity: fronthaul,
        gains: std::mem::take(&mut gains[anchor_bs]),
    });
    for c in 0..n2 {
        base_stations.push(BaseStation {
            cluster: clause_cluster(c),
            position: [c as f64 * 100.0, 200.0],
            power_per_ru: 1.0,
            fronthaul_capacity: fronthaul,
            gains: std::mem::take(&mut gains[meta.clause_bs[c]]),
        });
    }

    let mut users = Vec::with_capacity(q);
    let user = |cluster, position| User {
        cluster,
        position,
        traffic: TrafficTrace::constant(1.0, volume),
    };
    users.push(user(anchor_cluster, [0.0, -150.0]));
    for v in 0..n1 {
        users.push(user(var_cluster(v), [v as f64 * 100.0, 25.0]));
    }
    for c in 0..n2 {
        users.push(user(clause_cluster(c), [c as f64 * 100.0, 250.0]));
    }

    let scenario = NetworkScenario {
        clusters: (1..=(1 + n1 + n2) as ClusterId).collect(),
        base_stations,
        users,
        noise_power: 1.0,
        // demand normalized by M * B over a unit period
        rus_per_bs: 1,
        ru_bandwidth_hz: 1.0,
        max_load: 1.0,
        period_seconds: 1.0,
    };
    Ok(SatInstance { scenario, meta })
}

/// Association encoding `assignment`: variable UE `v` served by `a'_v`
/// when true, by `a_v` otherwise; anchor and clause UEs by their only BS.
pub fn assignment_to_association(
    instance: &SatInstance,
    assignment: &[bool],
) -> Result<Association> {
    let meta = &instance.meta;
    if assignment.len() != meta.n_vars {
        return Err(Error::DimensionMismatch {
            what: "assignment",
            expected: meta.n_vars,
            got: assignment.len(),
        });
    }
    let mut sets = vec![Vec::new(); instance.scenario.num_ues()];
    sets[meta.anchor_ue].push(meta.anchor_bs);
    for (v, &value) in assignment.iter().enumerate() {
        let [false_bs, true_bs] = meta.variable_bs[v];
        sets[meta.variable_ues[v]].push(if value { true_bs } else { false_bs });
    }
    for (c, &u) in meta.clause_ues.iter().enumerate() {
        sets[u].push(meta.clause_bs[c]);
    }
    Association::from_serving_sets(&instance.scenario, &sets)
}

/// Inverse of [`assignment_to_association`]; `None` when some variable UE
/// is not served by exactly one of its two BSs.
pub fn association_to_assignment(meta: &ReductionMeta, assoc: &Association) -> Option<Vec<bool>> {
    (0..meta.n_vars)
        .map(|v| {
            let u = meta.variable_ues[v];
            let [false_bs, true_bs] = meta.variable_bs[v];
            match (assoc.is_serving(false_bs, u), assoc.is_serving(true_bs, u)) {
                (true, false) => Some(false),
                (false, true) => Some(true),
                _ => None,
            }
        })
        .collect()
}
