//! Command-line front end: scenario generation, allocation, cell selection,
//! parameter sweeps and the 3-SAT reduction.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cran_core::allocation::{solve_optimal, AllocationSolution, FixedPointConfig};
use cran_core::channel::jain_fairness;
use cran_core::model::{Association, NetworkScenario};
use cran_core::oracle::{self, Feasibility};
use cran_core::scenario::{self, CnfFormula, GeneratorConfig, ReductionMeta};
use cran_core::selection::{
    default_initial_association, run_algorithm1, FilterRule, SelectionConfig,
};

pub mod sweep;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::NoConvergence(_) => EXIT_NO_CONVERGENCE,
            CliError::Io { .. } | CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl From<cran_core::Error> for CliError {
    fn from(e: cran_core::Error) -> Self {
        use cran_core::Error as E;
        match e {
            E::EmptyServingSet { ue } | E::ZeroRate { ue } => {
                CliError::Infeasible(format!("demand-coupling (UE {ue})"))
            }
            E::Infeasible(msg) => CliError::Infeasible(msg),
            E::NoConvergence { .. } | E::Diverged { .. } => CliError::NoConvergence(e.to_string()),
            E::InvalidConfig(msg) => CliError::Usage(msg),
            other => CliError::Failure(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "cran", version, about = "CoMP cell selection and resource allocation for C-RAN")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random hexagonal multi-cluster scenario.
    Generate(GenerateArgs),
    /// Optimal allocation for a fixed association.
    Solve(SolveArgs),
    /// Greedy CoMP cell selection from the strongest-BS association.
    Select(SelectArgs),
    /// Monte Carlo sweep of CoMP against the single-BS baseline.
    Sweep(sweep::SweepArgs),
    /// Build the reduction instance of a 3-CNF formula.
    Reduce(ReduceArgs),
    /// Compare truth-table satisfiability with reduction feasibility.
    Certify(CertifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct LayoutArgs {
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    #[arg(long, visible_alias = "bs", default_value_t = 4)]
    pub bs_per_cluster: usize,
    #[arg(long, visible_alias = "ues", default_value_t = 20)]
    pub ues_per_cluster: usize,
    /// Hexagon circumradius in meters.
    #[arg(long, default_value_t = 500.0)]
    pub cluster_radius_m: f64,
    #[arg(long, default_value_t = 1.0)]
    pub max_load: f64,
    #[arg(long, default_value_t = 200.0)]
    pub power_mw_per_ru: f64,
    #[arg(long, default_value_t = 2.5)]
    pub fronthaul_gbps: f64,
    /// Demand per UE and period, in bits.
    #[arg(long, default_value_t = 1e6)]
    pub demand_bits: f64,
    #[arg(long, default_value_t = 0.2)]
    pub period_s: f64,
    #[arg(long, default_value_t = 100)]
    pub rus: u32,
    #[arg(long, default_value_t = 180e3)]
    pub ru_bandwidth_hz: f64,
    #[arg(long, default_value_t = 2.0)]
    pub carrier_ghz: f64,
    #[arg(long, default_value_t = 3.0)]
    pub shadowing_db: f64,
}

impl Default for LayoutArgs {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        Self {
            clusters: g.n_clusters,
            bs_per_cluster: g.bs_per_cluster,
            ues_per_cluster: g.ues_per_cluster,
            cluster_radius_m: g.cluster_radius_m,
            max_load: g.max_load,
            power_mw_per_ru: g.tx_power_mw_per_ru,
            fronthaul_gbps: g.fronthaul_gbps,
            demand_bits: g.demand_bits,
            period_s: g.period_s,
            rus: g.rus_per_bs,
            ru_bandwidth_hz: g.ru_bandwidth_hz,
            carrier_ghz: g.carrier_ghz,
            shadowing_db: g.shadowing_sigma_db,
        }
    }
}

impl LayoutArgs {
    pub fn generator_config(&self, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n_clusters: self.clusters,
            cluster_radius_m: self.cluster_radius_m,
            bs_per_cluster: self.bs_per_cluster,
            ues_per_cluster: self.ues_per_cluster,
            carrier_ghz: self.carrier_ghz,
            ru_bandwidth_hz: self.ru_bandwidth_hz,
            rus_per_bs: self.rus,
            tx_power_mw_per_ru: self.power_mw_per_ru,
            fronthaul_gbps: self.fronthaul_gbps,
            shadowing_sigma_db: self.shadowing_db,
            max_load: self.max_load,
            demand_bits: self.demand_bits,
            period_s: self.period_s,
            rng_seed: seed,
            ..GeneratorConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Relative stopping tolerance of the fixed-point iterations.
    #[arg(long, default_value_t = cran_core::allocation::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value_t = cran_core::allocation::DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
}

impl SolverArgs {
    pub fn config(&self) -> CliResult<FixedPointConfig> {
        let cfg = FixedPointConfig {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            initial_alpha: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scenario JSON output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// `best-single`, `full`, `assignment:<T|F...>` (needs --meta), or an
    /// association JSON file.
    #[arg(long, default_value = "best-single")]
    pub assoc: String,
    /// Reduction metadata, for `assignment:` associations.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Also check that this common QoS level is feasible (defaults to the
    /// metadata's target when --meta is given).
    #[arg(long)]
    pub target_eta: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Results JSON path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Certified,
    LoadCondition,
}

impl From<RuleArg> for FilterRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Certified => FilterRule::Certified,
            RuleArg::LoadCondition => FilterRule::LoadCondition,
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = RuleArg::Certified)]
    pub rule: RuleArg,
    /// Keep the starting optimum as the basis of every load condition.
    #[arg(long)]
    pub no_resolve: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Results JSON path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON-lines file with one record per filter evaluation.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// DIMACS CNF input.
    #[arg(long)]
    pub cnf: PathBuf,
    /// Scenario JSON output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Metadata JSON output path.
    #[arg(long)]
    pub meta_out: PathBuf,
    /// Gain used in place of exact zeros.
    #[arg(long, default_value_t = 0.0)]
    pub negligible_gain: f64,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub cnf: PathBuf,
    /// Certificate JSON path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Select(a) => cmd_select(&a),
        Command::Sweep(a) => sweep::cmd_sweep(&a),
        Command::Reduce(a) => cmd_reduce(&a),
        Command::Certify(a) => cmd_certify(&a),
    }
}

// ---------------------------------------------------------------------------
// I/O helpers
// ---------------------------------------------------------------------------

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::Failure(e.to_string()))
        }
    }
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn load_scenario(path: &Path) -> CliResult<NetworkScenario> {
    let s = NetworkScenario::from_json(&read_text(path)?)
        .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
    if let Some(v) = s.validate().first() {
        return Err(CliError::Failure(format!(
            "{}: invalid scenario: {} ({})",
            path.display(),
            v.message,
            v.code
        )));
    }
    Ok(s)
}

fn load_formula(path: &Path) -> CliResult<CnfFormula> {
    CnfFormula::parse_dimacs(&read_text(path)?)
        .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

/// Served bit rate `sum_j eta_j V_j / period`.
pub fn served_bit_rate(scenario: &NetworkScenario, eta: &[f64]) -> f64 {
    eta.iter()
        .enumerate()
        .map(|(j, e)| e * scenario.demand_volume(j))
        .sum::<f64>()
        / scenario.period_seconds
}

/// Mean BS load and mean fronthaul utilization of a solution.
pub fn utilization(scenario: &NetworkScenario, sol: &AllocationSolution) -> (f64, f64) {
    let m = scenario.num_bs().max(1) as f64;
    let load = sol.eta_star.loads.iter().sum::<f64>() / m;
    let fh = sol
        .eta_star
        .fronthaul_usage
        .iter()
        .zip(&scenario.base_stations)
        .map(|(u, bs)| u / bs.fronthaul_capacity)
        .sum::<f64>()
        / m;
    (load, fh)
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

pub fn cmd_generate(a: &GenerateArgs) -> CliResult<()> {
    let cfg = a.layout.generator_config(a.seed);
    let s = scenario::generate(&cfg)?;
    write_text(&a.out, &(s.to_json() + "\n"))?;
    println!(
        "wrote {}: {} clusters, {} BSs, {} UEs, seed {}",
        a.out.display(),
        s.clusters.len(),
        s.num_bs(),
        s.num_ues(),
        a.seed
    );
    Ok(())
}

fn parse_assignment(text: &str) -> CliResult<Vec<bool>> {
    text.chars()
        .map(|c| match c {
            'T' | 't' | '1' => Ok(true),
            'F' | 'f' | '0' => Ok(false),
            _ => Err(CliError::Usage(format!(
                "assignment must be a string of T/F, got {text:?}"
            ))),
        })
        .collect()
}

fn load_meta(path: &Path) -> CliResult<ReductionMeta> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn resolve_association(
    s: &NetworkScenario,
    spec: &str,
    meta: Option<&ReductionMeta>,
) -> CliResult<Association> {
    match spec {
        "best-single" => Ok(default_initial_association(s)?),
        "full" => {
            let sets: Vec<Vec<usize>> = (0..s.num_ues()).map(|j| s.candidate_bs(j)).collect();
            Ok(Association::from_serving_sets(s, &sets)?)
        }
        _ => {
            if let Some(bits) = spec.strip_prefix("assignment:") {
                let meta = meta.ok_or_else(|| {
                    CliError::Usage("assignment associations need --meta".into())
                })?;
                let assignment = parse_assignment(bits)?;
                if assignment.len() != meta.n_vars {
                    return Err(CliError::Usage(format!(
                        "assignment has {} values, formula has {} variables",
                        assignment.len(),
                        meta.n_vars
                    )));
                }
                let instance = scenario::SatInstance {
                    scenario: s.clone(),
                    meta: meta.clone(),
                };
                Ok(scenario::assignment_to_association(&instance, &assignment)?)
            } else {
                let path = Path::new(spec);
                Association::from_json(s, &read_text(path)?)
                    .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
            }
        }
    }
}

#[derive(Debug, Serialize)]
struct SolveDoc<'a> {
    association: Vec<Vec<usize>>,
    objective: f64,
    served_bit_rate_bps: f64,
    jain_fairness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_eta: Option<f64>,
    solution: &'a AllocationSolution,
}

pub fn cmd_solve(a: &SolveArgs) -> CliResult<()> {
    let s = load_scenario(&a.scenario)?;
    let meta = a.meta.as_deref().map(load_meta).transpose()?;
    let assoc = resolve_association(&s, &a.assoc, meta.as_ref())?;
    let target = a.target_eta.or(meta.as_ref().map(|m| m.target_eta));
    if let Some(eta) = target {
        if let Feasibility::Violated(v) = oracle::feasibility_check(&s, &assoc, eta) {
            return Err(CliError::Infeasible(format!("{v} at eta {eta}")));
        }
    }
    if let Some(ue) = assoc.first_unserved() {
        return Err(cran_core::Error::EmptyServingSet { ue }.into());
    }
    let sol = solve_optimal(&s, &assoc, &a.solver.config()?)?;
    let doc = SolveDoc {
        association: assoc.serving_sets(),
        objective: sol.objective(),
        served_bit_rate_bps: served_bit_rate(&s, &sol.eta_star.eta),
        jain_fairness: jain_fairness(&sol.eta_star.eta).ok(),
        target_eta: target,
        solution: &sol,
    };
    emit(a.out.as_deref(), &to_pretty(&doc))
}

#[derive(Debug, Serialize)]
struct SelectDoc<'a> {
    eta_before: f64,
    eta_after: f64,
    bit_rate_before_bps: f64,
    bit_rate_after_bps: f64,
    improvement_pct: f64,
    filters_evaluated: usize,
    filters_accepted: usize,
    added_links: usize,
    association: Vec<Vec<usize>>,
    solution: &'a AllocationSolution,
}

pub fn cmd_select(a: &SelectArgs) -> CliResult<()> {
    let s = load_scenario(&a.scenario)?;
    let cfg = SelectionConfig {
        fixed_point: a.solver.config()?,
        rule: a.rule.into(),
        resolve_after_accept: !a.no_resolve,
        ..SelectionConfig::default()
    };
    let init = default_initial_association(&s)?;
    let out = run_algorithm1(&s, &init, &cfg)?;
    let before = out.initial_solution.objective();
    let after = out.solution.objective();
    let doc = SelectDoc {
        eta_before: before,
        eta_after: after,
        bit_rate_before_bps: served_bit_rate(&s, &out.initial_solution.eta_star.eta),
        bit_rate_after_bps: served_bit_rate(&s, &out.solution.eta_star.eta),
        improvement_pct: improvement_pct(after, before),
        filters_evaluated: out.decisions.len(),
        filters_accepted: out.decisions.iter().filter(|d| d.accepted).count(),
        added_links: out.added_links(&init),
        association: out.association.serving_sets(),
        solution: &out.solution,
    };
    if let Some(path) = &a.trace {
        let mut text = String::new();
        for rec in out.trace() {
            text.push_str(&serde_json::to_string(&rec).expect("serializable"));
            text.push('\n');
        }
        write_text(path, &text)?;
    }
    emit(a.out.as_deref(), &to_pretty(&doc))
}

/// `100 (after - before) / before`, 0 when `before` is 0.
pub fn improvement_pct(after: f64, before: f64) -> f64 {
    if before > 0.0 {
        100.0 * (after - before) / before
    } else {
        0.0
    }
}

pub fn cmd_reduce(a: &ReduceArgs) -> CliResult<()> {
    let formula = load_formula(&a.cnf)?;
    let inst = scenario::build_sat_instance_with(
        &formula,
        scenario::ReductionOptions {
            negligible_gain: a.negligible_gain,
        },
    )?;
    write_text(&a.out, &(inst.scenario.to_json() + "\n"))?;
    write_text(&a.meta_out, &to_pretty(&inst.meta))?;
    println!(
        "wrote {}: {} variables, {} clauses -> {} UEs, {} BSs",
        a.out.display(),
        formula.n_vars,
        formula.clauses.len(),
        inst.scenario.num_ues(),
        inst.scenario.num_bs()
    );
    Ok(())
}

pub fn cmd_certify(a: &CertifyArgs) -> CliResult<()> {
    let formula = load_formula(&a.cnf)?;
    let cert = oracle::certify(&formula)?;
    eprintln!(
        "{} / {}",
        if cert.satisfiable { "SAT" } else { "UNSAT" },
        if cert.feasible { "feasible" } else { "infeasible" }
    );
    emit(a.out.as_deref(), &to_pretty(&cert))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn layout() -> LayoutArgs {
        let cli = Cli::parse_from(["cran", "generate", "--out", "x.json"]);
        match cli.command {
            Command::Generate(a) => a.layout,
            _ => unreachable!(),
        }
    }

    #[test]
    fn layout_defaults_match_generator() {
        let cfg = layout().generator_config(0);
        assert_eq!(cfg, GeneratorConfig::default());
        assert_eq!(LayoutArgs::default().generator_config(0), cfg);
    }

    #[test]
    fn assignment_strings() {
        assert_eq!(parse_assignment("TfT01").unwrap(), [true, false, true, false, true]);
        assert!(matches!(parse_assignment("TX"), Err(CliError::Usage(_))));
    }

    #[test]
    fn exit_codes_of_core_errors() {
        use cran_core::Error as E;
        assert_eq!(CliError::from(E::EmptyServingSet { ue: 2 }).exit_code(), EXIT_INFEASIBLE);
        assert_eq!(
            CliError::from(E::NoConvergence { iterations: 3, residual: 1.0 }).exit_code(),
            EXIT_NO_CONVERGENCE
        );
        assert_eq!(CliError::from(E::InvalidConfig("x".into())).exit_code(), EXIT_USAGE);
        assert_eq!(CliError::from(E::AllZero).exit_code(), EXIT_FAILURE);
    }

    #[test]
    fn improvement_of_zero_baseline() {
        assert_eq!(improvement_pct(1.0, 0.0), 0.0);
        assert_eq!(improvement_pct(1.1, 1.0), 100.0 * (1.1 - 1.0) / 1.0);
    }

    #[test]
    fn sweep_axis_names() {
        let cli = Cli::parse_from([
            "cran", "sweep", "--axis", "max_load", "--values", "0.6,0.8", "--out", "o.csv", "--ues", "5",
        ]);
        let Command::Sweep(a) = cli.command else { unreachable!() };
        assert_eq!(a.axis, sweep::Axis::MaxLoad);
        assert_eq!(a.values, vec![0.6, 0.8]);
        assert_eq!(a.layout.ues_per_cluster, 5);
    }
}
