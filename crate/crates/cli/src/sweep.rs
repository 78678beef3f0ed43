//! Seeded Monte Carlo sweeps: CoMP selection against the strongest-BS
//! baseline over one swept parameter.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use cran_core::allocation::FixedPointConfig;
use cran_core::scenario;
use cran_core::selection::{default_initial_association, run_algorithm1, SelectionConfig};

use crate::{
    improvement_pct, served_bit_rate, utilization, write_text, CliError, CliResult, LayoutArgs,
    RuleArg, SolverArgs,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    /// UEs per cluster.
    Ues,
    /// BSs per cluster.
    Bs,
    /// Load cap of every BS.
    #[value(name = "max_load", alias = "max-load")]
    MaxLoad,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Ues => "ues",
            Axis::Bs => "bs",
            Axis::MaxLoad => "max_load",
        }
    }

    fn apply(self, layout: &mut LayoutArgs, value: f64) -> CliResult<()> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(CliError::Usage(format!(
                    "axis {} needs whole numbers, got {value}",
                    self.name()
                )))
            }
        };
        match self {
            Axis::Ues => layout.ues_per_cluster = count()?,
            Axis::Bs => layout.bs_per_cluster = count()?,
            Axis::MaxLoad => layout.max_load = value,
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[arg(long, default_value_t = 30)]
    pub reps: usize,
    /// Replication `r` uses seed `seed + r` at every axis value.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[arg(long, value_enum, default_value_t = RuleArg::Certified)]
    pub rule: RuleArg,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Per-replication CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-value CSV with mean and standard error of the bit rates.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub layout: LayoutArgs,
    pub selection: SelectionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: &'static str,
    pub value: String,
    pub rep: usize,
    pub seed: u64,
    pub sum_eta_comp: f64,
    pub sum_eta_noncomp: f64,
    pub improvement_pct: f64,
    pub mean_load: f64,
    pub mean_fronthaul_util: f64,
    #[serde(skip)]
    pub bit_rate_comp_bps: f64,
    #[serde(skip)]
    pub bit_rate_noncomp_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub axis: &'static str,
    pub value: String,
    pub reps: usize,
    pub mean_bit_rate_comp_bps: f64,
    pub stderr_bit_rate_comp_bps: f64,
    pub mean_bit_rate_noncomp_bps: f64,
    pub stderr_bit_rate_noncomp_bps: f64,
    /// Relative gain of the mean CoMP bit rate over the mean baseline.
    pub improvement_pct: f64,
}

fn replicate(spec: &SweepSpec, value: f64, rep: usize) -> CliResult<SweepRow> {
    let mut layout = spec.layout.clone();
    spec.axis.apply(&mut layout, value)?;
    let seed = spec.seed.wrapping_add(rep as u64);
    let s = scenario::generate(&layout.generator_config(seed))?;
    let init = default_initial_association(&s)?;
    let out = run_algorithm1(&s, &init, &spec.selection)?;
    let comp = out.solution.objective();
    let noncomp = out.initial_solution.objective();
    let (mean_load, mean_fronthaul_util) = utilization(&s, &out.solution);
    Ok(SweepRow {
        axis: spec.axis.name(),
        value: value.to_string(),
        rep,
        seed,
        sum_eta_comp: comp,
        sum_eta_noncomp: noncomp,
        improvement_pct: improvement_pct(comp, noncomp),
        mean_load,
        mean_fronthaul_util,
        bit_rate_comp_bps: served_bit_rate(&s, &out.solution.eta_star.eta),
        bit_rate_noncomp_bps: served_bit_rate(&s, &out.initial_solution.eta_star.eta),
    })
}

/// Every (value, rep) replication, ordered by value then rep.
pub fn run_sweep(spec: &SweepSpec) -> CliResult<Vec<SweepRow>> {
    let jobs: Vec<(f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.reps).map(move |r| (v, r)))
        .collect();
    jobs.par_iter()
        .map(|&(v, r)| replicate(spec, v, r))
        .collect()
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One row per axis value, in first-seen order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut values: Vec<&str> = Vec::new();
    for r in rows {
        if !values.contains(&r.value.as_str()) {
            values.push(&r.value);
        }
    }
    values
        .into_iter()
        .map(|v| {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.value == v).collect();
            let comp: Vec<f64> = cell.iter().map(|r| r.bit_rate_comp_bps).collect();
            let noncomp: Vec<f64> = cell.iter().map(|r| r.bit_rate_noncomp_bps).collect();
            let (mc, sc) = mean_stderr(&comp);
            let (mn, sn) = mean_stderr(&noncomp);
            SummaryRow {
                axis: cell[0].axis,
                value: v.to_string(),
                reps: cell.len(),
                mean_bit_rate_comp_bps: mc,
                stderr_bit_rate_comp_bps: sc,
                mean_bit_rate_noncomp_bps: mn,
                stderr_bit_rate_noncomp_bps: sn,
                improvement_pct: improvement_pct(mc, mn),
            }
        })
        .collect()
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Failure(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Failure(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    let fixed_point: FixedPointConfig = a.solver.config()?;
    let spec = SweepSpec {
        axis: a.axis,
        values: a.values.clone(),
        reps: a.reps,
        seed: a.seed,
        layout: a.layout.clone(),
        selection: SelectionConfig {
            fixed_point,
            rule: a.rule.into(),
            ..SelectionConfig::default()
        },
    };
    let rows = run_sweep(&spec)?;
    write_text(&a.out, &to_csv(&rows)?)?;
    let summary = summarize(&rows);
    if let Some(path) = &a.summary {
        write_text(path, &to_csv(&summary)?)?;
    }
    for s in &summary {
        println!(
            "{}={}: comp {:.4e} bps, non-comp {:.4e} bps, {:+.2}%",
            s.axis, s.value, s.mean_bit_rate_comp_bps, s.mean_bit_rate_noncomp_bps, s.improvement_pct
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: &str, comp: f64, noncomp: f64) -> SweepRow {
        SweepRow {
            axis: "bs",
            value: value.into(),
            rep: 0,
            seed: 0,
            sum_eta_comp: 0.0,
            sum_eta_noncomp: 0.0,
            improvement_pct: 0.0,
            mean_load: 0.0,
            mean_fronthaul_util: 0.0,
            bit_rate_comp_bps: comp,
            bit_rate_noncomp_bps: noncomp,
        }
    }

    #[test]
    fn summary_statistics() {
        let rows = [row("2", 1.0, 1.0), row("2", 3.0, 1.0), row("4", 5.0, 4.0)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].mean_bit_rate_comp_bps, 2.0);
        assert_eq!(s[0].stderr_bit_rate_comp_bps, 1.0);
        assert_eq!(s[0].stderr_bit_rate_noncomp_bps, 0.0);
        assert_eq!(s[0].improvement_pct, 100.0);
        assert_eq!(s[1].reps, 1);
        assert_eq!(s[1].improvement_pct, 25.0);
    }

    #[test]
    fn csv_header_is_fixed() {
        let text = to_csv(&[row("2", 1.0, 1.0)]).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "axis,value,rep,seed,sum_eta_comp,sum_eta_noncomp,improvement_pct,mean_load,mean_fronthaul_util"
        );
    }

    #[test]
    fn count_axes_reject_fractions() {
        let mut layout = crate::tests::layout();
        assert!(Axis::Bs.apply(&mut layout, 2.5).is_err());
        Axis::Bs.apply(&mut layout, 6.0).unwrap();
        assert_eq!(layout.bs_per_cluster, 6);
        Axis::MaxLoad.apply(&mut layout, 0.6).unwrap();
        assert_eq!(layout.max_load, 0.6);
    }
}
