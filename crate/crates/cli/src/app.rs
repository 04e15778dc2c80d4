use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crosscal::binary::{fs_pass, fs_pass_rate, IntervalForecastSeries};
use crosscal::cep::{cep_test, data_grid, simulation_grid, CepConfig, DATA_BOOTSTRAP, SIMULATION_BOOTSTRAP};
use crosscal::diagnostics::{
    conditional_pit_histogram, default_marginal_grid, marginal_cross_calibration_curve, Binning, Conditioning,
    Interval, DEFAULT_CELLS,
};
use crosscal::lra::lra_test;
use crosscal::mct::{mct_grid_sweep, mct_test, preset};
use crosscal::power::{power_study, LraStatistic, PowerStudySpec, TestSpec};
use crosscal::scenarios::{simulate_logged, ScenarioName, ScenarioSpec};
use crosscal::sra::{sra_test, Score};
use crosscal::PredictionDataset;

use crate::ingest::{dump_csv, ingest_csv, parse_decl, IngestConfig};
use crate::CliError;

pub const SERIAL_WARNING: &str = "dataset is flagged as serially dependent; the SRA covariance assumes \
independent rows, so its p-value may be too small";
pub const FRAGILE_NOTE: &str = "MCT p-values are highly sensitive to the choice of grid; treat the result as fragile";

#[derive(Debug, Parser)]
#[command(name = "crosscal", version, about = "Cross-calibration diagnostics and tests for probabilistic forecasts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset CSV.
    #[arg(long, short)]
    pub data: PathBuf,
    /// Comma-separated `family[:label]` per forecaster; replaces the metadata line.
    #[arg(long, value_delimiter = ',')]
    pub families: Vec<String>,
    /// Seed for the PIT randomizers when the file has no `v` column.
    #[arg(long, default_value_t = 0)]
    pub v_seed: u64,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output prefix; writes `<out>.json` and `<out>.csv`.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreArg {
    Crps,
    Dss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatisticArg {
    Adjusted,
    FTest,
    Normality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PowerTestArg {
    Cep,
    Lra,
    Sra,
    Mct,
    Fs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conditional exceedance probability test with Westfall–Young adjustment.
    Cep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        tested: usize,
        /// Conditioning forecasters (comma separated, may be empty).
        #[arg(long, value_delimiter = ',')]
        wrt: Vec<usize>,
        /// `data` (150 levels), `simulation` (20 levels) or a comma-separated list.
        #[arg(long, default_value = "data")]
        grid: String,
        #[arg(long, default_value_t = DATA_BOOTSTRAP)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Linear regression approach on probit-transformed PITs.
    Lra {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        tested: usize,
        #[arg(long, value_delimiter = ',')]
        wrt: Vec<usize>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Score regression approach (CRPS or Dawid–Sebastiani).
    Sra {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        tested: usize,
        #[arg(long, value_delimiter = ',')]
        wrt: Vec<usize>,
        #[arg(long, value_enum, default_value_t = ScoreArg::Crps)]
        score: ScoreArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Marks the rows as serially dependent.
        #[arg(long)]
        serial: bool,
    },
    /// Marginal cross-calibration test on a fixed grid of outcome values.
    Mct {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        tested: usize,
        #[arg(long)]
        reference: usize,
        /// Preset (`m9`, `m4`, `m3`) or a comma-separated list.
        #[arg(long, default_value = "m4")]
        grid: String,
        /// Also sweep normal-quantile grids of sizes 1..=SWEEP into the CSV.
        #[arg(long)]
        sweep: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Marginal cross-calibration curve.
    DiagMarginal {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        tested: usize,
        #[arg(long)]
        reference: usize,
    },
    /// PIT histograms within bins of a conditioning variable.
    DiagPithist {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        tested: usize,
        /// `f{i}_{param}` or `f{i}_predictive_sd`.
        #[arg(long)]
        by: String,
        /// Number of equal-count bins (ignored with --breaks).
        #[arg(long, default_value_t = 3)]
        bins: usize,
        /// Bin edges; bins are `[b0, b1], (b1, b2], ...`.
        #[arg(long, value_delimiter = ',')]
        breaks: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_CELLS)]
        cells: usize,
    },
    /// Interval cross-calibration check for binary outcomes.
    ///
    /// With --data, checks two Bernoulli forecasters on the file. Otherwise
    /// estimates pass rates on simulated binary-beta series of each length.
    Fs {
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, short)]
        data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        families: Vec<String>,
        #[arg(long, default_value_t = 1)]
        first: usize,
        #[arg(long, default_value_t = 2)]
        second: usize,
        #[arg(long, default_value_t = 10)]
        resolution: usize,
        #[arg(long, value_delimiter = ',', default_value = "10000")]
        lengths: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        replications: usize,
        /// Forecaster checked in simulation mode (1 or 2).
        #[arg(long, default_value_t = 1)]
        forecaster: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulates a scenario dataset; the CSV output is a dataset file.
    Simulate {
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        scenario: ScenarioName,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo rejection rate of a test on a simulated scenario.
    Power {
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        scenario: ScenarioName,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum)]
        test: PowerTestArg,
        #[arg(long, default_value_t = 1)]
        tested: usize,
        /// Conditioning or comparison forecasters; the MCT reference.
        #[arg(long, value_delimiter = ',')]
        wrt: Vec<usize>,
        /// CEP: `simulation`, `data` or list; MCT: preset or list.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = SIMULATION_BOOTSTRAP)]
        bootstrap: usize,
        #[arg(long, value_enum, default_value_t = StatisticArg::Adjusted)]
        statistic: StatisticArg,
        #[arg(long, value_enum, default_value_t = ScoreArg::Crps)]
        score: ScoreArg,
        #[arg(long, default_value_t = 10)]
        resolution: usize,
        #[arg(long, default_value_t = 1000)]
        replications: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Prints the bundled JSON schema of a subcommand's report.
    Schema { command: String },
}

/// JSON document written by every analysis subcommand.
#[derive(Debug, Serialize)]
struct Envelope<R: Serialize> {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reject: Option<bool>,
    fragile: bool,
    warnings: Vec<String>,
    report: R,
}

impl<R: Serialize> Envelope<R> {
    fn new(command: &'static str, report: R) -> Self {
        Envelope { command, alpha: None, reject: None, fragile: false, warnings: Vec::new(), report }
    }

    fn test(command: &'static str, alpha: f64, reject: bool, report: R) -> Self {
        Envelope { alpha: Some(alpha), reject: Some(reject), ..Self::new(command, report) }
    }
}

fn load(args: &DataArgs) -> Result<PredictionDataset, CliError> {
    load_path(&args.data, &args.families, args.v_seed)
}

fn load_path(path: &Path, families: &[String], seed: u64) -> Result<PredictionDataset, CliError> {
    let families = if families.is_empty() {
        None
    } else {
        Some(
            families
                .iter()
                .enumerate()
                .map(|(i, s)| parse_decl(i + 1, s))
                .collect::<Result<Vec<_>, _>>()?,
        )
    };
    ingest_csv(path, &IngestConfig { families, seed })
}

fn zero_based(i: usize) -> Result<usize, CliError> {
    i.checked_sub(1)
        .ok_or_else(|| CliError::Input("forecaster indices are 1-based".into()))
}

fn zero_based_all(v: &[usize]) -> Result<Vec<usize>, CliError> {
    v.iter().map(|&i| zero_based(i)).collect()
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|i| i + 1).collect()
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Input(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("bad grid value `{x}`")))
        })
        .collect()
}

fn cep_grid(s: &str) -> Result<Vec<f64>, CliError> {
    match s {
        "data" => Ok(data_grid()),
        "simulation" => Ok(simulation_grid()),
        other => parse_list(other),
    }
}

fn mct_grid(s: &str) -> Result<Vec<f64>, CliError> {
    if s.starts_with('m') || s.starts_with("normal") {
        preset(s).map_err(|e| CliError::Input(e.to_string()))
    } else {
        parse_list(s)
    }
}

fn set_label(wrt: &[usize]) -> String {
    let items: Vec<String> = wrt.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", items.join(","))
}

fn float(x: f64) -> String {
    format!("{x:?}")
}

fn csv_table(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Input(format!("CSV output: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(format!("CSV output: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Input(e.to_string()))
}

fn write_outputs<R: Serialize>(out: &OutArgs, json: &Envelope<R>, csv: &str) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(json).map_err(|e| CliError::Input(e.to_string()))?;
    text.push('\n');
    write_file(&out.out.with_extension("json"), &text)?;
    write_file(&out.out.with_extension("csv"), csv)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Runs one subcommand, writing its artifacts.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Cep { data, out, tested, wrt, grid, bootstrap, alpha, seed } => {
            check_alpha(alpha)?;
            let ds = load(&data)?;
            let config = CepConfig { grid: cep_grid(&grid)?, bootstrap, alpha, seed };
            let mut rep = cep_test(&ds, zero_based(tested)?, &zero_based_all(&wrt)?, &config)?;
            rep.tested += 1;
            rep.conditioning = one_based(&rep.conditioning);
            let rows = rep.curve().into_iter().map(|(z, p)| vec![float(z), float(p)]).collect();
            let csv = csv_table(&["z", "p_adjusted"], rows)?;
            println!(
                "cep: F{tested} wrt {}: min adjusted p = {} ({}) at alpha = {alpha}",
                set_label(&wrt),
                float(rep.min_adjusted),
                if rep.reject { "reject" } else { "no rejection" }
            );
            write_outputs(&out, &Envelope::test("cep", alpha, rep.reject, rep.clone()), &csv)
        }
        Command::Lra { data, out, tested, wrt, alpha } => {
            check_alpha(alpha)?;
            let ds = load(&data)?;
            let mut rep = lra_test(&ds, zero_based(tested)?, &zero_based_all(&wrt)?)?;
            rep.tested += 1;
            rep.conditioning = one_based(&rep.conditioning);
            let reject = rep.reject(alpha);
            let csv = csv_table(
                &["test", "tested", "wrt", "p_f", "p_ad", "p_adjust"],
                vec![vec![
                    "lra".into(),
                    tested.to_string(),
                    set_label(&wrt),
                    float(rep.p_f),
                    float(rep.p_normal),
                    float(rep.p_adjust),
                ]],
            )?;
            println!(
                "lra: F{tested} wrt {}: p_F = {}, p_AD = {}, p_adjust = {}",
                set_label(&wrt),
                float(rep.p_f),
                float(rep.p_normal),
                float(rep.p_adjust)
            );
            write_outputs(&out, &Envelope::test("lra", alpha, reject, rep), &csv)
        }
        Command::Sra { data, out, tested, wrt, score, alpha, serial } => {
            check_alpha(alpha)?;
            let ds = load(&data)?;
            let score = match score {
                ScoreArg::Crps => Score::Crps,
                ScoreArg::Dss => Score::Dss,
            };
            let mut rep = sra_test(&ds, zero_based(tested)?, &zero_based_all(&wrt)?, score)?;
            rep.tested += 1;
            rep.others = one_based(&rep.others);
            let reject = rep.reject(alpha);
            let mut env = Envelope::test("sra", alpha, reject, rep.clone());
            if serial {
                eprintln!("warning: {SERIAL_WARNING}");
                env.warnings.push(SERIAL_WARNING.into());
            }
            let csv = csv_table(
                &["score", "tested", "wrt", "statistic", "p"],
                vec![vec![
                    score.to_string(),
                    tested.to_string(),
                    set_label(&rep.others),
                    float(rep.statistic),
                    float(rep.p_value),
                ]],
            )?;
            println!("sra ({score}): F{tested} wrt {}: T = {}, p = {}", set_label(&rep.others), float(rep.statistic), float(rep.p_value));
            write_outputs(&out, &env, &csv)
        }
        Command::Mct { data, out, tested, reference, grid, sweep, alpha } => {
            check_alpha(alpha)?;
            let ds = load(&data)?;
            let (i, j) = (zero_based(tested)?, zero_based(reference)?);
            let grid = mct_grid(&grid)?;
            eprintln!("note: {FRAGILE_NOTE}");
            let mut rep = mct_test(&ds, i, j, &grid)?;
            rep.tested += 1;
            rep.reference += 1;
            let reject = rep.reject(alpha);
            let mut rows = vec![vec![rep.grid.len().to_string(), float(rep.p_value), String::new(), "true".into()]];
            if let Some(max) = sweep {
                for p in mct_grid_sweep(&ds, i, j, 1..=max) {
                    rows.push(vec![
                        p.m.to_string(),
                        p.p_value.map(float).unwrap_or_default(),
                        p.error.unwrap_or_default(),
                        "true".into(),
                    ]);
                }
            }
            let csv = csv_table(&["m", "p", "error", "fragile"], rows)?;
            println!("mct [fragile]: F{tested} vs F{reference}, m = {}: p = {}", rep.grid.len(), float(rep.p_value));
            let mut env = Envelope::test("mct", alpha, reject, rep);
            env.fragile = true;
            env.warnings.push(FRAGILE_NOTE.into());
            write_outputs(&out, &env, &csv)
        }
        Command::DiagMarginal { data, out, tested, reference } => {
            let ds = load(&data)?;
            let grid = default_marginal_grid(&ds);
            let mut curve = marginal_cross_calibration_curve(&ds, zero_based(tested)?, zero_based(reference)?, &grid)?;
            curve.tested += 1;
            curve.reference += 1;
            let rows = curve
                .grid
                .iter()
                .zip(&curve.values)
                .map(|(y, d)| vec![float(*y), float(*d)])
                .collect();
            let csv = csv_table(&["y", "delta"], rows)?;
            println!("diag-marginal: F{tested} vs F{reference}: sup |delta| = {}", float(curve.sup_abs()));
            write_outputs(&out, &Envelope::new("diag-marginal", curve), &csv)
        }
        Command::DiagPithist { data, out, tested, by, bins, breaks, cells } => {
            let ds = load(&data)?;
            let cond = parse_conditioning(&ds, &by)?;
            let binning = if breaks.is_empty() {
                Binning::EqualCount(bins)
            } else {
                if breaks.len() < 2 || breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(CliError::Input("--breaks needs at least two increasing values".into()));
                }
                Binning::Intervals(
                    breaks
                        .windows(2)
                        .enumerate()
                        .map(|(k, w)| if k == 0 { Interval::closed(w[0], w[1]) } else { Interval::left_open(w[0], w[1]) })
                        .collect(),
                )
            };
            let mut h = conditional_pit_histogram(&ds, zero_based(tested)?, cond, &binning, cells)?;
            h.tested += 1;
            h.conditioning = match h.conditioning {
                Conditioning::Parameter { forecaster, param } => Conditioning::Parameter { forecaster: forecaster + 1, param },
                Conditioning::PredictiveSd { forecaster } => Conditioning::PredictiveSd { forecaster: forecaster + 1 },
            };
            let mut rows = Vec::new();
            for (b, bin) in h.bins.iter().enumerate() {
                for (c, n) in bin.cells.iter().enumerate() {
                    rows.push(vec![
                        (b + 1).to_string(),
                        float(bin.interval.lo),
                        float(bin.interval.hi),
                        (c + 1).to_string(),
                        n.to_string(),
                    ]);
                }
            }
            let csv = csv_table(&["bin", "lo", "hi", "cell", "count"], rows)?;
            println!("diag-pithist: F{tested} by {by}: {} bins, {} rows unbinned", h.bins.len(), h.unbinned);
            write_outputs(&out, &Envelope::new("diag-pithist", h), &csv)
        }
        Command::Fs { out, data, families, first, second, resolution, lengths, replications, forecaster, seed } => {
            if let Some(path) = data {
                let ds = load_path(&path, &families, seed)?;
                let s = IntervalForecastSeries::from_dataset(&ds, zero_based(first)?, zero_based(second)?, resolution)?;
                let verdicts = vec![fs_pass(&s, 1)?, fs_pass(&s, 2)?];
                let rows = verdicts
                    .iter()
                    .map(|v| vec![v.forecaster.to_string(), v.pass.to_string(), v.failing.len().to_string()])
                    .collect();
                let csv = csv_table(&["forecaster", "pass", "failing_profiles"], rows)?;
                println!(
                    "fs: first {}, second {}",
                    if verdicts[0].pass { "passes" } else { "fails" },
                    if verdicts[1].pass { "passes" } else { "fails" }
                );
                let report = json!({"mode": "data", "resolution": resolution, "n": s.len(), "verdicts": verdicts});
                write_outputs(&out, &Envelope::new("fs", report), &csv)
            } else {
                let mut rows = Vec::new();
                let mut table = Vec::new();
                for &t in &lengths {
                    let rate = fs_pass_rate(t, resolution, forecaster, replications, seed)?;
                    println!("fs: T = {t}: pass rate {}", float(rate));
                    rows.push(vec![t.to_string(), float(rate)]);
                    table.push(json!({"length": t, "pass_rate": rate}));
                }
                let csv = csv_table(&["T", "pass_rate"], rows)?;
                let report = json!({
                    "mode": "rate",
                    "resolution": resolution,
                    "forecaster": forecaster,
                    "replications": replications,
                    "seed": seed,
                    "rows": table,
                });
                write_outputs(&out, &Envelope::new("fs", report), &csv)
            }
        }
        Command::Simulate { out, scenario, n, seed } => {
            let sim = simulate_logged(&ScenarioSpec { name: scenario, n, seed })?;
            let forecasters: Vec<Value> = sim
                .dataset
                .forecasters()
                .iter()
                .map(|f| json!({"label": f.label(), "family": f.family().name()}))
                .collect();
            let report = json!({
                "scenario": scenario.name(),
                "n": n,
                "seed": seed,
                "redraws": sim.redraws,
                "forecasters": forecasters,
            });
            println!("simulate: {scenario}, n = {n}, seed = {seed}, {} redraws", sim.redraws);
            write_outputs(&out, &Envelope::new("simulate", report), &dump_csv(&sim.dataset))
        }
        Command::Power {
            out,
            scenario,
            n,
            test,
            tested,
            wrt,
            grid,
            bootstrap,
            statistic,
            score,
            resolution,
            replications,
            alpha,
            seed,
        } => {
            check_alpha(alpha)?;
            let i = zero_based(tested)?;
            let j = zero_based_all(&wrt)?;
            let spec_test = match test {
                PowerTestArg::Cep => TestSpec::Cep {
                    tested: i,
                    conditioning: j,
                    grid: cep_grid(grid.as_deref().unwrap_or("simulation"))?,
                    bootstrap,
                },
                PowerTestArg::Lra => TestSpec::Lra {
                    tested: i,
                    conditioning: j,
                    statistic: match statistic {
                        StatisticArg::Adjusted => LraStatistic::Adjusted,
                        StatisticArg::FTest => LraStatistic::FTest,
                        StatisticArg::Normality => LraStatistic::Normality,
                    },
                },
                PowerTestArg::Sra => TestSpec::Sra {
                    tested: i,
                    others: j,
                    score: match score {
                        ScoreArg::Crps => Score::Crps,
                        ScoreArg::Dss => Score::Dss,
                    },
                },
                PowerTestArg::Mct => {
                    let [reference] = j[..] else {
                        return Err(CliError::Input("MCT needs exactly one --wrt reference".into()));
                    };
                    TestSpec::Mct { tested: i, reference, grid: mct_grid(grid.as_deref().unwrap_or("m4"))? }
                }
                PowerTestArg::Fs => TestSpec::Fs { forecaster: tested, resolution },
            };
            let spec = PowerStudySpec { scenario, n, test: spec_test, replications, alpha, seed };
            spec.validate().map_err(|e| CliError::Input(e.to_string()))?;
            let res = power_study(&spec)?;
            let test_name = format!("{test:?}").to_lowercase();
            let csv = csv_table(
                &["scenario", "n", "test", "tested", "wrt", "power", "std_error", "completed", "errors"],
                vec![vec![
                    scenario.name().into(),
                    n.to_string(),
                    test_name.clone(),
                    tested.to_string(),
                    set_label(&wrt),
                    float(res.power),
                    float(res.std_error),
                    res.completed.to_string(),
                    res.errors.to_string(),
                ]],
            )?;
            println!(
                "power: {test_name} on {scenario} (n = {n}): {} ± {} over {} replicates",
                float(res.power), float(res.std_error), res.completed
            );
            let report = json!({
                "scenario": scenario.name(),
                "n": n,
                "test": test_name,
                "tested": tested,
                "wrt": wrt,
                "replications": replications,
                "seed": seed,
                "result": res,
            });
            let mut env = Envelope::new("power", report);
            env.alpha = Some(alpha);
            env.fragile = test == PowerTestArg::Mct;
            write_outputs(&out, &env, &csv)
        }
        Command::Schema { command } => {
            let s = crate::schema::schema_for(&command)
                .ok_or_else(|| CliError::Input(format!("no schema for `{command}`")))?;
            print!("{s}");
            Ok(())
        }
    }
}

/// Parses `f{i}_{param}` or `f{i}_predictive_sd`.
fn parse_conditioning(ds: &PredictionDataset, by: &str) -> Result<Conditioning, CliError> {
    let bad = || CliError::Input(format!("--by `{by}` must be f{{i}}_{{param}} or f{{i}}_predictive_sd"));
    let rest = by.strip_prefix('f').ok_or_else(bad)?;
    let (num, name) = rest.split_once('_').ok_or_else(bad)?;
    let i = zero_based(num.parse::<usize>().map_err(|_| bad())?)?;
    let f = ds.forecaster(i).map_err(|e| CliError::Input(e.to_string()))?;
    if name == "predictive_sd" {
        return Ok(Conditioning::PredictiveSd { forecaster: i });
    }
    let param = f
        .family()
        .param_names()
        .iter()
        .position(|p| *p == name)
        .ok_or_else(|| CliError::Input(format!("{} has no parameter `{name}`", f.family())))?;
    Ok(Conditioning::Parameter { forecaster: i, param })
}
