//! Command-line front end: evaluates the closed forms, runs the minimax
//! optimizer and the table reproductions, drives Monte Carlo runs, and
//! converts loss figures — as tables for reading or CSV for machines.
//!
//! Exit codes: 0 on success, 1 on a validation error (bad config file,
//! unknown key, out-of-range parameter, mismatched scenario), 2 on a runtime
//! error (degenerate baseline, unreachable deviation target, I/O failure).

mod config;

use cfqkd::montecarlo::single_photon_expectation;
use cfqkd::{
    attack_stats, baseline_stats, compare_to_analytic, loss_fluctuation_equivalent, optimize,
    ratio_report, reproduce_tables, simulate_with, solve_y, solve_z0, AnalyticError, AttackParams,
    AttackScenario, ConfigError, DetectionStats, Discrimination, OptimizeError, ProtocolConfig,
    RatioReport, SimulationError, SourceModel, StatCheck, TableId, DEFAULT_GRID_STEP,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cfqkd",
    version,
    about = "Detector statistics, attack optimization and pulse-level Monte Carlo for N09 counterfactual QKD under detector-blinding attacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Protocol config file (one `key = value` per line, `#` comments)
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Override one config key, e.g. --set reflectivity=0.4 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Markdown,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Baseline,
    #[value(name = "blind-reduce")]
    BlindReduce,
    #[value(name = "combined-nodisc")]
    CombinedNodisc,
    #[value(name = "combined-all")]
    CombinedAll,
    #[value(name = "combined-d1d2")]
    CombinedD1d2,
    #[value(name = "combined-d0d2")]
    CombinedD0d2,
}

impl From<ScenarioArg> for AttackScenario {
    fn from(arg: ScenarioArg) -> Self {
        match arg {
            ScenarioArg::Baseline => AttackScenario::Baseline,
            ScenarioArg::BlindReduce => AttackScenario::BlindReduceLosses,
            ScenarioArg::CombinedNodisc => AttackScenario::CombinedNoDisc,
            ScenarioArg::CombinedAll => AttackScenario::CombinedFullDisc,
            ScenarioArg::CombinedD1d2 => AttackScenario::CombinedD1D2,
            ScenarioArg::CombinedD0d2 => AttackScenario::CombinedD0D2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Coherent,
    #[value(name = "single-photon")]
    SinglePhoton,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableArg {
    #[value(name = "I", alias = "i")]
    I,
    #[value(name = "II", alias = "ii")]
    II,
}

#[derive(Subcommand)]
enum Command {
    /// Expected detector statistics of the eavesdropper-free exchange
    Baseline {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
    /// Attacked statistics and attack/baseline ratios for given knobs
    Attack {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        /// Probability that Eve measures the channel pulse
        #[arg(long)]
        x: f64,
        /// Forced-click probability; solved exactly from x when omitted
        #[arg(long)]
        y: Option<f64>,
        /// Faked-state probability (no-discrimination layout)
        #[arg(long, default_value_t = 0.0)]
        z: f64,
        /// Selective D0 forced-click probability; solved from x when omitted
        #[arg(long)]
        z0: Option<f64>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
    /// Minimax search for the least detectable strategy
    Optimize {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
    /// Reproduce attack-efficiency table I or II
    Tables {
        /// Which table to reproduce
        #[arg(value_enum)]
        table: TableArg,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
    /// Pulse-level Monte Carlo run with z-scores against the closed forms
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long, value_enum, default_value = "coherent")]
        source: SourceArg,
        /// Number of pulses (required; no hidden default)
        #[arg(long)]
        pulses: u64,
        /// Stream seed (required; runs are reproducible)
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        #[arg(long)]
        y: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        z: f64,
        #[arg(long)]
        z0: Option<f64>,
        /// Also write one CSV record per pulse to this file
        #[arg(long, value_name = "FILE")]
        records: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
    /// Channel-loss fluctuation equivalent to a statistics deviation
    LossEquiv {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Smallest ratio deviation the fluctuation must reach, in (0, 1)
        #[arg(long)]
        deviation: f64,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<AnalyticError> for CliError {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::Config(inner) => inner.into(),
            AnalyticError::NotCombined(_) | AnalyticError::InvalidDeviation(_) => {
                CliError::Validation(e.to_string())
            }
            AnalyticError::DegenerateBaseline { .. }
            | AnalyticError::DeviationUnreachable { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::InvalidGridStep(_) => CliError::Validation(e.to_string()),
            OptimizeError::Analytic(inner) => inner.into(),
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Full-precision decimal that parses back to the identical f64.
fn full(v: f64) -> String {
    format!("{v}")
}

/// Fixed five decimals for ratio/parameter table cells.
fn f5(v: f64) -> String {
    format!("{v:.5}")
}

/// Probabilities are tiny; five significant decimals in scientific form.
fn prob(v: f64) -> String {
    format!("{v:.5e}")
}

fn markdown_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}|", vec!["---"; header.len()].join("|"));
    for row in rows {
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
    out
}

fn discrimination_label(disc: Discrimination) -> &'static str {
    match disc {
        Discrimination::None => "none",
        Discrimination::All => "all",
        Discrimination::D1D2 => "d1d2",
        Discrimination::D0D2 => "d0d2",
    }
}

/// Fills in the exactly-solved compensation knobs where the user left them
/// unset, then validates.
fn resolve_params(
    cfg: &ProtocolConfig,
    scenario: AttackScenario,
    x: f64,
    y: Option<f64>,
    z: f64,
    z0: Option<f64>,
) -> Result<AttackParams, CliError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(CliError::Validation(format!(
            "x must be in [0, 1], got {x}"
        )));
    }
    let y = y.unwrap_or_else(|| {
        if scenario.is_combined() {
            solve_y(cfg, x)
        } else {
            0.0
        }
    });
    let z0 = z0.unwrap_or_else(|| {
        if scenario == AttackScenario::CombinedD0D2 {
            solve_z0(cfg, x)
        } else {
            0.0
        }
    });
    Ok(AttackParams::new(x, y, z, z0)?)
}

const STATS_COLUMNS: &str = "p_d0,p_d1,p_d2,p_d0_opp";
const FULL_COLUMNS: &str = "p_d0,p_d1,p_d2,p_d0_opp,r_d0,r_d1,r_d2,r_d0_opp,x,y,z,z0,max_deviation";

fn full_row(stats: &DetectionStats, report: &RatioReport, params: &AttackParams) -> String {
    [
        stats.p_d0,
        stats.p_d1,
        stats.p_d2,
        stats.p_d0_opp,
        report.r_d0,
        report.r_d1,
        report.r_d2,
        report.r_d0_opp,
        params.x,
        params.y,
        params.z,
        params.z0,
        report.max_deviation,
    ]
    .map(full)
    .join(",")
}

fn print_stats_markdown(title: &str, stats: &DetectionStats) {
    println!("{title}");
    let rows = vec![
        vec!["p_d0".into(), prob(stats.p_d0)],
        vec!["p_d1".into(), prob(stats.p_d1)],
        vec!["p_d2".into(), prob(stats.p_d2)],
        vec!["p_d0_opp".into(), prob(stats.p_d0_opp)],
    ];
    print!(
        "{}",
        markdown_table(&["statistic".into(), "per-pulse probability".into()], &rows)
    );
}

fn print_report_markdown(report: &RatioReport, params: &AttackParams) {
    let rows = vec![
        vec!["r_d0".into(), f5(report.r_d0)],
        vec!["r_d1".into(), f5(report.r_d1)],
        vec!["r_d2".into(), f5(report.r_d2)],
        vec!["r_d0_opp".into(), f5(report.r_d0_opp)],
        vec!["max_deviation".into(), f5(report.max_deviation)],
    ];
    print!(
        "{}",
        markdown_table(&["ratio".into(), "attack / baseline".into()], &rows)
    );
    println!(
        "parameters: x={} y={} z={} z0={}",
        f5(params.x),
        f5(params.y),
        f5(params.z),
        f5(params.z0)
    );
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Baseline { cfg, format } => {
            let cfg = config::load(&cfg.config, &cfg.overrides).map_err(CliError::Validation)?;
            let stats = baseline_stats(&cfg);
            match format {
                Format::Csv => {
                    println!("{STATS_COLUMNS}");
                    println!(
                        "{},{},{},{}",
                        full(stats.p_d0),
                        full(stats.p_d1),
                        full(stats.p_d2),
                        full(stats.p_d0_opp)
                    );
                }
                Format::Markdown => print_stats_markdown("baseline detector statistics", &stats),
            }
            Ok(())
        }

        Command::Attack {
            cfg,
            scenario,
            x,
            y,
            z,
            z0,
            format,
        } => {
            let cfg = config::load(&cfg.config, &cfg.overrides).map_err(CliError::Validation)?;
            let scenario = AttackScenario::from(scenario);
            let params = resolve_params(&cfg, scenario, x, y, z, z0)?;
            let stats = attack_stats(&cfg, scenario, &params)?;
            let report = ratio_report(&stats, &baseline_stats(&cfg))?;
            match format {
                Format::Csv => {
                    println!("{FULL_COLUMNS}");
                    println!("{}", full_row(&stats, &report, &params));
                }
                Format::Markdown => {
                    print_stats_markdown("attacked detector statistics", &stats);
                    println!();
                    print_report_markdown(&report, &params);
                }
            }
            Ok(())
        }

        Command::Optimize {
            cfg,
            scenario,
            grid_step,
            format,
        } => {
            let cfg = config::load(&cfg.config, &cfg.overrides).map_err(CliError::Validation)?;
            let scenario = AttackScenario::from(scenario);
            let best = optimize(&cfg, scenario, grid_step)?;
            let stats = attack_stats(&cfg, scenario, &best.params)?;
            match format {
                Format::Csv => {
                    println!("{FULL_COLUMNS}");
                    println!("{}", full_row(&stats, &best.report, &best.params));
                }
                Format::Markdown => {
                    println!(
                        "minimax optimum (grid step {}, {} evaluations)",
                        best.grid_step, best.evaluations
                    );
                    print_report_markdown(&best.report, &best.params);
                }
            }
            Ok(())
        }

        Command::Tables {
            table,
            grid_step,
            format,
        } => {
            let table = match table {
                TableArg::I => TableId::I,
                TableArg::II => TableId::II,
            };
            let cells = reproduce_tables(table, grid_step)?;
            match format {
                Format::Csv => {
                    println!("table,discrimination,column,r_d0,r_d1,r_d2,r_d0_opp,x,y,z,z0,max_deviation");
                    for cell in &cells {
                        let r = &cell.result;
                        println!(
                            "{},{},{},{},{},{},{},{},{},{},{},{}",
                            table,
                            discrimination_label(cell.discrimination),
                            cell.column,
                            full(r.report.r_d0),
                            full(r.report.r_d1),
                            full(r.report.r_d2),
                            full(r.report.r_d0_opp),
                            full(r.params.x),
                            full(r.params.y),
                            full(r.params.z),
                            full(r.params.z0),
                            full(r.report.max_deviation)
                        );
                    }
                }
                Format::Markdown => {
                    println!("attack efficiencies, table {table}");
                    for disc in [
                        Discrimination::None,
                        Discrimination::All,
                        Discrimination::D1D2,
                        Discrimination::D0D2,
                    ] {
                        let group: Vec<_> =
                            cells.iter().filter(|c| c.discrimination == disc).collect();
                        println!("\ndiscrimination: {}", discrimination_label(disc));
                        let mut header = vec![String::new()];
                        header.extend(group.iter().map(|c| c.column.clone()));
                        let mut rows = Vec::new();
                        let ratio = |r: &RatioReport| [r.r_d0, r.r_d1, r.r_d2, r.r_d0_opp];
                        for (i, name) in ["r_d0", "r_d1", "r_d2", "r_d0_opp"].iter().enumerate() {
                            let mut row = vec![name.to_string()];
                            row.extend(group.iter().map(|c| f5(ratio(&c.result.report)[i])));
                            rows.push(row);
                        }
                        let mut row = vec!["x".to_string()];
                        row.extend(group.iter().map(|c| f5(c.result.params.x)));
                        rows.push(row);
                        let mut row = vec!["y".to_string()];
                        row.extend(group.iter().map(|c| f5(c.result.params.y)));
                        rows.push(row);
                        if disc == Discrimination::None {
                            let mut row = vec!["z".to_string()];
                            row.extend(group.iter().map(|c| f5(c.result.params.z)));
                            rows.push(row);
                        }
                        if disc == Discrimination::D0D2 {
                            let mut row = vec!["z0".to_string()];
                            row.extend(group.iter().map(|c| f5(c.result.params.z0)));
                            rows.push(row);
                        }
                        print!("{}", markdown_table(&header, &rows));
                    }
                }
            }
            Ok(())
        }

        Command::Simulate {
            cfg,
            scenario,
            source,
            pulses,
            seed,
            x,
            y,
            z,
            z0,
            records,
            format,
        } => {
            let cfg = config::load(&cfg.config, &cfg.overrides).map_err(CliError::Validation)?;
            let scenario = AttackScenario::from(scenario);
            let source = match source {
                SourceArg::Coherent => SourceModel::Coherent,
                SourceArg::SinglePhoton => SourceModel::SinglePhoton,
            };
            let params = resolve_params(&cfg, scenario, x, y, z, z0)?;

            let mut writer = match &records {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path)?);
                    writeln!(w, "{}", cfqkd::PulseRecord::CSV_HEADER)?;
                    Some(w)
                }
                None => None,
            };
            let mut io_error = None;
            let summary = simulate_with(&cfg, scenario, &params, source, pulses, seed, |rec| {
                if let Some(w) = writer.as_mut() {
                    if io_error.is_none() {
                        if let Err(e) = writeln!(w, "{}", rec.csv_line()) {
                            io_error = Some(e);
                        }
                    }
                }
            })?;
            if let Some(e) = io_error {
                return Err(e.into());
            }
            if let Some(mut w) = writer {
                w.flush()?;
            }

            // Reference statistics: the closed forms for coherent runs
            // (baseline forms double as the masking target for the
            // blind-and-reduce attack), the linear single-photon
            // expectations otherwise.
            let expected = match (source, scenario) {
                (SourceModel::SinglePhoton, _) => single_photon_expectation(&cfg),
                (SourceModel::Coherent, s) if s.is_combined() => attack_stats(&cfg, s, &params)?,
                (SourceModel::Coherent, _) => baseline_stats(&cfg),
            };
            let checks = compare_to_analytic(&summary, &expected);

            let z_text = |check: StatCheck| match check {
                StatCheck::Z(value) => full(value),
                StatCheck::ExactMatch => "exact_match".to_string(),
                StatCheck::ExactMismatch => "exact_mismatch".to_string(),
            };
            match format {
                Format::Csv => {
                    println!(
                        "pulses,seed,{STATS_COLUMNS},sifted_key_length,qber,eve_key_recovery,z_d0,z_d1,z_d2,z_d0_opp"
                    );
                    println!(
                        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        summary.pulses,
                        seed,
                        full(summary.empirical.p_d0),
                        full(summary.empirical.p_d1),
                        full(summary.empirical.p_d2),
                        full(summary.empirical.p_d0_opp),
                        summary.sifted_key_length,
                        full(summary.qber),
                        full(summary.eve_key_recovery),
                        z_text(checks.p_d0),
                        z_text(checks.p_d1),
                        z_text(checks.p_d2),
                        z_text(checks.p_d0_opp),
                    );
                }
                Format::Markdown => {
                    println!("simulation of {} pulses (seed {seed})", summary.pulses);
                    let rows = vec![
                        vec![
                            "p_d0".into(),
                            summary.counts.d0_same.to_string(),
                            prob(summary.empirical.p_d0),
                            prob(expected.p_d0),
                            z_text(checks.p_d0),
                        ],
                        vec![
                            "p_d1".into(),
                            summary.counts.d1.to_string(),
                            prob(summary.empirical.p_d1),
                            prob(expected.p_d1),
                            z_text(checks.p_d1),
                        ],
                        vec![
                            "p_d2".into(),
                            summary.counts.d2.to_string(),
                            prob(summary.empirical.p_d2),
                            prob(expected.p_d2),
                            z_text(checks.p_d2),
                        ],
                        vec![
                            "p_d0_opp".into(),
                            summary.counts.d0_opp.to_string(),
                            prob(summary.empirical.p_d0_opp),
                            prob(expected.p_d0_opp),
                            z_text(checks.p_d0_opp),
                        ],
                    ];
                    print!(
                        "{}",
                        markdown_table(
                            &[
                                "statistic".into(),
                                "clicks".into(),
                                "empirical".into(),
                                "expected".into(),
                                "z".into()
                            ],
                            &rows
                        )
                    );
                    println!(
                        "sifted key length: {} | qber: {} | eve key recovery: {}",
                        summary.sifted_key_length,
                        full(summary.qber),
                        full(summary.eve_key_recovery)
                    );
                }
            }
            Ok(())
        }

        Command::LossEquiv {
            cfg,
            deviation,
            format,
        } => {
            let cfg = config::load(&cfg.config, &cfg.overrides).map_err(CliError::Validation)?;
            let db = loss_fluctuation_equivalent(&cfg, deviation)?;
            match format {
                Format::Csv => {
                    println!("deviation,fluctuation_db");
                    println!("{},{}", full(deviation), full(db));
                }
                Format::Markdown => {
                    println!(
                        "a {} dB loss fluctuation shifts every detector statistic by at least {}",
                        f5(db),
                        full(deviation)
                    );
                }
            }
            Ok(())
        }
    }
}
