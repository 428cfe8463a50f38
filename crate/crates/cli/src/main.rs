use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use specmap_cli::config::{ConfigOverrides, ExperimentConfig};
use specmap_cli::report::EvaluationReport;
use specmap_cli::{exit_code, pipeline};
use specmap_core::Result;

#[derive(Debug, Parser)]
#[command(
    name = "specmap",
    version,
    about = "Vibration-based damage detection that transfers a model trained on one structure to another"
)]
struct Cli {
    #[command(flatten)]
    overrides: ConfigOverrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the two-structure dataset and write its manifest.
    Synth,
    /// Train the discriminator on healthy source recordings.
    TrainSource {
        /// Continue from the saved checkpoint instead of starting fresh.
        #[arg(long)]
        resume: bool,
    },
    /// Calibrate the target-to-source spectral mapping.
    Adapt {
        /// Checkpoint file (defaults to <out-dir>/checkpoint.ckpt).
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        /// Target healthy recording (defaults to the manifest's target healthy case).
        #[arg(long, value_name = "FILE")]
        target_csv: Option<PathBuf>,
    },
    /// Fit the alarm threshold on target tuning windows.
    TuneThreshold,
    /// Score one target recording and write per-window alarms.
    Detect {
        /// CSV recording to score.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Label used in the output file name and score rows.
        #[arg(long, default_value = "detect")]
        label: String,
    },
    /// Measure detection quality on the held-out target windows.
    Evaluate {
        /// Also score without domain adaptation for comparison.
        #[arg(long)]
        ablate_no_da: bool,
    },
    /// Run synth, train-source, adapt, tune-threshold, and evaluate in order.
    RunAll {
        /// Also score without domain adaptation for comparison.
        #[arg(long)]
        ablate_no_da: bool,
        /// Use the dataset already in the data directory instead of simulating.
        #[arg(long)]
        use_existing_data: bool,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code(&error))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = ExperimentConfig::resolve(&cli.overrides)?;
    match cli.command {
        Command::Synth => {
            let manifest = pipeline::cmd_synth(&config)?;
            println!(
                "wrote {} case files and {}",
                manifest.cases.len(),
                config.manifest_path().display()
            );
        }
        Command::TrainSource { resume } => {
            let summary = pipeline::cmd_train_source(&config, resume)?;
            println!(
                "selected iteration {} with source AUC {:.4} ({} iterations run, {} evaluations logged)",
                summary.selected_iteration,
                summary.selected_auc,
                summary.iterations_run,
                summary.evaluations
            );
            println!("checkpoint: {}", summary.checkpoint.display());
        }
        Command::Adapt {
            checkpoint,
            target_csv,
        } => {
            let mapping =
                pipeline::cmd_adapt(&config, checkpoint.as_deref(), target_csv.as_deref())?;
            println!(
                "mapping calibrated on {} windows across {} channels",
                mapping.calibration_windows,
                mapping.channels.len()
            );
            println!("mapping: {}", config.mapping_path().display());
        }
        Command::TuneThreshold => {
            let model = pipeline::cmd_tune_threshold(&config)?;
            println!(
                "threshold {:.6} (mean {:.6}, std {:.6}, {} windows used, {} capped excluded)",
                model.threshold, model.mean, model.std_dev, model.tuned_on, model.capped_excluded
            );
            println!("threshold file: {}", config.threshold_path().display());
        }
        Command::Detect { input, label } => {
            let outcome = pipeline::cmd_detect(&config, &input, &label)?;
            let alarms = outcome.rows.iter().filter(|r| r.alarm).count();
            let max_score = outcome.rows.iter().map(|r| r.score).fold(0.0f64, f64::max);
            println!(
                "{} of {} windows above threshold {:.6} (max score {:.4})",
                alarms,
                outcome.rows.len(),
                outcome.threshold,
                max_score
            );
            println!("scores: {}", outcome.scores_csv.display());
        }
        Command::Evaluate { ablate_no_da } => {
            let report = pipeline::cmd_evaluate(&config, ablate_no_da)?;
            print_report(&config, &report);
        }
        Command::RunAll {
            ablate_no_da,
            use_existing_data,
        } => {
            let report = pipeline::run_all(&config, ablate_no_da, use_existing_data)?;
            print_report(&config, &report);
        }
    }
    Ok(())
}

fn print_report(config: &ExperimentConfig, report: &EvaluationReport) {
    println!(
        "healthy test: {} windows, {} alarms",
        report.healthy_test.windows, report.healthy_test.alarms
    );
    for case in &report.cases {
        match case.auc_no_da {
            Some(no_da) => println!(
                "{}: AUC {:.4} (no adaptation {:.4}), precision {:.4}, recall {:.4}, F1 {:.4}",
                case.label, case.auc, no_da, case.precision, case.recall, case.f1
            ),
            None => println!(
                "{}: AUC {:.4}, precision {:.4}, recall {:.4}, F1 {:.4}",
                case.label, case.auc, case.precision, case.recall, case.f1
            ),
        }
    }
    println!(
        "pooled: AUC {:.4}, precision {:.4}, recall {:.4}, F1 {:.4}",
        report.pooled.auc, report.pooled.precision, report.pooled.recall, report.pooled.f1
    );
    println!("report: {}", config.report_path().display());
}
