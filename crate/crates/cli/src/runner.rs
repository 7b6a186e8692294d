//! Executes a resolved [`RunManifest`]: simulate, filter, write CSV,
//! print a one-line summary per run.
//!
//! All floating-point CSV fields are written with 17 significant digits so
//! a value survives a write/parse round trip bit for bit; reruns of the
//! same config produce byte-identical files.

use std::fmt::Write as _;
use std::io::{self, ErrorKind, Write as _};
use std::path::Path;

use iekf::sim::{self, StepRecord};
use iekf::{Error, IekfConfig};

use crate::config::{Mode, RunManifest};
use crate::error::CliError;

pub fn execute(manifest: &RunManifest) -> Result<(), CliError> {
    match manifest.mode {
        Mode::Single => single(manifest),
        Mode::MonteCarlo => monte_carlo(manifest),
        Mode::Compare => compare(manifest),
    }
}

fn single(manifest: &RunManifest) -> Result<(), CliError> {
    let run = sim::generate(&manifest.scenario).map_err(runtime)?;
    let (metrics, records) =
        sim::run_filter(&run, &manifest.scenario, &manifest.filter).map_err(runtime)?;
    write_step_csv(&manifest.output_path, &records)?;
    say(&format!(
        "single: steps={} rmse_rad={} final_err_rad={} mean_nees={} mean_iterations={} within_3sigma={}",
        records.len(),
        summary_float(metrics.attitude_rmse),
        summary_float(metrics.final_error),
        summary_float(mean(&metrics.nees_sequence)),
        summary_float(metrics.mean_iterations),
        summary_float(metrics.within_3sigma_fraction),
    ));
    say(&format!("wrote {}", manifest.output_path.display()));
    Ok(())
}

fn monte_carlo(manifest: &RunManifest) -> Result<(), CliError> {
    // The CSV holds the per-step records of the base-seed trial so there is
    // something concrete to plot; the summary line carries the aggregate.
    let run = sim::generate(&manifest.scenario).map_err(runtime)?;
    let (_, records) =
        sim::run_filter(&run, &manifest.scenario, &manifest.filter).map_err(runtime)?;
    let aggregate =
        sim::monte_carlo(&manifest.scenario, &manifest.filter, manifest.trials).map_err(runtime)?;
    write_step_csv(&manifest.output_path, &records)?;
    say(&format!(
        "monte-carlo: trials={} steps={} rmse_rad={} mean_nees={} mean_iterations={} within_3sigma={}",
        manifest.trials,
        records.len(),
        summary_float(aggregate.attitude_rmse),
        summary_float(mean(&aggregate.nees_sequence)),
        summary_float(aggregate.mean_iterations),
        summary_float(aggregate.within_3sigma_fraction),
    ));
    say(&format!("wrote {}", manifest.output_path.display()));
    Ok(())
}

fn compare(manifest: &RunManifest) -> Result<(), CliError> {
    let run = sim::generate(&manifest.scenario).map_err(runtime)?;
    // A single-iteration budget turns the iterated update into the plain
    // extended-filter update; everything else stays identical.
    let ekf_config = IekfConfig {
        max_iterations: 1,
        ..manifest.filter.clone()
    };
    let (ekf_metrics, ekf_records) =
        sim::run_filter(&run, &manifest.scenario, &ekf_config).map_err(runtime)?;
    let (iekf_metrics, iekf_records) =
        sim::run_filter(&run, &manifest.scenario, &manifest.filter).map_err(runtime)?;
    write_compare_csv(&manifest.output_path, &ekf_records, &iekf_records)?;
    say(&format!(
        "compare: steps={} rmse_rad_ekf={} rmse_rad_iekf={} rmse_ratio_ekf_over_iekf={} mean_iterations_iekf={}",
        iekf_records.len(),
        summary_float(ekf_metrics.attitude_rmse),
        summary_float(iekf_metrics.attitude_rmse),
        summary_float(ekf_metrics.attitude_rmse / iekf_metrics.attitude_rmse),
        summary_float(iekf_metrics.mean_iterations),
    ));
    say(&format!("wrote {}", manifest.output_path.display()));
    Ok(())
}

/// Per-step CSV for single and monte-carlo modes.
fn write_step_csv(path: &Path, records: &[StepRecord]) -> Result<(), CliError> {
    let mut text = String::from("t,err_rad,nees,iterations,delta_norm_final,trace_P\n");
    for record in records {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            csv_float(record.t),
            csv_float(record.err_rad),
            csv_float(record.nees),
            record.iterations,
            csv_float(record.delta_norm_final),
            csv_float(record.trace_p),
        );
    }
    write_output(path, &text)
}

/// Side-by-side CSV for compare mode: the single-iteration filter's columns,
/// the iterated filter's columns, then the error improvement per step.
fn write_compare_csv(path: &Path, ekf: &[StepRecord], iekf: &[StepRecord]) -> Result<(), CliError> {
    let mut text = String::from(
        "t,err_rad_ekf,nees_ekf,iterations_ekf,delta_norm_final_ekf,trace_P_ekf,\
         err_rad_iekf,nees_iekf,iterations_iekf,delta_norm_final_iekf,trace_P_iekf,err_rad_delta\n",
    );
    for (a, b) in ekf.iter().zip(iekf) {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_float(a.t),
            csv_float(a.err_rad),
            csv_float(a.nees),
            a.iterations,
            csv_float(a.delta_norm_final),
            csv_float(a.trace_p),
            csv_float(b.err_rad),
            csv_float(b.nees),
            b.iterations,
            csv_float(b.delta_norm_final),
            csv_float(b.trace_p),
            csv_float(a.err_rad - b.err_rad),
        );
    }
    write_output(path, &text)
}

fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|err| CliError::Output(format!("cannot write {}: {err}", path.display())))
}

/// Print a summary line to stdout. When the consumer hangs up early
/// (`iekf run ... | head -1`) the write fails with a broken pipe; the CSV
/// is already on disk by then, so that is a normal way for a run to end,
/// not a panic.
fn say(line: &str) {
    if let Err(err) = writeln!(io::stdout().lock(), "{line}") {
        if err.kind() == ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        let failure = CliError::Output(format!("cannot write summary to stdout: {err}"));
        let _ = writeln!(io::stderr(), "error: {failure}");
        std::process::exit(i32::from(failure.exit_code()));
    }
}

fn runtime(err: Error) -> CliError {
    CliError::Runtime(format!("run failed: {err}"))
}

/// 17 significant digits: enough to reproduce any f64 exactly.
fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Summary lines are for humans; full precision would just be noise.
fn summary_float(x: f64) -> String {
    format!("{x:.6}")
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}
