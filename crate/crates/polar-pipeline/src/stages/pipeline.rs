//! Full pipeline: synth -> preprocess -> correct -> densify -> reconstruct
//! -> eval, plus a run report embedding the fully resolved configuration.

use serde::Serialize;
use std::time::Instant;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::stages::eval::EvalReport;
use crate::stages::{
    cmd_correct, cmd_densify, cmd_eval, cmd_preprocess, cmd_reconstruct, cmd_synth,
};
use crate::artifacts::write_json;

#[derive(Serialize)]
struct RunReport<'a> {
    /// Fully resolved configuration; re-running from `config_echo.toml`
    /// reproduces the artifacts bit for bit.
    config: &'a PipelineConfig,
    runtime_s: f64,
    stage_runtimes_s: StageRuntimes,
    correct: &'a super::correct::CorrectSummary,
    densify: &'a super::densify::DensifySummary,
    reconstruct: &'a super::reconstruct::ReconstructSummary,
    eval: &'a EvalReport,
}

#[derive(Serialize, Default)]
struct StageRuntimes {
    synth: f64,
    preprocess: f64,
    correct: f64,
    densify: f64,
    reconstruct: f64,
    eval: f64,
}

pub fn cmd_pipeline(cfg: &PipelineConfig, threads: usize) -> Result<EvalReport, CliError> {
    let root = cfg.output_root();
    std::fs::create_dir_all(&root)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", root.display())))?;
    let echo = toml::to_string(cfg)
        .map_err(|e| CliError::Data(format!("config serialization failed: {e}")))?;
    std::fs::write(root.join("config_echo.toml"), echo)?;

    let start = Instant::now();
    let mut times = StageRuntimes::default();
    let clock = |t0: Instant| t0.elapsed().as_secs_f64();

    let t = Instant::now();
    cmd_synth(cfg, threads)?;
    times.synth = clock(t);
    let t = Instant::now();
    cmd_preprocess(cfg, threads)?;
    times.preprocess = clock(t);
    let t = Instant::now();
    let correct = cmd_correct(cfg, threads)?;
    times.correct = clock(t);
    let t = Instant::now();
    let densify = cmd_densify(cfg, threads)?;
    times.densify = clock(t);
    let t = Instant::now();
    let reconstruct = cmd_reconstruct(cfg, threads)?;
    times.reconstruct = clock(t);
    let t = Instant::now();
    let eval = cmd_eval(cfg, threads)?;
    times.eval = clock(t);

    let report = RunReport {
        config: cfg,
        runtime_s: start.elapsed().as_secs_f64(),
        stage_runtimes_s: times,
        correct: &correct,
        densify: &densify,
        reconstruct: &reconstruct,
        eval: &eval,
    };
    write_json(&report, &root.join("run_report.json"))?;
    eprintln!(
        "pipeline: finished in {:.1} s, eval {}",
        report.runtime_s,
        if eval.pass { "PASS" } else { "FAIL" }
    );
    Ok(eval)
}
