use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use scls::engine::Engine;
use scls::model::{Geometry, Model};
use serde::Serialize;

use crate::output::{Recorder, FORMAT_VERSION};
use crate::CliError;

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Overrides the model's own seed.
    pub seed: Option<u64>,
    pub t_max: f64,
    pub frames: bool,
    /// The `--config` overrides, echoed in `run.json`.
    pub config: BTreeMap<String, f64>,
    pub model_path: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct WaitingCell {
    pub cell: u64,
    pub marker: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RuleCount {
    pub rule: String,
    pub count: u64,
}

/// Contents of `run.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub format_version: u32,
    pub model: String,
    pub model_path: String,
    pub seed: u64,
    pub t_max: f64,
    pub config: BTreeMap<String, f64>,
    pub params: BTreeMap<String, f64>,
    pub geometry: Geometry,
    pub termination: String,
    pub error: Option<String>,
    pub t_end: f64,
    pub reactions: u64,
    pub frames: usize,
    pub blocked_events: u64,
    pub cells: usize,
    /// Cells whose stage marker is shown but whose checkpoint never passed.
    pub waiting: Vec<WaitingCell>,
    /// Firings per rule, in model order.
    pub fired: Vec<RuleCount>,
}

impl RunRecord {
    pub fn summary(&self) -> String {
        let end = match &self.error {
            Some(e) => format!("failed ({e})"),
            None => self.termination.clone(),
        };
        format!(
            "seed {}: {end} at t={:.3} after {} reactions, {} cells, {} frames",
            self.seed, self.t_end, self.reactions, self.cells, self.frames
        )
    }
}

fn report_lines(rec: &RunRecord, engine: &Engine) -> Vec<String> {
    let mut out = vec![
        format!("termination: {}", rec.termination),
        format!("t_end: {}", rec.t_end),
        format!("reactions: {}", rec.reactions),
        format!("blocked events: {}", rec.blocked_events),
        format!("cells: {}", rec.cells),
    ];
    if let Some(e) = &rec.error {
        out.push(format!("error: {e}"));
    }
    for c in engine.cells() {
        let v = engine.view(c);
        let stage = v.stage.map_or_else(|| "-".to_string(), |s| s.to_string());
        out.push(format!(
            "  cell {} stage {} born {:.3} parent {} viruses {} ({})",
            c.id,
            stage,
            c.born,
            c.parent.map_or_else(|| "-".to_string(), |p| p.to_string()),
            v.viruses,
            v.colour
        ));
    }
    for w in &rec.waiting {
        out.push(format!("waiting: cell {} holds {} but its checkpoint is not met", w.cell, w.marker));
    }
    out.push("fired:".into());
    for f in &rec.fired {
        out.push(format!("  {} {}", f.rule, f.count));
    }
    out
}

/// Runs one simulation and writes its four files into `out`.
pub fn run(model: &Model, opts: &RunOptions, out: &Path) -> Result<RunRecord, CliError> {
    let io = |e: std::io::Error| CliError::Config(format!("{}: {e}", out.display()));
    fs::create_dir_all(out).map_err(io)?;
    let seed = opts.seed.unwrap_or(model.seed);
    let mut engine = Engine::new(model, seed)?;
    let ids = model.rules.iter().map(|r| r.id.clone()).collect();
    let mut rec = Recorder::create(out, ids, opts.frames).map_err(io)?;
    let result = engine.run(opts.t_max, &mut rec);
    let (termination, error) = match &result {
        Ok(t) => (t.name().to_string(), None),
        Err(e) => ("error".to_string(), Some(e.to_string())),
    };
    let record = RunRecord {
        format_version: FORMAT_VERSION,
        model: model.name.clone(),
        model_path: opts.model_path.clone(),
        seed,
        t_max: opts.t_max,
        config: opts.config.clone(),
        params: model.params.clone(),
        geometry: model.geometry.clone(),
        termination,
        error,
        t_end: engine.t(),
        reactions: rec.reactions,
        frames: rec.frame_count,
        blocked_events: engine.blocked_events(),
        cells: engine.cells().count(),
        waiting: engine
            .waiting_cells()
            .into_iter()
            .map(|(cell, s)| WaitingCell {
                cell,
                marker: s.to_string(),
            })
            .collect(),
        fired: model
            .rules
            .iter()
            .zip(engine.fired())
            .map(|(r, n)| RuleCount {
                rule: r.id.clone(),
                count: *n,
            })
            .collect(),
    };
    rec.finish(&report_lines(&record, &engine)).map_err(io)?;
    let json = serde_json::to_string_pretty(&record).expect("run record serializes");
    fs::write(out.join("run.json"), json + "\n").map_err(io)?;
    result?;
    Ok(record)
}

/// Directory of one replicate.
pub fn replicate_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

/// Runs seeds `seed, seed + 1, ...` concurrently, each into its own
/// subdirectory. `threads = 0` lets rayon decide.
pub fn run_replicates(
    model: &Model,
    opts: &RunOptions,
    n: usize,
    threads: usize,
    out: &Path,
) -> Result<Vec<RunRecord>, CliError> {
    let base = opts.seed.unwrap_or(model.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| {
        (0..n as u64)
            .into_par_iter()
            .map(|k| {
                let seed = base.wrapping_add(k);
                let opts = RunOptions {
                    seed: Some(seed),
                    ..opts.clone()
                };
                run(model, &opts, &replicate_dir(out, seed))
            })
            .collect()
    })
}
