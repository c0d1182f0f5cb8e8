//! Output files of a run.
//!
//! - `trajectory.csv`: a `# format_version=1` line, then the columns
//!   `t,cell_id,rule_id,site,delta,env_delta,born,died`, one row per
//!   reaction. `delta` lists net population changes at the reaction's
//!   site as `name:+n;name:-n`; `env_delta` does the same for the free
//!   environment (world reactions only). `born`/`died` are `;`-separated
//!   cell ids.
//! - `frames.jsonl`: one JSON object per frame with the fields
//!   `format_version, index, t, rule, cell, cells`; each cell has
//!   `id, center, radius, stage, viruses, infection, colour, nuclei`.
//! - `report.txt`: the reactions in order, readable, plus a summary.
//! - `run.json`: see [`crate::run::RunRecord`].

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use scls::engine::{Frame, Observer, Reaction, SiteKind};
use scls::term::Sequence;
use serde::Serialize;

pub const FORMAT_VERSION: u32 = 1;

pub const TRAJECTORY_COLUMNS: [&str; 8] = [
    "t", "cell_id", "rule_id", "site", "delta", "env_delta", "born", "died",
];

fn delta(d: &[(Sequence, i64)]) -> String {
    d.iter()
        .map(|(s, n)| format!("{s}:{n:+}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn ids(v: &[u64]) -> String {
    v.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

fn site(s: SiteKind) -> &'static str {
    match s {
        SiteKind::Layer => "layer",
        SiteKind::World => "world",
        SiteKind::Inner => "inner",
    }
}

#[derive(Serialize)]
struct FrameLine<'a> {
    format_version: u32,
    #[serde(flatten)]
    frame: &'a Frame,
}

/// Writes the trajectory, frames and report while the engine runs.
/// The observer callbacks cannot fail, so the first I/O error is kept and
/// returned by [`Recorder::finish`].
pub struct Recorder {
    rule_ids: Vec<String>,
    trajectory: csv::Writer<BufWriter<File>>,
    frames: Option<BufWriter<File>>,
    report: BufWriter<File>,
    error: Option<io::Error>,
    pub reactions: u64,
    pub frame_count: usize,
}

impl Recorder {
    pub fn create(dir: &Path, rule_ids: Vec<String>, frames: bool) -> io::Result<Self> {
        let mut traj = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
        writeln!(traj, "# format_version={FORMAT_VERSION}")?;
        let mut trajectory = csv::Writer::from_writer(traj);
        trajectory.write_record(TRAJECTORY_COLUMNS)?;
        let frames = if frames {
            Some(BufWriter::new(File::create(dir.join("frames.jsonl"))?))
        } else {
            None
        };
        let mut report = BufWriter::new(File::create(dir.join("report.txt"))?);
        writeln!(report, "format_version {FORMAT_VERSION}")?;
        Ok(Recorder {
            rule_ids,
            trajectory,
            frames,
            report,
            error: None,
            reactions: 0,
            frame_count: 0,
        })
    }

    fn keep(&mut self, r: io::Result<()>) {
        if let Err(e) = r {
            self.error.get_or_insert(e);
        }
    }

    fn write_reaction(&mut self, r: &Reaction) -> io::Result<()> {
        let rule = &self.rule_ids[r.rule];
        let (d, env) = (delta(&r.delta), delta(&r.env_delta));
        let (born, died) = (ids(&r.born), ids(&r.died));
        self.trajectory.write_record([
            r.t.to_string().as_str(),
            &r.cell.to_string(),
            rule,
            site(r.site),
            &d,
            &env,
            &born,
            &died,
        ])?;
        write!(self.report, "{:>14.6}  cell {:<4} {:<6} {}", r.t, r.cell, rule, d)?;
        if !env.is_empty() {
            write!(self.report, "  env {env}")?;
        }
        if !born.is_empty() {
            write!(self.report, "  born {born}")?;
        }
        if !died.is_empty() {
            write!(self.report, "  died {died}")?;
        }
        writeln!(self.report)
    }

    fn write_frame(&mut self, f: &Frame) -> io::Result<()> {
        if let Some(w) = &mut self.frames {
            serde_json::to_writer(
                &mut *w,
                &FrameLine {
                    format_version: FORMAT_VERSION,
                    frame: f,
                },
            )?;
            writeln!(w)?;
        }
        match (&f.rule, f.cell) {
            (Some(rule), Some(c)) => writeln!(
                self.report,
                "{:>14.6}  frame {}: {rule} in cell {c}, {} cells",
                f.t,
                f.index,
                f.cells.len()
            ),
            _ => writeln!(
                self.report,
                "{:>14.6}  frame {}: initial scene, {} cells",
                f.t,
                f.index,
                f.cells.len()
            ),
        }
    }

    /// Appends closing lines to the report and flushes every file.
    pub fn finish(mut self, summary: &[String]) -> io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        writeln!(self.report)?;
        for line in summary {
            writeln!(self.report, "{line}")?;
        }
        self.report.flush()?;
        self.trajectory.flush()?;
        if let Some(w) = &mut self.frames {
            w.flush()?;
        }
        Ok(())
    }
}

impl Observer for Recorder {
    fn reaction(&mut self, r: &Reaction) {
        self.reactions += 1;
        let res = self.write_reaction(r);
        self.keep(res);
    }

    fn frame(&mut self, f: &Frame) {
        self.frame_count += 1;
        let res = self.write_frame(f);
        self.keep(res);
    }
}
