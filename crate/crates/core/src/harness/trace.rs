//! Trace files: JSONL steps, JSON summaries and windowed statistics.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::episode::{Episode, EpisodeSummary, StepTrace};

pub fn write_steps<W: Write>(mut w: W, steps: &[StepTrace]) -> Result<()> {
    for s in steps {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a JSONL trace, skipping blank lines.
pub fn read_steps(text: &str) -> Result<Vec<StepTrace>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("trace line {}: {e}", i + 1))))
        .collect()
}

pub fn summary_to_json(summary: &EpisodeSummary) -> Result<String> {
    Ok(serde_json::to_string_pretty(summary)?)
}

/// Writes `trace.jsonl` (when `with_trace`) and `summary.json` into `dir`.
pub fn write_episode(dir: &Path, episode: &Episode, with_trace: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if with_trace {
        write_steps(
            BufWriter::new(File::create(dir.join("trace.jsonl"))?),
            &episode.steps,
        )?;
    }
    std::fs::write(
        dir.join("summary.json"),
        summary_to_json(&episode.summary)? + "\n",
    )?;
    Ok(())
}

/// Trailing moving average; entry `i` covers `values[i + 1 - w..=i]` with
/// the window truncated at the start.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= w {
            sum -= values[i - w];
        }
        out.push(sum / (i + 1).min(w) as f64);
    }
    out
}
