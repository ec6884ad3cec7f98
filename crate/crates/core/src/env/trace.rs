use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Action, GoalMap, StepResult, WorldState};
use crate::error::{Error, Result};

/// One simulator step as written to a JSON-lines trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub episode: usize,
    /// Step counter after the transition (1-based).
    pub step: usize,
    pub sensor_deltas: Vec<f64>,
    pub target_positions: Vec<[f64; 2]>,
    pub actions: Vec<Action>,
    pub goal_map: Option<Vec<Vec<u8>>>,
    pub team_reward: f64,
    pub per_sensor_cost: Vec<f64>,
    pub covered: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    pub records: Vec<TraceRecord>,
}

impl EpisodeTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        episode: usize,
        state: &WorldState,
        actions: &[Action],
        goal: Option<&GoalMap>,
        result: &StepResult,
    ) {
        self.records.push(TraceRecord {
            episode,
            step: state.t,
            sensor_deltas: state.sensors.iter().map(|s| s.delta()).collect(),
            target_positions: state.targets.iter().map(|t| [t.x, t.y]).collect(),
            actions: actions.to_vec(),
            goal_map: goal.map(GoalMap::to_rows),
            team_reward: result.team_reward,
            per_sensor_cost: result.per_sensor_cost.clone(),
            covered: result.covered.clone(),
            manifest: None,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W, manifest: Option<&str>) -> Result<()> {
        for rec in &self.records {
            let mut rec = rec.clone();
            rec.manifest = manifest.map(str::to_owned);
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Reads a JSON-lines trace, grouping consecutive records by episode.
pub fn read_trace_jsonl<R: BufRead>(input: R) -> Result<Vec<EpisodeTrace>> {
    let mut episodes: Vec<EpisodeTrace> = Vec::new();
    let mut current: Option<usize> = None;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(&line)?;
        if current != Some(rec.episode) {
            current = Some(rec.episode);
            episodes.push(EpisodeTrace::new());
        }
        episodes.last_mut().expect("pushed above").records.push(rec);
    }
    Ok(episodes)
}

/// Coverage rate and average gain of one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    /// Mean per-step fraction of covered targets.
    pub coverage_rate: f64,
    /// Mean rotation cost per sensor and step.
    pub mean_cost: f64,
    /// `coverage_rate / mean_cost`; `f64::INFINITY` when no sensor ever rotated.
    pub average_gain: f64,
}

pub fn metrics(trace: &EpisodeTrace) -> Result<EpisodeMetrics> {
    if trace.is_empty() {
        return Err(Error::invalid("metrics of an empty trace"));
    }
    let steps = trace.len() as f64;
    let coverage_rate = trace
        .records
        .iter()
        .map(|r| r.covered.iter().filter(|&&c| c).count() as f64 / r.covered.len() as f64)
        .sum::<f64>()
        / steps;
    let n = trace.records[0].per_sensor_cost.len() as f64;
    let total_cost: f64 = trace
        .records
        .iter()
        .flat_map(|r| r.per_sensor_cost.iter())
        .sum();
    let mean_cost = total_cost / (steps * n);
    let average_gain = if mean_cost == 0.0 {
        f64::INFINITY
    } else {
        coverage_rate / mean_cost
    };
    Ok(EpisodeMetrics {
        coverage_rate,
        mean_cost,
        average_gain,
    })
}
