use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{
    agnostic_degradation, solve_instance_from, Instance, SolveSettings,
};
use super::{ExperimentConfig, ExperimentError, Formulation, SweepAxis};
use crate::schedule::Schedule;

/// One point of a sweep. Failed points keep their axis value and carry the
/// error text; their numeric fields are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub objective: f64,
    /// Objective over the nominal link rate.
    pub relative: f64,
    pub best_bound: f64,
    pub gap: f64,
    /// Exact max-min service of the extracted schedule.
    pub max_min: f64,
    /// Loss of the interference-agnostic schedule (SNR sweeps only).
    pub degradation: Option<f64>,
    pub runtime: f64,
    pub status: String,
    pub error: Option<String>,
}

fn uplink_variant(f: Formulation) -> Formulation {
    match f {
        Formulation::CombDl | Formulation::CombUldl => Formulation::CombUldl,
        Formulation::ScalDl | Formulation::ScalUldl => Formulation::ScalUldl,
    }
}

fn run_point(
    inst: &Instance,
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    value: f64,
    hints: &[Schedule],
) -> Result<(SweepRow, Schedule), ExperimentError> {
    let clock = Instant::now();
    let mut s = SolveSettings::from_config(cfg);
    let (outcome, degradation) = match axis {
        SweepAxis::Truncation => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(ExperimentError::Config(format!(
                    "slot count {value} is not a positive integer"
                )));
            }
            s.slots = value as usize;
            (
                solve_instance_from(&inst.net, &inst.matrix, &s, hints)?,
                None,
            )
        }
        SweepAxis::Snr => {
            let params = crate::propagation::PropagationParams {
                snr_db: value,
                ..cfg.propagation.clone()
            };
            let point = inst.with_propagation(&params, cfg.seed, cfg.model.perturb)?;
            let study = agnostic_degradation(&point.net, &point.matrix, &s)?;
            (study.aware, Some(study.degradation))
        }
        SweepAxis::Uplink => {
            s.formulation = uplink_variant(s.formulation);
            s.beta = value;
            (solve_instance_from(&inst.net, &inst.matrix, &s, hints)?, None)
        }
    };
    let row = SweepRow {
        axis,
        value,
        objective: outcome.objective,
        relative: outcome.relative(),
        best_bound: outcome.best_bound,
        gap: outcome.gap,
        max_min: outcome.report.max_min,
        degradation,
        runtime: clock.elapsed().as_secs_f64(),
        status: format!("{:?}", outcome.status),
        error: None,
    };
    Ok((row, outcome.schedule))
}

fn failed_row(axis: SweepAxis, value: f64, e: ExperimentError) -> SweepRow {
    log::warn!("{} = {value}: {e}", axis.name());
    SweepRow {
        axis,
        value,
        objective: f64::NAN,
        relative: f64::NAN,
        best_bound: f64::NAN,
        gap: f64::NAN,
        max_min: f64::NAN,
        degradation: None,
        runtime: f64::NAN,
        status: "Failed".into(),
        error: Some(e.to_string()),
    }
}

/// Solve every point of the sweep and return the rows sorted by axis value.
/// Truncation and uplink points run in increasing order, each offered the
/// schedules of the earlier points as start points; every such schedule is
/// feasible for the later models, so with more slots the objective cannot
/// drop. SNR points change the channel and run in parallel on the current
/// rayon pool.
pub fn run_sweep(
    inst: &Instance,
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Vec<SweepRow> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if axis != SweepAxis::Snr {
        let mut hints = Vec::new();
        let mut rows = Vec::with_capacity(sorted.len());
        for value in sorted {
            match run_point(inst, cfg, axis, value, &hints) {
                Ok((row, schedule)) => {
                    rows.push(row);
                    hints.push(schedule);
                }
                Err(e) => rows.push(failed_row(axis, value, e)),
            }
        }
        return rows;
    }
    sorted
        .par_iter()
        .map(|&value| match run_point(inst, cfg, axis, value, &[]) {
            Ok((row, _)) => row,
            Err(e) => failed_row(axis, value, e),
        })
        .collect()
}

/// Columns: `axis,value,objective,relative,bound,gap,max_min,degradation,runtime_s,status,error`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| ExperimentError::Io(std::io::Error::other(e));
    w.write_record([
        "axis",
        "value",
        "objective",
        "relative",
        "bound",
        "gap",
        "max_min",
        "degradation",
        "runtime_s",
        "status",
        "error",
    ])
    .map_err(io)?;
    for r in rows {
        let f = |v: f64| format!("{v:.9}");
        w.write_record([
            r.axis.name().to_string(),
            format!("{}", r.value),
            f(r.objective),
            f(r.relative),
            f(r.best_bound),
            f(r.gap),
            f(r.max_min),
            r.degradation.map(f).unwrap_or_default(),
            format!("{:.3}", r.runtime),
            r.status.clone(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
