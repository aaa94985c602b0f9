//! Cartesian parameter sweeps; cells run concurrently, rows come back in enumeration
//! order (last axis varies fastest).

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use toml::Value;

use super::{emit_outputs, execute_scenario, RunnerError, ScenarioConfig};
use crate::dynamics::Theta;
use crate::numfmt::f17;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: usize,
    pub values: Vec<Value>,
    /// `ok`, `checks_failed`, or `error: ...`.
    pub status: String,
    pub regime: Option<String>,
    pub g_front: Option<f64>,
    pub h_front: Option<f64>,
    pub front_rate: Option<f64>,
    pub mass_u: Option<f64>,
    pub theta: Option<String>,
    /// Smallest theorem-check margin (verify runs only).
    pub min_margin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub axes: Vec<String>,
    pub seed: Option<u64>,
    pub rows: Vec<SweepRow>,
}

fn csv_value(v: &Value) -> String {
    match v {
        Value::Float(x) => f17(*x),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        other => {
            let text = other.to_string();
            if text.contains(',') {
                format!("\"{}\"", text.replace('"', "\"\""))
            } else {
                text
            }
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(f17).unwrap_or_default()
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell");
        for axis in &self.axes {
            out.push(',');
            out.push_str(axis);
        }
        out.push_str(",status,regime,g_front,h_front,front_rate,mass_u,theta,min_margin\n");
        for row in &self.rows {
            let _ = write!(out, "{}", row.cell);
            for v in &row.values {
                let _ = write!(out, ",{}", csv_value(v));
            }
            let status = csv_value(&Value::String(row.status.clone()));
            let _ = writeln!(
                out,
                ",{status},{},{},{},{},{},{},{}",
                row.regime.as_deref().unwrap_or(""),
                opt(row.g_front),
                opt(row.h_front),
                opt(row.front_rate),
                opt(row.mass_u),
                row.theta.as_deref().unwrap_or(""),
                opt(row.min_margin),
            );
        }
        out
    }
}

/// Index tuples of the Cartesian product, last axis fastest.
fn enumerate(sizes: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = sizes.iter().product();
    (0..total)
        .map(|mut flat| {
            let mut idx = vec![0; sizes.len()];
            for (slot, &n) in idx.iter_mut().zip(sizes).rev() {
                *slot = flat % n;
                flat /= n;
            }
            idx
        })
        .collect()
}

pub fn sweep(base: &ScenarioConfig, jobs: usize) -> Result<SweepTable, RunnerError> {
    let axes = &base.sweep.axes;
    for (i, axis) in axes.iter().enumerate() {
        let Some(first) = axis.values.first() else {
            return Err(RunnerError::ConfigInvalid { path: format!("sweep.axes[{i}].values"), reason: "empty axis".into() });
        };
        base.with_values(&[(axis.path.clone(), first.clone())])?;
    }
    let sizes: Vec<usize> = axes.iter().map(|a| a.values.len()).collect();
    let cells = sizes.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).unwrap_or(usize::MAX);
    if cells > base.sweep.max_cells {
        return Err(RunnerError::GridTooLarge { cells, cap: base.sweep.max_cells });
    }
    let grid = enumerate(&sizes);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| RunnerError::ConfigInvalid { path: "--jobs".into(), reason: e.to_string() })?;
    let rows = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(cell, idx)| {
                let assignments: Vec<(String, Value)> =
                    axes.iter().zip(idx).map(|(a, &k)| (a.path.clone(), a.values[k].clone())).collect();
                run_cell(base, cell, assignments)
            })
            .collect::<Vec<_>>()
    });
    Ok(SweepTable { axes: axes.iter().map(|a| a.path.clone()).collect(), seed: base.sweep.seed, rows })
}

fn run_cell(base: &ScenarioConfig, cell: usize, assignments: Vec<(String, Value)>) -> SweepRow {
    let values = assignments.iter().map(|(_, v)| v.clone()).collect();
    let mut row = SweepRow {
        cell,
        values,
        status: String::new(),
        regime: None,
        g_front: None,
        h_front: None,
        front_rate: None,
        mass_u: None,
        theta: None,
        min_margin: None,
    };
    let result = base.with_values(&assignments).and_then(|mut cfg| {
        cfg.sweep.axes.clear();
        let outcome = execute_scenario(&cfg)?;
        if base.sweep.write_cells {
            emit_outputs(&cfg, &outcome, &base.output.dir.join("cells").join(format!("cell_{cell:04}")))?;
        }
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            let r = &outcome.report;
            row.status = if outcome.checks_pass() { "ok".into() } else { "checks_failed".into() };
            row.regime = Some(r.regime.clone());
            row.g_front = Some(r.fronts.final_g);
            row.h_front = Some(r.fronts.final_h);
            row.front_rate = Some(r.fronts.trailing_front_rate);
            row.mass_u = Some(r.fronts.final_mass_u);
            row.theta = Some(match r.theta.verdict_roots {
                Theta::Theta1 => "theta1".into(),
                Theta::Theta2 => "theta2".into(),
            });
            row.min_margin = r.theorem_checks.iter().map(|c| c.margin).reduce(f64::min);
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}
