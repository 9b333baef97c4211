//! Batch runner for the harnack-lab identity checks.
//!
//! A [`config::RunConfig`] names a solution and a list of suites; [`run`]
//! evaluates them at seeded sample points and returns a [`report::Report`]
//! whose content depends only on the configuration.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anchors;
pub mod config;
pub mod error;
pub mod report;
pub mod suites;

use std::time::Instant;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{CheckRecord, Report, SuiteReport};

/// Environment variable overriding the worker count.
pub const THREADS_VAR: &str = "HARNACK_LAB_THREADS";

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            CliError::config(THREADS_VAR, format!("'{v}' is not a positive integer"))
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::config(THREADS_VAR, e.to_string()))
}

/// Runs every requested suite. Suites run in parallel over sample points;
/// results are merged in configuration order.
pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let start = Instant::now();
    let (solution, suites) = cfg.validate()?;
    let pool = thread_pool()?;
    let outcomes = pool.install(|| {
        suites
            .iter()
            .map(|name| suites::run_suite(cfg, &solution, name))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let table = anchors::table();
    let mut reports = Vec::new();
    let mut sweeps = Vec::new();
    for (name, outcome) in suites.iter().zip(outcomes) {
        let mut checks = Vec::new();
        for m in outcome.checks {
            let id = format!("{name}.{}", m.check);
            let entry = table.get(&id).ok_or_else(|| {
                CliError::config("anchors", format!("no anchor for check '{id}'"))
            })?;
            let tolerance = cfg.tolerance(&id, entry.tolerance);
            checks.push(CheckRecord {
                pass: m.residual <= tolerance,
                id,
                anchor: entry.anchor.clone(),
                residual: m.residual,
                tolerance,
                point: m.point,
            });
        }
        reports.push(SuiteReport {
            name: (*name).into(),
            pass: checks.iter().all(|c| c.pass),
            checks,
            notes: outcome.notes,
        });
        sweeps.extend(outcome.sweeps);
    }

    let mut echo = cfg.clone();
    echo.suites = suites.iter().map(|s| s.to_string()).collect();
    Ok(Report {
        config: echo,
        pass: reports.iter().all(|s| s.pass),
        suites: reports,
        elapsed_ms: if cfg.timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        },
        sweeps,
    })
}
