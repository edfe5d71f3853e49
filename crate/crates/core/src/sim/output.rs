//! CSV emission. All files are UTF-8 with LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::Scenario;
use super::metrics::{poor_match_histogram, Aggregate};
use super::run::RunSeries;
use crate::error::Result;

pub fn series_csv(s: &RunSeries) -> String {
    let mut out = String::from("step,user,match_percent,generations\n");
    for r in &s.records {
        let _ = writeln!(out, "{},{},{},{}", r.step, r.user, r.match_percent, r.generations);
    }
    out
}

pub fn events_csv(s: &RunSeries) -> String {
    let mut out = String::from("step,agent,source,dest,kind\n");
    for e in &s.events {
        let _ = writeln!(out, "{},{},{},{},{}", e.step, e.agent, e.source, e.dest, e.kind.as_str());
    }
    out
}

/// Poor-match counts per bucket, summed over runs.
pub fn histogram_csv(runs: &[RunSeries]) -> String {
    let mut totals: Vec<(usize, usize)> = Vec::new();
    for s in runs {
        for (i, (start, n)) in poor_match_histogram(&s.match_percents()).into_iter().enumerate() {
            if i == totals.len() {
                totals.push((start, 0));
            }
            totals[i].1 += n;
        }
    }
    let mut out = String::from("bucket_start,poor_count\n");
    for (start, n) in totals {
        let _ = writeln!(out, "{start},{n}");
    }
    out
}

pub fn summary_csv(rows: &[(Scenario, Aggregate)]) -> String {
    let mut out = String::from("scenario,mean_final_rate,std_dev,runs\n");
    for (s, a) in rows {
        let _ = writeln!(out, "{},{},{},{}", s.name(), a.mean_final_rate, a.std_dev, a.runs);
    }
    out
}

/// Writes series, event logs and final topologies of every run plus the
/// scenario histogram.
pub fn write_scenario(dir: &Path, scenario: Scenario, runs: &[RunSeries]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let name = scenario.name();
    for s in runs {
        fs::write(dir.join(format!("series_{name}_{}.csv", s.run)), series_csv(s))?;
        fs::write(dir.join(format!("events_{name}_{}.csv", s.run)), events_csv(s))?;
        fs::write(dir.join(format!("topology_{name}_{}.csv", s.run)), &s.topology)?;
    }
    fs::write(dir.join(format!("histogram_{name}.csv")), histogram_csv(runs))?;
    Ok(())
}

pub fn write_summary(dir: &Path, rows: &[(Scenario, Aggregate)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.csv"), summary_csv(rows))?;
    Ok(())
}
