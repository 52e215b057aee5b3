use std::fs::File;
use std::io::{BufWriter, Write};

use log::warn;
use novelsum_core::simulation::{simulate_study, summarize, write_study_csv, SimulationSpec, StudyReport, StudySummary};
use serde::Serialize;

use super::write_json;
use crate::args::SimulateArgs;
use crate::config::ConfigFile;
use crate::error::CliError;

#[derive(Debug, Serialize)]
struct SummaryOutput<'a> {
    spec: &'a SimulationSpec,
    #[serde(flatten)]
    summary: StudySummary,
    reports: &'a [StudyReport],
}

pub fn run(args: &SimulateArgs, cfg: &ConfigFile) -> Result<(), CliError> {
    if args.out.is_none() && args.summary.is_none() {
        return Err(CliError::input("simulate needs --out and/or --summary"));
    }
    let spec = match &args.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::input(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)?
        }
        None => SimulationSpec::default(),
    };
    spec.validate()?;
    let seeds = match args.seeds {
        Some(range) => range.seeds(),
        None => vec![cfg.resolve_or(args.seed, "seed", 0)?],
    };

    let mut reports = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let (scenario, report) = simulate_study(seed, &spec)?;
        if !report.claims.all() {
            warn!(
                "seed {seed}: claims {:?} failed; scenario {}",
                report.claims,
                serde_json::to_string(&scenario)?
            );
        }
        reports.push(report);
    }

    if let Some(path) = &args.out {
        let file = File::create(path).map_err(|e| CliError::input(format!("cannot create {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        write_study_csv(&reports, args.seeds.is_some(), &mut w)?;
        w.flush()?;
        println!("{}", path.display());
    }
    if let Some(path) = &args.summary {
        let out = SummaryOutput {
            spec: &spec,
            summary: summarize(&reports),
            reports: &reports,
        };
        write_json(path, &out)?;
        println!("{}", path.display());
    }
    Ok(())
}
