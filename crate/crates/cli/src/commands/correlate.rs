use novelsum_core::analysis::{correlate_metrics, rank_by_average, zscore_aggregate_many};
use novelsum_core::io::load_score_table;

use crate::args::CorrelateArgs;
use crate::error::CliError;

pub const CSV_HEADER: [&str; 6] = ["metric", "pearson", "spearman", "average", "n_points", "excluded_rows"];

pub fn run(args: &CorrelateArgs) -> Result<(), CliError> {
    let mut table = load_score_table(&args.table)?;
    if let Some(columns) = &args.aggregate {
        let values: Vec<Vec<f64>> = columns
            .iter()
            .map(|c| {
                table
                    .metric_column(c)
                    .ok_or_else(|| CliError::input(format!("no column {c:?} to aggregate")))
            })
            .collect::<Result<_, _>>()?;
        let refs: Vec<&[f64]> = values.iter().map(Vec::as_slice).collect();
        let performance = zscore_aggregate_many(&refs)?;
        let consumed: Vec<&str> = columns.iter().map(String::as_str).collect();
        table = table.with_performance(performance, &consumed)?;
    }
    let reports = rank_by_average(correlate_metrics(&table)?);

    let mut w = csv::Writer::from_path(&args.out)?;
    w.write_record(CSV_HEADER)?;
    for r in &reports {
        w.write_record([
            r.metric_name.clone(),
            r.pearson.to_string(),
            r.spearman.to_string(),
            r.average.to_string(),
            r.n_points.to_string(),
            r.excluded_rows.join(";"),
        ])?;
    }
    w.flush()?;
    println!("{}", args.out.display());
    Ok(())
}
