//! `ingest`: parse the incident CSV and emit one instance JSON plus baseline
//! estimates per (borough, window), with a summary table of sizes, edges and
//! mixture weights.

use std::path::Path;
use std::process::ExitCode;

use regime_design_core::ingest::{
    build_instance, estimate_baseline_rates, parse_incidents, reference_profile, BuildOptions,
    ConflictRule, IngestConfig,
};
use regime_design_core::Result;

use crate::manifest::RunManifest;
use crate::vlog;

use super::{ensure_out_dir, slug};

pub fn run(config_path: &Path, out: &Path) -> Result<ExitCode> {
    let config = IngestConfig::from_path(config_path)?;
    ensure_out_dir(out)?;

    let columns = config.columns();
    let summary = parse_incidents(&config.input.csv, &columns)?;
    vlog!(
        "parsed {} records ({} dropped) from {}",
        summary.records.len(),
        summary.dropped,
        config.input.csv.display()
    );

    let options = BuildOptions {
        conflict_rule: ConflictRule {
            max_separation_minutes: config.run.conflict_minutes,
        },
        unit_costs: config.run.unit_costs.clone(),
        stability_margin: config.run.stability_margin,
        drop_unmapped_call_types: config.run.drop_unmapped_call_types,
    };
    let reference = reference_profile();
    let windows = config.effective_windows()?;

    let summary_path = out.join("ingest_summary.csv");
    let mut table = csv::Writer::from_path(&summary_path)?;
    table.write_record([
        "borough",
        "window",
        "status",
        "num_demands",
        "num_edges",
        "pi",
        "mu_hat",
        "dropped_rows",
    ])?;

    for borough in &config.boroughs {
        for window in &windows {
            let stem = format!("{}_{}", slug(borough), slug(&window.name));
            match build_instance(
                &summary.records,
                borough,
                window,
                &config.regimes,
                &reference,
                &options,
            ) {
                Ok(built) => {
                    let baseline =
                        estimate_baseline_rates(&filter(&summary.records, borough), &config.regimes, window)?;
                    let instance_json = built.instance.to_json()?;
                    let instance_path = out.join(format!("instance_{stem}.json"));
                    std::fs::write(&instance_path, &instance_json)?;
                    RunManifest::new("ingest")
                        .with_instance(&instance_json)
                        .with_param("borough", borough)
                        .with_param("window", &window.name)
                        .with_param("config", config_path.display())
                        .write_sidecar(&instance_path)?;

                    let baseline_path = out.join(format!("baseline_{stem}.json"));
                    std::fs::write(&baseline_path, serde_json::to_string_pretty(&baseline)?)?;
                    RunManifest::new("ingest")
                        .with_param("borough", borough)
                        .with_param("window", &window.name)
                        .write_sidecar(&baseline_path)?;

                    let pi = built
                        .mixture_weights
                        .iter()
                        .map(|w| format!("{w:.4}"))
                        .collect::<Vec<_>>()
                        .join(" ");
                    let mu = baseline
                        .service_rate
                        .iter()
                        .map(|m| format!("{m:.4}"))
                        .collect::<Vec<_>>()
                        .join(" ");
                    table.write_record([
                        borough.as_str(),
                        window.name.as_str(),
                        "ok",
                        &built.instance.num_demands().to_string(),
                        &built.num_edges.to_string(),
                        &pi,
                        &mu,
                        &summary.dropped.to_string(),
                    ])?;
                    vlog!(
                        "{borough}/{}: |A| = {}, |E| = {}",
                        window.name,
                        built.instance.num_demands(),
                        built.num_edges
                    );
                }
                Err(error) => {
                    // warning row; the remaining targets still run
                    table.write_record([
                        borough.as_str(),
                        window.name.as_str(),
                        &format!("warning: {error}"),
                        "0",
                        "0",
                        "",
                        "",
                        &summary.dropped.to_string(),
                    ])?;
                }
            }
        }
    }
    table.flush()?;
    RunManifest::new("ingest")
        .with_param("config", config_path.display())
        .write_sidecar(&summary_path)?;
    Ok(ExitCode::SUCCESS)
}

fn filter<'a>(
    records: &'a [regime_design_core::ingest::IncidentRecord],
    borough: &str,
) -> Vec<regime_design_core::ingest::IncidentRecord> {
    records
        .iter()
        .filter(|r| r.borough.eq_ignore_ascii_case(borough))
        .cloned()
        .collect()
}
