//! Instance construction from EMS-style incident logs: window and borough
//! filtering, regime rate and mixture estimation, threshold scaling,
//! conflict-graph construction, baseline service-rate estimation and
//! CVaR-threshold resolution.

pub mod config;

pub use config::{default_profiles, default_windows, IngestConfig};

use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Demand, Instance, Regime};
use crate::perf::cvar_of_values;

/// One incident row after parsing and field validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub incident_id: String,
    pub occurred_at: NaiveDateTime,
    pub borough: String,
    pub call_type: String,
    pub dispatch_area: String,
    pub assigned_at: NaiveDateTime,
    pub closed_at: NaiveDateTime,
    pub travel_minutes: f64,
}

impl IncidentRecord {
    /// Sojourn in minutes: assignment to close.
    pub fn sojourn_minutes(&self) -> f64 {
        (self.closed_at - self.assigned_at).num_seconds() as f64 / 60.0
    }

    /// Completion in minutes: occurrence to close.
    pub fn completion_minutes(&self) -> f64 {
        (self.closed_at - self.occurred_at).num_seconds() as f64 / 60.0
    }
}

/// Service-level profile: coverage, tolerance, tail scaling, threshold
/// scaling and congestion weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub beta: f64,
    pub alpha: f64,
    pub psi: f64,
    pub phi: f64,
    pub kappa: f64,
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::invalid("profile", format!("{}: beta {}", self.name, self.beta)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("profile", format!("{}: alpha {}", self.name, self.alpha)));
        }
        if !(self.psi > 0.0) {
            return Err(Error::invalid("profile", format!("{}: psi {}", self.name, self.psi)));
        }
        if !(self.phi > 0.0) {
            return Err(Error::invalid("profile", format!("{}: phi {}", self.name, self.phi)));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::invalid("profile", format!("{}: kappa {}", self.name, self.kappa)));
        }
        Ok(())
    }
}

/// A named half-open observation window [start, end).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioWindow {
    pub name: String,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl ScenarioWindow {
    pub fn new(name: impl Into<String>, start: NaiveDateTime, end: NaiveDateTime) -> Result<Self> {
        if end <= start {
            return Err(Error::invalid("window", "end must be after start"));
        }
        Ok(ScenarioWindow {
            name: name.into(),
            start,
            end,
        })
    }

    pub fn contains(&self, t: NaiveDateTime) -> bool {
        self.start <= t && t < self.end
    }

    pub fn minutes(&self) -> f64 {
        (self.end - self.start).num_seconds() as f64 / 60.0
    }
}

/// CSV header names for the eight record fields, plus the divisor that
/// turns the travel column's unit into minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub incident_id: String,
    pub occurred_at: String,
    pub borough: String,
    pub call_type: String,
    pub dispatch_area: String,
    pub assigned_at: String,
    pub closed_at: String,
    pub travel: String,
    /// travel column unit divisor into minutes (60 for seconds).
    pub travel_divisor: f64,
    /// Chrono format strings tried in order for every timestamp cell.
    pub timestamp_formats: Vec<String>,
}

impl Default for ColumnMap {
    /// Defaults target the NYC EMS incident-dispatch open-data schema.
    fn default() -> Self {
        ColumnMap {
            incident_id: "CAD_INCIDENT_ID".to_string(),
            occurred_at: "INCIDENT_DATETIME".to_string(),
            borough: "BOROUGH".to_string(),
            call_type: "INITIAL_CALL_TYPE".to_string(),
            dispatch_area: "INCIDENT_DISPATCH_AREA".to_string(),
            assigned_at: "FIRST_ASSIGNMENT_DATETIME".to_string(),
            closed_at: "INCIDENT_CLOSE_DATETIME".to_string(),
            travel: "INCIDENT_TRAVEL_TM_SECONDS_QY".to_string(),
            travel_divisor: 60.0,
            timestamp_formats: vec![
                "%Y-%m-%dT%H:%M:%S".to_string(),
                "%Y-%m-%d %H:%M:%S".to_string(),
                "%Y-%m-%d %H:%M".to_string(),
                "%m/%d/%Y %I:%M:%S %p".to_string(),
            ],
        }
    }
}

fn parse_timestamp(cell: &str, formats: &[String]) -> Option<NaiveDateTime> {
    formats
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(cell.trim(), f).ok())
}

/// Parse outcome: valid records plus the dropped-row ledger.
#[derive(Debug, Clone, Default)]
pub struct ParseSummary {
    pub records: Vec<IncidentRecord>,
    pub dropped: usize,
    /// Row numbers (1-based data rows) with the reason each was dropped.
    pub drop_log: Vec<(usize, String)>,
}

/// Reads incident rows, dropping and counting rows with unparseable fields
/// or negative durations. A header missing any mapped column is an error.
pub fn parse_incidents(path: &std::path::Path, columns: &ColumnMap) -> Result<ParseSummary> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::ingest(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::ingest(format!("reading header: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::ingest(format!("missing column '{name}'")))
    };
    let c_id = col(&columns.incident_id)?;
    let c_occurred = col(&columns.occurred_at)?;
    let c_borough = col(&columns.borough)?;
    let c_call = col(&columns.call_type)?;
    let c_area = col(&columns.dispatch_area)?;
    let c_assigned = col(&columns.assigned_at)?;
    let c_closed = col(&columns.closed_at)?;
    let c_travel = col(&columns.travel)?;

    let mut summary = ParseSummary::default();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let drop = |summary: &mut ParseSummary, reason: String| {
            summary.dropped += 1;
            summary.drop_log.push((row_no, reason));
        };
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                drop(&mut summary, format!("malformed row: {e}"));
                continue;
            }
        };
        let cell = |idx: usize| row.get(idx).unwrap_or("").trim().to_string();

        let occurred = match parse_timestamp(&cell(c_occurred), &columns.timestamp_formats) {
            Some(t) => t,
            None => {
                drop(&mut summary, format!("malformed timestamp '{}'", cell(c_occurred)));
                continue;
            }
        };
        let assigned = match parse_timestamp(&cell(c_assigned), &columns.timestamp_formats) {
            Some(t) => t,
            None => {
                drop(&mut summary, format!("malformed timestamp '{}'", cell(c_assigned)));
                continue;
            }
        };
        let closed = match parse_timestamp(&cell(c_closed), &columns.timestamp_formats) {
            Some(t) => t,
            None => {
                drop(&mut summary, format!("malformed timestamp '{}'", cell(c_closed)));
                continue;
            }
        };
        if closed < assigned || assigned < occurred {
            drop(&mut summary, "out-of-order timestamps".to_string());
            continue;
        }
        let travel_raw: f64 = match cell(c_travel).parse() {
            Ok(v) => v,
            Err(_) => {
                drop(&mut summary, format!("malformed travel '{}'", cell(c_travel)));
                continue;
            }
        };
        let travel_minutes = travel_raw / columns.travel_divisor;
        if !(travel_minutes >= 0.0) || !travel_minutes.is_finite() {
            drop(&mut summary, format!("negative or non-finite travel {travel_minutes}"));
            continue;
        }
        summary.records.push(IncidentRecord {
            incident_id: cell(c_id),
            occurred_at: occurred,
            borough: cell(c_borough),
            call_type: cell(c_call),
            dispatch_area: cell(c_area),
            assigned_at: assigned,
            closed_at: closed,
            travel_minutes,
        });
    }
    Ok(summary)
}

/// Conflict-graph rule: same dispatch area, occurrence times within the
/// separation bound (inclusive).
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictRule {
    pub max_separation_minutes: f64,
}

impl Default for ConflictRule {
    fn default() -> Self {
        ConflictRule {
            max_separation_minutes: 1.0,
        }
    }
}

/// Everything needed to turn retained records into an instance.
#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub conflict_rule: ConflictRule,
    /// Per-regime unit costs; 1.0 each when absent.
    pub unit_costs: Option<Vec<f64>>,
    pub stability_margin: f64,
    /// Skip records whose call type has no regime mapping instead of
    /// erroring.
    pub drop_unmapped_call_types: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            conflict_rule: ConflictRule::default(),
            unit_costs: None,
            stability_margin: 1e-4,
            drop_unmapped_call_types: false,
        }
    }
}

/// A built instance plus the summary columns of the size tables.
#[derive(Debug, Clone)]
pub struct BuiltInstance {
    pub instance: Instance,
    /// Incident count per regime within the selection.
    pub regime_counts: Vec<usize>,
    pub mixture_weights: Vec<f64>,
    pub num_edges: usize,
    /// Incidents dropped because the scaled threshold fell below the travel
    /// time (would violate t* >= t_a).
    pub dropped_demands: usize,
}

/// Filters records to (borough, window), maps call types to regimes,
/// estimates arrival rates and mixture weights from counts, scales
/// thresholds by phi and wires the one-minute/same-area conflict graph.
pub fn build_instance(
    records: &[IncidentRecord],
    borough: &str,
    window: &ScenarioWindow,
    regime_map: &BTreeMap<String, usize>,
    profile: &Profile,
    options: &BuildOptions,
) -> Result<BuiltInstance> {
    profile.validate()?;
    let num_regimes = regime_map.values().copied().max().map_or(0, |m| m + 1);
    if num_regimes == 0 {
        return Err(Error::ingest("empty regime map"));
    }

    let mut selected: Vec<&IncidentRecord> = Vec::new();
    for record in records {
        if !record.borough.eq_ignore_ascii_case(borough) || !window.contains(record.occurred_at) {
            continue;
        }
        if !regime_map.contains_key(&record.call_type) {
            if options.drop_unmapped_call_types {
                continue;
            }
            return Err(Error::ingest(format!(
                "unmapped call type '{}' (incident {})",
                record.call_type, record.incident_id
            )));
        }
        selected.push(record);
    }
    if selected.is_empty() {
        return Err(Error::ingest(format!(
            "empty selection for borough '{borough}' in window '{}'",
            window.name
        )));
    }

    // Threshold-filter first so counts, rates and weights all describe the
    // demands that actually enter the instance.
    let mut demands = Vec::with_capacity(selected.len());
    let mut kept: Vec<&IncidentRecord> = Vec::with_capacity(selected.len());
    let mut dropped_demands = 0usize;
    for record in &selected {
        let threshold = profile.phi * record.completion_minutes();
        if threshold < record.travel_minutes {
            dropped_demands += 1;
            continue;
        }
        demands.push(Demand::new(
            record.incident_id.clone(),
            record.travel_minutes,
            threshold,
            profile.alpha,
            1.0,
        )?);
        kept.push(record);
    }
    if demands.is_empty() {
        return Err(Error::ingest(format!(
            "no demands left for '{borough}'/'{}' after threshold filtering",
            window.name
        )));
    }

    let mut regime_counts = vec![0usize; num_regimes];
    for record in &kept {
        regime_counts[regime_map[&record.call_type]] += 1;
    }
    let total = kept.len() as f64;
    let window_minutes = window.minutes();
    let mixture_weights: Vec<f64> = regime_counts.iter().map(|&c| c as f64 / total).collect();
    let costs = match &options.unit_costs {
        Some(c) => {
            if c.len() != num_regimes {
                return Err(Error::DimensionMismatch {
                    what: "unit costs",
                    expected: num_regimes,
                    got: c.len(),
                });
            }
            c.clone()
        }
        None => vec![1.0; num_regimes],
    };
    let regimes: Vec<Regime> = (0..num_regimes)
        .map(|r| {
            Regime::new(
                r,
                regime_counts[r] as f64 / window_minutes,
                mixture_weights[r],
                costs[r],
            )
        })
        .collect::<Result<_>>()?;

    // conflict edges: same dispatch area, occurrence within the bound
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut by_area: BTreeMap<&str, Vec<&IncidentRecord>> = BTreeMap::new();
    for record in &kept {
        by_area.entry(record.dispatch_area.as_str()).or_default().push(record);
    }
    let max_sep = chrono::Duration::milliseconds(
        (options.conflict_rule.max_separation_minutes * 60_000.0).round() as i64,
    );
    for group in by_area.values_mut() {
        group.sort_by_key(|r| (r.occurred_at, r.incident_id.clone()));
        for i in 0..group.len() {
            for j in (i + 1)..group.len() {
                if group[j].occurred_at - group[i].occurred_at > max_sep {
                    break;
                }
                edges.push((
                    group[i].incident_id.clone(),
                    group[j].incident_id.clone(),
                ));
            }
        }
    }

    let instance = Instance::new(demands, regimes, edges, options.stability_margin)?;
    Ok(BuiltInstance {
        num_edges: instance.conflict_edges().len(),
        instance,
        regime_counts,
        mixture_weights,
        dropped_demands,
    })
}

/// Baseline service-rate estimates from observed sojourns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEstimate {
    /// Mean sojourn per regime (minutes).
    pub mean_sojourn: Vec<f64>,
    /// mu-hat_r = 1/s-hat_r + Lambda_r.
    pub service_rate: Vec<f64>,
    /// 1/mu-hat_r (minutes).
    pub mean_service_time: Vec<f64>,
    pub arrival_rate: Vec<f64>,
    /// Valid (strictly positive, finite) sojourn observations per regime.
    pub valid_observations: Vec<usize>,
}

/// Estimates mean sojourns and baseline service rates per regime from the
/// records inside the window. Incidents with zero sojourn count toward the
/// arrival rate but not the sojourn mean.
pub fn estimate_baseline_rates(
    records: &[IncidentRecord],
    regime_map: &BTreeMap<String, usize>,
    window: &ScenarioWindow,
) -> Result<BaselineEstimate> {
    let num_regimes = regime_map.values().copied().max().map_or(0, |m| m + 1);
    if num_regimes == 0 {
        return Err(Error::ingest("empty regime map"));
    }
    let mut sums = vec![0.0f64; num_regimes];
    let mut valid = vec![0usize; num_regimes];
    let mut counts = vec![0usize; num_regimes];
    for record in records {
        if !window.contains(record.occurred_at) {
            continue;
        }
        let Some(&r) = regime_map.get(&record.call_type) else {
            continue;
        };
        counts[r] += 1;
        let sojourn = record.sojourn_minutes();
        if sojourn > 0.0 && sojourn.is_finite() {
            sums[r] += sojourn;
            valid[r] += 1;
        }
    }
    for (r, &v) in valid.iter().enumerate() {
        if v == 0 {
            return Err(Error::ingest(format!(
                "regime {r} has no valid sojourn observations"
            )));
        }
    }
    let window_minutes = window.minutes();
    let mean_sojourn: Vec<f64> = sums
        .iter()
        .zip(&valid)
        .map(|(&s, &v)| s / v as f64)
        .collect();
    let arrival_rate: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / window_minutes)
        .collect();
    let service_rate: Vec<f64> = mean_sojourn
        .iter()
        .zip(&arrival_rate)
        .map(|(&s, &l)| 1.0 / s + l)
        .collect();
    let mean_service_time: Vec<f64> = service_rate.iter().map(|&m| 1.0 / m).collect();
    Ok(BaselineEstimate {
        mean_sojourn,
        service_rate,
        mean_service_time,
        arrival_rate,
        valid_observations: valid,
    })
}

/// Gamma(psi) = psi * CVaR_gamma of the baseline expected response times,
/// with gamma = beta.
pub fn resolve_gamma_threshold(baseline_expectations: &[f64], profile: &Profile) -> Result<f64> {
    let cvar = cvar_of_values(baseline_expectations, profile.beta)?;
    Ok(profile.psi * cvar)
}

/// The profile used when materializing instances independently of the
/// service-level profile: unit threshold scaling, so stored thresholds equal
/// completion times and any profile can be applied later by rescaling.
pub fn reference_profile() -> Profile {
    Profile {
        name: "REFERENCE".to_string(),
        beta: 1.0,
        alpha: 0.5,
        psi: 1.0,
        phi: 1.0,
        kappa: 0.0,
    }
}

/// Applies a profile to a unit-threshold instance: thresholds scale by phi
/// and tolerances switch to the profile's alpha. Thresholds that would fall
/// below the access time clamp to it (a guarantee tighter than the
/// deterministic travel time is unmeetable; zero slack makes the demand
/// unprotectable in practice).
pub fn apply_profile(unit_instance: &Instance, profile: &Profile) -> Result<Instance> {
    profile.validate()?;
    let demands: Vec<Demand> = unit_instance
        .demands()
        .iter()
        .map(|d| {
            let threshold = (profile.phi * d.threshold).max(d.access_time);
            Demand::new(d.id.clone(), d.access_time, threshold, profile.alpha, d.weight)
        })
        .collect::<Result<_>>()?;
    Instance::new(
        demands,
        unit_instance.regimes().to_vec(),
        unit_instance.conflict_edges().iter().cloned(),
        unit_instance.stability_margin(),
    )
}

/// Design parameters induced by a profile: beta coverage, gamma = beta and
/// the given CVaR threshold.
pub fn params_for_profile(profile: &Profile, tail_threshold: f64) -> Result<crate::model::DesignParams> {
    crate::model::DesignParams::new(profile.beta, profile.beta, tail_threshold, profile.kappa, false)
}

/// The status-quo benchmark: baseline service rates with the top
/// ceil(beta |A|) largest-slack demands marked protected (the conflict-free
/// selection rule; conflicts are ignored for benchmarking purposes).
pub fn baseline_plan(
    instance: &Instance,
    estimate: &BaselineEstimate,
    params: &crate::model::DesignParams,
) -> Result<crate::model::ServicePlan> {
    if estimate.service_rate.len() != instance.num_regimes() {
        return Err(Error::DimensionMismatch {
            what: "baseline service rates",
            expected: instance.num_regimes(),
            got: estimate.service_rate.len(),
        });
    }
    let selection = crate::poly::sorted_selection(instance, params);
    let mut protected = vec![false; instance.num_demands()];
    for &i in &selection.permutation[..selection.count] {
        protected[i] = true;
    }
    // the model objective evaluated at the estimated rates
    let objective: f64 = instance
        .regimes()
        .iter()
        .zip(&estimate.service_rate)
        .map(|(regime, &mu)| {
            regime.unit_cost * mu
                - params.congestion_weight * (mu - regime.arrival_rate).max(f64::MIN_POSITIVE).ln()
        })
        .sum();
    Ok(crate::model::ServicePlan::new(
        estimate.service_rate.clone(),
        protected,
        objective,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use std::io::Write;

    fn ts(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").unwrap()
    }

    fn record(
        id: &str,
        occurred: &str,
        area: &str,
        call_type: &str,
        sojourn_min: f64,
        travel: f64,
    ) -> IncidentRecord {
        let occurred_at = ts(occurred);
        let assigned_at = occurred_at + chrono::Duration::minutes(2);
        let closed_at = assigned_at + chrono::Duration::seconds((sojourn_min * 60.0) as i64);
        IncidentRecord {
            incident_id: id.to_string(),
            occurred_at,
            borough: "BRONX".to_string(),
            call_type: call_type.to_string(),
            dispatch_area: area.to_string(),
            assigned_at,
            closed_at,
            travel_minutes: travel,
        }
    }

    fn test_window() -> ScenarioWindow {
        ScenarioWindow::new(
            "night",
            ts("2025-03-03 20:00:00"),
            ts("2025-03-04 08:00:00"),
        )
        .unwrap()
    }

    fn regime_map() -> BTreeMap<String, usize> {
        [("CARDBR", 0), ("SICK", 1)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    fn profile() -> Profile {
        Profile {
            name: "TEST".to_string(),
            beta: 0.5,
            alpha: 0.1,
            psi: 1.1,
            phi: 1.0,
            kappa: 0.1,
        }
    }

    #[test]
    fn parse_empty_file_yields_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(
            f,
            "CAD_INCIDENT_ID,INCIDENT_DATETIME,BOROUGH,INITIAL_CALL_TYPE,INCIDENT_DISPATCH_AREA,FIRST_ASSIGNMENT_DATETIME,INCIDENT_CLOSE_DATETIME,INCIDENT_TRAVEL_TM_SECONDS_QY"
        )
        .unwrap();
        let summary = parse_incidents(&path, &ColumnMap::default()).unwrap();
        assert!(summary.records.is_empty());
        assert_eq!(summary.dropped, 0);
    }

    #[test]
    fn parse_drops_out_of_order_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(
            f,
            "CAD_INCIDENT_ID,INCIDENT_DATETIME,BOROUGH,INITIAL_CALL_TYPE,INCIDENT_DISPATCH_AREA,FIRST_ASSIGNMENT_DATETIME,INCIDENT_CLOSE_DATETIME,INCIDENT_TRAVEL_TM_SECONDS_QY"
        )
        .unwrap();
        // closed before assigned: dropped
        writeln!(f, "1,2025-03-03 21:00:00,BRONX,SICK,B1,2025-03-03 21:10:00,2025-03-03 21:05:00,300").unwrap();
        // fine
        writeln!(f, "2,2025-03-03 21:00:00,BRONX,SICK,B1,2025-03-03 21:10:00,2025-03-03 21:30:00,300").unwrap();
        let summary = parse_incidents(&path, &ColumnMap::default()).unwrap();
        assert_eq!(summary.records.len(), 1);
        assert_eq!(summary.dropped, 1);
        assert_eq!(summary.drop_log[0].0, 1);
    }

    #[test]
    fn parse_round_trips_synthetic_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("four.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(
            f,
            "CAD_INCIDENT_ID,INCIDENT_DATETIME,BOROUGH,INITIAL_CALL_TYPE,INCIDENT_DISPATCH_AREA,FIRST_ASSIGNMENT_DATETIME,INCIDENT_CLOSE_DATETIME,INCIDENT_TRAVEL_TM_SECONDS_QY"
        )
        .unwrap();
        for i in 0..4 {
            writeln!(
                f,
                "id{i},2025-03-03 2{i}:00:00,BRONX,SICK,B1,2025-03-03 2{i}:05:00,2025-03-03 2{i}:45:00,{}",
                240 + i * 60
            )
            .unwrap();
        }
        let summary = parse_incidents(&path, &ColumnMap::default()).unwrap();
        assert_eq!(summary.records.len(), 4);
        assert_eq!(summary.dropped, 0);
        assert_eq!(summary.records[0].occurred_at, ts("2025-03-03 20:00:00"));
        assert_eq!(summary.records[0].travel_minutes, 4.0);
        assert_eq!(summary.records[3].travel_minutes, 7.0);
        assert_eq!(summary.records[2].sojourn_minutes(), 40.0);
    }

    #[test]
    fn missing_column_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "CAD_INCIDENT_ID,INCIDENT_DATETIME").unwrap();
        let err = parse_incidents(&path, &ColumnMap::default()).unwrap_err();
        assert!(err.to_string().contains("missing column"), "{err}");
    }

    #[test]
    fn build_counts_rates_and_weights() {
        let records = vec![
            record("a", "2025-03-03 21:00:00", "B1", "CARDBR", 20.0, 5.0),
            record("b", "2025-03-03 22:00:00", "B1", "SICK", 30.0, 5.0),
            record("c", "2025-03-03 23:00:00", "B2", "SICK", 25.0, 5.0),
            // outside the window
            record("d", "2025-03-04 09:00:00", "B1", "SICK", 25.0, 5.0),
        ];
        let built = build_instance(
            &records,
            "bronx",
            &test_window(),
            &regime_map(),
            &profile(),
            &BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(built.regime_counts, vec![1, 2]);
        assert_eq!(built.instance.num_demands(), 3);
        let weights = built.instance.mixture_weights();
        assert!((weights[0] - 1.0 / 3.0).abs() < 1e-12);
        let minutes = 12.0 * 60.0;
        assert!((built.instance.arrival_rates()[1] - 2.0 / minutes).abs() < 1e-15);
        // thresholds scale the completion time: (2 + 20) * phi for "a"
        let d = &built.instance.demands()[0];
        assert!((d.threshold - 22.0).abs() < 1e-9);
        assert_eq!(d.access_time, 5.0);
    }

    #[test]
    fn conflict_rule_boundary() {
        let records = vec![
            record("a", "2025-03-03 21:00:00", "B1", "SICK", 20.0, 5.0),
            record("b", "2025-03-03 21:00:30", "B1", "SICK", 20.0, 5.0), // 30 s: edge
            record("c", "2025-03-03 21:01:31", "B1", "SICK", 20.0, 5.0), // 61 s from b: none
            record("d", "2025-03-03 21:01:31", "B2", "SICK", 20.0, 5.0), // other area
        ];
        let built = build_instance(
            &records,
            "BRONX",
            &test_window(),
            &regime_map(),
            &profile(),
            &BuildOptions::default(),
        )
        .unwrap();
        let edges = built.instance.conflict_edges();
        assert_eq!(edges.len(), 1, "{edges:?}");
        assert!(edges.contains(&("a".to_string(), "b".to_string())));
    }

    #[test]
    fn unmapped_call_type_errors_unless_dropped() {
        let records = vec![
            record("a", "2025-03-03 21:00:00", "B1", "UNKNOWN", 20.0, 5.0),
            record("b", "2025-03-03 22:00:00", "B1", "SICK", 20.0, 5.0),
        ];
        let err = build_instance(
            &records,
            "BRONX",
            &test_window(),
            &regime_map(),
            &profile(),
            &BuildOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("unmapped call type"), "{err}");
        let built = build_instance(
            &records,
            "BRONX",
            &test_window(),
            &regime_map(),
            &profile(),
            &BuildOptions {
                drop_unmapped_call_types: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(built.instance.num_demands(), 1);
    }

    #[test]
    fn baseline_rates_from_sojourns() {
        // two sojourns 10 and 30: mean 20, mu = 1/20 + Lambda
        let records = vec![
            record("a", "2025-03-03 21:00:00", "B1", "SICK", 10.0, 5.0),
            record("b", "2025-03-03 22:00:00", "B1", "SICK", 30.0, 5.0),
            record("c", "2025-03-03 23:00:00", "B1", "CARDBR", 10.0, 5.0),
        ];
        let est = estimate_baseline_rates(&records, &regime_map(), &test_window()).unwrap();
        assert!((est.mean_sojourn[1] - 20.0).abs() < 1e-12);
        let lambda = 2.0 / (12.0 * 60.0);
        assert!((est.service_rate[1] - (0.05 + lambda)).abs() < 1e-12);
        assert_eq!(est.valid_observations, vec![1, 2]);

        // single record with sojourn 10 at Lambda = 0.02: mu = 0.12
        let window = ScenarioWindow::new("w", ts("2025-03-03 20:00:00"), ts("2025-03-03 20:50:00")).unwrap();
        let one = vec![record("a", "2025-03-03 20:10:00", "B1", "SICK", 10.0, 5.0)];
        let map: BTreeMap<String, usize> = [("SICK".to_string(), 0)].into_iter().collect();
        let est = estimate_baseline_rates(&one, &map, &window).unwrap();
        assert!((est.service_rate[0] - 0.12).abs() < 1e-12);
    }

    #[test]
    fn zero_sojourn_counts_for_arrivals_only() {
        let records = vec![
            record("a", "2025-03-03 21:00:00", "B1", "SICK", 0.0, 5.0),
            record("b", "2025-03-03 22:00:00", "B1", "SICK", 30.0, 5.0),
        ];
        let map: BTreeMap<String, usize> = [("SICK".to_string(), 0)].into_iter().collect();
        let est = estimate_baseline_rates(&records, &map, &test_window()).unwrap();
        assert_eq!(est.valid_observations, vec![1]);
        assert!((est.mean_sojourn[0] - 30.0).abs() < 1e-12);
        assert!((est.arrival_rate[0] - 2.0 / 720.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_threshold_scales_baseline_cvar() {
        let profile = Profile {
            name: "T".to_string(),
            beta: 0.75,
            alpha: 0.1,
            psi: 1.25,
            phi: 1.0,
            kappa: 0.0,
        };
        // CVaR_{0.75} of 4 values = the single worst
        let gamma = resolve_gamma_threshold(&[10.0, 20.0, 30.0, 80.0], &profile).unwrap();
        assert!((gamma - 100.0).abs() < 1e-12);
        let identity = Profile { psi: 1.0, ..profile };
        let gamma = resolve_gamma_threshold(&[10.0, 20.0, 30.0, 80.0], &identity).unwrap();
        assert!((gamma - 80.0).abs() < 1e-12);
    }

    #[test]
    fn rebuilding_is_deterministic_and_order_invariant() {
        let mut records = vec![
            record("a", "2025-03-03 21:00:00", "B1", "CARDBR", 20.0, 5.0),
            record("b", "2025-03-03 21:00:30", "B1", "SICK", 30.0, 5.0),
            record("c", "2025-03-03 23:00:00", "B2", "SICK", 25.0, 5.0),
        ];
        let first = build_instance(
            &records,
            "BRONX",
            &test_window(),
            &regime_map(),
            &profile(),
            &BuildOptions::default(),
        )
        .unwrap();
        records.reverse();
        let second = build_instance(
            &records,
            "BRONX",
            &test_window(),
            &regime_map(),
            &profile(),
            &BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(first.instance.conflict_edges(), second.instance.conflict_edges());
        assert_eq!(first.regime_counts, second.regime_counts);
        // demand sets coincide (order may differ)
        let mut ids1: Vec<_> = first.instance.demands().iter().map(|d| d.id.clone()).collect();
        let mut ids2: Vec<_> = second.instance.demands().iter().map(|d| d.id.clone()).collect();
        ids1.sort();
        ids2.sort();
        assert_eq!(ids1, ids2);
    }

    #[test]
    fn window_validation() {
        let d = NaiveDate::from_ymd_opt(2025, 3, 3).unwrap().and_hms_opt(8, 0, 0).unwrap();
        assert!(ScenarioWindow::new("bad", d, d).is_err());
    }

    #[test]
    fn profile_application_rescales_thresholds() {
        let records = vec![
            record("a", "2025-03-03 21:00:00", "B1", "CARDBR", 20.0, 5.0),
            record("b", "2025-03-03 22:00:00", "B1", "SICK", 30.0, 5.0),
        ];
        let unit = build_instance(
            &records,
            "BRONX",
            &test_window(),
            &regime_map(),
            &reference_profile(),
            &BuildOptions::default(),
        )
        .unwrap();
        // unit thresholds equal completion times
        assert!((unit.instance.demands()[0].threshold - 22.0).abs() < 1e-9);
        let tight = Profile {
            name: "T".into(),
            beta: 0.5,
            alpha: 0.02,
            psi: 1.0,
            phi: 0.9,
            kappa: 0.1,
        };
        let applied = apply_profile(&unit.instance, &tight).unwrap();
        assert!((applied.demands()[0].threshold - 19.8).abs() < 1e-9);
        assert_eq!(applied.demands()[0].tolerance, 0.02);
        // regimes and edges untouched
        assert_eq!(applied.regimes(), unit.instance.regimes());
    }

    #[test]
    fn baseline_plan_uses_estimates_and_top_slack() {
        let records = vec![
            record("a", "2025-03-03 21:00:00", "B1", "CARDBR", 20.0, 5.0),
            record("b", "2025-03-03 22:00:00", "B1", "SICK", 30.0, 5.0),
            record("c", "2025-03-03 23:00:00", "B1", "SICK", 40.0, 5.0),
        ];
        let unit = build_instance(
            &records,
            "BRONX",
            &test_window(),
            &regime_map(),
            &reference_profile(),
            &BuildOptions::default(),
        )
        .unwrap();
        let est = estimate_baseline_rates(&records, &regime_map(), &test_window()).unwrap();
        let applied = apply_profile(&unit.instance, &default_profiles()[3]).unwrap(); // REL
        let params = params_for_profile(&default_profiles()[3], 1e9).unwrap();
        let plan = baseline_plan(&applied, &est, &params).unwrap();
        assert_eq!(plan.service_rates, est.service_rate);
        // ceil(0.7 * 3) = 3: everyone protected
        assert_eq!(plan.protected, vec![true, true, true]);
    }
}
