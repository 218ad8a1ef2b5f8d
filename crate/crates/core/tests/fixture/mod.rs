//! Synthetic incident-log fixture reproducing the case-study table rows:
//! Bronx/Manhattan night sizes, edges and mixture weights, and the Manhattan
//! full-year weights and baseline service rates. Expected values are
//! embedded by construction.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};

use regime_design_core::ingest::ScenarioWindow;

pub const CALL_TYPES: [&str; 4] = ["CARDBR", "INJURY", "SICK", "UNC"];

/// Night-window counts per call type.
const BRONX_NIGHT_COUNTS: [usize; 4] = [35, 27, 36, 12]; // |A| = 110
const MANHATTAN_NIGHT_COUNTS: [usize; 4] = [32, 26, 28, 15]; // |A| = 101
/// Full-year Manhattan counts per call type (66,780 total, night included).
const MANHATTAN_YEAR_COUNTS: [usize; 4] = [13_136, 19_319, 16_515, 17_810];
/// Baseline service-rate targets for Manhattan.
const MANHATTAN_MU_TARGET: [f64; 4] = [0.0505, 0.0712, 0.0613, 0.0705];

pub fn regime_map() -> BTreeMap<String, usize> {
    CALL_TYPES
        .iter()
        .enumerate()
        .map(|(i, t)| (t.to_string(), i))
        .collect()
}

fn at(s: &str) -> NaiveDateTime {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M").unwrap()
}

pub fn night_window() -> ScenarioWindow {
    ScenarioWindow::new("night", at("2025-03-03 20:00"), at("2025-03-04 08:00")).unwrap()
}

pub fn year_window() -> ScenarioWindow {
    ScenarioWindow::new("year", at("2025-01-01 00:00"), at("2026-01-01 00:00")).unwrap()
}

/// Values the fixture realizes exactly, for cross-checking against the
/// ingest pipeline.
pub struct ExpectedValues {
    pub mu_hat: [f64; 4],
    pub mean_service_time: [f64; 4],
}

/// Deterministic striped assignment realizing exact per-type counts.
struct TypeSequence {
    remaining: [usize; 4],
    cursor: usize,
}

impl TypeSequence {
    fn new(counts: [usize; 4]) -> Self {
        TypeSequence {
            remaining: counts,
            cursor: 0,
        }
    }

    fn next_type(&mut self) -> usize {
        for _ in 0..4 {
            let t = self.cursor % 4;
            self.cursor += 1;
            if self.remaining[t] > 0 {
                self.remaining[t] -= 1;
                return t;
            }
        }
        panic!("type sequence exhausted");
    }
}

struct Emitter {
    out: String,
    next_id: usize,
}

impl Emitter {
    fn row(
        &mut self,
        borough: &str,
        occurred: NaiveDateTime,
        call_type: usize,
        area: &str,
        sojourn_seconds: i64,
        travel_seconds: i64,
    ) {
        let assigned = occurred + Duration::minutes(2);
        let closed = assigned + Duration::seconds(sojourn_seconds);
        let fmt = "%Y-%m-%d %H:%M:%S";
        let id = self.next_id;
        self.next_id += 1;
        writeln!(
            self.out,
            "F{id:07},{},{borough},{},{area},{},{},{travel_seconds}",
            occurred.format(fmt),
            CALL_TYPES[call_type],
            assigned.format(fmt),
            closed.format(fmt),
        )
        .unwrap();
    }
}

/// A night-window block: `spread` incidents far apart in round-robin areas
/// plus `pairs` same-area incident pairs 30 seconds apart (one conflict edge
/// each).
fn night_block(
    emit: &mut Emitter,
    borough: &str,
    start: NaiveDateTime,
    counts: [usize; 4],
    pairs: usize,
    sojourn_seconds: impl Fn(usize, usize) -> i64,
) {
    let total: usize = counts.iter().sum();
    let spread = total - 2 * pairs;
    let mut types = TypeSequence::new(counts);
    // 690 active minutes leave margin inside the 720-minute window
    for i in 0..spread {
        let offset = 300 + (i as i64) * (690 * 60) / (spread as i64);
        let occurred = start + Duration::seconds(offset);
        let t = types.next_type();
        let area = format!("{borough}-A{}", i % 6);
        emit.row(borough, occurred, t, &area, sojourn_seconds(t, i), 300);
    }
    for p in 0..pairs {
        let offset = 600 + (p as i64) * 12_000;
        let area = format!("{borough}-P{p}");
        for member in 0..2 {
            let occurred = start + Duration::seconds(offset + 30 * member as i64);
            let t = types.next_type();
            emit.row(borough, occurred, t, &area, sojourn_seconds(t, p), 300);
        }
    }
}

/// Writes the full fixture CSV and returns the embedded expected values.
pub fn write_paper_fixture(path: &Path) -> ExpectedValues {
    let year_minutes = 365.0 * 24.0 * 60.0;
    // Arrival rates implied by the year counts; regime-constant sojourns in
    // whole seconds hit the mu-hat targets through 1/s-hat + Lambda.
    let mut sojourn_seconds = [0i64; 4];
    let mut mu_hat = [0f64; 4];
    let mut mean_service_time = [0f64; 4];
    for t in 0..4 {
        let lambda = MANHATTAN_YEAR_COUNTS[t] as f64 / year_minutes;
        let target_sojourn_minutes = 1.0 / (MANHATTAN_MU_TARGET[t] - lambda);
        sojourn_seconds[t] = (target_sojourn_minutes * 60.0).round() as i64;
        let realized_sojourn_minutes = sojourn_seconds[t] as f64 / 60.0;
        mu_hat[t] = 1.0 / realized_sojourn_minutes + lambda;
        mean_service_time[t] = 1.0 / mu_hat[t];
    }

    let mut emit = Emitter {
        out: String::with_capacity(10_000_000),
        next_id: 0,
    };
    emit.out.push_str(
        "CAD_INCIDENT_ID,INCIDENT_DATETIME,BOROUGH,INITIAL_CALL_TYPE,INCIDENT_DISPATCH_AREA,\
         FIRST_ASSIGNMENT_DATETIME,INCIDENT_CLOSE_DATETIME,INCIDENT_TRAVEL_TM_SECONDS_QY\n",
    );

    let night_start = at("2025-03-03 20:00");

    // Bronx night: varied sojourns, three conflict pairs.
    night_block(
        &mut emit,
        "BRONX",
        night_start,
        BRONX_NIGHT_COUNTS,
        3,
        |t, i| (20 + 3 * t as i64) * 60 + (i as i64 % 7) * 60,
    );

    // Manhattan night: two pairs, sojourns pinned to the year constants so
    // the full-year means stay exact.
    night_block(
        &mut emit,
        "MANHATTAN",
        night_start,
        MANHATTAN_NIGHT_COUNTS,
        2,
        |t, _| sojourn_seconds[t],
    );

    // Manhattan year remainder, spread from March 5 to year end, away from
    // the night window so the night counts stay exact.
    let remainder: [usize; 4] = [
        MANHATTAN_YEAR_COUNTS[0] - MANHATTAN_NIGHT_COUNTS[0],
        MANHATTAN_YEAR_COUNTS[1] - MANHATTAN_NIGHT_COUNTS[1],
        MANHATTAN_YEAR_COUNTS[2] - MANHATTAN_NIGHT_COUNTS[2],
        MANHATTAN_YEAR_COUNTS[3] - MANHATTAN_NIGHT_COUNTS[3],
    ];
    let total_remainder: usize = remainder.iter().sum();
    let span_seconds = (NaiveDate::from_ymd_opt(2026, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
        - at("2025-03-05 00:00"))
    .num_seconds();
    let start = at("2025-03-05 00:00");
    let mut types = TypeSequence::new(remainder);
    for i in 0..total_remainder {
        let offset = (i as i64) * span_seconds / (total_remainder as i64 + 1);
        let occurred = start + Duration::seconds(offset);
        let t = types.next_type();
        let area = format!("MANHATTAN-A{}", i % 12);
        emit.row("MANHATTAN", occurred, t, &area, sojourn_seconds[t], 300);
    }

    std::fs::write(path, &emit.out).unwrap();
    ExpectedValues {
        mu_hat,
        mean_service_time,
    }
}
