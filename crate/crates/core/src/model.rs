//! Domain types: demands, regimes, instances, design parameters, plans and
//! performance reports.
//!
//! All types are immutable after construction and validated on entry, so the
//! numerical layers can assume the invariants hold. Instances and plans
//! serialize to versioned JSON documents.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version tag written into serialized instances and plans.
pub const SCHEMA_VERSION: u32 = 1;

/// Tolerance for the mixture-weight consistency checks.
const WEIGHT_TOL: f64 = 1e-9;

/// Relative tolerance used by feasibility checks; violations report signed slack.
pub const FEAS_REL_TOL: f64 = 1e-7;

/// One parallel M/M/1 service channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub index: usize,
    /// Arrival rate Lambda_r in events per minute.
    pub arrival_rate: f64,
    /// Routing probability pi_r of this regime.
    pub mixture_weight: f64,
    /// Cost per unit of service rate.
    pub unit_cost: f64,
}

impl Regime {
    pub fn new(index: usize, arrival_rate: f64, mixture_weight: f64, unit_cost: f64) -> Result<Self> {
        if !(arrival_rate >= 0.0) {
            return Err(Error::invalid("regime", format!("arrival_rate {arrival_rate} < 0")));
        }
        if !(unit_cost >= 0.0) {
            return Err(Error::invalid("regime", format!("unit_cost {unit_cost} < 0")));
        }
        if !(0.0..=1.0).contains(&mixture_weight) {
            return Err(Error::invalid(
                "regime",
                format!("mixture_weight {mixture_weight} outside [0,1]"),
            ));
        }
        Ok(Regime {
            index,
            arrival_rate,
            mixture_weight,
            unit_cost,
        })
    }
}

/// A single demand element with its access time, SLA threshold and tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub id: String,
    /// Deterministic access time t_a in minutes.
    pub access_time: f64,
    /// Response-time threshold t*_a >= t_a.
    pub threshold: f64,
    /// SLA violation tolerance alpha_a. alpha = 1 marks a demand that can
    /// never be protected (its SLA is vacuous); alpha = 0 is rejected.
    pub tolerance: f64,
    /// Coverage weight w_a > 0.
    pub weight: f64,
}

impl Demand {
    pub fn new(
        id: impl Into<String>,
        access_time: f64,
        threshold: f64,
        tolerance: f64,
        weight: f64,
    ) -> Result<Self> {
        let id = id.into();
        if !(access_time >= 0.0) {
            return Err(Error::invalid("demand", format!("{id}: access_time {access_time} < 0")));
        }
        if !(threshold >= access_time) {
            return Err(Error::invalid(
                "demand",
                format!("{id}: threshold {threshold} < access_time {access_time}"),
            ));
        }
        if !(tolerance > 0.0 && tolerance <= 1.0) {
            return Err(Error::invalid(
                "demand",
                format!("{id}: tolerance {tolerance} outside (0,1]"),
            ));
        }
        if !(weight > 0.0) {
            return Err(Error::invalid("demand", format!("{id}: weight {weight} <= 0")));
        }
        Ok(Demand {
            id,
            access_time,
            threshold,
            tolerance,
            weight,
        })
    }

    /// Slack Delta_a = t*_a - t_a, the waiting-plus-service time budget.
    pub fn slack(&self) -> f64 {
        self.threshold - self.access_time
    }

    /// Whether this demand may carry a strict service guarantee.
    pub fn protectable(&self) -> bool {
        self.tolerance < 1.0
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    demands: Vec<Demand>,
    regimes: Vec<Regime>,
    /// Unordered conflict pairs, stored as sorted (id, id) with id_a < id_b.
    conflict_edges: BTreeSet<(String, String)>,
    /// Stability margin epsilon > 0 (events per minute).
    stability_margin: f64,
    #[doc(hidden)]
    index_of: HashMap<String, usize>,
}

impl Instance {
    pub fn new(
        demands: Vec<Demand>,
        regimes: Vec<Regime>,
        conflict_edges: impl IntoIterator<Item = (String, String)>,
        stability_margin: f64,
    ) -> Result<Self> {
        if demands.is_empty() {
            return Err(Error::invalid("instance", "no demands"));
        }
        if regimes.is_empty() {
            return Err(Error::invalid("instance", "no regimes"));
        }
        if !(stability_margin > 0.0) {
            return Err(Error::invalid(
                "instance",
                format!("stability margin {stability_margin} must be > 0"),
            ));
        }

        let mut index_of = HashMap::with_capacity(demands.len());
        for (i, d) in demands.iter().enumerate() {
            if index_of.insert(d.id.clone(), i).is_some() {
                return Err(Error::invalid("instance", format!("duplicate demand id {}", d.id)));
            }
        }

        let weight_sum: f64 = regimes.iter().map(|r| r.mixture_weight).sum();
        if (weight_sum - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::invalid(
                "instance",
                format!("mixture weights sum to {weight_sum}, expected 1"),
            ));
        }
        let lambda_sum: f64 = regimes.iter().map(|r| r.arrival_rate).sum();
        if lambda_sum > 0.0 {
            for r in &regimes {
                let proportional = r.arrival_rate / lambda_sum;
                if (r.mixture_weight - proportional).abs() > WEIGHT_TOL {
                    return Err(Error::invalid(
                        "instance",
                        format!(
                            "regime {}: pi = {} is not Lambda-proportional ({proportional})",
                            r.index, r.mixture_weight
                        ),
                    ));
                }
            }
        }

        let mut edges = BTreeSet::new();
        for (a, b) in conflict_edges {
            if a == b {
                return Err(Error::invalid("instance", format!("conflict self-loop on {a}")));
            }
            if !index_of.contains_key(&a) {
                return Err(Error::invalid("instance", format!("conflict edge references unknown id {a}")));
            }
            if !index_of.contains_key(&b) {
                return Err(Error::invalid("instance", format!("conflict edge references unknown id {b}")));
            }
            let pair = if a < b { (a, b) } else { (b, a) };
            edges.insert(pair);
        }

        Ok(Instance {
            demands,
            regimes,
            conflict_edges: edges,
            stability_margin,
            index_of,
        })
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn regimes(&self) -> &[Regime] {
        &self.regimes
    }

    pub fn num_demands(&self) -> usize {
        self.demands.len()
    }

    pub fn num_regimes(&self) -> usize {
        self.regimes.len()
    }

    pub fn stability_margin(&self) -> f64 {
        self.stability_margin
    }

    pub fn conflict_edges(&self) -> &BTreeSet<(String, String)> {
        &self.conflict_edges
    }

    /// Conflict edges as index pairs (i, j), i < j in demand order.
    pub fn conflict_index_pairs(&self) -> Vec<(usize, usize)> {
        self.conflict_edges
            .iter()
            .map(|(a, b)| {
                let i = self.index_of[a];
                let j = self.index_of[b];
                if i < j {
                    (i, j)
                } else {
                    (j, i)
                }
            })
            .collect()
    }

    pub fn demand_index(&self, id: &str) -> Option<usize> {
        self.index_of.get(id).copied()
    }

    pub fn arrival_rates(&self) -> Vec<f64> {
        self.regimes.iter().map(|r| r.arrival_rate).collect()
    }

    pub fn mixture_weights(&self) -> Vec<f64> {
        self.regimes.iter().map(|r| r.mixture_weight).collect()
    }

    pub fn unit_costs(&self) -> Vec<f64> {
        self.regimes.iter().map(|r| r.unit_cost).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = InstanceDoc {
            version: SCHEMA_VERSION,
            demands: self.demands.clone(),
            regimes: self.regimes.clone(),
            conflict_edges: self.conflict_edges.iter().cloned().collect(),
            stability_margin: self.stability_margin,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        if doc.version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "instance",
                format!("unsupported schema version {}", doc.version),
            ));
        }
        Instance::new(doc.demands, doc.regimes, doc.conflict_edges, doc.stability_margin)
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    version: u32,
    demands: Vec<Demand>,
    regimes: Vec<Regime>,
    conflict_edges: Vec<(String, String)>,
    stability_margin: f64,
}

/// Profile knobs governing coverage, tail control and the congestion penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    /// Minimum protected fraction beta in (0,1].
    pub coverage: f64,
    /// Tail fraction gamma in [0,1); the worst floor((1-gamma)|A|) demands enter the CVaR.
    pub tail_fraction: f64,
    /// CVaR bound Gamma in minutes.
    pub tail_threshold: f64,
    /// Congestion penalty weight kappa >= 0.
    pub congestion_weight: f64,
    /// Use the weighted coverage constraint sum w_a s_a >= beta sum w_a.
    pub weighted_coverage: bool,
}

impl DesignParams {
    pub fn new(
        coverage: f64,
        tail_fraction: f64,
        tail_threshold: f64,
        congestion_weight: f64,
        weighted_coverage: bool,
    ) -> Result<Self> {
        if !(coverage > 0.0 && coverage <= 1.0) {
            return Err(Error::invalid("params", format!("coverage {coverage} outside (0,1]")));
        }
        if !(0.0..1.0).contains(&tail_fraction) {
            return Err(Error::invalid(
                "params",
                format!("tail_fraction {tail_fraction} outside [0,1)"),
            ));
        }
        if !(tail_threshold >= 0.0) {
            return Err(Error::invalid(
                "params",
                format!("tail_threshold {tail_threshold} < 0"),
            ));
        }
        if !(congestion_weight >= 0.0) {
            return Err(Error::invalid(
                "params",
                format!("congestion_weight {congestion_weight} < 0"),
            ));
        }
        Ok(DesignParams {
            coverage,
            tail_fraction,
            tail_threshold,
            congestion_weight,
            weighted_coverage,
        })
    }

    /// Coverage target ceil(beta |A|), computed robustly against binary rounding.
    pub fn coverage_count(&self, num_demands: usize) -> usize {
        let k = (self.coverage * num_demands as f64 - 1e-9).ceil() as usize;
        k.clamp(1, num_demands)
    }

    /// Tail cardinality floor((1-gamma)|A|); errors when the tail is empty.
    pub fn tail_count(&self, num_demands: usize) -> Result<usize> {
        let d = ((1.0 - self.tail_fraction) * num_demands as f64 + 1e-9).floor() as usize;
        if d == 0 {
            return Err(Error::DegenerateTail {
                gamma: self.tail_fraction,
                n: num_demands,
            });
        }
        Ok(d)
    }

    /// Validates the instance-coupled invariant floor((1-gamma)|A|) >= 1.
    pub fn validate_for(&self, instance: &Instance) -> Result<()> {
        self.tail_count(instance.num_demands()).map(|_| ())
    }
}

/// Decision output: regime service rates and the protection vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServicePlan {
    /// Service rate mu_r per regime (events per minute).
    pub service_rates: Vec<f64>,
    /// Protection indicator s_a per demand, in instance demand order.
    pub protected: Vec<bool>,
    pub objective_value: f64,
}

impl ServicePlan {
    pub fn new(service_rates: Vec<f64>, protected: Vec<bool>, objective_value: f64) -> Self {
        ServicePlan {
            service_rates,
            protected,
            objective_value,
        }
    }

    pub fn protected_count(&self) -> usize {
        self.protected.iter().filter(|&&p| p).count()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = PlanDoc {
            version: SCHEMA_VERSION,
            service_rates: self.service_rates.clone(),
            protected: self.protected.clone(),
            objective_value: self.objective_value,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PlanDoc = serde_json::from_str(text)?;
        if doc.version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "plan",
                format!("unsupported schema version {}", doc.version),
            ));
        }
        Ok(ServicePlan::new(doc.service_rates, doc.protected, doc.objective_value))
    }
}

#[derive(Serialize, Deserialize)]
struct PlanDoc {
    version: u32,
    service_rates: Vec<f64>,
    protected: Vec<bool>,
    objective_value: f64,
}

/// One failed constraint, with its identifier, both sides and signed slack.
/// Slack is oriented so that feasible means `slack >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub left: f64,
    pub right: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintId {
    /// mu_r - Lambda_r >= eps.
    Stability { regime: usize },
    /// sum_r pi_r exp(-(mu_r - Lambda_r) Delta_a) <= alpha_a, for protected a.
    Sla { demand: String },
    /// sum s_a >= ceil(beta |A|) or its weighted variant.
    Coverage,
    /// s_a + s_a' <= 1 for a conflict edge.
    Conflict { a: String, b: String },
    /// CVaR_gamma of expected responses <= Gamma.
    CVaR,
}

impl std::fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstraintId::Stability { regime } => write!(f, "stability[{regime}]"),
            ConstraintId::Sla { demand } => write!(f, "sla[{demand}]"),
            ConstraintId::Coverage => write!(f, "coverage"),
            ConstraintId::Conflict { a, b } => write!(f, "conflict[{a},{b}]"),
            ConstraintId::CVaR => write!(f, "cvar"),
        }
    }
}

/// Per-demand and per-regime performance summary of a plan on an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    /// E[R_a] per demand, in minutes (infinite if a regime is unstable).
    pub per_demand_expectation: Vec<f64>,
    /// P(R_a <= t*_a) per demand.
    pub per_demand_sla_prob: Vec<f64>,
    /// CVaR_gamma of the expected response times, in minutes.
    pub cvar: f64,
    /// Utilization rho_r = Lambda_r / mu_r per regime.
    pub utilizations: Vec<f64>,
    /// sum_r c_r mu_r.
    pub capacity_cost: f64,
    /// -kappa sum_r ln(mu_r - Lambda_r).
    pub congestion_penalty: f64,
    pub violations: Vec<Violation>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demand(id: &str) -> Demand {
        Demand::new(id, 1.0, 11.0, 0.1, 1.0).unwrap()
    }

    #[test]
    fn regime_rejects_bad_fields() {
        assert!(Regime::new(0, -1.0, 1.0, 1.0).is_err());
        assert!(Regime::new(0, 1.0, 1.5, 1.0).is_err());
        assert!(Regime::new(0, 1.0, 1.0, -0.5).is_err());
        assert!(Regime::new(0, f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn demand_rejects_bad_fields() {
        assert!(Demand::new("a", 5.0, 4.0, 0.1, 1.0).is_err()); // t* < t_a
        assert!(Demand::new("a", 1.0, 2.0, 0.0, 1.0).is_err()); // alpha = 0
        assert!(Demand::new("a", 1.0, 2.0, 0.1, 0.0).is_err()); // w = 0
        assert!(Demand::new("a", -1.0, 2.0, 0.1, 1.0).is_err());
        // alpha = 1 is allowed but never protectable
        let d = Demand::new("a", 1.0, 2.0, 1.0, 1.0).unwrap();
        assert!(!d.protectable());
    }

    #[test]
    fn instance_validates_mixture_weights() {
        let demands = vec![demand("a")];
        // pi not Lambda-proportional
        let regimes = vec![
            Regime::new(0, 1.0, 0.7, 1.0).unwrap(),
            Regime::new(1, 1.0, 0.3, 1.0).unwrap(),
        ];
        assert!(Instance::new(demands.clone(), regimes, [], 1e-4).is_err());

        // consistent weights pass
        let regimes = vec![
            Regime::new(0, 3.0, 0.75, 1.0).unwrap(),
            Regime::new(1, 1.0, 0.25, 1.0).unwrap(),
        ];
        assert!(Instance::new(demands, regimes, [], 1e-4).is_ok());
    }

    #[test]
    fn instance_validates_conflict_edges() {
        let demands = vec![demand("a"), demand("b")];
        let regimes = vec![Regime::new(0, 1.0, 1.0, 1.0).unwrap()];
        let err = Instance::new(
            demands.clone(),
            regimes.clone(),
            [("a".to_string(), "a".to_string())],
            1e-4,
        );
        assert!(err.is_err(), "self-loop accepted");
        let err = Instance::new(
            demands.clone(),
            regimes.clone(),
            [("a".to_string(), "zzz".to_string())],
            1e-4,
        );
        assert!(err.is_err(), "unknown id accepted");
        // duplicates and unordered pairs collapse to one sorted edge
        let inst = Instance::new(
            demands,
            regimes,
            [
                ("b".to_string(), "a".to_string()),
                ("a".to_string(), "b".to_string()),
            ],
            1e-4,
        )
        .unwrap();
        assert_eq!(inst.conflict_edges().len(), 1);
        assert_eq!(
            inst.conflict_edges().iter().next().unwrap(),
            &("a".to_string(), "b".to_string())
        );
    }

    #[test]
    fn instance_json_round_trip() {
        let demands = vec![demand("a"), demand("b")];
        let regimes = vec![
            Regime::new(0, 3.0, 0.75, 1.0).unwrap(),
            Regime::new(1, 1.0, 0.25, 2.0).unwrap(),
        ];
        let inst = Instance::new(
            demands,
            regimes,
            [("b".to_string(), "a".to_string())],
            1e-4,
        )
        .unwrap();
        let text = inst.to_json().unwrap();
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(inst, back);
        assert!(text.contains("\"version\": 1"));
    }

    #[test]
    fn coverage_count_is_robust_to_rounding() {
        let p = DesignParams::new(0.8, 0.0, 100.0, 0.0, false).unwrap();
        assert_eq!(p.coverage_count(5), 4); // 0.8*5 must not ceil to 5
        let p = DesignParams::new(2.0 / 3.0, 0.0, 100.0, 0.0, false).unwrap();
        assert_eq!(p.coverage_count(3), 2);
        let p = DesignParams::new(1.0, 0.0, 100.0, 0.0, false).unwrap();
        assert_eq!(p.coverage_count(7), 7);
        let p = DesignParams::new(0.01, 0.0, 100.0, 0.0, false).unwrap();
        assert_eq!(p.coverage_count(3), 1);
    }

    #[test]
    fn tail_count_detects_degenerate_fraction() {
        let p = DesignParams::new(0.5, 0.95, 100.0, 0.0, false).unwrap();
        assert!(matches!(p.tail_count(10), Err(Error::DegenerateTail { .. })));
        assert_eq!(p.tail_count(40).unwrap(), 2);
        let p = DesignParams::new(0.5, 0.0, 100.0, 0.0, false).unwrap();
        assert_eq!(p.tail_count(10).unwrap(), 10);
    }

    #[test]
    fn plan_json_round_trip() {
        let plan = ServicePlan::new(vec![1.5, 2.5], vec![true, false, true], 12.25);
        let text = plan.to_json().unwrap();
        let back = ServicePlan::from_json(&text).unwrap();
        assert_eq!(plan, back);
    }
}
