use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::state::Request;

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Shape(String),
    #[error("{table} sums to {sum}, expected 1")]
    NotNormalized { table: String, sum: f64 },
    #[error("{table} has a negative or non-finite entry")]
    BadProbability { table: String },
    #[error("priority weight of customer type {0} must be positive")]
    BadPriority(usize),
}

/// Independent per-slot request law: customer type, then size and lead
/// time conditional on the customer type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalLaw {
    /// `customer[c]`: probability that a type-c customer arrives in a slot.
    pub customer: Vec<f64>,
    /// `size[c][d]`.
    pub size: Vec<Vec<f64>>,
    /// `lead[c][e-1]`.
    pub lead: Vec<Vec<f64>>,
}

impl ArrivalLaw {
    pub fn no_arrival(&self) -> f64 {
        (1.0 - self.customer.iter().sum::<f64>()).max(0.0)
    }

    pub fn request_probability(&self, r: &Request) -> f64 {
        self.customer[r.customer] * self.size[r.customer][r.size] * self.lead[r.customer][r.lead - 1]
    }

    /// Inverse-CDF draw over request types in (c, d, e) order, with
    /// no-arrival last.
    pub fn sample(&self, u: f64) -> Option<Request> {
        let mut acc = 0.0;
        for (c, &pc) in self.customer.iter().enumerate() {
            for (d, &pd) in self.size[c].iter().enumerate() {
                for (e, &pe) in self.lead[c].iter().enumerate() {
                    acc += pc * pd * pe;
                    if u < acc {
                        return Some(Request {
                            customer: c,
                            size: d,
                            lead: e + 1,
                        });
                    }
                }
            }
        }
        None
    }
}

/// Pickup-day law per customer type: `day[c][b-1]`; the pickup slot is
/// uniform over the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickupLaw {
    pub day: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    /// Compartments per size, smallest size first.
    pub compartments: Vec<u32>,
    /// Priority weight per customer type.
    pub priority: Vec<f64>,
    /// Longest lead time; also the pending-order horizon.
    pub max_lead: usize,
    /// Longest storage time in days.
    pub max_storage: usize,
    /// Request slots per day.
    pub slots: usize,
    pub arrival: ArrivalLaw,
    pub pickup: PickupLaw,
}

fn check_distribution(table: String, p: &[f64]) -> Result<(), ConfigError> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(ConfigError::BadProbability { table });
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(ConfigError::NotNormalized { table, sum });
    }
    Ok(())
}

impl ProblemConfig {
    pub fn sizes(&self) -> usize {
        self.compartments.len()
    }

    pub fn customers(&self) -> usize {
        self.priority.len()
    }

    /// Pending-order horizon F.
    pub fn horizon(&self) -> usize {
        self.max_lead
    }

    /// Horizon used by the value features, F + B - 1.
    pub fn extended_horizon(&self) -> usize {
        self.max_lead + self.max_storage - 1
    }

    pub fn feature_len(&self) -> usize {
        1 + self.sizes() * self.extended_horizon()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let (d, c) = (self.sizes(), self.customers());
        if d == 0 || c == 0 {
            return Err(ConfigError::Shape("need at least one size and one customer type".into()));
        }
        if self.max_lead == 0 || self.max_storage == 0 || self.slots == 0 {
            return Err(ConfigError::Shape("lead, storage and slots must be positive".into()));
        }
        for (i, m) in self.priority.iter().enumerate() {
            if !(m.is_finite() && *m > 0.0) {
                return Err(ConfigError::BadPriority(i));
            }
        }
        let a = &self.arrival;
        if a.customer.len() != c || a.size.len() != c || a.lead.len() != c || self.pickup.day.len() != c {
            return Err(ConfigError::Shape("per-customer tables must have one row per customer type".into()));
        }
        let mut with_none = a.customer.clone();
        with_none.push(1.0 - a.customer.iter().sum::<f64>());
        check_distribution("arrival.customer plus no-arrival".into(), &with_none)?;
        for ci in 0..c {
            if a.size[ci].len() != d || a.lead[ci].len() != self.max_lead {
                return Err(ConfigError::Shape(format!("arrival row {ci} has wrong length")));
            }
            if self.pickup.day[ci].len() != self.max_storage {
                return Err(ConfigError::Shape(format!("pickup row {ci} has wrong length")));
            }
            check_distribution(format!("arrival.size[{ci}]"), &a.size[ci])?;
            check_distribution(format!("arrival.lead[{ci}]"), &a.lead[ci])?;
            check_distribution(format!("pickup.day[{ci}]"), &self.pickup.day[ci])?;
        }
        Ok(())
    }

    /// Population-weighted pickup-day law.
    pub fn aggregated_pickup(&self) -> Vec<f64> {
        let total: f64 = self.arrival.customer.iter().sum();
        let mut agg = vec![0.0; self.max_storage];
        for (c, &pc) in self.arrival.customer.iter().enumerate() {
            for (b, &p) in self.pickup.day[c].iter().enumerate() {
                agg[b] += pc / total * p;
            }
        }
        agg
    }

    pub fn all_requests(&self) -> Vec<Request> {
        let mut out = Vec::new();
        for c in 0..self.customers() {
            for d in 0..self.sizes() {
                for e in 1..=self.max_lead {
                    out.push(Request {
                        customer: c,
                        size: d,
                        lead: e,
                    });
                }
            }
        }
        out
    }
}

/// Pickup behaviour variants of the experimental grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PickupScenario {
    /// Identical behaviour for both customer types.
    Identical,
    /// Premium customers pick up faster.
    PremiumFast,
    /// Premium customers pick up much faster and standard ones later.
    PremiumUrgent,
}

impl PickupScenario {
    pub const ALL: [PickupScenario; 3] = [
        PickupScenario::Identical,
        PickupScenario::PremiumFast,
        PickupScenario::PremiumUrgent,
    ];

    pub fn code(self) -> &'static str {
        match self {
            PickupScenario::Identical => "id",
            PickupScenario::PremiumFast => "pf",
            PickupScenario::PremiumUrgent => "pu",
        }
    }

    pub fn table(self) -> Vec<Vec<f64>> {
        match self {
            PickupScenario::Identical => vec![vec![0.6, 0.2, 0.2], vec![0.6, 0.2, 0.2]],
            PickupScenario::PremiumFast => vec![vec![0.8, 0.1, 0.1], vec![0.5, 0.25, 0.25]],
            PickupScenario::PremiumUrgent => vec![vec![0.94, 0.04, 0.02], vec![0.43, 0.28, 0.29]],
        }
    }
}

/// One cell of the settings grid: premium priority weight and pickup law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Setting {
    pub premium_weight: u32,
    pub pickup: PickupScenario,
}

impl Setting {
    pub fn grid() -> Vec<Setting> {
        let mut out = Vec::new();
        for m in 1..=3 {
            for p in PickupScenario::ALL {
                out.push(Setting {
                    premium_weight: m,
                    pickup: p,
                });
            }
        }
        out
    }

    pub fn name(&self) -> String {
        format!("{}{}", self.premium_weight, self.pickup.code())
    }

    pub fn parse(s: &str) -> Option<Setting> {
        let (m, p) = s.split_at(1);
        let premium_weight: u32 = m.parse().ok()?;
        let pickup = PickupScenario::ALL.into_iter().find(|x| x.code() == p)?;
        Some(Setting {
            premium_weight,
            pickup,
        })
    }
}

/// Locker dimensions and demand shared by every setting of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub compartments: Vec<u32>,
    pub slots: usize,
}

impl Layout {
    pub fn main() -> Self {
        Self {
            compartments: vec![15, 10, 5],
            slots: 20,
        }
    }

    pub fn desk() -> Self {
        Self {
            compartments: vec![4, 3, 2],
            slots: 10,
        }
    }

    /// Two customer types, three sizes, lead times up to five days, storage
    /// up to three days.
    pub fn config(&self, setting: Setting) -> ProblemConfig {
        let total: f64 = self.compartments.iter().map(|&q| q as f64).sum();
        let size: Vec<f64> = self.compartments.iter().map(|&q| q as f64 / total).collect();
        ProblemConfig {
            compartments: self.compartments.clone(),
            priority: vec![setting.premium_weight as f64, 1.0],
            max_lead: 5,
            max_storage: 3,
            slots: self.slots,
            arrival: ArrivalLaw {
                customer: vec![0.3, 0.6],
                size: vec![size.clone(), size],
                lead: vec![vec![1.0, 0.0, 0.0, 0.0, 0.0], vec![0.2, 0.2, 0.3, 0.2, 0.1]],
            },
            pickup: PickupLaw {
                day: setting.pickup.table(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_settings_validate_and_keep_population_law() {
        for s in Setting::grid() {
            let cfg = Layout::main().config(s);
            cfg.validate().unwrap();
            let agg = cfg.aggregated_pickup();
            for (a, e) in agg.iter().zip([0.6, 0.2, 0.2]) {
                assert!((a - e).abs() < 1e-12, "{} {agg:?}", s.name());
            }
        }
    }

    #[test]
    fn main_marginals() {
        let cfg = Layout::main().config(Setting::parse("1id").unwrap());
        assert!((cfg.arrival.no_arrival() - 0.1).abs() < 1e-12);
        assert!((cfg.arrival.size[0][0] - 0.5).abs() < 1e-12);
        assert!((cfg.arrival.size[0][1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((cfg.arrival.size[0][2] - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(cfg.feature_len(), 22);
    }

    #[test]
    fn setting_names_round_trip() {
        for s in Setting::grid() {
            assert_eq!(Setting::parse(&s.name()), Some(s));
        }
        assert_eq!(Setting::parse("4xx"), None);
    }

    #[test]
    fn rejects_unnormalized_pickup() {
        let mut cfg = Layout::main().config(Setting::parse("1id").unwrap());
        cfg.pickup.day[1] = vec![0.5, 0.5, 0.5];
        assert!(matches!(cfg.validate(), Err(ConfigError::NotNormalized { .. })));
    }

    #[test]
    fn sampling_covers_no_arrival_tail() {
        let cfg = Layout::main().config(Setting::parse("1id").unwrap());
        assert!(cfg.arrival.sample(0.95).is_none());
        let r = cfg.arrival.sample(0.0).unwrap();
        assert_eq!((r.customer, r.size, r.lead), (0, 0, 1));
    }
}
