use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use super::{rng_for, sample_index, unit_interval};
use crate::domain::{ProblemConfig, Request, RequestType};

const ARRIVAL_TAG: u64 = 0xa11;
const PICKUP_TAG: u64 = 0xb1c;

/// Raw randomness behind one prospective parcel's pickup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PickupDraw {
    /// Uniform bits mapped to the pickup day through the customer's law.
    pub day_bits: u64,
    /// Pickup slot `1..=T`.
    pub slot: usize,
}

/// Pre-drawn arrivals and pickup tags for one simulated instance.
///
/// The pickup draw of a parcel is keyed by the slot its request arrived in,
/// so policies that accept different subsets still give a given customer
/// the same pickup behaviour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioStream {
    pub seed: u64,
    pub instance: u64,
    pub days: u32,
    pub slots: usize,
    arrivals: Vec<RequestType>,
    pickups: Vec<PickupDraw>,
}

#[derive(Debug, Error, PartialEq)]
pub enum StreamParseError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("missing header")]
    MissingHeader,
    #[error("expected {expected} records, found {found}")]
    Count { expected: usize, found: usize },
}

/// Builds the stream for `instance`. The arrival law is the same in every
/// setting of an experiment, so the stream does not depend on the setting.
pub fn build_scenario_stream(cfg: &ProblemConfig, master: u64, instance: u64, days: u32) -> ScenarioStream {
    let n = days as usize * cfg.slots;
    let mut arrival_rng = rng_for(&[master, ARRIVAL_TAG, instance]);
    let mut pickup_rng = rng_for(&[master, PICKUP_TAG, instance]);
    let mut arrivals = Vec::with_capacity(n);
    let mut pickups = Vec::with_capacity(n);
    for _ in 0..n {
        let u = unit_interval(arrival_rng.random::<u64>());
        arrivals.push(RequestType::from(cfg.arrival.sample(u)));
        pickups.push(PickupDraw {
            day_bits: pickup_rng.random::<u64>(),
            slot: pickup_rng.random_range(1..=cfg.slots),
        });
    }
    ScenarioStream {
        seed: master,
        instance,
        days,
        slots: cfg.slots,
        arrivals,
        pickups,
    }
}

impl ScenarioStream {
    fn index(&self, day: u32, slot: usize) -> usize {
        assert!(day >= 1 && day <= self.days && slot >= 1 && slot <= self.slots);
        (day as usize - 1) * self.slots + slot - 1
    }

    pub fn request(&self, day: u32, slot: usize) -> RequestType {
        self.arrivals[self.index(day, slot)]
    }

    pub fn pickup_draw(&self, day: u32, slot: usize) -> PickupDraw {
        self.pickups[self.index(day, slot)]
    }

    /// Pickup `(b, q)` of the parcel whose request arrived at `(day, slot)`.
    pub fn pickup_tag(&self, cfg: &ProblemConfig, day: u32, slot: usize, customer: usize) -> (usize, usize) {
        let draw = self.pickup_draw(day, slot);
        let b = sample_index(&cfg.pickup.day[customer], unit_interval(draw.day_bits)) + 1;
        (b, draw.slot)
    }

    pub fn arrivals(&self) -> &[RequestType] {
        &self.arrivals
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# locker scenario stream v1\n");
        let _ = writeln!(
            out,
            "seed {} instance {} days {} slots {}",
            self.seed, self.instance, self.days, self.slots
        );
        for day in 1..=self.days {
            for slot in 1..=self.slots {
                let r = match self.request(day, slot) {
                    RequestType::NoArrival => "-".to_string(),
                    RequestType::Request(r) => format!("{},{},{}", r.customer + 1, r.size + 1, r.lead),
                };
                let p = self.pickup_draw(day, slot);
                let _ = writeln!(out, "{day} {slot} {r} {:016x} {}", p.day_bits, p.slot);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, StreamParseError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or(StreamParseError::MissingHeader)?;
        let err = |line: usize, msg: &str| StreamParseError::Line {
            line: line + 1,
            msg: msg.to_string(),
        };
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 8 || h[0] != "seed" || h[2] != "instance" || h[4] != "days" || h[6] != "slots" {
            return Err(err(hl, "bad header"));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| err(hl, "bad header number"));
        let (seed, instance, days, slots) = (num(h[1])?, num(h[3])?, num(h[5])? as u32, num(h[7])? as usize);
        let mut arrivals = Vec::new();
        let mut pickups = Vec::new();
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(err(ln, "expected 5 fields"));
            }
            let expected_pos = arrivals.len();
            let (day, slot): (usize, usize) = (
                f[0].parse().map_err(|_| err(ln, "bad day"))?,
                f[1].parse().map_err(|_| err(ln, "bad slot"))?,
            );
            if slots == 0 || day == 0 || slot == 0 || (day - 1) * slots + slot - 1 != expected_pos {
                return Err(err(ln, "records out of order"));
            }
            let request = if f[2] == "-" {
                RequestType::NoArrival
            } else {
                let parts: Vec<usize> = f[2]
                    .split(',')
                    .map(|x| x.parse().map_err(|_| err(ln, "bad request")))
                    .collect::<Result<_, _>>()?;
                if parts.len() != 3 || parts[0] == 0 || parts[1] == 0 {
                    return Err(err(ln, "bad request"));
                }
                RequestType::Request(Request {
                    customer: parts[0] - 1,
                    size: parts[1] - 1,
                    lead: parts[2],
                })
            };
            arrivals.push(request);
            pickups.push(PickupDraw {
                day_bits: u64::from_str_radix(f[3], 16).map_err(|_| err(ln, "bad pickup bits"))?,
                slot: f[4].parse().map_err(|_| err(ln, "bad pickup slot"))?,
            });
        }
        let expected = days as usize * slots;
        if arrivals.len() != expected {
            return Err(StreamParseError::Count {
                expected,
                found: arrivals.len(),
            });
        }
        Ok(Self {
            seed,
            instance,
            days,
            slots,
            arrivals,
            pickups,
        })
    }

    /// A stream with the given arrivals and fixed pickup draws, for tests
    /// and hand-built scenarios.
    pub fn from_parts(slots: usize, arrivals: Vec<RequestType>, pickups: Vec<PickupDraw>) -> Self {
        assert_eq!(arrivals.len(), pickups.len());
        assert_eq!(arrivals.len() % slots, 0);
        Self {
            seed: 0,
            instance: 0,
            days: (arrivals.len() / slots) as u32,
            slots,
            arrivals,
            pickups,
        }
    }
}
