mod stream;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::domain::ProblemConfig;

pub use stream::{build_scenario_stream, PickupDraw, ScenarioStream, StreamParseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochasticError {
    #[error("customer {customer} cannot still hold a parcel at dwell {dwell}, slot {slot}")]
    DegenerateSurvival {
        customer: usize,
        dwell: usize,
        slot: usize,
    },
    #[error("dwell {0} outside 1..B-1")]
    DwellOutOfRange(usize),
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hierarchical seed derivation: order-sensitive hash of the parts.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6a09_e667_f3bc_c909, |acc, &p| mix(acc ^ mix(p)))
}

pub fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

/// Maps 64 random bits to `[0, 1)` using the top 53 bits.
pub fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF index draw; falls back to the last positive entry.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Slot to use for the residual law of a post-decision state. After the
/// day shift the next day's pickups have not started yet.
pub fn elapsed_slots(cfg: &ProblemConfig, slot: usize) -> usize {
    if slot > cfg.slots {
        0
    } else {
        slot
    }
}

/// Law of the pickup day `β` of a type-c parcel with dwell `h` that is
/// still in the locker after `t` slots of the current day have elapsed.
/// Index `β - 1`; entries below `h` are zero.
pub fn residual_pickup_distribution(
    cfg: &ProblemConfig,
    customer: usize,
    dwell: usize,
    t: usize,
) -> Result<Vec<f64>, StochasticError> {
    let b_max = cfg.max_storage;
    if dwell == 0 || dwell >= b_max {
        return Err(StochasticError::DwellOutOfRange(dwell));
    }
    let law = &cfg.pickup.day[customer];
    let remaining_today = cfg.slots.saturating_sub(t) as f64 / cfg.slots as f64;
    let mut w = vec![0.0; b_max];
    w[dwell - 1] = law[dwell - 1] * remaining_today;
    for b in dwell + 1..=b_max {
        w[b - 1] = law[b - 1];
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(StochasticError::DegenerateSurvival {
            customer,
            dwell,
            slot: t,
        });
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

/// Draws a pickup day and slot conditional on survival to `(dwell, t)`.
pub fn sample_residual_tag(
    cfg: &ProblemConfig,
    customer: usize,
    dwell: usize,
    t: usize,
    rng: &mut impl Rng,
) -> Result<(usize, usize), StochasticError> {
    let law = residual_pickup_distribution(cfg, customer, dwell, t)?;
    let beta = sample_index(&law, rng.random::<f64>()) + 1;
    let q = if beta == dwell {
        rng.random_range(t + 1..=cfg.slots)
    } else {
        rng.random_range(1..=cfg.slots)
    };
    Ok((beta, q))
}

/// Unconditional pickup day of a type-c parcel.
pub fn sample_pickup_day(cfg: &ProblemConfig, customer: usize, rng: &mut impl Rng) -> usize {
    sample_index(&cfg.pickup.day[customer], rng.random::<f64>()) + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Layout, Setting};

    fn cfg(setting: &str) -> ProblemConfig {
        Layout::main().config(Setting::parse(setting).unwrap())
    }

    #[test]
    fn residual_at_end_of_day_drops_today() {
        let c = cfg("1id");
        let p = residual_pickup_distribution(&c, 0, 1, c.slots).unwrap();
        assert_eq!(p, vec![0.0, 0.5, 0.5]);
    }

    #[test]
    fn residual_mid_day() {
        let c = cfg("1id");
        let p = residual_pickup_distribution(&c, 1, 1, 10).unwrap();
        let expected = [0.3 / 0.7, 0.2 / 0.7, 0.2 / 0.7];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn residual_last_tracked_dwell_with_point_mass() {
        let mut c = cfg("1id");
        c.pickup.day[0] = vec![0.0, 0.0, 1.0];
        let p = residual_pickup_distribution(&c, 0, 2, 5).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 1.0]);
        c.pickup.day[0] = vec![0.0, 1.0, 0.0];
        assert!(residual_pickup_distribution(&c, 0, 2, c.slots).is_err());
        assert!(residual_pickup_distribution(&c, 0, 3, 1).is_err());
    }

    #[test]
    fn seeds_are_order_sensitive() {
        assert_ne!(derive_seed(&[1, 2]), derive_seed(&[2, 1]));
        assert_eq!(derive_seed(&[7, 8, 9]), derive_seed(&[7, 8, 9]));
        assert_ne!(derive_seed(&[0]), derive_seed(&[0, 0]));
    }

    #[test]
    fn unit_interval_bounds() {
        assert_eq!(unit_interval(0), 0.0);
        assert!(unit_interval(u64::MAX) < 1.0);
    }

    #[test]
    fn residual_tag_respects_survival() {
        let c = cfg("2pu");
        let mut rng = rng_for(&[3]);
        for _ in 0..2000 {
            let (beta, q) = sample_residual_tag(&c, 1, 1, 12, &mut rng).unwrap();
            assert!(beta >= 1);
            if beta == 1 {
                assert!(q > 12);
            }
        }
    }
}
