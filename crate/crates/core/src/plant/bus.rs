use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BusConfig {
    /// s
    pub latency: f64,
    /// s
    pub jitter_sd: f64,
    pub drop_probability: f64,
    pub seed: u64,
}

impl Default for BusConfig {
    fn default() -> Self {
        BusConfig {
            latency: 0.0,
            jitter_sd: 0.0,
            drop_probability: 0.0,
            seed: 0,
        }
    }
}

impl BusConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.latency >= 0.0 && self.jitter_sd >= 0.0) {
            return Err(Error::invalid("bus", "latency and jitter must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.drop_probability) {
            return Err(Error::invalid("bus.drop_probability", "must lie in [0, 1)"));
        }
        if self.latency + 4.0 * self.jitter_sd >= 0.1 {
            return Err(Error::invalid("bus", "latency + 4 jitter_sd must stay below 0.1 s"));
        }
        Ok(())
    }

    pub fn latency_ticks(&self, dt: f64) -> usize {
        (self.latency / dt).round() as usize
    }
}

/// One-directional delayed link. Messages are stamped with the tick they
/// were sent on and become visible once their delivery tick is reached;
/// the receiver always sees the newest message delivered so far.
#[derive(Debug, Clone)]
pub struct DelayBus<T> {
    config: BusConfig,
    dt: f64,
    rng: ChaCha8Rng,
    pending: Vec<(usize, usize, T)>,
    latest: Option<(usize, T)>,
}

impl<T: Clone> DelayBus<T> {
    /// `stream` separates the random streams of the two directions.
    pub fn new(config: BusConfig, dt: f64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(stream);
        DelayBus {
            config,
            dt,
            rng,
            pending: Vec::new(),
            latest: None,
        }
    }

    /// Seed the receiver with a message as if delivered at `tick`.
    pub fn prime(&mut self, tick: usize, msg: T) {
        self.latest = Some((tick, msg));
    }

    pub fn send(&mut self, tick: usize, msg: T) {
        let c = &self.config;
        if c.drop_probability > 0.0 && self.rng.random::<f64>() < c.drop_probability {
            return;
        }
        let mut delay = c.latency;
        if c.jitter_sd > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            delay = (delay + c.jitter_sd * z).max(0.0);
        }
        let deliver = tick + (delay / self.dt).round() as usize;
        self.pending.push((deliver, tick, msg));
    }

    /// Newest message delivered by `tick`, with the tick it was sent on.
    pub fn receive(&mut self, tick: usize) -> Option<(usize, &T)> {
        let mut i = 0;
        while i < self.pending.len() {
            if self.pending[i].0 <= tick {
                let (_, sent, msg) = self.pending.swap_remove(i);
                if self.latest.as_ref().is_none_or(|(s, _)| sent >= *s) {
                    self.latest = Some((sent, msg));
                }
            } else {
                i += 1;
            }
        }
        self.latest.as_ref().map(|(s, m)| (*s, m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed(latency_ticks: usize) -> Vec<usize> {
        let dt = 0.003;
        let cfg = BusConfig {
            latency: latency_ticks as f64 * dt,
            ..BusConfig::default()
        };
        let mut bus = DelayBus::new(cfg, dt, 0);
        bus.prime(0, 0usize);
        (0..50)
            .map(|tick| {
                bus.send(tick, tick);
                *bus.receive(tick).unwrap().1
            })
            .collect()
    }

    #[test]
    fn one_tick_latency_is_a_shift() {
        let a = feed(0);
        let b = feed(1);
        assert_eq!(a[..49], b[1..]);
    }

    #[test]
    fn causality() {
        for lat in 0..5 {
            for (tick, seen) in feed(lat).into_iter().enumerate() {
                assert!(seen + lat <= tick.max(lat) || seen == 0);
                assert!(tick < lat || seen == tick - lat);
            }
        }
    }

    #[test]
    fn drops_hold_latest() {
        let cfg = BusConfig {
            drop_probability: 0.5,
            seed: 3,
            ..BusConfig::default()
        };
        let mut bus = DelayBus::new(cfg, 0.003, 1);
        bus.prime(0, 0usize);
        let mut last = 0;
        for tick in 1..200 {
            bus.send(tick, tick);
            let (sent, &v) = bus.receive(tick).unwrap();
            assert_eq!(sent, v);
            assert!(v >= last && v <= tick);
            last = v;
        }
    }

    #[test]
    fn rejects_large_latency() {
        let cfg = BusConfig {
            latency: 0.08,
            jitter_sd: 0.01,
            ..BusConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
