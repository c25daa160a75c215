use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::event_tree::EventTree;
use super::LatticeTorus;
use crate::rates::RateModel;

/// Occupancy ceiling; creations beyond it abort the run.
pub const OCCUPANCY_CAP: u64 = 1 << 31;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("dead configuration: total rate is zero at t={t}")]
    DeadConfiguration { t: f64 },
    #[error("event budget of {budget} exceeded at t={t}")]
    EventBudgetExceeded {
        budget: u64,
        t: f64,
        partial: SimTrajectory,
    },
    #[error("occupancy overflow at site {site} (cap {OCCUPANCY_CAP})")]
    OccupancyOverflow { site: usize },
}

/// Occupation numbers on the torus with the cached total and current time.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub torus: LatticeTorus,
    pub eta: Vec<u64>,
    pub total: u64,
    pub time: f64,
}

impl Configuration {
    pub fn new(torus: LatticeTorus, eta: Vec<u64>) -> Self {
        assert_eq!(eta.len(), torus.sites());
        let total = eta.iter().sum();
        Self {
            torus,
            eta,
            total,
            time: 0.0,
        }
    }

    pub fn recomputed_total(&self) -> u64 {
        self.eta.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Glauber speed `K >= 0`.
    pub k: f64,
    pub seed: u64,
    pub t_end: f64,
    /// Snapshot cadence; `<= 0` records only the initial and final states.
    pub snapshot_every: f64,
    pub max_events: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSnapshot {
    pub t: f64,
    pub eta: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrajectory {
    pub torus: LatticeTorus,
    pub snapshots: Vec<SimSnapshot>,
    pub events: u64,
}

/// The kind of event applied by one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    /// One particle moved from the first site to the second.
    Jump(usize, usize),
    Create(usize),
    Annihilate(usize),
}

const CHANNELS: usize = 3;

/// Event-driven simulator for the generator `N^2 L_ZR + K L_G`.
///
/// Per-site rate aggregates live in a sum tree with three channels per site
/// (jump, create, annihilate); an event refreshes only the sites whose
/// Glauber windows touch the changed occupations.
pub struct Simulator {
    pub torus: LatticeTorus,
    model: RateModel,
    k: f64,
    /// `N^2 * 2d`, the total jump intensity multiplier per site.
    jump_scale: f64,
    tree: EventTree,
    pub config: Configuration,
    rng: ChaCha8Rng,
    events: u64,
    /// Sites whose rates depend on site `y`: `y` itself and `y - e_i`.
    dependents: Vec<Vec<usize>>,
    scratch: Vec<usize>,
}

impl Simulator {
    pub fn new(model: RateModel, config: Configuration, params: &SimParams) -> Self {
        assert!(params.k >= 0.0);
        let torus = config.torus;
        let n2 = (torus.side() as f64) * (torus.side() as f64);
        let jump_scale = n2 * 2.0 * torus.dim() as f64;

        let mut dependents = vec![Vec::with_capacity(4); torus.sites()];
        for y in 0..torus.sites() {
            dependents[y].push(y);
            for e in &model.glauber.offsets {
                let neg: Vec<i64> = e.iter().map(|&c| -c).collect();
                let site = torus.offset(y, &neg);
                if !dependents[y].contains(&site) {
                    dependents[y].push(site);
                }
            }
        }

        let mut weights = vec![0.0; torus.sites() * CHANNELS];
        for x in 0..torus.sites() {
            Self::site_weights(
                &model,
                &torus,
                &config.eta,
                x,
                params.k,
                jump_scale,
                &mut weights[x * CHANNELS..(x + 1) * CHANNELS],
            );
        }
        Self {
            torus,
            model,
            k: params.k,
            jump_scale,
            tree: EventTree::new(&weights),
            config,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            events: 0,
            dependents,
            scratch: Vec::with_capacity(8),
        }
    }

    fn site_weights(
        model: &RateModel,
        torus: &LatticeTorus,
        eta: &[u64],
        x: usize,
        k: f64,
        jump_scale: f64,
        out: &mut [f64],
    ) {
        out[0] = jump_scale * model.g.g(eta[x]);
        if k > 0.0 {
            let (cp, cm) = model.glauber.site_rates(&model.g, torus, eta, x);
            out[1] = k * cp;
            out[2] = k * cm;
        } else {
            out[1] = 0.0;
            out[2] = 0.0;
        }
    }

    fn refresh_after(&mut self, changed: &[usize]) {
        self.scratch.clear();
        for &y in changed {
            for &site in &self.dependents[y] {
                if !self.scratch.contains(&site) {
                    self.scratch.push(site);
                }
            }
        }
        let mut w = [0.0; CHANNELS];
        for i in 0..self.scratch.len() {
            let site = self.scratch[i];
            Self::site_weights(
                &self.model,
                &self.torus,
                &self.config.eta,
                site,
                self.k,
                self.jump_scale,
                &mut w,
            );
            for (c, &wc) in w.iter().enumerate() {
                self.tree.update(site * CHANNELS + c, wc);
            }
        }
    }

    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// One exact Gillespie step: exponential holding time at the total rate,
    /// then an event drawn proportionally to its rate.
    pub fn step(&mut self) -> Result<(Event, f64), SimError> {
        let total = self.tree.total();
        if !(total > 0.0) {
            return Err(SimError::DeadConfiguration {
                t: self.config.time,
            });
        }
        // u in (0, 1] so the log is finite.
        let u: f64 = 1.0 - self.rng.random::<f64>();
        let dt = -u.ln() / total;
        let target = self.rng.random::<f64>() * total;
        let leaf = self.tree.select(target);
        let (site, channel) = (leaf / CHANNELS, leaf % CHANNELS);

        let event = match channel {
            0 => {
                let dirs = 2 * self.torus.dim();
                let pick = self.rng.random_range(0..dirs);
                let (axis, dir) = (pick / 2, if pick % 2 == 0 { 1 } else { -1 });
                let dest = self.torus.neighbor(site, axis, dir);
                debug_assert!(self.config.eta[site] >= 1);
                self.config.eta[site] -= 1;
                self.config.eta[dest] += 1;
                if self.config.eta[dest] > OCCUPANCY_CAP {
                    return Err(SimError::OccupancyOverflow { site: dest });
                }
                Event::Jump(site, dest)
            }
            1 => {
                self.config.eta[site] += 1;
                self.config.total += 1;
                if self.config.eta[site] > OCCUPANCY_CAP {
                    return Err(SimError::OccupancyOverflow { site });
                }
                Event::Create(site)
            }
            _ => {
                debug_assert!(self.config.eta[site] >= 1);
                self.config.eta[site] -= 1;
                self.config.total -= 1;
                Event::Annihilate(site)
            }
        };
        self.config.time += dt;
        self.events += 1;
        match event {
            Event::Jump(a, b) => self.refresh_after(&[a, b]),
            Event::Create(a) | Event::Annihilate(a) => self.refresh_after(&[a]),
        }
        Ok((event, dt))
    }

    /// Run until `t_end`, recording snapshots at the configured cadence.
    ///
    /// Snapshot at time `s` is the state after all events with time `<= s`.
    /// An absorbing configuration (zero total rate) freezes the remaining
    /// snapshots. Deterministic for a fixed `(seed, params, eta0)`.
    pub fn run(&mut self, params: &SimParams) -> Result<SimTrajectory, SimError> {
        let snap_times = snapshot_times(params.t_end, params.snapshot_every);
        let mut snapshots = Vec::with_capacity(snap_times.len());
        let mut next = 0usize;
        // Initial state covers every snapshot time <= current time.
        while next < snap_times.len() && snap_times[next] <= self.config.time {
            snapshots.push(SimSnapshot {
                t: snap_times[next],
                eta: self.config.eta.clone(),
            });
            next += 1;
        }
        while next < snap_times.len() {
            if let Some(budget) = params.max_events {
                if self.events >= budget {
                    return Err(SimError::EventBudgetExceeded {
                        budget,
                        t: self.config.time,
                        partial: SimTrajectory {
                            torus: self.torus,
                            snapshots,
                            events: self.events,
                        },
                    });
                }
            }
            let total = self.tree.total();
            if !(total > 0.0) {
                // Absorbed: the state persists for all remaining times.
                while next < snap_times.len() {
                    snapshots.push(SimSnapshot {
                        t: snap_times[next],
                        eta: self.config.eta.clone(),
                    });
                    next += 1;
                }
                break;
            }
            let pre_event = self.config.eta.clone();
            let (_, dt) = self.step()?;
            let t_after = self.config.time;
            let t_before = t_after - dt;
            let _ = t_before;
            while next < snap_times.len() && snap_times[next] < t_after {
                snapshots.push(SimSnapshot {
                    t: snap_times[next],
                    eta: pre_event.clone(),
                });
                next += 1;
            }
            while next < snap_times.len() && snap_times[next] == t_after {
                snapshots.push(SimSnapshot {
                    t: snap_times[next],
                    eta: self.config.eta.clone(),
                });
                next += 1;
            }
        }
        self.config.time = params.t_end.max(self.config.time.min(params.t_end));
        Ok(SimTrajectory {
            torus: self.torus,
            snapshots,
            events: self.events,
        })
    }
}

fn snapshot_times(t_end: f64, every: f64) -> Vec<f64> {
    assert!(t_end >= 0.0);
    let mut times = vec![0.0];
    if every > 0.0 {
        let mut k = 1usize;
        loop {
            let t = k as f64 * every;
            if t >= t_end * (1.0 - 1e-12) {
                break;
            }
            times.push(t);
            k += 1;
        }
    }
    if t_end > 0.0 {
        times.push(t_end);
    }
    times
}

/// Total event rate `R = N^2 sum_x 2d g(eta_x) + K sum_x (c_x^+ + c_x^-)`,
/// recomputed from scratch (the simulator keeps it incrementally).
pub fn total_rate(model: &RateModel, config: &Configuration, k: f64) -> f64 {
    let torus = &config.torus;
    let n2 = (torus.side() as f64) * (torus.side() as f64);
    let mut rate = 0.0;
    for x in 0..torus.sites() {
        rate += n2 * 2.0 * torus.dim() as f64 * model.g.g(config.eta[x]);
        if k > 0.0 {
            let (cp, cm) = model.glauber.site_rates(&model.g, torus, &config.eta, x);
            rate += k * (cp + cm);
        }
    }
    rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{GlauberRateSpec, JumpRate};

    fn model_1d() -> RateModel {
        let spec =
            GlauberRateSpec::new(1.0, 0.2, 0.5, 0.8, GlauberRateSpec::default_offsets(1)).unwrap();
        RateModel::new(JumpRate::linear(), spec)
    }

    fn params(k: f64, t_end: f64) -> SimParams {
        SimParams {
            k,
            seed: 11,
            t_end,
            snapshot_every: t_end / 4.0,
            max_events: None,
        }
    }

    #[test]
    fn empty_configuration_total_rate_is_glauber_creation_only() {
        let model = model_1d();
        let torus = LatticeTorus::new(1, 8);
        let config = Configuration::new(torus, vec![0; 8]);
        let k = 3.0;
        let r = total_rate(&model, &config, k);
        // c+ on an empty configuration is C a- a* a+ / g(1) per site.
        let expected = k * 8.0 * 1.0 * 0.2 * 0.5 * 0.8 / model.g.g(1);
        assert!((r - expected).abs() < 1e-12, "{r} vs {expected}");
    }

    #[test]
    fn single_particle_zero_range_rate() {
        let model = model_1d();
        let torus = LatticeTorus::new(1, 6);
        let mut eta = vec![0u64; 6];
        eta[2] = 1;
        let config = Configuration::new(torus, eta);
        let r = total_rate(&model, &config, 0.0);
        assert!((r - 2.0 * 36.0).abs() < 1e-12); // 2d N^2 g(1)
    }

    #[test]
    fn zero_k_empty_is_dead() {
        let model = model_1d();
        let torus = LatticeTorus::new(1, 4);
        let config = Configuration::new(torus, vec![0; 4]);
        assert_eq!(total_rate(&model, &config, 0.0), 0.0);
        let mut sim = Simulator::new(model, config, &params(0.0, 1.0));
        assert!(matches!(
            sim.step(),
            Err(SimError::DeadConfiguration { .. })
        ));
    }

    #[test]
    fn events_conserve_or_change_total_by_one() {
        let model = model_1d();
        let torus = LatticeTorus::new(1, 8);
        let config = Configuration::new(torus, vec![1, 0, 2, 0, 3, 1, 0, 0]);
        let mut sim = Simulator::new(model, config, &params(2.0, 1.0));
        for _ in 0..500 {
            let before = sim.config.total;
            let (event, _) = sim.step().unwrap();
            let after = sim.config.recomputed_total();
            match event {
                Event::Jump(_, _) => assert_eq!(after, before),
                Event::Create(_) => assert_eq!(after, before + 1),
                Event::Annihilate(_) => assert_eq!(after, before - 1),
            }
            assert_eq!(sim.config.total, after, "cached total out of sync");
        }
    }

    #[test]
    fn same_seed_gives_identical_trajectories() {
        let model = model_1d();
        let torus = LatticeTorus::new(1, 8);
        let eta = vec![1u64, 2, 0, 1, 0, 0, 3, 1];
        let p = params(2.0, 0.01);
        let run1 = Simulator::new(model.clone(), Configuration::new(torus, eta.clone()), &p)
            .run(&p)
            .unwrap();
        let run2 = Simulator::new(model, Configuration::new(torus, eta), &p)
            .run(&p)
            .unwrap();
        assert_eq!(run1, run2);
    }

    #[test]
    fn zero_horizon_records_initial_state_only() {
        let model = model_1d();
        let torus = LatticeTorus::new(1, 4);
        let eta = vec![1u64, 0, 0, 2];
        let p = SimParams {
            k: 1.0,
            seed: 5,
            t_end: 0.0,
            snapshot_every: 0.1,
            max_events: None,
        };
        let traj = Simulator::new(model, Configuration::new(torus, eta.clone()), &p)
            .run(&p)
            .unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.snapshots[0].eta, eta);
    }

    #[test]
    fn event_budget_returns_partial_trajectory() {
        let model = model_1d();
        let torus = LatticeTorus::new(1, 8);
        let eta = vec![2u64; 8];
        let p = SimParams {
            k: 1.0,
            seed: 5,
            t_end: 10.0,
            snapshot_every: 0.0,
            max_events: Some(50),
        };
        match Simulator::new(model, Configuration::new(torus, eta), &p).run(&p) {
            Err(SimError::EventBudgetExceeded { budget, partial, .. }) => {
                assert_eq!(budget, 50);
                assert!(!partial.snapshots.is_empty());
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn two_site_single_particle_is_symmetric() {
        // K = 0, one particle on a 2-site torus: occupation of site 0 is a
        // fair coin in the jump chain.
        let model = model_1d();
        let torus = LatticeTorus::new(1, 2);
        let config = Configuration::new(torus, vec![1, 0]);
        let p = params(0.0, 1e9);
        let mut sim = Simulator::new(model, config, &p);
        let n = 40_000;
        let mut at_zero = 0usize;
        for _ in 0..n {
            sim.step().unwrap();
            if sim.config.eta[0] == 1 {
                at_zero += 1;
            }
        }
        let frac = at_zero as f64 / n as f64;
        // After each jump the particle alternates deterministically in
        // position distribution; 3 sigma of a fair Bernoulli mean.
        let band = 3.0 * 0.5 / (n as f64).sqrt();
        assert!((frac - 0.5).abs() < band, "fraction {frac}");
    }
}
