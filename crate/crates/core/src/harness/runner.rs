use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::seeds::{stream_rng, Stream};
use super::trace::{EpisodeTrace, TraceRow};
use super::{Baseline, Event, Scenario};
use crate::agent::{critic_batch, critic_values, Ca2cAgent, CcEvaluator, Experience};
use crate::alloc::{allocate_rbs, enumerate_cc_vectors, select_cc, CcVector, CcVectorSet};
use crate::env::{env_step, AllocationState, CsiError, NetworkConfig, QosState, StepOutcome};
use crate::error::Result;
use crate::reward::gnb_reward;

struct Cell {
    ues: Vec<usize>,
    set: CcVectorSet,
    agent: Option<Ca2cAgent>,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    cc_rng: ChaCha8Rng,
    state: QosState,
    prev_alpha: CcVector,
    prev_reward: f64,
}

impl Cell {
    fn active(&self, active: &[bool]) -> Vec<bool> {
        self.ues.iter().map(|&u| active[u]).collect()
    }

    fn local_state(&self, global: &QosState, active: &[bool]) -> QosState {
        QosState(self.ues.iter().map(|&u| active[u] && global.bit(u)).collect())
    }
}

/// Reward of gNB `b` over its active UEs, from the rates its agent observes.
fn cell_reward(cfg: &NetworkConfig, cell: &Cell, active: &[bool], out: &StepOutcome) -> Result<f64> {
    let ues: Vec<usize> = cell.ues.iter().copied().filter(|&u| active[u]).collect();
    let pick = |v: &[f64]| ues.iter().map(|&u| v[u]).collect::<Vec<_>>();
    let distances: Vec<f64> = ues.iter().map(|&u| cfg.serving_distance(u)).collect();
    let params: Vec<_> = ues.iter().map(|&u| cfg.penalty[u]).collect();
    Ok(gnb_reward(
        &pick(&out.observed_rates),
        &pick(&out.p_si),
        &distances,
        &params,
        cfg.cell_radius,
        cfg.penalty_scale,
    )?
    .reward)
}

fn step_with(
    alloc: &AllocationState,
    cfg: &NetworkConfig,
    csi: Option<&CsiError>,
    cycle_rng: &ChaCha8Rng,
) -> Result<StepOutcome> {
    let mut rng = cycle_rng.clone();
    env_step(alloc, cfg, csi.map(|e| (e, &mut rng)))
}

/// Runs the scenario with the algorithm named by `scenario.baseline`.
pub fn run_experiment(scenario: &Scenario, seed: u64) -> Result<EpisodeTrace> {
    run_experiment_with_progress(scenario, seed, |_, _| {})
}

/// As [`run_experiment`]; `progress(episode, seconds)` fires after each
/// episode (1-based).
pub fn run_experiment_with_progress<F>(scenario: &Scenario, seed: u64, mut progress: F) -> Result<EpisodeTrace>
where
    F: FnMut(usize, f64),
{
    scenario.validate()?;
    let mut cfg = scenario.effective_network();
    let hyper = &scenario.agent;
    let baseline = scenario.baseline;
    let hard_avoid = scenario.hard_avoid();
    let k = cfg.num_ues();

    let mut cells = Vec::with_capacity(cfg.num_gnbs());
    for b in 0..cfg.num_gnbs() {
        let ues = cfg.ues_of(b);
        let set = enumerate_cc_vectors(cfg.num_ccs, ues.len(), cfg.rb_resolution)?;
        let agent = if baseline.learns() {
            let mut init = stream_rng(seed, Stream::AgentInit(b));
            Some(Ca2cAgent::new(b, ues.len(), set.total_bits(), cfg.p_max, hyper.clone(), &mut init)?)
        } else {
            None
        };
        cells.push(Cell {
            state: QosState(vec![false; ues.len()]),
            ues,
            set,
            agent,
            explore_rng: stream_rng(seed, Stream::AgentExplore(b)),
            replay_rng: stream_rng(seed, Stream::AgentReplay(b)),
            cc_rng: stream_rng(seed, Stream::CcExplore(b)),
            prev_alpha: CcVector(0),
            prev_reward: 0.0,
        });
    }

    let mut csi_master = stream_rng(seed, Stream::Csi);
    let mut csi = scenario.csi_error;
    let mut active = vec![true; k];
    let mut alloc = AllocationState::for_config(&cfg);
    let mut trace = EpisodeTrace::default();
    trace.rows.reserve(hyper.episodes * hyper.cycles_per_episode * k);

    for episode in 0..hyper.episodes {
        for ev in scenario.events.iter().filter(|ev| ev.after_episode == episode) {
            match ev.event {
                Event::UeExit { ue } => active[ue] = false,
                Event::UeJoin { ue } => active[ue] = true,
                Event::SetQHat { ue, bits } => cfg.q_hat[ue] = bits,
                Event::SetCsiError { bias_db, std_db } => csi = Some(CsiError { bias_db, std_db }),
            }
        }
        alloc.active.clone_from(&active);
        let started = Instant::now();
        let noise_std = hyper.power_noise_std(episode, cfg.p_max);
        let eps = hyper.epsilon_at(episode);

        for cycle in 0..hyper.cycles_per_episode {
            let cycle_rng = ChaCha8Rng::seed_from_u64(csi_master.random());
            let mut decisions = Vec::with_capacity(cells.len());
            for cell in cells.iter_mut() {
                let slot_active = cell.active(&active);
                let powers: Vec<f64> = match &cell.agent {
                    Some(agent) => agent
                        .actor_act(&cell.state, cell.prev_alpha, cell.prev_reward, noise_std, &mut cell.explore_rng)?
                        .into_iter()
                        .zip(&slot_active)
                        .map(|(p, &on)| if on { p } else { 0.0 })
                        .collect(),
                    None => slot_active.iter().map(|&on| if on { cfg.p_max } else { 0.0 }).collect(),
                };

                let candidates: Vec<CcVector> = match baseline {
                    Baseline::Era | Baseline::DdpgOnly => vec![cell.set.all_ones(&slot_active)],
                    Baseline::Ca2c | Baseline::Ha => {
                        let mut c = cell.set.constrained(&slot_active);
                        if let (true, Some(j)) = (hard_avoid, cfg.si_cc) {
                            c.retain(|&v| (0..cell.ues.len()).all(|s| !cell.set.cc_selected(v, s, j)));
                        }
                        c
                    }
                };

                let explore = candidates.len() > 1 && cell.agent.is_some() && cell.cc_rng.random::<f64>() < eps;
                let alpha = if explore {
                    *candidates.choose(&mut cell.cc_rng).expect("non-empty candidate set")
                } else if candidates.len() == 1 {
                    candidates[0]
                } else {
                    match (hyper.cc_eval, &cell.agent) {
                        (CcEvaluator::Critic, Some(agent)) => {
                            let rows: Vec<_> = candidates.iter().map(|&v| (cell.state.clone(), powers.clone(), v)).collect();
                            let q = critic_values(agent, critic_batch(agent, &rows)?.view())?;
                            let mut it = q.into_iter();
                            select_cc(|_| Ok(it.next().unwrap()), &candidates)?.0
                        }
                        _ => {
                            let mut trial = alloc.clone();
                            select_cc(
                                |v| {
                                    allocate_rbs(v, &cell.set, &cell.ues, &slot_active, &cfg)?.apply(&powers, &mut trial)?;
                                    let out = step_with(&trial, &cfg, csi.as_ref(), &cycle_rng)?;
                                    cell_reward(&cfg, cell, &active, &out)
                                },
                                &candidates,
                            )?
                            .0
                        }
                    }
                };
                allocate_rbs(alpha, &cell.set, &cell.ues, &slot_active, &cfg)?.apply(&powers, &mut alloc)?;
                decisions.push((powers, alpha, slot_active));
            }

            let out = step_with(&alloc, &cfg, csi.as_ref(), &cycle_rng)?;
            let mut rewards = vec![0.0; cells.len()];
            for (b, (cell, (powers, alpha, slot_active))) in cells.iter_mut().zip(decisions).enumerate() {
                let reward = cell_reward(&cfg, cell, &active, &out)?;
                let next_state = cell.local_state(&out.state, &active);
                if let Some(agent) = cell.agent.as_mut() {
                    agent.store(Experience {
                        state: cell.state.clone(),
                        prev_alpha: cell.prev_alpha,
                        prev_reward: cell.prev_reward,
                        action_power: powers,
                        action_alpha: alpha,
                        reward,
                        next_state: next_state.clone(),
                        active: slot_active,
                    });
                }
                cell.state = next_state;
                cell.prev_alpha = alpha;
                cell.prev_reward = reward;
                rewards[b] = reward;
            }

            for ue in (0..k).filter(|&u| active[u]) {
                let m = &out.metrics[ue];
                let gnb = cfg.serving_gnb[ue];
                trace.rows.push(
                    TraceRow {
                        episode: episode + 1,
                        cycle: cycle + 1,
                        gnb,
                        ue,
                        num_cc: m.num_cc,
                        rb_cc1: m.rb_cc1,
                        rb_cc2: m.rb_cc2,
                        rb_total: m.rb_total,
                        p_total_w: m.p_total,
                        p_cc1_w: m.p_cc1,
                        p_cc2_w: m.p_cc2,
                        p_si_w: m.p_si,
                        rate_bps: m.rate,
                        state_bit: m.state_bit,
                        reward: rewards[gnb],
                    }
                    .rounded(),
                );
            }
        }

        for cell in cells.iter_mut() {
            if let Some(agent) = cell.agent.as_mut() {
                for _ in 0..hyper.train_steps_per_episode {
                    agent.train(&mut cell.replay_rng)?;
                }
            }
        }
        let secs = started.elapsed().as_secs_f64();
        trace.episode_seconds.push(secs);
        progress(episode + 1, secs);
    }
    Ok(trace)
}

/// Equal resource allocation: every CC on, RBs split evenly, `p_max` per UE.
pub fn baseline_era(scenario: &Scenario, seed: u64) -> Result<EpisodeTrace> {
    let mut s = scenario.clone();
    s.baseline = Baseline::Era;
    run_experiment(&s, seed)
}

/// Every CC on; powers learned by the actor-critic.
pub fn baseline_ddpg_only(scenario: &Scenario, seed: u64) -> Result<EpisodeTrace> {
    let mut s = scenario.clone();
    s.baseline = Baseline::DdpgOnly;
    run_experiment(&s, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{write_csv, ScheduledEvent, SiMode};

    fn small(ues: &[f64]) -> Scenario {
        let mut s = Scenario::new("t", NetworkConfig::single_cell(ues));
        s.agent.episodes = 3;
        s.agent.cycles_per_episode = 4;
        s.agent.batch_size = 4;
        s
    }

    fn csv(t: &EpisodeTrace) -> Vec<u8> {
        let mut buf = Vec::new();
        write_csv(t, &mut buf).unwrap();
        buf
    }

    #[test]
    fn deterministic_given_seed() {
        let s = small(&[25.0, 25.0]);
        let a = run_experiment(&s, 7).unwrap();
        let b = run_experiment(&s, 7).unwrap();
        assert_eq!(csv(&a), csv(&b));
        let c = run_experiment(&s, 8).unwrap();
        assert_ne!(csv(&a), csv(&c));
        assert_eq!(a.rows.len(), 3 * 4 * 2);
    }

    #[test]
    fn hard_avoidance_never_uses_the_si_carrier() {
        let mut s = small(&[25.0]);
        s.si_mode = SiMode::HardAvoid;
        s.network.rb_resolution = 2;
        let t = run_experiment(&s, 1).unwrap();
        assert!(t.rows.iter().all(|r| r.rb_cc2 == 0 && r.p_si_w == 0.0 && r.rb_cc1 == 50));
    }

    #[test]
    fn era_is_static() {
        let s = small(&[25.0, 35.0]);
        let t = baseline_era(&s, 3).unwrap();
        for r in &t.rows {
            assert_eq!((r.rb_cc1, r.rb_cc2, r.num_cc), (25, 25, 2));
            assert_eq!(r.p_total_w, 0.5);
        }
        let first: Vec<f64> = t.rows.iter().filter(|r| r.episode == 1).map(|r| r.rate_bps).collect();
        let last: Vec<f64> = t.rows.iter().filter(|r| r.episode == 3).map(|r| r.rate_bps).collect();
        assert_eq!(first, last);
    }

    #[test]
    fn ddpg_only_keeps_every_carrier_on() {
        let s = small(&[25.0, 35.0]);
        let t = baseline_ddpg_only(&s, 3).unwrap();
        assert!(t.rows.iter().all(|r| r.num_cc == 2 && r.rb_total == 50));
        let powers: Vec<f64> = t.rows.iter().map(|r| r.p_total_w).collect();
        assert!(powers.iter().any(|&p| p != powers[0]));
    }

    #[test]
    fn exit_and_rejoin() {
        let mut s = small(&[25.0, 25.0]);
        s.agent.episodes = 4;
        s.si_mode = SiMode::None;
        s.events = vec![
            ScheduledEvent { after_episode: 1, event: Event::UeExit { ue: 1 } },
            ScheduledEvent { after_episode: 3, event: Event::UeJoin { ue: 1 } },
        ];
        let t = run_experiment(&s, 5).unwrap();
        let present = |e: usize| t.rows.iter().any(|r| r.episode == e && r.ue == 1);
        assert!(present(1) && !present(2) && !present(3) && present(4));
        assert!(t.rows.iter().filter(|r| r.episode == 2).all(|r| r.rb_cc1 == 50));
    }

    #[test]
    fn no_si_mode_has_no_si() {
        let mut s = small(&[25.0]);
        s.si_mode = SiMode::None;
        let t = run_experiment(&s, 2).unwrap();
        assert!(t.rows.iter().all(|r| r.p_si_w == 0.0));
    }

    #[test]
    fn critic_evaluator_runs() {
        let mut s = small(&[25.0, 25.0]);
        s.agent.cc_eval = CcEvaluator::Critic;
        let t = run_experiment(&s, 4).unwrap();
        assert!(t.rows.iter().all(|r| r.rb_cc1 == 25));
    }
}
