//! Fixtures shared by the benchmarks.

use ulca_core::alloc::{allocate_rbs, enumerate_cc_vectors, CcVector, CcVectorSet};
use ulca_core::harness::seeds::{stream_rng, Stream};
use ulca_core::{AgentHyperparams, AllocationState, Ca2cAgent, Experience, NetworkConfig, QosState};

/// Two UEs at 25 m on one gNB with Res10 on the SCC.
pub fn two_ue_network() -> NetworkConfig {
    let mut cfg = NetworkConfig::single_cell(&[25.0, 25.0]);
    cfg.rb_resolution = 5;
    cfg
}

pub fn vector_set(cfg: &NetworkConfig) -> CcVectorSet {
    enumerate_cc_vectors(cfg.num_ccs, cfg.num_ues(), cfg.rb_resolution).expect("small instance")
}

/// Allocation for `v` with both UEs at `p_max`.
pub fn allocation(cfg: &NetworkConfig, set: &CcVectorSet, v: CcVector) -> AllocationState {
    let mut alloc = AllocationState::for_config(cfg);
    let ues: Vec<usize> = (0..cfg.num_ues()).collect();
    let active = vec![true; ues.len()];
    allocate_rbs(v, set, &ues, &active, cfg)
        .and_then(|plan| plan.apply(&vec![cfg.p_max; ues.len()], &mut alloc))
        .expect("PCC-constrained vector");
    alloc
}

/// Agent for the two-UE network with `fill` synthetic experiences stored.
pub fn agent(cfg: &NetworkConfig, set: &CcVectorSet, fill: usize) -> Ca2cAgent {
    let mut rng = stream_rng(1, Stream::AgentInit(0));
    let mut agent = Ca2cAgent::new(
        0,
        cfg.num_ues(),
        set.total_bits(),
        cfg.p_max,
        AgentHyperparams::default(),
        &mut rng,
    )
    .expect("valid hyperparameters");
    let vs = &set.pcc_constrained;
    for i in 0..fill {
        let bits = QosState(vec![i % 2 == 0, i % 3 == 0]);
        agent.store(Experience {
            state: bits.clone(),
            prev_alpha: vs[i % vs.len()],
            prev_reward: 3e7,
            action_power: vec![0.1 + 0.4 * (i % 5) as f64 / 4.0, 0.5],
            action_alpha: vs[(i * 7) % vs.len()],
            reward: 3e7 + 1e5 * i as f64,
            next_state: bits,
            active: vec![true, true],
        });
    }
    agent
}
