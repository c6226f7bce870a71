//! Independent random streams derived from one master seed.
//!
//! Every stream is `ChaCha8Rng::seed_from_u64(master)` moved onto its own
//! ChaCha stream id, so turning one noise source on or off never shifts the
//! draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    /// SINR estimation error.
    Csi,
    /// Network initialisation of agent `b`.
    AgentInit(usize),
    /// Gaussian power noise of agent `b`.
    AgentExplore(usize),
    /// Minibatch sampling of agent `b`.
    AgentReplay(usize),
    /// Random CC selection of agent `b`.
    CcExplore(usize),
}

impl Stream {
    pub fn id(self) -> u64 {
        match self {
            Stream::Csi => 1,
            Stream::AgentInit(b) => 0x100 + b as u64,
            Stream::AgentExplore(b) => 0x200 + b as u64,
            Stream::AgentReplay(b) => 0x300 + b as u64,
            Stream::CcExplore(b) => 0x400 + b as u64,
        }
    }
}

pub fn stream_rng(master: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream.id());
    rng
}
