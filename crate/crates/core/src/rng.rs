//! Per-trajectory random streams.
//!
//! Each (master seed, trajectory index, stream) triple is hashed into a
//! ChaCha seed, so a trajectory's draws never depend on which worker ran it
//! or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type TrajectoryRng = ChaCha12Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Uniform draws deciding bath-induced jumps.
    Jumps,
    /// Standard-normal draws for the ancilla readout noise.
    Readout,
    /// One uniform draw choosing the start state.
    Initial,
}

impl Stream {
    fn tag(self) -> u8 {
        match self {
            Stream::Jumps => 0,
            Stream::Readout => 1,
            Stream::Initial => 2,
        }
    }
}

pub fn stream_rng(master_seed: u64, trajectory_index: u64, stream: Stream) -> TrajectoryRng {
    let mut h = Sha256::new();
    h.update(b"qmonitor/v1");
    h.update(master_seed.to_le_bytes());
    h.update(trajectory_index.to_le_bytes());
    h.update([stream.tag()]);
    let seed: [u8; 32] = h.finalize().into();
    TrajectoryRng::from_seed(seed)
}
