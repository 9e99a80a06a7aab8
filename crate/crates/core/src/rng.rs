//! Counter-based random substreams.
//!
//! Every work item (trajectory, classical particle) owns a ChaCha stream keyed
//! by the master seed and selected by its index, so results do not depend on
//! how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags keep independent consumers of one master seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Trajectory,
    ClassicalParticle,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Trajectory => 0x7472_616a_0000_0001,
            Purpose::ClassicalParticle => 0x636c_6173_0000_0002,
        }
    }
}

/// Independent stream for work item `index` under `seed`.
pub fn substream(seed: u64, purpose: Purpose, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.tag());
    rng.set_stream(index);
    rng
}
