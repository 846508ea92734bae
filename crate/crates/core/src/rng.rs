//! Deterministic random streams.
//!
//! Every random draw in the crate comes from xoshiro256++ seeded through
//! splitmix64 (`seed_from_u64`). Independent sub-streams are derived from a
//! master seed with [`derive_seed`], so a scene or a training run is fixed
//! by a single 64-bit integer on every platform.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One splitmix64 step: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The `index`-th output of the splitmix64 sequence started at `master`.
///
/// Equivalent to calling [`splitmix64`] `index + 1` times on a state
/// initialised to `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut state = master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index));
    splitmix64(&mut state)
}

/// Seed for a named sub-stream (one per modality, per purpose) of `seed`.
pub fn substream(seed: u64, tag: &str) -> u64 {
    let mut state = seed;
    for b in tag.bytes() {
        state = splitmix64(&mut state) ^ u64::from(b);
    }
    splitmix64(&mut state)
}
