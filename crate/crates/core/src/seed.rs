//! Root-seed fan-out.
//!
//! One experiment seed derives independent named streams (split, init,
//! dropout, negative sampling, shuffling) so each can be varied alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const SPLIT: &str = "split";
pub const INIT: &str = "init";
pub const DROPOUT: &str = "dropout";
pub const NEGATIVES: &str = "negatives";
pub const SHUFFLE: &str = "shuffle";
pub const SYNTH: &str = "synth";
pub const GRAPH_NEGATIVES: &str = "graph-negatives";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the sub-seed for stream `name` (FNV-1a of the name, mixed).
pub fn sub_seed(root: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(root ^ splitmix64(h))
}

pub fn rng(root: u64, name: &str) -> Rng {
    Rng::seed_from_u64(sub_seed(root, name))
}

/// Stream for one indexed step of a named process (e.g. one epoch).
pub fn rng_indexed(root: u64, name: &str, index: u64) -> Rng {
    Rng::seed_from_u64(splitmix64(sub_seed(root, name) ^ splitmix64(index)))
}
