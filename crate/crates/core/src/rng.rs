//! Counter-style seeding.
//!
//! Every random stream in an experiment is a ChaCha generator whose key is
//! derived from the master seed and the coordinates of the cell that consumes
//! it. Scheduling order therefore never changes what a cell draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CVector, C64};

pub type SimRng = ChaCha12Rng;

/// Stream domains, so that e.g. geometry 3 and channel draw 3 never share a key.
pub mod domain {
    pub const GEOMETRY: u64 = 1;
    pub const SAMPLES: u64 = 2;
    pub const DITHER: u64 = 3;
    pub const CHANNEL: u64 = 4;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator keyed by `(master, coords)`.
pub fn stream_rng(master: u64, coords: &[u64]) -> SimRng {
    let mut state = master;
    let mut h = splitmix64(&mut state);
    let mut len_state = coords.len() as u64;
    h ^= splitmix64(&mut len_state);
    for &c in coords {
        let mut cs = c ^ h.rotate_left(17);
        h = splitmix64(&mut cs) ^ h.rotate_right(7);
    }
    let mut seed = [0u8; 32];
    let mut s = h;
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    SimRng::from_seed(seed)
}

/// One draw from CN(0, variance).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Vector with i.i.d. CN(0, variance) entries.
pub fn complex_normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> CVector {
    CVector::from_iterator(len, (0..len).map(|_| complex_normal(rng, variance)))
}
