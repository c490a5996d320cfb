//! Pseudo-random segment content.
//!
//! Bit `b` of original segment `i` is bit `b % 64` of the `b / 64`-th 64-bit
//! output of a ChaCha8 stream keyed by the seed, with stream id `i`. Content is
//! therefore a pure function of `(seed, segment, offset)` and any single atom
//! can be regenerated without materializing the rest of the file.

use bitvec::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub type Bits = BitVec<u64, Lsb0>;

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn take_bits(rng: &mut ChaCha8Rng, skip: usize, bits: usize) -> Bits {
    let words = (skip + bits).div_ceil(64);
    let data: Vec<u64> = (0..words).map(|_| rng.next_u64()).collect();
    let all = Bits::from_vec(data);
    all[skip..skip + bits].to_bitvec()
}

/// The full content of original segment `index`, `bits` long.
pub fn segment_content(seed: u64, index: usize, bits: usize) -> Bits {
    take_bits(&mut stream(seed, index), 0, bits)
}

/// One atom of original segment `index`, generated by seeking the stream.
pub fn atom_content(seed: u64, index: usize, offset: usize, atom_bits: usize) -> Bits {
    let start = offset * atom_bits;
    let mut rng = stream(seed, index);
    // ChaCha word positions count 32-bit words; a u64 draw consumes two.
    rng.set_word_pos(2 * (start / 64) as u128);
    take_bits(&mut rng, start % 64, atom_bits)
}
