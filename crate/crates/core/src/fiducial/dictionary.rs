use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FiducialError;

pub const DICTIONARY_SIZE: usize = 250;
pub const MIN_DISTANCE: u32 = 4;
/// Number of cells along one side of a marker: 4 payload cells plus a
/// one-cell black border on each side.
pub const MARKER_GRID: usize = 6;

/// Rotates a row-major 4x4 bit grid by 90 degrees clockwise. Bit `15 - (4r + c)`
/// holds cell `(r, c)`.
pub fn rotate_cw(code: u16) -> u16 {
    let mut out = 0u16;
    for r in 0..4 {
        for c in 0..4 {
            // new(r, c) = old(3 - c, r)
            if code_bit(code, 3 - c, r) {
                out |= 1 << (15 - (4 * r + c));
            }
        }
    }
    out
}

#[inline]
pub fn code_bit(code: u16, row: usize, col: usize) -> bool {
    code >> (15 - (4 * row + col)) & 1 == 1
}

fn rotations(code: u16) -> [u16; 4] {
    let r1 = rotate_cw(code);
    let r2 = rotate_cw(r1);
    [code, r1, r2, rotate_cw(r2)]
}

/// Minimum Hamming distance between `a` and every rotation of `b`.
pub fn rotational_distance(a: u16, b: u16) -> u32 {
    rotations(b).iter().map(|&r| (a ^ r).count_ones()).min().unwrap_or(16)
}

/// A set of 4x4 marker codes; a marker's id is its index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerDictionary {
    codes: Vec<u16>,
}

impl MarkerDictionary {
    pub fn codes(&self) -> &[u16] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn code(&self, id: usize) -> Option<u16> {
        self.codes.get(id).copied()
    }

    /// Id of the marker whose canonical code equals `bits` exactly.
    pub fn lookup(&self, bits: u16) -> Option<usize> {
        self.codes.iter().position(|&c| c == bits)
    }

    /// Full 6x6 cell grid (`true` = white) of marker `id`, border included.
    pub fn cell_grid(&self, id: usize) -> Option<[[bool; MARKER_GRID]; MARKER_GRID]> {
        let code = self.code(id)?;
        let mut grid = [[false; MARKER_GRID]; MARKER_GRID];
        for (r, row) in grid.iter_mut().enumerate().take(5).skip(1) {
            for (c, cell) in row.iter_mut().enumerate().take(5).skip(1) {
                *cell = code_bit(code, r - 1, c - 1);
            }
        }
        Some(grid)
    }
}

/// Cells that map onto each other under rotation, one mask per orbit.
const ROTATION_ORBITS: [u16; 4] = [0x9009, 0x4182, 0x2814, 0x0660];

/// Deterministically builds a 250-code dictionary whose codes are at least
/// `MIN_DISTANCE` apart under every rotation, including from their own
/// non-trivial rotations (so the read orientation is unambiguous).
///
/// Codes come from a lexicographic greedy scan (uniform random draws saturate
/// near 135 codes), XOR-ed with a rotation-invariant mask picked by the seed;
/// the seed then shuffles the accepted codes before the first 250 are kept.
pub fn generate_dictionary(seed: u64) -> Result<MarkerDictionary, FiducialError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick: u8 = rng.random_range(0..16);
    let mask = ROTATION_ORBITS
        .iter()
        .enumerate()
        .filter(|(j, _)| pick >> j & 1 == 1)
        .fold(0u16, |acc, (_, &m)| acc | m);

    let mut codes: Vec<u16> = Vec::new();
    let mut taken: Vec<u16> = Vec::new();
    let mut attempts = 0;
    for i in 0..=u16::MAX {
        attempts += 1;
        let cand = i ^ mask;
        if !(3..=13).contains(&cand.count_ones()) {
            continue;
        }
        let rots = rotations(cand);
        if rots[1..].iter().any(|&r| (cand ^ r).count_ones() < MIN_DISTANCE) {
            continue;
        }
        if taken.iter().all(|&t| (cand ^ t).count_ones() >= MIN_DISTANCE) {
            codes.push(cand);
            taken.extend_from_slice(&rots);
        }
    }
    if codes.len() < DICTIONARY_SIZE {
        return Err(FiducialError::DictionaryExhausted {
            found: codes.len(),
            attempts,
        });
    }
    codes.shuffle(&mut rng);
    codes.truncate(DICTIONARY_SIZE);
    Ok(MarkerDictionary { codes })
}
