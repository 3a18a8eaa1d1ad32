//! Uniform local binary patterns at radius 1 with 8 neighbors.
//!
//! Neighbors are visited counter-clockwise starting east (with y pointing
//! down): E, NE, N, NW, W, SW, S, SE. Bit `i` is set when neighbor `i` is
//! greater than or equal to the center. Codes with at most two circular
//! 0/1 transitions get their own bin in ascending code order (58 bins); every
//! other code shares the final bin.

use std::sync::OnceLock;

use crate::error::{arg_err, Result};
use crate::imaging::ImageGray;

pub const LBP_BINS: usize = 59;

const NEIGHBORS: [(isize, isize); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

#[derive(Debug, Clone, PartialEq)]
pub struct LbpHistogram {
    pub bins: [f64; LBP_BINS],
}

/// Number of 0/1 changes walking once around the 8-bit code.
pub fn transitions(code: u8) -> u32 {
    (code ^ code.rotate_right(1)).count_ones()
}

/// Histogram bin of every 8-bit code.
pub fn uniform_bin_table() -> &'static [u8; 256] {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [(LBP_BINS - 1) as u8; 256];
        let mut next = 0u8;
        for code in 0..=255u8 {
            if transitions(code) <= 2 {
                table[code as usize] = next;
                next += 1;
            }
        }
        debug_assert_eq!(next as usize, LBP_BINS - 1);
        table
    })
}

/// The 8-bit pattern at an interior pixel.
pub fn code_at(img: &ImageGray, x: usize, y: usize) -> u8 {
    let center = img.get(x, y);
    let mut code = 0u8;
    for (bit, (dx, dy)) in NEIGHBORS.iter().enumerate() {
        let nx = (x as isize + dx) as usize;
        let ny = (y as isize + dy) as usize;
        if img.get(nx, ny) >= center {
            code |= 1 << bit;
        }
    }
    code
}

/// Normalized uniform-LBP histogram over interior pixels.
pub fn lbp(img: &ImageGray) -> Result<LbpHistogram> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return arg_err(format!("LBP needs at least a 3x3 image, got {w}x{h}"));
    }
    let table = uniform_bin_table();
    let mut counts = [0usize; LBP_BINS];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            counts[table[code_at(img, x, y) as usize] as usize] += 1;
        }
    }
    let n = ((w - 2) * (h - 2)) as f64;
    Ok(LbpHistogram {
        bins: counts.map(|c| c as f64 / n),
    })
}
