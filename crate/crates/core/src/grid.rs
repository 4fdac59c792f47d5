//! Multi-scale block segmentation: the spatial-redundancy substrate. Each
//! scale tiles the frame with stride == size (no intra-scale overlap) and
//! drops trailing partial blocks, so a block never mixes in synthetic
//! border values.

use crate::error::{Error, Result};
use crate::vidio::Frame;
use serde::{Deserialize, Serialize};

/// Default scale set; dyadic so the block count stays linear in frame area.
pub const DEFAULT_SCALES: [u32; 3] = [16, 32, 64];

/// One square block at a given scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub x0: u32,
    pub y0: u32,
    pub size: u32,
    pub scale_index: usize,
}

impl Block {
    pub fn area(&self) -> usize {
        self.size as usize * self.size as usize
    }

    /// Fraction of this block's pixels for which `mask` is true.
    pub fn mask_overlap(&self, mask: &[bool], frame_width: u32) -> f64 {
        let mut hit = 0usize;
        for y in self.y0..self.y0 + self.size {
            for x in self.x0..self.x0 + self.size {
                if mask[(y * frame_width + x) as usize] {
                    hit += 1;
                }
            }
        }
        hit as f64 / self.area() as f64
    }
}

/// The full multi-scale partition. Block order is deterministic:
/// scale-major, then row-major within the scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    pub blocks: Vec<Block>,
    pub frame_width: u32,
    pub frame_height: u32,
    pub scales: Vec<u32>,
    /// Scales larger than the frame, skipped with a warning record.
    pub skipped_scales: Vec<u32>,
}

impl BlockGrid {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Indices of the blocks at the finest retained scale.
    pub fn finest_scale_blocks(&self) -> Vec<usize> {
        let Some(&finest) = self.scales.iter().min() else {
            return Vec::new();
        };
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.size == finest)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Build the multi-scale grid for a frame of the given dimensions.
pub fn build_grid(width: u32, height: u32, scales: &[u32]) -> Result<BlockGrid> {
    if scales.is_empty() {
        return Err(Error::Config("scale list is empty".into()));
    }
    for &s in scales {
        if s < 4 {
            return Err(Error::Config(format!("scale {s} below the 4 px minimum")));
        }
    }

    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for &s in scales {
        if s > width.min(height) {
            skipped.push(s);
        } else {
            kept.push(s);
        }
    }

    let mut blocks = Vec::new();
    for (scale_index, &size) in kept.iter().enumerate() {
        let nx = width / size;
        let ny = height / size;
        for by in 0..ny {
            for bx in 0..nx {
                blocks.push(Block {
                    x0: bx * size,
                    y0: by * size,
                    size,
                    scale_index,
                });
            }
        }
    }

    Ok(BlockGrid {
        blocks,
        frame_width: width,
        frame_height: height,
        scales: kept,
        skipped_scales: skipped,
    })
}

/// Arithmetic mean of the block's pixels, real-valued.
pub fn block_mean(frame: &Frame, block: &Block) -> f64 {
    debug_assert!(block.x0 + block.size <= frame.width());
    debug_assert!(block.y0 + block.size <= frame.height());
    let width = frame.width() as usize;
    let pixels = frame.pixels();
    let mut sum = 0.0;
    for y in block.y0..block.y0 + block.size {
        let row = y as usize * width;
        for x in block.x0..block.x0 + block.size {
            sum += pixels[row + x as usize] as f64;
        }
    }
    sum / block.area() as f64
}

/// Same mean on a real-valued plane (used before quantization).
pub fn block_mean_plane(plane: &[f64], frame_width: u32, block: &Block) -> f64 {
    let width = frame_width as usize;
    let mut sum = 0.0;
    for y in block.y0..block.y0 + block.size {
        let row = y as usize * width;
        for x in block.x0..block.x0 + block.size {
            sum += plane[row + x as usize];
        }
    }
    sum / block.area() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vidio::BitDepth;
    use rand::{Rng, SeedableRng};

    #[test]
    fn tiling_arithmetic_64x64() {
        let g = build_grid(64, 64, &[16, 32]).unwrap();
        assert_eq!(g.len(), 16 + 4);
    }

    #[test]
    fn trailing_partial_blocks_dropped() {
        let g = build_grid(70, 64, &[32]).unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.blocks.iter().all(|b| b.x0 + b.size <= 70));
    }

    #[test]
    fn block_count_at_paper_resolution() {
        // width 548 x height 968
        let g = build_grid(548, 968, &[16, 32, 64]).unwrap();
        assert_eq!(g.len(), 34 * 60 + 17 * 30 + 8 * 15);
        assert_eq!(g.len(), 2670);
    }

    #[test]
    fn oversized_scale_skipped_with_record() {
        let g = build_grid(48, 48, &[16, 64]).unwrap();
        assert_eq!(g.scales, vec![16]);
        assert_eq!(g.skipped_scales, vec![64]);
        assert_eq!(g.len(), 9);
    }

    #[test]
    fn empty_scales_rejected() {
        assert!(matches!(build_grid(64, 64, &[]), Err(Error::Config(_))));
        assert!(matches!(build_grid(64, 64, &[2]), Err(Error::Config(_))));
    }

    #[test]
    fn order_is_scale_major_then_row_major() {
        let g = build_grid(64, 32, &[16, 32]).unwrap();
        let g2 = build_grid(64, 32, &[16, 32]).unwrap();
        assert_eq!(g, g2);
        assert_eq!(g.blocks[0], Block { x0: 0, y0: 0, size: 16, scale_index: 0 });
        assert_eq!(g.blocks[1].x0, 16);
        let first_32 = g.blocks.iter().position(|b| b.size == 32).unwrap();
        assert_eq!(first_32, 8);
    }

    #[test]
    fn scale_union_covers_each_pixel_once() {
        let (w, h, s) = (70u32, 50u32, 16u32);
        let g = build_grid(w, h, &[s]).unwrap();
        let mut counts = vec![0u8; (w * h) as usize];
        for b in &g.blocks {
            for y in b.y0..b.y0 + b.size {
                for x in b.x0..b.x0 + b.size {
                    counts[(y * w + x) as usize] += 1;
                }
            }
        }
        let covered = counts.iter().filter(|&&c| c == 1).count() as u32;
        assert_eq!(covered, (w / s) * s * ((h / s) * s));
        assert!(counts.iter().all(|&c| c <= 1));
    }

    #[test]
    fn block_mean_constant_and_small() {
        let f = Frame::new(4, 4, BitDepth::Eight, vec![7; 16]).unwrap();
        let b = Block { x0: 0, y0: 0, size: 4, scale_index: 0 };
        assert_eq!(block_mean(&f, &b), 7.0);

        let f2 = Frame::new(2, 2, BitDepth::Eight, vec![0, 0, 2, 2]).unwrap();
        let b2 = Block { x0: 0, y0: 0, size: 2, scale_index: 0 };
        assert_eq!(block_mean(&f2, &b2), 1.0);
    }

    #[test]
    fn block_mean_matches_brute_force_on_random_blocks() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (w, h) = (53u32, 41u32);
        let pixels: Vec<u16> = (0..w * h).map(|_| rng.gen_range(0..256)).collect();
        let frame = Frame::new(w, h, BitDepth::Eight, pixels.clone()).unwrap();
        for _ in 0..100 {
            let size = rng.gen_range(4..=16u32);
            let x0 = rng.gen_range(0..=w - size);
            let y0 = rng.gen_range(0..=h - size);
            let b = Block { x0, y0, size, scale_index: 0 };
            let mut sum = 0u64;
            for y in y0..y0 + size {
                for x in x0..x0 + size {
                    sum += pixels[(y * w + x) as usize] as u64;
                }
            }
            let expect = sum as f64 / (size * size) as f64;
            assert!((block_mean(&frame, &b) - expect).abs() < 1e-12);
        }
    }
}
