//! Partitioning a frame into cubic blocks of occupied voxels.

use crate::frame::{FrameError, PointCloudFrame};
use crate::morton::{morton3, morton3_coords};

/// One occupied cube of the block grid: the point indices of a frame that
/// fall inside it, in Morton order of their absolute coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub frame_index: usize,
    /// Position of this block in the frame's Morton-ordered block list.
    pub block_index: usize,
    /// Minimum corner of the cube, always a multiple of `size` per axis.
    pub origin: [i32; 3],
    pub size: u32,
    /// Indices into the frame's point arrays.
    pub points: Vec<usize>,
}

impl Block {
    /// Geometric center of the cube, used as the anchor of a motion search.
    pub fn center(&self) -> [i32; 3] {
        let half = (self.size / 2) as i32;
        [
            self.origin[0] + half,
            self.origin[1] + half,
            self.origin[2] + half,
        ]
    }

    pub fn gather_coords(&self, frame: &PointCloudFrame) -> Vec<[i32; 3]> {
        self.points.iter().map(|&i| frame.coords()[i]).collect()
    }

    pub fn gather_colors(&self, colors: &[[f64; 3]]) -> Vec<[f64; 3]> {
        self.points.iter().map(|&i| colors[i]).collect()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Splits `frame` into occupied `block_size`-cubes aligned to the origin.
///
/// Blocks are emitted in Morton order of their grid cells and points inside
/// each block in Morton order of their absolute coordinates, so the layout
/// is a pure function of the geometry — both codec ends derive it
/// independently from the shared geometry stream.
pub fn partition_into_blocks(
    frame: &PointCloudFrame,
    block_size: u32,
) -> Result<Vec<Block>, FrameError> {
    if block_size < 2 {
        return Err(FrameError::BlockSizeTooSmall(block_size));
    }
    let b = block_size as i32;

    // (cell Morton, point Morton, point index); one sort gives both the
    // block order and the within-block order.
    let mut keyed: Vec<(u64, u64, usize)> = frame
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &[x, y, z])| {
            let cell = morton3((x / b) as u32, (y / b) as u32, (z / b) as u32);
            (cell, morton3_coords([x, y, z]), i)
        })
        .collect();
    keyed.sort_unstable();

    let mut blocks: Vec<Block> = Vec::new();
    for (cell, _, i) in keyed {
        let [x, y, z] = frame.coords()[i];
        let needs_new = blocks
            .last()
            .is_none_or(|blk: &Block| cell_of(blk.origin, b) != cell);
        if needs_new {
            blocks.push(Block {
                frame_index: frame.frame_index(),
                block_index: blocks.len(),
                origin: [x / b * b, y / b * b, z / b * b],
                size: block_size,
                points: Vec::new(),
            });
        }
        blocks.last_mut().unwrap().points.push(i);
    }
    Ok(blocks)
}

fn cell_of(origin: [i32; 3], b: i32) -> u64 {
    morton3(
        (origin[0] / b) as u32,
        (origin[1] / b) as u32,
        (origin[2] / b) as u32,
    )
}
