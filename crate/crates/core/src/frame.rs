//! Frame and sequence containers for voxelized point clouds.

use std::collections::HashSet;

use thiserror::Error;

/// Upper bound on voxel coordinates; keeps Morton codes inside 63 bits with
/// slack for block-cell arithmetic.
pub const MAX_COORD: i32 = (1 << 20) - 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("point cloud must contain at least one point")]
    Empty,
    #[error("coordinate rows ({coords}) and color rows ({colors}) differ")]
    LengthMismatch { coords: usize, colors: usize },
    #[error("duplicate voxel coordinate ({0}, {1}, {2})")]
    DuplicateCoordinate(i32, i32, i32),
    #[error("coordinate ({0}, {1}, {2}) outside [0, {MAX_COORD}]^3")]
    CoordinateOutOfRange(i32, i32, i32),
    #[error("block size must be at least 2, got {0}")]
    BlockSizeTooSmall(u32),
    #[error("frame at position {position} has index {index}; indices must run 0, 1, 2, ...")]
    NonConsecutiveIndex { position: usize, index: usize },
    #[error("group-of-frames length must be at least 1")]
    EmptyGof,
}

/// One time instant of a voxelized cloud: integer voxel coordinates plus
/// per-point real-valued YUV attributes.
///
/// Immutable after construction; each occupied voxel appears exactly once.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloudFrame {
    frame_index: usize,
    coords: Vec<[i32; 3]>,
    colors: Vec<[f64; 3]>,
}

impl PointCloudFrame {
    pub fn new(
        frame_index: usize,
        coords: Vec<[i32; 3]>,
        colors: Vec<[f64; 3]>,
    ) -> Result<Self, FrameError> {
        if coords.len() != colors.len() {
            return Err(FrameError::LengthMismatch {
                coords: coords.len(),
                colors: colors.len(),
            });
        }
        if coords.is_empty() {
            return Err(FrameError::Empty);
        }
        let mut seen = HashSet::with_capacity(coords.len());
        for &[x, y, z] in &coords {
            if !(0..=MAX_COORD).contains(&x)
                || !(0..=MAX_COORD).contains(&y)
                || !(0..=MAX_COORD).contains(&z)
            {
                return Err(FrameError::CoordinateOutOfRange(x, y, z));
            }
            if !seen.insert([x, y, z]) {
                return Err(FrameError::DuplicateCoordinate(x, y, z));
            }
        }
        Ok(Self {
            frame_index,
            coords,
            colors,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // N >= 1 by construction
    }

    #[inline]
    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    #[inline]
    pub fn coords(&self) -> &[[i32; 3]] {
        &self.coords
    }

    #[inline]
    pub fn colors(&self) -> &[[f64; 3]] {
        &self.colors
    }

    /// Same geometry with different attributes (e.g. a decoded reference).
    pub fn with_colors(&self, colors: Vec<[f64; 3]>) -> Result<Self, FrameError> {
        if colors.len() != self.coords.len() {
            return Err(FrameError::LengthMismatch {
                coords: self.coords.len(),
                colors: colors.len(),
            });
        }
        Ok(Self {
            frame_index: self.frame_index,
            coords: self.coords.clone(),
            colors,
        })
    }
}

/// An ordered run of frames with a fixed group-of-frames length.
#[derive(Clone, Debug)]
pub struct FrameSequence {
    frames: Vec<PointCloudFrame>,
    gof_size: usize,
}

impl FrameSequence {
    pub fn new(frames: Vec<PointCloudFrame>, gof_size: usize) -> Result<Self, FrameError> {
        if gof_size == 0 {
            return Err(FrameError::EmptyGof);
        }
        for (position, frame) in frames.iter().enumerate() {
            if frame.frame_index() != position {
                return Err(FrameError::NonConsecutiveIndex {
                    position,
                    index: frame.frame_index(),
                });
            }
        }
        Ok(Self { frames, gof_size })
    }

    #[inline]
    pub fn frames(&self) -> &[PointCloudFrame] {
        &self.frames
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    #[inline]
    pub fn gof_size(&self) -> usize {
        self.gof_size
    }

    /// First frame of each group is intra coded, the rest inter.
    #[inline]
    pub fn is_intra_position(&self, t: usize) -> bool {
        t.is_multiple_of(self.gof_size)
    }
}
