//! 3-D Morton (Z-order) codes.
//!
//! Every ordering the encoder and decoder must agree on — block traversal,
//! within-block point order, nearest-neighbor tie-breaks — is defined in terms
//! of the Morton code of voxel coordinates, with x occupying the least
//! significant bit of each interleaved triple.

/// Interleaves the low 21 bits of each component into a 63-bit code.
#[inline]
pub fn morton3(x: u32, y: u32, z: u32) -> u64 {
    debug_assert!(x < (1 << 21) && y < (1 << 21) && z < (1 << 21));
    spread(u64::from(x)) | spread(u64::from(y)) << 1 | spread(u64::from(z)) << 2
}

/// Morton code of a non-negative voxel coordinate triple.
#[inline]
pub fn morton3_coords(v: [i32; 3]) -> u64 {
    debug_assert!(v.iter().all(|&c| c >= 0));
    morton3(v[0] as u32, v[1] as u32, v[2] as u32)
}

// Spreads a 21-bit value so its bits occupy every third position.
#[inline]
fn spread(mut w: u64) -> u64 {
    w &= 0x001f_ffff;
    w = (w | w << 32) & 0x001f_0000_0000_ffff;
    w = (w | w << 16) & 0x001f_0000_ff00_00ff;
    w = (w | w << 8) & 0x100f_00f0_0f00_f00f;
    w = (w | w << 4) & 0x10c3_0c30_c30c_30c3;
    w = (w | w << 2) & 0x1249_2492_4924_9249;
    w
}
