//! RGB <-> YUV conversion, BT.709 full range.
//!
//! Attributes are carried as real-valued YUV inside the codec and converted
//! back to 8-bit RGB only when a decoded cloud is exported.

const KR: f64 = 0.2126;
const KG: f64 = 0.7152;
const KB: f64 = 0.0722;
// Chroma scales map the extreme color differences onto +/-127.5 around 128.
const U_SCALE: f64 = 2.0 * (1.0 - KB);
const V_SCALE: f64 = 2.0 * (1.0 - KR);

/// Full-range BT.709 conversion; outputs clamped to [0, 255].
#[inline]
pub fn rgb_to_yuv(rgb: [u8; 3]) -> [f64; 3] {
    let r = f64::from(rgb[0]);
    let g = f64::from(rgb[1]);
    let b = f64::from(rgb[2]);
    let y = KR * r + KG * g + KB * b;
    let u = (b - y) / U_SCALE + 128.0;
    let v = (r - y) / V_SCALE + 128.0;
    [clamp255(y), clamp255(u), clamp255(v)]
}

/// Inverse of [`rgb_to_yuv`] up to rounding; each channel rounds to the
/// nearest integer in [0, 255].
#[inline]
pub fn yuv_to_rgb(yuv: [f64; 3]) -> [u8; 3] {
    let [y, u, v] = yuv;
    let r = y + V_SCALE * (v - 128.0);
    let b = y + U_SCALE * (u - 128.0);
    let g = (y - KR * r - KB * b) / KG;
    [round255(r), round255(g), round255(b)]
}

#[inline]
pub(crate) fn clamp255(x: f64) -> f64 {
    x.clamp(0.0, 255.0)
}

#[inline]
fn round255(x: f64) -> u8 {
    x.round().clamp(0.0, 255.0) as u8
}
