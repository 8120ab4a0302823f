/// Color for distance 0.
pub const NEAR_COLOR: [u8; 3] = [255, 255, 0];
/// Color for distances of `2d` and beyond.
pub const FAR_COLOR: [u8; 3] = [0, 0, 255];

/// Maps each distance linearly from `[0, 2d]` onto the near→far gradient,
/// clamping outside that range.
pub fn distance_colors(distances: &[f64], d: f64) -> Vec<[u8; 3]> {
    let span = 2.0 * d;
    distances
        .iter()
        .map(|&e| {
            let t = if span > 0.0 { (e / span).clamp(0.0, 1.0) } else { 1.0 };
            let t = if t.is_nan() { 1.0 } else { t };
            let mut rgb = [0u8; 3];
            for (c, out) in rgb.iter_mut().enumerate() {
                let (a, b) = (NEAR_COLOR[c] as f64, FAR_COLOR[c] as f64);
                *out = (a + (b - a) * t).round() as u8;
            }
            rgb
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        let c = distance_colors(&[0.0, 0.01, 0.02, 0.5, f64::INFINITY], 0.01);
        assert_eq!(c[0], NEAR_COLOR);
        assert_eq!(c[1], [128, 128, 128]);
        assert_eq!(c[2], FAR_COLOR);
        assert_eq!(c[3], FAR_COLOR);
        assert_eq!(c[4], FAR_COLOR);
    }
}
