//! Bilinear sampling on real-valued planes, shared by the flow estimator's
//! warp step and the synthetic renderer's subpixel translations.

/// Sample `plane` (row-major, `width` x `height`) at a fractional position
/// with replicate-edge clamping.
#[inline]
pub fn bilinear(plane: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let xf = x.clamp(0.0, (width - 1) as f64);
    let yf = y.clamp(0.0, (height - 1) as f64);
    let x0 = xf.floor() as usize;
    let y0 = yf.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let ax = xf - x0 as f64;
    let ay = yf - y0 as f64;

    let p00 = plane[y0 * width + x0];
    let p10 = plane[y0 * width + x1];
    let p01 = plane[y1 * width + x0];
    let p11 = plane[y1 * width + x1];

    (1.0 - ax) * (1.0 - ay) * p00 + ax * (1.0 - ay) * p10 + (1.0 - ax) * ay * p01 + ax * ay * p11
}

/// Translate a plane by (`sx`, `sy`) pixels with bilinear resampling.
/// Output pixel (x, y) reads from (x - sx, y - sy), so positive shifts move
/// content toward +x/+y.
pub fn shift_plane(plane: &[f64], width: usize, height: usize, sx: f64, sy: f64) -> Vec<f64> {
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = bilinear(plane, width, height, x as f64 - sx, y as f64 - sy);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_hits_grid_points() {
        let plane = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(bilinear(&plane, 2, 2, 0.0, 0.0), 1.0);
        assert_eq!(bilinear(&plane, 2, 2, 1.0, 0.0), 2.0);
        assert_eq!(bilinear(&plane, 2, 2, 0.0, 1.0), 3.0);
        assert_eq!(bilinear(&plane, 2, 2, 1.0, 1.0), 4.0);
    }

    #[test]
    fn bilinear_interpolates_midpoint() {
        let plane = vec![0.0, 2.0, 4.0, 6.0];
        assert!((bilinear(&plane, 2, 2, 0.5, 0.5) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn shift_by_zero_is_identity() {
        let plane: Vec<f64> = (0..12).map(|v| v as f64).collect();
        assert_eq!(shift_plane(&plane, 4, 3, 0.0, 0.0), plane);
    }

    #[test]
    fn integer_shift_moves_content() {
        let mut plane = vec![0.0; 25];
        plane[2 * 5 + 2] = 9.0;
        let shifted = shift_plane(&plane, 5, 5, 1.0, 0.0);
        assert_eq!(shifted[2 * 5 + 3], 9.0);
    }
}
