use super::DataError;
use crate::nn::INPUT_DIM;

/// Adaptive 1D average pooling to 784 values.
pub fn adaptive_avg_pool_1d(x: &[f64]) -> Result<Vec<f64>, DataError> {
    adaptive_avg_pool_1d_to(x, INPUT_DIM)
}

/// Adaptive 1D average pooling to `out_len` bins: bin `i` averages
/// `x[floor(i*L/out) .. ceil((i+1)*L/out)]`. Shorter inputs repeat elements.
pub fn adaptive_avg_pool_1d_to(x: &[f64], out_len: usize) -> Result<Vec<f64>, DataError> {
    let len = x.len();
    if len == 0 || out_len == 0 {
        return Err(DataError::EmptyInput);
    }
    Ok((0..out_len)
        .map(|i| {
            let start = i * len / out_len;
            let end = ((i + 1) * len).div_ceil(out_len);
            let bin = &x[start..end];
            bin.iter().sum::<f64>() / bin.len() as f64
        })
        .collect())
}

/// Row weights of an area-average resampling from `src` to `dst` cells:
/// `w[d][s]` is the fraction of output cell `d` covered by input cell `s`.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    // work in units of 1/(src*dst) so every boundary is an integer
    (0..dst)
        .map(|d| {
            let lo = d * src;
            let hi = (d + 1) * src;
            let first = lo / dst;
            let last = (hi - 1) / dst;
            (first..=last)
                .map(|s| {
                    let cell_lo = s * dst;
                    let cell_hi = (s + 1) * dst;
                    let overlap = hi.min(cell_hi) - lo.max(cell_lo);
                    (s, overlap as f64 / src as f64)
                })
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect()
}

/// Area-average resize of a row-major `height × width` grayscale image to
/// 28×28, flattened row-major.
pub fn resize_to_28(image: &[f64], height: usize, width: usize) -> Result<Vec<f64>, DataError> {
    const SIDE: usize = 28;
    if height == 0 || width == 0 {
        return Err(DataError::EmptyInput);
    }
    if image.len() != height * width {
        return Err(DataError::Shape {
            what: "image pixels",
            expected: height * width,
            actual: image.len(),
        });
    }
    if height == SIDE && width == SIDE {
        return Ok(image.to_vec());
    }
    let rows = area_weights(height, SIDE);
    let cols = area_weights(width, SIDE);
    // columns first: height × 28
    let mut tmp = vec![0.0; height * SIDE];
    for r in 0..height {
        let src = &image[r * width..(r + 1) * width];
        for (c, ws) in cols.iter().enumerate() {
            tmp[r * SIDE + c] = ws.iter().map(|&(s, w)| w * src[s]).sum();
        }
    }
    let mut out = vec![0.0; SIDE * SIDE];
    for (r, ws) in rows.iter().enumerate() {
        for c in 0..SIDE {
            let v: f64 = ws.iter().map(|&(s, w)| w * tmp[s * SIDE + c]).sum();
            out[r * SIDE + c] = v.clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pool_identity_and_small_case() {
        let x: Vec<f64> = (0..784).map(|i| i as f64 / 784.0).collect();
        assert_eq!(adaptive_avg_pool_1d(&x).unwrap(), x);
        assert_eq!(adaptive_avg_pool_1d_to(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), vec![1.5, 3.5]);
        // overlapping bins when L is not a multiple: [1,2,3] -> 2 bins
        assert_eq!(adaptive_avg_pool_1d_to(&[1.0, 2.0, 3.0], 2).unwrap(), vec![1.5, 2.5]);
        assert!(matches!(adaptive_avg_pool_1d(&[]), Err(DataError::EmptyInput)));
    }

    #[test]
    fn pool_upsamples_short_inputs() {
        let out = adaptive_avg_pool_1d(&[0.25, 0.75]).unwrap();
        assert_eq!(out.len(), 784);
        assert!(out[..392].iter().all(|&v| v == 0.25));
        assert!(out[392..].iter().all(|&v| v == 0.75));
    }

    #[test]
    fn resize_cases() {
        let img: Vec<f64> = (0..784).map(|i| (i % 17) as f64 / 16.0).collect();
        assert_eq!(resize_to_28(&img, 28, 28).unwrap(), img);
        let c = vec![0.7; 56 * 56];
        assert!(resize_to_28(&c, 56, 56).unwrap().iter().all(|&v| (v - 0.7).abs() < 1e-15));
        let checker: Vec<f64> = (0..56 * 56).map(|i| ((i / 56 + i % 56) % 2) as f64).collect();
        assert!(resize_to_28(&checker, 56, 56).unwrap().iter().all(|&v| v == 0.5));
        assert!(resize_to_28(&[0.0; 5], 2, 2).is_err());
        assert!(resize_to_28(&[], 0, 3).is_err());
    }

    #[test]
    fn resize_non_integer_ratio_preserves_mean() {
        // 42×35 → 28×28: each output cell is a convex combination, and the
        // overall mean is preserved because every input cell has equal total weight
        let img: Vec<f64> = (0..42 * 35).map(|i| ((i * 7919) % 101) as f64 / 100.0).collect();
        let out = resize_to_28(&img, 42, 35).unwrap();
        let m_in = img.iter().sum::<f64>() / img.len() as f64;
        let m_out = out.iter().sum::<f64>() / out.len() as f64;
        assert!((m_in - m_out).abs() < 1e-12);
        assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    proptest! {
        #[test]
        fn pool_constant_in_constant_out(len in 1usize..3000, c in 0.0f64..1.0) {
            let out = adaptive_avg_pool_1d(&vec![c; len]).unwrap();
            prop_assert_eq!(out.len(), 784);
            for v in out { prop_assert!((v - c).abs() < 1e-12); }
        }

        #[test]
        fn pool_preserves_mean_for_multiples(k in 1usize..5, seed in any::<u64>()) {
            let mut r = crate::nn::Rng::new(seed);
            let x: Vec<f64> = (0..784 * k).map(|_| r.next_f64()).collect();
            let out = adaptive_avg_pool_1d(&x).unwrap();
            let a = x.iter().sum::<f64>() / x.len() as f64;
            let b = out.iter().sum::<f64>() / 784.0;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn resize_stays_in_unit_range(h in 1usize..70, w in 1usize..70, seed in any::<u64>()) {
            let mut r = crate::nn::Rng::new(seed);
            let img: Vec<f64> = (0..h * w).map(|_| r.next_f64()).collect();
            let out = resize_to_28(&img, h, w).unwrap();
            prop_assert_eq!(out.len(), 784);
            prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
