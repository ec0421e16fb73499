use super::{GrayImage, ImagingError, Rect};

/// Summed-area tables of intensities and squared intensities.
///
/// Both planes are `(width + 1) × (height + 1)`; row 0 and column 0 are zero,
/// and entry `(i, j)` holds the sum over all pixels with `x < i` and `y < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralImage {
    width: u32,
    height: u32,
    sum: Vec<u64>,
    sq_sum: Vec<u64>,
}

impl IntegralImage {
    pub fn new(img: &GrayImage) -> Self {
        let w = img.width() as usize;
        let h = img.height() as usize;
        let stride = w + 1;
        let mut sum = vec![0u64; stride * (h + 1)];
        let mut sq_sum = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u64;
            let mut row_sq = 0u64;
            for (x, &v) in img.row(y as u32).iter().enumerate() {
                let v = v as u64;
                row += v;
                row_sq += v * v;
                let idx = (y + 1) * stride + x + 1;
                sum[idx] = sum[idx - stride] + row;
                sq_sum[idx] = sq_sum[idx - stride] + row_sq;
            }
        }
        IntegralImage {
            width: img.width(),
            height: img.height(),
            sum,
            sq_sum,
        }
    }

    /// Width of the source image (the planes are one wider).
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Entry `(i, j)` of the intensity plane.
    #[inline]
    pub fn at(&self, i: u32, j: u32) -> u64 {
        self.sum[j as usize * (self.width as usize + 1) + i as usize]
    }

    /// Entry `(i, j)` of the squared-intensity plane.
    #[inline]
    pub fn sq_at(&self, i: u32, j: u32) -> u64 {
        self.sq_sum[j as usize * (self.width as usize + 1) + i as usize]
    }

    fn check(&self, r: &Rect) -> Result<(), ImagingError> {
        if r.fits(self.width, self.height) {
            Ok(())
        } else {
            Err(ImagingError::OutOfBounds {
                rect: *r,
                width: self.width,
                height: self.height,
            })
        }
    }

    #[inline]
    fn corners(plane: &[u64], stride: usize, r: &Rect) -> u64 {
        let (x0, y0) = (r.x as usize, r.y as usize);
        let (x1, y1) = (x0 + r.w as usize, y0 + r.h as usize);
        plane[y1 * stride + x1] + plane[y0 * stride + x0] - plane[y0 * stride + x1] - plane[y1 * stride + x0]
    }

    /// Sum of intensities over `r`, from four table lookups.
    pub fn rect_sum(&self, r: &Rect) -> Result<u64, ImagingError> {
        self.check(r)?;
        Ok(self.rect_sum_unchecked(r))
    }

    /// Sum of squared intensities over `r`.
    pub fn rect_sq_sum(&self, r: &Rect) -> Result<u64, ImagingError> {
        self.check(r)?;
        Ok(Self::corners(&self.sq_sum, self.width as usize + 1, r))
    }

    /// Caller guarantees `r` lies inside the image.
    #[inline]
    pub(crate) fn rect_sum_unchecked(&self, r: &Rect) -> u64 {
        Self::corners(&self.sum, self.width as usize + 1, r)
    }

    /// Mean and variance of the intensities inside `r`. Variance is floored at 0.
    pub fn window_mean_var(&self, r: &Rect) -> Result<(f64, f64), ImagingError> {
        let s = self.rect_sum(r)? as u128;
        let sq = self.rect_sq_sum(r)? as u128;
        let area = r.area() as u128;
        let mean = s as f64 / area as f64;
        // area²·variance = area·Σv² − (Σv)², exact in integers
        let scaled = (area * sq).saturating_sub(s * s);
        let var = scaled as f64 / (area * area) as f64;
        Ok((mean, var))
    }
}

pub fn integral(img: &GrayImage) -> IntegralImage {
    IntegralImage::new(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_sum(img: &GrayImage, r: &Rect) -> (u64, u64) {
        let mut s = 0u64;
        let mut sq = 0u64;
        for y in r.y..r.bottom() {
            for x in r.x..r.right() {
                let v = img.get(x, y) as u64;
                s += v;
                sq += v * v;
            }
        }
        (s, sq)
    }

    #[test]
    fn zero_image_gives_zero_planes() {
        let ii = integral(&GrayImage::filled(4, 4, 0).unwrap());
        for j in 0..=4 {
            for i in 0..=4 {
                assert_eq!(ii.at(i, j), 0);
                assert_eq!(ii.sq_at(i, j), 0);
            }
        }
    }

    #[test]
    fn ones_image_corner() {
        let ii = integral(&GrayImage::filled(2, 2, 1).unwrap());
        assert_eq!(ii.at(2, 2), 4);
        assert_eq!(ii.sq_at(2, 2), 4);
        assert_eq!(ii.at(0, 2), 0);
        assert_eq!(ii.at(2, 0), 0);
    }

    #[test]
    fn out_of_bounds_rect() {
        let ii = integral(&GrayImage::filled(3, 3, 9).unwrap());
        assert!(matches!(ii.rect_sum(&Rect::new(2, 0, 2, 1)), Err(ImagingError::OutOfBounds { .. })));
        assert!(ii.rect_sum(&Rect::new(0, 0, 0, 1)).is_err());
        assert_eq!(ii.rect_sum(&Rect::new(0, 0, 3, 3)).unwrap(), 81);
    }

    #[test]
    fn mean_var_examples() {
        let ii = integral(&GrayImage::filled(5, 5, 7).unwrap());
        assert_eq!(ii.window_mean_var(&Rect::new(1, 1, 3, 2)).unwrap(), (7.0, 0.0));

        let ii = integral(&GrayImage::new(2, 1, vec![0, 2]).unwrap());
        assert_eq!(ii.window_mean_var(&Rect::new(0, 0, 2, 1)).unwrap(), (1.0, 1.0));
    }

    fn image_and_rect() -> impl Strategy<Value = (GrayImage, Rect)> {
        (1u32..=24, 1u32..=24)
            .prop_flat_map(|(w, h)| {
                (
                    proptest::collection::vec(any::<u8>(), (w * h) as usize),
                    Just((w, h)),
                    0..w,
                    0..h,
                )
            })
            .prop_flat_map(|(px, (w, h), x, y)| (Just(px), Just((w, h)), Just(x), Just(y), 1..=w - x, 1..=h - y))
            .prop_map(|(px, (w, h), x, y, rw, rh)| (GrayImage::new(w, h, px).unwrap(), Rect::new(x, y, rw, rh)))
    }

    proptest! {
        #[test]
        fn rect_sum_matches_nested_loops((img, r) in image_and_rect()) {
            let ii = integral(&img);
            let (s, sq) = brute_sum(&img, &r);
            prop_assert_eq!(ii.rect_sum(&r).unwrap(), s);
            prop_assert_eq!(ii.rect_sq_sum(&r).unwrap(), sq);
        }

        #[test]
        fn mean_var_matches_two_pass((img, r) in image_and_rect()) {
            let ii = integral(&img);
            let vals: Vec<f64> = (r.y..r.bottom())
                .flat_map(|y| (r.x..r.right()).map(move |x| (x, y)))
                .map(|(x, y)| img.get(x, y) as f64)
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let (m, v) = ii.window_mean_var(&r).unwrap();
            prop_assert!((m - mean).abs() < 1e-9);
            prop_assert!((v - var).abs() < 1e-6);
            prop_assert!(v >= 0.0);
            let uniform = vals.iter().all(|&x| x == vals[0]);
            prop_assert_eq!(v == 0.0, uniform);
        }

        #[test]
        fn planes_monotone((img, _r) in image_and_rect()) {
            let ii = integral(&img);
            for j in 0..=img.height() {
                for i in 0..img.width() {
                    prop_assert!(ii.at(i + 1, j) >= ii.at(i, j));
                }
            }
            for i in 0..=img.width() {
                for j in 0..img.height() {
                    prop_assert!(ii.at(i, j + 1) >= ii.at(i, j));
                }
            }
        }
    }
}
