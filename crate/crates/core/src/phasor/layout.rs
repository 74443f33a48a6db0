use crate::error::{PrefError, Result};

/// Maximum number of spatial dimensions supported.
pub const MAX_DIMS: usize = 3;

/// Frequency vector with unused trailing axes set to zero.
pub type FreqVec = [i64; MAX_DIMS];

/// Per-axis frequency index sets of a factorized phasor volume.
///
/// Every factor stores the full signed axis `{-N/2, ..., N/2-1}` on all axes
/// except its own reduced axis, which holds the `D` log-sampled frequencies
/// `{0, 1, 2, 4, ..., 2^(D-2)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrequencyLayout {
    dims: usize,
    resolution: usize,
    reduced_size: usize,
}

impl FrequencyLayout {
    pub fn new(dims: usize, resolution: usize, reduced_size: usize) -> Result<Self> {
        if !(2..=MAX_DIMS).contains(&dims) {
            return Err(PrefError::Layout(format!("dims must be 2 or 3, got {dims}")));
        }
        if resolution < 2 || resolution % 2 != 0 {
            return Err(PrefError::Layout(format!(
                "resolution must be an even integer >= 2, got {resolution}"
            )));
        }
        if reduced_size == 0 {
            return Err(PrefError::Layout("reduced size must be >= 1".into()));
        }
        let layout = Self {
            dims,
            resolution,
            reduced_size,
        };
        let max_reduced = layout.reduced_freq(reduced_size - 1);
        if max_reduced >= (resolution / 2) as i64 {
            return Err(PrefError::Layout(format!(
                "highest reduced frequency {max_reduced} must stay below N/2 = {}",
                resolution / 2
            )));
        }
        Ok(layout)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn reduced_size(&self) -> usize {
        self.reduced_size
    }

    /// Frequency stored at position `i` of a reduced axis.
    #[inline]
    pub fn reduced_freq(&self, i: usize) -> i64 {
        if i == 0 {
            0
        } else {
            1i64 << (i - 1)
        }
    }

    pub fn reduced_freqs(&self) -> Vec<i64> {
        (0..self.reduced_size).map(|i| self.reduced_freq(i)).collect()
    }

    /// Signed frequency at storage index `i` of a full axis (FFT ordering).
    #[inline]
    pub fn full_freq(&self, i: usize) -> i64 {
        let n = self.resolution as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// The centered set `{-N/2, ..., N/2-1}` in ascending order.
    pub fn full_freqs(&self) -> Vec<i64> {
        let half = (self.resolution / 2) as i64;
        (-half..half).collect()
    }

    /// Extent of factor `factor` along spatial axis `axis`.
    #[inline]
    pub fn axis_len(&self, factor: usize, axis: usize) -> usize {
        if axis == factor {
            self.reduced_size
        } else {
            self.resolution
        }
    }

    /// Number of complex entries in one channel of one factor.
    pub fn factor_plane_len(&self) -> usize {
        self.reduced_size * self.resolution.pow((self.dims - 1) as u32)
    }

    /// Shape `[k, extents...]` of a factor.
    pub fn factor_shape(&self, factor: usize, channels: usize) -> Vec<usize> {
        let mut shape = vec![channels];
        shape.extend((0..self.dims).map(|a| self.axis_len(factor, a)));
        shape
    }

    /// Frequency vectors of one factor channel, in storage order.
    pub fn factor_frequencies(&self, factor: usize) -> Vec<FreqVec> {
        let n = self.dims;
        let extents: Vec<usize> = (0..n).map(|a| self.axis_len(factor, a)).collect();
        let total = self.factor_plane_len();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            let mut f = [0i64; MAX_DIMS];
            for a in 0..n {
                f[a] = if a == factor {
                    self.reduced_freq(idx[a])
                } else {
                    self.full_freq(idx[a])
                };
            }
            out.push(f);
            // row-major increment
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] < extents[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        out
    }

    /// Whether factor `factor` stores frequency vector `f`.
    pub fn factor_contains(&self, factor: usize, f: &FreqVec) -> bool {
        let half = (self.resolution / 2) as i64;
        (0..self.dims).all(|a| {
            if a == factor {
                f[a] >= 0 && (0..self.reduced_size).any(|i| self.reduced_freq(i) == f[a])
            } else {
                (-half..half).contains(&f[a])
            }
        })
    }

    /// Negation of `f`, wrapping full-range components back into `[-N/2, N/2)`.
    pub fn negate_wrapped(&self, f: &FreqVec) -> FreqVec {
        let n = self.resolution as i64;
        let half = n / 2;
        let mut out = [0i64; MAX_DIMS];
        for a in 0..self.dims {
            let v = -f[a];
            out[a] = if v >= half { v - n } else { v };
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_frequencies_are_log_sampled() {
        let l = FrequencyLayout::new(2, 64, 6).unwrap();
        assert_eq!(l.reduced_freqs(), vec![0, 1, 2, 4, 8, 16]);
        assert_eq!(l.full_freqs().len(), 64);
        assert_eq!(l.full_freqs()[0], -32);
        assert_eq!(l.full_freq(31), 31);
        assert_eq!(l.full_freq(32), -32);
    }

    #[test]
    fn rejects_unrepresentable_reduced_axis() {
        // 2^(7-2) = 32 is not below 64/2
        assert!(matches!(
            FrequencyLayout::new(2, 64, 7),
            Err(PrefError::Layout(_))
        ));
        assert!(FrequencyLayout::new(4, 8, 2).is_err());
        assert!(FrequencyLayout::new(2, 7, 2).is_err());
        assert!(FrequencyLayout::new(2, 8, 0).is_err());
    }

    #[test]
    fn factor_shapes_follow_reduced_axis() {
        let l = FrequencyLayout::new(3, 16, 4).unwrap();
        assert_eq!(l.factor_shape(0, 16), vec![16, 4, 16, 16]);
        assert_eq!(l.factor_shape(1, 16), vec![16, 16, 4, 16]);
        assert_eq!(l.factor_shape(2, 16), vec![16, 16, 16, 4]);
    }

    #[test]
    fn factor_frequencies_enumerate_in_storage_order() {
        let l = FrequencyLayout::new(2, 4, 2).unwrap();
        let f = l.factor_frequencies(1);
        // axis 0 full (4), axis 1 reduced (2)
        assert_eq!(f.len(), 8);
        assert_eq!(&f[0][..2], &[0, 0]);
        assert_eq!(&f[1][..2], &[0, 1]);
        assert_eq!(&f[2][..2], &[1, 0]);
        assert_eq!(&f[5][..2], &[-2, 1]);
        assert!(f.iter().all(|v| l.factor_contains(1, v)));
    }

    #[test]
    fn negation_wraps_nyquist() {
        let l = FrequencyLayout::new(2, 8, 3).unwrap();
        assert_eq!(l.negate_wrapped(&[-4, 3, 0]), [-4, -3, 0]);
    }
}
