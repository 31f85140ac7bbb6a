//! Exponentially segmented patterns: segment schemes whose lengths grow as
//! `s_1 = b, s_i = b * 2^(i-2)`, and the mean-load transform over them.
//!
//! Segments are disjoint consecutive blocks. The segment-weighted error
//! metric only conserves total squared error under disjoint blocks;
//! cumulative variants would double-count.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EspError {
    #[error("segment count must be at least 1")]
    ZeroSegments,
    #[error("need {needed} future values, got {got}")]
    InsufficientFuture { needed: usize, got: usize },
    #[error("pattern length {got} does not match scheme segment count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("horizon of {0} steps is not b*2^(n-1) for any n")]
    NonDyadicHorizon(usize),
}

/// Exponentially growing segment lengths, in steps of the base interval
/// (5 minutes by default).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentScheme {
    baseline_steps: usize,
    lengths: Vec<usize>,
}

impl SegmentScheme {
    /// `n` segments over baseline `b` steps: lengths `[b, b, 2b, 4b, ...]`.
    pub fn new(n: usize, baseline_steps: usize) -> Result<Self, EspError> {
        if n == 0 {
            return Err(EspError::ZeroSegments);
        }
        assert!(baseline_steps >= 1, "baseline must be at least one step");
        let lengths = (1..=n)
            .map(|i| if i == 1 { baseline_steps } else { baseline_steps << (i - 2) })
            .collect();
        Ok(SegmentScheme { baseline_steps, lengths })
    }

    /// Total steps covered by `n` segments: `b * 2^(n-1)`.
    pub fn total_steps(n: usize, baseline_steps: usize) -> usize {
        baseline_steps << (n - 1)
    }

    /// Derives the scheme from a requested horizon. Horizons that are not
    /// `b * 2^(n-1)` for any `n` are rejected rather than padded.
    pub fn for_horizon(total_steps: usize, baseline_steps: usize) -> Result<Self, EspError> {
        let mut n = 1;
        loop {
            let total = SegmentScheme::total_steps(n, baseline_steps);
            if total == total_steps {
                return SegmentScheme::new(n, baseline_steps);
            }
            if total > total_steps {
                return Err(EspError::NonDyadicHorizon(total_steps));
            }
            n += 1;
        }
    }

    pub fn segments(&self) -> usize {
        self.lengths.len()
    }

    pub fn baseline_steps(&self) -> usize {
        self.baseline_steps
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn total(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// A scheme with fewer segments is a prefix of a larger one, so one
    /// trained model can be scored at any smaller segment count.
    pub fn prefix(&self, n: usize) -> Result<Self, EspError> {
        if n == 0 {
            return Err(EspError::ZeroSegments);
        }
        assert!(n <= self.segments());
        Ok(SegmentScheme { baseline_steps: self.baseline_steps, lengths: self.lengths[..n].to_vec() })
    }
}

/// Per-segment mean loads aligned with a [`SegmentScheme`].
pub type EspPattern = Vec<f64>;

/// Converts a raw future sequence into per-segment means: `l_i` is the mean
/// of the i-th consecutive block of `s_i` values.
pub fn esp_transform(future: &[f64], scheme: &SegmentScheme) -> Result<EspPattern, EspError> {
    let needed = scheme.total();
    if future.len() < needed {
        return Err(EspError::InsufficientFuture { needed, got: future.len() });
    }
    let mut out = Vec::with_capacity(scheme.segments());
    let mut offset = 0;
    for &len in scheme.lengths() {
        let block = &future[offset..offset + len];
        out.push(block.iter().sum::<f64>() / len as f64);
        offset += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_lengths_and_totals() {
        let s = SegmentScheme::new(4, 1).unwrap();
        assert_eq!(s.lengths(), &[1, 1, 2, 4]);
        assert_eq!(s.total(), 8); // 40 minutes at 5-minute steps

        let s = SegmentScheme::new(1, 1).unwrap();
        assert_eq!(s.lengths(), &[1]);
        assert_eq!(s.total(), 1);

        let s = SegmentScheme::new(8, 1).unwrap();
        assert_eq!(s.total(), 128); // 640 minutes
    }

    #[test]
    fn zero_segments_rejected() {
        assert!(matches!(SegmentScheme::new(0, 1), Err(EspError::ZeroSegments)));
    }

    #[test]
    fn for_horizon_round_trips_and_rejects() {
        for n in 1..=8 {
            let total = SegmentScheme::total_steps(n, 1);
            let s = SegmentScheme::for_horizon(total, 1).unwrap();
            assert_eq!(s.segments(), n);
        }
        assert!(SegmentScheme::for_horizon(6, 1).is_err());
    }

    #[test]
    fn transform_block_means() {
        let scheme = SegmentScheme::new(4, 1).unwrap();
        let future = [2.0, 2.0, 4.0, 4.0, 6.0, 6.0, 6.0, 6.0];
        assert_eq!(esp_transform(&future, &scheme).unwrap(), vec![2.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn transform_constant_is_constant() {
        let scheme = SegmentScheme::new(5, 1).unwrap();
        let future = vec![0.7; scheme.total()];
        let pattern = esp_transform(&future, &scheme).unwrap();
        assert!(pattern.iter().all(|v| (*v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn transform_hand_computed() {
        let scheme = SegmentScheme::new(3, 1).unwrap();
        let pattern = esp_transform(&[0.0, 1.0, 2.0, 3.0], &scheme).unwrap();
        assert_eq!(pattern, vec![0.0, 1.0, 2.5]);
    }

    #[test]
    fn transform_insufficient_future() {
        let scheme = SegmentScheme::new(3, 1).unwrap();
        assert!(matches!(
            esp_transform(&[1.0, 2.0], &scheme),
            Err(EspError::InsufficientFuture { needed: 4, got: 2 })
        ));
    }

    #[test]
    fn weighted_mean_conservation() {
        let scheme = SegmentScheme::new(5, 2).unwrap();
        let future: Vec<f64> = (0..scheme.total()).map(|k| (k as f64 * 0.83).sin()).collect();
        let pattern = esp_transform(&future, &scheme).unwrap();
        let weighted: f64 = pattern
            .iter()
            .zip(scheme.lengths())
            .map(|(l, s)| l * *s as f64)
            .sum();
        let direct: f64 = future.iter().sum();
        assert!((weighted - direct).abs() < 1e-9);
    }
}
