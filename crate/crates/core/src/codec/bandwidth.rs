use crate::codec::CodecError;

/// Bandwidths in kbps reachable with 1..=`max_layers` active layers.
pub fn valid_bandwidths(frame_rate: f64, bits_per_code: u32, max_layers: usize) -> Vec<f64> {
    (1..=max_layers).map(|n| n as f64 * frame_rate * bits_per_code as f64 / 1000.0).collect()
}

/// Number of active layers for a target bandwidth:
/// `bandwidth * 1000 / (frame_rate * bits_per_code)`.
///
/// Bandwidths that do not give a whole layer count in `1..=max_layers` are
/// rejected with the list of valid values.
pub fn bandwidth_to_nq(
    bandwidth_kbps: f64,
    frame_rate: f64,
    bits_per_code: u32,
    max_layers: usize,
) -> Result<usize, CodecError> {
    let invalid = || CodecError::InvalidBandwidth {
        bandwidth: bandwidth_kbps,
        valid: valid_bandwidths(frame_rate, bits_per_code, max_layers),
    };
    if !(bandwidth_kbps.is_finite() && bandwidth_kbps > 0.0 && frame_rate > 0.0 && bits_per_code > 0) {
        return Err(invalid());
    }
    let exact = bandwidth_kbps * 1000.0 / (frame_rate * bits_per_code as f64);
    let n = exact.round();
    if (exact - n).abs() > 1e-9 * exact.max(1.0) || n < 1.0 || n > max_layers as f64 {
        return Err(invalid());
    }
    Ok(n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_bandwidths() {
        for (bw, n) in [(1.5, 2), (3.0, 4), (6.0, 8), (12.0, 16), (24.0, 32)] {
            assert_eq!(bandwidth_to_nq(bw, 75.0, 10, 32).unwrap(), n);
        }
        assert_eq!(bandwidth_to_nq(20.0, 1000.0, 10, 32).unwrap(), 2);
    }

    #[test]
    fn invalid_bandwidths() {
        let err = bandwidth_to_nq(7.0, 75.0, 10, 32).unwrap_err();
        match &err {
            CodecError::InvalidBandwidth { valid, .. } => {
                assert_eq!(valid.len(), 32);
                assert_eq!(valid[0], 0.75);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("1.5, 2.25"));
        assert!(bandwidth_to_nq(48.0, 75.0, 10, 32).is_err());
        assert!(bandwidth_to_nq(0.0, 75.0, 10, 32).is_err());
    }
}
