//! Common average referencing.

use crate::SignalError;

/// Subtract the instantaneous cross-channel mean from every channel:
/// x'_c(t) = x_c(t) - mean_c x_c(t). Column sums of the result are zero.
pub fn apply_car(data: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, SignalError> {
    let c = data.len();
    if c < 2 {
        return Err(SignalError::TooFewChannels(c));
    }
    let t = data[0].len();
    if data.iter().any(|row| row.len() != t) {
        return Err(SignalError::InvalidRecording("ragged channel lengths".into()));
    }
    let mut out = data.to_vec();
    let inv_c = 1.0 / c as f64;
    for s in 0..t {
        let mut mean = 0.0;
        for row in data {
            mean += row[s];
        }
        mean *= inv_c;
        for row in &mut out {
            row[s] -= mean;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn common_signal_vanishes() {
        let data = vec![vec![5.0; 4], vec![5.0; 4], vec![5.0; 4]];
        let out = apply_car(&data).unwrap();
        assert!(out.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn two_channel_example() {
        let data = vec![vec![1.0, 3.0], vec![3.0, 1.0]];
        let out = apply_car(&data).unwrap();
        assert_eq!(out[0], vec![-1.0, 1.0]);
        assert_eq!(out[1], vec![1.0, -1.0]);
    }

    #[test]
    fn column_sums_vanish() {
        let data: Vec<Vec<f64>> = (0..5)
            .map(|c| (0..50).map(|t| ((c * 31 + t * 17) % 13) as f64 * 3.7 - 20.0).collect())
            .collect();
        let scale = data.iter().flatten().fold(0.0f64, |m, &v| m.max(v.abs()));
        let out = apply_car(&data).unwrap();
        for t in 0..50 {
            let s: f64 = out.iter().map(|row| row[t]).sum();
            assert!(s.abs() < 1e-9 * scale, "column {t} sums to {s}");
        }
    }

    #[test]
    fn idempotent_and_shift_invariant() {
        let data: Vec<Vec<f64>> =
            (0..4).map(|c| (0..30).map(|t| ((c + 1) * t) as f64 * 0.21).collect()).collect();
        let once = apply_car(&data).unwrap();
        let twice = apply_car(&once).unwrap();
        for (a, b) in once.iter().flatten().zip(twice.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
        let shifted: Vec<Vec<f64>> =
            data.iter().map(|row| row.iter().map(|v| v + 123.456).collect()).collect();
        let car_shifted = apply_car(&shifted).unwrap();
        for (a, b) in once.iter().flatten().zip(car_shifted.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn single_channel_rejected() {
        assert!(apply_car(&[vec![1.0, 2.0]]).is_err());
    }
}
