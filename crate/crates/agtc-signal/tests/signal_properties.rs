//! Randomized properties of the preprocessing primitives.

use agtc_signal::{apply_car, design_butterworth_lowpass, fft_resample};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn car_is_idempotent_and_shift_invariant(
        channels in 2usize..6,
        samples in 1usize..40,
        offset in -1000.0f64..1000.0,
        seed in any::<u64>(),
    ) {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 200.0 - 100.0
        };
        let data: Vec<Vec<f64>> =
            (0..channels).map(|_| (0..samples).map(|_| next()).collect()).collect();
        let once = apply_car(&data).unwrap();
        let twice = apply_car(&once).unwrap();
        let shifted: Vec<Vec<f64>> =
            data.iter().map(|row| row.iter().map(|v| v + offset).collect()).collect();
        let car_shifted = apply_car(&shifted).unwrap();
        for ((a, b), c) in once.iter().flatten().zip(twice.iter().flatten()).zip(car_shifted.iter().flatten()) {
            prop_assert!((a - b).abs() < 1e-9, "not idempotent");
            prop_assert!((a - c).abs() < 1e-9, "not shift invariant");
        }
        for t in 0..samples {
            let sum: f64 = once.iter().map(|row| row[t]).sum();
            prop_assert!(sum.abs() < 1e-9 * 100.0);
        }
    }

    #[test]
    fn resample_identity_and_length_rule(
        n in 8usize..300,
        num in 1usize..8,
        den in 1usize..8,
        seed in any::<u64>(),
    ) {
        let mut state = seed | 1;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x: Vec<f64> = (0..n).map(|_| next()).collect();
        let fs_old = 100.0 * den as f64;
        let fs_new = 100.0 * num as f64;
        let y = fft_resample(&x, fs_old, fs_new).unwrap();
        let expected = (n as f64 * fs_new / fs_old).round_ties_even() as usize;
        prop_assert_eq!(y.len(), expected);
        if num == den {
            for (a, b) in x.iter().zip(&y) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn designed_filters_are_always_stable(order in 1usize..16, cutoff in 1.0f64..124.0) {
        let f = design_butterworth_lowpass(order, cutoff, 250.0).unwrap();
        prop_assert!(f.max_pole_magnitude() < 1.0);
        prop_assert_eq!(f.sections.len(), order.div_ceil(2));
        prop_assert!((f.magnitude_at(0.0) - 1.0).abs() < 1e-12);
    }
}
