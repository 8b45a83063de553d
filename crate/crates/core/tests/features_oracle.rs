// SPDX-License-Identifier: Apache-2.0
mod common;

use agetrojan::bits::Bits;
use agetrojan::features::{bit_sets, feature_vector};
use common::{feature_pair as pair, feature_reference as reference};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn features_match_reference_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfea7);
    for m in [4, 32, 64] {
        let mut mismatches = 0;
        for _ in 0..100_000 {
            let (y, y0) = pair(&mut rng, m);
            let f = feature_vector(&y, &y0).unwrap();
            let (ham, rise, fall) = reference(&y, &y0);
            let ok = f.f1 + f.f2 == ham as f64 && f.f3 == rise as f64 && f.f4 == fall as f64;
            if !ok {
                mismatches += 1;
            }
        }
        assert_eq!(mismatches, 0, "m = {m}");
    }
}

#[test]
fn counts_follow_indicator_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let (y, y0) = pair(&mut rng, 32);
        let (ones_y, zeros_y) = bit_sets(&y, 32);
        let (ones_0, zeros_0) = bit_sets(&y0, 32);
        let f = feature_vector(&y, &y0).unwrap();
        let rises = ones_y.iter().filter(|r| zeros_0.contains(r)).count();
        let falls = zeros_y.iter().filter(|r| ones_0.contains(r)).count();
        assert_eq!((f.f1, f.f2), (rises as f64, falls as f64));
    }
}

#[test]
fn width_mismatch_is_an_error() {
    assert!(feature_vector(&Bits::zero(4), &Bits::zero(5)).is_err());
}
