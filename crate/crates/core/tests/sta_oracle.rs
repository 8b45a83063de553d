// SPDX-License-Identifier: Apache-2.0
mod common;

use agetrojan::timing::{critical_path, k_longest_paths};
use common::{brute_force, path_count, random_annotation, random_netlist, MAX_PATHS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const K: usize = 50;

#[test]
fn k_longest_and_critical_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x57a);
    let mut checked = 0;
    let mut with_ties = 0;
    while checked < 100 {
        let n = random_netlist(&mut rng);
        if path_count(&n) > MAX_PATHS {
            continue;
        }
        let a = random_annotation(&n, &mut rng);
        let oracle = brute_force(&n, &a);
        if oracle.is_empty() {
            continue;
        }
        checked += 1;
        if oracle.len() > 1 && oracle[0].0 == oracle[1].0 {
            with_ties += 1;
        }

        let cp = critical_path(&n, &a).unwrap();
        let cp_ids: Vec<String> = cp.ids(&n).into_iter().map(String::from).collect();
        assert_eq!((cp.delay, &cp_ids), (oracle[0].0, &oracle[0].1), "critical path, sample {checked}");

        let ranked = k_longest_paths(&n, &a, K).unwrap();
        let want = &oracle[..oracle.len().min(K)];
        assert_eq!(ranked.shortfall, oracle.len() < K, "sample {checked}");
        assert_eq!(ranked.paths.len(), want.len(), "sample {checked}");
        for (r, (p, (d, ids))) in ranked.paths.iter().zip(want).enumerate() {
            let got: Vec<String> = p.ids(&n).into_iter().map(String::from).collect();
            assert_eq!((p.delay, &got), (*d, ids), "sample {checked} rank {}", r + 1);
        }
    }
    assert!(with_ties > 5, "the sample should exercise tie-breaking ({with_ties})");
}
