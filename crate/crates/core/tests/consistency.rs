use num_bigint::BigInt;
use num_traits::One;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sllift_core::hardness::{hard_instance, sarnak_instance};
use sllift_core::lifting::{lift, random_sl};
use sllift_core::oracle::{collect_lifts, min_lift_norm, DEFAULT_BUDGET};
use sllift_core::{EnumSpec, IntMatrix, LiftConfig, MinNorm};

#[test]
fn oracle_is_a_lower_bound_for_lift() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for q in 2..=12u64 {
        for i in 0..8 {
            let x = random_sl(&mut rng, 2, q);
            let cert = lift(&x, q, i, &LiftConfig::default()).unwrap();
            let MinNorm::Found { norm, witness } = min_lift_norm(&x, q, 4 * q * q, DEFAULT_BUDGET).unwrap() else {
                panic!("no lift of norm <= 4q² for q = {q}");
            };
            assert!(witness.congruent(&x, q) && cert.gamma.congruent(&x, q));
            assert!(cert.gamma.max_norm() >= BigInt::from(norm));
        }
    }
}

#[test]
fn lifts_in_dimension_three_match_oracle_mod_2() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..4 {
        let x = random_sl(&mut rng, 3, 2);
        let cert = lift(&x, 2, seed, &LiftConfig::default()).unwrap();
        let m = min_lift_norm(&x, 2, 2, DEFAULT_BUDGET).unwrap();
        assert!(m.norm().is_some());
        assert!(cert.gamma.max_norm() >= BigInt::from(m.norm().unwrap()));
    }
}

#[test]
fn every_small_lift_of_a_hard_instance_obeys_the_congruence() {
    for q in [3u64, 4, 5] {
        let h = hard_instance(q, 3, 4).unwrap();
        let lifts = collect_lifts(&EnumSpec::lifts(&h.x, q, 2 * q), DEFAULT_BUDGET).unwrap();
        assert!(!lifts.is_empty(), "q = {q}");
        for m in lifts {
            let g = IntMatrix::from_i64(3, 3, &m);
            assert!(g.det().unwrap().is_one());
            assert!(h.obstruction.holds(&g), "q = {q}: {g}");
            assert!(g.max_norm() >= BigInt::from(h.lower_bound_ceil()));
        }
    }
}

#[test]
fn sarnak_lifts_carry_the_trace() {
    for m in 1..=2u64 {
        let h = sarnak_instance(m).unwrap();
        let lifts = collect_lifts(&EnumSpec::lifts(&h.x, h.q, h.q * h.q), DEFAULT_BUDGET).unwrap();
        assert!(!lifts.is_empty());
        for l in lifts {
            let g = IntMatrix::from_i64(2, 2, &l);
            assert!(h.obstruction.holds(&g));
            assert!(g.max_norm() >= BigInt::from(h.lower_bound_ceil()));
        }
    }
}
