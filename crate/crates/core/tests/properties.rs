//! Property tests for the structural invariants: XOR algebra, hex
//! serialization, repetition-code correctability, the check-set indicator
//! duality, and honest-session key agreement across arbitrary sizes.

use proptest::prelude::*;

use aqkd_core::{
    aqkd::{run_session, AqkdParams, Bob, Charlie, CheckAnnouncement, SessionOutcome},
    bits::BitString,
    ecc::RepetitionCode,
    otp::{otp_decrypt, otp_encrypt},
    qubit::QuantumChannelConfig,
    seed_rng,
    transcript::Transcript,
};

fn bits(len: impl Into<proptest::collection::SizeRange>) -> impl Strategy<Value = BitString> {
    proptest::collection::vec(0u8..=1, len)
        .prop_map(|v| BitString::from_bits(&v).expect("bits are 0/1"))
}

proptest! {
    // pad twice with the same key and the message comes back
    #[test]
    fn otp_round_trip(pair in bits(0..256).prop_flat_map(|m| {
        let len = m.len();
        (Just(m), bits(len..=len))
    })) {
        let (msg, pad) = pair;
        let cipher = otp_encrypt(&pad, &msg).unwrap();
        prop_assert_eq!(otp_decrypt(&pad, &cipher).unwrap(), msg.clone());
        // zero pad is the identity; XOR commutes
        let zero = BitString::zeros(msg.len());
        prop_assert_eq!(otp_encrypt(&zero, &msg).unwrap(), msg.clone());
        prop_assert_eq!(pad.xor(&msg).unwrap(), msg.xor(&pad).unwrap());
    }

    #[test]
    fn hex_round_trip(b in bits(0..300)) {
        let hex = b.to_hex();
        prop_assert!(hex.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
        prop_assert_eq!(BitString::from_hex(&hex, b.len()).unwrap(), b);
    }

    #[test]
    fn json_round_trip(b in bits(0..300)) {
        let text = serde_json::to_string(&b).unwrap();
        let back: BitString = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, b);
    }

    // the repetition code corrects up to (r-1)/2 flips per block and its
    // encode/decode pair is the identity on clean codewords
    #[test]
    fn repetition_code_corrects_within_bound(
        payload in bits(1..24),
        r in prop::sample::select(vec![3usize, 5, 7]),
        flip_seed in any::<u64>(),
    ) {
        let code = RepetitionCode::new(r).unwrap();
        let codeword = code.encode(&payload).unwrap();
        prop_assert_eq!(code.decode(&codeword).unwrap(), payload.clone());

        let mut rng = seed_rng(flip_seed);
        let mut noisy: Vec<u8> = codeword.iter().collect();
        use rand::seq::SliceRandom;
        for block in 0..payload.len() {
            let budget = (r - 1) / 2;
            let mut positions: Vec<usize> = (0..r).collect();
            positions.shuffle(&mut rng);
            for &off in positions.iter().take(budget) {
                noisy[block * r + off] ^= 1;
            }
        }
        let noisy = BitString::from_bits(&noisy).unwrap();
        prop_assert_eq!(code.decode(&noisy).unwrap(), payload);
    }

    // f is 0 exactly on sigma, for arbitrary subsets
    #[test]
    fn f_sigma_duality(total in 1usize..96, picks in proptest::collection::btree_set(0usize..96, 0..32)) {
        let sigma: Vec<usize> = picks.into_iter().filter(|&p| p < total).collect();
        let mut f = BitString::new();
        for j in 0..total {
            f.push(!sigma.contains(&j) as u8);
        }
        let ann = CheckAnnouncement {
            delivered_indices: (0..total).collect(),
            bases: BitString::zeros(total),
            sigma: sigma.clone(),
            f,
            outcomes_at_sigma: BitString::zeros(sigma.len()),
        };
        prop_assert_eq!(ann.sigma_from_f(), sigma);
    }

    // select/prefix/slice agree with bit-by-bit access
    #[test]
    fn slicing_consistency(b in bits(1..200), cut in 0usize..200) {
        let cut = cut % (b.len() + 1);
        prop_assert_eq!(b.prefix(cut), b.slice(0, cut));
        let indices: Vec<usize> = (0..cut).collect();
        prop_assert_eq!(b.select(&indices), b.prefix(cut));
        for j in 0..cut {
            prop_assert_eq!(b.prefix(cut).bit(j), b.bit(j));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // an honest noiseless session always completes with matching keys,
    // whatever the security parameter and key length
    #[test]
    fn honest_sessions_agree(m in 8usize..40, key_bits in 0usize..6, seed in any::<u64>()) {
        let key_bits = key_bits * 2; // 0 means the basic variant
        let mut rng = seed_rng(seed);
        let mut bob = Bob::new();
        let mut charlie = Charlie::new();
        let cred = bob.issue(m, &mut rng).unwrap();
        let mut transcript = Transcript::new();
        let params = AqkdParams {
            m,
            key_bits,
            ecc: RepetitionCode::new(3).unwrap(),
            tolerance: 0.0,
            channel: QuantumChannelConfig::default(),
        };
        match run_session(&mut bob, &mut charlie, &cred, &params, None, &mut transcript, &mut rng).unwrap() {
            SessionOutcome::Completed { user_key, charlie_key, stats } => {
                prop_assert_eq!(user_key, charlie_key);
                prop_assert_eq!(stats.check_error_rate, Some(0.0));
            }
            SessionOutcome::Aborted { reason, .. } => {
                // only a short sift can stop a noiseless honest run
                prop_assert!(matches!(
                    reason,
                    aqkd_core::aqkd::AbortReason::InsufficientSift { .. }
                        | aqkd_core::aqkd::AbortReason::Undecidable
                ), "unexpected abort {:?}", reason);
            }
            SessionOutcome::Rejected { reason } => {
                return Err(TestCaseError::fail(format!("rejected: {reason:?}")));
            }
        }
    }
}
