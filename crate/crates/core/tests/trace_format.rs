mod common;

use proptest::prelude::*;
use sentinel_core::trace::{encode_trace, read_trace, validate_trace, TraceError};
use sentinel_core::HeadId;

fn sample(seed: u64, steps: usize) -> sentinel_core::EpisodeTrace {
    let mut r = common::rng(seed);
    let heads = [HeadId::new(0, 1), HeadId::new(4, 2), HeadId::new(31, 31)];
    let mut t = common::random_trace(&mut r, &heads, 3, 7, steps);
    t.reference_path = Some(vec![[0.0, 0.0], [0.25, -0.125], [0.5, 0.1]]);
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_is_bit_exact(seed in any::<u64>(), steps in 1usize..20) {
        let t = sample(seed, steps);
        let bytes = encode_trace(&t).unwrap();
        let back = read_trace(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(encode_trace(&back).unwrap(), bytes);
    }

    #[test]
    fn every_prefix_is_rejected(seed in any::<u64>(), cut_frac in 0.0f64..1.0) {
        let bytes = encode_trace(&sample(seed, 3)).unwrap();
        let cut = ((bytes.len() as f64) * cut_frac) as usize;
        prop_assert!(read_trace(&bytes[..cut]).is_err());
    }
}

#[test]
fn encoding_is_deterministic() {
    assert_eq!(encode_trace(&sample(1, 5)).unwrap(), encode_trace(&sample(1, 5)).unwrap());
}

#[test]
fn wrong_magic_is_a_format_error() {
    let mut bytes = encode_trace(&sample(2, 2)).unwrap();
    bytes[0] = b'X';
    assert!(matches!(read_trace(bytes.as_slice()), Err(TraceError::Format(_))));
}

#[test]
fn trailing_bytes_are_rejected() {
    let mut bytes = encode_trace(&sample(3, 2)).unwrap();
    bytes.push(0);
    assert!(matches!(read_trace(bytes.as_slice()), Err(TraceError::Validation(_))));
}

#[test]
fn negative_attention_is_reported() {
    let mut t = sample(4, 2);
    let h = t.stored_heads[1];
    t.records[1].heads.get_mut(&h).unwrap().row_mut(0)[0] = -0.5;
    let v = validate_trace(&t);
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].record, Some(1));
    assert!(encode_trace(&t).is_err() || read_trace(encode_trace(&t).unwrap().as_slice()).is_err());
}

#[test]
fn non_increasing_steps_are_reported() {
    let mut t = sample(5, 3);
    t.records[2].step = 1;
    assert!(validate_trace(&t).iter().any(|v| v.field == "step"));
}
