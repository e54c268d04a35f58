use cis_middleware::testkit::{fixture_doc, kind_samples, random_document, random_message, random_value};
use cis_middleware::{conforms_to, decode_value, encode_value, frame, parse_idl, pretty_print, unframe};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn thousand_round_trips_per_kind() {
    let doc = fixture_doc();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for ty in kind_samples() {
        for _ in 0..1000 {
            let v = random_value(&mut rng, &ty, &doc, 4);
            assert!(conforms_to(&v, &ty, &doc), "generator produced non-conformant {v} for {ty}");
            let bytes = encode_value(&v, &ty, &doc).unwrap();
            assert_eq!(bytes, encode_value(&v, &ty, &doc).unwrap(), "non-deterministic encoding");
            let (back, used) = decode_value(&bytes, &ty, &doc).unwrap();
            assert_eq!(used, bytes.len());
            assert_eq!(back, v, "{ty}");
        }
    }
}

#[test]
fn thousand_frame_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let m = random_message(&mut rng, 256);
        let bytes = frame(&m);
        assert_eq!(bytes.len(), 18 + m.body.len());
        let mut cur = std::io::Cursor::new(bytes);
        assert_eq!(unframe(&mut cur, 1 << 20).unwrap(), Some(m));
    }
}

#[test]
fn truncated_encodings_never_decode() {
    let doc = fixture_doc();
    let ty = cis_middleware::IdlType::Record("Outer".into());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let v = random_value(&mut rng, &ty, &doc, 3);
        let bytes = encode_value(&v, &ty, &doc).unwrap();
        for cut in 0..bytes.len() {
            assert!(decode_value(&bytes[..cut], &ty, &doc).is_err(), "prefix {cut} decoded");
        }
    }
}

proptest! {
    #[test]
    fn parser_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let doc = random_document(&mut rng);
        let printed = pretty_print(&doc);
        let reparsed = parse_idl(&printed).unwrap();
        prop_assert_eq!(&reparsed, &doc);
        prop_assert_eq!(parse_idl(&pretty_print(&reparsed)).unwrap(), reparsed);
    }

    #[test]
    fn random_bytes_never_panic_decoder(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let doc = fixture_doc();
        for ty in kind_samples() {
            let _ = decode_value(&bytes, &ty, &doc);
        }
    }
}
