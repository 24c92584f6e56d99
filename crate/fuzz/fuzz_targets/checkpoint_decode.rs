//! Fuzzes the binary checkpoint decoder: corrupt headers, truncated tensor
//! payloads, and absurd declared sizes must all come back as errors, and a
//! successful decode must survive an encode/decode round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;
use recap_core::swin::checkpoint::{decode, encode};

fuzz_target!(|data: &[u8]| {
    if let Ok((params, meta)) = decode(data) {
        let bytes = encode(&params, meta);
        let (params2, meta2) = decode(&bytes).expect("re-encoded checkpoint must decode");
        assert_eq!(meta.epoch, meta2.epoch);
        assert_eq!(meta.seed, meta2.seed);
        assert_eq!(params.config(), params2.config());
        assert_eq!(params.len(), params2.len());
    }
});
