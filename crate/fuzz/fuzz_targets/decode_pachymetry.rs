#![no_main]

use corneal_core::io::{decode_pachymetry, encode_pachymetry};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = decode_pachymetry(data) {
        assert_eq!(decode_pachymetry(encode_pachymetry(&p).as_bytes()).unwrap(), p);
    }
});
