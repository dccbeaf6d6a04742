#![no_main]

use corneal_core::io::{decode_manifest, encode_manifest};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decode_manifest(data).map(|m| encode_manifest(&m));
});
