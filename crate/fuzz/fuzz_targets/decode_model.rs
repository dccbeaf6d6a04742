#![no_main]

use corneal_core::persist::{decode_model, encode_model};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = decode_model(data) {
        let text = encode_model(&model).expect("decoded model encodes");
        assert_eq!(decode_model(text.as_bytes()).expect("re-encoded model decodes"), model);
    }
});
