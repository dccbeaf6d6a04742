#![no_main]

use corneal_core::io::{decode_image, encode_ppm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_image(data) {
        // anything accepted must survive a PPM round trip
        let again = decode_image(&encode_ppm(&img)).expect("re-encoded image decodes");
        assert_eq!(again, img);
    }
});
