#![no_main]

use corneal_core::curvefit::{fit_line_stagewise, fit_quad_stagewise};
use corneal_core::io::decode_points;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(points) = decode_points(data) {
        let _ = fit_line_stagewise(&points);
        let _ = fit_quad_stagewise(&points);
    }
});
