#![no_main]

use corneal_core::pipeline::EvalConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(config) = serde_json::from_slice::<EvalConfig>(data) {
        let _ = config.hash();
    }
});
