#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = gait::io::parse_joint(text) {
        assert!(t.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
});
