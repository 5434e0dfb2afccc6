#![no_main]

use gait::io::{format_weighted_points, parse_weighted_points};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_weighted_points(text) {
        let sum: f64 = m.weights.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        let again = parse_weighted_points(&format_weighted_points(&m)).expect("formatted measure reparses");
        assert_eq!(again.len(), m.len());
    }
});
