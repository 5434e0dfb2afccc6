#![no_main]

use gait::io::{format_points, parse_points};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(points) = parse_points(text) {
        // anything accepted must survive a write/read cycle with its shape
        let again = parse_points(&format_points(&points)).expect("formatted points reparse");
        assert_eq!((again.dim(), again.len()), (points.dim(), points.len()));
    }
});
