#![no_main]

use gait::io::{format_vector, parse_vector};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_vector(text) {
        let again = parse_vector(&format_vector(&v)).expect("formatted vector reparses");
        assert_eq!(again.len(), v.len());
    }
});
