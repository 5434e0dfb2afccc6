#![no_main]

use gait::io::{format_pgm, parse_grid};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = parse_grid(text) {
        let again = parse_grid(&format_pgm(g.mass())).expect("PGM output reparses");
        assert_eq!(again.side(), g.side());
    }
});
