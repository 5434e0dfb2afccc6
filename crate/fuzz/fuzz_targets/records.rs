#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = gait::io::parse_records(text) {
        for r in &records {
            // a malformed record must be refused, not crash the replay
            let _ = gait::verify::replay(r);
        }
    }
});
