#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(space) = gait::io::parse_gram(text) {
        let k = space.matrix();
        assert_eq!(k, &k.transpose());
        assert!(k.iter().all(|v| (0.0..=1.0).contains(v)));
    }
});
