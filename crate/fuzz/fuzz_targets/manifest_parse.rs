//! Fuzzes the manifest JSON parser: arbitrary bytes must parse into a
//! manifest that round-trips, or error out — never panic, never accept a
//! path that escapes the dataset directory.

#![no_main]

use libfuzzer_sys::fuzz_target;
use recap_core::io::Manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(manifest) = Manifest::from_json(data) {
        for entry in &manifest.entries {
            let p = std::path::Path::new(&entry.path);
            assert!(
                !p.is_absolute() && !entry.path.split(['/', '\\']).any(|c| c == ".."),
                "validated manifest kept an escaping path: {:?}",
                entry.path
            );
        }
        let again = Manifest::from_json(manifest.to_json().as_bytes())
            .expect("a validated manifest must round-trip");
        assert_eq!(manifest, again);
    }
});
