//! Fuzzes the experiment-config TOML parser: arbitrary text must either
//! parse into a config that re-serializes and re-parses to itself, or fail
//! with an error — never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;
use recap_core::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = ExperimentConfig::from_toml(text) {
        let again = ExperimentConfig::from_toml(&config.to_toml())
            .expect("a validated config must round-trip");
        assert_eq!(config, again);
    }
});
