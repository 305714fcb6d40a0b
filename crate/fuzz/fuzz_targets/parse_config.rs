#![no_main]

use libfuzzer_sys::fuzz_target;
use shelab::config::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // any accepted config must survive its own echo unchanged
    if let Ok(config) = parse_config(text) {
        let echo = config.to_json();
        let again = parse_config(&echo).expect("echoed config re-parses");
        assert_eq!(config, again);
        assert_eq!(echo, again.to_json());
    }
});
