#![no_main]

use libfuzzer_sys::fuzz_target;
use netsched::model::NetworkSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(net) = NetworkSpec::from_toml_str(text) {
        // anything accepted must survive a round trip
        let text = net.to_toml_string().unwrap();
        let again = NetworkSpec::from_toml_str(&text).unwrap();
        assert_eq!(text, again.to_toml_string().unwrap());
    }
});
