#![no_main]

use libfuzzer_sys::fuzz_target;
use netsched::harness::run::RunSummary;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(summary) = RunSummary::from_toml_str(text) {
        let _ = summary.to_toml_string();
    }
});
