#![no_main]

use libfuzzer_sys::fuzz_target;
use netsched::scheduler::SimulationSnapshot;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(snap) = SimulationSnapshot::from_toml_str(text) {
        let _ = snap.to_toml_string();
    }
});
