#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use netsched::stochastic::ArrivalTrace;

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = ArrivalTrace::read_csv(data, Path::new("fuzz.csv")) {
        let mut out = Vec::new();
        trace.write_csv(&mut out).unwrap();
        let again = ArrivalTrace::read_csv(out.as_slice(), Path::new("fuzz.csv")).unwrap();
        assert_eq!(trace, again);
    }
});
