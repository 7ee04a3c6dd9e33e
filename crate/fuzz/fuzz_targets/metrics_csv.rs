#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use netsched::harness::report::{downsample, read_metrics};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_metrics(data, Path::new("metrics.csv")) {
        let keep = downsample(&rows);
        assert!(keep.iter().all(|&i| i < rows.len()));
    }
});
