#![no_main]

use libfuzzer_sys::fuzz_target;
use saer::harness::output::{read_rounds_csv, read_trials_csv};

fuzz_target!(|data: &[u8]| {
    let _ = read_rounds_csv(data);
    let _ = read_trials_csv(data);
});
