#![no_main]

use infermeter_core::model::RunRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(run) = RunRecord::read_from(data) {
        let _ = run.pairs();
    }
});
