#![no_main]

use infermeter_core::workload::{parse_trace, LengthFilter};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let all = parse_trace(data, &LengthFilter::default());
    let std = parse_trace(data, &LengthFilter::STANDARD);
    if let (Ok(all), Ok(std)) = (all, std) {
        assert!(std.requests.len() <= all.requests.len());
        for r in &std.requests {
            assert!(LengthFilter::STANDARD.accepts(r.prompt_tokens, r.decode_tokens));
        }
    }
});
