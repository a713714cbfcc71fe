#![no_main]

use infermeter_net::protocol::parse_chunk;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(chunk) = parse_chunk(s) {
        let _ = (chunk.content(), chunk.finish_reason());
    }
});
