#![no_main]

use infermeter_net::protocol::parse_chat_request;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(req) = parse_chat_request(data) {
        let _ = req.prompt_words();
    }
});
