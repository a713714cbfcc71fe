#![no_main]

use infermeter_net::sse::{decode_all, SseDecoder, SseError, SseEvent};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&split, body)) = data.split_first() else {
        return;
    };
    let whole = decode_all(body);
    let cut = usize::from(split).min(body.len());
    let mut dec = SseDecoder::new();
    let chunked = (|| -> Result<Vec<SseEvent>, SseError> {
        let mut events = dec.feed(&body[..cut])?;
        events.extend(dec.feed(&body[cut..])?);
        events.extend(dec.finish()?);
        Ok(events)
    })();
    if let (Ok(a), Ok(b)) = (&whole, &chunked) {
        assert_eq!(a, b);
    }
});
