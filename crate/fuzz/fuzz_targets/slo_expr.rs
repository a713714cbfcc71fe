#![no_main]

use infermeter_core::slo::SloSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = s.parse::<SloSpec>() {
        let back: SloSpec = spec.to_string().parse().expect("display reparses");
        assert_eq!(back, spec);
    }
});
