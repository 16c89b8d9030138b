#![no_main]

use libfuzzer_sys::fuzz_target;
use vqed::exact::ScheduleMode;
use vqed::experiments::GadgetNoiseMode;
use vqed::PauliString;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = text.parse::<PauliString>() {
        // anything accepted must print back to itself
        let again: PauliString = p.to_string().parse().expect("round trip");
        assert_eq!(again, p);
    }
    if let Ok(m) = text.parse::<ScheduleMode>() {
        assert_eq!(m.to_string().parse::<ScheduleMode>().ok(), Some(m));
    }
    let _ = text.parse::<GadgetNoiseMode>();
});
