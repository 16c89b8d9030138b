#![no_main]

use libfuzzer_sys::fuzz_target;
use vqed::codes::StabilizerCode;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(code) = StabilizerCode::from_json(text) {
        let back = serde_json::to_string(&code.description()).unwrap();
        let again = StabilizerCode::from_json(&back).expect("description must reload");
        assert_eq!(again.generators(), code.generators());
    }
});
