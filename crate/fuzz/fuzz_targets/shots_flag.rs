#![no_main]

use libfuzzer_sys::fuzz_target;
use qkernel::kernel::EngineKind;
use qkernel::qip::Shots;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(shots) = text.parse::<Shots>() {
        assert_eq!(shots.to_string().parse::<Shots>(), Ok(shots));
    }
    if let Ok(engine) = text.parse::<EngineKind>() {
        assert_eq!(engine.to_string(), text);
    }
});
