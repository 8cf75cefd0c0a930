#![no_main]

use libfuzzer_sys::fuzz_target;
use qkernel::encoder::{contract_residual, synthesize, SynthesisMode, TargetVec};

fuzz_target!(|data: [u8; 32]| {
    let raw: [f64; 4] = std::array::from_fn(|i| f64::from_le_bytes(data[8 * i..8 * i + 8].try_into().unwrap()));
    let Ok(v) = TargetVec::normalized(raw) else { return };
    for mode in [SynthesisMode::Prepare, SynthesisMode::Unprepare] {
        let s = synthesize(&v, mode).expect("every unit vector is encodable");
        assert!(contract_residual(&v, &s.operator, mode) <= 1e-10);
    }
});
