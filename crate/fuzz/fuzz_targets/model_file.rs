#![no_main]

use libfuzzer_sys::fuzz_target;
use qkernel::model_file;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Validation alone must never allocate the grid or panic.
    if let Ok(spec) = model_file::parse(text) {
        assert!(spec.bias.is_finite());
        // Keep full loads to small grids so the fuzzer stays fast.
        if spec.grid.point_count().is_ok_and(|n| n <= 100) {
            let _ = model_file::load(text);
        }
    }
});
