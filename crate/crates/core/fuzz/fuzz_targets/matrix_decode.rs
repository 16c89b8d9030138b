#![no_main]

use libfuzzer_sys::fuzz_target;
use vqed::dense::DensityMatrix;

fuzz_target!(|data: &[u8]| {
    if let Ok(rho) = DensityMatrix::from_bytes(data) {
        assert_eq!(DensityMatrix::from_bytes(&rho.to_bytes()).unwrap().matrix(), rho.matrix());
    }
});
