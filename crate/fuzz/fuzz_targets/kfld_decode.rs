#![no_main]

use kflow_core::grid_core::kfld;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(file) = kfld::decode(data) else { return };
    // A decoded file re-encodes to something that decodes to the same bits.
    let again = kfld::decode(&kfld::encode(&file.header, &file.data)).expect("re-encoded file decodes");
    assert_eq!(again.header, file.header);
    assert!(again.data.iter().zip(&file.data).all(|(a, b)| a.to_bits() == b.to_bits()));
    let _ = file.to_scalar();
    let _ = file.to_tensor();
    let _ = file.to_complex();
});
