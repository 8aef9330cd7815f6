#![no_main]

use libfuzzer_sys::fuzz_target;
use ppdt::wire;

fuzz_target!(|data: &[u8]| {
    if let Ok(msg) = wire::decode(data) {
        assert_eq!(wire::encode(&msg), data, "accepted a non-canonical frame");
    }
    let _ = wire::read_message(&mut &data[..]);
});
