#![no_main]

use libfuzzer_sys::fuzz_target;
use ppdt::he::{decode_fields, ClientKeys};
use ppdt::wire::{self, Message};

// The private key file and the public KEY_MATERIAL frame.
fuzz_target!(|data: &[u8]| {
    let _ = decode_fields(data);
    if let Ok(keys) = ClientKeys::from_private_bytes(data) {
        let again = ClientKeys::from_private_bytes(&keys.to_private_bytes()).expect("re-read own output");
        assert_eq!(again.public().fingerprint(), keys.public().fingerprint());
    }
    if let Ok(Message::KeyMaterial(public)) = wire::decode(data) {
        let _ = public.validate();
    }
});
