//! Byte-exact golden frames. Set `PPDT_BLESS=1` to rewrite the files after
//! an intentional format change.

use std::path::PathBuf;

use ppdt::wire::{decode, encode, golden::reference_messages};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn to_hex(bytes: &[u8]) -> String {
    let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
    hex.as_bytes().chunks(64).map(|c| std::str::from_utf8(c).unwrap()).collect::<Vec<_>>().join("\n") + "\n"
}

fn from_hex(text: &str) -> Vec<u8> {
    let digits: String = text.split_whitespace().collect();
    (0..digits.len()).step_by(2).map(|i| u8::from_str_radix(&digits[i..i + 2], 16).unwrap()).collect()
}

#[test]
fn golden_frames_are_byte_exact() {
    let bless = std::env::var_os("PPDT_BLESS").is_some();
    for (name, msg) in reference_messages() {
        let path = golden_dir().join(format!("{name}.hex"));
        let bytes = encode(&msg);
        if bless {
            std::fs::write(&path, to_hex(&bytes)).unwrap();
        }
        let expected = from_hex(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())));
        assert_eq!(bytes, expected, "{name} encoding changed");
        assert_eq!(decode(&expected).unwrap(), msg, "{name} decoding changed");
    }
}

#[test]
fn setup_ack_golden_is_six_bytes() {
    let text = std::fs::read_to_string(golden_dir().join("setup_ack.hex")).unwrap();
    assert_eq!(from_hex(&text), [0, 0, 0, 0, 1, 3]);
}

#[test]
fn reference_keys_are_reproducible() {
    let a = ppdt::wire::golden::reference_keys().public();
    let b = ppdt::wire::golden::reference_keys().public();
    assert_eq!(a, b);
}
