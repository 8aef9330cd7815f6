#![no_main]

use libfuzzer_sys::fuzz_target;
use ppdt::tree::AttributeSchema;

// Input is a schema.json document, a NUL byte, then a feature input object.
fuzz_target!(|data: &[u8]| {
    let (schema, input) = match data.iter().position(|&b| b == 0) {
        Some(i) => (&data[..i], &data[i + 1..]),
        None => (data, &b"{}"[..]),
    };
    let Ok(schema) = serde_json::from_slice::<AttributeSchema>(schema) else { return };
    let _ = schema.violations(16);
    let Ok(value) = serde_json::from_slice::<serde_json::Value>(input) else { return };
    if let Ok(fv) = schema.encode_json(&value, 16) {
        assert_eq!(fv.len(), schema.attributes.len());
        assert!(fv.iter().all(|&v| v < 1 << 16));
    }
});
