#![no_main]

use libfuzzer_sys::fuzz_target;
use ppdt::tree::{read_dataset, Attribute, AttributeSchema};

fuzz_target!(|data: &[u8]| {
    let schema = AttributeSchema {
        attributes: vec![
            Attribute::numeric("age"),
            Attribute::categorical("parents", ["usual", "pretentious", "great_pret"]),
        ],
        classes: vec!["no".into(), "yes".into()],
    };
    if let Ok(rows) = read_dataset(data, &schema, 8) {
        assert!(rows.iter().all(|fv| fv.len() == 2 && fv.iter().all(|&v| v < 256)));
    }
});
