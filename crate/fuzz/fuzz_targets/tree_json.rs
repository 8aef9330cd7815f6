#![no_main]

use libfuzzer_sys::fuzz_target;
use ppdt::tree::TreeModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(model) = TreeModel::from_json(text) else { return };
    let valid = model.validate(32).is_empty();
    let again = TreeModel::from_json(&model.to_json()).expect("re-parse own output");
    assert_eq!(again, model);
    if valid {
        let fv = vec![0; model.schema.attributes.len()];
        let (class, level) = model.plaintext_classify(&fv);
        assert!(class < model.schema.classes.len());
        assert!(level < model.depth());
    }
});
