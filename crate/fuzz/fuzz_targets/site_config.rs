#![no_main]

use libfuzzer_sys::fuzz_target;
use ppdt_cli::config::{padding, SiteFile};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = SiteFile::parse(text) {
        let _ = padding(file.pad_min_ms, file.pad_max_ms);
    }
});
