#![no_main]

use imuqp::qpfile::parse_qp_file;
use libfuzzer_sys::fuzz_target;

// Anything that parses must serialize and parse back to the same numbers.
fuzz_target!(|text: &str| {
    let Ok(doc) = parse_qp_file(text) else {
        return;
    };
    let written = doc.to_text();
    let again = parse_qp_file(&written).expect("serialized document parses");
    assert_eq!(again.to_text(), written);
    assert_eq!((again.n(), again.p()), (doc.n(), doc.p()));
});
