#![no_main]
use libfuzzer_sys::fuzz_target;
use pwfit::io::{parse_report, report_to_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(report) = parse_report(text) else { return };
    let once = report_to_string(&report).expect("parsed report must serialize");
    let again = parse_report(&once).expect("serialized report must parse");
    assert_eq!(report_to_string(&again).unwrap(), once);
});
