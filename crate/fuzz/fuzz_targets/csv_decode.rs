#![no_main]
use libfuzzer_sys::fuzz_target;
use pwfit::io::{decode_csv, decode_image, encode_csv, ImageFormat};

fuzz_target!(|data: &[u8]| {
    let Ok(g) = decode_csv(data) else { return };
    assert_eq!(g.values.len(), g.rows * g.cols);
    let bytes = encode_csv(g.rows, g.cols, &g.values).expect("decoded grid must encode");
    let back = decode_csv(&bytes).expect("encoder output must decode");
    assert_eq!((back.rows, back.cols), (g.rows, g.cols));
    for (a, b) in back.values.iter().zip(&g.values) {
        assert!(a == b || (a.is_nan() && b.is_nan()));
    }
    let _ = decode_image(data, ImageFormat::Csv);
});
