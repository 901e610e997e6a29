#![no_main]
use libfuzzer_sys::fuzz_target;
use pwfit::io::{decode_image, decode_pgm, encode_pgm, ImageFormat};

fuzz_target!(|data: &[u8]| {
    let Ok(img) = decode_pgm(data) else { return };
    assert!(img.samples.iter().all(|&s| s <= img.maxval));
    // re-encoding the normalized image gives back the same samples
    if let Ok(bytes) = encode_pgm(img.height, img.width, &img.normalized(), img.maxval, true) {
        let back = decode_pgm(&bytes).expect("encoder output must decode");
        assert_eq!(back.samples, img.samples);
    }
    let _ = decode_image(data, ImageFormat::Pgm);
});
