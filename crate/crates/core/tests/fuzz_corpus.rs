//! Replays the checked-in fuzz seeds through the same properties the fuzz
//! targets check, so they run on a stable toolchain.

use std::path::PathBuf;

use pwfit::io::{decode_csv, decode_image, decode_pgm, encode_csv, encode_pgm, parse_report, report_to_string, ImageFormat};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn pgm_seeds() {
    let mut decoded = 0;
    for (name, data) in seeds("pgm_decode") {
        let Ok(img) = decode_pgm(&data) else { continue };
        decoded += 1;
        assert!(img.samples.iter().all(|&s| s <= img.maxval), "{name}");
        let bytes = encode_pgm(img.height, img.width, &img.normalized(), img.maxval, true).unwrap();
        assert_eq!(decode_pgm(&bytes).unwrap().samples, img.samples, "{name}");
        let _ = decode_image(&data, ImageFormat::Pgm);
    }
    assert_eq!(decoded, 4);
}

#[test]
fn csv_seeds() {
    let mut decoded = 0;
    for (name, data) in seeds("csv_decode") {
        let Ok(g) = decode_csv(&data) else { continue };
        decoded += 1;
        let back = decode_csv(&encode_csv(g.rows, g.cols, &g.values).unwrap()).unwrap();
        assert_eq!((back.rows, back.cols, &back.values), (g.rows, g.cols, &g.values), "{name}");
        let _ = decode_image(&data, ImageFormat::Csv);
    }
    assert_eq!(decoded, 4);
}

#[test]
fn report_seeds() {
    let mut parsed = 0;
    for (name, data) in seeds("report_parse") {
        let Ok(report) = parse_report(&String::from_utf8(data).unwrap()) else { continue };
        parsed += 1;
        let once = report_to_string(&report).unwrap();
        assert_eq!(report_to_string(&parse_report(&once).unwrap()).unwrap(), once, "{name}");
    }
    assert_eq!(parsed, 2);
}
