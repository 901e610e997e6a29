//! File formats, synthetic instances and reports.

mod csv;
mod lp;
mod pgm;
mod report;
mod synthetic;

use std::io::Write as _;
use std::path::Path;

pub use self::csv::{decode_csv, encode_csv, CsvGrid};
pub use lp::{lp_text, write_lp};
pub use pgm::{decode_pgm, encode_pgm, PgmImage};
pub use report::{
    parse_report, read_report, report_to_string, write_report, InstanceDescriptor, RunParams, RunReport, SolveSummary,
    REPORT_FORMAT_VERSION,
};
pub use synthetic::{generate_synthetic, Generator, HalfPlane, PieceSpec, RegionMask, SyntheticInstance, SyntheticSpec};

use crate::formulation::GridInstance;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Csv,
}

impl ImageFormat {
    /// Guess from the file extension (`.pgm`, `.csv`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "pgm" | "pnm" => Some(ImageFormat::Pgm),
            "csv" | "txt" => Some(ImageFormat::Csv),
            _ => None,
        }
    }
}

impl std::str::FromStr for ImageFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pgm" => Ok(ImageFormat::Pgm),
            "csv" => Ok(ImageFormat::Csv),
            other => Err(Error::InvalidParameter(format!("unknown image format `{other}`"))),
        }
    }
}

/// PGM samples are divided by `maxval`; CSV values already in `[0, 1]` are
/// kept, anything else is min-max scaled.
pub fn decode_image(bytes: &[u8], format: ImageFormat) -> Result<GridInstance> {
    match format {
        ImageFormat::Pgm => {
            let img = decode_pgm(bytes)?;
            GridInstance::new(img.height, img.width, img.normalized())
        }
        ImageFormat::Csv => {
            let g = decode_csv(bytes)?;
            GridInstance::normalized(g.rows, g.cols, g.values)
        }
    }
}

pub fn load_image(path: &Path, format: ImageFormat) -> Result<GridInstance> {
    decode_image(&std::fs::read(path)?, format)
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
