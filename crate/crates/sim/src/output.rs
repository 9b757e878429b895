//! CSV/JSON result files and grid dumps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use cdce_core::pilot::{discrete_af, energy_concentration, peak_to_sidelobe, pilot_dd_image, Frame, Lattice};
use cdce_core::CMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::harness::ResultRow;

pub const CSV_HEADER: [&str; 5] = ["estimator", "snr_db", "trials", "nmse_db", "stderr_db"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

fn create(path: &Path) -> SimResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| SimError::io(path, e))?))
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> SimResult<Vec<ResultRow>> {
    let csv_err = |source| SimError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

/// Writes `rows` to `path` in the requested format.
pub fn emit(rows: &[ResultRow], format: Format, path: &Path) -> SimResult<()> {
    let mut file = create(path)?;
    match format {
        Format::Csv => write_csv(rows, &mut file).map_err(|source| SimError::Csv { path: path.into(), source })?,
        Format::Json => serde_json::to_writer_pretty(&mut file, rows)
            .map_err(|source| SimError::Json { path: path.into(), source })?,
    }
    file.flush().map_err(|e| SimError::io(path, e))
}

/// A complex grid stored column-major as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDump {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&CMatrix> for GridDump {
    fn from(m: &CMatrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            re: m.iter().map(|z| z.re).collect(),
            im: m.iter().map(|z| z.im).collect(),
        }
    }
}

impl GridDump {
    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_iterator(
            self.rows,
            self.cols,
            self.re.iter().zip(&self.im).map(|(&re, &im)| cdce_core::C64::new(re, im)),
        )
    }
}

/// Scalar figures of merit printed next to the dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotSummary {
    pub pilots: usize,
    pub peak_to_sidelobe: f64,
    pub energy_in_top_bins: f64,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> SimResult<()> {
    let mut file = create(path)?;
    serde_json::to_writer(&mut file, value).map_err(|source| SimError::Json { path: path.into(), source })?;
    file.flush().map_err(|e| SimError::io(path, e))
}

/// Writes `dd_image.json` and `af.json` for the frame's pilots into `dir`
/// and returns the summary (also stored as `summary.json`).
pub fn dump_pilot_analysis(frame: &Frame, lattice: Lattice, dir: &Path) -> SimResult<PilotSummary> {
    let dd = pilot_dd_image(frame);
    let af = discrete_af(&dd);
    let summary = PilotSummary {
        pilots: frame.pilot_count(),
        peak_to_sidelobe: peak_to_sidelobe(&af, lattice.af_period(frame.dims)),
        energy_in_top_bins: energy_concentration(&dd, frame.pilot_count()),
    };
    write_json(&GridDump::from(dd.values()), &dir.join("dd_image.json"))?;
    write_json(&GridDump::from(&af), &dir.join("af.json"))?;
    write_json(&summary, &dir.join("summary.json"))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EstimatorId;

    fn row() -> ResultRow {
        ResultRow { estimator: EstimatorId::FsLmmse, snr_db: 12.5, trials: 40, nmse_db: -13.25, stderr_db: 0.125 }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "estimator,snr_db,trials,nmse_db,stderr_db\n");
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        write_csv(&[row(), row()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "fs_lmmse,12.5,40,-13.25,0.125");
    }

    #[test]
    fn json_round_trip() {
        let text = serde_json::to_string(&[row()]).unwrap();
        let back: Vec<ResultRow> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vec![row()]);
    }

    #[test]
    fn grid_dump_is_column_major() {
        let m = CMatrix::from_fn(2, 3, |i, j| cdce_core::C64::new((i + 2 * j) as f64, -(j as f64)));
        let dump = GridDump::from(&m);
        assert_eq!(dump.re, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(dump.to_matrix(), m);
    }
}
