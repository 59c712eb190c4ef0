use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::sweep::SweepRow;
use crate::error::{Error, Result};

/// Column order of the row CSV.
pub const CSV_HEADER: [&str; 13] = [
    "task",
    "param_name",
    "param_value",
    "N_i",
    "N_f",
    "N_r",
    "seed",
    "epoch",
    "network_loss",
    "reward_spread",
    "mean_reward_inference",
    "mean_reward_forecast",
    "mean_reward_reputation",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Append-only CSV writer for sweep rows. The header is written on creation,
/// so a sink that receives no rows still leaves a valid file.
pub struct CsvSink<W: Write> {
    path: PathBuf,
    writer: csv::Writer<W>,
}

impl CsvSink<File> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(io_err(path))?;
        Self::from_writer(path, file)
    }
}

impl<W: Write> CsvSink<W> {
    /// `path` is only used in error messages.
    pub fn from_writer(path: &Path, inner: W) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(inner);
        writer.write_record(CSV_HEADER).map_err(csv_err(path))?;
        Ok(CsvSink {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn append(&mut self, rows: &[SweepRow]) -> Result<()> {
        for r in rows {
            self.writer.serialize(r).map_err(csv_err(&self.path))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.writer.flush().map_err(io_err(&self.path))?;
        self.writer.into_inner().map_err(|e| Error::Io {
            path: self.path.clone(),
            source: e.into_error(),
        })
    }
}

pub fn write_rows_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut sink = CsvSink::create(path)?;
    sink.append(rows)?;
    sink.finish()?;
    Ok(())
}

/// Rows as CSV text.
pub fn rows_to_csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut sink = CsvSink::from_writer(Path::new("<memory>"), Vec::new())?;
    sink.append(rows)?;
    let bytes = sink.finish()?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<SweepRow>, _>>()
        .map_err(csv_err(path))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    out.write_all(b"\n").map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::TaskKind;

    fn row(epoch: usize, loss: f64) -> SweepRow {
        SweepRow {
            task: TaskKind::Classification,
            param_name: "p".into(),
            param_value: 2.5,
            n_i: 5,
            n_f: 3,
            n_r: 5,
            seed: 1,
            epoch,
            network_loss: loss,
            reward_spread: 0.1,
            mean_reward_inference: 1.0 / 3.0,
            mean_reward_forecast: 0.0,
            mean_reward_reputation: 1e-17,
        }
    }

    #[test]
    fn empty_is_header_only() {
        let s = rows_to_csv_string(&[]).unwrap();
        assert_eq!(s.trim_end(), CSV_HEADER.join(","));
    }

    #[test]
    fn header_matches_serialized_fields() {
        let s = rows_to_csv_string(&[row(0, 0.5)]).unwrap();
        let first = s.lines().next().unwrap();
        assert_eq!(first, CSV_HEADER.join(","));
        assert!(s.lines().nth(1).unwrap().starts_with("classification,p,2.5,5,3,5,1,0,"));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let rows: Vec<SweepRow> = (0..50).map(|i| row(i, (i as f64).sqrt() / 7.0)).collect();
        write_rows_csv(&path, &rows).unwrap();
        assert_eq!(read_rows_csv(&path).unwrap(), rows);
    }

    #[test]
    fn io_errors_name_the_path() {
        let err = write_rows_csv(Path::new("/nonexistent-dir/x.csv"), &[]).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
