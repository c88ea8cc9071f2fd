use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use christoffel::io::fmt_f64;
use christoffel::Result;
use serde::Serialize;

pub const FORMAT_VERSION: &str = "1";

/// Opens `path`, or standard output when `None`.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Long-format CSV writer: a header row, then rows of numbers.
pub struct CsvOut {
    w: Box<dyn Write>,
}

impl CsvOut {
    pub fn create(path: Option<&Path>, header: &[String]) -> Result<Self> {
        let mut w = sink(path)?;
        writeln!(w, "{}", header.join(","))?;
        Ok(Self { w })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        let cells: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(self.w, "{}", cells.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

pub fn coordinate_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}
