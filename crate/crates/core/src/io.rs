//! Point-cloud CSV files and the binary moment-matrix cache.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::moments::{MomentMatrix, Normalization, PointCloud};
use crate::polybasis::{BasisKind, GradedBasis, ScaleBox};

/// Parsed CSV with the header row, if one was detected.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads comma-separated numbers. A first row that does not parse as numbers
/// is taken as a header; ragged rows and non-numeric cells are rejected with
/// their 1-based line number.
pub fn read_csv<R: Read>(reader: R) -> Result<CsvTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            line: e.position().map_or(k + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && header.is_none() => {
                header = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
                width = Some(record.len());
                continue;
            }
            Err(e) => {
                return Err(Error::Csv {
                    line,
                    message: format!("non-numeric cell: {e}"),
                })
            }
        };
        if let Some((col, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Csv {
                line,
                message: format!("non-finite value in column {}", col + 1),
            });
        }
        match width {
            Some(w) if w != values.len() => {
                return Err(Error::Csv {
                    line,
                    message: format!("expected {w} columns, found {}", values.len()),
                })
            }
            _ => width = Some(values.len()),
        }
        rows.push(values);
    }
    Ok(CsvTable { header, rows })
}

pub fn read_csv_file(path: &Path) -> Result<CsvTable> {
    read_csv(BufReader::new(File::open(path)?))
}

/// Reads a CSV as a point cloud (one point per row).
pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    let table = read_csv_file(path)?;
    if table.rows.is_empty() {
        return Err(Error::Csv {
            line: 0,
            message: "no data rows".into(),
        });
    }
    PointCloud::from_rows(&table.rows)
}

/// Formats a value with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes one point per row, coordinates only.
pub fn write_point_cloud<W: Write>(cloud: &PointCloud, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for x in cloud.points() {
        let line: Vec<String> = x.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub const CACHE_MAGIC: &[u8; 5] = b"CMOM1";

/// Writes a moment matrix: magic `CMOM1`, then little-endian `u64` p, d, n,
/// a `u8` basis kind and a `u8` normalization, `2p` `f64` scale-box bounds
/// (all `lo` then all `hi`), and the `s × s` entries row-major.
pub fn write_moment_cache<W: Write>(m: &MomentMatrix, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let basis = m.basis();
    w.write_all(CACHE_MAGIC)?;
    for v in [basis.ambient_dim(), basis.max_degree(), m.sample_count()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&[basis.kind().code(), m.normalization().code()])?;
    let bx = basis.scale_box();
    for v in bx.lo.iter().chain(&bx.hi) {
        w.write_all(&v.to_le_bytes())?;
    }
    let e = m.entries();
    for i in 0..e.nrows() {
        for j in 0..e.ncols() {
            w.write_all(&e[(i, j)].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_moment_cache<R: Read>(reader: R) -> Result<MomentMatrix> {
    let mut r = BufReader::new(reader);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Cache("bad magic bytes".into()));
    }
    let mut u64s = [0usize; 3];
    for slot in &mut u64s {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        *slot = usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Cache("header overflow".into()))?;
    }
    let [p, d, n] = u64s;
    if p == 0 || p > 64 || d > 1000 {
        return Err(Error::Cache(format!("implausible header p={p} d={d}")));
    }
    let mut codes = [0u8; 2];
    r.read_exact(&mut codes)?;
    let kind = BasisKind::from_code(codes[0]).ok_or_else(|| Error::Cache(format!("unknown basis kind {}", codes[0])))?;
    let norm = Normalization::from_code(codes[1]).ok_or_else(|| Error::Cache(format!("unknown normalization {}", codes[1])))?;
    let read_f64 = |r: &mut BufReader<R>| -> Result<f64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let lo = (0..p).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let hi = (0..p).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let scale_box = match kind {
        BasisKind::Monomial => ScaleBox::identity(p),
        BasisKind::TensorChebyshev => ScaleBox::new(lo, hi)?,
    };
    let basis = GradedBasis::new(p, d, kind, scale_box)?;
    let s = basis.len();
    let entries = (0..s * s).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Cache("trailing bytes after matrix".into()));
    }
    MomentMatrix::from_entries(DMatrix::from_row_slice(s, s, &entries), basis, n, norm)
}

pub fn write_moment_cache_file(m: &MomentMatrix, path: &Path) -> Result<()> {
    write_moment_cache(m, File::create(path)?)
}

pub fn read_moment_cache_file(path: &Path) -> Result<MomentMatrix> {
    read_moment_cache(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample, SurfaceSpec};
    use crate::par::Execution;
    use proptest::prelude::*;

    #[test]
    fn header_detection_and_parsing() {
        let t = read_csv("x,y\n1,2\n3.5,-4e-3\n".as_bytes()).unwrap();
        assert_eq!(t.header, Some(vec!["x".to_string(), "y".to_string()]));
        assert_eq!(t.rows, vec![vec![1.0, 2.0], vec![3.5, -0.004]]);
        let t = read_csv("1,2\n3,4\n".as_bytes()).unwrap();
        assert!(t.header.is_none());
        assert_eq!(t.rows.len(), 2);
    }

    #[test]
    fn ragged_rows_report_line() {
        match read_csv("a,b\n1,2\n3,4\n5\n".as_bytes()) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        match read_csv("1,2\n3,x\n".as_bytes()) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(read_csv("1,nan\n".as_bytes()).is_err());
    }

    #[test]
    fn cache_round_trip_and_corruption() {
        let cloud = sample(&SurfaceSpec::Sphere { p: 3 }, 500, 1).unwrap();
        let basis = GradedBasis::chebyshev(3, 3, cloud.default_scale_box()).unwrap();
        let m = MomentMatrix::from_cloud(&cloud, &basis, Normalization::MeanOverN, Execution::Parallel).unwrap();
        let mut buf = Vec::new();
        write_moment_cache(&m, &mut buf).unwrap();
        assert_eq!(&buf[..5], b"CMOM1");
        assert_eq!(buf.len(), 5 + 24 + 2 + 48 + 20 * 20 * 8);
        let back = read_moment_cache(buf.as_slice()).unwrap();
        assert_eq!(back, m);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_moment_cache(bad.as_slice()), Err(Error::Cache(_))));
        assert!(read_moment_cache(&buf[..buf.len() - 3]).is_err());
        let mut long = buf;
        long.push(0);
        assert!(read_moment_cache(long.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn point_csv_round_trips_exactly(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20)) {
            let cloud = PointCloud::from_rows(&rows).unwrap();
            let mut buf = Vec::new();
            write_point_cloud(&cloud, &mut buf).unwrap();
            let t = read_csv(buf.as_slice()).unwrap();
            prop_assert!(t.header.is_none());
            prop_assert_eq!(PointCloud::from_rows(&t.rows).unwrap(), cloud);
        }
    }
}
