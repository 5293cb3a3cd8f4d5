//! `.clf` binary field files and small-field CSV export/import.
//!
//! A `.clf` file is one line of JSON header terminated by `\n`, followed by
//! the raw little-endian `f64` payload in storage order (grid points in
//! row-major order, component index fastest). Invalid samples of masked
//! fields are written as `0.0`; the mask itself is not persisted.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Field, Grid};
use crate::error::{Error, Result};

pub const CLF_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClfHeader {
    pub format_version: u32,
    pub points_per_axis: Vec<usize>,
    pub extent_per_axis: Vec<f64>,
    pub periodic_per_axis: Vec<bool>,
    pub component_count: usize,
    pub dtype: String,
}

impl ClfHeader {
    pub fn for_field(field: &Field) -> Self {
        let g = field.grid();
        Self {
            format_version: CLF_FORMAT_VERSION,
            points_per_axis: g.points().to_vec(),
            extent_per_axis: g.extent().to_vec(),
            periodic_per_axis: g.periodic().to_vec(),
            component_count: field.components(),
            dtype: "f64le".to_string(),
        }
    }
}

pub fn write_clf<W: Write>(field: &Field, mut out: W) -> Result<()> {
    let header = serde_json::to_string(&ClfHeader::for_field(field))?;
    out.write_all(header.as_bytes())?;
    out.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_clf<R: Read>(input: R) -> Result<Field> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if !line.ends_with('\n') {
        return Err(Error::Format("missing header terminator".into()));
    }
    let header: ClfHeader = serde_json::from_str(line.trim_end())?;
    if header.format_version != CLF_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format_version {}", header.format_version)));
    }
    if header.dtype != "f64le" {
        return Err(Error::Format(format!("unsupported dtype {}", header.dtype)));
    }
    let grid = Grid::new(&header.points_per_axis, &header.extent_per_axis, &header.periodic_per_axis)?;
    let count = grid.len() * header.component_count;
    let mut bytes = Vec::with_capacity(count * 8);
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "payload has {} bytes, header implies {}",
            bytes.len(),
            count * 8
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::new(grid, header.component_count, values)
}

pub fn save_clf(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_clf(field, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_clf(path: impl AsRef<Path>) -> Result<Field> {
    read_clf(std::fs::File::open(path)?)
}

/// CSV with a header row `x0,..,x{d},u0,..,u{n-1}`, one row per grid point.
pub fn write_csv<W: Write>(field: &Field, out: W) -> Result<()> {
    let g = field.grid();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..g.dims()).map(|a| format!("x{a}")).collect();
    header.extend((0..field.components()).map(|c| format!("u{c}")));
    w.write_record(&header).map_err(csv_err)?;
    for p in 0..g.len() {
        let x = g.point(p);
        let row: Vec<String> = x[..g.dims()]
            .iter()
            .chain(field.state(p))
            .map(|v| format!("{v:e}"))
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`]. Periodicity cannot be recovered from
/// coordinates, so it is supplied by the caller.
pub fn read_csv<R: Read>(input: R, periodic: &[bool]) -> Result<Field> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let dims = header.iter().filter(|h| h.starts_with('x')).count();
    let comps = header.len() - dims;
    if dims != periodic.len() || comps == 0 {
        return Err(Error::Format(format!(
            "csv has {dims} coordinate and {comps} component columns"
        )));
    }
    let mut coords: Vec<Vec<f64>> = vec![Vec::new(); dims];
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        for (k, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad number `{cell}`")))?;
            if k < dims {
                coords[k].push(v);
            } else {
                values.push(v);
            }
        }
    }
    let mut points = Vec::with_capacity(dims);
    let mut extent = Vec::with_capacity(dims);
    for (a, col) in coords.iter().enumerate() {
        let mut uniq = col.clone();
        uniq.sort_by(f64::total_cmp);
        uniq.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
        let n = uniq.len();
        if n < 2 {
            return Err(Error::Format(format!("axis {a} has fewer than two coordinates")));
        }
        let h = (uniq[n - 1] - uniq[0]) / (n - 1) as f64;
        points.push(n);
        extent.push(if periodic[a] { h * n as f64 } else { h * (n - 1) as f64 });
    }
    let grid = Grid::new(&points, &extent, periodic)?;
    Field::new(grid, comps, values)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sample_function;

    fn sample() -> Field {
        let g = Grid::new(&[5, 8], &[0.5, 2.0], &[false, true]).unwrap();
        sample_function(&g, 2, |x, out| {
            out[0] = x[0] * 3.0 - x[1];
            out[1] = (x[1] * 7.0).sin();
        })
        .unwrap()
    }

    #[test]
    fn clf_roundtrip_is_bit_exact() {
        let f = sample();
        let mut buf = Vec::new();
        write_clf(&f, &mut buf).unwrap();
        let first_line = buf.split(|&b| b == b'\n').next().unwrap();
        let header: serde_json::Value = serde_json::from_slice(first_line).unwrap();
        assert_eq!(header["dtype"], "f64le");
        assert_eq!(header["component_count"], 2);
        assert_eq!(buf.len(), first_line.len() + 1 + 8 * f.values().len());
        let back = read_clf(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn clf_rejects_truncated_payload() {
        let mut buf = Vec::new();
        write_clf(&sample(), &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_clf(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn csv_roundtrip() {
        let f = sample();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        assert!(std::str::from_utf8(&buf).unwrap().starts_with("x0,x1,u0,u1"));
        let back = read_csv(&buf[..], &[false, true]).unwrap();
        assert_eq!(back.grid().points(), f.grid().points());
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() <= 1e-15 * (1.0 + b.abs()));
        }
    }
}
