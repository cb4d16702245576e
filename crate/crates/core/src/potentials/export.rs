use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MultiIndex, Point3, Vec3};

/// One evaluated potential value `∂_t^l ∂_x^α P(x, t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialSample {
    pub x: Point3,
    pub t: f64,
    pub d: MultiIndex,
    pub value: Vec3,
}

/// CSV row layout: one row per vector component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub t: f64,
    /// Spatial multi-index written as three digits, e.g. `100`.
    pub alpha: String,
    pub l: u8,
    pub component: usize,
    pub value: f64,
}

impl PotentialSample {
    pub fn rows(&self) -> impl Iterator<Item = SampleRow> + '_ {
        let alpha: String = self.d.alpha.iter().map(|a| a.to_string()).collect();
        (0..3).map(move |c| SampleRow {
            x1: self.x[0],
            x2: self.x[1],
            x3: self.x[2],
            t: self.t,
            alpha: alpha.clone(),
            l: self.d.l,
            component: c + 1,
            value: self.value[c],
        })
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line: 0, msg: format!("{other:?}") },
    }
}

/// Writes `x1,x2,x3,t,alpha,l,component,value` rows with a header.
pub fn write_samples_csv<W: Write>(out: W, samples: &[PotentialSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        for row in s.rows() {
            w.serialize(row).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: std::io::Read>(input: R) -> Result<Vec<SampleRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let s =
            PotentialSample { x: Point3::new(1.0, -2.0, 0.5), t: 3.0, d: MultiIndex::dx(0), value: Vec3::new(1e-7, 2.5, -3.0) };
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &[s]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,x3,t,alpha,l,component,value\n"));
        let rows = read_samples_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].alpha, "100");
        assert_eq!(rows[2].value, -3.0);
        assert_eq!(rows, s.rows().collect::<Vec<_>>());
    }
}
