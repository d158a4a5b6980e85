//! CSV and JSON encodings of [`GridField`]: a `{d, n}` header followed by the
//! node values in row-major order. Both encodings round-trip finite doubles
//! bit-exactly.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Grid, GridField};
use crate::scalar::Real;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldDoc {
    d: usize,
    n: usize,
    values: Vec<f64>,
}

impl<T: Real> GridField<T> {
    pub fn to_json(&self) -> Result<String> {
        let doc = FieldDoc {
            d: self.grid().d(),
            n: self.grid().n(),
            values: self.values().iter().map(|v| v.to_f64_lossy()).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: FieldDoc = serde_json::from_str(s)?;
        let grid = Grid::new(doc.d, doc.n)?;
        GridField::new(grid, doc.values.into_iter().map(T::lit).collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "d,n")?;
        writeln!(w, "{},{}", self.grid().d(), self.grid().n())?;
        writeln!(w, "value")?;
        for v in self.values() {
            // `{}` on f64 prints the shortest representation that parses back exactly.
            writeln!(w, "{}", v.to_f64_lossy())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::invalid(format!("field csv truncated before {what}")))?
                .map_err(Error::from)
        };
        if next("header")?.trim() != "d,n" {
            return Err(Error::invalid("field csv must start with 'd,n'"));
        }
        let dims = next("dimensions")?;
        let mut parts = dims.trim().split(',');
        let parse = |s: Option<&str>| -> Result<usize> {
            s.and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| Error::invalid(format!("bad field csv dimensions '{dims}'")))
        };
        let d = parse(parts.next())?;
        let n = parse(parts.next())?;
        let grid = Grid::new(d, n)?;
        if next("value header")?.trim() != "value" {
            return Err(Error::invalid("field csv missing 'value' column header"));
        }
        let mut values = Vec::with_capacity(grid.len());
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v: f64 = t
                .parse()
                .map_err(|_| Error::invalid(format!("bad field value '{t}'")))?;
            values.push(T::lit(v));
        }
        GridField::new(grid, values)
    }
}
