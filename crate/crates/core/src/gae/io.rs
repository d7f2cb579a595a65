//! Text formats for trained weights and embeddings.
//!
//! Model file:
//!
//! ```text
//! gae-model v1
//! variant gae
//! dims <features> <hidden> <embedding>
//! seed <u64>
//! matrix w0 <rows> <cols>
//! <row values, space separated>
//! matrix w1 <rows> <cols>
//! ...
//! [matrix w_logvar <rows> <cols> ...]   (vgae only)
//! ```
//!
//! Reals are written in Rust's shortest round-trip form, so reading a file
//! back reproduces the weights bit for bit.

use std::fmt::Write as _;

use ndarray::Array2;

use super::{Embedding, GaeModel, Variant};
use crate::error::{Error, Result};

const MAGIC: &str = "gae-model v1";

fn malformed(what: &str, reason: impl Into<String>) -> Error {
    Error::Malformed {
        what: what.into(),
        reason: reason.into(),
    }
}

fn write_matrix(out: &mut String, name: &str, m: &Array2<f64>) {
    let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

pub fn write_model(model: &GaeModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "variant {}", model.variant);
    let _ = writeln!(
        out,
        "dims {} {} {}",
        model.features(),
        model.hidden(),
        model.embedding_dim()
    );
    let _ = writeln!(out, "seed {}", model.seed);
    write_matrix(&mut out, "w0", &model.w0);
    write_matrix(&mut out, "w1", &model.w1);
    if let Some(w) = &model.w_logvar {
        write_matrix(&mut out, "w_logvar", w);
    }
    out
}

fn header_value<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    line.and_then(|l| l.strip_prefix(key))
        .and_then(|l| l.strip_prefix(' '))
        .ok_or_else(|| malformed("model file", format!("expected '{key}' line")))
}

pub fn read_model(text: &str) -> Result<GaeModel> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(malformed("model file", "missing header"));
    }
    let variant: Variant = header_value(lines.next(), "variant")?.parse()?;
    let dims: Vec<usize> = header_value(lines.next(), "dims")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| malformed("model file", "bad dims")))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(malformed("model file", "dims needs three values"));
    }
    let seed: u64 = header_value(lines.next(), "seed")?
        .parse()
        .map_err(|_| malformed("model file", "bad seed"))?;

    let mut read_matrix = |name: &str, rows: usize, cols: usize| -> Result<Array2<f64>> {
        let head = header_value(lines.next(), "matrix")?;
        let want = format!("{name} {rows} {cols}");
        if head != want {
            return Err(malformed("model file", format!("expected 'matrix {want}', found 'matrix {head}'")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = lines.next().ok_or_else(|| malformed("model file", "truncated matrix"))?;
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|_| malformed("model file", format!("bad number '{tok}'")))?);
            }
            if data.len() - before != cols {
                return Err(malformed("model file", format!("row of {name} has wrong length")));
            }
        }
        Ok(Array2::from_shape_vec((rows, cols), data).expect("length checked"))
    };
    let (f, h, d) = (dims[0], dims[1], dims[2]);
    let w0 = read_matrix("w0", f, h)?;
    let w1 = read_matrix("w1", h, d)?;
    let w_logvar = match variant {
        Variant::Vgae => Some(read_matrix("w_logvar", h, d)?),
        Variant::Gae => None,
    };
    Ok(GaeModel {
        variant,
        seed,
        w0,
        w1,
        w_logvar,
    })
}

/// `id,z_0,…,z_{D−1}` with full-precision reals.
pub fn write_embedding_csv(e: &Embedding) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend((0..e.z.ncols()).map(|j| format!("z_{j}")));
    w.write_record(&header)?;
    for (id, row) in e.ids.iter().zip(e.z.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

/// Reads an embedding CSV; provenance fields are left for the caller.
pub fn read_embedding_csv(text: &str) -> Result<(Vec<String>, Array2<f64>)> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let d = reader.headers()?.len().saturating_sub(1);
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for row in reader.records() {
        let row = row?;
        ids.push(row.get(0).unwrap_or("").to_string());
        for tok in row.iter().skip(1) {
            data.push(tok.parse::<f64>().map_err(|_| malformed("embedding csv", format!("bad number '{tok}'")))?);
        }
    }
    let z = Array2::from_shape_vec((ids.len(), d), data).map_err(|e| malformed("embedding csv", e.to_string()))?;
    Ok((ids, z))
}
