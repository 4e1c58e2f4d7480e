use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::tensor::{DenseTensor, SparseTensor, Tensor};
use crate::{Error, Result};

/// First token of every tensor file.
pub const MAGIC: &str = "TNSR";

/// Payload encoding. Binary is only available for dense storage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    Text,
    Binary,
}

/// A parsed tensor plus any non-fatal diagnostics (merged duplicates).
#[derive(Clone, Debug)]
pub struct ReadOutcome {
    pub tensor: Tensor,
    pub warnings: Vec<String>,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Reads header lines while skipping comments and blanks, tracking the
/// 1-based line number.
struct Lines<R> {
    inner: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> Lines<R> {
    fn next_content(&mut self) -> Result<Option<String>> {
        loop {
            self.buf.clear();
            if self.inner.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line += 1;
            let t = self.buf.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok(Some(t.to_owned()));
            }
        }
    }

    fn require(&mut self, what: &str) -> Result<String> {
        let line = self.line + 1;
        self.next_content()?.ok_or_else(|| perr(line, format!("unexpected end of file, expected {what}")))
    }
}

/// Parse a tensor file from any buffered reader.
pub fn parse_tensor<R: BufRead>(reader: R) -> Result<ReadOutcome> {
    let mut lines = Lines { inner: reader, line: 0, buf: String::new() };
    let header = lines.require("header")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != MAGIC {
        return Err(perr(lines.line, format!("expected `{MAGIC} <dense|coo> <text|binary>`, found `{header}`")));
    }
    let sparse = match fields[1] {
        "dense" => false,
        "coo" => true,
        s => return Err(perr(lines.line, format!("unknown storage `{s}`"))),
    };
    let enc = match fields[2] {
        "text" => Encoding::Text,
        "binary" => Encoding::Binary,
        s => return Err(perr(lines.line, format!("unknown encoding `{s}`"))),
    };
    if sparse && enc == Encoding::Binary {
        return Err(perr(lines.line, "coo storage supports text encoding only"));
    }
    let n_line = lines.require("number of modes")?;
    let n: usize = n_line.parse().map_err(|_| perr(lines.line, format!("bad mode count `{n_line}`")))?;
    if n == 0 {
        return Err(perr(lines.line, "mode count must be positive"));
    }
    let dims_line = lines.require("mode sizes")?;
    let shape = dims_line
        .split_whitespace()
        .map(|s| s.parse::<usize>().ok().filter(|&d| d > 0))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| perr(lines.line, format!("bad mode sizes `{dims_line}`")))?;
    if shape.len() != n {
        return Err(perr(lines.line, format!("expected {n} mode sizes, found {}", shape.len())));
    }
    let total: usize = shape.iter().product();

    if !sparse && enc == Encoding::Binary {
        let mut bytes = Vec::new();
        lines.inner.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * total {
            return Err(perr(
                lines.line + 1,
                format!("binary payload has {} bytes, expected {}", bytes.len(), 8 * total),
            ));
        }
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        return Ok(ReadOutcome { tensor: Tensor::Dense(DenseTensor::new(shape, data)?), warnings: vec![] });
    }

    if !sparse {
        let mut data = Vec::with_capacity(total);
        while let Some(l) = lines.next_content()? {
            let line = lines.line;
            for tok in l.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| perr(line, format!("bad value `{tok}`")))?;
                data.push(v);
            }
        }
        if data.len() != total {
            return Err(perr(lines.line, format!("dense payload has {} values, expected {total}", data.len())));
        }
        return Ok(ReadOutcome { tensor: Tensor::Dense(DenseTensor::new(shape, data)?), warnings: vec![] });
    }

    let mut entries = Vec::new();
    while let Some(l) = lines.next_content()? {
        let line = lines.line;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != n + 1 {
            return Err(perr(line, format!("expected {n} indices and a value, found {} fields", toks.len())));
        }
        let mut idx = Vec::with_capacity(n);
        for (m, tok) in toks[..n].iter().enumerate() {
            let i: usize = tok.parse().map_err(|_| perr(line, format!("bad index `{tok}`")))?;
            if i == 0 || i > shape[m] {
                return Err(perr(
                    line,
                    format!("index {i} out of bounds for mode {} of size {} (indices are 1-based)", m + 1, shape[m]),
                ));
            }
            idx.push(i - 1);
        }
        let v: f64 = toks[n].parse().map_err(|_| perr(line, format!("bad value `{}`", toks[n])))?;
        entries.push((idx, v));
    }
    let (t, merged) = SparseTensor::from_entries(shape, entries)?;
    let mut warnings = vec![];
    if merged > 0 {
        warnings.push(format!("{merged} duplicate coordinate entries were summed"));
        log::warn!("{}", warnings[0]);
    }
    Ok(ReadOutcome { tensor: Tensor::Sparse(t), warnings })
}

/// Read a tensor file from disk.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<ReadOutcome> {
    parse_tensor(BufReader::new(File::open(path)?))
}

/// Serialize a tensor. Sparse tensors are always written as COO text.
pub fn write_tensor_to<W: Write>(mut w: W, t: &Tensor, enc: Encoding) -> Result<()> {
    let (storage, shape) = match t {
        Tensor::Dense(d) => ("dense", d.shape()),
        Tensor::Sparse(s) => ("coo", s.shape()),
    };
    let enc = if storage == "coo" { Encoding::Text } else { enc };
    let enc_name = if enc == Encoding::Text { "text" } else { "binary" };
    writeln!(w, "{MAGIC} {storage} {enc_name}")?;
    writeln!(w, "{}", shape.len())?;
    let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
    writeln!(w, "{}", dims.join(" "))?;
    match (t, enc) {
        (Tensor::Dense(d), Encoding::Binary) => {
            for v in d.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        (Tensor::Dense(d), Encoding::Text) => {
            for v in d.data() {
                writeln!(w, "{v:.16e}")?;
            }
        }
        (Tensor::Sparse(s), _) => {
            for (idx, v) in s.iter() {
                for i in idx {
                    write!(w, "{} ", i + 1)?;
                }
                writeln!(w, "{v:.16e}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Write a tensor file to disk.
pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor, enc: Encoding) -> Result<()> {
    write_tensor_to(BufWriter::new(File::create(path)?), t, enc)
}
