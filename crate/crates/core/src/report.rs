//! Deterministic serialization of run reports.
//!
//! Reports must be byte-identical across invocations on the same config:
//! object keys are emitted in sorted order (serde_json's `Value` map is a
//! BTreeMap) and every float is printed with a fixed 17-significant-digit
//! scientific format. Files are written atomically: content goes to a sibling
//! temporary file which is then renamed over the target, so a failed run
//! never leaves a partial report behind.

use crate::error::{Error, Result};
use crate::kernel::SubsetU;
use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use std::io::{self, Write as _};
use std::path::Path;

/// Two-space-indented formatter with a pinned float representation:
/// `{:.16e}` gives 17 significant digits, enough to round-trip any f64.
struct SciFormatter {
    indent_level: usize,
    has_value_stack: Vec<bool>,
}

impl SciFormatter {
    fn new() -> Self {
        SciFormatter { indent_level: 0, has_value_stack: Vec::new() }
    }

    fn newline_indent<W: ?Sized + io::Write>(&self, writer: &mut W) -> io::Result<()> {
        writer.write_all(b"\n")?;
        for _ in 0..self.indent_level {
            writer.write_all(b"  ")?;
        }
        Ok(())
    }

    fn open<W: ?Sized + io::Write>(&mut self, writer: &mut W, bracket: u8) -> io::Result<()> {
        self.indent_level += 1;
        self.has_value_stack.push(false);
        writer.write_all(&[bracket])
    }

    fn close<W: ?Sized + io::Write>(&mut self, writer: &mut W, bracket: u8) -> io::Result<()> {
        self.indent_level -= 1;
        let had_values = self.has_value_stack.pop().unwrap_or(false);
        if had_values {
            self.newline_indent(writer)?;
        }
        writer.write_all(&[bracket])
    }

    fn before_item<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        if let Some(top) = self.has_value_stack.last_mut() {
            *top = true;
        }
        if !first {
            writer.write_all(b",")?;
        }
        self.newline_indent(writer)
    }
}

impl Formatter for SciFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{:.16e}", value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.open(writer, b'[')
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.close(writer, b']')
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.before_item(writer, first)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.open(writer, b'{')
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.close(writer, b'}')
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.before_item(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        writer.write_all(b": ")
    }
}

/// Serialize to the canonical JSON byte representation.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    // route through Value so that map keys come out sorted regardless of the
    // source struct's field order when nested Values are mixed in
    let tree = serde_json::to_value(value).map_err(io::Error::other)?;
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, SciFormatter::new());
    tree.serialize(&mut ser).map_err(io::Error::other)?;
    out.push(b'\n');
    Ok(out)
}

/// Write bytes atomically: temp file in the same directory, fsync, rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("output path {} has no file name", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp_path = match dir {
        Some(d) => d.join(&tmp_name),
        None => Path::new(&tmp_name).to_path_buf(),
    };
    {
        let mut f = std::fs::File::create(&tmp_path)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp_path, path)?;
    Ok(())
}

/// Fixed float formatting shared with the JSON path.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV for a spectrum: `index,sigma` with 1-based indices.
pub fn csv_spectrum(singular_values: &[f64]) -> String {
    let mut out = String::from("index,sigma\n");
    for (i, s) in singular_values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, fmt_float(*s)));
    }
    out
}

/// CSV for an enumeration table: `rank,subset,value`.
pub fn csv_subsets(rows: &[(SubsetU, f64)]) -> String {
    let mut out = String::from("rank,subset,value\n");
    for (i, (u, v)) in rows.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, u, fmt_float(*v)));
    }
    out
}

/// CSV for a refinement sigma table: `level,n,sigma`.
pub fn csv_sigma_table(levels: &[usize], sigma_table: &[Vec<f64>]) -> String {
    let mut out = String::from("level,n,sigma\n");
    for (level, row) in levels.iter().zip(sigma_table.iter()) {
        for (n, s) in row.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", level, n + 1, fmt_float(*s)));
        }
    }
    out
}

/// CSV for a plain ranked value list: `rank,value`.
pub fn csv_values(values: &[f64]) -> String {
    let mut out = String::from("rank,value\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, fmt_float(*v)));
    }
    out
}
