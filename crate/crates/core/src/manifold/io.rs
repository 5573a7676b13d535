//! Plain-text mesh persistence.
//!
//! Format (`glmesh 1`): a header of `key value` lines, then one `v` line per
//! vertex and one `c` line per cell. Floats are written with 17 significant
//! digits so numeric fields round-trip bit-faithfully.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt_f64;

use super::{MeshManifold, ModelGeometry};

pub fn write_mesh<W: Write>(mesh: &MeshManifold, out: &mut W) -> Result<()> {
    writeln!(out, "glmesh 1")?;
    writeln!(out, "model {} {}", mesh.model.name(), mesh.model.parameter())?;
    writeln!(out, "dim {}", mesh.dim)?;
    writeln!(out, "coord_dim {}", mesh.coord_dim)?;
    match mesh.period {
        Some(p) => writeln!(out, "period {}", fmt_f64(p))?,
        None => writeln!(out, "period none")?,
    }
    writeln!(out, "betti1 {}", mesh.betti1_hint)?;
    writeln!(out, "ricci_neg_max {}", fmt_f64(mesh.ricci_neg_max))?;
    writeln!(out, "vertices {}", mesh.vertex_count())?;
    writeln!(out, "cells {}", mesh.cell_count())?;
    writeln!(out, "arity {}", mesh.cell_arity)?;
    for v in 0..mesh.vertex_count() {
        let coords: Vec<String> = mesh.position(v).iter().map(|&x| fmt_f64(x)).collect();
        writeln!(out, "v {}", coords.join(" "))?;
    }
    for c in 0..mesh.cell_count() {
        let ids: Vec<String> = mesh.cell(c).iter().map(|i| i.to_string()).collect();
        writeln!(out, "c {}", ids.join(" "))?;
    }
    Ok(())
}

pub fn export_mesh(mesh: &MeshManifold, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_mesh(mesh, &mut out)?;
    out.flush()?;
    Ok(())
}

struct LineReader<R> {
    inner: R,
    label: String,
    line_no: usize,
}

impl<R: BufRead> LineReader<R> {
    fn next_line(&mut self) -> Result<Option<String>> {
        let mut buf = String::new();
        loop {
            buf.clear();
            let n = self.inner.read_line(&mut buf)?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let trimmed = buf.trim();
            if !trimmed.is_empty() {
                return Ok(Some(trimmed.to_string()));
            }
        }
    }

    fn expect_line(&mut self) -> Result<String> {
        self.next_line()?
            .ok_or_else(|| Error::parse(&self.label, self.line_no, "unexpected end of file"))
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(&self.label, self.line_no, message)
    }

    fn key_value(&mut self, key: &str) -> Result<String> {
        let line = self.expect_line()?;
        let (k, v) = line
            .split_once(' ')
            .ok_or_else(|| self.err(format!("expected '{key} <value>'")))?;
        if k != key {
            return Err(self.err(format!("expected key '{key}', found '{k}'")));
        }
        Ok(v.trim().to_string())
    }

    fn parse_usize(&self, s: &str) -> Result<usize> {
        s.parse().map_err(|_| self.err(format!("bad integer '{s}'")))
    }

    fn parse_f64(&self, s: &str) -> Result<f64> {
        s.parse().map_err(|_| self.err(format!("bad float '{s}'")))
    }
}

pub fn read_mesh<R: BufRead>(reader: R, label: &str) -> Result<MeshManifold> {
    let mut r = LineReader {
        inner: reader,
        label: label.to_string(),
        line_no: 0,
    };
    let magic = r.expect_line()?;
    if magic != "glmesh 1" {
        return Err(r.err("not a glmesh file (bad magic)"));
    }
    let model_line = r.key_value("model")?;
    let (name, param) = model_line
        .split_once(' ')
        .ok_or_else(|| r.err("expected 'model <name> <parameter>'"))?;
    let param = r.parse_usize(param.trim())? as u32;
    let model = ModelGeometry::from_name(name, param)?;
    let dim_s = r.key_value("dim")?;
    let dim = r.parse_usize(&dim_s)?;
    let coord_dim_s = r.key_value("coord_dim")?;
    let coord_dim = r.parse_usize(&coord_dim_s)?;
    let period_raw = r.key_value("period")?;
    let period = if period_raw == "none" {
        None
    } else {
        Some(r.parse_f64(&period_raw)?)
    };
    let betti1_s = r.key_value("betti1")?;
    let betti1 = r.parse_usize(&betti1_s)?;
    let ricci_s = r.key_value("ricci_neg_max")?;
    let ricci = r.parse_f64(&ricci_s)?;
    let nv_s = r.key_value("vertices")?;
    let nv = r.parse_usize(&nv_s)?;
    let nc_s = r.key_value("cells")?;
    let nc = r.parse_usize(&nc_s)?;
    let arity_s = r.key_value("arity")?;
    let arity = r.parse_usize(&arity_s)?;

    let mut positions = Vec::with_capacity(nv * coord_dim);
    for _ in 0..nv {
        let line = r.expect_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some("v") {
            return Err(r.err("expected vertex line"));
        }
        let mut count = 0;
        for tok in parts {
            positions.push(r.parse_f64(tok)?);
            count += 1;
        }
        if count != coord_dim {
            return Err(r.err(format!("vertex line has {count} coords, expected {coord_dim}")));
        }
    }
    let mut cells = Vec::with_capacity(nc * arity);
    for _ in 0..nc {
        let line = r.expect_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some("c") {
            return Err(r.err("expected cell line"));
        }
        let mut count = 0;
        for tok in parts {
            cells.push(r.parse_usize(tok)?);
            count += 1;
        }
        if count != arity {
            return Err(r.err(format!("cell line has {count} ids, expected {arity}")));
        }
    }
    if r.next_line()?.is_some() {
        return Err(r.err("trailing content after cell block"));
    }
    MeshManifold::from_parts(
        model, dim, coord_dim, period, positions, arity, cells, betti1, ricci,
    )
}

pub fn import_mesh(path: &Path) -> Result<MeshManifold> {
    let file = File::open(path)?;
    read_mesh(BufReader::new(file), &path.display().to_string())
}
