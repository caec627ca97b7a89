//! Model files and quote files.
//!
//! Models are stored as line-oriented text starting with the magic line
//! `CHEB-IV v1`. Floats are written in shortest round-trip form, so reading
//! a file back reproduces every coefficient bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::bs::OptionQuote;
use crate::builder::{AccuracyPreset, AreaSurface, BoundaryInterps, SurfaceModel};
use crate::cheb::{Cheb1D, LowRank2D};
use crate::domain::{AreaId, BoundaryCurves};
use crate::engine::{invert_quote, InversionStatus, QuoteInversion};
use crate::error::{Error, Result};
use crate::laplace::LaplaceSurface;

pub const MAGIC: &str = "CHEB-IV";
pub const VERSION: &str = "v1";

/// A stored implied-volatility surface plus its build timestamp, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: SurfaceModel,
    pub created: Option<String>,
}

fn push_floats(out: &mut String, values: &[f64]) {
    for v in values {
        let _ = write!(out, " {v:e}");
    }
}

fn push_cheb(out: &mut String, tag: &str, p: &Cheb1D) {
    let (lo, hi) = p.interval();
    let _ = write!(out, "{tag} {lo:e} {hi:e} {}", p.len());
    push_floats(out, p.coeffs());
    out.push('\n');
}

fn push_lowrank(out: &mut String, m: &LowRank2D) {
    out.push_str("weights");
    push_floats(out, m.weights());
    out.push('\n');
    for (r, c) in m.rows().iter().zip(m.cols()) {
        push_cheb(out, "row", r);
        push_cheb(out, "col", c);
    }
}

/// Text form of a surface model.
pub fn write_model(model: &SurfaceModel, created: Option<&str>) -> String {
    let mut out = format!("{MAGIC} {VERSION}\nmodel surface\n");
    let b = &model.curves;
    let _ = writeln!(out, "preset {}", model.preset);
    let _ = writeln!(out, "tol {:e}", model.tol());
    let _ = writeln!(out, "oracle_tol {:e}", model.oracle_tol);
    let _ = writeln!(
        out,
        "curves {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e}",
        b.v_min.0, b.v_min.1, b.v1.0, b.v1.1, b.v2.0, b.v2.1, b.v_max, b.x_min, b.x_max, b.x_split, b.delta
    );
    if let Some(ts) = created {
        let _ = writeln!(out, "created {ts}");
    }
    push_cheb(&mut out, "boundary c1", &model.bounds.c1);
    push_cheb(&mut out, "boundary c2", &model.bounds.c2);
    push_cheb(&mut out, "boundary c_max", &model.bounds.c_max);
    for s in &model.areas {
        let _ = writeln!(
            out,
            "area {} rank {} residual {:e} grid {} evaluations {}",
            s.area,
            s.rank(),
            s.residual,
            s.grid_order,
            s.evaluations
        );
        push_lowrank(&mut out, &s.interp);
    }
    out.push_str("end\n");
    out
}

/// Text form of a Laplace surface.
pub fn write_laplace(s: &LaplaceSurface) -> String {
    let mut out = format!("{MAGIC} {VERSION}\nmodel laplace\n");
    let _ = writeln!(out, "order {}", s.order);
    let _ = writeln!(out, "tol {:e}", s.tol);
    let _ = writeln!(out, "residual {:e}", s.residual);
    let _ = writeln!(out, "lowrank rank {}", s.interp.rank());
    push_lowrank(&mut out, &s.interp);
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
    pending: Option<(usize, Vec<&'a str>)>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            line: 0,
            pending: None,
        }
    }

    fn next_line(&mut self) -> Result<Vec<&'a str>> {
        if let Some((line, fields)) = self.pending.take() {
            self.line = line;
            return Ok(fields);
        }
        loop {
            match self.inner.next() {
                Some((i, l)) => {
                    self.line = i + 1;
                    let t = l.trim();
                    if !t.is_empty() {
                        return Ok(t.split_whitespace().collect());
                    }
                }
                None => return Err(Error::format(self.line + 1, "unexpected end of file")),
            }
        }
    }

    fn push_back(&mut self, fields: Vec<&'a str>) {
        self.pending = Some((self.line, fields));
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::format(self.line, msg)
    }

    /// Next line, which must start with `tag`; returns the remaining fields.
    fn expect(&mut self, tag: &[&str]) -> Result<Vec<&'a str>> {
        let fields = self.next_line()?;
        if fields.len() < tag.len() || fields[..tag.len()] != *tag {
            return Err(self.err(format!("expected `{}`, found `{}`", tag.join(" "), fields.join(" "))));
        }
        Ok(fields[tag.len()..].to_vec())
    }

    fn float(&self, s: &str) -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| self.err(format!("invalid number `{s}`")))
    }

    fn count(&self, s: &str) -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| self.err(format!("invalid count `{s}`")))
    }

    fn floats(&self, fields: &[&str]) -> Result<Vec<f64>> {
        fields.iter().map(|s| self.float(s)).collect()
    }

    fn single(&mut self, tag: &str) -> Result<&'a str> {
        let f = self.expect(&[tag])?;
        if f.len() != 1 {
            return Err(self.err(format!("`{tag}` takes one value")));
        }
        Ok(f[0])
    }

    fn single_float(&mut self, tag: &str) -> Result<f64> {
        let s = self.single(tag)?;
        self.float(s)
    }

    fn single_count(&mut self, tag: &str) -> Result<usize> {
        let s = self.single(tag)?;
        self.count(s)
    }

    fn cheb(&mut self, tag: &[&str]) -> Result<Cheb1D> {
        let f = self.expect(tag)?;
        if f.len() < 3 {
            return Err(self.err("interpolant needs an interval and a length"));
        }
        let lo = self.float(f[0])?;
        let hi = self.float(f[1])?;
        let n = self.count(f[2])?;
        let coeffs = self.floats(&f[3..])?;
        if coeffs.len() != n {
            return Err(self.err(format!("expected {n} coefficients, found {}", coeffs.len())));
        }
        Cheb1D::new(coeffs, lo, hi).map_err(|e| self.err(e))
    }

    fn lowrank(&mut self, rank: usize) -> Result<LowRank2D> {
        let f = self.expect(&["weights"])?;
        let weights = self.floats(&f)?;
        if weights.len() != rank {
            return Err(self.err(format!("expected {rank} weights, found {}", weights.len())));
        }
        let mut rows = Vec::with_capacity(rank);
        let mut cols = Vec::with_capacity(rank);
        for _ in 0..rank {
            rows.push(self.cheb(&["row"])?);
            cols.push(self.cheb(&["col"])?);
        }
        LowRank2D::new(weights, rows, cols).map_err(|e| self.err(e))
    }

    fn header(&mut self, kind: &str) -> Result<()> {
        let first = self.next_line()?;
        if first.first() != Some(&MAGIC) {
            return Err(self.err(format!("missing `{MAGIC}` header")));
        }
        let found = first.get(1).copied().unwrap_or("");
        if first.len() != 2 || found != VERSION {
            return Err(Error::Version {
                expected: format!("{MAGIC} {VERSION}"),
                found: first.join(" "),
            });
        }
        let found = self.single("model")?;
        if found != kind {
            return Err(self.err(format!("expected a `{kind}` model, found `{found}`")));
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.expect(&["end"])?;
        for (i, l) in self.inner.by_ref() {
            if !l.trim().is_empty() {
                return Err(Error::format(i + 1, "content after `end`"));
            }
        }
        Ok(())
    }
}

pub fn read_model(text: &str) -> Result<ModelFile> {
    let mut l = Lines::new(text);
    l.header("surface")?;
    let preset: AccuracyPreset = {
        let s = l.single("preset")?;
        s.parse().map_err(|e| l.err(e))?
    };
    let tol = l.single_float("tol")?;
    if tol != preset.tol() {
        return Err(l.err(format!("tolerance {tol:e} does not match preset {preset}")));
    }
    let oracle_tol = l.single_float("oracle_tol")?;
    let c = l.expect(&["curves"])?;
    let c = l.floats(&c)?;
    if c.len() != 11 {
        return Err(l.err(format!("expected 11 curve constants, found {}", c.len())));
    }
    let curves = BoundaryCurves {
        v_min: (c[0], c[1]),
        v1: (c[2], c[3]),
        v2: (c[4], c[5]),
        v_max: c[6],
        x_min: c[7],
        x_max: c[8],
        x_split: c[9],
        delta: c[10],
    };
    let fields = l.next_line()?;
    let created = if fields[0] == "created" {
        Some(fields[1..].join(" "))
    } else {
        l.push_back(fields);
        None
    };
    let c1 = l.cheb(&["boundary", "c1"])?;
    let c2 = l.cheb(&["boundary", "c2"])?;
    let c_max = l.cheb(&["boundary", "c_max"])?;
    let mut areas = Vec::with_capacity(4);
    for id in AreaId::ALL {
        let f = l.expect(&["area"])?;
        if f.len() != 9 || f[1] != "rank" || f[3] != "residual" || f[5] != "grid" || f[7] != "evaluations" {
            return Err(l.err("malformed area header"));
        }
        let area: AreaId = f[0].parse().map_err(|e| l.err(e))?;
        if area != id {
            return Err(l.err(format!("expected area {id}, found {area}")));
        }
        let rank = l.count(f[2])?;
        let residual = l.float(f[4])?;
        let grid_order = l.count(f[6])?;
        let evaluations = l.count(f[8])?;
        let interp = l.lowrank(rank)?;
        areas.push(AreaSurface {
            area,
            interp,
            residual,
            grid_order,
            evaluations,
        });
    }
    l.finish()?;
    let model = SurfaceModel {
        preset,
        curves,
        bounds: BoundaryInterps::new(c1, c2, c_max).map_err(|e| Error::format(0, e))?,
        areas,
        oracle_tol,
    };
    model.validate()?;
    Ok(ModelFile { model, created })
}

pub fn read_laplace(text: &str) -> Result<LaplaceSurface> {
    let mut l = Lines::new(text);
    l.header("laplace")?;
    let order = l.single_count("order")?;
    let tol = l.single_float("tol")?;
    let residual = l.single_float("residual")?;
    let f = l.expect(&["lowrank", "rank"])?;
    if f.len() != 1 {
        return Err(l.err("malformed `lowrank` line"));
    }
    let rank = l.count(f[0])?;
    let interp = l.lowrank(rank)?;
    l.finish()?;
    Ok(LaplaceSurface {
        interp,
        order,
        tol,
        residual,
    })
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

pub fn save_model(path: &Path, model: &SurfaceModel, created: Option<&str>) -> Result<()> {
    write_atomic(path, write_model(model, created).as_bytes())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    read_model(&fs::read_to_string(path)?)
}

pub fn save_laplace(path: &Path, s: &LaplaceSurface) -> Result<()> {
    write_atomic(path, write_laplace(s).as_bytes())
}

pub fn load_laplace(path: &Path) -> Result<LaplaceSurface> {
    read_laplace(&fs::read_to_string(path)?)
}

/// Call or put flag of a quote row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionType {
    Call,
    Put,
}

/// One data row of a quote file.
#[derive(Debug, Clone, PartialEq)]
pub struct QuoteRecord {
    /// 1-based line number in the file.
    pub line: usize,
    pub fields: Vec<String>,
    /// The call-equivalent quote, or why the row could not be parsed.
    pub quote: std::result::Result<OptionQuote, String>,
}

const QUOTE_COLUMNS: [&str; 5] = ["spot", "strike", "maturity", "rate", "premium"];

/// Parses a quote file. A missing or incomplete header is an error; bad
/// rows are kept with their parse error.
pub fn read_quotes<R: Read>(input: R) -> Result<(Vec<String>, Vec<QuoteRecord>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::format(1, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < QUOTE_COLUMNS.len()
        || headers[..QUOTE_COLUMNS.len()].iter().zip(QUOTE_COLUMNS).any(|(h, want)| h != want)
        || (headers.len() > 5 && headers[5] != "type")
        || headers.len() > 6
    {
        return Err(Error::format(
            1,
            format!("header must be `spot,strike,maturity,rate,premium[,type]`, found `{}`", headers.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        match rec {
            Ok(r) => {
                let line = r.position().map(|p| p.line() as usize).unwrap_or(0);
                let fields: Vec<String> = r.iter().map(str::to_string).collect();
                let quote = parse_quote(&fields, headers.len());
                rows.push(QuoteRecord { line, fields, quote });
            }
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                rows.push(QuoteRecord {
                    line,
                    fields: Vec::new(),
                    quote: Err(e.to_string()),
                });
            }
        }
    }
    Ok((headers, rows))
}

fn parse_quote(fields: &[String], columns: usize) -> std::result::Result<OptionQuote, String> {
    if fields.len() != columns && !(columns == 6 && fields.len() == 5) {
        return Err(format!("expected {columns} fields, found {}", fields.len()));
    }
    let mut nums = [0.0; 5];
    for (k, name) in QUOTE_COLUMNS.iter().enumerate() {
        nums[k] = fields[k]
            .parse::<f64>()
            .map_err(|_| format!("invalid {name} `{}`", fields[k]))?;
    }
    let kind = match fields.get(5).map(String::as_str) {
        None | Some("") | Some("C") | Some("c") => OptionType::Call,
        Some("P") | Some("p") => OptionType::Put,
        Some(other) => return Err(format!("invalid type `{other}` (expected C or P)")),
    };
    let [spot, strike, maturity, rate, premium] = nums;
    let premium = match kind {
        OptionType::Call => premium,
        // put-call parity
        OptionType::Put => premium + spot - strike * (-rate * maturity).exp(),
    };
    OptionQuote::new(spot, strike, maturity, rate, premium).map_err(|e| e.to_string())
}

/// Result for one quote row.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedRow {
    pub record: QuoteRecord,
    pub inversion: std::result::Result<QuoteInversion, String>,
}

impl InvertedRow {
    pub fn status(&self) -> String {
        match &self.inversion {
            Ok(q) => q.result.status.to_string(),
            Err(_) => "malformed".to_string(),
        }
    }
}

/// Inverts every row, in parallel and in input order.
pub fn invert_records(model: &SurfaceModel, records: Vec<QuoteRecord>) -> Vec<InvertedRow> {
    records
        .into_par_iter()
        .map(|record| {
            let inversion = match &record.quote {
                Ok(q) => invert_quote(model, q).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            InvertedRow { record, inversion }
        })
        .collect()
}

/// Writes the input columns followed by `x,c,area,v,sigma,status`.
pub fn write_inversions<W: Write>(out: W, headers: &[String], rows: &[InvertedRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    let mut head: Vec<String> = headers.to_vec();
    head.extend(["x", "c", "area", "v", "sigma", "status"].map(String::from));
    w.write_record(&head).map_err(csv_err)?;
    for row in rows {
        let mut rec: Vec<String> = row.record.fields.clone();
        rec.resize(headers.len(), String::new());
        match &row.inversion {
            Ok(q) => {
                let r = &q.result;
                rec.push(format!("{}", q.x));
                rec.push(format!("{}", q.c));
                rec.push(r.area.map(|a| a.to_string()).unwrap_or_default());
                rec.push(r.v.map(|v| v.to_string()).unwrap_or_default());
                rec.push(q.sigma.map(|s| s.to_string()).unwrap_or_default());
                rec.push(r.status.to_string());
            }
            Err(_) => {
                rec.extend(std::iter::repeat_n(String::new(), 5));
                rec.push("malformed".to_string());
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Count of rows whose inversion status is `ok`.
pub fn count_ok(rows: &[InvertedRow]) -> usize {
    rows.iter()
        .filter(|r| matches!(&r.inversion, Ok(q) if q.result.status == InversionStatus::Ok))
        .count()
}
