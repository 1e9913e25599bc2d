//! Touchstone v1 and CSV import/export of [`NPortSParams`].
//!
//! Files are written in Hz with real/imaginary pairs. Numbers use the
//! shortest representation that parses back to the same `f64`, so a write
//! followed by a read is lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use super::{FrequencyGrid, NetworkError, NPortSParams};

#[derive(Debug, Error)]
pub enum SParamIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported Touchstone content: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

fn parse_err(line: usize, message: impl Into<String>) -> SParamIoError {
    SParamIoError::Parse {
        line,
        message: message.into(),
    }
}

/// Element order of one frequency record: two-ports use S11 S21 S12 S22,
/// everything else is row-major.
fn element_order(n: usize) -> Vec<(usize, usize)> {
    if n == 2 {
        vec![(0, 0), (1, 0), (0, 1), (1, 1)]
    } else {
        (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).collect()
    }
}

pub fn write_touchstone<W: Write>(s: &NPortSParams, w: &mut W) -> std::io::Result<()> {
    let n = s.n_ports();
    writeln!(w, "! {n}-port S-parameters")?;
    writeln!(w, "# HZ S RI R {}", s.reference_impedance())?;
    for (k, f) in s.grid().iter().enumerate() {
        let m = &s.matrices()[k];
        if n <= 2 {
            write!(w, "{f:e}")?;
            for (r, c) in element_order(n) {
                write!(w, " {:e} {:e}", m[(r, c)].re, m[(r, c)].im)?;
            }
            writeln!(w)?;
            continue;
        }
        for r in 0..n {
            for (chunk_idx, chunk) in (0..n).collect::<Vec<_>>().chunks(4).enumerate() {
                if r == 0 && chunk_idx == 0 {
                    write!(w, "{f:e}")?;
                } else {
                    write!(w, " ")?;
                }
                for &c in chunk {
                    write!(w, " {:e} {:e}", m[(r, c)].re, m[(r, c)].im)?;
                }
                writeln!(w)?;
            }
        }
    }
    Ok(())
}

pub fn write_touchstone_file(s: &NPortSParams, path: &Path) -> Result<(), SParamIoError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_touchstone(s, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy)]
enum DataFormat {
    Ri,
    Ma,
    Db,
}

/// Parse a Touchstone v1 S-parameter file with `n_ports` ports.
pub fn read_touchstone<R: BufRead>(reader: R, n_ports: usize) -> Result<NPortSParams, SParamIoError> {
    if n_ports == 0 {
        return Err(SParamIoError::Unsupported("zero ports".into()));
    }
    let mut scale = 1e9;
    let mut format = DataFormat::Ma;
    let mut z_ref = 50.0;
    let mut seen_options = false;
    let mut numbers: Vec<(f64, usize)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let content = line.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            return Err(SParamIoError::Unsupported(format!(
                "Touchstone v2 keyword on line {lineno}"
            )));
        }
        if let Some(opts) = content.strip_prefix('#') {
            if seen_options {
                continue;
            }
            seen_options = true;
            let toks: Vec<String> = opts.split_whitespace().map(|t| t.to_ascii_uppercase()).collect();
            let mut i = 0;
            while i < toks.len() {
                match toks[i].as_str() {
                    "HZ" => scale = 1.0,
                    "KHZ" => scale = 1e3,
                    "MHZ" => scale = 1e6,
                    "GHZ" => scale = 1e9,
                    "S" => {}
                    "Y" | "Z" | "G" | "H" => {
                        return Err(SParamIoError::Unsupported(format!(
                            "{} parameters (line {lineno})",
                            toks[i]
                        )))
                    }
                    "RI" => format = DataFormat::Ri,
                    "MA" => format = DataFormat::Ma,
                    "DB" => format = DataFormat::Db,
                    "R" => {
                        i += 1;
                        z_ref = toks
                            .get(i)
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| parse_err(lineno, "missing reference impedance after R"))?;
                    }
                    other => return Err(parse_err(lineno, format!("unknown option `{other}`"))),
                }
                i += 1;
            }
            continue;
        }
        for tok in content.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("`{tok}` is not a number")))?;
            numbers.push((v, lineno));
        }
    }
    let record = 1 + 2 * n_ports * n_ports;
    if numbers.len() % record != 0 {
        let line = numbers.last().map(|x| x.1).unwrap_or(0);
        return Err(parse_err(
            line,
            format!("{} values do not form whole {n_ports}-port records", numbers.len()),
        ));
    }
    let order = element_order(n_ports);
    let mut freqs = Vec::new();
    let mut mats = Vec::new();
    for rec in numbers.chunks(record) {
        freqs.push(rec[0].0 * scale);
        let mut m = DMatrix::from_element(n_ports, n_ports, Complex64::new(0.0, 0.0));
        for (j, &(r, c)) in order.iter().enumerate() {
            let (a, b) = (rec[1 + 2 * j].0, rec[2 + 2 * j].0);
            m[(r, c)] = match format {
                DataFormat::Ri => Complex64::new(a, b),
                DataFormat::Ma => Complex64::from_polar(a, b.to_radians()),
                DataFormat::Db => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
            };
        }
        mats.push(m);
    }
    let grid = FrequencyGrid::new(freqs)?;
    Ok(NPortSParams::new(grid, z_ref, mats)?)
}

/// Port count from a `.sNp` extension.
pub fn ports_from_extension(path: &Path) -> Option<usize> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    let digits = ext.strip_prefix('s')?.strip_suffix('p')?;
    digits.parse().ok()
}

pub fn read_touchstone_file(path: &Path) -> Result<NPortSParams, SParamIoError> {
    let n = ports_from_extension(path).ok_or_else(|| {
        SParamIoError::Unsupported(format!("cannot infer port count from {}", path.display()))
    })?;
    read_touchstone(BufReader::new(File::open(path)?), n)
}

fn csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["frequency_hz".to_string()];
    for r in 1..=n {
        for c in 1..=n {
            h.push(format!("s{r}{c}_re"));
            h.push(format!("s{r}{c}_im"));
        }
    }
    h
}

/// CSV with one row per frequency and Re/Im columns for every element.
pub fn write_sparams_csv<W: Write>(s: &NPortSParams, w: W) -> Result<(), SParamIoError> {
    let n = s.n_ports();
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(csv_header(n))?;
    for (k, f) in s.grid().iter().enumerate() {
        let m = &s.matrices()[k];
        let mut row = vec![f.to_string()];
        for r in 0..n {
            for c in 0..n {
                row.push(m[(r, c)].re.to_string());
                row.push(m[(r, c)].im.to_string());
            }
        }
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_sparams_csv<R: Read>(r: R, reference_impedance: f64) -> Result<NPortSParams, SParamIoError> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    let cols = header.len();
    let n = ((cols.saturating_sub(1)) as f64 / 2.0).sqrt().round() as usize;
    if n == 0 || 1 + 2 * n * n != cols {
        return Err(parse_err(1, format!("{cols} columns do not describe an n-port")));
    }
    let expected = csv_header(n);
    if header.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(parse_err(1, "unexpected S-parameter CSV header"));
    }
    let mut freqs = Vec::new();
    let mut mats = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let vals: Vec<f64> = rec
            .iter()
            .map(|t| t.trim().parse::<f64>().map_err(|_| parse_err(line, format!("`{t}` is not a number"))))
            .collect::<Result<_, _>>()?;
        if vals.len() != cols {
            return Err(parse_err(line, "wrong number of fields"));
        }
        freqs.push(vals[0]);
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for r in 0..n {
            for c in 0..n {
                let j = 1 + 2 * (r * n + c);
                m[(r, c)] = Complex64::new(vals[j], vals[j + 1]);
            }
        }
        mats.push(m);
    }
    Ok(NPortSParams::new(FrequencyGrid::new(freqs)?, reference_impedance, mats)?)
}
