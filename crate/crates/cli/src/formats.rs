//! On-disk layouts for path sets and approximants.
//!
//! Binary records are little-endian and start with an 8-byte magic tag.
//! Path set: `PATHSET1`, then `n, m, d, seed` as u64, the horizon as f64 and
//! `n (m+1) d` states, path-major. Approximant: `CHEBAPX1`, a u32 format
//! version, the date index and time, then domain, pieces and provenance.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use chebexpo_core::chebyshev::{ChebDomain, ChebyshevApproximant, Linear, Piece, Provenance, Tail};
use chebexpo_core::simulation::{PathSet, TimeGrid};
use serde::{Deserialize, Serialize};

pub const PATHSET_MAGIC: &[u8; 8] = b"PATHSET1";
pub const APPROX_MAGIC: &[u8; 8] = b"CHEBAPX1";
pub const APPROX_VERSION: u32 = 1;

// Sanity caps for lengths read from untrusted files.
const MAX_LEN: u64 = 1 << 32;

pub fn write_pathset_bin<W: Write>(paths: &PathSet, mut w: W) -> Result<()> {
    w.write_all(PATHSET_MAGIC)?;
    for v in [paths.n_paths, paths.steps(), paths.dim] {
        w.write_u64::<LE>(v as u64)?;
    }
    w.write_u64::<LE>(paths.seed)?;
    w.write_f64::<LE>(paths.grid.horizon)?;
    for &x in paths.raw() {
        w.write_f64::<LE>(x)?;
    }
    Ok(())
}

fn read_len<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = r.read_u64::<LE>()?;
    ensure!(v < MAX_LEN, "{what} = {v} is implausibly large");
    Ok(v as usize)
}

pub fn read_pathset_bin<R: Read>(mut r: R) -> Result<PathSet> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    ensure!(&magic == PATHSET_MAGIC, "not a path set file");
    let n = read_len(&mut r, "n")?;
    let m = read_len(&mut r, "m")?;
    let d = read_len(&mut r, "d")?;
    let seed = r.read_u64::<LE>()?;
    let horizon = r.read_f64::<LE>()?;
    let len = n
        .checked_mul(m + 1)
        .and_then(|x| x.checked_mul(d))
        .context("path set dimensions overflow")?;
    let mut states = vec![0.0; len];
    r.read_f64_into::<LE>(&mut states).context("truncated path set")?;
    let mut rest = [0u8; 1];
    ensure!(r.read(&mut rest)? == 0, "trailing bytes after path set");
    Ok(PathSet::from_raw(TimeGrid::new(horizon, m)?, d, seed, n, states)?)
}

/// One row per path and date: `path,u,t,price[,variance]`, preceded by a
/// `# n=..,m=..,d=..,seed=..,horizon=..` comment line.
pub fn write_pathset_csv<W: Write>(paths: &PathSet, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(
        w,
        "# n={},m={},d={},seed={},horizon={:?}",
        paths.n_paths,
        paths.steps(),
        paths.dim,
        paths.seed,
        paths.grid.horizon
    )?;
    let mut csv = csv::Writer::from_writer(w);
    if paths.dim == 2 {
        csv.write_record(["path", "u", "t", "price", "variance"])?;
    } else {
        csv.write_record(["path", "u", "t", "price"])?;
    }
    for i in 0..paths.n_paths {
        for u in 0..=paths.steps() {
            let mut row = vec![i.to_string(), u.to_string(), format!("{:?}", paths.grid.time(u))];
            row.extend(paths.state(i, u).iter().map(|x| format!("{x:?}")));
            csv.write_record(&row)?;
        }
    }
    csv.flush()?;
    Ok(())
}

fn header_field<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    let raw = line
        .trim_start_matches('#')
        .split(',')
        .filter_map(|kv| kv.trim().split_once('='))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
        .with_context(|| format!("missing {key} in path set header"))?;
    raw.parse()
        .ok()
        .with_context(|| format!("bad {key} in path set header"))
}

pub fn read_pathset_csv<R: Read>(r: R) -> Result<PathSet> {
    let mut r = BufReader::new(r);
    let mut first = String::new();
    r.read_line(&mut first)?;
    ensure!(first.starts_with('#'), "path set CSV must start with a header comment");
    let n: usize = header_field(&first, "n")?;
    let m: usize = header_field(&first, "m")?;
    let d: usize = header_field(&first, "d")?;
    let seed: u64 = header_field(&first, "seed")?;
    let horizon: f64 = header_field(&first, "horizon")?;
    ensure!((1..=2).contains(&d), "state dimension must be 1 or 2");
    let mut states = vec![f64::NAN; n * (m + 1) * d];
    let mut csv = csv::Reader::from_reader(r);
    let mut rows = 0usize;
    for rec in csv.records() {
        let rec = rec?;
        ensure!(rec.len() == 3 + d, "row has {} fields, expected {}", rec.len(), 3 + d);
        let i: usize = rec[0].parse()?;
        let u: usize = rec[1].parse()?;
        ensure!(i < n && u <= m, "row ({i}, {u}) outside the declared shape");
        for k in 0..d {
            states[(i * (m + 1) + u) * d + k] = rec[3 + k].parse()?;
        }
        rows += 1;
    }
    ensure!(rows == n * (m + 1), "expected {} rows, found {rows}", n * (m + 1));
    ensure!(states.iter().all(|x| !x.is_nan()), "path set CSV has missing states");
    Ok(PathSet::from_raw(TimeGrid::new(horizon, m)?, d, seed, n, states)?)
}

pub fn save_pathset(paths: &PathSet, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => write_pathset_csv(paths, file),
        _ => {
            let mut w = BufWriter::new(file);
            write_pathset_bin(paths, &mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

pub fn load_pathset(path: &Path) -> Result<PathSet> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_pathset_csv(file),
        _ => read_pathset_bin(BufReader::new(file)),
    }
}

/// An approximant with the exposure date it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximantRecord {
    pub version: u32,
    pub u: usize,
    pub t: f64,
    pub approximant: ChebyshevApproximant,
}

impl ApproximantRecord {
    pub fn new(u: usize, t: f64, approximant: ChebyshevApproximant) -> Self {
        ApproximantRecord {
            version: APPROX_VERSION,
            u,
            t,
            approximant,
        }
    }
}

fn write_tail<W: Write>(w: &mut W, tail: Option<Tail>) -> Result<()> {
    match tail {
        None => w.write_u8(0)?,
        Some(t) => {
            w.write_u8(1)?;
            w.write_f64::<LE>(t.cut)?;
            w.write_f64::<LE>(t.formula.intercept)?;
            w.write_f64::<LE>(t.formula.slope)?;
        }
    }
    Ok(())
}

fn read_tail<R: Read>(r: &mut R) -> Result<Option<Tail>> {
    Ok(match r.read_u8()? {
        0 => None,
        1 => Some(Tail {
            cut: r.read_f64::<LE>()?,
            formula: Linear {
                intercept: r.read_f64::<LE>()?,
                slope: r.read_f64::<LE>()?,
            },
        }),
        b => bail!("bad tail flag {b}"),
    })
}

fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    w.write_u64::<LE>(xs.len() as u64)?;
    xs.iter().try_for_each(|&x| w.write_f64::<LE>(x))?;
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let len = read_len(r, "vector length")?;
    let mut out = vec![0.0; len];
    r.read_f64_into::<LE>(&mut out)?;
    Ok(out)
}

pub fn write_approximant_bin<W: Write>(rec: &ApproximantRecord, mut w: W) -> Result<()> {
    let a = &rec.approximant;
    w.write_all(APPROX_MAGIC)?;
    w.write_u32::<LE>(rec.version)?;
    w.write_u64::<LE>(rec.u as u64)?;
    w.write_f64::<LE>(rec.t)?;
    let d = &a.domain;
    w.write_f64::<LE>(d.price.0)?;
    w.write_f64::<LE>(d.price.1)?;
    match d.variance {
        None => w.write_u8(0)?,
        Some((lo, hi)) => {
            w.write_u8(1)?;
            w.write_f64::<LE>(lo)?;
            w.write_f64::<LE>(hi)?;
        }
    }
    write_f64s(&mut w, &d.splits)?;
    write_tail(&mut w, d.left)?;
    write_tail(&mut w, d.right)?;
    w.write_u64::<LE>(a.pieces.len() as u64)?;
    for p in &a.pieces {
        for x in p.lower.iter().chain(&p.upper) {
            w.write_f64::<LE>(*x)?;
        }
        for k in p.degrees {
            w.write_u64::<LE>(k as u64)?;
        }
        write_f64s(&mut w, &p.coeffs)?;
    }
    let label = a.provenance.pricer.as_bytes();
    w.write_u64::<LE>(label.len() as u64)?;
    w.write_all(label)?;
    w.write_u64::<LE>(a.provenance.node_hash)?;
    Ok(())
}

pub fn read_approximant_bin<R: Read>(mut r: R) -> Result<ApproximantRecord> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    ensure!(&magic == APPROX_MAGIC, "not an approximant record");
    let version = r.read_u32::<LE>()?;
    ensure!(version == APPROX_VERSION, "unsupported approximant version {version}");
    let u = read_len(&mut r, "date index")?;
    let t = r.read_f64::<LE>()?;
    let price = (r.read_f64::<LE>()?, r.read_f64::<LE>()?);
    let variance = match r.read_u8()? {
        0 => None,
        1 => Some((r.read_f64::<LE>()?, r.read_f64::<LE>()?)),
        b => bail!("bad variance flag {b}"),
    };
    let splits = read_f64s(&mut r)?;
    let left = read_tail(&mut r)?;
    let right = read_tail(&mut r)?;
    let domain = ChebDomain {
        price,
        variance,
        splits,
        left,
        right,
    };
    domain.validate()?;
    let count = read_len(&mut r, "piece count")?;
    let mut pieces = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let mut b = [0.0; 4];
        r.read_f64_into::<LE>(&mut b)?;
        let degrees = [read_len(&mut r, "degree")?, read_len(&mut r, "degree")?];
        let coeffs = read_f64s(&mut r)?;
        ensure!(
            coeffs.len() == (degrees[0] + 1) * (degrees[1] + 1),
            "coefficient count does not match the degrees"
        );
        pieces.push(Piece {
            lower: [b[0], b[1]],
            upper: [b[2], b[3]],
            degrees,
            coeffs,
        });
    }
    let len = read_len(&mut r, "label length")?;
    let mut label = vec![0u8; len];
    r.read_exact(&mut label)?;
    let node_hash = r.read_u64::<LE>()?;
    Ok(ApproximantRecord {
        version,
        u,
        t,
        approximant: ChebyshevApproximant {
            domain,
            pieces,
            provenance: Provenance {
                pricer: String::from_utf8(label).context("pricer label is not UTF-8")?,
                node_hash,
            },
        },
    })
}

pub fn save_approximant(rec: &ApproximantRecord, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::to_writer_pretty(&mut w, rec)?,
        _ => write_approximant_bin(rec, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn load_approximant(path: &Path) -> Result<ApproximantRecord> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let r = BufReader::new(file);
    let rec: ApproximantRecord = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_reader(r)?,
        _ => read_approximant_bin(r)?,
    };
    ensure!(
        rec.version == APPROX_VERSION,
        "unsupported approximant version {}",
        rec.version
    );
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use chebexpo_core::chebyshev::fit_fixed;
    use chebexpo_core::simulation::{simulate, MeasureKind, ModelSpec};

    use super::*;

    fn paths(model: ModelSpec) -> PathSet {
        simulate(&model, TimeGrid::new(1.0, 5).unwrap(), 7, MeasureKind::Physical, 11).unwrap()
    }

    #[test]
    fn pathset_binary_roundtrip() {
        for model in [ModelSpec::reference_bsm(), ModelSpec::reference_hsv()] {
            let p = paths(model);
            let mut buf = Vec::new();
            write_pathset_bin(&p, &mut buf).unwrap();
            assert_eq!(buf.len(), 8 + 4 * 8 + 8 + p.raw().len() * 8);
            assert_eq!(read_pathset_bin(buf.as_slice()).unwrap(), p);
            buf.push(0);
            assert!(read_pathset_bin(buf.as_slice()).is_err());
            assert!(read_pathset_bin(&buf[..40]).is_err());
        }
    }

    #[test]
    fn pathset_csv_roundtrip() {
        for model in [ModelSpec::reference_mjd(), ModelSpec::reference_hsv()] {
            let p = paths(model);
            let mut buf = Vec::new();
            write_pathset_csv(&p, &mut buf).unwrap();
            let text = String::from_utf8(buf.clone()).unwrap();
            assert!(text.starts_with("# n=7,m=5,d="));
            assert_eq!(read_pathset_csv(buf.as_slice()).unwrap(), p);
        }
    }

    #[test]
    fn approximant_roundtrip_both_formats() {
        let d = ChebDomain::rectangle((1.0, 3.0), (0.0, 0.5))
            .unwrap()
            .with_split(2.0)
            .unwrap()
            .with_tails(
                None,
                Some(Tail {
                    cut: 2.9,
                    formula: Linear {
                        intercept: -1.0,
                        slope: 0.5,
                    },
                }),
            )
            .unwrap();
        let a = fit_fixed(|z: &[f64]| Ok(z[0].exp() * (1.0 + z[1])), &d, [6, 3], "test").unwrap();
        let rec = ApproximantRecord::new(4, 0.25, a);
        let mut buf = Vec::new();
        write_approximant_bin(&rec, &mut buf).unwrap();
        assert_eq!(read_approximant_bin(buf.as_slice()).unwrap(), rec);
        let json = serde_json::to_string(&rec).unwrap();
        assert_eq!(serde_json::from_str::<ApproximantRecord>(&json).unwrap(), rec);
        buf[8] = 9;
        assert!(read_approximant_bin(buf.as_slice()).is_err());
    }
}
