//! IGSO3 table files and the on-disk cache.
//!
//! Binary layout, little-endian: the 8-byte magic `IGSO3TB1`, `t: f64`,
//! `M: u64`, `L: u64`, then `M` values each of `omega`, `f` and `df/domega`
//! as `f64`. The CSV form has columns `t,series_terms,omega,f,df_domega`.

use std::path::{Path, PathBuf};

use super::output::{fmt_f64, read_numeric_csv, write_file, CsvOut};
use super::CACHE_ENV;
use crate::igso3::{Igso3Table, TruncationConfig};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"IGSO3TB1";

pub const CSV_HEADER: [&str; 5] = ["t", "series_terms", "omega", "f", "df_domega"];

pub fn encode_bin(table: &Igso3Table) -> Vec<u8> {
    let m = table.omega().len();
    let mut out = Vec::with_capacity(32 + 24 * m);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&table.t().to_le_bytes());
    out.extend_from_slice(&(m as u64).to_le_bytes());
    out.extend_from_slice(&(table.series_terms() as u64).to_le_bytes());
    for col in [table.omega(), table.f_values(), table.df_values()] {
        for v in col {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_bin(bytes: &[u8], path: &Path) -> Result<Igso3Table> {
    let bad = |msg: &str| Error::Parse { path: path.into(), msg: msg.into() };
    if bytes.len() < 32 || &bytes[..8] != MAGIC {
        return Err(bad("not an IGSO3 table file"));
    }
    let word = |i: usize| -> [u8; 8] { bytes[i..i + 8].try_into().expect("8-byte slice") };
    let t = f64::from_le_bytes(word(8));
    let m = u64::from_le_bytes(word(16)) as usize;
    let l = u64::from_le_bytes(word(24)) as usize;
    if m.checked_mul(24).and_then(|n| n.checked_add(32)) != Some(bytes.len()) {
        return Err(bad("table length does not match its header"));
    }
    let column = |k: usize| -> Vec<f64> {
        (0..m).map(|i| f64::from_le_bytes(word(32 + 8 * (k * m + i)))).collect()
    };
    Igso3Table::from_parts(t, l, column(0), column(1), column(2))
        .map_err(|e| Error::Parse { path: path.into(), msg: e.to_string() })
}

pub fn write_csv(table: &Igso3Table, path: &Path) -> Result<()> {
    let mut out = CsvOut::create(path, &CSV_HEADER)?;
    let (t, l) = (fmt_f64(table.t()), table.series_terms().to_string());
    for i in 0..table.omega().len() {
        out.row([
            t.clone(),
            l.clone(),
            fmt_f64(table.omega()[i]),
            fmt_f64(table.f_values()[i]),
            fmt_f64(table.df_values()[i]),
        ])?;
    }
    out.finish()
}

pub fn read_csv(path: &Path) -> Result<Igso3Table> {
    let csv = read_numeric_csv(path)?;
    let bad = |msg: &str| Error::Parse { path: path.into(), msg: msg.into() };
    if csv.header != CSV_HEADER {
        return Err(bad("unexpected table header"));
    }
    let first = csv.rows.first().ok_or_else(|| bad("empty table"))?;
    let (t, l) = (first[0], first[1]);
    if csv.rows.iter().any(|r| r[0] != t || r[1] != l) {
        return Err(bad("t and series_terms must be constant"));
    }
    let col = |k: usize| csv.rows.iter().map(|r| r[k]).collect::<Vec<_>>();
    Igso3Table::from_parts(t, l as usize, col(2), col(3), col(4))
        .map_err(|e| Error::Parse { path: path.into(), msg: e.to_string() })
}

pub fn save(table: &Igso3Table, path: &Path, csv: bool) -> Result<()> {
    if csv {
        write_csv(table, path)
    } else {
        write_file(path, &encode_bin(table))
    }
}

/// Loads either format, detected by the magic bytes.
pub fn load(path: &Path) -> Result<Igso3Table> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        decode_bin(&bytes, path)
    } else {
        read_csv(path)
    }
}

/// Cache file name for a table configuration.
pub fn cache_file_name(t: f64, cfg: &TruncationConfig) -> String {
    format!("igso3_t{:?}_L{}_M{}_e{:?}.bin", t, cfg.series_terms, cfg.angle_grid, cfg.omega_eps)
}

pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Loads the cached table for `(t, cfg)` or builds and stores it. Returns
/// the table and whether it came from the cache. Without a cache directory
/// this just builds.
pub fn load_or_build(t: f64, cfg: &TruncationConfig, dir: Option<&Path>) -> Result<(Igso3Table, bool)> {
    let Some(dir) = dir else {
        return Ok((Igso3Table::build(t, cfg)?, false));
    };
    let path = dir.join(cache_file_name(t, cfg));
    if path.exists() {
        let table = load(&path)?;
        if table.omega().len() == cfg.angle_grid && table.series_terms() == cfg.series_terms && table.t() == t {
            return Ok((table, true));
        }
    }
    let table = Igso3Table::build(t, cfg)?;
    // write-then-rename so concurrent readers never see a partial file
    let tmp = dir.join(format!("{}.tmp{}", cache_file_name(t, cfg), std::process::id()));
    write_file(&tmp, &encode_bin(&table))?;
    std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok((table, false))
}
