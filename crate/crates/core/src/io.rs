//! Run configuration, binary checkpoints and CSV/JSON export.
//!
//! Configs are TOML with `[model]`, `[grid]`, `[descent]`, `[scan]` and
//! `[paths]` tables. Checkpoints are a short text header followed by the
//! samples as little-endian `f64`, guarded by a SHA-256 digest.

use crate::descent::DescentConfig;
use crate::error::{CheckpointError, Error, Result};
use crate::grid::{Grid, Profile};
use crate::model::ModelParams;
use crate::scalar::Real;
use crate::speed::{RootTolerances, ScanOptions, ScanSample, SpeedProblem};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_MAGIC: &str = "fhn-checkpoint";
const HEADER_END: &[u8] = b"end\n";

// ---------------------------------------------------------------- config

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<RawModel>,
    grid: Option<RawGrid>,
    descent: Option<RawDescent>,
    scan: Option<RawScan>,
    paths: Option<RawPaths>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    d: Option<f64>,
    gamma: Option<f64>,
    beta: Option<f64>,
    #[serde(rename = "L")]
    half_width: Option<f64>,
    dim: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    h: Option<f64>,
    domain_length: Option<f64>,
    n_y: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawDescent {
    theta: Option<f64>,
    alpha1_init: Option<f64>,
    delta1: Option<f64>,
    delta2: Option<f64>,
    delta3: Option<f64>,
    max_iters: Option<usize>,
    max_backtracks: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    c_start: Option<f64>,
    c_end: Option<f64>,
    dc: Option<f64>,
    refine_dc: Option<f64>,
    tol_c: Option<f64>,
    tol_j_rel: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawPaths {
    output_dir: Option<PathBuf>,
    checkpoint_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelBlock {
    pub d: f64,
    pub gamma: f64,
    pub beta: f64,
    /// Physical strip half-width; present exactly when `dim == 2`.
    pub half_width: Option<f64>,
    pub dim: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridBlock {
    pub h: f64,
    pub domain_length: f64,
    pub n_y: usize,
}

impl GridBlock {
    /// Number of x-cells, `domain_length / h` rounded to the nearest integer.
    pub fn n_x(&self) -> usize {
        (self.domain_length / self.h).round() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanBlock {
    pub c_start: f64,
    pub c_end: f64,
    pub dc: f64,
    pub refine_dc: Option<f64>,
    pub tol_c: f64,
    pub tol_j_rel: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathsBlock {
    pub output_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
}

/// A validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub grid: GridBlock,
    pub descent: DescentConfig<f64>,
    pub scan: ScanBlock,
    pub paths: PathsBlock,
}

fn required(value: Option<f64>, key: &str) -> Result<f64> {
    value.ok_or_else(|| Error::validation(key, "missing required key"))
}

impl RunConfig {
    /// Parses and validates TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_column(text, s.start)).unwrap_or((0, 0));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let m = raw.model.unwrap_or_default();
        let d = required(m.d, "d")?;
        let gamma = required(m.gamma, "gamma")?;
        let beta = required(m.beta, "beta")?;
        let dim = m.dim.unwrap_or(if m.half_width.is_some() { 2 } else { 1 });
        let half_width = match (dim, m.half_width) {
            (1, None) => None,
            (1, Some(_)) => return Err(Error::validation("L", "a strip half-width requires dim = 2")),
            (2, Some(l)) => Some(l),
            (2, None) => return Err(Error::validation("L", "dim = 2 needs the strip half-width")),
            (other, _) => return Err(Error::validation("dim", format!("must be 1 or 2, got {other}"))),
        };
        let model = ModelBlock {
            d,
            gamma,
            beta,
            half_width,
            dim,
        };

        let g = raw.grid.unwrap_or_default();
        let grid = GridBlock {
            h: g.h.unwrap_or(0.01),
            domain_length: g.domain_length.unwrap_or(160.0),
            n_y: g.n_y.unwrap_or(40),
        };

        let base = DescentConfig::<f64>::for_dim(dim);
        let s = raw.descent.unwrap_or_default();
        let descent = DescentConfig {
            theta: s.theta.unwrap_or(base.theta),
            alpha1_init: s.alpha1_init.unwrap_or(base.alpha1_init),
            delta1: s.delta1.unwrap_or(base.delta1),
            delta2: s.delta2.unwrap_or(base.delta2),
            delta3: s.delta3.unwrap_or(base.delta3),
            max_iters: s.max_iters.unwrap_or(base.max_iters),
            max_backtracks: s.max_backtracks.unwrap_or(base.max_backtracks),
        };

        let s = raw.scan.unwrap_or_default();
        let scan = ScanBlock {
            c_start: s.c_start.unwrap_or(20.0),
            c_end: s.c_end.unwrap_or(0.5),
            dc: s.dc.unwrap_or(0.01),
            refine_dc: s.refine_dc,
            tol_c: s.tol_c.unwrap_or(1e-3),
            tol_j_rel: s.tol_j_rel.unwrap_or(1e-6),
        };

        let p = raw.paths.unwrap_or_default();
        let paths = PathsBlock {
            output_dir: p.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            checkpoint_dir: p.checkpoint_dir.unwrap_or_else(|| PathBuf::from("checkpoints")),
        };

        let cfg = Self {
            model,
            grid,
            descent,
            scan,
            paths,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every block against the invariants of the modules it feeds.
    pub fn validate(&self) -> Result<()> {
        self.model_params(1.0)?;
        self.descent.validate()?;
        let g = &self.grid;
        if !(g.h > 0.0 && g.h.is_finite()) {
            return Err(Error::validation("h", format!("must be positive, got {}", g.h)));
        }
        if !(g.domain_length > 0.0 && g.domain_length.is_finite()) {
            return Err(Error::validation("domain_length", format!("must be positive, got {}", g.domain_length)));
        }
        if g.n_x() < 2 {
            return Err(Error::validation("domain_length", "must span at least two cells"));
        }
        if self.model.dim == 2 && g.n_y < 2 {
            return Err(Error::validation("n_y", "a strip needs at least 2 transverse cells"));
        }
        let s = &self.scan;
        for (key, v) in [("c_start", s.c_start), ("c_end", s.c_end), ("tol_c", s.tol_c), ("tol_j_rel", s.tol_j_rel)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(key, format!("must be positive, got {v}")));
            }
        }
        if !(s.dc != 0.0 && s.dc.is_finite()) {
            return Err(Error::validation("dc", "must be nonzero"));
        }
        if let Some(r) = s.refine_dc {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::validation("refine_dc", format!("must be positive, got {r}")));
            }
        }
        Ok(())
    }

    pub fn model_params(&self, c: f64) -> Result<ModelParams<f64>> {
        let m = &self.model;
        match m.half_width {
            None => ModelParams::line(m.d, m.gamma, m.beta, c),
            Some(l) => ModelParams::strip(m.d, m.gamma, m.beta, c, l),
        }
    }

    pub fn speed_problem(&self) -> Result<SpeedProblem<f64>> {
        SpeedProblem::new(self.model_params(1.0)?, self.grid.h, self.grid.n_x(), self.grid.n_y, self.descent)
    }

    pub fn scan_options(&self) -> ScanOptions<f64> {
        ScanOptions {
            refine_dc: self.scan.refine_dc,
            ..ScanOptions::default()
        }
    }

    pub fn root_tolerances(&self) -> RootTolerances<f64> {
        RootTolerances {
            tol_c: self.scan.tol_c,
            tol_j_rel: self.scan.tol_j_rel,
            ..RootTolerances::default()
        }
    }

    /// TOML text that parses back to this config.
    pub fn to_toml(&self) -> String {
        let raw = RawConfig {
            model: Some(RawModel {
                d: Some(self.model.d),
                gamma: Some(self.model.gamma),
                beta: Some(self.model.beta),
                half_width: self.model.half_width,
                dim: Some(self.model.dim),
            }),
            grid: Some(RawGrid {
                h: Some(self.grid.h),
                domain_length: Some(self.grid.domain_length),
                n_y: Some(self.grid.n_y),
            }),
            descent: Some(RawDescent {
                theta: Some(self.descent.theta),
                alpha1_init: Some(self.descent.alpha1_init),
                delta1: Some(self.descent.delta1),
                delta2: Some(self.descent.delta2),
                delta3: Some(self.descent.delta3),
                max_iters: Some(self.descent.max_iters),
                max_backtracks: Some(self.descent.max_backtracks),
            }),
            scan: Some(RawScan {
                c_start: Some(self.scan.c_start),
                c_end: Some(self.scan.c_end),
                dc: Some(self.scan.dc),
                refine_dc: self.scan.refine_dc,
                tol_c: Some(self.scan.tol_c),
                tol_j_rel: Some(self.scan.tol_j_rel),
            }),
            paths: Some(RawPaths {
                output_dir: Some(self.paths.output_dir.clone()),
                checkpoint_dir: Some(self.paths.checkpoint_dir.clone()),
            }),
        };
        toml::to_string(&raw).expect("config serialises")
    }
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    RunConfig::from_toml(&fs::read_to_string(path)?)
}

// 1-based line and column of a byte offset
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

// ------------------------------------------------------------ checkpoints

/// Run metadata stored next to a profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub c: f64,
    pub d: f64,
    pub gamma: f64,
    pub beta: f64,
    /// Energy of the stored profile.
    pub j: f64,
}

impl CheckpointMeta {
    pub fn from_params<T: Real>(params: &ModelParams<T>, j: T) -> Self {
        Self {
            c: params.c.to_f64_lossy(),
            d: params.d.to_f64_lossy(),
            gamma: params.gamma.to_f64_lossy(),
            beta: params.beta.to_f64_lossy(),
            j: j.to_f64_lossy(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Checkpoint<T> {
    pub profile: Profile<T>,
    pub meta: CheckpointMeta,
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Serialises a profile and its metadata.
pub fn encode_checkpoint<T: Real>(p: &Profile<T>, meta: &CheckpointMeta) -> Vec<u8> {
    let g = p.grid();
    let payload: Vec<u8> = p.samples().iter().flat_map(|s| s.to_f64_lossy().to_le_bytes()).collect();
    let (half_width, n_y) = match g.strip_info() {
        Some(s) => (format!("{:e}", s.half_width.to_f64_lossy()), s.n_y),
        None => ("none".to_string(), 0),
    };
    let mut header = String::new();
    let mut line = |k: &str, v: String| header.push_str(&format!("{k} = {v}\n"));
    line("version", CHECKPOINT_VERSION.to_string());
    line("dim", g.dim().to_string());
    line("origin", format!("{:e}", g.origin().to_f64_lossy()));
    line("h", format!("{:e}", g.h().to_f64_lossy()));
    line("n_x", g.n_x().to_string());
    line("half_width", half_width);
    line("n_y", n_y.to_string());
    line("c", format!("{:e}", meta.c));
    line("d", format!("{:e}", meta.d));
    line("gamma", format!("{:e}", meta.gamma));
    line("beta", format!("{:e}", meta.beta));
    line("J", format!("{:e}", meta.j));
    line("samples", p.samples().len().to_string());
    line("sha256", hex_digest(&payload));
    let mut out = format!("{CHECKPOINT_MAGIC}\n{header}").into_bytes();
    out.extend_from_slice(HEADER_END);
    out.extend_from_slice(&payload);
    out
}

fn header_err(msg: impl Into<String>) -> Error {
    CheckpointError::Header(msg.into()).into()
}

/// Parses bytes written by [`encode_checkpoint`].
pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let end = bytes
        .windows(HEADER_END.len() + 1)
        .position(|w| w[0] == b'\n' && &w[1..] == HEADER_END)
        .ok_or_else(|| header_err("no end-of-header marker"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| header_err("header is not UTF-8"))?;
    let payload = &bytes[end + 1 + HEADER_END.len()..];

    let mut lines = header.lines();
    if lines.next() != Some(CHECKPOINT_MAGIC) {
        return Err(header_err("not a checkpoint file"));
    }
    let fields: std::collections::HashMap<&str, &str> = lines
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim(), v.trim()))
        .collect();
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| header_err(format!("missing `{k}`")));
    let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| header_err(format!("bad value for `{k}`"))) };
    let count = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| header_err(format!("bad value for `{k}`"))) };

    let version: u32 = get("version")?.parse().map_err(|_| header_err("bad version"))?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        }
        .into());
    }
    let samples = count("samples")?;
    let expected = samples * 8;
    if payload.len() != expected {
        return Err(CheckpointError::LengthMismatch {
            found: payload.len(),
            expected,
        }
        .into());
    }
    if hex_digest(payload) != get("sha256")? {
        return Err(CheckpointError::Corrupted("checksum mismatch".into()).into());
    }

    let origin = T::lit(num("origin")?);
    let h = T::lit(num("h")?);
    let n_x = count("n_x")?;
    let grid = match count("dim")? {
        1 => Grid::line(origin, h, n_x)?,
        2 => Grid::strip(origin, h, n_x, T::lit(num("half_width")?), count("n_y")?)?,
        other => return Err(header_err(format!("dim = {other}"))),
    };
    if grid.len() != samples {
        return Err(CheckpointError::LengthMismatch {
            found: samples,
            expected: grid.len(),
        }
        .into());
    }
    let values = payload
        .chunks_exact(8)
        .map(|b| T::lit(f64::from_le_bytes(b.try_into().expect("8-byte chunk"))))
        .collect();
    let profile = Profile::new(grid, values).map_err(|e| CheckpointError::Corrupted(e.to_string()))?;
    let meta = CheckpointMeta {
        c: num("c")?,
        d: num("d")?,
        gamma: num("gamma")?,
        beta: num("beta")?,
        j: num("J")?,
    };
    Ok(Checkpoint { profile, meta })
}

pub fn save_checkpoint<T: Real>(path: impl AsRef<Path>, p: &Profile<T>, meta: &CheckpointMeta) -> Result<()> {
    fs::write(path, encode_checkpoint(p, meta))?;
    Ok(())
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    decode_checkpoint(&fs::read(path)?)
}

/// Value of `d` for a new computation: the command-line value wins, with a
/// warning when it disagrees with the one recorded in a checkpoint.
pub fn resolve_d(recorded: f64, requested: Option<f64>) -> f64 {
    match requested {
        Some(d) if d != recorded => {
            log::warn!("checkpoint was computed with d = {recorded}; continuing with d = {d}");
            d
        }
        Some(d) => d,
        None => recorded,
    }
}

// ----------------------------------------------------------------- export

fn sig17<T: Real>(x: T) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}

/// `x,w` rows on the line, `x,y,w` rows on a strip.
pub fn write_profile_csv<T: Real>(out: &mut impl Write, p: &Profile<T>) -> Result<()> {
    let g = p.grid();
    if g.dim() == 1 {
        writeln!(out, "x,w")?;
        for j in 0..=g.n_x() {
            writeln!(out, "{},{}", sig17(g.x(j)), sig17(p.at(j, 0)))?;
        }
    } else {
        writeln!(out, "x,y,w")?;
        for k in 0..g.rows() {
            for j in 0..=g.n_x() {
                writeln!(out, "{},{},{}", sig17(g.x(j)), sig17(g.y(k)), sig17(p.at(j, k)))?;
            }
        }
    }
    Ok(())
}

/// Reads a profile written by [`write_profile_csv`]; the grid is rebuilt
/// from the first and last coordinates.
pub fn read_profile_csv(input: impl BufRead) -> Result<Profile<f64>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let columns = match header.trim() {
        "x,w" => 2,
        "x,y,w" => 3,
        other => {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("unexpected header `{other}`"),
            })
        }
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .ok()
            .filter(|r| r.len() == columns)
            .ok_or_else(|| Error::Parse {
                line: i + 2,
                column: 1,
                message: format!("expected {columns} numbers"),
            })?;
        rows.push(row);
    }
    if rows.len() < 3 {
        return Err(Error::invalid("a profile needs at least three rows"));
    }
    let x0 = rows[0][0];
    let per_row = rows[1..].iter().position(|r| r[0] == x0).map_or(rows.len(), |i| i + 1);
    let n_x = per_row - 1;
    let x_end = rows[n_x][0];
    let h = (x_end - x0) / n_x as f64;
    let grid = if columns == 2 {
        Grid::line(x0, h, n_x)?
    } else {
        let n_y = rows.len() / per_row - 1;
        Grid::strip(x0, h, n_x, -rows[0][1], n_y)?
    };
    Profile::new(grid, rows.iter().map(|r| r[columns - 1]).collect())
}

/// `c,J,converged` rows in increasing `c`.
pub fn write_scan_csv<'a, T: Real + 'a>(out: &mut impl Write, samples: impl IntoIterator<Item = &'a ScanSample<T>>) -> Result<()> {
    let mut rows: Vec<_> = samples.into_iter().collect();
    rows.sort_by(|a, b| a.c.partial_cmp(&b.c).expect("finite speeds"));
    writeln!(out, "c,J,converged")?;
    for s in rows {
        writeln!(out, "{},{},{}", sig17(s.c), sig17(s.j), s.converged)?;
    }
    Ok(())
}

/// Writes any serialisable record as pretty JSON.
pub fn write_json(out: &mut impl Write, record: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, record).map_err(|e| Error::Io(e.into()))?;
    writeln!(out)?;
    Ok(())
}

/// Creates `path` (and its parent directories) and hands a buffered writer to `f`.
pub fn write_file(path: impl AsRef<Path>, f: impl FnOnce(&mut std::io::BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    f(&mut out)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE1: &str = r#"
[model]
d = 5e-4
gamma = 0.0625
beta = 0.25

[descent]
theta = 0.5
alpha1_init = 1e-3
"#;

    #[test]
    fn table_defaults_round_trip() {
        let cfg = RunConfig::from_toml(TABLE1).unwrap();
        assert_eq!(cfg.model.beta, 0.25);
        assert_eq!(cfg.model.gamma, 1.0 / 16.0);
        assert_eq!(cfg.descent.theta, 0.5);
        assert_eq!(cfg.descent.alpha1_init, 1e-3);
        assert_eq!(cfg.descent.delta2, 1e-14);
        assert_eq!(cfg.descent.delta3, 1e-3);
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn missing_and_invalid_keys_are_named() {
        let missing = TABLE1.replace("beta = 0.25", "");
        match RunConfig::from_toml(&missing) {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "beta"),
            other => panic!("{other:?}"),
        }
        let large = TABLE1.replace("beta = 0.25", "beta = 0.6");
        match RunConfig::from_toml(&large) {
            Err(Error::Validation { key, message }) => {
                assert_eq!(key, "beta");
                assert!(message.contains("1/2"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_the_line() {
        let broken = "[model]\nd = 5e-4\ngamma = = 1\n";
        match RunConfig::from_toml(broken) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    fn sample_profile() -> Profile<f64> {
        let g = Grid::line(-3.25, 0.1, 40).unwrap();
        Profile::from_fn(g, |x: f64, _| (x * 1.37).sin() / 3.0 + 1e-300).unwrap()
    }

    fn meta() -> CheckpointMeta {
        CheckpointMeta {
            c: 14.0377,
            d: 5e-4,
            gamma: 0.0625,
            beta: 0.25,
            j: -1.234e-9,
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let p = sample_profile();
        let back: Checkpoint<f64> = decode_checkpoint(&encode_checkpoint(&p, &meta())).unwrap();
        assert_eq!(back.meta, meta());
        assert_eq!(back.profile.grid(), p.grid());
        for (a, b) in back.profile.samples().iter().zip(p.samples()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn damaged_checkpoints_are_rejected() {
        let bytes = encode_checkpoint(&sample_profile(), &meta());
        let truncated = &bytes[..bytes.len() - 5];
        assert!(matches!(
            decode_checkpoint::<f64>(truncated),
            Err(Error::Checkpoint(CheckpointError::LengthMismatch { .. }))
        ));
        let mut flipped = bytes.clone();
        let last = flipped.len() - 1;
        flipped[last] ^= 1;
        assert!(matches!(
            decode_checkpoint::<f64>(&flipped),
            Err(Error::Checkpoint(CheckpointError::Corrupted(_)))
        ));
        let mut newer = bytes.clone();
        let at = newer.windows(11).position(|w| w == b"version = 1").unwrap();
        newer[at + 10] = b'7';
        assert!(matches!(
            decode_checkpoint::<f64>(&newer),
            Err(Error::Checkpoint(CheckpointError::VersionMismatch { found: 7, .. }))
        ));
    }

    #[test]
    fn command_line_d_wins() {
        assert_eq!(resolve_d(5e-4, Some(3e-4)), 3e-4);
        assert_eq!(resolve_d(5e-4, None), 5e-4);
    }

    #[test]
    fn profile_csv_reimports() {
        let p = sample_profile();
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &p).unwrap();
        let back = read_profile_csv(&buf[..]).unwrap();
        assert_eq!(back.samples().len(), p.samples().len());
        for (a, b) in back.samples().iter().zip(p.samples()) {
            assert!((a - b).abs() <= 1e-16 * b.abs().max(1e-300));
        }
        assert!((back.grid().h() - 0.1).abs() < 1e-15);

        let g = Grid::strip(-2.0, 0.25, 16, 1.5, 6).unwrap();
        let s = Profile::from_fn(g, |x: f64, y: f64| x.cos() * (1.5 - y.abs())).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &s).unwrap();
        let back = read_profile_csv(&buf[..]).unwrap();
        assert_eq!(back.grid().n_y(), 6);
        assert_eq!(back.grid().n_x(), 16);
        assert!(back.sup_diff(&s.with_grid(back.grid().clone()).unwrap()).unwrap() < 1e-15);
    }

    #[test]
    fn empty_scan_writes_only_the_header() {
        let mut buf = Vec::new();
        write_scan_csv::<f64>(&mut buf, []).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "c,J,converged\n");
    }
}
