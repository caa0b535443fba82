//! Batch front end: loads a series, runs the adaptive sampler and writes
//! report and plot-data files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use qgarch_core::data::{load_prices, load_returns, simulate_qgarch, to_returns, Column, ReturnSeries};
use qgarch_core::diagnostics::{acf, summarize_with, SummaryOptions, SummaryReport, DEFAULT_JACKKNIFE_BLOCKS};
use qgarch_core::model::{linear_grid, news_impact_curve, ModelParams, PARAM_NAMES};
use qgarch_core::proposal::ProposalSnapshot;
use qgarch_core::sampler::{run_adaptive, ChainConfig, ChainResult, MomentSnapshot};

pub const SAMPLES_FILE: &str = "samples.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const ACF_FILE: &str = "acf.csv";
pub const ACCEPTANCE_FILE: &str = "acceptance.csv";
pub const MOMENTS_FILE: &str = "moments.json";
pub const NIC_FILE: &str = "nic.csv";

pub const OUTPUT_FILES: [&str; 7] = [
    SAMPLES_FILE,
    SUMMARY_JSON,
    SUMMARY_TXT,
    ACF_FILE,
    ACCEPTANCE_FILE,
    MOMENTS_FILE,
    NIC_FILE,
];

pub const DEFAULT_ACF_LAGS: usize = 200;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] qgarch_core::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 usage, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use qgarch_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Json(_) => 3,
            CliError::Core(e) => match e {
                E::Parse { .. } | E::InsufficientData(_) | E::Domain(_) | E::Io(_) | E::Csv(_) => 3,
                E::DegenerateSeries | E::NonConvergence(_) | E::DegenerateCovariance { .. } => 4,
            },
        }
    }

    /// Short error-class label for the one-line diagnostic.
    pub fn class(&self) -> &'static str {
        use qgarch_core::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Json(_) => "serialization",
            CliError::Core(e) => match e {
                E::Parse { .. } | E::Csv(_) => "parse",
                E::InsufficientData(_) => "insufficient data",
                E::Domain(_) => "domain",
                E::Io(_) => "io",
                E::DegenerateSeries => "degenerate series",
                E::NonConvergence(_) => "non-convergence",
                E::DegenerateCovariance { .. } => "degenerate covariance",
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Prices,
    Returns,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NicGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for NicGrid {
    fn default() -> Self {
        NicGrid {
            min: -5.0,
            max: 5.0,
            points: 201,
        }
    }
}

impl NicGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        linear_grid(self.min, self.max, self.points).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub input: PathBuf,
    pub input_kind: InputKind,
    pub column: Column,
    pub chain: ChainConfig,
    pub out_dir: PathBuf,
    pub nic_grid: NicGrid,
    pub jackknife_blocks: usize,
    pub acf_lags: usize,
}

impl RunManifest {
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>, chain: ChainConfig) -> Self {
        RunManifest {
            input: input.into(),
            input_kind: InputKind::Prices,
            column: Column::default(),
            chain,
            out_dir: out_dir.into(),
            nic_grid: NicGrid::default(),
            jackknife_blocks: DEFAULT_JACKKNIFE_BLOCKS,
            acf_lags: DEFAULT_ACF_LAGS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.nic_grid.values()?;
        self.chain
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }
}

/// Everything a run produced, kept in memory for callers.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub returns: ReturnSeries,
    pub chain: ChainResult,
    pub summary: SummaryReport,
    pub files: Vec<PathBuf>,
}

pub fn load_input(path: &Path, kind: InputKind, column: &Column) -> Result<ReturnSeries> {
    let file = fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    Ok(match kind {
        InputKind::Prices => to_returns(&load_prices(reader, column)?),
        InputKind::Returns => load_returns(reader, column)?,
    })
}

pub fn run(manifest: &RunManifest) -> Result<RunOutputs> {
    manifest.validate()?;
    let returns = load_input(&manifest.input, manifest.input_kind, &manifest.column)?;
    log::info!(
        "loaded {} returns from {}",
        returns.len(),
        manifest.input.display()
    );
    let chain = run_adaptive(&manifest.chain, &returns)?;
    let summary = summarize_with(
        &chain,
        &returns,
        &SummaryOptions {
            jackknife_blocks: manifest.jackknife_blocks,
        },
    )?;
    log::info!("overall acceptance {:.3}", chain.acceptance_rate());

    let dir = &manifest.out_dir;
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut files = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        files.push(path);
        Ok(())
    };

    emit(SAMPLES_FILE, samples_csv(&chain))?;
    emit(SUMMARY_JSON, serde_json::to_vec_pretty(&summary)?)?;
    emit(SUMMARY_TXT, summary.to_table().into_bytes())?;
    emit(ACF_FILE, acf_csv(&chain, manifest.acf_lags)?)?;
    emit(ACCEPTANCE_FILE, acceptance_csv(&chain))?;
    emit(MOMENTS_FILE, moments_json(&manifest.chain, &chain)?)?;
    emit(
        NIC_FILE,
        nic_csv(&summary.posterior_mean(), &manifest.nic_grid.values()?)?,
    )?;

    Ok(RunOutputs {
        returns,
        chain,
        summary,
        files,
    })
}

/// Simulates a QGARCH return series and writes it as a one-column CSV.
pub fn simulate_to_file(params: &ModelParams, n: usize, sigma1_sq: f64, seed: u64, out: &Path) -> Result<ReturnSeries> {
    if n == 0 {
        return Err(CliError::Usage("number of observations must be at least 1".into()));
    }
    let series = simulate_qgarch(params, n, sigma1_sq, seed)?;
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    write_atomic(out, &buf)?;
    Ok(series)
}

/// Writes the news impact curve of `params` on `grid`.
pub fn nic_to_file(params: &ModelParams, grid: &NicGrid, out: &Path) -> Result<()> {
    let bytes = nic_csv(params, &grid.values()?)?;
    write_atomic(out, &bytes)
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(bytes).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

/// One row per draw, always four parameter columns (`gamma = 0` for GARCH).
pub fn samples_csv(chain: &ChainResult) -> Vec<u8> {
    let mut out = String::with_capacity(chain.samples.len() * 80);
    out.push_str(&PARAM_NAMES.join(","));
    out.push('\n');
    for i in 0..chain.samples.len() {
        let p = chain.params_at(i);
        out.push_str(&format!("{},{},{},{}\n", p.omega, p.alpha, p.beta, p.gamma));
    }
    out.into_bytes()
}

pub fn acf_csv(chain: &ChainResult, max_lags: usize) -> Result<Vec<u8>> {
    let names = chain.kind.param_names();
    let lags = max_lags.min(chain.samples.len().saturating_sub(1));
    let columns = (0..names.len())
        .map(|k| acf(&chain.column(k), lags))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut out = format!("lag,{}\n", names.join(","));
    for t in 0..=lags {
        let row: Vec<String> = columns.iter().map(|c| c[t].to_string()).collect();
        out.push_str(&format!("{t},{}\n", row.join(",")));
    }
    Ok(out.into_bytes())
}

pub fn acceptance_csv(chain: &ChainResult) -> Vec<u8> {
    let mut out = String::from("window,mc_time,acceptance\n");
    for (w, a) in chain.acceptance_trace.iter().enumerate() {
        out.push_str(&format!("{},{},{a}\n", w + 1, (w + 1) * chain.update_interval));
    }
    out.into_bytes()
}

#[derive(Serialize)]
struct MomentsFile<'a> {
    parameters: &'a [&'static str],
    nu: f64,
    update_interval: usize,
    freeze_after: Option<usize>,
    snapshots: &'a [MomentSnapshot],
    final_proposal: &'a ProposalSnapshot,
}

pub fn moments_json(config: &ChainConfig, chain: &ChainResult) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec_pretty(&MomentsFile {
        parameters: chain.kind.param_names(),
        nu: config.nu,
        update_interval: config.update_interval,
        freeze_after: config.freeze_after,
        snapshots: &chain.moment_trace,
        final_proposal: &chain.final_proposal,
    })?)
}

pub fn nic_csv(params: &ModelParams, grid: &[f64]) -> Result<Vec<u8>> {
    let curve = news_impact_curve(params, grid)?;
    let mut out = String::from("y,sigma_sq\n");
    for (y, s) in curve {
        out.push_str(&format!("{y},{s}\n"));
    }
    Ok(out.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use qgarch_core::model::ModelKind;

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(qgarch_core::Error::Domain("x".into())).exit_code(), 3);
        assert_eq!(
            CliError::from(qgarch_core::Error::Parse {
                row: 1,
                message: "x".into()
            })
            .exit_code(),
            3
        );
        assert_eq!(CliError::from(qgarch_core::Error::NonConvergence("x".into())).exit_code(), 4);
        assert_eq!(
            CliError::from(qgarch_core::Error::DegenerateCovariance { attempts: 11 }).exit_code(),
            4
        );
    }

    #[test]
    fn nic_file_layout() {
        let p = ModelParams::qgarch(0.06219, 0.07872, 0.89390, -0.12403);
        let text = String::from_utf8(nic_csv(&p, &[-1.0, 1.0]).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "y,sigma_sq");
        assert!(lines[1].starts_with("-1,2.295"));
        assert!(lines[2].starts_with("1,2.047"));
    }

    #[test]
    fn manifest_validation() {
        let mut m = RunManifest::new("in.csv", "out", ChainConfig::new(ModelKind::Qgarch, 1));
        assert!(m.validate().is_ok());
        m.nic_grid.points = 1;
        assert!(matches!(m.validate(), Err(CliError::Usage(_))));
        m.nic_grid = NicGrid::default();
        m.chain.nu = 1.0;
        assert!(matches!(m.validate(), Err(CliError::Usage(_))));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
