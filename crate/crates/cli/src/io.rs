//! File handling, error classification, and run manifests.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use sha2::{Digest, Sha256};

use semloss::circuit::Circuit;
use semloss::logic::{parse_dimacs, parse_sexpr, Formula, ProbVector};

/// Errors carrying their process exit code: 3 for bad inputs, 4 for
/// compute-stage failures.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 3,
            CliError::Compute(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Compute(m) => write!(f, "{m}"),
        }
    }
}

pub fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

pub fn compute(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulaFormat {
    Auto,
    Dimacs,
    Sexpr,
}

/// Reads a constraint file, sniffing the format from the extension and,
/// failing that, from the first meaningful character.
pub fn read_formula(path: &Path, format: FormulaFormat) -> Result<Formula, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let format = match format {
        FormulaFormat::Auto => sniff_format(path, &text),
        other => other,
    };
    match format {
        FormulaFormat::Dimacs => parse_dimacs(&text),
        FormulaFormat::Sexpr => parse_sexpr(&text),
        FormulaFormat::Auto => unreachable!("sniff always decides"),
    }
    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn sniff_format(path: &Path, text: &str) -> FormulaFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("cnf") | Some("dimacs") => return FormulaFormat::Dimacs,
        Some("sexpr") | Some("sx") => return FormulaFormat::Sexpr,
        _ => {}
    }
    for line in text.lines() {
        let t = line.trim_start();
        if t.is_empty() {
            continue;
        }
        return if t.starts_with('p') || t.starts_with('c') {
            FormulaFormat::Dimacs
        } else {
            FormulaFormat::Sexpr
        };
    }
    FormulaFormat::Sexpr
}

pub fn read_circuit(path: &Path) -> Result<Circuit, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Circuit::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Accepts either an inline comma list (`0.5,0.5,0.5`) or a CSV file whose
/// numbers may be separated by commas, whitespace, or newlines.
pub fn read_probs(spec: &str, expected: usize) -> Result<ProbVector, CliError> {
    let text = if spec_is_inline(spec) {
        spec.to_string()
    } else {
        std::fs::read_to_string(spec).map_err(|e| CliError::Input(format!("{spec}: {e}")))?
    };
    let values: Vec<f64> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| CliError::Input(format!("bad number {t:?}: {e}"))))
        .collect::<Result<_, _>>()?;
    if values.len() != expected {
        return Err(CliError::Input(format!(
            "expected {expected} probabilities, got {}",
            values.len()
        )));
    }
    ProbVector::new(values).map_err(input)
}

fn spec_is_inline(spec: &str) -> bool {
    !spec.is_empty()
        && spec
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '-' | '+' | 'e' | 'E'))
}

/// Run manifest written next to every artifact directory: tool version,
/// the subcommand, seeds, input hashes, and output names.
#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Vec<ManifestInput>,
    pub outputs: Vec<String>,
}

#[derive(Serialize)]
pub struct ManifestInput {
    pub path: String,
    pub sha256: String,
}

impl Manifest {
    pub fn new(command: &str) -> Manifest {
        Manifest {
            tool: "semloss",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let sha256 = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push(ManifestInput { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::create_dir_all(dir).map_err(input)?;
        std::fs::write(dir.join("manifest.json"), text + "\n").map_err(input)
    }
}

/// Writes one artifact into the run directory and records it.
pub fn write_artifact(
    dir: &Path,
    name: &str,
    bytes: &[u8],
    manifest: &mut Manifest,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(input)?;
    std::fs::write(dir.join(name), bytes).map_err(input)?;
    manifest.outputs.push(name.to_string());
    Ok(())
}

/// Figures out where the SOC file for `gen-data --kind pref` comes from:
/// an existing path, a config file naming one, or a URL to download (with
/// mandatory checksum verification).
pub fn resolve_soc_source(
    args: &crate::GenDataArgs,
    manifest: &mut Manifest,
) -> Result<PathBuf, CliError> {
    #[derive(serde::Deserialize, Default)]
    #[serde(default)]
    struct PrefConfig {
        soc: Option<PathBuf>,
        url: Option<String>,
        sha256: Option<String>,
    }
    let mut cfg = PrefConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        cfg = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        manifest.record_input(path)?;
    }
    let soc = args.soc.clone().or(cfg.soc).ok_or_else(|| {
        CliError::Input("gen-data --kind pref needs --soc (or a config with a soc path)".into())
    })?;
    if soc.exists() {
        return Ok(soc);
    }
    let url = args.url.clone().or(cfg.url).ok_or_else(|| {
        CliError::Input(format!("{} does not exist and no --url was given", soc.display()))
    })?;
    let expected = args.sha256.clone().or(cfg.sha256).ok_or_else(|| {
        CliError::Input("downloads require --sha256 for verification".into())
    })?;
    eprintln!("fetching {url}");
    let bytes = reqwest::blocking::get(&url)
        .and_then(|r| r.error_for_status())
        .and_then(|r| r.bytes())
        .map_err(|e| CliError::Input(format!("download failed: {e}")))?;
    let actual = semloss::data::preflib::sha256_hex(&bytes);
    if !actual.eq_ignore_ascii_case(&expected) {
        return Err(CliError::Input(format!(
            "checksum mismatch for {url}: expected {expected}, got {actual}"
        )));
    }
    if let Some(parent) = soc.parent() {
        std::fs::create_dir_all(parent).map_err(input)?;
    }
    std::fs::write(&soc, &bytes).map_err(input)?;
    Ok(soc)
}
