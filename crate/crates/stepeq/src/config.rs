//! Run configuration: a flat, sectioned, line-oriented `key = value` text
//! format. No nesting, diff-friendly, and round-trippable: the resolved
//! config re-parses to an identical run.
//!
//! ```text
//! [model]
//! kind = qubit          # or: ising
//! delta = 1.0
//! omega0 = -5.0
//! omega1 = 5.0
//! alpha = 0.5
//! omega_c = 1.0
//! beta = 1.0
//!
//! [noise]
//! kind = gwn            # none | gwn | wiener | ar1 | arn
//! sigma_eta = 0.05
//!
//! [protocol]
//! path = geodesic       # linear | geodesic
//! n_grid = 4,8,16,32,64,128,256,512,1024,2048,4096
//!
//! [run]
//! r = 2000
//! seed = 42
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ising::{ChainLength, IsingModel};
use crate::noise::{ArRule, NoiseKind, NoiseModel, NoiseProcess};
use crate::qubit::{PathKind, QubitModel};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Qubit { delta: f64, omega0: f64, omega1: f64, alpha: f64, omega_c: f64, beta: f64 },
    Ising { coupling: f64, length: ChainLength, h0: f64, h1: f64, beta: f64 },
}

impl ModelConfig {
    pub fn beta(&self) -> f64 {
        match self {
            ModelConfig::Qubit { beta, .. } | ModelConfig::Ising { beta, .. } => *beta,
        }
    }

    pub fn qubit_model(&self) -> Result<QubitModel> {
        match self {
            ModelConfig::Qubit { delta, omega0, omega1, alpha, omega_c, beta } => {
                QubitModel::new(*delta, *omega0, *omega1, *alpha, *omega_c, *beta)
            }
            ModelConfig::Ising { .. } => Err(Error::domain("config selects the ising model")),
        }
    }

    pub fn ising_model(&self) -> Result<IsingModel> {
        match self {
            ModelConfig::Ising { coupling, length, h0, h1, beta } => {
                IsingModel::new(*coupling, *length, *h0, *h1, *beta)
            }
            ModelConfig::Qubit { .. } => Err(Error::domain("config selects the qubit model")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub kind: String,
    pub sigma_eta: f64,
    pub phi: Option<f64>,
    pub amplitude: Option<f64>,
    pub decay: Option<f64>,
}

impl NoiseConfig {
    pub fn model(&self) -> Result<NoiseModel> {
        let kind = match self.kind.as_str() {
            "none" => NoiseKind::None,
            "gwn" => NoiseKind::Gwn,
            "wiener" => NoiseKind::Wiener,
            "ar1" => NoiseKind::Ar1(
                self.phi.ok_or_else(|| Error::domain("ar1 noise needs phi"))?,
            ),
            "arn" => NoiseKind::ArN(ArRule::Exponential {
                amplitude: self.amplitude.ok_or_else(|| Error::domain("arn noise needs amplitude"))?,
                decay: self.decay.ok_or_else(|| Error::domain("arn noise needs decay"))?,
            }),
            other => return Err(Error::domain(format!("unknown noise kind '{other}'"))),
        };
        Ok(NoiseModel::single(NoiseProcess::new(kind, self.sigma_eta)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub path: PathKind,
    pub n: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub kappa: Option<f64>,
    pub resolution: usize,
}

impl ProtocolConfig {
    /// The N grid for per-N tables: the explicit grid, or the single N.
    pub fn grid(&self) -> Result<Vec<usize>> {
        match (&self.n_grid, self.n) {
            (Some(g), _) => Ok(g.clone()),
            (None, Some(n)) => Ok(vec![n]),
            (None, None) => Err(Error::config(0, "[protocol] needs n or n_grid")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub variable: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub r: usize,
    pub seed: Option<u64>,
    pub threads: usize,
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub noise: NoiseConfig,
    pub protocol: ProtocolConfig,
    pub sweep: Option<SweepConfig>,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, Vec<(usize, String, String)>> = BTreeMap::new();
        let mut current = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line_no, format!("expected 'key = value', got '{line}'")))?;
            if current.is_empty() {
                return Err(Error::config(line_no, "key outside of any [section]"));
            }
            let items = sections.get_mut(&current).unwrap();
            let key = key.trim().to_string();
            if items.iter().any(|(_, k, _)| *k == key) {
                return Err(Error::config(line_no, format!("duplicate key '{key}' in [{current}]")));
            }
            items.push((line_no, key, value.trim().to_string()));
        }

        for name in sections.keys() {
            if !matches!(name.as_str(), "model" | "noise" | "protocol" | "sweep" | "run") {
                return Err(Error::config(0, format!("unknown section [{name}]")));
            }
        }

        let model = parse_model(sections.get("model").map(Vec::as_slice).unwrap_or(&[]))?;
        let noise = parse_noise(sections.get("noise").map(Vec::as_slice).unwrap_or(&[]))?;
        let protocol = parse_protocol(sections.get("protocol").map(Vec::as_slice).unwrap_or(&[]))?;
        let sweep = match sections.get("sweep") {
            Some(items) if !items.is_empty() => Some(parse_sweep(items)?),
            _ => None,
        };
        let run = parse_run(sections.get("run").map(Vec::as_slice).unwrap_or(&[]))?;
        Ok(Self { model, noise, protocol, sweep, run })
    }

    /// Canonical text form; parsing it back yields an identical config.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        match &self.model {
            ModelConfig::Qubit { delta, omega0, omega1, alpha, omega_c, beta } => {
                writeln!(s, "[model]").unwrap();
                writeln!(s, "kind = qubit").unwrap();
                writeln!(s, "delta = {delta}").unwrap();
                writeln!(s, "omega0 = {omega0}").unwrap();
                writeln!(s, "omega1 = {omega1}").unwrap();
                writeln!(s, "alpha = {alpha}").unwrap();
                writeln!(s, "omega_c = {omega_c}").unwrap();
                writeln!(s, "beta = {beta}").unwrap();
            }
            ModelConfig::Ising { coupling, length, h0, h1, beta } => {
                writeln!(s, "[model]").unwrap();
                writeln!(s, "kind = ising").unwrap();
                writeln!(s, "coupling = {coupling}").unwrap();
                match length {
                    ChainLength::Finite(l) => writeln!(s, "length = {l}").unwrap(),
                    ChainLength::Infinite => writeln!(s, "length = infinite").unwrap(),
                }
                writeln!(s, "h0 = {h0}").unwrap();
                writeln!(s, "h1 = {h1}").unwrap();
                writeln!(s, "beta = {beta}").unwrap();
            }
        }
        writeln!(s, "\n[noise]").unwrap();
        writeln!(s, "kind = {}", self.noise.kind).unwrap();
        writeln!(s, "sigma_eta = {}", self.noise.sigma_eta).unwrap();
        if let Some(phi) = self.noise.phi {
            writeln!(s, "phi = {phi}").unwrap();
        }
        if let Some(a) = self.noise.amplitude {
            writeln!(s, "amplitude = {a}").unwrap();
        }
        if let Some(d) = self.noise.decay {
            writeln!(s, "decay = {d}").unwrap();
        }
        writeln!(s, "\n[protocol]").unwrap();
        writeln!(s, "path = {}", match self.protocol.path {
            PathKind::Linear => "linear",
            PathKind::Geodesic => "geodesic",
        })
        .unwrap();
        if let Some(n) = self.protocol.n {
            writeln!(s, "n = {n}").unwrap();
        }
        if let Some(grid) = &self.protocol.n_grid {
            let items: Vec<String> = grid.iter().map(|n| n.to_string()).collect();
            writeln!(s, "n_grid = {}", items.join(",")).unwrap();
        }
        if let Some(k) = self.protocol.kappa {
            writeln!(s, "kappa = {k}").unwrap();
        }
        writeln!(s, "resolution = {}", self.protocol.resolution).unwrap();
        if let Some(sweep) = &self.sweep {
            writeln!(s, "\n[sweep]").unwrap();
            writeln!(s, "variable = {}", sweep.variable).unwrap();
            let items: Vec<String> = sweep.values.iter().map(|v| v.to_string()).collect();
            writeln!(s, "values = {}", items.join(",")).unwrap();
        }
        writeln!(s, "\n[run]").unwrap();
        writeln!(s, "r = {}", self.run.r).unwrap();
        if let Some(seed) = self.run.seed {
            writeln!(s, "seed = {seed}").unwrap();
        }
        writeln!(s, "threads = {}", self.run.threads).unwrap();
        if let Some(out) = &self.run.out {
            writeln!(s, "out = {out}").unwrap();
        }
        s
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        self.noise.model()
    }

    /// Seed is mandatory for simulate-style commands.
    pub fn require_seed(&self) -> Result<u64> {
        self.run.seed.ok_or_else(|| Error::config(0, "[run] seed is mandatory for this command"))
    }
}

struct Fields<'a> {
    section: &'static str,
    items: &'a [(usize, String, String)],
}

impl<'a> Fields<'a> {
    fn get(&self, key: &str) -> Option<(usize, &'a str)> {
        self.items
            .iter()
            .find(|(_, k, _)| k == key)
            .map(|(line, _, v)| (*line, v.as_str()))
    }

    fn require(&self, key: &str) -> Result<(usize, &'a str)> {
        self.get(key).ok_or_else(|| {
            Error::config(0, format!("[{}] is missing required key '{}'", self.section, key))
        })
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let (line, raw) = self.require(key)?;
        raw.parse().map_err(|_| Error::config(line, format!("'{key}' is not a number: '{raw}'")))
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::config(line, format!("'{key}' is not a number: '{raw}'"))),
        }
    }

    fn usize_opt(&self, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::config(line, format!("'{key}' is not an integer: '{raw}'"))),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (line, key, _) in self.items {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::config(
                    *line,
                    format!("unknown key '{key}' in [{}]", self.section),
                ));
            }
        }
        Ok(())
    }
}

fn parse_model(items: &[(usize, String, String)]) -> Result<ModelConfig> {
    let f = Fields { section: "model", items };
    let (line, kind) = f.require("kind")?;
    match kind {
        "qubit" => {
            f.check_keys(&["kind", "delta", "omega0", "omega1", "alpha", "omega_c", "beta"])?;
            Ok(ModelConfig::Qubit {
                delta: f.f64("delta")?,
                omega0: f.f64("omega0")?,
                omega1: f.f64("omega1")?,
                alpha: f.f64_opt("alpha")?.unwrap_or(0.0),
                omega_c: f.f64_opt("omega_c")?.unwrap_or(1.0),
                beta: f.f64("beta")?,
            })
        }
        "ising" => {
            f.check_keys(&["kind", "coupling", "length", "h0", "h1", "beta"])?;
            let (lline, raw) = f.require("length")?;
            let length = if raw == "infinite" {
                ChainLength::Infinite
            } else {
                ChainLength::Finite(raw.parse().map_err(|_| {
                    Error::config(lline, format!("'length' must be an even integer or 'infinite', got '{raw}'"))
                })?)
            };
            Ok(ModelConfig::Ising {
                coupling: f.f64_opt("coupling")?.unwrap_or(1.0),
                length,
                h0: f.f64("h0")?,
                h1: f.f64("h1")?,
                beta: f.f64("beta")?,
            })
        }
        other => Err(Error::config(line, format!("unknown model kind '{other}'"))),
    }
}

fn parse_noise(items: &[(usize, String, String)]) -> Result<NoiseConfig> {
    if items.is_empty() {
        return Ok(NoiseConfig { kind: "none".into(), sigma_eta: 0.0, phi: None, amplitude: None, decay: None });
    }
    let f = Fields { section: "noise", items };
    f.check_keys(&["kind", "sigma_eta", "phi", "amplitude", "decay"])?;
    let (_, kind) = f.require("kind")?;
    let cfg = NoiseConfig {
        kind: kind.to_string(),
        sigma_eta: f.f64_opt("sigma_eta")?.unwrap_or(0.0),
        phi: f.f64_opt("phi")?,
        amplitude: f.f64_opt("amplitude")?,
        decay: f.f64_opt("decay")?,
    };
    cfg.model()?; // validate kind/parameters eagerly
    Ok(cfg)
}

fn parse_protocol(items: &[(usize, String, String)]) -> Result<ProtocolConfig> {
    let f = Fields { section: "protocol", items };
    f.check_keys(&["path", "n", "n_grid", "kappa", "resolution"])?;
    let path = match f.get("path") {
        None => PathKind::Geodesic,
        Some((_, "linear")) => PathKind::Linear,
        Some((_, "geodesic")) => PathKind::Geodesic,
        Some((line, other)) => {
            return Err(Error::config(line, format!("unknown path kind '{other}'")))
        }
    };
    let n_grid = match f.get("n_grid") {
        None => None,
        Some((line, raw)) => {
            let grid: Vec<usize> = raw
                .split(',')
                .map(|tok| {
                    tok.trim().parse().map_err(|_| {
                        Error::config(line, format!("bad n_grid entry '{}'", tok.trim()))
                    })
                })
                .collect::<Result<_>>()?;
            if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config(line, "n_grid must be strictly increasing"));
            }
            Some(grid)
        }
    };
    Ok(ProtocolConfig {
        path,
        n: f.usize_opt("n")?,
        n_grid,
        kappa: f.f64_opt("kappa")?,
        resolution: f.usize_opt("resolution")?.unwrap_or(crate::geometry::DEFAULT_PATH_RESOLUTION),
    })
}

fn parse_sweep(items: &[(usize, String, String)]) -> Result<SweepConfig> {
    let f = Fields { section: "sweep", items };
    f.check_keys(&["variable", "values"])?;
    let (vline, variable) = f.require("variable")?;
    if !["n", "phi", "beta", "h1", "alpha"].contains(&variable) {
        return Err(Error::config(vline, format!("sweep variable '{variable}' not one of n|phi|beta|h1|alpha")));
    }
    let (line, raw) = f.require("values")?;
    let values: Vec<f64> = raw
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|_| Error::config(line, format!("bad sweep value '{}'", tok.trim())))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config(line, "sweep values must be strictly increasing"));
    }
    Ok(SweepConfig { variable: variable.to_string(), values })
}

fn parse_run(items: &[(usize, String, String)]) -> Result<RunSection> {
    let f = Fields { section: "run", items };
    f.check_keys(&["r", "seed", "threads", "out"])?;
    let seed = match f.get("seed") {
        None => None,
        Some((line, raw)) => Some(
            raw.parse::<u64>()
                .map_err(|_| Error::config(line, format!("'seed' is not a u64: '{raw}'")))?,
        ),
    };
    Ok(RunSection {
        r: f.usize_opt("r")?.unwrap_or(1),
        seed,
        threads: f.usize_opt("threads")?.unwrap_or(0),
        out: f.get("out").map(|(_, v)| v.to_string()),
    })
}
