//! Command-line front end.
//!
//! Every run renders all of its artifacts in memory first and then writes
//! them; if any write fails, files already written by the run are removed.
//! Each artifact echoes the producing configuration (a `# config:` line in
//! CSV and series files, a `config` field in JSON).

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{classify, logratio_curves, ClassifierConfig};
use crate::registry::{ModelConfig, ModelRegistry};
use crate::segmentation::{detect_spikes, spikeless_segments, SpikeTrain, SpikeWindow};
use crate::series::{parse_series, write_series, SegmentSet, SeriesFormat, TimeSeries};
use crate::variations::{Gamma, VariationTable, DEFAULT_TRUNC_MULTIPLIER};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "PVARLAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "pvarlab", version, about = "Truncated power variations and jump diagnostics for sampled paths")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the spike-free segments of a series (segments.csv).
    Segment(SegmentArgs),
    /// Write truncated p-variation curves over M, one file per (p, gamma).
    Pvar(PvarArgs),
    /// Write log-ratio curves over p, one file per gamma.
    Logratio(LogratioArgs),
    /// Classify a path and write report.json.
    Classify(ClassifyArgs),
    /// Simulate a registered model and write the series.
    Simulate(SimulateArgs),
    /// List registered models.
    Models,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SourceArgs {
    /// Series file: one column (value) or two columns (time,value).
    #[arg(long, conflicts_with = "model")]
    pub input: Option<PathBuf>,
    /// Sampling step in seconds; overrides any step in the file.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Simulate the input from a registered model instead of reading a file.
    #[arg(long)]
    pub model: Option<String>,
    /// key=value file with model parameters.
    #[arg(long, requires = "model")]
    pub config: Option<PathBuf>,
    /// Model parameter override, key=value; repeatable.
    #[arg(long = "set", requires = "model")]
    pub set: Vec<String>,
    /// Seed for simulated input.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpikeArgs {
    /// File with one spike time (s) per line.
    #[arg(long, group = "spike_source")]
    pub spikes: Option<PathBuf>,
    /// Detect spikes as upward crossings of this level.
    #[arg(long, group = "spike_source", allow_hyphen_values = true)]
    pub detect_threshold: Option<f64>,
    /// Treat the series as spike-free.
    #[arg(long, group = "spike_source")]
    pub no_spikes: bool,
    /// Refractory time between detected spikes (s); default max(0.005, dt).
    #[arg(long, requires = "detect_threshold")]
    pub min_separation: Option<f64>,
    /// Excluded time before each spike (s).
    #[arg(long, default_value_t = 0.12)]
    pub pre: f64,
    /// Excluded time after each spike (s).
    #[arg(long, default_value_t = 0.18)]
    pub post: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub spikes: SpikeArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PvarArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub spikes: SpikeArgs,
    /// Powers p (comma list; a:b:step ranges allowed).
    #[arg(long, default_value = "2,4")]
    pub p_grid: String,
    /// Step multiples M (comma list; a:b ranges allowed).
    #[arg(long, default_value = "1:10")]
    pub m_grid: String,
    /// Truncation factors (comma list; `inf` for none).
    #[arg(long, default_value = "1,2,4,8,10,16,32,64,128,256,inf")]
    pub gamma: String,
    #[arg(long, default_value_t = DEFAULT_TRUNC_MULTIPLIER)]
    pub trunc_multiplier: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LogratioArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub spikes: SpikeArgs,
    #[arg(long, default_value = "0.25:6:0.25")]
    pub p_grid: String,
    /// Base step multiple; curves compare 2M against M.
    #[arg(long, default_value_t = 1)]
    pub m_base: usize,
    #[arg(long, default_value = "1,2,4,8,10,16,32,64,128,256,inf")]
    pub gamma: String,
    #[arg(long, default_value_t = DEFAULT_TRUNC_MULTIPLIER)]
    pub trunc_multiplier: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub spikes: SpikeArgs,
    #[arg(long, default_value = "0.25:6:0.25")]
    pub p_grid: String,
    #[arg(long, default_value_t = 1)]
    pub m_base: usize,
    /// Base step multiple of the 4-variation ratio.
    #[arg(long, default_value_t = 1)]
    pub m_min: usize,
    /// Step multiples for the 2-variation shape check.
    #[arg(long, default_value = "1:6,8,10,12,16,20,24,32,40,48,64,80,96,128,160,192,240")]
    pub m_grid: String,
    /// Truncation ladder; `inf` is appended when missing.
    #[arg(long, default_value = "1,2,4,8,10,16,32,64,128,256")]
    pub gamma: String,
    #[arg(long, default_value_t = DEFAULT_TRUNC_MULTIPLIER)]
    pub trunc_multiplier: f64,
    /// Acceptance distance to a reference curve.
    #[arg(long, default_value_t = 0.15)]
    pub delta: f64,
    /// Distance to both references beyond which the path is rejected.
    #[arg(long, default_value_t = 0.25)]
    pub delta_reject: f64,
    /// Gamma stabilization tolerance.
    #[arg(long, default_value_t = 0.01)]
    pub eps_stab: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Registered model name (see `pvarlab models`).
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set")]
    pub set: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write bare values instead of time,value pairs.
    #[arg(long)]
    pub values_only: bool,
    /// Output series file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Comma list of floats; items may be `a:b:step` ranges.
pub fn parse_f64_grid(text: &str) -> anyhow::Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(parse_f64(v)?),
            [a, b, s] => {
                let (a, b, s) = (parse_f64(a)?, parse_f64(b)?, parse_f64(s)?);
                if !(s > 0.0 && a <= b) {
                    bail!("bad range '{item}': need start <= end and step > 0");
                }
                let count = ((b - a) / s + 1e-9).floor() as usize;
                out.extend((0..=count).map(|k| a + k as f64 * s));
            }
            _ => bail!("bad grid item '{item}': expected a number or start:end:step"),
        }
    }
    if out.is_empty() {
        bail!("grid '{text}' is empty");
    }
    Ok(out)
}

/// Comma list of positive integers; items may be `a:b` or `a:b:step` ranges.
pub fn parse_usize_grid(text: &str) -> anyhow::Result<Vec<usize>> {
    let num = |s: &str| s.trim().parse::<usize>().with_context(|| format!("not a positive integer: '{s}'"));
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(num(v)?),
            [a, b] => out.extend(num(a)?..=num(b)?),
            [a, b, s] => {
                let s = num(s)?;
                if s == 0 {
                    bail!("bad range '{item}': step must be > 0");
                }
                out.extend((num(a)?..=num(b)?).step_by(s));
            }
            _ => bail!("bad grid item '{item}'"),
        }
    }
    if out.is_empty() || out.contains(&0) {
        bail!("M grid '{text}' must be nonempty with every M >= 1");
    }
    Ok(out)
}

/// Comma list of truncation factors, `inf` meaning none.
pub fn parse_gamma_grid(text: &str) -> anyhow::Result<Vec<Gamma>> {
    let out: Vec<Gamma> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Gamma>().map_err(|e| anyhow::anyhow!("bad gamma '{s}': {e}")))
        .collect::<anyhow::Result<_>>()?;
    if out.is_empty() {
        bail!("gamma grid '{text}' is empty");
    }
    Ok(out)
}

fn parse_f64(s: &str) -> anyhow::Result<f64> {
    let v: f64 = s.trim().parse().with_context(|| format!("not a number: '{s}'"))?;
    if !v.is_finite() {
        bail!("not a finite number: '{s}'");
    }
    Ok(v)
}

fn model_config(config: Option<&Path>, set: &[String]) -> anyhow::Result<ModelConfig> {
    let mut cfg = match config {
        Some(path) => {
            let file = fs::File::open(path).with_context(|| format!("cannot open model config {}", path.display()))?;
            ModelConfig::parse(BufReader::new(file)).with_context(|| format!("in model config {}", path.display()))?
        }
        None => ModelConfig::new(),
    };
    for item in set {
        cfg.assign(item)?;
    }
    Ok(cfg)
}

/// Loaded series plus a JSON description of where it came from.
fn load_source(src: &SourceArgs) -> anyhow::Result<(TimeSeries, serde_json::Value)> {
    match (&src.input, &src.model) {
        (Some(path), None) => {
            let file = fs::File::open(path).with_context(|| format!("cannot open input {}", path.display()))?;
            let series = parse_series(BufReader::new(file), SeriesFormat::Auto, src.dt)
                .with_context(|| format!("while reading {}", path.display()))?;
            Ok((series, json!({ "input": path, "dt_override": src.dt })))
        }
        (None, Some(name)) => {
            let cfg = model_config(src.config.as_deref(), &src.set)?;
            let model = ModelRegistry::builtin().build(name, &cfg)?;
            let mut series = model.simulate(src.seed)?;
            if let Some(dt) = src.dt {
                series = TimeSeries::new(dt, series.t0(), series.values().to_vec())?;
            }
            Ok((series, json!({ "model": model.describe(), "seed": src.seed, "dt_override": src.dt })))
        }
        _ => bail!("give exactly one of --input or --model"),
    }
}

/// Segments for the chosen spike source, plus the spike times used.
fn segments_for(series: &TimeSeries, spikes: &SpikeArgs, from_model: bool) -> anyhow::Result<(SegmentSet, Vec<f64>)> {
    let window = SpikeWindow::new(spikes.pre, spikes.post)?;
    let train = if let Some(path) = &spikes.spikes {
        let file = fs::File::open(path).with_context(|| format!("cannot open spike file {}", path.display()))?;
        let train =
            SpikeTrain::parse(BufReader::new(file)).with_context(|| format!("in spike file {}", path.display()))?;
        train.check_within(series)?;
        train
    } else if let Some(threshold) = spikes.detect_threshold {
        let sep = spikes.min_separation.unwrap_or(series.dt().max(0.005));
        detect_spikes(series, threshold, sep)?
    } else if spikes.no_spikes || from_model {
        SpikeTrain::empty()
    } else {
        bail!("choose a spike source: --spikes FILE, --detect-threshold LEVEL, or --no-spikes");
    };
    let segs = spikeless_segments(series, &train, window);
    if segs.is_empty() {
        bail!("no spike-free segment remains after excision; shrink --pre/--post");
    }
    Ok((segs, train.times().to_vec()))
}

fn config_line(config: &serde_json::Value) -> String {
    format!("# config: {config}\n")
}

/// Files of one run, written together.
#[derive(Debug, Default)]
struct Artifacts {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Artifacts {
    fn add(&mut self, path: PathBuf, contents: impl Into<Vec<u8>>) {
        self.files.push((path, contents.into()));
    }

    /// Write all files; on failure remove the ones already written.
    fn commit(self) -> anyhow::Result<Vec<PathBuf>> {
        let mut written: Vec<PathBuf> = Vec::new();
        for (path, bytes) in &self.files {
            let result = (|| -> anyhow::Result<()> {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
                }
                let mut f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
                written.push(path.clone());
                f.write_all(bytes).with_context(|| format!("cannot write {}", path.display()))?;
                f.flush()?;
                Ok(())
            })();
            if let Err(e) = result {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(e);
            }
        }
        Ok(written)
    }
}

fn fmt_token(x: f64) -> String {
    format!("{x}").replace('-', "m")
}

fn run_segment(args: &SegmentArgs) -> anyhow::Result<Artifacts> {
    let (series, source) = load_source(&args.source)?;
    let (segs, spikes) = segments_for(&series, &args.spikes, args.source.model.is_some())?;
    let config = json!({ "command": "segment", "source": source, "args": args, "spike_times": spikes });
    let mut csv = config_line(&config);
    csv.push_str("i0,i1,t_start,t_end\n");
    for s in segs.segments() {
        csv.push_str(&format!("{},{},{},{}\n", s.i0, s.i1, series.time_at(s.i0), series.time_at(s.i1)));
    }
    let mut out = Artifacts::default();
    out.add(args.out.join("segments.csv"), csv);
    Ok(out)
}

fn run_pvar(args: &PvarArgs) -> anyhow::Result<Artifacts> {
    let ps = parse_f64_grid(&args.p_grid)?;
    let ms = parse_usize_grid(&args.m_grid)?;
    let gammas = parse_gamma_grid(&args.gamma)?;
    let (series, source) = load_source(&args.source)?;
    let (segs, spikes) = segments_for(&series, &args.spikes, args.source.model.is_some())?;
    let table = VariationTable::compute(&series, &segs, &ps, &ms, &gammas, args.trunc_multiplier)?;
    let config = json!({
        "command": "pvar", "source": source, "args": args, "spike_times": spikes,
        "dt": series.dt(), "segments": segs.len(),
    });
    let mut out = Artifacts::default();
    for (gi, gamma) in gammas.iter().enumerate() {
        for (pi, &p) in ps.iter().enumerate() {
            let mut csv = config_line(&config);
            csv.push_str("p,gamma,M,value,n_increments\n");
            for (mi, &m) in ms.iter().enumerate() {
                if let Some(v) = table.value(mi, gi, pi) {
                    csv.push_str(&format!("{p},{gamma},{m},{v},{}\n", table.count(mi, gi)));
                }
            }
            out.add(args.out.join(format!("pvar_p{}_gamma{}.csv", fmt_token(p), gamma)), csv);
        }
    }
    Ok(out)
}

fn run_logratio(args: &LogratioArgs) -> anyhow::Result<Artifacts> {
    let ps = parse_f64_grid(&args.p_grid)?;
    let gammas = parse_gamma_grid(&args.gamma)?;
    let (series, source) = load_source(&args.source)?;
    let (segs, spikes) = segments_for(&series, &args.spikes, args.source.model.is_some())?;
    let curves = logratio_curves(&series, &segs, args.m_base, &gammas, &ps, args.trunc_multiplier)?;
    let config = json!({
        "command": "logratio", "source": source, "args": args, "spike_times": spikes,
        "dt": series.dt(), "segments": segs.len(),
    });
    let mut out = Artifacts::default();
    for curve in &curves {
        let mut csv = config_line(&config);
        csv.push_str("M,gamma,p,logratio\n");
        for pt in &curve.points {
            csv.push_str(&format!("{},{},{},{}\n", curve.m, curve.gamma, pt.p, pt.logratio));
        }
        out.add(args.out.join(format!("logratio_gamma{}.csv", curve.gamma)), csv);
    }
    Ok(out)
}

fn run_classify(args: &ClassifyArgs) -> anyhow::Result<Artifacts> {
    let config = ClassifierConfig {
        p_grid: parse_f64_grid(&args.p_grid)?,
        gamma_grid: parse_gamma_grid(&args.gamma)?,
        m_base: args.m_base,
        m_min: args.m_min,
        trunc_multiplier: args.trunc_multiplier,
        delta: args.delta,
        delta_reject: args.delta_reject,
        eps_stab: args.eps_stab,
        shape_m_grid: parse_usize_grid(&args.m_grid)?,
        ..ClassifierConfig::default()
    };
    let (series, source) = load_source(&args.source)?;
    let (segs, spikes) = segments_for(&series, &args.spikes, args.source.model.is_some())?;
    let report = classify(&series, &segs, &config)?;
    let mut value = serde_json::to_value(&report)?;
    value["config"] = json!({
        "command": "classify", "source": source, "args": args, "spike_times": spikes,
        "dt": series.dt(), "segments": segs.len(), "classifier": config,
    });
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    let mut out = Artifacts::default();
    out.add(args.out.join("report.json"), text);
    Ok(out)
}

fn render_simulation(args: &SimulateArgs) -> anyhow::Result<Vec<u8>> {
    let cfg = model_config(args.config.as_deref(), &args.set)?;
    let model = ModelRegistry::builtin().build(&args.model, &cfg)?;
    let series = model.simulate(args.seed)?;
    let config = json!({ "command": "simulate", "model": model.describe(), "seed": args.seed, "args": args });
    let mut buf = config_line(&config).into_bytes();
    write_series(&mut buf, &series, !args.values_only)?;
    Ok(buf)
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got '{value}'"))?;
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Execute one parsed command line; returns the files written.
pub fn run(cli: Cli) -> anyhow::Result<Vec<PathBuf>> {
    init_threads()?;
    let artifacts = match &cli.command {
        Command::Segment(a) => run_segment(a)?,
        Command::Pvar(a) => run_pvar(a)?,
        Command::Logratio(a) => run_logratio(a)?,
        Command::Classify(a) => run_classify(a)?,
        Command::Simulate(a) => {
            let bytes = render_simulation(a)?;
            match &a.out {
                Some(path) => {
                    let mut out = Artifacts::default();
                    out.add(path.clone(), bytes);
                    out
                }
                None => {
                    std::io::stdout().write_all(&bytes)?;
                    return Ok(Vec::new());
                }
            }
        }
        Command::Models => {
            for name in ModelRegistry::builtin().names() {
                println!("{name}");
            }
            return Ok(Vec::new());
        }
    };
    artifacts.commit()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_f64_grid("0.5, 1,2").unwrap(), [0.5, 1.0, 2.0]);
        let p = parse_f64_grid("0.25:6:0.25").unwrap();
        assert_eq!(p.len(), 24);
        assert_eq!(*p.last().unwrap(), 6.0);
        assert_eq!(parse_usize_grid("1:4,8,10:20:5").unwrap(), [1, 2, 3, 4, 8, 10, 15, 20]);
        assert!(parse_usize_grid("0,1").is_err());
        assert!(parse_usize_grid("").is_err());
        assert!(parse_f64_grid("1,x").is_err());
        assert!(parse_f64_grid("3:1:1").is_err());
        let g = parse_gamma_grid("1,inf").unwrap();
        assert!(g[1].is_infinite());
        assert!(parse_gamma_grid("-1").is_err());
    }

    #[test]
    fn classify_defaults_match_library() {
        let cli = Cli::parse_from(["pvarlab", "classify", "--model", "ou", "--out", "x"]);
        let Command::Classify(a) = cli.command else { panic!("wrong subcommand") };
        let lib = ClassifierConfig::default();
        assert_eq!(parse_usize_grid(&a.m_grid).unwrap(), lib.shape_m_grid);
        assert_eq!(parse_f64_grid(&a.p_grid).unwrap(), lib.p_grid);
        assert_eq!(parse_gamma_grid(&a.gamma).unwrap(), lib.gamma_grid);
        assert_eq!((a.delta, a.delta_reject, a.eps_stab), (lib.delta, lib.delta_reject, lib.eps_stab));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
