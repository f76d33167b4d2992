//! The `mdis` command line: `saliency`, `train`, `eval` and `version`.
//!
//! `--config FILE` reads `key=value` lines whose keys are long flag names.
//! Keys before any `[section]` header apply to every subcommand that has the
//! flag; keys under `[saliency]`, `[train]` or `[eval]` apply to that
//! subcommand only. Flags given on the command line win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::eval::{evaluate_batch, is_image_path, list_images, write_report, EvalOptions};
use crate::hmt::{EmOptions, TrainedModel};
use crate::image_io::load_image;
use crate::metrics::{read_fixations_csv, DEFAULT_BLUR_SIGMA, DEFAULT_THRESHOLDS};
use crate::output::{write_map_bin, write_map_png};
use crate::saliency::{
    analyze, check_mode, prepare, train_model, ModeConfig, ModelKind, SaliencyOptions,
};
use crate::tree::TreeTopology;
use crate::wavelet::DEFAULT_DEPTH;

#[derive(Debug, Parser)]
#[command(
    name = "mdis",
    version,
    about = "Multi-scale discriminant saliency maps and evaluation"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// INI-style file of default flag values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args, Clone)]
pub struct ModelArgs {
    /// Number of wavelet levels.
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    pub depth: usize,
    /// Maximum EM iterations.
    #[arg(long, default_value_t = EmOptions::default().max_iter)]
    pub em_iters: usize,
    /// Relative log-likelihood gain below which EM stops.
    #[arg(long, default_value_t = EmOptions::default().tol)]
    pub em_tol: f64,
}

impl ModelArgs {
    fn em(&self) -> EmOptions {
        EmOptions {
            max_iter: self.em_iters,
            tol: self.em_tol,
        }
    }

    fn saliency_options(&self, model: Option<&Path>) -> Result<SaliencyOptions> {
        Ok(SaliencyOptions {
            depth: self.depth,
            em: self.em(),
            model: model.map(TrainedModel::load).transpose()?,
            ..SaliencyOptions::default()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainKind {
    Scalar,
    Vector,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a saliency map per image.
    Saliency {
        /// Model and scale, e.g. uhmt0, thmt3, vhmt6.
        #[arg(long, value_parser = parse_mode)]
        mode: ModeConfig,
        /// Output directory (default: next to each input).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Trained model file used instead of per-image EM.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Also write the raw float map as `<stem>.<mode>.bin`.
        #[arg(long)]
        bin: bool,
        #[command(flatten)]
        params: ModelArgs,
        /// Image files or directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Fit an HMT to one image by EM and write the model file.
    Train {
        #[arg(long, value_enum, default_value_t = TrainKind::Scalar)]
        kind: TrainKind,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Model file to start EM from.
        #[arg(long, value_name = "FILE")]
        init: Option<PathBuf>,
        #[command(flatten)]
        params: ModelArgs,
        image: PathBuf,
    },
    /// Score saliency modes against fixations over an image directory.
    Eval {
        #[arg(long, value_name = "DIR")]
        images: PathBuf,
        /// CSV with columns image,subject,x,y.
        #[arg(long, value_name = "CSV")]
        fixations: PathBuf,
        /// Comma list; `uhmt0..uhmt5` expands to a selector range.
        #[arg(long, value_parser = parse_mode_list, default_value = "uhmt0")]
        modes: ModeList,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BLUR_SIGMA)]
        blur_sigma: f64,
        #[arg(long, default_value_t = DEFAULT_THRESHOLDS, value_parser = clap::value_parser!(usize))]
        thresholds: usize,
        /// Worker threads, 0 = all logical cores.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        #[command(flatten)]
        params: ModelArgs,
    },
    /// Print the version.
    Version,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeList(pub Vec<ModeConfig>);

fn parse_mode(s: &str) -> std::result::Result<ModeConfig, String> {
    s.trim().parse().map_err(|e: Error| e.to_string())
}

pub fn parse_mode_list(s: &str) -> std::result::Result<ModeList, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        match item.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (parse_mode(a)?, parse_mode(b)?);
                if a.model != b.model || a.selector > b.selector {
                    return Err(format!("bad mode range `{item}`"));
                }
                for sel in a.selector..=b.selector {
                    out.push(ModeConfig::new(a.model, sel).map_err(|e| e.to_string())?);
                }
            }
            None => out.push(parse_mode(item)?),
        }
    }
    if out.is_empty() {
        return Err("empty mode list".into());
    }
    Ok(ModeList(out))
}

/// Config file as `(section, key, value)`; section is empty before the
/// first header.
pub fn parse_config(text: &str) -> Result<Vec<(String, String, String)>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_ascii_lowercase();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::ModelFormat(format!("config line {}: missing '='", n + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        out.push((section.clone(), key, v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Index of the subcommand name in `args`.
fn subcommand_index(args: &[OsString], names: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if s == "--config" {
            i += 2;
            continue;
        }
        if names.iter().any(|n| *n == s) {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Splices config values in right after the subcommand name so that
/// explicit flags, which come later, override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.clone()),
        _ => Error::Io(e),
    })?;
    let entries = parse_config(&text)?;
    let cmd = Cli::command();
    let names: Vec<String> = cmd
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect();
    let Some(pos) = subcommand_index(&args, &names) else {
        return Ok(args);
    };
    let name = args[pos].to_string_lossy().into_owned();
    let sub = cmd.find_subcommand(&name).expect("known subcommand");
    let mut extra = Vec::new();
    for (section, key, value) in entries {
        if !section.is_empty() && section != name {
            continue;
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()));
        let Some(arg) = arg else {
            if section.is_empty() {
                continue;
            }
            return Err(Error::ModelFormat(format!(
                "config: `{key}` is not a flag of `{name}`"
            )));
        };
        let takes_value = arg.get_action().takes_values();
        if takes_value {
            extra.push(OsString::from(format!("--{key}={value}")));
        } else if matches!(
            value.to_ascii_lowercase().as_str(),
            "true" | "1" | "yes" | "on"
        ) {
            extra.push(OsString::from(format!("--{key}")));
        }
    }
    let mut out = args;
    out.splice(pos + 1..pos + 1, extra);
    Ok(out)
}

/// Expands directories to the images they contain.
fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            out.extend(list_images(p)?);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(Error::MissingFile(p.clone()));
        }
    }
    Ok(out)
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingFile(path.to_path_buf()))
    }
}

fn cmd_saliency(
    mode: ModeConfig,
    out: Option<&Path>,
    model: Option<&Path>,
    bin: bool,
    params: &ModelArgs,
    inputs: &[PathBuf],
) -> Result<()> {
    check_mode(mode, params.depth)?;
    let opts = params.saliency_options(model)?;
    let files = collect_inputs(inputs)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    for path in files {
        let img = load_image(&path)?;
        let t = Instant::now();
        let analysis = analyze(&img, mode.model, &opts)?;
        let map = analysis.map(mode)?;
        let secs = t.elapsed().as_secs_f64();
        if analysis.degenerate {
            eprintln!("warning: {}: EM hit the variance floor", path.display());
        }
        let stem = path.file_stem().unwrap_or_default().to_string_lossy();
        let dir = match out {
            Some(d) => d.to_path_buf(),
            None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        let target = dir.join(format!("{stem}.{mode}.png"));
        write_map_png(&map.values, &target)?;
        if bin {
            let f = std::fs::File::create(dir.join(format!("{stem}.{mode}.bin")))?;
            write_map_bin(&map.values, std::io::BufWriter::new(f))?;
        }
        println!("{}\t{secs:.6}s\t{}", path.display(), target.display());
    }
    Ok(())
}

fn cmd_train(
    kind: TrainKind,
    out: &Path,
    init: Option<&Path>,
    params: &ModelArgs,
    image: &Path,
) -> Result<()> {
    require(image)?;
    let init = init.map(TrainedModel::load).transpose()?;
    let opts = params.saliency_options(None)?;
    let img = load_image(image)?;
    let (pyr, _) = prepare(&img, &opts)?;
    let tree = TreeTopology::quad(pyr.geometry());
    let model_kind = match kind {
        TrainKind::Scalar => ModelKind::Trained,
        TrainKind::Vector => ModelKind::Vector,
    };
    let t = train_model(&pyr, &tree, model_kind, init.as_ref(), opts.em)?;
    if t.degenerate {
        eprintln!("warning: degenerate data, a variance was floored");
    }
    t.model.save(out)?;
    println!("log-likelihood: {}", t.log_likelihood);
    println!("iterations: {}", t.iterations);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    images: &Path,
    fixations: &Path,
    modes: &[ModeConfig],
    out: &Path,
    blur_sigma: f64,
    thresholds: usize,
    threads: usize,
    model: Option<&Path>,
    params: &ModelArgs,
) -> Result<()> {
    require(images)?;
    require(fixations)?;
    for &m in modes {
        check_mode(m, params.depth)?;
    }
    let fx = read_fixations_csv(fixations)?;
    let files: Vec<PathBuf> = if images.is_dir() {
        list_images(images)?
    } else {
        vec![images.to_path_buf()]
            .into_iter()
            .filter(|p| is_image_path(p))
            .collect()
    };
    let opts = EvalOptions {
        saliency: params.saliency_options(model)?,
        blur_sigma,
        thresholds,
        threads,
    };
    let report = evaluate_batch(&files, &fx, modes, &opts)?;
    for s in &report.skipped {
        eprintln!("warning: {s}: no fixations, skipped");
    }
    write_report(&report, out)?;
    println!("mode\timages\tlcc\tnss\tauc\ttime_s");
    for s in &report.summary {
        println!(
            "{}\t{}\t{:.5}\t{:.5}\t{:.5}\t{:.5}",
            s.mode, s.images, s.lcc, s.nss, s.auc, s.time_s
        );
    }
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Saliency {
            mode,
            out,
            model,
            bin,
            params,
            inputs,
        } => cmd_saliency(
            mode,
            out.as_deref(),
            model.as_deref(),
            bin,
            &params,
            &inputs,
        ),
        Command::Train {
            kind,
            out,
            init,
            params,
            image,
        } => cmd_train(kind, &out, init.as_deref(), &params, &image),
        Command::Eval {
            images,
            fixations,
            modes,
            out,
            blur_sigma,
            thresholds,
            threads,
            model,
            params,
        } => cmd_eval(
            &images,
            &fixations,
            &modes.0,
            &out,
            blur_sigma,
            thresholds,
            threads,
            model.as_deref(),
            &params,
        ),
        Command::Version => {
            println!("mdis {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

/// Parses, runs and returns the process exit code: 0 on success, 2 on a
/// usage error, 1 on any other failure.
pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let args = match expand_config(args.into_iter().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn mode_lists() {
        let l = parse_mode_list("uhmt0..uhmt5,uhmt6").unwrap();
        let names: Vec<String> = l.0.iter().map(|m| m.to_string()).collect();
        assert_eq!(
            names,
            ["uhmt0", "uhmt1", "uhmt2", "uhmt3", "uhmt4", "uhmt5", "uhmt6"]
        );
        assert!(parse_mode_list("uhmt3..uhmt1").is_err());
        assert!(parse_mode_list("uhmt0..thmt2").is_err());
        assert!(parse_mode_list("xhmt0").is_err());
        assert!(parse_mode_list("").is_err());
    }

    #[test]
    fn config_sections() {
        let c =
            parse_config("depth=4\n# x\n[eval]\nblur_sigma = 3\n[train]\nkind=vector\n").unwrap();
        assert_eq!(c[0], ("".into(), "depth".into(), "4".into()));
        assert_eq!(c[1], ("eval".into(), "blur-sigma".into(), "3".into()));
        assert_eq!(c[2].0, "train");
        assert!(parse_config("oops").is_err());
    }

    #[test]
    fn config_is_spliced_and_overridden() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.ini");
        std::fs::write(
            &cfg,
            "depth=3\nthresholds=9\nbin=true\n[eval]\nblur_sigma=2.5\n",
        )
        .unwrap();
        let cfg_s = cfg.to_string_lossy().to_string();
        let args = expand_config(os(&[
            "mdis", "--config", &cfg_s, "saliency", "--mode", "uhmt0", "--depth", "4", "a.png",
        ]))
        .unwrap();
        let cli = Cli::try_parse_from(args).unwrap();
        match cli.command {
            Command::Saliency { params, bin, .. } => {
                assert_eq!(params.depth, 4);
                assert!(bin);
            }
            _ => panic!(),
        }
        let args = expand_config(os(&[
            "mdis",
            "eval",
            "--config",
            &cfg_s,
            "--images",
            "i",
            "--fixations",
            "f.csv",
            "--out",
            "o",
        ]))
        .unwrap();
        match Cli::try_parse_from(args).unwrap().command {
            Command::Eval {
                blur_sigma,
                thresholds,
                params,
                ..
            } => {
                assert_eq!(blur_sigma, 2.5);
                assert_eq!(thresholds, 9);
                assert_eq!(params.depth, 3);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn unknown_section_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.ini");
        std::fs::write(&cfg, "[train]\nblur_sigma=1\n").unwrap();
        let r = expand_config(os(&[
            "mdis",
            "--config",
            &cfg.to_string_lossy(),
            "train",
            "x.png",
        ]));
        assert!(r.is_err());
    }

    #[test]
    fn invalid_mode_is_usage_error() {
        assert_eq!(
            run(os(&["mdis", "saliency", "--mode", "zhmt9", "a.png"])),
            2
        );
        assert_eq!(
            run(os(&[
                "mdis",
                "saliency",
                "--mode",
                "uhmt0",
                "/nonexistent/a.png"
            ])),
            1
        );
        assert_eq!(run(os(&["mdis", "version"])), 0);
    }
}
