//! TOML experiment descriptions.
//!
//! ```toml
//! name = "step"                      # optional, defaults to the file stem
//!
//! [problem]                          # what to learn from
//! mode = "standard"                  # or "infimal"
//! kernel = [2, 1]                    # rows, cols
//! filters = 1                        # standard mode only
//! positives = [{ kind = "step", length = 128, start = 32, end = 64 }]
//! negatives = [{ kind = "noise", length = 128, sigma = 0.3, seed = 7 }]
//!
//! [learn]                            # all optional
//! restarts = 32
//! seed = 1
//! huber = { kind = "relative", factor = 1e-3, floor = 1e-8 }
//! inner = { max_iters = 5000, gap_tol = 1e-8 }
//!
//! [[reconstruct]]                    # zero or more
//! name = "denoise"
//! input = { kind = "step", length = 128, start = 32, end = 64 }
//! noise_seed = 3                     # adds N(0, sigma²) noise to the input
//! eta = 3.5
//! sigma = 0.1
//! ```
//!
//! Instead of `[problem]`, a fixed bank can be given with
//! `bank = { file = "tv.bank" }` or
//! `bank = { kernel = [2, 2], filters = [[0.5, -0.5, -0.5, 0.5]] }`.
//! Relative file paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conv::Extent;
use crate::error::{Error, Result};
use crate::functionals::{Mode, QuotientProblem};
use crate::io::{read_bank, read_signal, SignalFormat};
use crate::learning::LearnConfig;
use crate::pd::PDConfig;
use crate::signal::{FilterBank, Shape, Signal};
use crate::synth::{self, Kind1d, Kind2d, NoiseSpec, Orientation};

fn one() -> f64 {
    1.0
}

fn unit_cols() -> usize {
    1
}

/// A signal built from a generator, a file, or a combination of others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSource {
    Step {
        length: usize,
        start: usize,
        end: usize,
        #[serde(default = "one")]
        height: f64,
    },
    PiecewiseLinear {
        length: usize,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        slope: f64,
        /// `[index, new_slope]` pairs.
        #[serde(default)]
        breaks: Vec<(usize, f64)>,
    },
    Staircase {
        length: usize,
        #[serde(default)]
        base: f64,
        /// `[index, jump]` pairs.
        jumps: Vec<(usize, f64)>,
    },
    Ramp {
        length: usize,
        start: usize,
        end: usize,
        #[serde(default = "one")]
        height: f64,
    },
    Stripes {
        rows: usize,
        cols: usize,
        orientation: Orientation,
        thickness: usize,
        spacing: usize,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Rectangle {
        rows: usize,
        cols: usize,
        top: usize,
        left: usize,
        height: usize,
        width: usize,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Circle {
        rows: usize,
        cols: usize,
        center: (f64, f64),
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    DiagonalStripes {
        rows: usize,
        cols: usize,
        angle: f64,
        thickness: f64,
        spacing: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Pure Gaussian noise; a 1D signal when `cols = 1` (the default),
    /// `length` being an alias for `rows`.
    Noise {
        #[serde(alias = "length")]
        rows: usize,
        #[serde(default = "unit_cols")]
        cols: usize,
        sigma: f64,
        seed: u64,
    },
    /// `signal` plus Gaussian noise.
    Noisy {
        signal: Box<SignalSource>,
        sigma: f64,
        seed: u64,
    },
    /// Elementwise sum of same-shaped parts.
    Sum { parts: Vec<SignalSource> },
    /// Same-height parts placed side by side, left to right.
    Hconcat { parts: Vec<SignalSource> },
    File {
        path: PathBuf,
        /// Inferred from the extension when absent.
        format: Option<SignalFormat>,
    },
}

impl SignalSource {
    /// Parses the body of an inline table, e.g. `kind = "step", length = 8, start = 2, end = 5`.
    pub fn parse_inline(body: &str) -> Result<SignalSource> {
        #[derive(Deserialize)]
        struct Wrapper {
            source: SignalSource,
        }
        let w: Wrapper = toml::from_str(&format!("source = {{ {body} }}")).map_err(|e| Error::Config(e.message().to_string()))?;
        Ok(w.source)
    }

    pub fn build(&self, base: &Path) -> Result<Signal> {
        use SignalSource as S;
        match self {
            S::Step {
                length,
                start,
                end,
                height,
            } => synth::make_1d(
                &Kind1d::Step {
                    start: *start,
                    end: *end,
                    height: *height,
                },
                *length,
            ),
            S::PiecewiseLinear {
                length,
                offset,
                slope,
                breaks,
            } => synth::make_1d(
                &Kind1d::PiecewiseLinear {
                    offset: *offset,
                    slope: *slope,
                    breaks: breaks.clone(),
                },
                *length,
            ),
            S::Staircase { length, base, jumps } => synth::make_1d(
                &Kind1d::Staircase {
                    base: *base,
                    jumps: jumps.clone(),
                },
                *length,
            ),
            S::Ramp {
                length,
                start,
                end,
                height,
            } => synth::make_1d(
                &Kind1d::Ramp {
                    start: *start,
                    end: *end,
                    height: *height,
                },
                *length,
            ),
            S::Stripes {
                rows,
                cols,
                orientation,
                thickness,
                spacing,
                amplitude,
            } => synth::make_2d(
                &Kind2d::Stripes {
                    orientation: *orientation,
                    thickness: *thickness,
                    spacing: *spacing,
                },
                *rows,
                *cols,
                *amplitude,
            ),
            S::Rectangle {
                rows,
                cols,
                top,
                left,
                height,
                width,
                amplitude,
            } => synth::make_2d(
                &Kind2d::Rectangle {
                    top: *top,
                    left: *left,
                    height: *height,
                    width: *width,
                },
                *rows,
                *cols,
                *amplitude,
            ),
            S::Circle {
                rows,
                cols,
                center,
                radius,
                amplitude,
            } => synth::make_2d(
                &Kind2d::Circle {
                    center: *center,
                    radius: *radius,
                },
                *rows,
                *cols,
                *amplitude,
            ),
            S::DiagonalStripes {
                rows,
                cols,
                angle,
                thickness,
                spacing,
                amplitude,
            } => synth::make_2d(
                &Kind2d::DiagonalStripes {
                    angle: *angle,
                    thickness: *thickness,
                    spacing: *spacing,
                },
                *rows,
                *cols,
                *amplitude,
            ),
            S::Noise { rows, cols, sigma, seed } => {
                if *rows == 0 || *cols == 0 {
                    return Err(Error::Parameter("noise shape must be nonempty".into()));
                }
                synth::noise(
                    Shape::new(*rows, *cols),
                    NoiseSpec {
                        sigma: *sigma,
                        seed: *seed,
                    },
                )
            }
            S::Noisy { signal, sigma, seed } => synth::add_noise(
                &signal.build(base)?,
                NoiseSpec {
                    sigma: *sigma,
                    seed: *seed,
                },
            ),
            S::Sum { parts } => {
                let mut it = parts.iter();
                let first = it
                    .next()
                    .ok_or_else(|| Error::Config("sum needs at least one part".into()))?
                    .build(base)?;
                it.try_fold(first, |acc, p| acc.add(&p.build(base)?))
            }
            S::Hconcat { parts } => {
                if parts.is_empty() {
                    return Err(Error::Config("hconcat needs at least one part".into()));
                }
                Signal::hconcat(&parts.iter().map(|p| p.build(base)).collect::<Result<Vec<_>>>()?)
            }
            S::File { path, format } => {
                let full = base.join(path);
                let fmt = match format {
                    Some(f) => *f,
                    None => SignalFormat::from_path(&full)?,
                };
                read_signal(&full, fmt)
            }
        }
    }

    fn files(&self, out: &mut Vec<PathBuf>) {
        match self {
            SignalSource::File { path, .. } => out.push(path.clone()),
            SignalSource::Noisy { signal, .. } => signal.files(out),
            SignalSource::Sum { parts } | SignalSource::Hconcat { parts } => parts.iter().for_each(|p| p.files(out)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub mode: Mode,
    /// `[rows, cols]`
    pub kernel: (usize, usize),
    /// Standard mode only; defaults to 1. Infimal mode uses one filter per
    /// positive (decomposition part).
    pub filters: Option<usize>,
    pub positives: Vec<SignalSource>,
    pub negatives: Vec<SignalSource>,
}

impl ProblemConfig {
    pub fn kernel_shape(&self) -> Shape {
        Shape::new(self.kernel.0, self.kernel.1)
    }

    pub fn build(&self, base: &Path) -> Result<(QuotientProblem, Vec<Signal>, Vec<Signal>)> {
        let pos = self.positives.iter().map(|s| s.build(base)).collect::<Result<Vec<_>>>()?;
        let neg = self.negatives.iter().map(|s| s.build(base)).collect::<Result<Vec<_>>>()?;
        let problem = match self.mode {
            Mode::Standard => {
                QuotientProblem::standard(pos.clone(), neg.clone(), self.filters.unwrap_or(1), self.kernel_shape())?
            }
            Mode::Infimal => {
                if self.filters.is_some_and(|k| k != pos.len()) {
                    return Err(Error::Config(
                        "infimal mode uses one filter per positive; drop `filters`".into(),
                    ));
                }
                QuotientProblem::infimal(pos.clone(), neg.clone(), self.kernel_shape())?
            }
        };
        Ok((problem, pos, neg))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankFile {
    pub file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineBank {
    pub kernel: (usize, usize),
    /// One row-major list of entries per filter.
    pub filters: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BankSource {
    File(BankFile),
    Inline(InlineBank),
}

impl BankSource {
    pub fn build(&self, base: &Path) -> Result<FilterBank> {
        match self {
            BankSource::File(f) => Ok(read_bank(&base.join(&f.file))?.bank),
            BankSource::Inline(b) => {
                let shape = Shape::new(b.kernel.0, b.kernel.1);
                FilterBank::from_flat(b.filters.len(), shape, b.filters.concat())
            }
        }
    }
}

fn reconstruction_solver() -> PDConfig {
    PDConfig {
        max_iters: 50_000,
        gap_tol: 1e-8,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    pub name: String,
    /// The signal to reconstruct from, before optional noise.
    pub input: SignalSource,
    /// When set, `N(0, sigma²)` noise with this seed is added to `input`.
    pub noise_seed: Option<u64>,
    /// Ground truth for error reporting; defaults to `input`.
    pub reference: Option<SignalSource>,
    pub eta: f64,
    pub sigma: f64,
    /// Where the regulariser is evaluated; `valid` skips the zero-padded
    /// border.
    #[serde(default = "valid_extent")]
    pub extent: Extent,
    #[serde(default = "reconstruction_solver")]
    pub solver: PDConfig,
}

fn valid_extent() -> Extent {
    Extent::Valid
}

impl ReconstructConfig {
    /// `(f, reference)`
    pub fn build(&self, base: &Path) -> Result<(Signal, Signal)> {
        let clean = self.input.build(base)?;
        let f = match self.noise_seed {
            Some(seed) => synth::add_noise(&clean, NoiseSpec { sigma: self.sigma, seed })?,
            None => clean.clone(),
        };
        let reference = match &self.reference {
            Some(r) => r.build(base)?,
            None => clean,
        };
        if reference.shape() != f.shape() {
            return Err(Error::Config(format!(
                "reconstruction {:?}: reference and input shapes differ",
                self.name
            )));
        }
        Ok((f, reference))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub problem: Option<ProblemConfig>,
    pub bank: Option<BankSource>,
    #[serde(default)]
    pub learn: LearnConfig,
    #[serde(default)]
    pub reconstruct: Vec<ReconstructConfig>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.problem, &self.bank) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(Error::Config("exactly one of [problem] and bank must be given".into())),
        }
        if let Some(p) = &self.problem {
            if p.positives.is_empty() || p.negatives.is_empty() {
                return Err(Error::Config("problem needs at least one positive and one negative".into()));
            }
            if p.kernel.0 * p.kernel.1 < 2 {
                return Err(Error::Config("kernel needs at least two taps".into()));
            }
        }
        self.learn.validate().map_err(|e| Error::Config(e.to_string()))?;
        for r in &self.reconstruct {
            if !(r.eta >= 0.0 && r.sigma >= 0.0 && r.eta.is_finite() && r.sigma.is_finite()) {
                return Err(Error::Config(format!(
                    "reconstruction {:?}: eta and sigma must be finite and >= 0",
                    r.name
                )));
            }
            r.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let mut names: Vec<&str> = self.reconstruct.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("reconstruction names must be unique".into()));
        }
        for f in self.files() {
            let full = self.base_dir.join(&f);
            if !full.is_file() {
                return Err(Error::Config(format!("referenced file {} does not exist", full.display())));
            }
        }
        Ok(())
    }

    /// Every file the experiment reads.
    pub fn files(&self) -> Vec<PathBuf> {
        let mut out = Vec::new();
        if let Some(p) = &self.problem {
            p.positives.iter().chain(&p.negatives).for_each(|s| s.files(&mut out));
        }
        if let Some(BankSource::File(f)) = &self.bank {
            out.push(f.file.clone());
        }
        for r in &self.reconstruct {
            r.input.files(&mut out);
            if let Some(s) = &r.reference {
                s.files(&mut out);
            }
        }
        out
    }
}

/// Reads and validates an experiment file; `name` defaults to its stem.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut cfg = ExperimentConfig::parse(&text, base).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if cfg.name.is_none() {
        cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_sources() {
        let s = SignalSource::parse_inline(r#"kind = "step", length = 8, start = 2, end = 5"#).unwrap();
        assert_eq!(
            s.build(Path::new(".")).unwrap().data(),
            &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]
        );
        let d = SignalSource::parse_inline(
            r#"kind = "diagonal_stripes", rows = 8, cols = 8, angle = 45, thickness = 2, spacing = 3"#,
        );
        assert!(d.is_ok());
        assert!(SignalSource::parse_inline(r#"kind = "step", length = 8, start = 2, end = 5, colour = 1"#).is_err());
        let h = SignalSource::parse_inline(
            r#"kind = "hconcat", parts = [{ kind = "noise", rows = 3, cols = 2, sigma = 1, seed = 1 }, { kind = "noise", rows = 3, cols = 4, sigma = 1, seed = 2 }]"#,
        )
        .unwrap();
        assert_eq!(h.build(Path::new(".")).unwrap().shape(), Shape::new(3, 6));
    }
    use crate::learning::HuberPolicy;

    const MINIMAL: &str = r#"
        [problem]
        kernel = [2, 1]
        positives = [{ kind = "step", length = 128, start = 32, end = 64 }]
        negatives = [{ kind = "noise", length = 128, sigma = 0.3, seed = 7 }]
    "#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(cfg.learn.restarts, 100);
        assert_eq!(cfg.learn.outer_tol, 1e-8);
        assert_eq!(cfg.learn.huber, HuberPolicy::default());
        let p = cfg.problem.unwrap();
        assert_eq!(p.mode, Mode::Standard);
        let (problem, pos, neg) = p.build(Path::new(".")).unwrap();
        assert_eq!(problem.filters(), 1);
        assert_eq!(pos[0].len(), 128);
        assert_eq!(neg[0].shape(), Shape::vector(128));
    }

    #[test]
    fn reconstruction_block() {
        let text = format!(
            "{MINIMAL}\n[[reconstruct]]\nname = \"tv\"\ninput = {{ kind = \"step\", length = 128, start = 32, end = 64 }}\nnoise_seed = 3\neta = 3.5\nsigma = 0.1\n"
        );
        let cfg = ExperimentConfig::parse(&text, Path::new(".")).unwrap();
        let r = &cfg.reconstruct[0];
        assert_eq!(r.eta, 3.5);
        assert_eq!(r.extent, Extent::Valid);
        assert_eq!(r.solver.max_iters, 50_000);
        let (f, reference) = r.build(Path::new(".")).unwrap();
        assert!(f.distance(&reference) > 0.0);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        for bad in [
            MINIMAL.replace("kernel", "kernle"),
            format!("{MINIMAL}\n[learn]\nrestart = 3\n"),
            MINIMAL.replace("sigma = 0.3", "sigma = 0.3, sigmaa = 1"),
            MINIMAL.replace("\"step\"", "\"stepp\""),
            MINIMAL.replace("[2, 1]", "[1, 1]"),
            format!("{MINIMAL}\n[learn]\nrestarts = 0\n"),
            format!("{MINIMAL}\nbank = {{ file = \"x.bank\" }}\n").replace("[problem]", "bank = { file = \"x\" }\n[problem]"),
            "name = \"empty\"\n".to_string(),
            MINIMAL.replace(
                "positives = [{ kind = \"step\", length = 128, start = 32, end = 64 }]",
                "positives = [{ kind = \"file\", path = \"missing.csv\" }]",
            ),
        ] {
            let err = ExperimentConfig::parse(&bad, Path::new(".")).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{bad}: {err}");
        }
    }

    #[test]
    fn composite_sources() {
        let base = Path::new(".");
        let sum = SignalSource::Sum {
            parts: vec![
                SignalSource::Stripes {
                    rows: 8,
                    cols: 8,
                    orientation: Orientation::Vertical,
                    thickness: 2,
                    spacing: 2,
                    amplitude: 1.0,
                },
                SignalSource::Stripes {
                    rows: 8,
                    cols: 8,
                    orientation: Orientation::Horizontal,
                    thickness: 2,
                    spacing: 2,
                    amplitude: 1.0,
                },
            ],
        };
        let u = sum.build(base).unwrap();
        assert_eq!(u.get(0, 0), 2.0);
        assert_eq!(u.get(2, 2), 0.0);
        let noisy = SignalSource::Noisy {
            signal: Box::new(sum),
            sigma: 0.1,
            seed: 1,
        };
        assert!(noisy.build(base).unwrap().distance(&u) > 0.0);
        assert!(SignalSource::Sum { parts: vec![] }.build(base).is_err());
    }

    #[test]
    fn files_resolve_against_config_dir() {
        let d = tempfile::tempdir().unwrap();
        crate::io::write_signal(
            &d.path().join("u.csv"),
            &Signal::from_vec(vec![0.0, 1.0, 1.0, 0.0]).unwrap(),
            SignalFormat::Csv,
        )
        .unwrap();
        crate::io::write_bank(
            &d.path().join("h.bank"),
            &FilterBank::single(crate::signal::Kernel::from_vec(vec![1.0, -1.0]).unwrap()),
        )
        .unwrap();
        let text = r#"
            bank = { file = "h.bank" }
            [[reconstruct]]
            name = "r"
            input = { kind = "file", path = "u.csv" }
            eta = 1.0
            sigma = 0.1
        "#;
        let path = d.path().join("exp.toml");
        std::fs::write(&path, text).unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.name.as_deref(), Some("exp"));
        let bank = cfg.bank.as_ref().unwrap().build(&cfg.base_dir).unwrap();
        assert_eq!(bank.flat(), vec![1.0, -1.0]);
        let (f, _) = cfg.reconstruct[0].build(&cfg.base_dir).unwrap();
        assert_eq!(f.len(), 4);

        let inline = "bank = { kernel = [2, 2], filters = [[0.5, -0.5, -0.5, 0.5]] }\n";
        let cfg = ExperimentConfig::parse(inline, d.path()).unwrap();
        assert_eq!(cfg.bank.unwrap().build(d.path()).unwrap().kernel_shape(), Shape::new(2, 2));
    }
}
