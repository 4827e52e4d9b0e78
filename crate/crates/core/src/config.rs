//! Run configuration shared by the command-line front end: a flat key=value
//! table loaded from an optional file and overridden by flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::ahe::AheParams;
use crate::diffusion::{DiffusionParams, OperatorKind, TimeStep};
use crate::error::{Error, Result};
use crate::filters::{UnsharpParams, WaxParams};
use crate::fixtures::{FixtureKind, FixtureOptions};
use crate::io::IntensityConvention;
use crate::lift::{LiftParams, Projection};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Lift,
    Inpaint,
    WaxOnWaxOff,
    Unsharp,
    Ahe,
    ModifiedAhe,
    Metrics,
    Fixtures,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Lift,
        Command::Inpaint,
        Command::WaxOnWaxOff,
        Command::Unsharp,
        Command::Ahe,
        Command::ModifiedAhe,
        Command::Metrics,
        Command::Fixtures,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Lift => "lift",
            Command::Inpaint => "inpaint",
            Command::WaxOnWaxOff => "waxonwaxoff",
            Command::Unsharp => "unsharp",
            Command::Ahe => "ahe",
            Command::ModifiedAhe => "modified-ahe",
            Command::Metrics => "metrics",
            Command::Fixtures => "fixtures",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::Lift => "Lift an image and write one image per angle plus the max projection",
            Command::Inpaint => "Lift, diffuse with a sub-Laplacian and project back",
            Command::WaxOnWaxOff => "Alternate level-line diffusion with reverse transversal diffusion",
            Command::Unsharp => "Unsharp masking on the orientation stack",
            Command::Ahe => "Mask-aware restoration: fill, strong diffusion, averaging, weak diffusion",
            Command::ModifiedAhe => "Iterated mask-aware restoration with sharpening and mask erosion",
            Command::Metrics => "Compare an image against a reference",
            Command::Fixtures => "Write a synthetic scene, its mask and its ground truth",
        }
    }

    fn needs_input(self) -> bool {
        self != Command::Fixtures
    }

    fn needs_mask(self) -> bool {
        matches!(self, Command::Ahe | Command::ModifiedAhe)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::config(format!("unknown command '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LiftKind {
    #[default]
    Gaussian,
    Dirac,
}

/// Every key accepted in config files and as `--key` flags, with its help text.
pub const KEYS: &[(&str, &str)] = &[
    ("input", "input image (PGM or PNG)"),
    ("output", "output image, directory or report"),
    ("mask", "mask image, white where corrupted"),
    ("reference", "reference image for metrics"),
    ("convention", "intensity convention: paper (0 = white) or standard"),
    ("n_theta", "number of orientation samples on [0, pi)"),
    ("lift", "lift kind: gaussian or dirac"),
    ("sigma", "angular spread of the Gaussian lift"),
    ("smoothing_s", "std of the smoothing used to estimate orientations"),
    ("gradient_floor", "relative gradient size below which fibers are flat"),
    ("projection", "projection: max, mean or log-mean"),
    ("operator", "inpaint operator: level-curve or transversal"),
    ("beta", "angular diffusion weight for inpaint"),
    ("time", "diffusion time for inpaint"),
    ("dt", "time step: auto or a positive number"),
    ("clamp", "clip to [0, 1] after every step: true or false"),
    ("t_on", "WaxOn time per round"),
    ("t_off", "WaxOff time per round (default t_on / 8)"),
    ("beta_on", "WaxOn angular weight"),
    ("beta_off", "WaxOff angular weight"),
    ("iterations", "WaxOn-WaxOff rounds"),
    ("reverse_steps", "WaxOff steps per round: a count or auto"),
    ("c", "unsharp factor"),
    ("t_blur", "unsharp transversal blur time"),
    ("blur_beta", "unsharp angular weight"),
    ("t1", "AHE strong forward time"),
    ("t2", "AHE strong sharpening time (plain AHE: weak time)"),
    ("t3", "AHE weak forward time"),
    ("t4", "AHE weak sharpening time"),
    ("sf", "final planar sharpening factor"),
    ("sharpen_s", "std of the planar sharpening blur"),
    ("n", "maximum AHE outer iterations"),
    ("strong_beta", "AHE strong angular weight"),
    ("weak_beta", "AHE weak angular weight"),
    ("unsharp_c", "AHE in-loop SE(2) unsharp factor"),
    ("unsharp_beta", "AHE in-loop SE(2) unsharp angular weight"),
    ("alpha", "AHE blend weight of the fill baseline inside the mask"),
    ("fixture", "fixture: broken-circle, broken-lines, stripes or ramp-bump"),
    ("size", "fixture side length"),
    ("density", "stripes corruption density"),
    ("seed", "stripes corruption seed"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub convention: IntensityConvention,
    pub n_theta: usize,
    pub lift_kind: LiftKind,
    /// Lift parameters for every command except the AHE pair.
    pub lift: LiftParams,
    pub projection: Projection,
    pub diffusion: DiffusionParams,
    pub wax: WaxParams,
    pub unsharp: UnsharpParams,
    pub ahe: AheParams,
    pub fixture: FixtureKind,
    pub fixture_options: FixtureOptions,
    t_off_set: bool,
    lift_overrides: LiftOverrides,
}

/// Lift keys given explicitly; they also override the AHE defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct LiftOverrides {
    sigma: Option<f64>,
    smoothing_s: Option<f64>,
    gradient_floor: Option<f64>,
    projection: Option<Projection>,
    n_theta: Option<usize>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("invalid value '{value}' for {key}")))
}

fn nonempty_path(key: &str, value: &str) -> Result<PathBuf> {
    if value.trim().is_empty() {
        return Err(Error::config(format!("{key} must be a nonempty path")));
    }
    Ok(PathBuf::from(value.trim()))
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            input: None,
            output: None,
            mask: None,
            reference: None,
            convention: IntensityConvention::Paper,
            n_theta: 32,
            lift_kind: LiftKind::Gaussian,
            lift: LiftParams::default(),
            projection: Projection::Max,
            diffusion: DiffusionParams::level_curve(0.25, 10.0),
            wax: WaxParams::new(10.0, 1),
            unsharp: UnsharpParams {
                c: 1.0,
                t_blur: 1.0,
                beta: 2.0,
            },
            ahe: AheParams::default(),
            fixture: FixtureKind::BrokenCircle,
            fixture_options: FixtureOptions::new(64),
            t_off_set: false,
            lift_overrides: LiftOverrides::default(),
        }
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "input" => self.input = Some(nonempty_path(key, v)?),
            "output" => self.output = Some(nonempty_path(key, v)?),
            "mask" => self.mask = Some(nonempty_path(key, v)?),
            "reference" => self.reference = Some(nonempty_path(key, v)?),
            "convention" => self.convention = v.parse()?,
            "n_theta" => {
                self.n_theta = parse(key, v)?;
                self.lift_overrides.n_theta = Some(self.n_theta);
            }
            "lift" => {
                self.lift_kind = match v {
                    "gaussian" => LiftKind::Gaussian,
                    "dirac" => LiftKind::Dirac,
                    _ => return Err(Error::config(format!("unknown lift '{v}', expected gaussian or dirac"))),
                }
            }
            "sigma" => {
                self.lift.sigma = parse(key, v)?;
                self.lift_overrides.sigma = Some(self.lift.sigma);
            }
            "smoothing_s" => {
                self.lift.smoothing_s = parse(key, v)?;
                self.lift_overrides.smoothing_s = Some(self.lift.smoothing_s);
            }
            "gradient_floor" => {
                self.lift.gradient_floor = parse(key, v)?;
                self.lift_overrides.gradient_floor = Some(self.lift.gradient_floor);
            }
            "projection" => {
                self.projection = v.parse()?;
                self.lift_overrides.projection = Some(self.projection);
            }
            "operator" => {
                self.diffusion.operator = match v {
                    "level-curve" => OperatorKind::LevelCurve,
                    "transversal" => OperatorKind::Transversal,
                    _ => {
                        return Err(Error::config(format!(
                            "unknown operator '{v}', expected level-curve or transversal"
                        )))
                    }
                }
            }
            "beta" => self.diffusion.beta = parse(key, v)?,
            "time" => self.diffusion.total_time = parse(key, v)?,
            "dt" => {
                self.diffusion.dt = if v == "auto" {
                    TimeStep::Auto
                } else {
                    TimeStep::Fixed(parse(key, v)?)
                }
            }
            "clamp" => self.diffusion.clamp = parse(key, v)?,
            "t_on" => self.wax.t_on = parse(key, v)?,
            "t_off" => {
                self.wax.t_off = parse(key, v)?;
                self.t_off_set = true;
            }
            "beta_on" => self.wax.beta_on = parse(key, v)?,
            "beta_off" => self.wax.beta_off = parse(key, v)?,
            "iterations" => self.wax.iterations = parse(key, v)?,
            "reverse_steps" => {
                self.wax.reverse_steps = if v == "auto" { None } else { Some(parse(key, v)?) }
            }
            "c" => self.unsharp.c = parse(key, v)?,
            "t_blur" => self.unsharp.t_blur = parse(key, v)?,
            "blur_beta" => self.unsharp.beta = parse(key, v)?,
            "t1" => self.ahe.t1 = parse(key, v)?,
            "t2" => self.ahe.t2 = parse(key, v)?,
            "t3" => self.ahe.t3 = parse(key, v)?,
            "t4" => self.ahe.t4 = parse(key, v)?,
            "sf" => self.ahe.sf = parse(key, v)?,
            "sharpen_s" => self.ahe.sharpen_s = parse(key, v)?,
            "n" => self.ahe.n = parse(key, v)?,
            "strong_beta" => self.ahe.strong_beta = parse(key, v)?,
            "weak_beta" => self.ahe.weak_beta = parse(key, v)?,
            "unsharp_c" => self.ahe.unsharp_c = parse(key, v)?,
            "unsharp_beta" => self.ahe.unsharp_beta = parse(key, v)?,
            "alpha" => self.ahe.advanced_avg_alpha = parse(key, v)?,
            "fixture" => self.fixture = v.parse()?,
            "size" => self.fixture_options.size = parse(key, v)?,
            "density" => self.fixture_options.density = parse(key, v)?,
            "seed" => self.fixture_options.seed = parse(key, v)?,
            _ => return Err(Error::config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", i + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn wax_params(&self) -> WaxParams {
        let mut w = self.wax;
        if !self.t_off_set {
            w.t_off = w.t_on / 8.0;
        }
        w
    }

    /// AHE parameters with any explicitly given lift keys applied.
    pub fn ahe_params(&self) -> AheParams {
        let mut p = self.ahe;
        let o = self.lift_overrides;
        if let Some(v) = o.sigma {
            p.lift.sigma = v;
        }
        if let Some(v) = o.smoothing_s {
            p.lift.smoothing_s = v;
        }
        if let Some(v) = o.gradient_floor {
            p.lift.gradient_floor = v;
        }
        if let Some(v) = o.projection {
            p.projection = v;
        }
        if let Some(v) = o.n_theta {
            p.n_theta = v;
        }
        p
    }

    /// Check paths and module parameters for the selected command.
    pub fn validate(&self) -> Result<()> {
        if self.command.needs_input() && self.input.is_none() {
            return Err(Error::config(format!("{} needs --input", self.command)));
        }
        if self.output.is_none() {
            return Err(Error::config(format!("{} needs --output", self.command)));
        }
        if self.command.needs_mask() && self.mask.is_none() {
            return Err(Error::config(format!("{} needs --mask", self.command)));
        }
        if self.command == Command::Metrics && self.reference.is_none() {
            return Err(Error::config("metrics needs --reference"));
        }
        match self.command {
            Command::Lift | Command::Inpaint => {
                self.lift.validate()?;
                self.diffusion.validate()?;
            }
            Command::WaxOnWaxOff => {
                self.lift.validate()?;
                self.wax_params().validate()?;
            }
            Command::Unsharp => {
                self.lift.validate()?;
                self.unsharp.validate()?;
            }
            Command::Ahe | Command::ModifiedAhe => self.ahe_params().validate()?,
            Command::Metrics | Command::Fixtures => {}
        }
        Ok(())
    }

    /// Effective parameters relevant to the command, in a stable order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        push("command", self.command.to_string());
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        for (k, p) in [
            ("input", path(&self.input)),
            ("output", path(&self.output)),
            ("mask", path(&self.mask)),
            ("reference", path(&self.reference)),
        ] {
            if let Some(p) = p {
                push(k, p);
            }
        }
        push("convention", self.convention.to_string());
        let lift = |push: &mut dyn FnMut(&str, String), l: &LiftParams, n: usize, proj: Projection| {
            push("n_theta", n.to_string());
            push("sigma", l.sigma.to_string());
            push("smoothing_s", l.smoothing_s.to_string());
            push("gradient_floor", l.gradient_floor.to_string());
            push("projection", proj.name().to_string());
        };
        match self.command {
            Command::Lift | Command::Inpaint => {
                let kind = match self.lift_kind {
                    LiftKind::Gaussian => "gaussian",
                    LiftKind::Dirac => "dirac",
                };
                push("lift", kind.to_string());
                lift(&mut push, &self.lift, self.n_theta, self.projection);
                if self.command == Command::Inpaint {
                    let d = &self.diffusion;
                    let op = match d.operator {
                        OperatorKind::LevelCurve => "level-curve",
                        OperatorKind::Transversal => "transversal",
                    };
                    push("operator", op.to_string());
                    push("beta", d.beta.to_string());
                    push("time", d.total_time.to_string());
                    push("dt", time_step(d.dt));
                    push("clamp", d.clamp.to_string());
                }
            }
            Command::WaxOnWaxOff => {
                lift(&mut push, &self.lift, self.n_theta, self.projection);
                let w = self.wax_params();
                push("t_on", w.t_on.to_string());
                push("t_off", w.t_off.to_string());
                push("beta_on", w.beta_on.to_string());
                push("beta_off", w.beta_off.to_string());
                push("iterations", w.iterations.to_string());
                push(
                    "reverse_steps",
                    w.reverse_steps.map_or("auto".to_string(), |s| s.to_string()),
                );
            }
            Command::Unsharp => {
                lift(&mut push, &self.lift, self.n_theta, self.projection);
                push("c", self.unsharp.c.to_string());
                push("t_blur", self.unsharp.t_blur.to_string());
                push("blur_beta", self.unsharp.beta.to_string());
            }
            Command::Ahe | Command::ModifiedAhe => {
                let p = self.ahe_params();
                lift(&mut push, &p.lift, p.n_theta, p.projection);
                push("t1", p.t1.to_string());
                push("t2", p.t2.to_string());
                if self.command == Command::ModifiedAhe {
                    push("t3", p.t3.to_string());
                    push("t4", p.t4.to_string());
                    push("sf", p.sf.to_string());
                    push("sharpen_s", p.sharpen_s.to_string());
                    push("n", p.n.to_string());
                    push("unsharp_c", p.unsharp_c.to_string());
                    push("unsharp_beta", p.unsharp_beta.to_string());
                }
                push("strong_beta", p.strong_beta.to_string());
                push("weak_beta", p.weak_beta.to_string());
                push("alpha", p.advanced_avg_alpha.to_string());
            }
            Command::Metrics => {}
            Command::Fixtures => {
                push("fixture", self.fixture.to_string());
                push("size", self.fixture_options.size.to_string());
                push("density", self.fixture_options.density.to_string());
                push("seed", self.fixture_options.seed.to_string());
            }
        }
        out
    }
}

fn time_step(dt: TimeStep) -> String {
    match dt {
        TimeStep::Auto => "auto".to_string(),
        TimeStep::Fixed(v) => v.to_string(),
    }
}

/// Render `key=value` lines.
pub fn render(entries: &[(String, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// Path of the parameter record written next to `output`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".params.txt");
    PathBuf::from(s)
}
