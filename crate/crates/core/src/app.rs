//! Execution of a [`RunConfig`]: the body of every command-line subcommand.

use std::fs;
use std::path::Path;

use crate::ahe::{ahe, fill_mask, modified_ahe_with_report};
use crate::config::{render, sidecar_path, Command, LiftKind, RunConfig};
use crate::diffusion::{run_forward, DiffusionParams};
use crate::error::{Error, Result};
use crate::filters::{unsharp_se2, wax_on_wax_off};
use crate::fixtures::make_fixture;
use crate::grid::{GridSpec, Image2D, OrientationStack};
use crate::io::{read_image, read_mask, write_image, write_mask, write_stack_slices};
use crate::lift::{lift_dirac, lift_gaussian};
use crate::metrics::compute_metrics;

fn lift(cfg: &RunConfig, image: &Image2D) -> Result<(OrientationStack, GridSpec)> {
    let spec = GridSpec::new(image.rows(), image.cols(), cfg.n_theta)?;
    let stack = match cfg.lift_kind {
        LiftKind::Gaussian => lift_gaussian(image, &cfg.lift, &spec)?,
        LiftKind::Dirac => lift_dirac(image, &spec)?,
    };
    Ok((stack, spec))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Run the command, write its outputs and the parameter sidecar.
///
/// Returns the effective parameters, including derived step sizes and any
/// results reported as text.
pub fn run(cfg: &RunConfig) -> Result<Vec<(String, String)>> {
    cfg.validate()?;
    let output = cfg.output.as_deref().expect("validated");
    let mut entries = cfg.entries();
    let mut note = |k: &str, v: String| entries.push((k.to_string(), v));
    let input = || read_image(cfg.input.as_ref().expect("validated"), cfg.convention);

    match cfg.command {
        Command::Lift => {
            let image = input()?;
            let (stack, _) = lift(cfg, &image)?;
            let paths = write_stack_slices(&stack, output, cfg.convention)?;
            note("files_written", paths.len().to_string());
        }
        Command::Inpaint => {
            let mut image = input()?;
            let mask = cfg.mask.as_ref().map(read_mask).transpose()?;
            if let Some(m) = &mask {
                image = fill_mask(&image, m)?;
            }
            let (stack, spec) = lift(cfg, &image)?;
            note("dt_effective", cfg.diffusion.resolved_dt(&spec)?.to_string());
            let out = run_forward(&stack, &cfg.diffusion, &spec)?;
            let sigma = cfg.lift.sigma;
            let projected = cfg.projection.apply(&out, sigma)?;
            write_image(&projected, output, cfg.convention)?;
        }
        Command::WaxOnWaxOff => {
            let image = input()?;
            let (stack, spec) = lift(cfg, &image)?;
            let w = cfg.wax_params();
            let on = DiffusionParams::level_curve(w.beta_on, w.t_on);
            note("dt_on_effective", on.resolved_dt(&spec)?.to_string());
            let off_dt = match w.reverse_steps {
                Some(s) => w.t_off / s as f64,
                None => DiffusionParams::transversal(w.beta_off, w.t_off).resolved_dt(&spec)?,
            };
            note("dt_off_effective", off_dt.to_string());
            let out = wax_on_wax_off(&stack, &w, &spec)?;
            write_image(&cfg.projection.apply(&out, cfg.lift.sigma)?, output, cfg.convention)?;
        }
        Command::Unsharp => {
            let image = input()?;
            let (stack, spec) = lift(cfg, &image)?;
            let blur = DiffusionParams::transversal(cfg.unsharp.beta, cfg.unsharp.t_blur);
            note("dt_blur_effective", blur.resolved_dt(&spec)?.to_string());
            let out = unsharp_se2(&stack, &cfg.unsharp, &spec)?;
            write_image(&cfg.projection.apply(&out, cfg.lift.sigma)?, output, cfg.convention)?;
        }
        Command::Ahe | Command::ModifiedAhe => {
            let image = input()?;
            let mask = read_mask(cfg.mask.as_ref().expect("validated"))?;
            let p = cfg.ahe_params();
            let spec = GridSpec::new(image.rows(), image.cols(), p.n_theta)?;
            note(
                "dt_strong_effective",
                DiffusionParams::level_curve(p.strong_beta, p.t1).resolved_dt(&spec)?.to_string(),
            );
            note(
                "dt_weak_effective",
                DiffusionParams::level_curve(p.weak_beta, p.t3).resolved_dt(&spec)?.to_string(),
            );
            let restored = if cfg.command == Command::Ahe {
                ahe(&image, &mask, p.t1, p.t2, &p)?
            } else {
                let outcome = modified_ahe_with_report(&image, &mask, &p)?;
                note("iterations_run", outcome.iterations.to_string());
                outcome.image
            };
            write_image(&restored, output, cfg.convention)?;
        }
        Command::Metrics => {
            let a = input()?;
            let b = read_image(cfg.reference.as_ref().expect("validated"), cfg.convention)?;
            let m = compute_metrics(&a, &b)?;
            let report = vec![
                ("psnr".to_string(), m.psnr.to_string()),
                ("rms_contrast".to_string(), m.first.rms_contrast.to_string()),
                ("gradient_energy".to_string(), m.first.gradient_energy.to_string()),
                ("mass".to_string(), m.first.mass.to_string()),
                ("reference_rms_contrast".to_string(), m.second.rms_contrast.to_string()),
                ("reference_gradient_energy".to_string(), m.second.gradient_energy.to_string()),
                ("reference_mass".to_string(), m.second.mass.to_string()),
            ];
            write_text(output, &render(&report))?;
            entries.extend(report);
        }
        Command::Fixtures => {
            let f = make_fixture(cfg.fixture, &cfg.fixture_options)?;
            fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
            write_image(&f.image, output.join("image.png"), cfg.convention)?;
            write_mask(&f.mask, output.join("mask.png"))?;
            write_image(&f.truth, output.join("truth.png"), cfg.convention)?;
        }
    }
    write_text(&sidecar_path(output), &render(&entries))?;
    Ok(entries)
}
