//! Desk-scale sweep: degrade a test image under several settings, restore
//! each, and tabulate quality and cost.

use std::path::Path;

use anyhow::{Context, Result};
use pnppds_core::degrade::{degrade_with_spec, DegradationSpec};
use pnppds_core::{Image, Shape};
use serde::Serialize;

use crate::commands::{run_restoration, synthetic_image, Restoration};
use crate::config::{task_of, RunConfig, Sidecar};
use crate::imageio::read_image;

pub const DEFAULT_KERNEL: &str = "motion_b";

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub setting: String,
    pub solver: String,
    pub termination: String,
    pub iterations: usize,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub seconds: f64,
    pub seconds_per_iteration: f64,
}

/// The sweep: Gaussian deblurring at three noise levels, 20% inpainting, and
/// Poisson deblurring at a mild and a strong scaling. Any noise or operator
/// flag narrows it to that single setting.
fn settings(cfg: &RunConfig) -> Vec<(String, RunConfig)> {
    let pinned = cfg.sigma.is_some() || cfg.eta.is_some() || cfg.kernel.is_some() || cfg.mask_frac.is_some();
    if pinned {
        return vec![("custom".into(), cfg.clone())];
    }
    let with = |f: &dyn Fn(&mut RunConfig)| {
        let mut c = cfg.clone();
        f(&mut c);
        c
    };
    let mut out = Vec::new();
    for sigma in [0.005, 0.01, 0.02] {
        out.push((
            format!("deblur sigma={sigma}"),
            with(&|c| {
                c.kernel = Some(DEFAULT_KERNEL.into());
                c.sigma = Some(sigma);
            }),
        ));
    }
    out.push((
        "inpaint 20% sigma=0.01".into(),
        with(&|c| {
            c.mask_frac = Some(0.2);
            c.sigma = Some(0.01);
        }),
    ));
    for eta in [100.0, 10.0] {
        out.push((
            format!("deblur poisson eta={eta}"),
            with(&|c| {
                c.kernel = Some(DEFAULT_KERNEL.into());
                c.eta = Some(eta);
            }),
        ));
    }
    out
}

pub fn bench(input: Option<&Path>, size: usize, cfg: RunConfig) -> Result<Vec<BenchRow>> {
    let cfg = cfg.resolve()?;
    let u: Image = match input {
        Some(p) => read_image(p)?,
        None => synthetic_image(Shape::gray(size, size)),
    };
    let mut rows = Vec::new();
    println!(
        "{:<26} {:>10} {:>7} {:>8} {:>7} {:>9} {:>11}",
        "setting", "status", "iters", "PSNR", "SSIM", "seconds", "ms/iter"
    );
    for (name, c) in settings(&cfg) {
        let spec = DegradationSpec {
            operator: c.operator(u.shape())?,
            noise: c.noise()?,
            seed: c.seed(),
        };
        let (v, _) = degrade_with_spec(&u, &spec)?;
        let job = Restoration {
            observation: v,
            sidecar: Sidecar {
                shape: u.shape(),
                task: task_of(&spec.operator),
                degradation: spec,
                source: input.map(Path::to_path_buf),
                kernel: c.kernel.clone(),
            },
            reference: Some(u.clone()),
        };
        let r = run_restoration(&job, &c).with_context(|| format!("setting {name}"))?.report;
        let row = BenchRow {
            setting: name,
            solver: r.solver.clone(),
            termination: match &r.termination {
                pnppds_core::solver::Termination::Converged => "converged".into(),
                pnppds_core::solver::Termination::MaxIters => "max-iters".into(),
                pnppds_core::solver::Termination::Diverged { .. } => "diverged".into(),
            },
            iterations: r.iterations,
            psnr: r.extra.get("psnr").and_then(|v| v.as_f64()),
            ssim: r.extra.get("ssim").and_then(|v| v.as_f64()),
            seconds: r.seconds,
            seconds_per_iteration: r.seconds_per_iteration,
        };
        let fmt = |v: Option<f64>, digits: usize| v.map_or("-".into(), |x| format!("{x:.digits$}"));
        println!(
            "{:<26} {:>10} {:>7} {:>8} {:>7} {:>9.3} {:>11.4}",
            row.setting,
            row.termination,
            row.iterations,
            fmt(row.psnr, 2),
            fmt(row.ssim, 4),
            row.seconds,
            1e3 * row.seconds_per_iteration
        );
        rows.push(row);
    }
    if let Some(path) = &cfg.report {
        std::fs::write(path, serde_json::to_string_pretty(&rows)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(rows)
}
