//! Dispatch of validated experiments to the library, with replica fan-out.

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use fep_core::dynamics::simulate_seeded;
use fep_core::estimators::{
    hydro_from_replicas, hydro_replica, transience_from_replicas, transience_replica,
    TransienceSettings,
};
use fep_core::fde::{solve_fde_with, DensityProfile, DtPolicy};
use fep_core::lattice::ExclusionConfig;
use fep_core::measures::{
    canonical_window_table_csv, sample_profile, two_point_table_csv, GcmParams, ProfileSampler,
};
use fep_core::rng::ReplicaSeed;
use fep_core::verify::run_all;

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{config_hash, now_unix, OutputDir, RunManifest, SeedRecord, MANIFEST};

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub deterministic: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            threads: None,
            deterministic: true,
        }
    }
}

/// Outcome of a run: the manifest plus whether every check passed (only
/// `verify` can report failing checks).
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub checks_passed: bool,
}

struct Ctx {
    seeds: Vec<SeedRecord>,
    checks_passed: bool,
}

impl Ctx {
    fn seed(&mut self, master: u64, group: u32, replica: u32) -> ReplicaSeed {
        let s = ReplicaSeed::nested(master, group, replica);
        self.seeds.push(SeedRecord {
            group,
            replica,
            master,
            stream: s.replica,
        });
        s
    }
}

pub fn run(config: &ExperimentConfig, opts: RunOptions) -> Result<RunOutcome> {
    let started = now_unix();
    let mut out = OutputDir::create(&config.output_dir)?;
    let threads = opts
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")?;
    let mut ctx = Ctx {
        seeds: Vec::new(),
        checks_passed: true,
    };
    let result = pool.install(|| dispatch(config, &mut out, &mut ctx));
    if let Err(e) = result {
        out.mark_failed(&format!("{e:#}"));
        return Err(e);
    }
    let manifest = RunManifest {
        config_hash: config_hash(config),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: config.kind().to_string(),
        master_seed: config.master_seed,
        deterministic: opts.deterministic,
        threads,
        seeds: ctx.seeds,
        started_unix: started,
        finished_unix: now_unix(),
        outputs: out.written().to_vec(),
        config: serde_json::to_value(config)?,
    };
    out.write_json(MANIFEST, &manifest)?;
    Ok(RunOutcome {
        manifest,
        checks_passed: ctx.checks_passed,
    })
}

#[derive(Serialize)]
struct SimulateSummary {
    replica: u32,
    initial: String,
    #[serde(rename = "final")]
    final_config: String,
    events: usize,
    horizon_macro: f64,
    particles: usize,
}

fn dispatch(config: &ExperimentConfig, out: &mut OutputDir, ctx: &mut Ctx) -> Result<()> {
    let master = config.master_seed;
    match &config.experiment {
        Experiment::Simulate {
            n,
            initial,
            profile,
            t_end,
            replicas,
            allow_subcritical,
        } => {
            let seeds: Vec<ReplicaSeed> = (0..*replicas as u32).map(|r| ctx.seed(master, 0, r)).collect();
            let fixed = initial
                .as_ref()
                .map(|s| s.parse::<ExclusionConfig>())
                .transpose()?;
            let sampler = if *allow_subcritical {
                ProfileSampler::unchecked(profile.clone(), *n)?
            } else {
                ProfileSampler::new(profile.clone(), *n)?
            };
            let runs: Vec<Result<_>> = seeds
                .par_iter()
                .map(|&seed| {
                    let eta = match &fixed {
                        Some(c) => c.clone(),
                        None => {
                            // the initial state uses a stream separate from the dynamics
                            let mut rng = ReplicaSeed::nested(seed.master, 1, seed.replica as u32).rng();
                            sample_profile(&sampler, &mut rng)?
                        }
                    };
                    Ok(simulate_seeded(&eta, *t_end, seed))
                })
                .collect();
            let mut summaries = Vec::new();
            for (r, t) in runs.into_iter().enumerate() {
                let t = t.map_err(|e: anyhow::Error| anyhow!("replica {r}: {e:#}"))?;
                out.write(&format!("events_r{r}.csv"), &t.event_log_csv())?;
                summaries.push(SimulateSummary {
                    replica: r as u32,
                    initial: t.initial.to_string(),
                    final_config: t.final_config.to_string(),
                    events: t.events.len(),
                    horizon_macro: t.horizon_macro(),
                    particles: t.initial.particle_count(),
                });
            }
            out.write_json("summary.json", &summaries)?;
        }
        Experiment::Pde {
            profile,
            t_end,
            grid_m,
            snapshot_every,
        } => {
            let initial = DensityProfile::from_spec(profile, *grid_m)?;
            let mass0 = initial.mass();
            let mut snaps = Vec::new();
            let mut last = None;
            let steps = solve_fde_with(&initial, *t_end, DtPolicy::default(), *snapshot_every, |p| {
                snaps.push(p.clone());
                last = Some(p.clone());
            })?;
            let last = last.ok_or_else(|| anyhow!("solver returned no profile"))?;
            // the final profile is always the last snapshot
            for (i, s) in snaps.iter().enumerate().take(snaps.len() - 1) {
                out.write(&format!("profile_s{i}.csv"), &s.to_csv())?;
            }
            out.write("profile.csv", &last.to_csv())?;
            out.write_json(
                "summary.json",
                &serde_json::json!({
                    "t_end": last.t,
                    "steps": steps,
                    "dt": DtPolicy::default().dt_for(&initial),
                    "mass_initial": mass0,
                    "mass_final": last.mass(),
                    "min": last.min(),
                    "max": last.max(),
                }),
            )?;
        }
        Experiment::HydroCompare {
            profile,
            settings,
            replicas,
        } => {
            let seeds: Vec<ReplicaSeed> = (0..*replicas as u32).map(|r| ctx.seed(master, 0, r)).collect();
            let runs: Vec<_> = seeds
                .par_iter()
                .map(|&s| hydro_replica(profile, settings, s))
                .collect();
            let mut profiles = Vec::new();
            for (r, p) in runs.into_iter().enumerate() {
                profiles.push(p.map_err(|e| anyhow!("replica {r}: {e}"))?);
            }
            let cmp = hydro_from_replicas(profile, settings, &profiles)?;
            out.write("hydro_table.csv", &cmp.table_csv())?;
            out.write_json(
                "summary.json",
                &serde_json::json!({
                    "settings": cmp.settings,
                    "replicas": cmp.replicas,
                    "l1": cmp.l1,
                }),
            )?;
        }
        Experiment::Transience {
            n_list,
            profile,
            replicas,
            t_max,
            delta,
            ell_reg,
        } => {
            let settings = TransienceSettings {
                t_max: *t_max,
                delta: *delta,
                ell_reg: *ell_reg,
            };
            let mut jobs = Vec::new();
            for (i, &n) in n_list.iter().enumerate() {
                for r in 0..*replicas as u32 {
                    jobs.push((n, ctx.seed(master, i as u32, r)));
                }
            }
            let runs: Vec<_> = jobs
                .par_iter()
                .map(|&(n, s)| transience_replica(n, profile, &settings, s))
                .collect();
            let mut samples = Vec::new();
            for (run, (n, s)) in runs.into_iter().zip(&jobs) {
                samples.push(run.map_err(|e| anyhow!("N={n} replica {}: {e}", s.replica & 0xffff_ffff))?);
            }
            let report = transience_from_replicas(n_list, &settings, samples);
            for &n in n_list {
                out.write(&format!("transience_N{n}.csv"), &report.samples_csv(n))?;
            }
            out.write_json(
                "summary.json",
                &serde_json::json!({
                    "rows": report.rows,
                    "medians_strictly_decreasing": report.medians_strictly_decreasing(),
                    "regular_fraction_non_decreasing": report.regular_fraction_non_decreasing(),
                }),
            )?;
        }
        Experiment::MeasureTable {
            rho,
            ell_list,
            mc_samples,
            n,
            particles,
            window,
        } => {
            let params = GcmParams::new(*rho)?;
            let mut rng = ctx.seed(master, 0, 0).rng();
            out.write(
                "two_point.csv",
                &two_point_table_csv(&params, ell_list, *mc_samples, &mut rng),
            )?;
            if let (Some(n), Some(k)) = (n, particles) {
                out.write("canonical_windows.csv", &canonical_window_table_csv(*n, *k, *window)?)?;
            }
        }
        Experiment::Verify => {
            let results = run_all();
            ctx.checks_passed = results.iter().all(|c| c.passed);
            out.write_json("verify.json", &results)?;
            if !ctx.checks_passed {
                let failed: Vec<&str> = results
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                out.write("verify_failures.txt", &format!("{}\n", failed.join("\n")))?;
            }
        }
    }
    Ok(())
}

/// Fails if the run left a failure marker behind.
pub fn ensure_complete(dir: &std::path::Path) -> Result<()> {
    if dir.join(crate::output::FAILURE_MARKER).exists() {
        bail!("run in {} is marked as failed", dir.display());
    }
    Ok(())
}
