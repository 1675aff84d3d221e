use std::fs;

use mesoshrink_core::io::load_micro;
use mesoshrink_core::io::save_micro;
use mesoshrink_core::microgen::{generate, random_classes, GenConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::exists;
use crate::{par_map, partition, sample_seed, stem_of, CliError, Entry, Failure, JobConfig, Manifest, Report};

/// Generator configuration of one sample.
pub(crate) fn sample_config(job: &JobConfig, seed: u64) -> GenConfig {
    let mut cfg = GenConfig {
        scenario: job.scenario,
        seed,
        ..job.gen.template.clone()
    };
    if job.gen.random_grading {
        // A separate stream so the grading draw does not shift placement.
        cfg.classes = random_classes(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x6772_6164_696e_6721));
    }
    cfg
}

pub(crate) fn run(job: &JobConfig) -> Result<Report, CliError> {
    let out = job.out_dir()?;
    let mut probe = sample_config(job, 0);
    probe.classes.clear();
    probe.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if !(0.0..=1.0).contains(&job.gen.failure_quota) {
        return Err(CliError::Config("failure quota must lie in [0, 1]".into()));
    }
    fs::create_dir_all(out)?;

    let indices: Vec<usize> = (0..job.count).collect();
    let outcomes = par_map(job.workers, "gen", &indices, |&index| {
        let seed = sample_seed(job.seed, index);
        let stem = stem_of(index);
        let entry = Entry {
            index,
            stem: stem.clone(),
            seed,
            param: None,
        };
        if exists(out, &stem, &["fgrd", "json"]) {
            if let Ok((_, side)) = load_micro(out, &stem) {
                if side.seed == seed {
                    return Ok((entry, true));
                }
            }
        }
        let cfg = sample_config(job, seed);
        let fail = |error: String| Failure {
            index,
            stem: stem.clone(),
            seed,
            error,
        };
        let micro = generate(&cfg).map_err(|e| fail(e.to_string()))?;
        save_micro(out, &stem, &micro, &cfg.hash()).map_err(|e| fail(e.to_string()))?;
        Ok((entry, false))
    });

    let mut manifest = Manifest::new(job);
    let report = partition(outcomes, &mut manifest);
    manifest.save(out)?;
    let allowed = (job.gen.failure_quota * job.count as f64).floor() as usize;
    if report.failed > allowed {
        return Err(CliError::Partial {
            failed: report.failed,
            total: job.count,
        });
    }
    Ok(report)
}
