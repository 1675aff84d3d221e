use std::fs;

use mesoshrink_core::fem;
use mesoshrink_core::io::{load_micro, save_result};
use mesoshrink_core::microgen::Microstructure;

use crate::dataset::exists;
use crate::{par_map, partition, CliError, Entry, Failure, JobConfig, Manifest, Report};

pub const CONTROL_STEM: &str = "control";

pub(crate) fn run(job: &JobConfig) -> Result<Report, CliError> {
    let data = job.require(&job.data, "data")?;
    let out = job.out_dir()?;
    let source = Manifest::load_for(data, job.scenario)?;
    fs::create_dir_all(out)?;

    let outcomes = par_map(job.workers, "simulate", &source.entries, |e| {
        let entry = Entry {
            param: None,
            ..e.clone()
        };
        if exists(out, &e.stem, &["fgrd", "csv"]) {
            return Ok((entry, true));
        }
        let fail = |error: String| Failure {
            index: e.index,
            stem: e.stem.clone(),
            seed: e.seed,
            error,
        };
        let (micro, _) = load_micro(data, &e.stem).map_err(|err| fail(err.to_string()))?;
        if micro.scenario != job.scenario {
            return Err(fail(format!("sample is {}, job runs {}", micro.scenario, job.scenario)));
        }
        let result = fem::run(&micro, &job.sim).map_err(|err| fail(err.to_string()))?;
        log::debug!("{}: {:.1} s", e.stem, result.wall_time_s);
        save_result(out, &e.stem, &result, micro.phase.pitch).map_err(|err| fail(err.to_string()))?;
        Ok((entry, false))
    });

    let mut manifest = Manifest::new(job);
    // Samples the source dataset already failed on stay listed.
    manifest.failures.extend(source.failures.iter().cloned());
    let mut report = partition(outcomes, &mut manifest);
    report.failed += source.failures.len();

    if job.control {
        let t = &job.gen.template;
        let micro = Microstructure::homogeneous(t.height, t.width, t.pitch_mm, job.scenario);
        let done = exists(out, CONTROL_STEM, &["fgrd", "csv"])
            || fem::run(&micro, &job.sim)
                .map_err(|e| e.to_string())
                .and_then(|r| save_result(out, CONTROL_STEM, &r, t.pitch_mm).map_err(|e| e.to_string()))
                .map_err(|error| {
                    manifest.failures.push(Failure {
                        index: source.entries.len() + source.failures.len(),
                        stem: CONTROL_STEM.to_string(),
                        seed: 0,
                        error,
                    });
                    report.failed += 1;
                })
                .is_ok();
        if done {
            manifest.control = Some(CONTROL_STEM.to_string());
        }
    }

    manifest.save(out)?;
    if report.failed > 0 {
        return Err(CliError::Partial {
            failed: report.failed,
            total: source.entries.len() + source.failures.len(),
        });
    }
    Ok(report)
}
