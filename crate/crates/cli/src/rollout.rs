use std::fs;
use std::path::Path;

use mesoshrink_core::io::{load_micro, scalars_csv, trajectory_fgrd, write_atomic};
use mesoshrink_nn::{load_checkpoint, ModelGraph};
use mesoshrink_surrogate::{rollout_batch, Inputs};

use crate::dataset::exists;
use crate::{par_map, partition, CliError, Entry, Failure, JobConfig, Manifest, Net, Report};

/// A trained network together with the job that produced it.
pub(crate) struct Checkpoint {
    pub model: ModelGraph<f32>,
    pub job: JobConfig,
}

pub(crate) fn load(dir: &Path, net: Net, job: &JobConfig) -> Result<Checkpoint, CliError> {
    let manifest = Manifest::load_for(dir, job.scenario)?;
    if manifest.config.net != Some(net) {
        return Err(CliError::Config(format!(
            "{} holds no {} checkpoint",
            dir.display(),
            net.stem()
        )));
    }
    Ok(Checkpoint {
        model: load_checkpoint(dir, net.stem())?,
        job: manifest.config,
    })
}

pub(crate) fn run(job: &JobConfig) -> Result<Report, CliError> {
    let data = job.require(&job.data, "data")?;
    let out = job.out_dir()?;
    let source = Manifest::load_for(data, job.scenario)?;
    let unet = load(job.require(&job.unet, "unet")?, Net::Unet, job)?;
    let cnn = job.cnn.as_deref().map(|d| load(d, Net::Cnn, job)).transpose()?;
    let input = unet.job.unet_net.as_ref().map(|c| c.input);
    // Inputs are assembled exactly as during training.
    let norm = unet.job.norm;
    let profile = unet.job.sim.profile_for(job.scenario);
    fs::create_dir_all(out)?;

    // Chunks are fixed by the entry list alone, so batch composition (and
    // with it the floating-point result) never depends on the worker count.
    let chunks: Vec<&[Entry]> = source.entries.chunks(job.rollout_batch.max(1)).collect();
    let outcomes = par_map(job.workers, "rollout", &chunks, |chunk| {
        let tag = |e: &Entry, skipped| {
            Ok((
                Entry {
                    param: None,
                    ..e.clone()
                },
                skipped,
            ))
        };
        if chunk.iter().all(|e| exists(out, &e.stem, &["fgrd", "csv"])) {
            return chunk.iter().map(|e| tag(e, true)).collect::<Vec<_>>();
        }
        let fail = |e: &Entry, error: String| Failure {
            index: e.index,
            stem: e.stem.clone(),
            seed: e.seed,
            error,
        };
        let mut loaded = Vec::new();
        let mut results: Vec<Result<(Entry, bool), Failure>> = Vec::new();
        for e in chunk.iter() {
            match load_micro(data, &e.stem) {
                Ok((m, _)) if Some([m.phase.height(), m.phase.width()]) != input => {
                    results.push(Err(fail(e, "raster size differs from the network input".into())))
                }
                Ok((m, _)) => loaded.push((e, m.phase.pitch, Inputs::new(&m, &profile, &norm))),
                Err(err) => results.push(Err(fail(e, err.to_string()))),
            }
        }
        let refs: Vec<&Inputs> = loaded.iter().map(|l| &l.2).collect();
        match rollout_batch(&unet.model, cnn.as_ref().map(|c| &c.model), &refs) {
            Ok(rolled) => {
                for ((e, pitch, inputs), r) in loaded.iter().zip(rolled) {
                    let saved = trajectory_fgrd(&r.omega_f64(), *pitch)
                        .and_then(|f| f.save(&out.join(format!("{}.fgrd", e.stem))))
                        .and_then(|_| scalars_csv(&r.scalar_rows(inputs, &norm)))
                        .and_then(|csv| write_atomic(&out.join(format!("{}.csv", e.stem)), &csv));
                    results.push(match saved {
                        Ok(()) => tag(e, false),
                        Err(err) => Err(fail(e, err.to_string())),
                    });
                }
            }
            Err(err) => results.extend(loaded.iter().map(|l| Err(fail(l.0, err.to_string())))),
        }
        results.sort_by_key(|r| match r {
            Ok((e, _)) => e.index,
            Err(f) => f.index,
        });
        results
    });

    let mut manifest = Manifest::new(job);
    let report = partition(outcomes.into_iter().flatten().collect(), &mut manifest);
    manifest.save(out)?;
    if report.failed > 0 {
        return Err(CliError::Partial {
            failed: report.failed,
            total: source.entries.len(),
        });
    }
    Ok(report)
}
