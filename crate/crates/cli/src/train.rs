use std::fs;
use std::path::Path;

use mesoshrink_core::io::{load_micro, write_atomic};
use mesoshrink_nn::{save_checkpoint, ModelGraph};
use mesoshrink_surrogate::{build_cnn, build_unet, train_cnn, train_unet, Sample};

use crate::dataset::load_sim;
use crate::{par_map, CliError, Entry, JobConfig, Manifest, Net, Report};

/// Samples present in both the geometry and the trajectory directory, in
/// trajectory order, capped at `job.count` when that is non-zero.
pub(crate) fn paired_entries(job: &JobConfig, data: &Path, sims: &Path) -> Result<Vec<Entry>, CliError> {
    let geometry = Manifest::load_for(data, job.scenario)?;
    let trajectories = Manifest::load_for(sims, job.scenario)?;
    let mut entries: Vec<Entry> = trajectories
        .entries
        .iter()
        .filter(|e| geometry.entry(&e.stem).is_some())
        .cloned()
        .collect();
    if job.count > 0 {
        entries.truncate(job.count);
    }
    Ok(entries)
}

pub(crate) fn load_samples(
    job: &JobConfig,
    data: &Path,
    sims: &Path,
    entries: &[Entry],
) -> Result<Vec<Sample>, CliError> {
    let profile = job.sim.profile_for(job.scenario);
    par_map(job.workers, "load", entries, |e| -> Result<Sample, CliError> {
        let (micro, _) = load_micro(data, &e.stem)?;
        let result = load_sim(sims, &e.stem, job.scenario)?;
        Ok(Sample::new(&micro, &profile, &result, &job.norm)?)
    })
    .into_iter()
    .collect()
}

pub(crate) fn run(job: &JobConfig) -> Result<Report, CliError> {
    let net = job.net.ok_or_else(|| CliError::Config("train needs --net".into()))?;
    let data = job.require(&job.data, "data")?;
    let sims = job.require(&job.sims, "sims")?;
    let out = job.out_dir()?;

    let entries = paired_entries(job, data, sims)?;
    if entries.is_empty() {
        return Err(CliError::Config("no simulated samples to train on".into()));
    }
    let samples = load_samples(job, data, sims, &entries)?;
    let input = [samples[0].inputs.height(), samples[0].inputs.width()];

    let mut resolved = job.clone();
    let arch = match net {
        Net::Unet => {
            let cfg = job.unet_config(input);
            resolved.unet_net = Some(cfg.clone());
            build_unet(&cfg)?
        }
        Net::Cnn => {
            let cfg = job.cnn_config(input);
            resolved.cnn_net = Some(cfg.clone());
            build_cnn(&cfg)?
        }
    };
    let mut model = ModelGraph::<f32>::new(arch, job.seed)?;
    log::info!(
        "training {} ({} parameters) on {} samples",
        net.stem(),
        model.param_count(),
        samples.len()
    );
    let history = match net {
        Net::Unet => train_unet(&mut model, &samples, &job.train)?,
        Net::Cnn => train_cnn(&mut model, &samples, &job.train)?,
    };

    fs::create_dir_all(out)?;
    save_checkpoint(&model, out, net.stem())?;
    write_atomic(&out.join(format!("{}_history.csv", net.stem())), &history.to_csv()?)?;
    let mut manifest = Manifest::new(&resolved);
    manifest.entries = entries;
    manifest.save(out)?;
    Ok(Report {
        written: 1,
        ..Report::default()
    })
}
