use std::fs;

use mesoshrink_core::eval::{
    laplacian_variance, pixel_error, property_errors, summarize, total_damage_error, write_scatter, MeanStd,
    MetricsRecord, StepErrors, Summary,
};
use mesoshrink_core::io::{load_micro, write_atomic};
use serde::Serialize;

use crate::dataset::{class_fractions, load_trajectory, sample_record};
use crate::{par_map, partition, CliError, Entry, Failure, JobConfig, Manifest, Report};

#[derive(Serialize)]
struct MetricsRow<'a> {
    stem: &'a str,
    t: usize,
    e_omega: Option<f64>,
    e_total: Option<f64>,
    e_eps: Option<f64>,
    e_k: Option<f64>,
    lapvar_ref: f64,
    lapvar_pred: f64,
}

/// Flat `t, <metric>_mean, <metric>_std, ...` table of a summary.
pub(crate) fn summary_csv(summary: &Summary) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let metrics = ["e_omega", "e_total", "e_eps", "e_k", "lapvar_ref", "lapvar_pred"];
    let mut header = vec!["t".to_string()];
    for m in metrics {
        header.extend([format!("{m}_mean"), format!("{m}_std"), format!("{m}_n")]);
    }
    w.write_record(&header)?;
    for s in &summary.steps {
        let mut row = vec![s.t.to_string()];
        for v in [&s.e_omega, &s.e_total, &s.e_eps, &s.e_k, &s.lapvar_ref, &s.lapvar_pred] {
            match v {
                Some(MeanStd { mean, std, n, .. }) => row.extend([mean.to_string(), std.to_string(), n.to_string()]),
                None => row.extend([String::new(), String::new(), "0".into()]),
            }
        }
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| CliError::StdIo(e.into_error()))
}

pub(crate) fn run(job: &JobConfig) -> Result<Report, CliError> {
    let data = job.require(&job.data, "data")?;
    let reference = job.require(&job.sims, "sims")?;
    let pred = job.require(&job.pred, "pred")?;
    let out = job.out_dir()?;
    Manifest::load_for(data, job.scenario)?;
    let ref_manifest = Manifest::load_for(reference, job.scenario)?;
    let pred_manifest = Manifest::load_for(pred, job.scenario)?;
    fs::create_dir_all(out)?;

    let mut entries = ref_manifest.entries.clone();
    if job.count > 0 {
        entries.truncate(job.count);
    }
    let outcomes = par_map(job.workers, "eval", &entries, |e| {
        let fail = |error: String| Failure {
            index: e.index,
            stem: e.stem.clone(),
            seed: e.seed,
            error,
        };
        if pred_manifest.entry(&e.stem).is_none() {
            return Err(fail("no prediction for this sample".into()));
        }
        let (micro, _) = load_micro(data, &e.stem).map_err(|err| fail(err.to_string()))?;
        let (wr, sr) = load_trajectory(reference, &e.stem).map_err(|err| fail(err.to_string()))?;
        let (wp, sp) = load_trajectory(pred, &e.stem).map_err(|err| fail(err.to_string()))?;
        if wr.len() != wp.len() {
            return Err(fail(format!(
                "{} reference vs {} predicted snapshots",
                wr.len(),
                wp.len()
            )));
        }
        let mut steps = Vec::with_capacity(wr.len());
        for i in 0..wr.len() {
            let (e_eps, e_k) = property_errors(sr[i].eps_observed, sp[i].eps_observed, sr[i].k_pa, sp[i].k_pa);
            // Missing property predictions are NaN and count as undefined.
            let defined = |v: Result<f64, _>| v.ok().filter(|x: &f64| x.is_finite());
            steps.push(StepErrors {
                t: sr[i].t,
                e_omega: pixel_error(&wr[i], &wp[i], &micro.phase).ok(),
                e_total: total_damage_error(sr[i].omega_total, sp[i].omega_total).ok(),
                e_eps: defined(e_eps),
                e_k: defined(e_k),
                lapvar_ref: laplacian_variance(&wr[i], false),
                lapvar_pred: laplacian_variance(&wp[i], false),
            });
        }
        let record = MetricsRecord {
            sample: sample_record(&micro, &sp),
            class_fractions: class_fractions(&micro),
            steps,
        };
        Ok((
            (
                Entry {
                    param: None,
                    ..e.clone()
                },
                false,
            ),
            record,
        ))
    });

    let mut records = Vec::new();
    let outcomes = outcomes
        .into_iter()
        .map(|o| {
            o.map(|(entry, record)| {
                records.push((entry.0.stem.clone(), record));
                entry
            })
        })
        .collect();
    let mut manifest = Manifest::new(job);
    let report = partition(outcomes, &mut manifest);

    let mut w = csv::Writer::from_writer(Vec::new());
    for (stem, r) in &records {
        for s in &r.steps {
            w.serialize(MetricsRow {
                stem,
                t: s.t,
                e_omega: s.e_omega,
                e_total: s.e_total,
                e_eps: s.e_eps,
                e_k: s.e_k,
                lapvar_ref: s.lapvar_ref,
                lapvar_pred: s.lapvar_pred,
            })?;
        }
    }
    let metrics = w.into_inner().map_err(|e| CliError::StdIo(e.into_error()))?;
    write_atomic(&out.join("metrics.csv"), &metrics)?;

    let only: Vec<MetricsRecord> = records.iter().map(|r| r.1.clone()).collect();
    let summary = summarize(&only);
    write_atomic(&out.join("summary.json"), &serde_json::to_vec_pretty(&summary)?)?;
    write_atomic(&out.join("summary.csv"), &summary_csv(&summary)?)?;
    write_atomic(&out.join("records.json"), &serde_json::to_vec_pretty(&only)?)?;
    let mut scatter = Vec::new();
    write_scatter(&only.iter().map(|r| r.sample.clone()).collect::<Vec<_>>(), &mut scatter)?;
    write_atomic(&out.join("scatter.csv"), &scatter)?;

    manifest.save(out)?;
    if report.failed > 0 {
        return Err(CliError::Partial {
            failed: report.failed,
            total: entries.len(),
        });
    }
    Ok(report)
}
