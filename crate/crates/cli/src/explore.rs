use std::fs;
use std::path::Path;

use mesoshrink_core::eval::row_profile;
use mesoshrink_core::eval::{binned_compare, write_scatter, BinMeans, Cluster, RowProfile, SampleRecord};
use mesoshrink_core::fem::row_depth_mm;
use mesoshrink_core::io::{load_micro, save_micro, write_atomic};
use mesoshrink_core::microgen::{erase_outer_layer, smooth as smooth_micro, Microstructure};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{exists, load_trajectory, sample_record};
use crate::train::paired_entries;
use crate::{par_map, partition, sample_seed, CliError, Entry, Failure, JobConfig, Manifest, Report};

/// Seeded subset of the source entries, in source order.
fn select(job: &JobConfig, entries: &[Entry]) -> Vec<Entry> {
    let n = entries.len();
    if job.explore.subset >= n {
        return entries.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    let mut idx = sample(&mut rng, n, job.explore.subset).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| entries[i].clone()).collect()
}

/// Writes a derived geometry dataset: `draw` picks the per-sample parameter
/// from the sample's own stream and `apply` transforms the cell.
fn derive<D, A>(job: &JobConfig, label: &str, draw: D, apply: A) -> Result<Report, CliError>
where
    D: Fn(&mut ChaCha8Rng) -> f64 + Sync,
    A: Fn(&Microstructure, f64) -> Microstructure + Sync,
{
    let data = job.require(&job.data, "data")?;
    let out = job.out_dir()?;
    let source = Manifest::load_for(data, job.scenario)?;
    fs::create_dir_all(out)?;
    let chosen = select(job, &source.entries);

    let outcomes = par_map(job.workers, label, &chosen, |e| {
        let param = draw(&mut ChaCha8Rng::seed_from_u64(sample_seed(job.seed, e.index)));
        let entry = Entry {
            param: Some(param),
            ..e.clone()
        };
        if exists(out, &e.stem, &["fgrd", "json"]) {
            return Ok((entry, true));
        }
        let fail = |error: String| Failure {
            index: e.index,
            stem: e.stem.clone(),
            seed: e.seed,
            error,
        };
        let (micro, side) = load_micro(data, &e.stem).map_err(|err| fail(err.to_string()))?;
        save_micro(out, &e.stem, &apply(&micro, param), &side.config_hash).map_err(|err| fail(err.to_string()))?;
        Ok((entry, false))
    });

    let mut manifest = Manifest::new(job);
    let report = partition(outcomes, &mut manifest);
    manifest.save(out)?;
    if report.failed > 0 {
        return Err(CliError::Partial {
            failed: report.failed,
            total: chosen.len(),
        });
    }
    Ok(report)
}

pub(crate) fn smooth(job: &JobConfig) -> Result<Report, CliError> {
    let [lo, hi] = job.explore.s_bar_range;
    let fixed = job.explore.s_bar;
    let valid = |s: f64| (0.0..=0.5).contains(&s);
    if !fixed.map_or(valid(lo) && valid(hi) && lo <= hi, valid) {
        return Err(CliError::Config("smoothing thresholds must lie in [0, 0.5]".into()));
    }
    derive(
        job,
        "smooth",
        |rng| fixed.unwrap_or_else(|| rng.gen_range(lo..=hi)),
        smooth_micro,
    )
}

pub(crate) fn erase_layer(job: &JobConfig) -> Result<Report, CliError> {
    let choices = match job.explore.thickness {
        Some(t) => vec![t],
        None => job.explore.thicknesses.clone(),
    };
    let h = job.gen.template.height;
    if choices.is_empty() || choices.iter().any(|&t| t >= h) {
        return Err(CliError::Config(format!(
            "layer thicknesses must be given and below {h} px"
        )));
    }
    derive(
        job,
        "erase-layer",
        |rng| choices[rng.gen_range(0..choices.len())] as f64,
        |m, t| erase_outer_layer(m, t as usize),
    )
}

struct Loaded {
    records: Vec<SampleRecord>,
    profile: Option<RowProfile>,
    pitch: f64,
}

fn load_records(job: &JobConfig, data: &Path, sims: &Path) -> Result<Loaded, CliError> {
    let entries = paired_entries(job, data, sims)?;
    let rows = par_map(job.workers, "stats", &entries, |e| -> Result<_, CliError> {
        let (micro, _) = load_micro(data, &e.stem)?;
        let (omega, rows) = load_trajectory(sims, &e.stem)?;
        let profile = omega.last().map(row_profile);
        Ok((sample_record(&micro, &rows), profile, micro.phase.pitch))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let pitch = rows.first().map_or(job.gen.template.pitch_mm, |r| r.2);
    let profiles: Vec<RowProfile> = rows.iter().filter_map(|r| r.1.clone()).collect();
    Ok(Loaded {
        records: rows.into_iter().map(|r| r.0).collect(),
        profile: RowProfile::average(&profiles),
        pitch,
    })
}

fn clusters_csv(records: &[SampleRecord]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "cluster",
        "n",
        "aggregate_fraction",
        "Omega_final",
        "eps_sh_final",
        "k_initial",
        "k_final",
        "k_loss_rel",
    ])?;
    let groups = [Some(Cluster::A), Some(Cluster::B), Some(Cluster::C), None];
    for g in groups {
        let members: Vec<&SampleRecord> = records.iter().filter(|r| r.cluster == g).collect();
        let n = members.len() as f64;
        let mean = |f: &dyn Fn(&SampleRecord) -> f64| {
            if members.is_empty() {
                String::new()
            } else {
                (members.iter().map(|r| f(r)).sum::<f64>() / n).to_string()
            }
        };
        w.write_record([
            g.map_or("none".to_string(), |c| format!("{c:?}")),
            members.len().to_string(),
            mean(&|r| r.aggregate_fraction),
            mean(&|r| r.omega_final),
            mean(&|r| r.eps_final),
            mean(&|r| r.k_initial),
            mean(&|r| r.k_final),
            mean(&|r| r.k_loss_rel()),
        ])?;
    }
    w.into_inner().map_err(|e| CliError::StdIo(e.into_error()))
}

fn binned_csv(a: &[SampleRecord], b: &[SampleRecord]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fields = ["Omega_final", "eps_sh_final", "k_loss", "k_loss_rel"];
    let mut header: Vec<String> = ["lo", "hi", "n_a", "n_b"].map(String::from).to_vec();
    for side in ["a", "b", "diff"] {
        header.extend(fields.iter().map(|f| format!("{side}_{f}")));
    }
    w.write_record(&header)?;
    let cells = |m: &Option<BinMeans>| -> Vec<String> {
        match m {
            Some(m) => [m.omega_final, m.eps_final, m.k_loss, m.k_loss_rel]
                .map(|v| v.to_string())
                .to_vec(),
            None => vec![String::new(); 4],
        }
    };
    for row in binned_compare(a, b) {
        let mut rec = vec![
            row.lo.to_string(),
            row.hi.to_string(),
            row.n_a.to_string(),
            row.n_b.to_string(),
        ];
        rec.extend(cells(&row.a));
        rec.extend(cells(&row.b));
        rec.extend(cells(&row.diff));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| CliError::StdIo(e.into_error()))
}

fn profile_csv(a: &Loaded, b: Option<&Loaded>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["row", "depth_mm", "omega_a", "omega_b"])?;
    if let Some(pa) = &a.profile {
        let h = pa.0.len();
        let pb = b.and_then(|b| b.profile.as_ref()).filter(|p| p.0.len() == h);
        for (r, v) in pa.0.iter().enumerate() {
            w.write_record([
                r.to_string(),
                row_depth_mm(r, h, a.pitch).to_string(),
                v.to_string(),
                pb.map_or(String::new(), |p| p.0[r].to_string()),
            ])?;
        }
    }
    w.into_inner().map_err(|e| CliError::StdIo(e.into_error()))
}

/// Scatter, cluster, binned and row-profile tables of one dataset, or of
/// two when a comparison dataset is given (binned differences are `a − b`).
pub(crate) fn stats(job: &JobConfig) -> Result<Report, CliError> {
    let data = job.require(&job.data, "data")?;
    let sims = job.require(&job.sims, "sims")?;
    let out = job.out_dir()?;
    let a = load_records(job, data, sims)?;
    let b = match (&job.compare_data, &job.compare_sims) {
        (Some(d), Some(s)) => Some(load_records(job, d, s)?),
        (None, None) => None,
        _ => {
            return Err(CliError::Config(
                "comparison needs both --compare-data and --compare-sims".into(),
            ))
        }
    };
    fs::create_dir_all(out)?;

    let mut scatter = Vec::new();
    write_scatter(&a.records, &mut scatter)?;
    write_atomic(&out.join("scatter.csv"), &scatter)?;
    write_atomic(&out.join("clusters.csv"), &clusters_csv(&a.records)?)?;
    if let Some(b) = &b {
        let mut scatter = Vec::new();
        write_scatter(&b.records, &mut scatter)?;
        write_atomic(&out.join("scatter_compare.csv"), &scatter)?;
        write_atomic(&out.join("clusters_compare.csv"), &clusters_csv(&b.records)?)?;
    }
    let other = b.as_ref().map_or(&a.records, |b| &b.records);
    write_atomic(&out.join("binned.csv"), &binned_csv(&a.records, other)?)?;
    write_atomic(&out.join("row_profile.csv"), &profile_csv(&a, b.as_ref())?)?;

    let mut manifest = Manifest::new(job);
    manifest.entries = paired_entries(job, data, sims)?;
    manifest.save(out)?;
    Ok(Report {
        written: a.records.len(),
        ..Report::default()
    })
}
