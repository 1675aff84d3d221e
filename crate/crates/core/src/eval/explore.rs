//! Dataset statistics: composition clusters, colour codes, depth profiles
//! and binned comparisons between two datasets.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::grid::Grid;
use crate::microgen::AreaFractions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cluster {
    /// Large particles only.
    A,
    /// Large and medium particles.
    B,
    /// Any share of the smallest class.
    C,
}

pub fn cluster_assign(f: &AreaFractions) -> Result<Cluster, EvalError> {
    if f.total <= 0.0 {
        return Err(EvalError::NoAggregate);
    }
    Ok(if f.of(4.0) > 0.0 {
        Cluster::C
    } else if f.of(8.0) > 0.0 {
        Cluster::B
    } else {
        Cluster::A
    })
}

/// Share of the aggregate area in the 16, 8 and 4 mm classes.
pub fn rgb_code(f: &AreaFractions) -> [f64; 3] {
    let shares = [f.of(16.0), f.of(8.0), f.of(4.0)];
    let sum: f64 = shares.iter().sum();
    if sum <= 0.0 {
        return [0.0; 3];
    }
    shares.map(|s| s / sum)
}

/// Mean damage per row, top row first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowProfile(pub Vec<f64>);

impl RowProfile {
    /// Pointwise mean of equally long profiles.
    pub fn average(profiles: &[RowProfile]) -> Option<RowProfile> {
        let first = profiles.first()?;
        let mut acc = vec![0.0; first.0.len()];
        for p in profiles {
            assert_eq!(p.0.len(), acc.len(), "profiles differ in length");
            acc.iter_mut().zip(&p.0).for_each(|(a, v)| *a += v);
        }
        let n = profiles.len() as f64;
        Some(RowProfile(acc.into_iter().map(|a| a / n).collect()))
    }
}

pub fn row_profile(omega: &Grid<f64>) -> RowProfile {
    let w = omega.width() as f64;
    RowProfile(
        (0..omega.height())
            .map(|r| omega.row(r).iter().sum::<f64>() / w)
            .collect(),
    )
}

/// Per-sample scalars of one microstructure and its damage trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub aggregate_fraction: f64,
    pub omega_final: f64,
    pub eps_final: f64,
    pub k_initial: f64,
    pub k_final: f64,
    /// `None` for aggregate-free cells.
    pub cluster: Option<Cluster>,
    pub rgb: [f64; 3],
}

impl SampleRecord {
    pub fn k_loss(&self) -> f64 {
        self.k_initial - self.k_final
    }

    pub fn k_loss_rel(&self) -> f64 {
        if self.k_initial == 0.0 {
            0.0
        } else {
            self.k_loss() / self.k_initial
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ScatterRow {
    aggregate_fraction: f64,
    #[serde(rename = "Omega_final")]
    omega_final: f64,
    eps_sh_final: f64,
    k_initial: f64,
    k_final: f64,
    cluster: String,
    r: f64,
    g: f64,
    b: f64,
}

/// One CSV row per record for pair plots; the cluster column is empty for
/// aggregate-free cells.
pub fn write_scatter<W: Write>(records: &[SampleRecord], out: W) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let err = |e: csv::Error| EvalError::Parse(e.to_string());
    w.write_record([
        "aggregate_fraction",
        "Omega_final",
        "eps_sh_final",
        "k_initial",
        "k_final",
        "cluster",
        "r",
        "g",
        "b",
    ])
    .map_err(err)?;
    for s in records {
        w.serialize(ScatterRow {
            aggregate_fraction: s.aggregate_fraction,
            omega_final: s.omega_final,
            eps_sh_final: s.eps_final,
            k_initial: s.k_initial,
            k_final: s.k_final,
            cluster: s.cluster.map_or(String::new(), |c| format!("{c:?}")),
            r: s.rgb[0],
            g: s.rgb[1],
            b: s.rgb[2],
        })
        .map_err(err)?;
    }
    w.flush().map_err(|e| EvalError::Parse(e.to_string()))
}

pub fn read_scatter<R: Read>(input: R) -> Result<Vec<SampleRecord>, EvalError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize::<ScatterRow>() {
        let row = row.map_err(|e| EvalError::Parse(e.to_string()))?;
        let cluster = match row.cluster.as_str() {
            "" => None,
            "A" => Some(Cluster::A),
            "B" => Some(Cluster::B),
            "C" => Some(Cluster::C),
            other => return Err(EvalError::Parse(format!("unknown cluster {other:?}"))),
        };
        out.push(SampleRecord {
            aggregate_fraction: row.aggregate_fraction,
            omega_final: row.omega_final,
            eps_final: row.eps_sh_final,
            k_initial: row.k_initial,
            k_final: row.k_final,
            cluster,
            rgb: [row.r, row.g, row.b],
        });
    }
    Ok(out)
}

pub const BIN_WIDTH: f64 = 0.05;
pub const N_BINS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinMeans {
    pub omega_final: f64,
    pub eps_final: f64,
    pub k_loss: f64,
    pub k_loss_rel: f64,
}

impl BinMeans {
    fn of(records: &[&SampleRecord]) -> Option<BinMeans> {
        if records.is_empty() {
            return None;
        }
        let n = records.len() as f64;
        let mean = |f: fn(&SampleRecord) -> f64| records.iter().map(|r| f(r)).sum::<f64>() / n;
        Some(BinMeans {
            omega_final: mean(|r| r.omega_final),
            eps_final: mean(|r| r.eps_final),
            k_loss: mean(SampleRecord::k_loss),
            k_loss_rel: mean(SampleRecord::k_loss_rel),
        })
    }

    fn minus(self, o: BinMeans) -> BinMeans {
        BinMeans {
            omega_final: self.omega_final - o.omega_final,
            eps_final: self.eps_final - o.eps_final,
            k_loss: self.k_loss - o.k_loss,
            k_loss_rel: self.k_loss_rel - o.k_loss_rel,
        }
    }
}

/// One aggregate-fraction range. Means are `None` where a dataset has no
/// samples in the range (an empty bin), and so is their difference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub lo: f64,
    pub hi: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub a: Option<BinMeans>,
    pub b: Option<BinMeans>,
    pub diff: Option<BinMeans>,
}

impl BinRow {
    pub fn is_empty(&self) -> bool {
        self.n_a == 0 || self.n_b == 0
    }
}

fn bin_of(fraction: f64) -> Option<usize> {
    if !(0.0..=N_BINS as f64 * BIN_WIDTH + 1e-12).contains(&fraction) {
        return None;
    }
    Some(((fraction / BIN_WIDTH).floor() as usize).min(N_BINS - 1))
}

/// Groups both datasets by total aggregate fraction in 5% ranges over
/// [0, 0.5] and reports per-bin means and `a − b`.
pub fn binned_compare(a: &[SampleRecord], b: &[SampleRecord]) -> Vec<BinRow> {
    fn group(set: &[SampleRecord]) -> Vec<Vec<&SampleRecord>> {
        let mut bins: Vec<Vec<&SampleRecord>> = vec![Vec::new(); N_BINS];
        for s in set.iter() {
            if let Some(i) = bin_of(s.aggregate_fraction) {
                bins[i].push(s);
            }
        }
        bins
    }
    let (ga, gb) = (group(a), group(b));
    (0..N_BINS)
        .map(|i| {
            let (ma, mb) = (BinMeans::of(&ga[i]), BinMeans::of(&gb[i]));
            BinRow {
                lo: i as f64 * BIN_WIDTH,
                hi: (i + 1) as f64 * BIN_WIDTH,
                n_a: ga[i].len(),
                n_b: gb[i].len(),
                a: ma,
                b: mb,
                diff: ma.zip(mb).map(|(x, y)| x.minus(y)),
            }
        })
        .collect()
}
