//! Per-step aggregation of test-set errors.

use serde::{Deserialize, Serialize};

use super::explore::SampleRecord;

/// Errors at one snapshot. Relative errors are `None` where the reference
/// vanished.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepErrors {
    pub t: usize,
    pub e_omega: Option<f64>,
    pub e_total: Option<f64>,
    pub e_eps: Option<f64>,
    pub e_k: Option<f64>,
    pub lapvar_ref: f64,
    pub lapvar_pred: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub sample: SampleRecord,
    /// Size-class fractions for 16, 8 and 4 mm.
    pub class_fractions: [f64; 3],
    pub steps: Vec<StepErrors>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Number of defined entries that entered the statistics.
    pub n: usize,
    pub undefined: usize,
}

/// Mean and deviation over the defined entries; `None` if there are none.
pub fn mean_std(values: impl IntoIterator<Item = Option<f64>>) -> Option<MeanStd> {
    let mut undefined = 0;
    let defined: Vec<f64> = values
        .into_iter()
        .filter_map(|v| {
            if v.is_none() {
                undefined += 1;
            }
            v
        })
        .collect();
    if defined.is_empty() {
        return None;
    }
    let n = defined.len() as f64;
    let mean = defined.iter().sum::<f64>() / n;
    let var = defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(MeanStd {
        mean,
        std: var.sqrt(),
        n: defined.len(),
        undefined,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub t: usize,
    pub e_omega: Option<MeanStd>,
    pub e_total: Option<MeanStd>,
    pub e_eps: Option<MeanStd>,
    pub e_k: Option<MeanStd>,
    pub lapvar_ref: Option<MeanStd>,
    pub lapvar_pred: Option<MeanStd>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_samples: usize,
    pub steps: Vec<StepSummary>,
}

/// Mean of per-sample errors at every snapshot present in all records.
pub fn summarize(records: &[MetricsRecord]) -> Summary {
    let n_steps = records.iter().map(|r| r.steps.len()).min().unwrap_or(0);
    let steps = (0..n_steps)
        .map(|i| {
            let col = |f: fn(&StepErrors) -> Option<f64>| mean_std(records.iter().map(|r| f(&r.steps[i])));
            StepSummary {
                t: records[0].steps[i].t,
                e_omega: col(|s| s.e_omega),
                e_total: col(|s| s.e_total),
                e_eps: col(|s| s.e_eps),
                e_k: col(|s| s.e_k),
                lapvar_ref: col(|s| Some(s.lapvar_ref)),
                lapvar_pred: col(|s| Some(s.lapvar_pred)),
            }
        })
        .collect();
    Summary {
        n_samples: records.len(),
        steps,
    }
}
