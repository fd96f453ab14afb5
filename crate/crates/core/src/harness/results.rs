use std::fmt;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use crate::receivers::ReceiverKind;

/// Column order of the CSV output.
pub const CSV_HEADER: [&str; 13] = [
    "kind",
    "method",
    "receiver",
    "lambda",
    "n",
    "seed",
    "metric",
    "value",
    "stderr",
    "count",
    "ridge_activations",
    "failures",
    "failure",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Covariance,
    Channel,
    SumRate,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Covariance => "covariance",
            ExperimentKind::Channel => "channel",
            ExperimentKind::SumRate => "sum_rate",
        })
    }
}

/// One aggregated metric. `value` and `stderr` are empty when every sample in
/// the aggregate failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub kind: ExperimentKind,
    pub method: String,
    pub receiver: Option<ReceiverKind>,
    pub lambda: Option<f64>,
    pub n: Option<usize>,
    pub seed: u64,
    pub metric: String,
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    /// Samples in the average.
    pub count: usize,
    pub ridge_activations: usize,
    /// Cells whose computation for this record failed.
    pub failures: usize,
    /// First failure message, if any.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<Record>,
}

impl ExperimentResult {
    pub fn total_failures(&self) -> usize {
        self.records.iter().map(|r| r.failures).sum()
    }

    /// First record matching the given coordinates.
    pub fn find(
        &self,
        method: &str,
        receiver: Option<ReceiverKind>,
        lambda: Option<f64>,
        n: Option<usize>,
        metric: &str,
    ) -> Option<&Record> {
        self.records.iter().find(|r| {
            r.method == method && r.receiver == receiver && r.lambda == lambda && r.n == n && r.metric == metric
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> anyhow::Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        wr.write_record(CSV_HEADER)?;
        for r in &self.records {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> anyhow::Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf)?)
    }
}

pub fn emit_csv(res: &ExperimentResult, path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    res.write_csv(std::io::BufWriter::new(file))
        .with_context(|| format!("writing {}", path.display()))
}

/// Running mean and variance (Welford), plus failure bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tally {
    count: usize,
    mean: f64,
    m2: f64,
    pub ridge_activations: usize,
    pub failures: usize,
    pub failure: Option<String>,
}

impl Tally {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn fail(&mut self, msg: impl fmt::Display) {
        self.failures += 1;
        if self.failure.is_none() {
            self.failure = Some(msg.to_string());
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    /// Standard error of the mean; zero for a single sample.
    pub fn stderr(&self) -> Option<f64> {
        match self.count {
            0 => None,
            1 => Some(0.0),
            n => Some((self.m2 / (n - 1) as f64 / n as f64).sqrt()),
        }
    }

    /// Folds another tally in. Callers merge in a fixed order so the result
    /// does not depend on scheduling.
    pub fn merge(&mut self, other: &Tally) {
        if other.count > 0 {
            let n = self.count + other.count;
            let delta = other.mean - self.mean;
            self.mean += delta * other.count as f64 / n as f64;
            self.m2 += other.m2 + delta * delta * (self.count * other.count) as f64 / n as f64;
            self.count = n;
        }
        self.ridge_activations += other.ridge_activations;
        self.failures += other.failures;
        if self.failure.is_none() {
            self.failure.clone_from(&other.failure);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tally_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -1.0, 7.0, 3.0];
        let mut t = Tally::default();
        xs.iter().for_each(|&x| t.push(x));
        let mean = xs.iter().sum::<f64>() / 6.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert_abs_diff_eq!(t.mean().unwrap(), mean, epsilon = 1e-12);
        assert_abs_diff_eq!(t.stderr().unwrap(), (var / 6.0).sqrt(), epsilon = 1e-12);

        let mut a = Tally::default();
        let mut b = Tally::default();
        xs[..2].iter().for_each(|&x| a.push(x));
        xs[2..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_abs_diff_eq!(a.mean().unwrap(), mean, epsilon = 1e-12);
        assert_abs_diff_eq!(a.stderr().unwrap(), t.stderr().unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn csv_layout() {
        let res = ExperimentResult {
            records: vec![Record {
                kind: ExperimentKind::SumRate,
                method: "dithered".into(),
                receiver: Some(ReceiverKind::Zf),
                lambda: Some(0.5),
                n: Some(100),
                seed: 3,
                metric: "r_sum".into(),
                value: Some(1.25),
                stderr: None,
                count: 0,
                ridge_activations: 1,
                failures: 2,
                failure: Some("boom".into()),
            }],
        };
        let text = res.to_csv_string().unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "sum_rate,dithered,zf,0.5,100,3,r_sum,1.25,,0,1,2,boom");
    }
}
