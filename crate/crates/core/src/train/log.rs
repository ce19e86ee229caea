use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    /// Cross-entropy per attribute.
    pub classification: Vec<f64>,
    /// Unweighted adversarial term of the encoder loss, summed over attributes.
    pub adversarial: Option<f64>,
    pub discriminator_loss: Option<f64>,
    pub discriminator_accuracy: Option<f64>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    pub config_hash: String,
    pub records: Vec<StepRecord>,
}

impl TrainLog {
    pub fn new(seed: u64, config_hash: String) -> Self {
        TrainLog {
            seed,
            config_hash,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: StepRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.step <= last.step {
                return Err(Error::InvalidArgument(format!(
                    "step {} logged after step {}",
                    record.step, last.step
                )));
            }
        }
        let values = record
            .classification
            .iter()
            .chain(&record.adversarial)
            .chain(&record.discriminator_loss)
            .chain(&record.discriminator_accuracy);
        if values.clone().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss {
                step: record.step,
                context: format!("{record:?}"),
            });
        }
        self.records.push(record);
        Ok(())
    }

    /// The log with timings zeroed, for run-to-run comparison.
    pub fn without_timing(&self) -> TrainLog {
        let mut log = self.clone();
        for r in &mut log.records {
            r.elapsed_ms = 0.0;
        }
        log
    }

    /// One JSON object per step.
    pub fn write_ndjson(&self, mut out: impl Write) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_ndjson(input: impl BufRead, seed: u64, config_hash: String) -> Result<TrainLog> {
        let mut log = TrainLog::new(seed, config_hash);
        for line in input.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                log.push(serde_json::from_str(&line)?)?;
            }
        }
        Ok(log)
    }

    pub fn final_classification(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.classification.as_slice())
    }
}
