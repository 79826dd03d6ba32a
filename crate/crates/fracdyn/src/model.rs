//! JSON form of a learned model.

use std::path::Path;

use fracdyn_core::basis::{BasisExpansion, BasisFamily, BasisSpec};
use fracdyn_core::learn::{ControlDiagnostics, LearnedModel, OrderEstimate};
use fracdyn_core::{DomainBox, FractionalOrderVector, State, TimeKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{read_json, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisRecord {
    pub family: String,
    #[serde(rename = "L")]
    pub len: usize,
    pub domain: DomainBox,
    pub multi_indices: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    /// One-based input channel.
    pub channel: usize,
    /// `n · L` coefficients, component-major.
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub condition: f64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSample {
    pub x: State,
    pub f: State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub time_kind: TimeKind,
    pub h: f64,
    pub alpha_hat: FractionalOrderVector,
    /// Absent for the integer-order baseline.
    pub order_estimate: Option<OrderEstimate>,
    pub basis: BasisRecord,
    pub control: Vec<ControlRecord>,
    pub drift_coefficients: Option<Vec<f64>>,
    pub drift_residual_norm: Option<f64>,
    pub f_samples: Vec<DriftSample>,
}

impl From<&LearnedModel> for ModelRecord {
    fn from(m: &LearnedModel) -> Self {
        Self {
            time_kind: m.time_kind,
            h: m.h,
            alpha_hat: m.alpha_hat.clone(),
            order_estimate: m.order.clone(),
            basis: BasisRecord {
                family: m.basis.family().name().to_string(),
                len: m.basis.len(),
                domain: m.basis.domain().clone(),
                multi_indices: m.basis.multi_indices().to_vec(),
            },
            control: m
                .g_hat
                .iter()
                .zip(&m.control)
                .map(|(g, d)| ControlRecord {
                    channel: d.channel + 1,
                    coefficients: g.coefficients.clone(),
                    residual_norm: d.residual_norm,
                    condition: d.condition,
                    rows: d.rows,
                })
                .collect(),
            drift_coefficients: m.f_hat.as_ref().map(|f| f.coefficients.clone()),
            drift_residual_norm: m.drift_residual,
            f_samples: m
                .f_samples
                .iter()
                .map(|(x, f)| DriftSample { x: x.clone(), f: f.clone() })
                .collect(),
        }
    }
}

impl ModelRecord {
    /// Rebuilds an evaluable model. Only the built-in Legendre family can be
    /// reconstructed from a file.
    pub fn to_model(&self) -> Result<LearnedModel> {
        if self.basis.family != BasisFamily::LegendreTensor.name() {
            return Err(CliError::Config(format!(
                "cannot rebuild basis family `{}` from a file",
                self.basis.family
            )));
        }
        let basis = BasisSpec::legendre(self.basis.len, self.basis.domain.clone())?;
        if basis.multi_indices() != self.basis.multi_indices.as_slice() {
            return Err(CliError::Config("stored multi-indices disagree with the graded ordering".into()));
        }
        let g_hat = self
            .control
            .iter()
            .map(|c| BasisExpansion::new(basis.clone(), c.coefficients.clone()))
            .collect::<fracdyn_core::Result<Vec<_>>>()?;
        let f_hat = self
            .drift_coefficients
            .as_ref()
            .map(|c| BasisExpansion::new(basis.clone(), c.clone()))
            .transpose()?;
        Ok(LearnedModel {
            time_kind: self.time_kind,
            h: self.h,
            domain: self.basis.domain.clone(),
            alpha_hat: self.alpha_hat.clone(),
            order: self.order_estimate.clone(),
            basis,
            g_hat,
            f_samples: self.f_samples.iter().map(|s| (s.x.clone(), s.f.clone())).collect(),
            f_hat,
            control: self
                .control
                .iter()
                .map(|c| ControlDiagnostics {
                    channel: c.channel.saturating_sub(1),
                    residual_norm: c.residual_norm,
                    condition: c.condition,
                    rows: c.rows,
                })
                .collect(),
            drift_residual: self.drift_residual_norm,
        })
    }
}

pub fn write_model(path: &Path, model: &LearnedModel) -> Result<()> {
    write_json(path, &ModelRecord::from(model))
}

pub fn read_model(path: &Path) -> Result<LearnedModel> {
    read_json::<ModelRecord>(path)?.to_model()
}

#[cfg(test)]
mod tests {
    use super::*;
    use fracdyn_core::learn::{learn, ExperimentPlan, InputLaw};
    use fracdyn_core::systems::Benchmark;

    #[test]
    fn model_json_round_trip() {
        let sys = Benchmark::VanDerPol.build_default().system;
        let basis = BasisSpec::legendre(5, sys.domain.clone()).unwrap();
        let plan = ExperimentPlan::new(12, 3, InputLaw::symmetric(1.0), 4).unwrap();
        let model = learn(&sys, &plan, 0.1, &basis).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("model.json");
        write_model(&p, &model).unwrap();
        let back = read_model(&p).unwrap();
        assert_eq!(ModelRecord::from(&back), ModelRecord::from(&model));
        let x = [0.3, -1.1];
        assert_eq!(back.eval_control(&x), model.eval_control(&x));
        assert_eq!(back.eval_drift(&x), model.eval_drift(&x));
    }
}
