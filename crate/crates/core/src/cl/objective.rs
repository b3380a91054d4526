use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParameterSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Plain,
    Ewc,
}

/// Loss being minimised: mean token cross-entropy, optionally plus the
/// diagonal-Fisher quadratic penalty `(λ/2) Σ F_j (θ_j − θ*_j)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingObjective {
    pub kind: ObjectiveKind,
    pub ewc_lambda: f64,
    pub fisher: Option<ParameterSet>,
    pub anchor: Option<ParameterSet>,
}

impl Default for TrainingObjective {
    fn default() -> Self {
        Self::plain()
    }
}

impl TrainingObjective {
    pub fn plain() -> Self {
        Self { kind: ObjectiveKind::Plain, ewc_lambda: 0.0, fisher: None, anchor: None }
    }

    pub fn ewc(lambda: f64, fisher: ParameterSet, anchor: ParameterSet) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Argument(format!("EWC lambda must be non-negative, got {lambda}")));
        }
        fisher.check_same_layout(&anchor)?;
        if fisher.values().any(|f| f < 0.0 || !f.is_finite()) {
            return Err(Error::Argument("Fisher diagonal must be finite and non-negative".into()));
        }
        Ok(Self { kind: ObjectiveKind::Ewc, ewc_lambda: lambda, fisher: Some(fisher), anchor: Some(anchor) })
    }

    fn ewc_parts(&self, params: &ParameterSet) -> Result<Option<(&ParameterSet, &ParameterSet)>> {
        match self.kind {
            ObjectiveKind::Plain => Ok(None),
            ObjectiveKind::Ewc => {
                let (Some(fisher), Some(anchor)) = (&self.fisher, &self.anchor) else {
                    return Err(Error::Argument("EWC objective without Fisher or anchor".into()));
                };
                params.check_same_layout(fisher)?;
                Ok(Some((fisher, anchor)))
            }
        }
    }

    /// Value of the regularisation term alone.
    pub fn penalty(&self, params: &ParameterSet) -> Result<f64> {
        let Some((fisher, anchor)) = self.ewc_parts(params)? else {
            return Ok(0.0);
        };
        let sum: f64 = params
            .values()
            .zip(fisher.values())
            .zip(anchor.values())
            .map(|((p, f), a)| f * (p - a) * (p - a))
            .sum();
        Ok(0.5 * self.ewc_lambda * sum)
    }

    /// Adds the penalty gradient into `grad` and returns the penalty.
    pub fn penalty_and_grad(&self, params: &ParameterSet, grad: &mut ParameterSet) -> Result<f64> {
        let Some((fisher, anchor)) = self.ewc_parts(params)? else {
            return Ok(0.0);
        };
        let lambda = self.ewc_lambda;
        let mut sum = 0.0;
        for (((g, p), f), a) in grad
            .tensors_mut()
            .iter_mut()
            .zip(params.tensors())
            .zip(fisher.tensors())
            .zip(anchor.tensors())
        {
            for (((gv, &pv), &fv), &av) in g.data.iter_mut().zip(&p.data).zip(&f.data).zip(&a.data) {
                let diff = pv - av;
                sum += fv * diff * diff;
                *gv += lambda * fv * diff;
            }
        }
        Ok(0.5 * lambda * sum)
    }
}
