//! Link loss budgets in dB.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One lossy element of the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossElement {
    pub name: String,
    pub db: f64,
}

impl LossElement {
    pub fn new(name: impl Into<String>, db: f64) -> Self {
        LossElement { name: name.into(), db }
    }
}

/// Ordered list of loss elements. Serialized as a bare JSON array of
/// `{"name": ..., "db": ...}` objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LossElement>", into = "Vec<LossElement>")]
pub struct LossBudget {
    elements: Vec<LossElement>,
}

/// Measured loss of the 34 km metropolitan fiber span.
pub const METRO_FIBER_LOSS_DB: f64 = 14.45;

impl LossBudget {
    pub fn new(elements: Vec<LossElement>) -> Result<Self> {
        for e in &elements {
            if !e.db.is_finite() || e.db < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "loss element {:?} has invalid loss {} dB",
                    e.name, e.db
                )));
            }
        }
        Ok(LossBudget { elements })
    }

    /// Lossless link.
    pub fn empty() -> Self {
        LossBudget { elements: Vec::new() }
    }

    /// Telecom-arm budget of the deployed link: the metropolitan fiber plus
    /// the in-line elements between source and measurement station.
    pub fn deployed_link() -> Self {
        let mut elements = vec![LossElement::new("Metropolitan fiber", METRO_FIBER_LOSS_DB)];
        elements.extend(Self::inline_elements());
        LossBudget { elements }
    }

    /// In-line elements only (no fiber span).
    pub fn inline_elements() -> Vec<LossElement> {
        vec![
            LossElement::new("Input Paddles", 0.74),
            LossElement::new("APC Injector", 0.22),
            LossElement::new("Optical Switch", 0.52),
            LossElement::new("APC Compensator & Optical Switch", 1.54),
        ]
    }

    pub fn elements(&self) -> &[LossElement] {
        &self.elements
    }

    pub fn total_db(&self) -> f64 {
        self.elements.iter().map(|e| e.db).sum()
    }

    pub fn transmission(&self) -> f64 {
        transmission(self.total_db())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

impl TryFrom<Vec<LossElement>> for LossBudget {
    type Error = Error;

    fn try_from(elements: Vec<LossElement>) -> Result<Self> {
        LossBudget::new(elements)
    }
}

impl From<LossBudget> for Vec<LossElement> {
    fn from(b: LossBudget) -> Self {
        b.elements
    }
}

pub fn total_loss_db(budget: &LossBudget) -> f64 {
    budget.total_db()
}

/// Power transmission `10^(-dB/10)`.
pub fn transmission(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}
