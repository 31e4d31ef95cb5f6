//! Forest model persistence: a self-describing JSON dump of the config,
//! inbag matrix, and tree structures. JSON floats use shortest round-trip
//! formatting, so save-then-load reproduces the model exactly.

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::forest::ForestModel;

pub fn save_model(model: &ForestModel<f64>, path: &Path) -> Result<()> {
    let json = serde_json::to_string(model)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ForestModel<f64>> {
    let raw = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&raw)?)
}
