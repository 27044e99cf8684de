use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArrayLayout, Point3};
use crate::error::{Error, Result};

/// Element spacing along a row (x).
pub const COLUMN_PITCH_M: f64 = 0.0036;
/// Spacing between rows (y).
pub const ROW_PITCH_M: f64 = 0.010;
pub const ELEMENT_RADIUS_M: f64 = 0.0015;
/// Radius of the circular layout; it sits on the housing wall, outside the opening.
pub const RING_RADIUS_M: f64 = 0.014;

/// On-disk layout description. Lengths are in millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub name: String,
    pub elements_mm: Vec<Point3>,
    #[serde(default)]
    pub element_radius_mm: f64,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub phases_rad: Option<Vec<f64>>,
}

impl LayoutFile {
    pub fn into_layout(self) -> Result<ArrayLayout> {
        let n = self.elements_mm.len();
        let layout = ArrayLayout {
            name: self.name,
            elements: self.elements_mm.iter().map(|p| p.map(|c| c * 1e-3)).collect(),
            element_radius_m: self.element_radius_mm * 1e-3,
            amplitude_weights: self.weights.unwrap_or_else(|| vec![1.0; n]),
            phase_offsets_rad: self.phases_rad.unwrap_or_else(|| vec![0.0; n]),
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn from_layout(layout: &ArrayLayout) -> Self {
        Self {
            name: layout.name.clone(),
            elements_mm: layout.elements.iter().map(|p| p.map(|c| c * 1e3)).collect(),
            element_radius_mm: layout.element_radius_m * 1e3,
            weights: Some(layout.amplitude_weights.clone()),
            phases_rad: Some(layout.phase_offsets_rad.clone()),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ArrayLayout> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: LayoutFile = serde_json::from_str(&text).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        file.into_layout()
    }
}

/// The six candidate 12-element layouts: five rectangular grids and a ring.
pub fn shipped_layouts() -> Vec<ArrayLayout> {
    let grid = |rows, cols| {
        ArrayLayout::grid(
            format!("{rows}x{cols}"),
            rows,
            cols,
            COLUMN_PITCH_M,
            ROW_PITCH_M,
            ELEMENT_RADIUS_M,
        )
        .expect("shipped grid is valid")
    };
    vec![
        grid(2, 6),
        grid(3, 4),
        grid(4, 3),
        grid(1, 12),
        grid(6, 2),
        ArrayLayout::ring("circular", 12, RING_RADIUS_M, ELEMENT_RADIUS_M).expect("shipped ring is valid"),
    ]
}
