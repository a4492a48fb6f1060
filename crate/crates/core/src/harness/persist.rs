//! Versioned JSON persistence for phase grids. Only the plan (seed
//! included) and aggregated cells are stored; operators regenerate from
//! seeds.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{GridCell, PhaseGrid, SweepPlan};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct GridFile {
    format_version: u32,
    plan: SweepPlan,
    cells: Vec<GridCell>,
}

pub fn save_run(grid: &PhaseGrid, path: &Path) -> Result<()> {
    let file = GridFile {
        format_version: FORMAT_VERSION,
        plan: grid.plan.clone(),
        cells: grid.cells.clone(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::MalformedFile(format!("serialize: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_run(path: &Path) -> Result<PhaseGrid> {
    let text = fs::read_to_string(path)?;
    let file: GridFile =
        serde_json::from_str(&text).map_err(|e| Error::MalformedFile(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: file.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let expected = file.plan.delta_axis.len() * file.plan.structure_axis.len();
    if file.cells.len() != expected {
        return Err(Error::MalformedFile(format!(
            "grid has {} cells, plan implies {expected}",
            file.cells.len()
        )));
    }
    Ok(PhaseGrid {
        plan: file.plan,
        cells: file.cells,
    })
}

/// Canonical JSON of the cells array, for byte-level determinism checks.
pub fn cells_json(grid: &PhaseGrid) -> String {
    serde_json::to_string(&grid.cells).expect("cells serialize")
}
