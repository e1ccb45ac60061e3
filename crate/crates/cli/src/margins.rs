//! Space files for the `oracle` command.
//!
//! ```text
//! # margins (1,1,2,2) x (1,1,2,2), corner prohibited
//! rows,1,1,2,2
//! cols,1,1,2,2
//! prohibited,0,0
//! required,3,3
//! ```
//!
//! Indices are 0-based. Blank lines and `#` comments are ignored.

use anyhow::{anyhow, bail, Context, Result};
use sdsm_core::{CellState, ConstraintMask, DegreeSequence, SpaceSpec};

fn numbers(fields: &[&str], line: usize) -> Result<Vec<u32>> {
    fields
        .iter()
        .map(|f| {
            f.trim()
                .parse::<u32>()
                .map_err(|e| anyhow!("line {line}: bad number {f:?}: {e}"))
        })
        .collect()
}

pub fn parse_space(text: &str) -> Result<SpaceSpec> {
    let mut rows = None;
    let mut cols = None;
    let mut cells = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        match fields[0] {
            "rows" => rows = Some(numbers(&fields[1..], line)?),
            "cols" => cols = Some(numbers(&fields[1..], line)?),
            kind @ ("prohibited" | "required") => {
                let idx = numbers(&fields[1..], line)?;
                if idx.len() != 2 {
                    bail!("line {line}: expected `{kind},<row>,<col>`");
                }
                let state: CellState = kind.parse().map_err(|e: String| anyhow!(e))?;
                cells.push((line, idx[0] as usize, idx[1] as usize, state));
            }
            other => bail!("line {line}: unknown record {other:?}"),
        }
    }
    let rows = rows.context("missing `rows` line")?;
    let cols = cols.context("missing `cols` line")?;
    let mut mask = ConstraintMask::free(rows.len(), cols.len());
    for (line, i, k, state) in cells {
        if i >= rows.len() || k >= cols.len() {
            bail!("line {line}: cell ({i}, {k}) outside {}x{}", rows.len(), cols.len());
        }
        mask.set(i, k, state);
    }
    Ok(SpaceSpec::new(
        DegreeSequence::rows(rows),
        DegreeSequence::cols(cols),
        mask,
    )?)
}
