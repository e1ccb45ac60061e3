//! CSV file formats.
//!
//! | file            | header                          |
//! |-----------------|---------------------------------|
//! | edgelist        | `agent,artifact`                |
//! | constraints     | `agent,artifact,constraint`     |
//! | backbone        | `agent_i,agent_j`               |
//! | projection      | `agent_i,agent_j,weight`        |
//! | p-value matrix  | `,label_1,...,label_r` (dense)  |
//!
//! Agents and artifacts are indexed in order of first appearance in the
//! edgelist. Undirected edges are written once, smaller label first, in sorted
//! order.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use ndarray::Array2;

use crate::bipartite::{CellState, ConstraintMask, IncidenceMatrix, Projection};
use crate::error::{Axis, Error, Result};
use crate::extract::Backbone;

pub const EDGELIST_HEADER: [&str; 2] = ["agent", "artifact"];
pub const CONSTRAINTS_HEADER: [&str; 3] = ["agent", "artifact", "constraint"];
pub const BACKBONE_HEADER: [&str; 2] = ["agent_i", "agent_j"];
pub const PROJECTION_HEADER: [&str; 3] = ["agent_i", "agent_j", "weight"];

/// An incidence matrix read from an edgelist.
#[derive(Debug, Clone)]
pub struct EdgeList {
    pub matrix: IncidenceMatrix,
    /// Repeated `(agent, artifact)` rows collapsed into a single 1.
    pub duplicates: usize,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?.clone();
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", expected.join(","), found.join(",")),
        });
    }
    Ok(())
}

/// Attaches the line number to record-level CSV errors.
fn record_error(e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::Parse {
            line: pos.line(),
            message: e.to_string(),
        },
        None => Error::Csv(e),
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn field<'r>(record: &'r csv::StringRecord, idx: usize, name: &str) -> Result<&'r str> {
    match record.get(idx) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(Error::Parse {
            line: line_of(record),
            message: format!("empty {name} field"),
        }),
    }
}

fn intern(labels: &mut Vec<String>, index: &mut HashMap<String, usize>, label: &str) -> usize {
    match index.entry(label.to_owned()) {
        Entry::Occupied(e) => *e.get(),
        Entry::Vacant(e) => {
            labels.push(label.to_owned());
            *e.insert(labels.len() - 1)
        }
    }
}

/// Reads a bipartite edgelist with header `agent,artifact`.
pub fn read_edgelist<R: Read>(input: R) -> Result<EdgeList> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &EDGELIST_HEADER)?;
    let mut agents = Vec::new();
    let mut artifacts = Vec::new();
    let mut agent_index = HashMap::new();
    let mut artifact_index = HashMap::new();
    let mut edges = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(record_error)?;
        let agent = field(&record, 0, "agent")?;
        let artifact = field(&record, 1, "artifact")?;
        let i = intern(&mut agents, &mut agent_index, agent);
        let k = intern(&mut artifacts, &mut artifact_index, artifact);
        edges.push((i, k, line_of(&record)));
    }
    if edges.is_empty() {
        return Err(Error::EmptyDimension);
    }
    let mut cells = Array2::<u8>::zeros((agents.len(), artifacts.len()));
    let mut duplicates = 0;
    for (i, k, line) in edges {
        if cells[[i, k]] == 1 {
            duplicates += 1;
            log::warn!(
                "line {line}: duplicate edge ({}, {}) collapsed",
                agents[i],
                artifacts[k]
            );
        }
        cells[[i, k]] = 1;
    }
    Ok(EdgeList {
        matrix: IncidenceMatrix::new(agents, artifacts, cells)?,
        duplicates,
    })
}

/// Reads constraints with header `agent,artifact,constraint` against the labels of `b`.
///
/// Labels that do not occur in `b` are errors; repeating a cell with the same
/// state is allowed, with conflicting states it is an error.
pub fn read_constraints<R: Read>(input: R, b: &IncidenceMatrix) -> Result<ConstraintMask> {
    let agent_index: HashMap<&str, usize> = b
        .agent_labels()
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let artifact_index: HashMap<&str, usize> = b
        .artifact_labels()
        .iter()
        .enumerate()
        .map(|(k, l)| (l.as_str(), k))
        .collect();
    let mut rdr = reader(input);
    check_header(&mut rdr, &CONSTRAINTS_HEADER)?;
    let mut mask = ConstraintMask::free_like(b);
    for record in rdr.records() {
        let record = record.map_err(record_error)?;
        let line = line_of(&record);
        let agent = field(&record, 0, "agent")?;
        let artifact = field(&record, 1, "artifact")?;
        let state: CellState = field(&record, 2, "constraint")?
            .parse()
            .map_err(|message| Error::Parse { line, message })?;
        if state == CellState::Free {
            return Err(Error::Parse {
                line,
                message: "constraint must be prohibited or required".into(),
            });
        }
        let i = *agent_index.get(agent).ok_or_else(|| Error::UnknownLabel {
            line,
            axis: Axis::Row,
            label: agent.to_owned(),
        })?;
        let k = *artifact_index.get(artifact).ok_or_else(|| Error::UnknownLabel {
            line,
            axis: Axis::Column,
            label: artifact.to_owned(),
        })?;
        let previous = mask.get(i, k);
        if previous != CellState::Free && previous != state {
            return Err(Error::Parse {
                line,
                message: format!("({agent}, {artifact}) is both {previous} and {state}"),
            });
        }
        mask.set(i, k, state);
    }
    Ok(mask)
}

fn writer<W: Write>(output: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(output)
}

/// Writes every 1 of `b` as an `agent,artifact` row, row-major.
pub fn write_edgelist<W: Write>(output: W, b: &IncidenceMatrix) -> Result<()> {
    let mut w = writer(output);
    w.write_record(EDGELIST_HEADER)?;
    for ((i, k), &v) in b.cells().indexed_iter() {
        if v == 1 {
            w.write_record([&b.agent_labels()[i], &b.artifact_labels()[k]])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the constrained cells of `mask`, row-major.
pub fn write_constraints<W: Write>(output: W, b: &IncidenceMatrix, mask: &ConstraintMask) -> Result<()> {
    if b.dim() != mask.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: mask.dim(),
        });
    }
    let mut w = writer(output);
    w.write_record(CONSTRAINTS_HEADER)?;
    for (i, k, state) in mask.constrained() {
        w.write_record([
            b.agent_labels()[i].as_str(),
            b.artifact_labels()[k].as_str(),
            state.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_backbone<W: Write>(output: W, backbone: &Backbone) -> Result<()> {
    let mut w = writer(output);
    w.write_record(BACKBONE_HEADER)?;
    for (a, b) in backbone.edge_labels() {
        w.write_record([a, b])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_backbone<R: Read>(input: R) -> Result<Vec<(String, String)>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &BACKBONE_HEADER)?;
    let mut edges = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(record_error)?;
        edges.push((
            field(&record, 0, "agent_i")?.to_owned(),
            field(&record, 1, "agent_j")?.to_owned(),
        ));
    }
    Ok(edges)
}

fn ordered_pair<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Writes nonzero off-diagonal projection weights.
pub fn write_projection<W: Write>(output: W, projection: &Projection) -> Result<()> {
    let labels = projection.agent_labels();
    let mut rows = BTreeMap::new();
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            let weight = projection.weight(i, j);
            if weight > 0 {
                rows.insert(ordered_pair(&labels[i], &labels[j]), weight);
            }
        }
    }
    let mut w = writer(output);
    w.write_record(PROJECTION_HEADER)?;
    for ((a, b), weight) in rows {
        w.write_record([a, b, &weight.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Dense labelled matrix; NaN entries (the diagonal) are left empty.
///
/// Values use Rust's shortest round-trip float formatting, so reading the file
/// back reproduces every entry bit for bit.
pub fn write_pvalues<W: Write>(output: W, labels: &[String], pvalues: &Array2<f64>) -> Result<()> {
    let n = labels.len();
    if pvalues.dim() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: (n, n),
            found: pvalues.dim(),
        });
    }
    let mut w = writer(output);
    w.write_record(std::iter::once("").chain(labels.iter().map(String::as_str)))?;
    for (i, label) in labels.iter().enumerate() {
        let mut record = vec![label.clone()];
        record.extend(pvalues.row(i).iter().map(|p| {
            if p.is_nan() {
                String::new()
            } else {
                p.to_string()
            }
        }));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pvalues<R: Read>(input: R) -> Result<(Vec<String>, Array2<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    let labels: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let n = labels.len();
    let mut pvalues = Array2::from_elem((n, n), f64::NAN);
    let mut row = 0;
    for record in rdr.records() {
        let record = record.map_err(record_error)?;
        let line = line_of(&record);
        if row >= n || record.get(0) != Some(labels[row].as_str()) {
            return Err(Error::Parse {
                line,
                message: "row labels must repeat the header labels in order".into(),
            });
        }
        for (j, cell) in record.iter().skip(1).enumerate() {
            if !cell.is_empty() {
                pvalues[[row, j]] = cell.parse().map_err(|e| Error::Parse {
                    line,
                    message: format!("bad p-value {cell:?}: {e}"),
                })?;
            }
        }
        row += 1;
    }
    if row != n {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected {n} rows, found {row}"),
        });
    }
    Ok((labels, pvalues))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{two_block, TwoBlockSpec};

    #[test]
    fn edgelist_first_appearance_and_duplicates() {
        let text = "agent,artifact\nbob,x\nann,y\nbob,x\nann,x\n";
        let el = read_edgelist(text.as_bytes()).unwrap();
        assert_eq!(el.duplicates, 1);
        assert_eq!(el.matrix.agent_labels(), &["bob", "ann"]);
        assert_eq!(el.matrix.artifact_labels(), &["x", "y"]);
        assert_eq!(el.matrix.cells(), &ndarray::arr2(&[[1, 0], [1, 1]]));
    }

    #[test]
    fn malformed_edgelist_reports_line() {
        let err = read_edgelist("agent,artifact\na,x\nb\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = read_edgelist("agent,artifact\na,x\n,y\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(matches!(
            read_edgelist("who,what\na,x\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(read_edgelist("agent,artifact\n".as_bytes()).is_err());
    }

    #[test]
    fn constraints_resolve_labels() {
        let b = read_edgelist("agent,artifact\na,x\nb,y\n".as_bytes()).unwrap().matrix;
        let mask = read_constraints(
            "agent,artifact,constraint\na,y,prohibited\nb,y,required\n".as_bytes(),
            &b,
        )
        .unwrap();
        assert_eq!(mask.get(0, 1), CellState::Prohibited);
        assert_eq!(mask.get(1, 1), CellState::Required);
        assert_eq!(mask.get(0, 0), CellState::Free);

        let err = read_constraints("agent,artifact,constraint\nc,x,prohibited\n".as_bytes(), &b)
            .unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { line: 2, axis: Axis::Row, .. }));
        let err = read_constraints("agent,artifact,constraint\na,x,maybe\n".as_bytes(), &b).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = read_constraints(
            "agent,artifact,constraint\na,y,prohibited\na,y,required\n".as_bytes(),
            &b,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn generated_network_round_trips() {
        let (b, mask) = two_block(&TwoBlockSpec {
            agents_per_group: 3,
            artifacts_per_group: 3,
            within_density: 1.0,
            seed: 0,
        })
        .unwrap();
        let mut edges = Vec::new();
        write_edgelist(&mut edges, &b).unwrap();
        let mut constraints = Vec::new();
        write_constraints(&mut constraints, &b, &mask).unwrap();
        let back = read_edgelist(edges.as_slice()).unwrap().matrix;
        assert_eq!(back, b);
        assert_eq!(read_constraints(constraints.as_slice(), &back).unwrap(), mask);
    }

    #[test]
    fn pvalue_matrix_round_trips_exactly() {
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut p = Array2::from_elem((3, 3), f64::NAN);
        for (i, j, v) in [(0, 1, 0.1 + 0.2), (0, 2, 1e-300), (1, 2, 1.0 / 3.0)] {
            p[[i, j]] = v;
            p[[j, i]] = v;
        }
        let mut out = Vec::new();
        write_pvalues(&mut out, &labels, &p).unwrap();
        let (l2, p2) = read_pvalues(out.as_slice()).unwrap();
        assert_eq!(l2, labels);
        for (x, y) in p.iter().zip(p2.iter()) {
            assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
        }
    }

    #[test]
    fn projection_rows_sorted_and_nonzero() {
        let b = read_edgelist("agent,artifact\nz,x\na,x\nm,y\na,y\n".as_bytes()).unwrap().matrix;
        let mut out = Vec::new();
        write_projection(&mut out, &b.project()).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "agent_i,agent_j,weight\na,m,1\na,z,1\n"
        );
    }
}
