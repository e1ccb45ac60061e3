//! Command implementations behind the `sdsm` binary.
//!
//! Every subcommand is a plain function from its argument struct to a summary,
//! so that tests can drive them without spawning a process.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use sdsm_core::io::{
    read_constraints, read_edgelist, write_backbone, write_constraints, write_edgelist,
    write_projection, write_pvalues,
};
use sdsm_core::nullmodel::FitResult;
use sdsm_core::oracle::{enumerate_space, first_member, q_deviation, DeviationReport, OracleLimits};
use sdsm_core::{
    extract_backbone, predict_q, random_bipartite, two_block, ConstraintMask, IncidenceMatrix,
    Model, SpaceSpec, SpaceSummary, TwoBlockSpec,
};

pub mod margins;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "sdsm", version, about = "Backbones of bipartite projections under the stochastic degree sequence model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the backbone of a bipartite projection.
    Extract(ExtractArgs),
    /// Enumerate a small fixed-margin space and compare estimated to true Q.
    Oracle(OracleArgs),
    /// Write a synthetic network (and its constraints) as CSV.
    Generate(GenerateArgs),
    /// Write the weighted projection of a bipartite edgelist.
    Project(ProjectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Sdsm,
    SdsmEc,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Sdsm => Model::Sdsm,
            ModelArg::SdsmEc => Model::SdsmEc,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    /// Bipartite edgelist CSV (`agent,artifact`).
    #[arg(long)]
    pub input: PathBuf,
    /// Constraints CSV (`agent,artifact,constraint`).
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Backbone CSV (`agent_i,agent_j`); standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Dense p-value matrix CSV.
    #[arg(long)]
    pub pvalues: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Defaults to sdsm-ec when constraints are given, sdsm otherwise.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Space file: `rows,...`, `cols,...`, `prohibited,i,k`, `required,i,k` lines.
    #[arg(long)]
    pub margins: PathBuf,
    /// Report CSV (`record,i,j,value`); standard output when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorKind {
    TwoBlock,
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = GeneratorKind::TwoBlock)]
    pub kind: GeneratorKind,
    #[arg(long, default_value_t = 6)]
    pub agents_per_group: usize,
    #[arg(long, default_value_t = 10)]
    pub artifacts_per_group: usize,
    /// Within-group density (two-block) or cell density (random).
    #[arg(long, default_value_t = 0.8)]
    pub density: f64,
    /// Rows of a random network.
    #[arg(long, default_value_t = 10)]
    pub rows: usize,
    /// Columns of a random network.
    #[arg(long, default_value_t = 10)]
    pub cols: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Edgelist CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Constraints CSV to write (two-block only).
    #[arg(long)]
    pub constraints: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Weighted edgelist (`agent_i,agent_j,weight`); standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes to `path`, or standard output when `None`.
fn with_output<F>(path: Option<&Path>, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match path {
        Some(p) => {
            let mut w = create(p)?;
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn read_input(path: &Path) -> Result<IncidenceMatrix> {
    let edges =
        read_edgelist(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    if edges.duplicates > 0 {
        log::warn!(
            "{}: {} duplicate edge(s) collapsed",
            path.display(),
            edges.duplicates
        );
    }
    Ok(edges.matrix)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractSummary {
    pub agents: usize,
    pub artifacts: usize,
    pub tested: usize,
    pub retained: usize,
    pub model: Model,
    pub alpha: f64,
    pub fit: FitResult,
}

impl ExtractSummary {
    pub fn write_to(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "agents: {}", self.agents)?;
        writeln!(w, "artifacts: {}", self.artifacts)?;
        writeln!(w, "model: {}", self.model)?;
        writeln!(w, "alpha: {}", self.alpha)?;
        writeln!(w, "edges tested: {}", self.tested)?;
        writeln!(w, "edges retained: {}", self.retained)?;
        writeln!(
            w,
            "fit: beta0={} beta1={} beta2={} iterations={} converged={}{}",
            self.fit.beta0,
            self.fit.beta1,
            self.fit.beta2,
            self.fit.iterations,
            self.fit.converged,
            if self.fit.degenerate { " (degenerate)" } else { "" }
        )
    }
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<ExtractSummary> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        bail!("--alpha must lie strictly between 0 and 1, got {}", args.alpha);
    }
    let b = read_input(&args.input)?;
    let mask = match &args.constraints {
        Some(path) => read_constraints(open(path)?, &b)
            .with_context(|| format!("reading {}", path.display()))?,
        None => ConstraintMask::free_like(&b),
    };
    let model = match (args.model, &args.constraints) {
        (Some(m), _) => m.into(),
        (None, Some(_)) => Model::SdsmEc,
        (None, None) => Model::Sdsm,
    };
    let backbone = extract_backbone(&b, &mask, args.alpha, model)?;
    if !backbone.fit().converged {
        log::warn!(
            "logistic fit did not converge after {} iterations; p-values use clamped probabilities",
            backbone.fit().iterations
        );
    }
    with_output(args.output.as_deref(), |w| Ok(write_backbone(w, &backbone)?))?;
    if let Some(path) = &args.pvalues {
        let mut w = create(path)?;
        write_pvalues(&mut w, backbone.agent_labels(), backbone.pvalues())?;
        w.flush()?;
    }
    Ok(ExtractSummary {
        agents: b.n_agents(),
        artifacts: b.n_artifacts(),
        tested: backbone.n_tested(),
        retained: backbone.n_edges(),
        model,
        alpha: args.alpha,
        fit: *backbone.fit(),
    })
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub spec: SpaceSpec,
    pub summary: SpaceSummary,
    pub estimated: Array2<f64>,
    pub deviation: DeviationReport,
}

/// Enumerates the space, estimates Q from its first member and compares.
///
/// The logistic estimate depends on `B` only through the margins and the free
/// cells' sufficient statistics, which are identical for every member.
pub fn run_oracle(spec: &SpaceSpec) -> Result<OracleOutcome> {
    let summary = enumerate_space(spec)?;
    if summary.is_empty() {
        bail!("infeasible specification: no matrix has these margins and constraints");
    }
    let limits = OracleLimits::default();
    let member = first_member(spec, &limits)?.context("space unexpectedly empty")?;
    let b = IncidenceMatrix::from_cells(member)?;
    let fit = sdsm_core::fit_logistic(&b, spec.mask())?;
    let q = predict_q(&fit, &b.row_sums(), &b.col_sums(), spec.mask())?;
    let deviation = q_deviation(&q, &summary, spec.mask())?;
    Ok(OracleOutcome {
        spec: spec.clone(),
        summary,
        estimated: q.values().clone(),
        deviation,
    })
}

pub fn write_oracle_report(w: &mut dyn Write, outcome: &OracleOutcome) -> Result<()> {
    let mut csv = Vec::new();
    let mut push = |record: &str, i: String, j: String, value: String| {
        csv.push([record.to_owned(), i, j, value]);
    };
    push(
        "cardinality",
        String::new(),
        String::new(),
        outcome.summary.cardinality.to_string(),
    );
    for ((i, k), v) in outcome.summary.true_q.indexed_iter() {
        push("true_q", i.to_string(), k.to_string(), v.to_string());
    }
    for ((i, k), v) in outcome.estimated.indexed_iter() {
        push("estimated_q", i.to_string(), k.to_string(), v.to_string());
    }
    for c in &outcome.deviation.cells {
        push(
            "deviation",
            c.row.to_string(),
            c.col.to_string(),
            c.deviation.to_string(),
        );
    }
    push(
        "mean_deviation",
        String::new(),
        String::new(),
        outcome.deviation.mean.to_string(),
    );
    push(
        "max_deviation",
        String::new(),
        String::new(),
        outcome.deviation.max.to_string(),
    );
    let h = &outcome.deviation.histogram;
    for (b, count) in h.counts.iter().enumerate() {
        push(
            "histogram",
            h.edges[b].to_string(),
            h.edges[b + 1].to_string(),
            count.to_string(),
        );
    }
    writeln!(w, "record,i,j,value")?;
    for row in csv {
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<OracleOutcome> {
    let text = std::fs::read_to_string(&args.margins)
        .with_context(|| format!("cannot read {}", args.margins.display()))?;
    let spec = margins::parse_space(&text)
        .with_context(|| format!("reading {}", args.margins.display()))?;
    let outcome = run_oracle(&spec)?;
    with_output(args.report.as_deref(), |w| write_oracle_report(w, &outcome))?;
    Ok(outcome)
}

/// Drops agents and artifacts without any edge, which an edgelist cannot carry.
pub fn drop_isolated(
    b: &IncidenceMatrix,
    mask: &ConstraintMask,
) -> Result<(IncidenceMatrix, ConstraintMask)> {
    let rows: Vec<usize> = (0..b.n_agents())
        .filter(|&i| b.row_sums()[i] > 0)
        .collect();
    let cols: Vec<usize> = (0..b.n_artifacts())
        .filter(|&k| b.col_sums()[k] > 0)
        .collect();
    if rows.len() == b.n_agents() && cols.len() == b.n_artifacts() {
        return Ok((b.clone(), mask.clone()));
    }
    if rows.is_empty() {
        bail!("generated network has no edges");
    }
    log::warn!(
        "dropping {} isolated agent(s) and {} isolated artifact(s) that an edgelist cannot represent",
        b.n_agents() - rows.len(),
        b.n_artifacts() - cols.len()
    );
    let cells = Array2::from_shape_fn((rows.len(), cols.len()), |(i, k)| b.get(rows[i], cols[k]));
    let states = Array2::from_shape_fn((rows.len(), cols.len()), |(i, k)| mask.get(rows[i], cols[k]));
    let sub = IncidenceMatrix::new(
        rows.iter().map(|&i| b.agent_labels()[i].clone()).collect(),
        cols.iter().map(|&k| b.artifact_labels()[k].clone()).collect(),
        cells,
    )?;
    Ok((sub, ConstraintMask::from_states(states)))
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub matrix: IncidenceMatrix,
    pub mask: ConstraintMask,
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<GenerateSummary> {
    let (b, mask) = match args.kind {
        GeneratorKind::TwoBlock => two_block(&TwoBlockSpec {
            agents_per_group: args.agents_per_group,
            artifacts_per_group: args.artifacts_per_group,
            within_density: args.density,
            seed: args.seed,
        })?,
        GeneratorKind::Random => {
            if args.constraints.is_some() {
                bail!("--constraints is only produced by the two-block generator");
            }
            let b = random_bipartite(args.rows, args.cols, args.density, args.seed)?;
            let mask = ConstraintMask::free_like(&b);
            (b, mask)
        }
    };
    let (b, mask) = drop_isolated(&b, &mask)?;
    let mut w = create(&args.output)?;
    write_edgelist(&mut w, &b)?;
    w.flush()?;
    if let Some(path) = &args.constraints {
        let mut w = create(path)?;
        write_constraints(&mut w, &b, &mask)?;
        w.flush()?;
    }
    Ok(GenerateSummary { matrix: b, mask })
}

pub fn cmd_project(args: &ProjectArgs) -> Result<()> {
    let b = read_input(&args.input)?;
    let projection = b.project();
    with_output(args.output.as_deref(), |w| Ok(write_projection(w, &projection)?))
}

/// Runs a parsed command line; summaries go to standard output unless the
/// command's data already does.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Extract(args) => {
            let summary = cmd_extract(args)?;
            if args.output.is_some() {
                summary.write_to(&mut io::stdout().lock())?;
            } else {
                summary.write_to(&mut io::stderr().lock())?;
            }
        }
        Command::Oracle(args) => {
            let outcome = cmd_oracle(args)?;
            let mut out: Box<dyn Write> = if args.report.is_some() {
                Box::new(io::stdout().lock())
            } else {
                Box::new(io::stderr().lock())
            };
            writeln!(out, "cardinality: {}", outcome.summary.cardinality)?;
            writeln!(out, "mean deviation: {}", outcome.deviation.mean)?;
            writeln!(out, "max deviation: {}", outcome.deviation.max)?;
        }
        Command::Generate(args) => {
            let g = cmd_generate(args)?;
            println!(
                "wrote {} edges ({} agents, {} artifacts, {} constrained cells)",
                g.matrix.n_edges(),
                g.matrix.n_agents(),
                g.matrix.n_artifacts(),
                g.mask.constrained().count()
            );
        }
        Command::Project(args) => cmd_project(args)?,
    }
    Ok(())
}
