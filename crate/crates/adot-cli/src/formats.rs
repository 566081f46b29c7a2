//! JSON file formats. All human-facing references use node/leaf ids;
//! indices never appear in files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use adot_core::barycenter::CandidateSupport;
use adot_core::hedging::Payoff;
use adot_core::process::NodeSpec;
use adot_core::{CostFunction, Coupling, FilteredProcess};

#[derive(Debug, Serialize, Deserialize)]
pub struct ProcessFile {
    pub dimension: usize,
    pub horizon: usize,
    pub nodes: Vec<NodeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NodeEntry {
    pub id: String,
    pub t: usize,
    pub value: Vec<f64>,
    /// Conditional on the parent; unconditional for `t = 1`.
    pub prob: f64,
    pub parent: Option<String>,
}

pub fn load_process(path: &Path) -> Result<FilteredProcess> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let file: ProcessFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    let specs = file
        .nodes
        .into_iter()
        .map(|n| NodeSpec {
            id: n.id,
            t: n.t,
            value: n.value,
            cond_prob: n.prob,
            parent: n.parent,
        })
        .collect();
    FilteredProcess::from_nodes(file.dimension, file.horizon, specs)
        .map_err(|e| anyhow!("{}: {e}", path.display()))
}

pub fn process_to_file(p: &FilteredProcess) -> ProcessFile {
    let nodes = (0..p.node_count())
        .map(|i| {
            let n = p.node(i);
            NodeEntry {
                id: n.id.clone(),
                t: n.t,
                value: n.value.clone(),
                prob: n.cond_prob,
                parent: n.parent.map(|pi| p.node(pi).id.clone()),
            }
        })
        .collect();
    ProcessFile { dimension: p.dimension(), horizon: p.horizon(), nodes }
}

pub fn save_process(p: &FilteredProcess, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&process_to_file(p))?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CouplingFile {
    /// Process file paths, resolved relative to this file's directory.
    pub marginals: Vec<String>,
    pub mass: Vec<MassEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MassEntry {
    /// One terminal node id per marginal, in marginal order.
    pub paths: Vec<String>,
    pub p: f64,
}

fn leaf_of(m: &FilteredProcess, id: &str, what: &str) -> Result<usize> {
    m.leaf_by_id(id)
        .ok_or_else(|| anyhow!("{what}: unknown terminal node id '{id}'"))
}

pub fn load_coupling(path: &Path) -> Result<Coupling> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let file: CouplingFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    let base: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let marginals: Vec<FilteredProcess> = file
        .marginals
        .iter()
        .map(|f| load_process(&base.join(f)))
        .collect::<Result<_>>()?;
    let mut mass = BTreeMap::new();
    for entry in &file.mass {
        if entry.paths.len() != marginals.len() {
            bail!(
                "mass entry with {} path ids for {} marginals",
                entry.paths.len(),
                marginals.len()
            );
        }
        let tuple: Vec<usize> = entry
            .paths
            .iter()
            .zip(marginals.iter())
            .map(|(id, m)| leaf_of(m, id, "coupling mass"))
            .collect::<Result<_>>()?;
        *mass.entry(tuple).or_insert(0.0) += entry.p;
    }
    Coupling::new(marginals, mass).map_err(|e| anyhow!("{}: {e}", path.display()))
}

pub fn coupling_to_file(pi: &Coupling, marginal_refs: Vec<String>) -> CouplingFile {
    let mass = pi
        .mass
        .iter()
        .map(|(tuple, &p)| MassEntry {
            paths: tuple
                .iter()
                .zip(pi.marginals.iter())
                .map(|(&l, m)| {
                    let node = m.prefix_node(l, m.horizon());
                    m.node(node).id.clone()
                })
                .collect(),
            p,
        })
        .collect();
    CouplingFile { marginals: marginal_refs, mass }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostFile {
    /// `Σ_t Σ_{i<j} ‖x^i_t − x^j_t‖_p^p`, `p ∈ {1, 2}`.
    LpSum { p: u8 },
    /// Explicit table over terminal-node id tuples.
    Table { entries: Vec<CostEntry> },
    /// `1` when all terminal values coincide.
    TerminalIndicator,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CostEntry {
    pub paths: Vec<String>,
    pub c: f64,
}

pub fn load_cost(path: &Path, marginals: &[&FilteredProcess]) -> Result<CostFunction> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let file: CostFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    match file {
        CostFile::LpSum { p } => Ok(CostFunction::LpSum { p }),
        CostFile::TerminalIndicator => Ok(CostFunction::TerminalIndicator),
        CostFile::Table { entries } => {
            let mut table = BTreeMap::new();
            for e in entries {
                if e.paths.len() != marginals.len() {
                    bail!(
                        "cost entry with {} path ids for {} marginals",
                        e.paths.len(),
                        marginals.len()
                    );
                }
                let tuple: Vec<usize> = e
                    .paths
                    .iter()
                    .zip(marginals.iter())
                    .map(|(id, m)| leaf_of(m, id, "cost table"))
                    .collect::<Result<_>>()?;
                table.insert(tuple, e.c);
            }
            Ok(CostFunction::Table(table))
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PayoffFile {
    pub entries: Vec<PayoffEntry>,
    /// Optional per-marginal growth-bound tables, terminal node id to
    /// bound value.
    pub bounds: Option<Vec<BTreeMap<String, f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PayoffEntry {
    pub paths: Vec<String>,
    pub xi: f64,
}

pub fn load_payoff(path: &Path, marginals: &[&FilteredProcess]) -> Result<Payoff> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let file: PayoffFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    let mut entries = BTreeMap::new();
    for e in &file.entries {
        if e.paths.len() != marginals.len() {
            bail!(
                "payoff entry with {} path ids for {} marginals",
                e.paths.len(),
                marginals.len()
            );
        }
        let tuple: Vec<usize> = e
            .paths
            .iter()
            .zip(marginals.iter())
            .map(|(id, m)| leaf_of(m, id, "payoff"))
            .collect::<Result<_>>()?;
        entries.insert(tuple, e.xi);
    }
    let bounds = match &file.bounds {
        None => None,
        Some(tables) => {
            if tables.len() != marginals.len() {
                bail!("{} bound tables for {} marginals", tables.len(), marginals.len());
            }
            let mut out = Vec::new();
            for (table, m) in tables.iter().zip(marginals.iter()) {
                let mut per_leaf = vec![0.0; m.leaf_count()];
                if table.len() != m.leaf_count() {
                    bail!("bound table with {} entries for {} leaves", table.len(), m.leaf_count());
                }
                for (id, &v) in table {
                    per_leaf[leaf_of(m, id, "payoff bounds")?] = v;
                }
                out.push(per_leaf);
            }
            Some(out)
        }
    };
    Ok(Payoff { entries, bounds })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EventFile {
    /// Each tuple: one terminal node id per marginal.
    pub tuples: Vec<Vec<String>>,
}

pub fn load_event(path: &Path, marginals: &[&FilteredProcess]) -> Result<Vec<Vec<usize>>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let file: EventFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    file.tuples
        .iter()
        .map(|ids| {
            if ids.len() != marginals.len() {
                bail!("event tuple with {} ids for {} marginals", ids.len(), marginals.len());
            }
            ids.iter()
                .zip(marginals.iter())
                .map(|(id, m)| leaf_of(m, id, "event"))
                .collect()
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CandidateFile {
    pub paths: Vec<CandidatePath>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CandidatePath {
    pub id: String,
    /// `T × d` value sequence.
    pub values: Vec<Vec<f64>>,
}

pub fn load_candidates(path: &Path) -> Result<CandidateSupport> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let file: CandidateFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    let (ids, paths) = file.paths.into_iter().map(|p| (p.id, p.values)).unzip();
    CandidateSupport::new(ids, paths).map_err(|e| anyhow!("{}: {e}", path.display()))
}
