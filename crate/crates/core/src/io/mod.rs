//! On-disk dataset format and the planted-rule generator.
//!
//! A dataset directory holds:
//!
//! - `schema.txt`: `nodetype <name> <feature_dim>`, `relation <name> <src>
//!   <dst> <directed:0|1>`, `snapshots <T>`, `granularity <label>` and one
//!   `nodecount <type> <t> <count>` line per type and snapshot. `#` starts
//!   a comment.
//! - `edges.tsv`: `src_type  src_index  relation  dst_type  dst_index
//!   snapshot`, tab separated, snapshots 1-based.
//! - `features/<type>.csv` for each type with features: a header line with
//!   the column count, then one comma-separated row per node.
//!
//! Floats are written in Rust's shortest round-trip form, so save and load
//! are bit-exact.

mod synth;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{HeteroSnapshot, NodeType, Relation, TemporalHeteroGraph};
use crate::numerics::Tensor;

pub use synth::{parse_synth_spec, rule_scorer, synth_generate, OracleLabels, PlantedRule, SynthSpec};

pub const SCHEMA_FILE: &str = "schema.txt";
pub const EDGE_FILE: &str = "edges.tsv";
pub const FEATURE_DIR: &str = "features";

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Validation(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// File locations of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub schema: PathBuf,
    pub edges: PathBuf,
    /// Feature file per node type name.
    pub features: BTreeMap<String, PathBuf>,
}

impl DatasetManifest {
    /// The standard layout under `dir`. Feature paths are filled in for the
    /// types the schema declares with features once it is read.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            schema: dir.join(SCHEMA_FILE),
            edges: dir.join(EDGE_FILE),
            features: BTreeMap::new(),
        }
    }

    fn feature_path(&self, ty: &str) -> PathBuf {
        self.features.get(ty).cloned().unwrap_or_else(|| {
            self.schema
                .parent()
                .unwrap_or(Path::new("."))
                .join(FEATURE_DIR)
                .join(format!("{ty}.csv"))
        })
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(path: &Path, line: usize, what: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| parse_err(path, line, format!("expected {what}, found `{s}`")))
}

/// Meaningful lines of a text file with their 1-based numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

struct Schema {
    node_types: Vec<NodeType>,
    relations: Vec<Relation>,
    snapshots: usize,
    granularity: String,
    counts: Vec<Vec<usize>>,
}

fn parse_schema(path: &Path, text: &str) -> Result<Schema> {
    let mut node_types: Vec<NodeType> = Vec::new();
    let mut relations: Vec<Relation> = Vec::new();
    let mut snapshots = None;
    let mut granularity = String::new();
    let mut count_lines = Vec::new();
    let type_id = |types: &[NodeType], name: &str| {
        types
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::Schema(format!("unknown node type `{name}`")))
    };
    for (no, line) in lines(text) {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.as_slice() {
            ["nodetype", name, dim] => node_types.push(NodeType {
                id: node_types.len(),
                name: name.to_string(),
                feature_dim: num(path, no, "a feature dimension", dim)?,
            }),
            ["relation", name, src, dst, directed] => {
                let directed = match *directed {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(parse_err(
                            path,
                            no,
                            format!("directed flag must be 0 or 1, found `{other}`"),
                        ))
                    }
                };
                relations.push(Relation {
                    id: relations.len(),
                    name: name.to_string(),
                    src_type: type_id(&node_types, src)?,
                    dst_type: type_id(&node_types, dst)?,
                    directed,
                });
            }
            ["snapshots", t] => snapshots = Some(num::<usize>(path, no, "a snapshot count", t)?),
            ["granularity", rest @ ..] => granularity = rest.join(" "),
            ["nodecount", ty, t, n] => count_lines.push((
                no,
                ty.to_string(),
                num::<usize>(path, no, "a snapshot index", t)?,
                num::<usize>(path, no, "a node count", n)?,
            )),
            _ => return Err(parse_err(path, no, format!("unrecognized schema line `{line}`"))),
        }
    }
    let snapshots = snapshots.ok_or_else(|| Error::Schema("schema lacks a `snapshots` line".into()))?;
    let mut counts = vec![vec![None; node_types.len()]; snapshots];
    for (no, ty, t, n) in count_lines {
        let a = type_id(&node_types, &ty)?;
        if t < 1 || t > snapshots {
            return Err(parse_err(path, no, format!("snapshot {t} outside 1..={snapshots}")));
        }
        counts[t - 1][a] = Some(n);
    }
    let counts = counts
        .into_iter()
        .enumerate()
        .map(|(t, row)| {
            row.into_iter()
                .enumerate()
                .map(|(a, c)| {
                    c.ok_or_else(|| {
                        Error::Schema(format!(
                            "no node count for `{}` at snapshot {}",
                            node_types[a].name,
                            t + 1
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Schema {
        node_types,
        relations,
        snapshots,
        granularity,
        counts,
    })
}

fn parse_features(path: &Path, text: &str, cols: usize, rows: usize) -> Result<Tensor> {
    let mut it = text.lines().enumerate();
    let header = it.next().ok_or_else(|| parse_err(path, 1, "missing header"))?;
    let declared: usize = num(path, 1, "a column count", header.1.trim())?;
    if declared != cols {
        return Err(Error::Validation(format!(
            "{} declares {declared} columns, schema says {cols}",
            path.display()
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    let mut n = 0;
    for (i, line) in it {
        if line.is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != cols {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected {cols} values, found {}", vals.len()),
            ));
        }
        for v in vals {
            data.push(num::<f64>(path, i + 1, "a number", v.trim())?);
        }
        n += 1;
    }
    if n != rows {
        return Err(Error::Validation(format!(
            "{} has {n} rows, the type has {rows} nodes",
            path.display()
        )));
    }
    Tensor::from_vec(rows, cols, data)
}

/// Loads and validates a dataset.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<TemporalHeteroGraph> {
    let schema = parse_schema(&manifest.schema, &read(&manifest.schema)?)?;
    let path = &manifest.edges;
    let text = read(path)?;
    let type_ids: HashMap<&str, usize> = schema.node_types.iter().map(|t| (t.name.as_str(), t.id)).collect();
    let rel_ids: HashMap<(&str, usize, usize), usize> = schema
        .relations
        .iter()
        .map(|r| ((r.name.as_str(), r.src_type, r.dst_type), r.id))
        .collect();
    let mut edges = vec![vec![Vec::new(); schema.relations.len()]; schema.snapshots];
    for (i, line) in text.lines().enumerate() {
        let no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [src_ty, src, rel, dst_ty, dst, t] = f.as_slice() else {
            return Err(parse_err(
                path,
                no,
                format!("expected 6 tab-separated fields, found {}", f.len()),
            ));
        };
        let lookup = |name: &str| {
            type_ids
                .get(name)
                .copied()
                .ok_or_else(|| Error::Schema(format!("line {no}: unknown node type `{name}`")))
        };
        let (a, b) = (lookup(src_ty)?, lookup(dst_ty)?);
        let r = *rel_ids.get(&(*rel, a, b)).ok_or_else(|| {
            Error::Schema(format!(
                "line {no}: unknown relation `{rel}` from `{src_ty}` to `{dst_ty}`"
            ))
        })?;
        let u: usize = num(path, no, "a node index", src)?;
        let v: usize = num(path, no, "a node index", dst)?;
        let t: usize = num(path, no, "a snapshot index", t)?;
        if t < 1 || t > schema.snapshots {
            return Err(Error::Validation(format!(
                "line {no}: snapshot {t} outside 1..={}",
                schema.snapshots
            )));
        }
        edges[t - 1][r].push((u, v));
    }
    let mut features = Vec::with_capacity(schema.node_types.len());
    let last = schema
        .counts
        .last()
        .cloned()
        .unwrap_or_else(|| vec![0; schema.node_types.len()]);
    for ty in &schema.node_types {
        if ty.feature_dim == 0 {
            features.push(None);
            continue;
        }
        let p = manifest.feature_path(&ty.name);
        features.push(Some(parse_features(&p, &read(&p)?, ty.feature_dim, last[ty.id])?));
    }
    let snapshots = edges
        .into_iter()
        .zip(schema.counts)
        .enumerate()
        .map(|(i, (edges, node_counts))| HeteroSnapshot {
            index: i + 1,
            node_counts,
            edges,
        })
        .collect();
    TemporalHeteroGraph::new(
        schema.node_types,
        schema.relations,
        snapshots,
        features,
        schema.granularity,
    )
}

/// Saves `g` under `dir` in the standard layout.
pub fn save_dataset(g: &TemporalHeteroGraph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut schema = String::new();
    for ty in g.node_types() {
        let _ = writeln!(schema, "nodetype {} {}", ty.name, ty.feature_dim);
    }
    let types = g.node_types();
    for r in g.relations() {
        let _ = writeln!(
            schema,
            "relation {} {} {} {}",
            r.name, types[r.src_type].name, types[r.dst_type].name, r.directed as u8
        );
    }
    let _ = writeln!(schema, "snapshots {}", g.num_snapshots());
    if !g.time_granularity().is_empty() {
        let _ = writeln!(schema, "granularity {}", g.time_granularity());
    }
    for s in g.snapshots() {
        for (a, n) in s.node_counts.iter().enumerate() {
            let _ = writeln!(schema, "nodecount {} {} {n}", types[a].name, s.index);
        }
    }
    let mut edges = String::new();
    for s in g.snapshots() {
        for (r, rel) in g.relations().iter().enumerate() {
            for &(u, v) in s.edges(r) {
                let _ = writeln!(
                    edges,
                    "{}\t{u}\t{}\t{}\t{v}\t{}",
                    types[rel.src_type].name, rel.name, types[rel.dst_type].name, s.index
                );
            }
        }
    }
    write_atomic(&dir.join(SCHEMA_FILE), schema.as_bytes())?;
    write_atomic(&dir.join(EDGE_FILE), edges.as_bytes())?;
    for ty in types {
        let Some(f) = g.features(ty.id) else { continue };
        let fdir = dir.join(FEATURE_DIR);
        fs::create_dir_all(&fdir).map_err(|e| Error::io(&fdir, e))?;
        let mut text = format!("{}\n", f.cols());
        for i in 0..f.rows() {
            let row: Vec<String> = f.row_slice(i).iter().map(f64::to_string).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        write_atomic(&fdir.join(format!("{}.csv", ty.name)), text.as_bytes())?;
    }
    Ok(())
}
