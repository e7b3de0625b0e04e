//! Dataset ingestion, BDeu local scores, parent-set enumeration and the
//! score-cache text format shared by every learner.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("column '{0}' is constant after preprocessing (arity 1)")]
    ConstantColumn(String),
    #[error("score file format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
}

/// Categorical dataset with dense per-column state indices.
#[derive(Clone, Debug)]
pub struct Dataset {
    names: Vec<String>,
    arities: Vec<u32>,
    /// Column-major: `columns[var][sample]`.
    columns: Vec<Vec<u32>>,
    m: usize,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn arities(&self) -> &[u32] {
        &self.arities
    }

    pub fn column(&self, i: u32) -> &[u32] {
        &self.columns[i as usize]
    }

    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<u32>>) -> Self {
        let m = columns.first().map_or(0, |c| c.len());
        let arities = columns
            .iter()
            .map(|c| c.iter().copied().max().map_or(1, |v| v + 1))
            .collect();
        Dataset {
            names,
            arities,
            columns,
            m,
        }
    }
}

/// ESS and in-degree bound used when building a cache.
#[derive(Clone, Copy, Debug)]
pub struct ScoringConfig {
    pub ess: f64,
    pub max_in_degree: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            ess: 1.0,
            max_in_degree: 3,
        }
    }
}

/// Reads a comma-separated file with a header row; every cell becomes a dense
/// state index per column, coded by first appearance. With `binarize`, any
/// column with more than two states is thresholded at the median of its codes
/// (values at or below the median go to the low bin).
pub fn load_csv(path: &Path, binarize: bool) -> Result<Dataset, ScoreError> {
    let file = std::fs::File::open(path)?;
    load_csv_reader(BufReader::new(file), binarize)
}

pub fn load_csv_reader<R: Read>(reader: R, binarize: bool) -> Result<Dataset, ScoreError> {
    let reader = BufReader::new(reader);
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(ScoreError::Parse {
                row: 0,
                col: 0,
                msg: "empty file".into(),
            })
        }
    };
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let n = names.len();
    let mut codebooks: Vec<HashMap<String, u32>> = vec![HashMap::new(); n];
    let mut columns: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut row = 1usize;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n {
            return Err(ScoreError::Parse {
                row,
                col: cells.len(),
                msg: format!("expected {n} cells, found {}", cells.len()),
            });
        }
        for (c, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(ScoreError::Parse {
                    row,
                    col: c + 1,
                    msg: "empty cell".into(),
                });
            }
            let book = &mut codebooks[c];
            let next = book.len() as u32;
            let code = *book.entry(cell.to_string()).or_insert(next);
            columns[c].push(code);
        }
        row += 1;
    }
    if columns[0].is_empty() {
        return Err(ScoreError::Parse {
            row: 1,
            col: 0,
            msg: "no data rows".into(),
        });
    }

    if binarize {
        for col in columns.iter_mut() {
            let arity = col.iter().copied().max().unwrap() + 1;
            if arity > 2 {
                let mut sorted: Vec<u32> = col.clone();
                sorted.sort_unstable();
                let m = sorted.len();
                let median = if m % 2 == 1 {
                    sorted[m / 2] as f64
                } else {
                    (sorted[m / 2 - 1] as f64 + sorted[m / 2] as f64) / 2.0
                };
                for v in col.iter_mut() {
                    *v = if (*v as f64) <= median { 0 } else { 1 };
                }
            }
        }
    }

    let ds = Dataset::from_columns(names, columns);
    for (i, &a) in ds.arities().iter().enumerate() {
        if a < 2 {
            return Err(ScoreError::ConstantColumn(ds.names()[i].clone()));
        }
    }
    Ok(ds)
}

/// BDeu local score (log marginal likelihood term) for node `i` with the
/// given parent set. Only observed parent configurations contribute; the
/// Gamma terms of unobserved ones cancel.
pub fn bdeu_local_score(data: &Dataset, i: u32, parents: &[u32], ess: f64) -> f64 {
    debug_assert!(parents.iter().all(|&p| p != i));
    let r_i = data.arities()[i as usize] as f64;
    let q_i: f64 = parents
        .iter()
        .map(|&p| data.arities()[p as usize] as f64)
        .product();
    let alpha_j = ess / q_i;
    let alpha_jk = ess / (q_i * r_i);

    // Contingency pass over observed parent configurations. Ordered maps
    // keep the floating-point summation order, and thus the score bytes,
    // identical across runs.
    let child = data.column(i);
    let mut counts: std::collections::BTreeMap<u64, std::collections::BTreeMap<u32, u64>> =
        std::collections::BTreeMap::new();
    for s in 0..data.m() {
        let mut key = 0u64;
        for &p in parents {
            key = key * data.arities()[p as usize] as u64 + data.column(p)[s] as u64;
        }
        *counts.entry(key).or_default().entry(child[s]).or_insert(0) += 1;
    }

    let lg = libm::lgamma;
    let mut score = 0.0;
    for child_counts in counts.values() {
        let n_j: u64 = child_counts.values().sum();
        score += lg(alpha_j) - lg(alpha_j + n_j as f64);
        for &n_jk in child_counts.values() {
            score += lg(alpha_jk + n_jk as f64) - lg(alpha_jk);
        }
    }
    score
}

/// All subsets of `0..n` minus `i` with size at most `max_in_degree`,
/// ordered by size then lexicographically.
pub fn enumerate_parent_sets(i: u32, n: usize, cfg: &ScoringConfig) -> Vec<Vec<u32>> {
    let others: Vec<u32> = (0..n as u32).filter(|&j| j != i).collect();
    let mut out = vec![Vec::new()];
    let mut current: Vec<Vec<u32>> = vec![Vec::new()];
    for _size in 1..=cfg.max_in_degree.min(others.len()) {
        let mut next = Vec::new();
        for set in &current {
            let start = set
                .last()
                .map_or(0, |&l| others.iter().position(|&o| o == l).unwrap() + 1);
            for &cand in &others[start..] {
                let mut bigger = set.clone();
                bigger.push(cand);
                next.push(bigger);
            }
        }
        out.extend(next.iter().cloned());
        current = next;
    }
    out
}

/// Per-node candidate families with local scores; the sole learner input.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreCache {
    names: Vec<String>,
    /// `families[i]` is a list of (sorted parent set, score).
    families: Vec<Vec<(Vec<u32>, f64)>>,
}

impl ScoreCache {
    pub fn new(names: Vec<String>, families: Vec<Vec<(Vec<u32>, f64)>>) -> Self {
        assert_eq!(names.len(), families.len());
        ScoreCache { names, families }
    }

    pub fn n(&self) -> usize {
        self.families.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn families(&self, i: u32) -> &[(Vec<u32>, f64)] {
        &self.families[i as usize]
    }

    /// Score of a specific parent set, if present.
    pub fn score_of(&self, i: u32, parents: &[u32]) -> Option<f64> {
        self.families[i as usize]
            .iter()
            .find(|(f, _)| f.as_slice() == parents)
            .map(|&(_, s)| s)
    }

    /// Score of the given DAG under this cache (sum of per-node lookups).
    pub fn dag_score(&self, d: &crate::graph::Dag) -> Option<f64> {
        (0..d.n() as u32)
            .map(|i| self.score_of(i, d.parents(i)))
            .sum()
    }

    /// Empty-set score for node `i`; present for every node by invariant.
    pub fn empty_score(&self, i: u32) -> f64 {
        self.score_of(i, &[]).expect("empty parent set present")
    }

    pub fn max_family_size(&self) -> usize {
        self.families
            .iter()
            .flat_map(|fs| fs.iter().map(|(f, _)| f.len()))
            .max()
            .unwrap_or(0)
    }

    /// Drops any family for which some strict subset scores at least as well.
    /// Preserves optima under a treewidth bound; changes file contents, so it
    /// is opt-in.
    pub fn prune_dominated(&self) -> ScoreCache {
        let families = self
            .families
            .iter()
            .map(|fs| {
                fs.iter()
                    .filter(|(f, s)| {
                        !fs.iter().any(|(g, t)| {
                            g.len() < f.len() && *t >= *s && g.iter().all(|x| f.contains(x))
                        })
                    })
                    .cloned()
                    .collect()
            })
            .collect();
        ScoreCache::new(self.names.clone(), families)
    }
}

/// Scores every enumerated family of every node. Families are evaluated in
/// parallel; the result is the same for any worker count.
pub fn build_score_cache(data: &Dataset, cfg: &ScoringConfig) -> ScoreCache {
    let n = data.n();
    let families: Vec<Vec<(Vec<u32>, f64)>> = (0..n as u32)
        .into_par_iter()
        .map(|i| {
            enumerate_parent_sets(i, n, cfg)
                .into_iter()
                .map(|ps| {
                    let s = bdeu_local_score(data, i, &ps, cfg.ess);
                    (ps, s)
                })
                .collect()
        })
        .collect();
    ScoreCache::new(data.names().to_vec(), families)
}

/// Concurrent insert-once memo for scoring on demand during search. Values
/// never change after first write.
pub struct MemoScores<'a> {
    data: &'a Dataset,
    ess: f64,
    pub max_in_degree: usize,
    memo: Mutex<HashMap<(u32, Vec<u32>), f64>>,
}

impl<'a> MemoScores<'a> {
    pub fn new(data: &'a Dataset, cfg: &ScoringConfig) -> Self {
        MemoScores {
            data,
            ess: cfg.ess,
            max_in_degree: cfg.max_in_degree,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn score(&self, i: u32, parents: &[u32]) -> f64 {
        let key = (i, parents.to_vec());
        if let Some(&s) = self.memo.lock().unwrap().get(&key) {
            return s;
        }
        let s = bdeu_local_score(self.data, i, parents, self.ess);
        self.memo.lock().unwrap().entry(key).or_insert(s);
        s
    }

    pub fn memo_len(&self) -> usize {
        self.memo.lock().unwrap().len()
    }
}

/// Formats with 12 significant digits, plain decimal, for score files and LP
/// exports. Deterministic and diff-friendly.
pub fn format_score(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (11 - exp).clamp(0, 17) as usize;
    format!("{:.*}", decimals, x)
}

/// Writes the score-cache text format:
///
/// ```text
/// <n>
/// <name> <family-count>
/// <score> <#parents> <parent-name>*
/// ...
/// ```
pub fn write_scores<W: Write>(cache: &ScoreCache, mut out: W) -> Result<(), ScoreError> {
    writeln!(out, "{}", cache.n())?;
    for i in 0..cache.n() as u32 {
        let fams = cache.families(i);
        writeln!(out, "{} {}", cache.names()[i as usize], fams.len())?;
        for (parents, score) in fams {
            let mut line = format!("{} {}", format_score(*score), parents.len());
            for &p in parents {
                line.push(' ');
                line.push_str(&cache.names()[p as usize]);
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

pub fn write_scores_path(cache: &ScoreCache, path: &Path) -> Result<(), ScoreError> {
    let mut buf = Vec::new();
    write_scores(cache, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_scores<R: Read>(reader: R) -> Result<ScoreCache, ScoreError> {
    let reader = BufReader::new(reader);
    let mut lines = reader.lines().enumerate();
    let mut next_line = || -> Result<Option<(usize, String)>, ScoreError> {
        for (idx, line) in lines.by_ref() {
            let line = line?;
            if !line.trim().is_empty() {
                return Ok(Some((idx + 1, line)));
            }
        }
        Ok(None)
    };

    let (line_no, first) = next_line()?.ok_or(ScoreError::Format {
        line: 1,
        msg: "missing variable count".into(),
    })?;
    let n: usize = first.trim().parse().map_err(|_| ScoreError::Format {
        line: line_no,
        msg: format!("bad variable count '{}'", first.trim()),
    })?;

    let mut names = Vec::with_capacity(n);
    let mut raw: Vec<Vec<(f64, Vec<String>)>> = Vec::with_capacity(n);
    for _ in 0..n {
        let (line_no, head) = next_line()?.ok_or(ScoreError::Format {
            line: 0,
            msg: "unexpected end of file in variable header".into(),
        })?;
        let mut it = head.split_whitespace();
        let name = it
            .next()
            .ok_or(ScoreError::Format {
                line: line_no,
                msg: "missing variable name".into(),
            })?
            .to_string();
        let count: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(ScoreError::Format {
                line: line_no,
                msg: "missing or bad family count".into(),
            })?;
        if it.next().is_some() {
            return Err(ScoreError::Format {
                line: line_no,
                msg: "trailing tokens in variable header".into(),
            });
        }
        let mut fams = Vec::with_capacity(count);
        for _ in 0..count {
            let (line_no, fam) = next_line()?.ok_or(ScoreError::Format {
                line: 0,
                msg: "unexpected end of file in family block".into(),
            })?;
            let mut it = fam.split_whitespace();
            let score: f64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(ScoreError::Format {
                    line: line_no,
                    msg: "missing or bad score".into(),
                })?;
            let np: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(ScoreError::Format {
                    line: line_no,
                    msg: "missing or bad parent count".into(),
                })?;
            let parents: Vec<String> = it.map(|s| s.to_string()).collect();
            if parents.len() != np {
                return Err(ScoreError::Format {
                    line: line_no,
                    msg: format!("family declares {np} parents, lists {}", parents.len()),
                });
            }
            fams.push((score, parents));
        }
        names.push(name);
        raw.push(fams);
    }

    let index: HashMap<&str, u32> = names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    if index.len() != n {
        return Err(ScoreError::Format {
            line: 0,
            msg: "duplicate variable name".into(),
        });
    }
    let mut families = Vec::with_capacity(n);
    for (node, fams) in raw.iter().enumerate() {
        let mut out: Vec<(Vec<u32>, f64)> = Vec::with_capacity(fams.len());
        for (score, parent_names) in fams {
            let mut ps = Vec::with_capacity(parent_names.len());
            for pn in parent_names {
                let &idx = index.get(pn.as_str()).ok_or(ScoreError::Format {
                    line: 0,
                    msg: format!("unknown parent name '{pn}'"),
                })?;
                ps.push(idx);
            }
            ps.sort_unstable();
            if ps.contains(&(node as u32)) {
                return Err(ScoreError::Format {
                    line: 0,
                    msg: format!("variable '{}' lists itself as a parent", names[node]),
                });
            }
            if out.iter().any(|(f, _)| f == &ps) {
                return Err(ScoreError::Format {
                    line: 0,
                    msg: format!("duplicate parent set for variable '{}'", names[node]),
                });
            }
            out.push((ps, *score));
        }
        if !out.iter().any(|(f, _)| f.is_empty()) {
            return Err(ScoreError::Format {
                line: 0,
                msg: format!("variable '{}' lacks the empty parent set", names[node]),
            });
        }
        families.push(out);
    }
    Ok(ScoreCache::new(names, families))
}

pub fn read_scores_path(path: &Path) -> Result<ScoreCache, ScoreError> {
    read_scores(std::fs::File::open(path)?)
}
