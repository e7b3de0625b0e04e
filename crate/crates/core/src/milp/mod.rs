//! Mixed-integer linear programs for bounded-treewidth structure learning:
//! the treewidth-check model over elimination orders, the combined learning
//! model with its linear objective, a deterministic LP-text exporter, an
//! assignment checker, a feasibility-witness constructor and a desk-scale
//! exact solver.
//!
//! Variables: binary `y_i_j` (edge in the chordalization, i eliminated before
//! j), real `z_i` in [0, n] (elimination position), real `v_i` in [0, n]
//! (topological position, learning model), binary `pi_i_t` (node i picks its
//! t-th candidate parent set).

mod solve;

pub use solve::{solve_tiny, solve_tiny_with_limit, SolveOutcome, SOLVE_TINY_BINARY_LIMIT};

use std::collections::HashMap;
use std::io::Write;

use thiserror::Error;

use crate::graph::{
    eliminate, moral_graph, treewidth_exact, Dag, EliminationOrder, GraphError, UndirectedGraph,
};
use crate::scoring::{format_score, ScoreCache};

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("missing variable '{0}' in assignment")]
    MissingVariable(String),
    #[error("unknown variable '{0}' in solution file")]
    UnknownVariable(String),
    #[error("solution line {0} is not 'name value'")]
    BadSolutionLine(usize),
    #[error("assignment is infeasible: first violation {0}")]
    InfeasibleInput(String),
    #[error("DAG treewidth exceeds the bound {0}")]
    TreewidthExceeded(usize),
    #[error("parent set of node {0} is not among the model's candidates")]
    FamilyNotInModel(u32),
    #[error("model has {binaries} binaries, over the solver limit {limit}")]
    InstanceTooLarge { binaries: usize, limit: usize },
    #[error("every node needs the empty parent set among its candidates (node {0} lacks it)")]
    NoEmptyFamily(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    TreewidthCheck,
    Learning,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    /// y_i_j
    Y(u32, u32),
    /// z_i
    Z(u32),
    /// v_i
    V(u32),
    /// pi_i_t
    Pi(u32, u32),
}

#[derive(Clone, Debug)]
pub struct Var {
    pub kind: VarKind,
    pub name: String,
    pub binary: bool,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
}

/// One linear row: `Σ coeff · var  (<=|=)  rhs`.
#[derive(Clone, Debug)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct MilpModel {
    pub n: usize,
    pub w: usize,
    pub kind: ModelKind,
    pub vars: Vec<Var>,
    pub rows: Vec<Row>,
    /// (var index, coefficient); empty for the treewidth-check kind.
    pub objective: Vec<(usize, f64)>,
    y_index: HashMap<(u32, u32), usize>,
    z_index: Vec<usize>,
    v_index: Vec<usize>,
    pi_index: Vec<Vec<usize>>,
    /// Candidate families per node (learning kind), mirroring the cache.
    pub families: Vec<Vec<(Vec<u32>, f64)>>,
    name_index: HashMap<String, usize>,
}

impl MilpModel {
    pub fn y(&self, i: u32, j: u32) -> usize {
        self.y_index[&(i, j)]
    }

    pub fn z(&self, i: u32) -> usize {
        self.z_index[i as usize]
    }

    pub fn v(&self, i: u32) -> usize {
        self.v_index[i as usize]
    }

    pub fn pi(&self, i: u32, t: usize) -> usize {
        self.pi_index[i as usize][t]
    }

    pub fn var_by_name(&self, name: &str) -> Option<usize> {
        self.name_index.get(name).copied()
    }

    pub fn binary_count(&self) -> usize {
        self.vars.iter().filter(|v| v.binary).count()
    }

    fn finish(mut self) -> Self {
        self.name_index = self
            .vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), i))
            .collect();
        self
    }
}

struct Builder {
    vars: Vec<Var>,
    rows: Vec<Row>,
    y_index: HashMap<(u32, u32), usize>,
    z_index: Vec<usize>,
    v_index: Vec<usize>,
    pi_index: Vec<Vec<usize>>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            vars: Vec::new(),
            rows: Vec::new(),
            y_index: HashMap::new(),
            z_index: Vec::new(),
            v_index: Vec::new(),
            pi_index: Vec::new(),
        }
    }

    fn add_var(&mut self, kind: VarKind, binary: bool, lo: f64, hi: f64) -> usize {
        let name = match kind {
            VarKind::Y(i, j) => format!("y_{i}_{j}"),
            VarKind::Z(i) => format!("z_{i}"),
            VarKind::V(i) => format!("v_{i}"),
            VarKind::Pi(i, t) => format!("pi_{i}_{t}"),
        };
        self.vars.push(Var {
            kind,
            name,
            binary,
            lo,
            hi,
        });
        self.vars.len() - 1
    }

    fn row(&mut self, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row {
            name,
            terms,
            sense,
            rhs,
        });
    }

    /// Shared treewidth block: y and z variables, degree rows, order-link
    /// rows, and perfect-elimination (fill) rows over ordered i with
    /// unordered {j, k}, all three distinct.
    fn treewidth_block(&mut self, n: usize, w: usize) {
        for i in 0..n as u32 {
            for j in 0..n as u32 {
                if i != j {
                    let idx = self.add_var(VarKind::Y(i, j), true, 0.0, 1.0);
                    self.y_index.insert((i, j), idx);
                }
            }
        }
        for i in 0..n as u32 {
            let idx = self.add_var(VarKind::Z(i), false, 0.0, n as f64);
            self.z_index.push(idx);
        }
        for i in 0..n as u32 {
            let terms = (0..n as u32)
                .filter(|&j| j != i)
                .map(|j| (self.y_index[&(i, j)], 1.0))
                .collect();
            self.row(format!("tw_deg_{i}"), terms, Sense::Le, w as f64);
        }
        // (n+1) y_ij <= n + z_j - z_i
        for i in 0..n as u32 {
            for j in 0..n as u32 {
                if i == j {
                    continue;
                }
                let terms = vec![
                    (self.y_index[&(i, j)], (n + 1) as f64),
                    (self.z_index[i as usize], 1.0),
                    (self.z_index[j as usize], -1.0),
                ];
                self.row(format!("tw_ord_{i}_{j}"), terms, Sense::Le, n as f64);
            }
        }
    }

    fn fill_rows(&mut self, n: usize) {
        for i in 0..n as u32 {
            for j in 0..n as u32 {
                if j == i {
                    continue;
                }
                for k in (j + 1)..n as u32 {
                    if k == i {
                        continue;
                    }
                    let terms = vec![
                        (self.y_index[&(i, j)], 1.0),
                        (self.y_index[&(i, k)], 1.0),
                        (self.y_index[&(j, k)], -1.0),
                        (self.y_index[&(k, j)], -1.0),
                    ];
                    self.row(format!("tw_fill_{i}_{j}_{k}"), terms, Sense::Le, 1.0);
                }
            }
        }
    }
}

/// Feasible iff some supergraph of `g` has treewidth at most `w`: degree,
/// order-link and fill rows plus one equality per edge of `g`.
pub fn build_treewidth_model(g: &UndirectedGraph, w: usize) -> MilpModel {
    let n = g.n();
    let mut b = Builder::new();
    b.treewidth_block(n, w);
    for (i, j) in g.edges() {
        let terms = vec![(b.y_index[&(i, j)], 1.0), (b.y_index[&(j, i)], 1.0)];
        b.row(format!("tw_edge_{i}_{j}"), terms, Sense::Eq, 1.0);
    }
    b.fill_rows(n);
    MilpModel {
        n,
        w,
        kind: ModelKind::TreewidthCheck,
        vars: b.vars,
        rows: b.rows,
        objective: Vec::new(),
        y_index: b.y_index,
        z_index: b.z_index,
        v_index: b.v_index,
        pi_index: b.pi_index,
        families: Vec::new(),
        name_index: HashMap::new(),
    }
    .finish()
}

/// The combined learning model: treewidth block, family choice, acyclicity
/// links, and moralization rows tying chosen families into the
/// chordalization. Maximizes the summed local scores.
pub fn build_learning_model(cache: &ScoreCache, w: usize) -> Result<MilpModel, MilpError> {
    let n = cache.n();
    for i in 0..n as u32 {
        if !cache.families(i).iter().any(|(f, _)| f.is_empty()) {
            return Err(MilpError::NoEmptyFamily(i));
        }
    }
    let mut b = Builder::new();
    b.treewidth_block(n, w);
    for i in 0..n as u32 {
        let idx = b.add_var(VarKind::V(i), false, 0.0, n as f64);
        b.v_index.push(idx);
    }
    for i in 0..n as u32 {
        let mut per_node = Vec::new();
        for t in 0..cache.families(i).len() {
            per_node.push(b.add_var(VarKind::Pi(i, t as u32), true, 0.0, 1.0));
        }
        b.pi_index.push(per_node);
    }
    b.fill_rows(n);
    for i in 0..n as u32 {
        let terms = b.pi_index[i as usize].iter().map(|&v| (v, 1.0)).collect();
        b.row(format!("pick_{i}"), terms, Sense::Eq, 1.0);
    }
    // (n+1) pi_it <= n + v_j - v_i  for each parent j
    for i in 0..n as u32 {
        for (t, (fam, _)) in cache.families(i).iter().enumerate() {
            for &j in fam {
                let terms = vec![
                    (b.pi_index[i as usize][t], (n + 1) as f64),
                    (b.v_index[i as usize], 1.0),
                    (b.v_index[j as usize], -1.0),
                ];
                b.row(format!("acyc_{i}_{t}_{j}"), terms, Sense::Le, n as f64);
            }
        }
    }
    // pi_it <= y_ij + y_ji
    for i in 0..n as u32 {
        for (t, (fam, _)) in cache.families(i).iter().enumerate() {
            for &j in fam {
                let terms = vec![
                    (b.pi_index[i as usize][t], 1.0),
                    (b.y_index[&(i, j)], -1.0),
                    (b.y_index[&(j, i)], -1.0),
                ];
                b.row(format!("moral1_{i}_{t}_{j}"), terms, Sense::Le, 0.0);
            }
        }
    }
    // pi_it <= y_jk + y_kj for unordered {j, k} inside the family
    for i in 0..n as u32 {
        for (t, (fam, _)) in cache.families(i).iter().enumerate() {
            for (a, &j) in fam.iter().enumerate() {
                for &k in &fam[a + 1..] {
                    let terms = vec![
                        (b.pi_index[i as usize][t], 1.0),
                        (b.y_index[&(j, k)], -1.0),
                        (b.y_index[&(k, j)], -1.0),
                    ];
                    b.row(format!("moral2_{i}_{t}_{j}_{k}"), terms, Sense::Le, 0.0);
                }
            }
        }
    }
    let mut objective = Vec::new();
    for i in 0..n as u32 {
        for (t, (_, score)) in cache.families(i).iter().enumerate() {
            objective.push((b.pi_index[i as usize][t], *score));
        }
    }
    let families = (0..n as u32).map(|i| cache.families(i).to_vec()).collect();
    Ok(MilpModel {
        n,
        w,
        kind: ModelKind::Learning,
        vars: b.vars,
        rows: b.rows,
        objective,
        y_index: b.y_index,
        z_index: b.z_index,
        v_index: b.v_index,
        pi_index: b.pi_index,
        families,
        name_index: HashMap::new(),
    }
    .finish())
}

/// Complete variable assignment, indexed like `model.vars`.
#[derive(Clone, Debug)]
pub struct MilpAssignment {
    pub values: Vec<f64>,
}

impl MilpAssignment {
    pub fn zeros(model: &MilpModel) -> Self {
        MilpAssignment {
            values: vec![0.0; model.vars.len()],
        }
    }

    pub fn objective(&self, model: &MilpModel) -> f64 {
        model
            .objective
            .iter()
            .map(|&(v, c)| c * self.values[v])
            .sum()
    }

    /// Builds an assignment from `name value` pairs; every model variable
    /// must be present. Binaries within 1e-6 of an integer are snapped.
    pub fn from_named(
        model: &MilpModel,
        named: &HashMap<String, f64>,
    ) -> Result<Self, MilpError> {
        let mut values = vec![f64::NAN; model.vars.len()];
        for (name, &val) in named {
            match model.var_by_name(name) {
                Some(idx) => {
                    let v = if model.vars[idx].binary && (val - val.round()).abs() <= 1e-6 {
                        val.round()
                    } else {
                        val
                    };
                    values[idx] = v;
                }
                None => return Err(MilpError::UnknownVariable(name.clone())),
            }
        }
        if let Some(missing) = values.iter().position(|v| v.is_nan()) {
            return Err(MilpError::MissingVariable(
                model.vars[missing].name.clone(),
            ));
        }
        Ok(MilpAssignment { values })
    }
}

/// Parses the plain `name value` per-line solution format. Blank lines and
/// `#` comments are skipped.
pub fn parse_solution(text: &str) -> Result<HashMap<String, f64>, MilpError> {
    let mut out = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (name, value) = match (it.next(), it.next(), it.next()) {
            (Some(n), Some(v), None) => (n, v),
            _ => return Err(MilpError::BadSolutionLine(lineno + 1)),
        };
        let value: f64 = value
            .parse()
            .map_err(|_| MilpError::BadSolutionLine(lineno + 1))?;
        out.insert(name.to_string(), value);
    }
    Ok(out)
}

fn format_coeff(c: f64) -> String {
    if c == c.trunc() && c.abs() < 1e15 {
        format!("{}", c as i64)
    } else {
        format_score(c)
    }
}

/// Deterministic LP text: named objective, `Subject To`, `Bounds` for the
/// reals, `Binary` listing, `End`.
pub fn export_lp<W: Write>(model: &MilpModel, mut out: W) -> Result<(), MilpError> {
    writeln!(out, "Maximize")?;
    let mut line = String::from(" obj:");
    if model.objective.is_empty() {
        // constant-free feasibility objective keeps LP readers happy
        line.push_str(&format!(" 0 {}", model.vars[model.z(0)].name));
    } else {
        for (pos, &(v, c)) in model.objective.iter().enumerate() {
            let name = &model.vars[v].name;
            if pos == 0 {
                line.push_str(&format!(" {} {}", format_coeff(c), name));
            } else if c < 0.0 {
                line.push_str(&format!(" - {} {}", format_coeff(-c), name));
            } else {
                line.push_str(&format!(" + {} {}", format_coeff(c), name));
            }
            if line.len() > 200 {
                writeln!(out, "{line}")?;
                line = String::from("     ");
            }
        }
    }
    if !line.trim().is_empty() {
        writeln!(out, "{line}")?;
    }
    writeln!(out, "Subject To")?;
    for row in &model.rows {
        let mut s = format!(" {}:", row.name);
        for (pos, &(v, c)) in row.terms.iter().enumerate() {
            let name = &model.vars[v].name;
            let mag = c.abs();
            let coeff = if mag == 1.0 {
                name.clone()
            } else {
                format!("{} {}", format_coeff(mag), name)
            };
            if pos == 0 {
                if c < 0.0 {
                    s.push_str(&format!(" - {coeff}"));
                } else {
                    s.push_str(&format!(" {coeff}"));
                }
            } else if c < 0.0 {
                s.push_str(&format!(" - {coeff}"));
            } else {
                s.push_str(&format!(" + {coeff}"));
            }
        }
        let sense = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
        };
        s.push_str(&format!(" {} {}", sense, format_coeff(row.rhs)));
        writeln!(out, "{s}")?;
    }
    writeln!(out, "Bounds")?;
    for var in &model.vars {
        if !var.binary {
            writeln!(
                out,
                " {} <= {} <= {}",
                format_coeff(var.lo),
                var.name,
                format_coeff(var.hi)
            )?;
        }
    }
    writeln!(out, "Binary")?;
    for var in &model.vars {
        if var.binary {
            writeln!(out, " {}", var.name)?;
        }
    }
    writeln!(out, "End")?;
    Ok(())
}

pub fn export_lp_string(model: &MilpModel) -> String {
    let mut buf = Vec::new();
    export_lp(model, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("LP text is ASCII")
}

/// Per-family check outcome: rows sharing a name prefix are one family.
#[derive(Clone, Debug)]
pub struct FamilyReport {
    pub family: String,
    pub rows: usize,
    pub first_violation: Option<String>,
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub families: Vec<FamilyReport>,
    pub feasible: bool,
}

impl CheckReport {
    pub fn first_violation(&self) -> Option<&str> {
        self.families
            .iter()
            .find_map(|f| f.first_violation.as_deref())
    }
}

const CHECK_TOL: f64 = 1e-6;

fn row_family(name: &str) -> String {
    let mut parts = name.split('_');
    let mut fam = parts.next().unwrap_or("row").to_string();
    if fam == "tw" {
        if let Some(second) = parts.next() {
            fam = format!("tw_{second}");
        }
    }
    fam
}

/// Evaluates every row, bound and integrality requirement, reporting the
/// first violated row per family and an overall verdict.
pub fn check_assignment(model: &MilpModel, a: &MilpAssignment) -> Result<CheckReport, MilpError> {
    if a.values.len() != model.vars.len() {
        return Err(MilpError::MissingVariable(format!(
            "assignment holds {} of {} variables",
            a.values.len(),
            model.vars.len()
        )));
    }
    let mut families: Vec<FamilyReport> = Vec::new();
    let mut push = |fam: String, violated: Option<String>| {
        if let Some(f) = families.iter_mut().find(|f| f.family == fam) {
            f.rows += 1;
            if f.first_violation.is_none() {
                f.first_violation = violated;
            }
        } else {
            families.push(FamilyReport {
                family: fam,
                rows: 1,
                first_violation: violated,
            });
        }
    };

    for var in model.vars.iter() {
        let idx = model.var_by_name(&var.name).unwrap();
        let val = a.values[idx];
        let bad_bound = val < var.lo - CHECK_TOL || val > var.hi + CHECK_TOL;
        push(
            "bounds".into(),
            bad_bound.then(|| format!("bound of {}", var.name)),
        );
        if var.binary {
            let bad_int = (val - val.round()).abs() > CHECK_TOL;
            push(
                "binary".into(),
                bad_int.then(|| format!("integrality of {}", var.name)),
            );
        }
    }
    for row in &model.rows {
        let lhs: f64 = row.terms.iter().map(|&(v, c)| c * a.values[v]).sum();
        let ok = match row.sense {
            Sense::Le => lhs <= row.rhs + CHECK_TOL,
            Sense::Eq => (lhs - row.rhs).abs() <= CHECK_TOL,
        };
        push(row_family(&row.name), (!ok).then(|| row.name.clone()));
    }
    let feasible = families.iter().all(|f| f.first_violation.is_none());
    Ok(CheckReport { families, feasible })
}

/// Reads a feasible learning assignment back into a DAG plus the elimination
/// order induced by sorting z ascending (ties by node index), which witnesses
/// the treewidth bound.
pub fn decode_solution(
    model: &MilpModel,
    a: &MilpAssignment,
) -> Result<(Dag, EliminationOrder), MilpError> {
    let report = check_assignment(model, a)?;
    if !report.feasible {
        return Err(MilpError::InfeasibleInput(
            report.first_violation().unwrap_or("unknown").to_string(),
        ));
    }
    let n = model.n;
    let mut parents = Vec::with_capacity(n);
    for i in 0..n as u32 {
        let mut chosen = None;
        for t in 0..model.families[i as usize].len() {
            if (a.values[model.pi(i, t)] - 1.0).abs() <= CHECK_TOL {
                chosen = Some(t);
                break;
            }
        }
        let t = chosen.expect("pick rows guarantee one family");
        parents.push(model.families[i as usize][t].0.clone());
    }
    let dag = Dag::new(n, parents).expect("feasible assignments decode acyclically");
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&i, &j| {
        a.values[model.z(i)]
            .partial_cmp(&a.values[model.z(j)])
            .unwrap()
            .then(i.cmp(&j))
    });
    let order = EliminationOrder::new(order, n).unwrap();
    Ok((dag, order))
}

/// Constructive completeness: a feasible assignment for any DAG within the
/// treewidth bound. The moral graph's optimal elimination order provides z
/// and the chordalization provides y; a reverse topological order provides v.
pub fn encode_witness(model: &MilpModel, d: &Dag) -> Result<MilpAssignment, MilpError> {
    assert_eq!(model.kind, ModelKind::Learning);
    assert_eq!(model.n, d.n());
    let n = model.n;
    let moral = moral_graph(d);
    let (tw, order) = treewidth_exact(&moral)?;
    if tw > model.w {
        return Err(MilpError::TreewidthExceeded(model.w));
    }
    let (chordal, _) = eliminate(&moral, &order);
    let pos = order.positions();

    let mut a = MilpAssignment::zeros(model);
    for i in 0..n as u32 {
        a.values[model.z(i)] = pos[i as usize] as f64;
        for j in 0..n as u32 {
            if i != j && chordal.has_edge(i, j) && pos[i as usize] < pos[j as usize] {
                a.values[model.y(i, j)] = 1.0;
            }
        }
    }
    // children before parents, so parents take strictly larger v
    let topo = d.topological_order().expect("DAG input");
    for (t, &node) in topo.iter().enumerate() {
        a.values[model.v(node)] = (n - 1 - t) as f64;
    }
    for i in 0..n as u32 {
        let want = d.parents(i);
        let t = model.families[i as usize]
            .iter()
            .position(|(f, _)| f.as_slice() == want)
            .ok_or(MilpError::FamilyNotInModel(i))?;
        a.values[model.pi(i, t)] = 1.0;
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::dag_treewidth_at_most;
    use crate::synth::full_random_cache;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn small_cache(n: usize, maxp: usize, seed: u64) -> ScoreCache {
        full_random_cache(n, maxp, seed)
    }

    #[test]
    fn learning_model_variable_and_row_counts() {
        let cache = small_cache(3, 2, 1);
        let m = build_learning_model(&cache, 2).unwrap();
        // 6 y + 3 z + 3 v + 12 pi
        assert_eq!(m.vars.len(), 6 + 3 + 3 + 12);
        assert_eq!(m.binary_count(), 6 + 12);
        let count = |prefix: &str| {
            m.rows
                .iter()
                .filter(|r| r.name.starts_with(prefix))
                .count()
        };
        assert_eq!(count("tw_deg_"), 3);
        assert_eq!(count("tw_ord_"), 6); // n(n-1)
        assert_eq!(count("tw_fill_"), 3); // n * C(n-1, 2)
        assert_eq!(count("pick_"), 3);
        // families per node: sizes 0,1,1,2 -> acyc rows = sum of |F| = 4 per node
        assert_eq!(count("acyc_"), 12);
        assert_eq!(count("moral1_"), 12);
        assert_eq!(count("moral2_"), 3); // one 2-parent family per node
        assert_eq!(m.objective.len(), 12);
    }

    #[test]
    fn fill_row_count_follows_triple_convention() {
        let cache = small_cache(9, 1, 2);
        let m = build_learning_model(&cache, 4).unwrap();
        let fills = m
            .rows
            .iter()
            .filter(|r| r.name.starts_with("tw_fill_"))
            .count();
        assert_eq!(fills, 9 * 8 * 7 / 2); // ordered i, unordered {j,k}
    }

    #[test]
    fn treewidth_model_has_edge_rows() {
        let g = UndirectedGraph::complete(3);
        let m = build_treewidth_model(&g, 1);
        assert_eq!(
            m.rows
                .iter()
                .filter(|r| r.name.starts_with("tw_edge_"))
                .count(),
            3
        );
        assert!(m.objective.is_empty());
    }

    #[test]
    fn export_is_deterministic_and_stable() {
        let cache = small_cache(3, 2, 3);
        let m = build_learning_model(&cache, 2).unwrap();
        let s1 = export_lp_string(&m);
        let s2 = export_lp_string(&m);
        assert_eq!(s1, s2);
        assert!(s1.starts_with("Maximize\n obj:"));
        for section in ["Subject To", "Bounds", "Binary", "End"] {
            assert!(s1.contains(section), "missing {section}");
        }
        assert!(s1.contains("tw_deg_0:"));
        assert!(s1.contains("pick_2:"));
        assert!(s1.contains(" 0 <= z_0 <= 3"));
    }

    #[test]
    fn golden_export_for_tiny_model() {
        let cache = ScoreCache::new(
            vec!["a".into(), "b".into()],
            vec![
                vec![(vec![], -1.5), (vec![1], -0.5)],
                vec![(vec![], -2.0)],
            ],
        );
        let m = build_learning_model(&cache, 1).unwrap();
        let expected = "\
Maximize
 obj: -1.50000000000 pi_0_0 - 0.500000000000 pi_0_1 - 2 pi_1_0
Subject To
 tw_deg_0: y_0_1 <= 1
 tw_deg_1: y_1_0 <= 1
 tw_ord_0_1: 3 y_0_1 + z_0 - z_1 <= 2
 tw_ord_1_0: 3 y_1_0 + z_1 - z_0 <= 2
 pick_0: pi_0_0 + pi_0_1 = 1
 pick_1: pi_1_0 = 1
 acyc_0_1_1: 3 pi_0_1 + v_0 - v_1 <= 2
 moral1_0_1_1: pi_0_1 - y_0_1 - y_1_0 <= 0
Bounds
 0 <= z_0 <= 2
 0 <= z_1 <= 2
 0 <= v_0 <= 2
 0 <= v_1 <= 2
Binary
 y_0_1
 y_1_0
 pi_0_0
 pi_0_1
 pi_1_0
End
";
        assert_eq!(export_lp_string(&m), expected);
    }

    #[test]
    fn witness_roundtrip_and_mutation() {
        let cache = small_cache(4, 2, 4);
        let m = build_learning_model(&cache, 2).unwrap();
        let dag = Dag::new(4, vec![vec![], vec![0], vec![0, 1], vec![2]]).unwrap();
        let a = encode_witness(&m, &dag).unwrap();
        let report = check_assignment(&m, &a).unwrap();
        assert!(report.feasible, "{:?}", report.first_violation());
        let (decoded, order) = decode_solution(&m, &a).unwrap();
        assert_eq!(decoded, dag);
        let (_, width) = eliminate(&moral_graph(&decoded), &order);
        assert!(width <= 2);

        // flipping one chosen y breaks a named row
        let mut broken = a.clone();
        let flipped = (0..m.vars.len())
            .find(|&v| matches!(m.vars[v].kind, VarKind::Y(..)) && broken.values[v] == 1.0)
            .unwrap();
        broken.values[flipped] = 0.0;
        let report = check_assignment(&m, &broken).unwrap();
        assert!(!report.feasible);
        assert!(report.first_violation().is_some());
    }

    #[test]
    fn all_zero_assignment_violates_pick() {
        let cache = small_cache(3, 1, 5);
        let m = build_learning_model(&cache, 1).unwrap();
        let a = MilpAssignment::zeros(&m);
        let report = check_assignment(&m, &a).unwrap();
        assert!(!report.feasible);
        let pick = report
            .families
            .iter()
            .find(|f| f.family == "pick")
            .unwrap();
        assert_eq!(pick.first_violation.as_deref(), Some("pick_0"));
    }

    #[test]
    fn empty_dag_witness_has_all_y_zero() {
        let cache = small_cache(4, 2, 6);
        let m = build_learning_model(&cache, 3).unwrap();
        let a = encode_witness(&m, &Dag::empty(4)).unwrap();
        for (idx, var) in m.vars.iter().enumerate() {
            if matches!(var.kind, VarKind::Y(..)) {
                assert_eq!(a.values[idx], 0.0);
            }
        }
        assert!(check_assignment(&m, &a).unwrap().feasible);
    }

    #[test]
    fn chain_witness_feasible_at_width_one() {
        let cache = small_cache(3, 1, 7);
        let m = build_learning_model(&cache, 1).unwrap();
        let chain = Dag::new(3, vec![vec![], vec![0], vec![1]]).unwrap();
        let a = encode_witness(&m, &chain).unwrap();
        assert!(check_assignment(&m, &a).unwrap().feasible);
    }

    #[test]
    fn witness_rejects_treewidth_overflow() {
        let cache = small_cache(3, 2, 8);
        let m = build_learning_model(&cache, 1).unwrap();
        let vee = Dag::new(3, vec![vec![], vec![], vec![0, 1]]).unwrap();
        assert!(matches!(
            encode_witness(&m, &vee),
            Err(MilpError::TreewidthExceeded(1))
        ));
    }

    #[test]
    fn random_small_dags_always_get_feasible_witnesses() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024_08);
        let mut done = 0;
        while done < 200 {
            let n = rng.random_range(2..6usize);
            let w = rng.random_range(1..3usize);
            let maxp = 2usize;
            // random DAG over a random order
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.shuffle(&mut rng);
            let mut parents = vec![Vec::new(); n];
            for (pos, &c) in order.iter().enumerate() {
                for &p in &order[..pos] {
                    if parents[c as usize].len() < maxp && rng.random::<f64>() < 0.4 {
                        parents[c as usize].push(p);
                    }
                }
            }
            let dag = Dag::new(n, parents).unwrap();
            if !dag_treewidth_at_most(&dag, w).unwrap() {
                continue;
            }
            let cache = small_cache(n, maxp, 1000 + done as u64);
            let m = build_learning_model(&cache, w).unwrap();
            let a = encode_witness(&m, &dag).unwrap();
            let report = check_assignment(&m, &a).unwrap();
            assert!(report.feasible, "witness infeasible for {dag:?}");
            let obj = a.objective(&m);
            let direct = cache.dag_score(&dag).unwrap();
            assert!((obj - direct).abs() < 1e-9);
            done += 1;
        }
    }

    #[test]
    fn solution_text_round_trip() {
        let cache = small_cache(3, 1, 9);
        let m = build_learning_model(&cache, 1).unwrap();
        let dag = Dag::new(3, vec![vec![], vec![0], vec![]]).unwrap();
        let a = encode_witness(&m, &dag).unwrap();
        let text: String = m
            .vars
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{} {}\n", v.name, a.values[i]))
            .collect();
        let named = parse_solution(&text).unwrap();
        let b = MilpAssignment::from_named(&m, &named).unwrap();
        assert_eq!(a.values, b.values);

        // near-integral solver output on binaries is snapped
        let fuzzed: String = m
            .vars
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if v.binary && a.values[i] == 1.0 {
                    format!("{} 0.9999996\n", v.name)
                } else {
                    format!("{} {}\n", v.name, a.values[i])
                }
            })
            .collect();
        let named = parse_solution(&fuzzed).unwrap();
        let c = MilpAssignment::from_named(&m, &named).unwrap();
        assert_eq!(a.values, c.values);

        // a missing variable is reported by name
        let mut partial = named.clone();
        partial.remove("z_1");
        assert!(matches!(
            MilpAssignment::from_named(&m, &partial),
            Err(MilpError::MissingVariable(name)) if name == "z_1"
        ));
    }
}
