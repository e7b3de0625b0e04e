//! The network document: a JSON record of a learned structure with enough
//! provenance to re-verify it (per-node scores, the winning code, and an
//! elimination-order witness for the treewidth bound).

use serde::{Deserialize, Serialize};

use twbn::graph::{eliminate, moral_graph, Dag, EliminationOrder};
use twbn::ktree::{decode_full, DandelionCode};
use twbn::scoring::ScoreCache;
use twbn::search::LearnResult;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeEntry {
    pub name: String,
    pub parents: Vec<String>,
    pub local_score: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub names: Vec<String>,
    pub treewidth_bound: usize,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub iterations: u64,
    pub total_score: f64,
    pub nodes: Vec<NodeEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dandelion_code: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elimination_order: Option<Vec<String>>,
}

impl NetworkDocument {
    pub fn from_learn_result(r: &LearnResult, cache: &ScoreCache, workers: usize) -> Self {
        let names = cache.names().to_vec();
        let nodes = (0..cache.n() as u32)
            .map(|i| NodeEntry {
                name: names[i as usize].clone(),
                parents: r.dag.parents(i).iter().map(|&p| names[p as usize].clone()).collect(),
                local_score: cache.score_of(i, r.dag.parents(i)).expect("family in cache"),
            })
            .collect();
        let elimination_order = r.winning_code.as_ref().and_then(|code| {
            let (_, ct) = decode_full(code).ok()?;
            Some(
                ct.elimination_witness(cache.n())
                    .iter()
                    .map(|&v| names[v as usize].clone())
                    .collect(),
            )
        });
        NetworkDocument {
            names,
            treewidth_bound: r.effective_treewidth,
            method: r.method.to_string(),
            seed: Some(r.seed),
            workers: Some(workers),
            iterations: r.iterations_run,
            total_score: r.total_score,
            nodes,
            dandelion_code: r.winning_code.as_ref().map(DandelionCode::to_text),
            elimination_order,
        }
    }

    pub fn from_dag(
        dag: &Dag,
        cache: &ScoreCache,
        method: &str,
        treewidth_bound: usize,
        order: Option<&EliminationOrder>,
    ) -> Self {
        let names = cache.names().to_vec();
        let nodes: Vec<NodeEntry> = (0..cache.n() as u32)
            .map(|i| NodeEntry {
                name: names[i as usize].clone(),
                parents: dag.parents(i).iter().map(|&p| names[p as usize].clone()).collect(),
                local_score: cache.score_of(i, dag.parents(i)).expect("family in cache"),
            })
            .collect();
        let total_score = nodes.iter().map(|n| n.local_score).sum();
        let order_names = order
            .map(|o| o.as_slice().iter().map(|&v| names[v as usize].clone()).collect());
        NetworkDocument {
            names,
            treewidth_bound,
            method: method.to_string(),
            seed: None,
            workers: None,
            iterations: 0,
            total_score,
            nodes,
            dandelion_code: None,
            elimination_order: order_names,
        }
    }

    pub fn dag(&self) -> anyhow::Result<Dag> {
        let index = |name: &str| -> anyhow::Result<u32> {
            self.names
                .iter()
                .position(|n| n == name)
                .map(|i| i as u32)
                .ok_or_else(|| anyhow::anyhow!("unknown variable '{name}' in document"))
        };
        let mut parents = Vec::with_capacity(self.names.len());
        for entry in &self.nodes {
            let ps: anyhow::Result<Vec<u32>> =
                entry.parents.iter().map(|p| index(p)).collect();
            parents.push(ps?);
        }
        Ok(Dag::new(self.names.len(), parents)?)
    }

    /// Re-verifies the document: per-node scores sum to the total, parent
    /// names resolve, and the witness order (when present) eliminates the
    /// moral graph within the bound.
    pub fn verify(&self) -> anyhow::Result<()> {
        let sum: f64 = self.nodes.iter().map(|n| n.local_score).sum();
        if (sum - self.total_score).abs() > 1e-6 * self.total_score.abs().max(1.0) {
            anyhow::bail!("per-node scores sum to {sum}, document says {}", self.total_score);
        }
        let dag = self.dag()?;
        if let Some(order_names) = &self.elimination_order {
            let order: anyhow::Result<Vec<u32>> = order_names
                .iter()
                .map(|name| {
                    self.names
                        .iter()
                        .position(|n| n == name)
                        .map(|i| i as u32)
                        .ok_or_else(|| anyhow::anyhow!("unknown name '{name}' in witness"))
                })
                .collect();
            let order = EliminationOrder::new(order?, self.names.len())?;
            let (_, width) = eliminate(&moral_graph(&dag), &order);
            if width > self.treewidth_bound {
                anyhow::bail!(
                    "witness order eliminates with width {width} > bound {}",
                    self.treewidth_bound
                );
            }
        }
        Ok(())
    }

    pub fn write_json(&self, path: &std::path::Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
