use std::fmt;

use serde::Serialize;

use super::{compute_layers, CliqueId, JunctionTree};
use crate::network::BayesianNetwork;

/// Statistics printed by `inspect`.
#[derive(Clone, Debug, Serialize)]
pub struct TreeReport {
    pub network: String,
    pub variables: usize,
    pub edges: usize,
    pub cliques: usize,
    pub separators: usize,
    pub components: usize,
    pub max_clique_vars: usize,
    pub max_clique_entries: usize,
    pub total_clique_entries: usize,
    pub total_separator_entries: usize,
    pub roots: Vec<CliqueId>,
    pub layers: usize,
    /// Layer count when each clique in turn replaces its component's root.
    pub layers_by_root: Vec<(CliqueId, usize)>,
}

impl TreeReport {
    pub fn new(net: &BayesianNetwork, tree: &JunctionTree) -> Self {
        let components = tree.components();
        let roots = tree.schedule.roots.clone();
        let layers_by_root = components
            .iter()
            .enumerate()
            .flat_map(|(ci, comp)| comp.iter().map(move |&c| (ci, c)))
            .map(|(ci, c)| {
                let mut candidate = roots.clone();
                candidate[ci] = c;
                (c, compute_layers(tree, &candidate).len())
            })
            .collect::<Vec<_>>();
        TreeReport {
            network: net.name.clone(),
            variables: net.len(),
            edges: net.edges().len(),
            cliques: tree.cliques.len(),
            separators: tree.separators.len(),
            components: components.len(),
            max_clique_vars: tree.cliques.iter().map(|c| c.domain.len()).max().unwrap_or(0),
            max_clique_entries: tree.cliques.iter().map(|c| c.domain.size()).max().unwrap_or(0),
            total_clique_entries: tree.total_clique_entries(),
            total_separator_entries: tree.total_separator_entries(),
            roots,
            layers: tree.schedule.len(),
            layers_by_root,
        }
    }
}

impl fmt::Display for TreeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "network:                 {}", self.network)?;
        writeln!(f, "variables:               {}", self.variables)?;
        writeln!(f, "edges:                   {}", self.edges)?;
        writeln!(f, "cliques:                 {}", self.cliques)?;
        writeln!(f, "separators:              {}", self.separators)?;
        writeln!(f, "components:              {}", self.components)?;
        writeln!(f, "max clique variables:    {}", self.max_clique_vars)?;
        writeln!(f, "max clique entries:      {}", self.max_clique_entries)?;
        writeln!(f, "total clique entries:    {}", self.total_clique_entries)?;
        writeln!(f, "total separator entries: {}", self.total_separator_entries)?;
        let roots: Vec<String> = self.roots.iter().map(ToString::to_string).collect();
        writeln!(f, "root clique(s):          {}", roots.join(","))?;
        writeln!(f, "layers:                  {}", self.layers)?;
        let counts = self.layers_by_root.iter().map(|p| p.1);
        if let (Some(lo), Some(hi)) = (counts.clone().min(), counts.max()) {
            writeln!(f, "layers over all roots:   min {lo}, max {hi}")?;
        }
        Ok(())
    }
}
