//! User-item bipartite graph and truncated uniform random walks over it.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::seeding;
use crate::types::{IdIndex, InteractionTable};

/// Bipartite interaction graph. Nodes live in one unified index space:
/// users take `0..num_users`, items take `num_users..num_users+num_items`.
/// Edges are deduplicated and adjacency lists sorted, so construction is
/// deterministic.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    users: IdIndex,
    items: IdIndex,
    /// Adjacency per node in the unified space; user rows hold item nodes
    /// and vice versa.
    adjacency: Vec<Vec<u32>>,
}

impl BipartiteGraph {
    pub fn from_interactions(table: &InteractionTable) -> Result<Self> {
        let (users, items) = table.index_maps()?;
        let nu = users.len();
        let mut adjacency = vec![Vec::new(); nu + items.len()];
        let mut seen = std::collections::HashSet::new();
        for r in table.rows() {
            let u = users.index_of(&r.user).expect("indexed above");
            let i = items.index_of(&r.item).expect("indexed above");
            if seen.insert((u, i)) {
                adjacency[u].push((nu + i) as u32);
                adjacency[nu + i].push(u as u32);
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(BipartiteGraph {
            users,
            items,
            adjacency,
        })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_user_node(&self, node: u32) -> bool {
        (node as usize) < self.users.len()
    }

    pub fn neighbors(&self, node: u32) -> &[u32] {
        &self.adjacency[node as usize]
    }

    pub fn user_ids(&self) -> &IdIndex {
        &self.users
    }

    pub fn item_ids(&self) -> &IdIndex {
        &self.items
    }

    /// External id of an item node in the unified space.
    pub fn item_id_of_node(&self, node: u32) -> Option<&str> {
        (node as usize)
            .checked_sub(self.users.len())
            .and_then(|i| self.items.id_at(i))
    }
}

/// `walks_per_node` truncated uniform random walks of `walk_length` nodes
/// from every node. Each step moves to a uniformly random neighbor, so on a
/// bipartite graph walks strictly alternate user and item nodes. Every walk
/// draws from its own derived stream, keyed by (seed, start node, walk
/// index), making generation order-independent and reproducible.
pub fn generate_walks(
    graph: &BipartiteGraph,
    walks_per_node: usize,
    walk_length: usize,
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    if graph.num_nodes() == 0 {
        return Err(Error::EmptyInput);
    }
    if walk_length == 0 {
        return Err(Error::Config("walk length must be >= 1".into()));
    }
    let mut walks = Vec::with_capacity(graph.num_nodes() * walks_per_node);
    for start in 0..graph.num_nodes() as u32 {
        for w in 0..walks_per_node {
            let walk_seed = seeding::derive(seeding::derive(seed, u64::from(start)), w as u64);
            let mut rng = StdRng::seed_from_u64(walk_seed);
            let mut walk = Vec::with_capacity(walk_length);
            let mut node = start;
            walk.push(node);
            while walk.len() < walk_length {
                let neighbors = graph.neighbors(node);
                if neighbors.is_empty() {
                    break;
                }
                node = neighbors[rng.random_range(0..neighbors.len())];
                walk.push(node);
            }
            walks.push(walk);
        }
    }
    Ok(walks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph_of(triples: &[(&str, &str)]) -> BipartiteGraph {
        let mut t = InteractionTable::default();
        for (u, i) in triples {
            t.push(*u, *i, 3.0);
        }
        BipartiteGraph::from_interactions(&t).unwrap()
    }

    #[test]
    fn single_edge_walks_alternate_between_endpoints() {
        let g = graph_of(&[("u", "i")]);
        let walks = generate_walks(&g, 3, 4, 1).unwrap();
        assert_eq!(walks.len(), 6); // 2 nodes x 3 walks
        for walk in &walks {
            assert_eq!(walk.len(), 4);
            match walk[0] {
                0 => assert_eq!(walk, &vec![0, 1, 0, 1]),
                1 => assert_eq!(walk, &vec![1, 0, 1, 0]),
                other => panic!("unexpected start {other}"),
            }
        }
    }

    #[test]
    fn walks_alternate_sides() {
        let g = graph_of(&[
            ("u1", "a"),
            ("u1", "b"),
            ("u2", "a"),
            ("u2", "c"),
            ("u3", "c"),
        ]);
        for walk in generate_walks(&g, 5, 17, 3).unwrap() {
            for pair in walk.windows(2) {
                assert_ne!(
                    g.is_user_node(pair[0]),
                    g.is_user_node(pair[1]),
                    "walk {walk:?} stays on one side"
                );
            }
        }
    }

    #[test]
    fn star_graph_first_step_is_uniform() {
        // One user connected to three items; direct simulation oracle.
        let g = graph_of(&[("u", "a"), ("u", "b"), ("u", "c")]);
        let user_node = 0u32;
        let walks = generate_walks(&g, 30_000, 2, 11).unwrap();
        let mut counts = [0usize; 3];
        let mut total = 0usize;
        for walk in &walks {
            if walk[0] == user_node {
                counts[walk[1] as usize - 1] += 1;
                total += 1;
            }
        }
        for c in counts {
            let freq = c as f64 / total as f64;
            assert!(
                (freq - 1.0 / 3.0).abs() <= 0.02,
                "step-1 frequency {freq} off uniform"
            );
        }
    }

    #[test]
    fn walks_deterministic_per_seed() {
        let g = graph_of(&[("u1", "a"), ("u2", "a"), ("u2", "b")]);
        let a = generate_walks(&g, 4, 10, 5).unwrap();
        let b = generate_walks(&g, 4, 10, 5).unwrap();
        assert_eq!(a, b);
        let c = generate_walks(&g, 4, 10, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn duplicate_interactions_become_one_edge() {
        let mut t = InteractionTable::default();
        t.push("u", "i", 4.0);
        t.push("u", "i", 2.0);
        let g = BipartiteGraph::from_interactions(&t).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
    }
}
