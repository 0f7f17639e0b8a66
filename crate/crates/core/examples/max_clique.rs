//! Exact maximum clique on a random graph with a planted clique, serial and
//! parallel, plus a node-budgeted run that stops early.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semloc::clique::{degeneracy_order, greedy_clique_lower_bound};
use semloc::{AdjacencyMatrix, Budget, MaxCliqueSolver};

fn main() {
    let n = 400;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut g = AdjacencyMatrix::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.2) {
                g.add_edge(i, j);
            }
        }
    }
    let planted: Vec<usize> = (0..n).step_by(25).collect();
    for (a, &i) in planted.iter().enumerate() {
        for &j in &planted[a + 1..] {
            g.add_edge(i, j);
        }
    }
    println!("graph: {n} vertices, {} edges, planted clique of {}", g.edge_count(), planted.len());

    let (core, _) = degeneracy_order(&g);
    println!("degeneracy: {}", core.iter().max().unwrap());
    println!("greedy lower bound: {}", greedy_clique_lower_bound(&g).size);

    for parallel in [false, true] {
        let start = std::time::Instant::now();
        let result = MaxCliqueSolver { budget: Budget::unlimited(), parallel }.solve(&g);
        println!(
            "parallel={parallel}: size {} exact {} in {:.1?}  members {:?}",
            result.size,
            result.certified_exact,
            start.elapsed(),
            result.members
        );
    }

    let capped = MaxCliqueSolver { budget: Budget::nodes(50), parallel: false }.solve(&g);
    println!("50-node budget: size {} exact {}", capped.size, capped.certified_exact);
}
