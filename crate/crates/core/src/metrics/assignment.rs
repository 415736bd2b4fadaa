//! Rectangular linear assignment (Jonker-Volgenant shortest augmenting
//! path) and the noun/object IoU built on it.

use std::collections::BTreeSet;

/// Binary similarity: equal words or a declared synonym pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimilarityTable {
    pub vocabulary: Vec<String>,
    pairs: BTreeSet<(String, String)>,
}

impl SimilarityTable {
    pub fn new(vocabulary: Vec<String>, synonyms: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut pairs = BTreeSet::new();
        for (a, b) in synonyms {
            pairs.insert((a.clone(), b.clone()));
            pairs.insert((b, a));
        }
        Self { vocabulary, pairs }
    }

    pub fn sim(&self, a: &str, b: &str) -> f64 {
        if a == b || self.pairs.contains(&(a.to_string(), b.to_string())) {
            1.0
        } else {
            0.0
        }
    }
}

/// Minimum-cost assignment of every row of a `rows x cols` cost matrix
/// (`rows <= cols`) to a distinct column. Returns `row -> column`.
///
/// Shortest augmenting path with dual potentials: each row is inserted in
/// turn and a Dijkstra-like scan over reduced costs finds the cheapest
/// alternating path to a free column.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    assert!(rows <= cols, "solve_assignment needs rows <= cols");
    assert!(cost.iter().all(|r| r.len() == cols), "ragged cost matrix");

    // Column `cols` is a virtual root; arrays are indexed 0..=cols.
    let root = cols;
    let mut u = vec![0.0f64; rows];
    let mut v = vec![0.0f64; cols + 1];
    let mut col_row = vec![usize::MAX; cols + 1];
    let mut way = vec![root; cols + 1];

    for i in 0..rows {
        col_row[root] = i;
        let mut j0 = root;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = root;
            for j in 0..cols {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0][j] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == usize::MAX {
                break;
            }
        }
        // Augment along the alternating path back to the root.
        loop {
            let prev = way[j0];
            col_row[j0] = col_row[prev];
            j0 = prev;
            if j0 == root {
                break;
            }
        }
    }
    let mut assignment = vec![usize::MAX; rows];
    for (j, &r) in col_row.iter().enumerate().take(cols) {
        if r != usize::MAX {
            assignment[r] = j;
        }
    }
    assignment
}

/// Matched pairs with similarity at least 0.5 under a minimum-cost
/// assignment with cost `1 - sim`.
pub fn assignment_matches(nouns: &[String], objects: &[String], sim: &SimilarityTable) -> usize {
    if nouns.is_empty() || objects.is_empty() {
        return 0;
    }
    let (rows, cols, transposed) = if nouns.len() <= objects.len() { (nouns, objects, false) } else { (objects, nouns, true) };
    let sims: Vec<Vec<f64>> = rows
        .iter()
        .map(|a| cols.iter().map(|b| if transposed { sim.sim(b, a) } else { sim.sim(a, b) }).collect())
        .collect();
    let cost: Vec<Vec<f64>> = sims.iter().map(|r| r.iter().map(|s| 1.0 - s).collect()).collect();
    solve_assignment(&cost).iter().enumerate().filter(|&(i, &j)| sims[i][j] >= 0.5).count()
}

/// `m / (|N| + |O| - m)` over multisets; 0 when either side is empty.
pub fn assignment_iou(nouns: &[String], objects: &[String], sim: &SimilarityTable) -> f64 {
    if nouns.is_empty() || objects.is_empty() {
        return 0.0;
    }
    let m = assignment_matches(nouns, objects, sim);
    m as f64 / (nouns.len() + objects.len() - m) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    /// Oracle: try every injective map of rows into columns.
    fn brute_force_cost(cost: &[Vec<f64>]) -> f64 {
        fn go(cost: &[Vec<f64>], i: usize, used: &mut Vec<bool>) -> f64 {
            if i == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[i][j] + go(cost, i + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(cost, 0, &mut vec![false; cost[0].len()])
    }

    #[test]
    fn worked_examples() {
        let sim = SimilarityTable::default();
        let iou = assignment_iou(&words(&["couch", "table"]), &words(&["couch", "table", "chair"]), &sim);
        assert!((iou - 2.0 / 3.0).abs() < 1e-15);
        let same = words(&["bed", "tv", "bed"]);
        assert_eq!(assignment_iou(&same, &same, &sim), 1.0);
        assert_eq!(assignment_iou(&[], &words(&["couch"]), &sim), 0.0);
        assert_eq!(assignment_iou(&[], &[], &sim), 0.0);
    }

    #[test]
    fn synonyms_count_as_matches() {
        let sim = SimilarityTable::new(vec![], [("sofa".to_string(), "couch".to_string())]);
        assert_eq!(sim.sim("couch", "sofa"), 1.0);
        assert_eq!(assignment_iou(&words(&["sofa"]), &words(&["couch"]), &sim), 1.0);
    }

    #[test]
    fn known_cost_matrix() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = solve_assignment(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
        assert_eq!(total, brute_force_cost(&cost));
    }

    proptest! {
        #[test]
        fn matches_brute_force_on_real_costs(
            rows in 1usize..6, extra in 0usize..3,
            vals in proptest::collection::vec(0u32..20, 64),
        ) {
            let cols = rows + extra;
            let cost: Vec<Vec<f64>> = (0..rows).map(|i| (0..cols).map(|j| vals[(i * cols + j) % vals.len()] as f64 * 0.5).collect()).collect();
            let a = solve_assignment(&cost);
            let mut seen = std::collections::BTreeSet::new();
            prop_assert!(a.iter().all(|&j| j < cols && seen.insert(j)));
            let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            prop_assert!((total - brute_force_cost(&cost)).abs() < 1e-9);
        }

        #[test]
        fn iou_is_symmetric_and_bounded(
            n in proptest::collection::vec(0usize..5, 0..7),
            o in proptest::collection::vec(0usize..5, 0..7),
        ) {
            let vocab = ["a", "b", "c", "d", "e"];
            let nn: Vec<String> = n.iter().map(|&i| vocab[i].to_string()).collect();
            let oo: Vec<String> = o.iter().map(|&i| vocab[i].to_string()).collect();
            let sim = SimilarityTable::new(vec![], [("a".to_string(), "e".to_string())]);
            let x = assignment_iou(&nn, &oo, &sim);
            prop_assert_eq!(x, assignment_iou(&oo, &nn, &sim));
            prop_assert!((0.0..=1.0).contains(&x));
            let mut n2 = nn.clone();
            let mut o2 = oo.clone();
            n2.push("c".into());
            o2.push("c".into());
            prop_assert!(assignment_iou(&n2, &o2, &sim) >= x);
        }
    }
}
