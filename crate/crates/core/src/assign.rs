//! One-to-one assignment between two object sets under a distance gate.
//!
//! Pairs are first taken greedily in the caller's preference order; a Kuhn
//! augmenting-path pass then repairs the few cases where a greedy choice
//! blocks a larger matching. The result always has maximum cardinality among
//! gated pairs and keeps greedy choices wherever that is possible.

/// A gated pair, `dist_sq` in squared half-pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub left: usize,
    pub right: usize,
    pub dist_sq: i64,
}

/// Squared center distance in half-pixel units between two boxes' doubled centers.
pub fn center_dist_sq(a: (i32, i32), b: (i32, i32)) -> i64 {
    let dx = i64::from(a.0 - b.0);
    let dy = i64::from(a.1 - b.1);
    dx * dx + dy * dy
}

/// Gate in pixels expressed as a squared half-pixel distance.
pub fn gate_sq(pixels: i32) -> i64 {
    let g = i64::from(pixels) * 2;
    g * g
}

/// `edges` must already be sorted in preference order. Returns `(left, right)`
/// pairs sorted by left index.
pub fn match_edges(n_left: usize, n_right: usize, edges: &[Edge]) -> Vec<(usize, usize)> {
    let mut left_of = vec![usize::MAX; n_right];
    let mut right_of = vec![usize::MAX; n_left];
    for e in edges {
        if right_of[e.left] == usize::MAX && left_of[e.right] == usize::MAX {
            right_of[e.left] = e.right;
            left_of[e.right] = e.left;
        }
    }

    let mut adj = vec![Vec::new(); n_left];
    for e in edges {
        adj[e.left].push(e.right);
    }
    for u in 0..n_left {
        if right_of[u] == usize::MAX && !adj[u].is_empty() {
            let mut seen = vec![false; n_right];
            augment(u, &adj, &mut seen, &mut left_of, &mut right_of);
        }
    }

    right_of
        .iter()
        .enumerate()
        .filter(|(_, &r)| r != usize::MAX)
        .map(|(l, &r)| (l, r))
        .collect()
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    seen: &mut [bool],
    left_of: &mut [usize],
    right_of: &mut [usize],
) -> bool {
    for &v in &adj[u] {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        if left_of[v] == usize::MAX || augment(left_of[v], adj, seen, left_of, right_of) {
            left_of[v] = u;
            right_of[u] = v;
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_cardinality_bruteforce(n_left: usize, n_right: usize, edges: &[Edge]) -> usize {
        fn go(i: usize, n_left: usize, used: u32, edges: &[Edge]) -> usize {
            if i == n_left {
                return 0;
            }
            let mut best = go(i + 1, n_left, used, edges);
            for e in edges.iter().filter(|e| e.left == i) {
                if used & (1 << e.right) == 0 {
                    best = best.max(1 + go(i + 1, n_left, used | (1 << e.right), edges));
                }
            }
            best
        }
        let _ = n_right;
        go(0, n_left, 0, edges)
    }

    #[test]
    fn greedy_trap_is_repaired() {
        // 1-D: refs at 0 and 4, cands at 3 and 8, gate 5.
        let refs = [(0, 0), (8, 0)];
        let cands = [(6, 0), (16, 0)];
        let mut edges = Vec::new();
        for (l, r) in refs.iter().enumerate() {
            for (c, k) in cands.iter().enumerate() {
                let d = center_dist_sq(*r, *k);
                if d <= gate_sq(5) {
                    edges.push(Edge { left: l, right: c, dist_sq: d });
                }
            }
        }
        edges.sort_by_key(|e| e.dist_sq);
        assert_eq!(edges[0], Edge { left: 1, right: 0, dist_sq: 4 });
        let m = match_edges(2, 2, &edges);
        assert_eq!(m, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn matches_bruteforce_on_dense_instances() {
        let mut s = 0x1234_5678_u64;
        let mut next = |n: u64| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            s % n
        };
        for _ in 0..2000 {
            let nl = next(7) as usize;
            let nr = next(7) as usize;
            let mut edges = Vec::new();
            for l in 0..nl {
                for r in 0..nr {
                    if next(3) == 0 {
                        edges.push(Edge { left: l, right: r, dist_sq: next(100) as i64 });
                    }
                }
            }
            edges.sort_by_key(|e| (e.dist_sq, e.left, e.right));
            let m = match_edges(nl, nr, &edges);
            assert_eq!(m.len(), max_cardinality_bruteforce(nl, nr, &edges));
        }
    }
}
