//! Reverse Cuthill–McKee bandwidth reduction.

use std::collections::VecDeque;

use super::CsrMatrix;
use crate::scalar::Real;

/// Returns a permutation `perm[new] = old` reducing the bandwidth of the
/// symmetrized pattern of `a`.
///
/// Rows whose degree exceeds `max(16, 10 sqrt(n))` (bordering rows such as
/// the constraint row of the extended stiffness matrix) are left out of the
/// breadth-first search and ordered last.
pub fn reverse_cuthill_mckee<T: Real>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "ordering requires a square matrix");
    if n == 0 {
        return Vec::new();
    }
    let adj = symmetric_adjacency(a);
    let dense_cutoff = 16usize.max((10.0 * (n as f64).sqrt()) as usize);
    let dense: Vec<bool> = adj.iter().map(|nb| nb.len() > dense_cutoff).collect();
    let degree: Vec<usize> = adj
        .iter()
        .map(|nb| nb.iter().filter(|&&j| !dense[j]).count())
        .collect();

    let mut visited = dense.clone();
    let mut order = Vec::with_capacity(n);
    loop {
        let Some(seed) = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]) else {
            break;
        };
        let start = pseudo_peripheral(seed, &adj, &dense, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order.extend((0..n).filter(|&i| dense[i]));
    order
}

fn symmetric_adjacency<T: Real>(a: &CsrMatrix<T>) -> Vec<Vec<usize>> {
    let n = a.rows();
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for nb in &mut adj {
        nb.sort_unstable();
        nb.dedup();
    }
    adj
}

/// George–Liu style search for a node of (near) maximal eccentricity.
fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], dense: &[bool], degree: &[usize]) -> usize {
    let mut root = seed;
    let (mut levels, mut last) = bfs_levels(root, adj, dense);
    loop {
        let candidate = last
            .iter()
            .copied()
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(root);
        let (l2, last2) = bfs_levels(candidate, adj, dense);
        if l2 > levels {
            root = candidate;
            levels = l2;
            last = last2;
        } else {
            return root;
        }
    }
}

fn bfs_levels(root: usize, adj: &[Vec<usize>], dense: &[bool]) -> (usize, Vec<usize>) {
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut frontier = vec![root];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in &adj[v] {
                if !dense[w] && level[w] == usize::MAX {
                    level[w] = depth + 1;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return (depth, frontier);
        }
        depth += 1;
        frontier = next;
    }
}

/// Half-bandwidth of `P A P^T`.
pub fn bandwidth<T: Real>(a: &CsrMatrix<T>, perm: &[usize]) -> usize {
    let mut inv = vec![0usize; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    a.triplets()
        .map(|(i, j, _)| inv[i].abs_diff(inv[j]))
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;

    fn grid_laplacian(side: usize, shuffle: bool) -> CsrMatrix<f64> {
        let n = side * side;
        let id = |i: usize, j: usize| {
            let k = j * side + i;
            if shuffle {
                (k * 7919) % n
            } else {
                k
            }
        };
        let mut b = TripletBuilder::new(n, n);
        for j in 0..side {
            for i in 0..side {
                b.push(id(i, j), id(i, j), 4.0);
                if i + 1 < side {
                    b.push(id(i, j), id(i + 1, j), -1.0);
                    b.push(id(i + 1, j), id(i, j), -1.0);
                }
                if j + 1 < side {
                    b.push(id(i, j), id(i, j + 1), -1.0);
                    b.push(id(i, j + 1), id(i, j), -1.0);
                }
            }
        }
        b.build()
    }

    #[test]
    fn is_a_permutation() {
        let a = grid_laplacian(9, true);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..81).collect::<Vec<_>>());
    }

    #[test]
    fn reduces_bandwidth_of_shuffled_grid() {
        let a = grid_laplacian(20, true);
        let natural: Vec<usize> = (0..400).collect();
        let p = reverse_cuthill_mckee(&a);
        assert!(bandwidth(&a, &p) <= 25, "bandwidth {}", bandwidth(&a, &p));
        assert!(bandwidth(&a, &natural) > 100);
    }

    #[test]
    fn dense_border_row_goes_last() {
        let base = grid_laplacian(12, false);
        let n = base.rows();
        let mut b = TripletBuilder::new(n + 1, n + 1);
        base.push_into(&mut b, 0, 0, 1.0, false);
        for i in 0..n {
            b.push(i, n, 1.0);
            b.push(n, i, 1.0);
        }
        let a = b.build();
        let p = reverse_cuthill_mckee(&a);
        assert_eq!(*p.last().unwrap(), n);
    }
}
