//! Minimum-cost assignment on a square cost matrix (O(n³), potentials +
//! augmenting paths). Costs must be finite.

/// Returns, for each row, the assigned column. `costs` is row-major n×n.
pub fn solve_square(costs: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(costs.len(), n * n);
    if n == 0 {
        return Vec::new();
    }

    // 1-based internals; potentials u (rows), v (columns);
    // way[j] = previous column on the augmenting path.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1]; // column -> assigned row (0 = none)
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut min_v = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for j in 1..=n {
        if row_of[j] != 0 {
            assignment[row_of[j] - 1] = j - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_min(costs: &[f64], n: usize) -> f64 {
        fn recurse(costs: &[f64], n: usize, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == n {
                *best = best.min(acc);
                return;
            }
            for col in 0..n {
                if !used[col] {
                    used[col] = true;
                    recurse(costs, n, row + 1, used, acc + costs[row * n + col], best);
                    used[col] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        recurse(costs, n, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn diagonal_dominant_matrix() {
        let costs = vec![0.01, 0.15, 0.15, 0.01];
        assert_eq!(solve_square(&costs, 2), vec![0, 1]);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.random_range(1..=7);
            let costs: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..10.0)).collect();
            let assignment = solve_square(&costs, n);
            let total: f64 = assignment
                .iter()
                .enumerate()
                .map(|(i, &j)| costs[i * n + j])
                .sum();
            let expected = brute_force_min(&costs, n);
            assert!((total - expected).abs() < 1e-9, "n={n}: {total} vs {expected}");

            let mut seen = vec![false; n];
            for &j in &assignment {
                assert!(!seen[j], "column used twice");
                seen[j] = true;
            }
        }
    }
}
