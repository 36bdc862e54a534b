//! Exact transport by the transportation simplex method.
//!
//! Meant as ground truth on small instances: the basis is kept as a spanning
//! tree of the bipartite row/column graph, potentials are recomputed from
//! scratch at each pivot, and the entering cell is the one with the most
//! negative reduced cost. After a run of degenerate pivots the entering rule
//! switches to Bland's (first improving cell), and if degeneracy persists
//! the supplies are perturbed by `1e-13·i` and the solve restarts.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::{CostMatrix, Histogram, TransportPlan};

/// Largest accepted `n·m`.
pub const MAX_CELLS: usize = 4096;

/// Pivot budget of one solve.
const MAX_PIVOTS: usize = 200_000;

/// Reduced costs above `−OPT_TOL·max(1, max|C|)` count as nonnegative.
const OPT_TOL: f64 = 1e-12;

/// Perturbation step applied to the supplies once cycling is suspected.
const PERTURBATION: f64 = 1e-13;

/// An optimal vertex of the transportation polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    /// `W(p, q) = ⟨C, plan⟩`.
    pub value: f64,
    /// Basic solution with at most `n + m − 1` nonzeros.
    pub plan: TransportPlan,
}

struct Basis {
    n: usize,
    m: usize,
    x: Array2<f64>,
    basic: Vec<bool>,
}

impl Basis {
    fn northwest(supply: &[f64], demand: &[f64]) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut x = Array2::zeros((n, m));
        let mut basic = vec![false; n * m];
        let (mut i, mut j) = (0, 0);
        loop {
            let t = s[i].min(d[j]).max(0.0);
            x[[i, j]] = t;
            basic[i * m + j] = true;
            s[i] -= t;
            d[j] -= t;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if i == n - 1 {
                j += 1;
            } else if j == m - 1 || s[i] <= d[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { n, m, x, basic }
    }

    /// Row and column adjacency lists of the basis tree.
    fn adjacency(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let mut rows = vec![Vec::new(); self.n];
        let mut cols = vec![Vec::new(); self.m];
        for (cell, _) in self.basic.iter().enumerate().filter(|(_, &b)| b) {
            let (i, j) = (cell / self.m, cell % self.m);
            rows[i].push(j);
            cols[j].push(i);
        }
        (rows, cols)
    }

    /// Potentials with `u_0 = 0` and `u_i + v_j = C_ij` on basic cells.
    fn potentials(&self, c: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
        let (rows, cols) = self.adjacency();
        let mut u = vec![f64::NAN; self.n];
        let mut v = vec![f64::NAN; self.m];
        let mut stack = Vec::new();
        for root in 0..self.n {
            if !u[root].is_nan() {
                continue;
            }
            u[root] = 0.0;
            stack.push((true, root));
            while let Some((is_row, k)) = stack.pop() {
                if is_row {
                    for &j in &rows[k] {
                        if v[j].is_nan() {
                            v[j] = c[[k, j]] - u[k];
                            stack.push((false, j));
                        }
                    }
                } else {
                    for &i in &cols[k] {
                        if u[i].is_nan() {
                            u[i] = c[[i, k]] - v[k];
                            stack.push((true, i));
                        }
                    }
                }
            }
        }
        (u, v)
    }

    /// Basic cells on the tree path from row `i0` to column `j0`, in order.
    fn path(&self, i0: usize, j0: usize) -> Option<Vec<(usize, usize)>> {
        let (rows, cols) = self.adjacency();
        // Node ids: rows 0..n, columns n..n+m.
        let total = self.n + self.m;
        let mut parent = vec![usize::MAX; total];
        parent[i0] = i0;
        let mut queue = std::collections::VecDeque::from([i0]);
        while let Some(node) = queue.pop_front() {
            let next: Vec<usize> = if node < self.n {
                rows[node].iter().map(|&j| self.n + j).collect()
            } else {
                cols[node - self.n].clone()
            };
            for nb in next {
                if parent[nb] == usize::MAX {
                    parent[nb] = node;
                    queue.push_back(nb);
                }
            }
        }
        let target = self.n + j0;
        if parent[target] == usize::MAX {
            return None;
        }
        let mut cells = Vec::new();
        let mut node = target;
        while node != i0 {
            let prev = parent[node];
            let cell = if node < self.n { (node, prev - self.n) } else { (prev, node - self.n) };
            cells.push(cell);
            node = prev;
        }
        cells.reverse();
        Some(cells)
    }
}

enum Outcome {
    Optimal(Array2<f64>),
    Cycling,
}

fn run(c: &Array2<f64>, supply: &[f64], demand: &[f64]) -> Result<Outcome> {
    let mut basis = Basis::northwest(supply, demand);
    let (n, m) = (basis.n, basis.m);
    let scale = c.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let enter_tol = -OPT_TOL * scale;
    let mut degenerate_run = 0usize;
    let bland_after = n * m;
    for _ in 0..MAX_PIVOTS {
        let (u, v) = basis.potentials(c);
        let mut entering = None;
        let mut best = enter_tol;
        for i in 0..n {
            for j in 0..m {
                if basis.basic[i * m + j] {
                    continue;
                }
                let d = c[[i, j]] - u[i] - v[j];
                if degenerate_run >= bland_after {
                    if d < enter_tol {
                        entering = Some((i, j));
                        break;
                    }
                } else if d < best {
                    best = d;
                    entering = Some((i, j));
                }
            }
            if degenerate_run >= bland_after && entering.is_some() {
                break;
            }
        }
        let Some((ie, je)) = entering else {
            return Ok(Outcome::Optimal(basis.x));
        };
        let path = basis
            .path(ie, je)
            .ok_or_else(|| Error::InvalidParameter("basis is not a spanning tree".into()))?;
        // Along the cycle entering(+), path[L−1](−), path[L−2](+), …, path[0](−).
        let len = path.len();
        let minus: Vec<(usize, usize)> =
            (0..len).filter(|k| (len - 1 - k) % 2 == 0).map(|k| path[k]).collect();
        let plus: Vec<(usize, usize)> =
            (0..len).filter(|k| (len - 1 - k) % 2 == 1).map(|k| path[k]).collect();
        let mut leaving = minus[0];
        for &cell in &minus[1..] {
            let (a, b) = (basis.x[[cell.0, cell.1]], basis.x[[leaving.0, leaving.1]]);
            if a < b || (a == b && cell.0 * m + cell.1 < leaving.0 * m + leaving.1) {
                leaving = cell;
            }
        }
        let theta = basis.x[[leaving.0, leaving.1]];
        for &(i, j) in &plus {
            basis.x[[i, j]] += theta;
        }
        for &(i, j) in &minus {
            basis.x[[i, j]] = (basis.x[[i, j]] - theta).max(0.0);
        }
        basis.x[[ie, je]] = theta;
        basis.x[[leaving.0, leaving.1]] = 0.0;
        basis.basic[ie * m + je] = true;
        basis.basic[leaving.0 * m + leaving.1] = false;
        if theta == 0.0 {
            degenerate_run += 1;
            if degenerate_run > bland_after + 10 * n * m {
                return Ok(Outcome::Cycling);
            }
        } else {
            degenerate_run = 0;
        }
    }
    Err(Error::PivotLimit(MAX_PIVOTS))
}

/// Minimizes `⟨C, P⟩` over couplings of `p` and `q`.
pub fn exact_transport(cost: &CostMatrix, p: &Histogram, q: &Histogram) -> Result<ExactSolution> {
    cost.require_dims(p.len(), q.len())?;
    let cells = p.len() * q.len();
    if cells > MAX_CELLS {
        return Err(Error::TooLarge { cells, limit: MAX_CELLS });
    }
    let c = cost.entries();
    let x = match run(c, p.values(), q.values())? {
        Outcome::Optimal(x) => x,
        Outcome::Cycling => {
            let n = p.len();
            let supply: Vec<f64> =
                p.values().iter().enumerate().map(|(i, v)| v + PERTURBATION * i as f64).collect();
            let extra = PERTURBATION * (n * (n - 1) / 2) as f64;
            let mut demand = q.values().to_vec();
            if let Some(last) = demand.last_mut() {
                *last += extra;
            }
            match run(c, &supply, &demand)? {
                Outcome::Optimal(x) => x,
                Outcome::Cycling => return Err(Error::PivotLimit(MAX_PIVOTS)),
            }
        }
    };
    let value = x.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
    let plan = TransportPlan::from_iterate(x)?;
    Ok(ExactSolution { value, plan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn swap_cost() -> CostMatrix {
        CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap()
    }

    #[test]
    fn zero_cost_matching() {
        let h = Histogram::uniform(2).unwrap();
        let s = exact_transport(&swap_cost(), &h, &h).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.plan.entries(), &array![[0.5, 0.0], [0.0, 0.5]]);
    }

    #[test]
    fn two_by_two_vertex() {
        let p = Histogram::new(vec![0.7, 0.3]).unwrap();
        let q = Histogram::new(vec![0.4, 0.6]).unwrap();
        let s = exact_transport(&swap_cost(), &p, &q).unwrap();
        assert!((s.value - 0.3).abs() < 1e-15);
        let expect = array![[0.4, 0.3], [0.0, 0.3]];
        for (a, b) in s.plan.view().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn single_cell() {
        let c = CostMatrix::new(array![[2.5]]).unwrap();
        let h = Histogram::uniform(1).unwrap();
        assert_eq!(exact_transport(&c, &h, &h).unwrap().value, 2.5);
    }

    #[test]
    fn rectangular_instance_has_few_nonzeros() {
        let c = CostMatrix::new(array![[3.0, 1.0, 2.0], [1.0, 4.0, 2.0]]).unwrap();
        let p = Histogram::new(vec![0.5, 0.5]).unwrap();
        let q = Histogram::new(vec![0.2, 0.3, 0.5]).unwrap();
        let s = exact_transport(&c, &p, &q).unwrap();
        // Optimum: row 0 → col 1 (0.3) and col 2 (0.2); row 1 → col 0 (0.2), col 2 (0.3).
        assert!((s.value - (0.3 + 0.4 + 0.2 + 0.6)).abs() < 1e-14);
        assert!(s.plan.nonzeros() <= 4);
    }

    #[test]
    fn too_large_rejected() {
        let c = CostMatrix::zeros(65, 64).unwrap();
        let p = Histogram::uniform(65).unwrap();
        let q = Histogram::uniform(64).unwrap();
        assert!(matches!(exact_transport(&c, &p, &q), Err(Error::TooLarge { cells: 4160, .. })));
    }
}
