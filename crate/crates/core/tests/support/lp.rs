//! Vertex-enumeration oracle for `min c·x, rows, x ≥ 0`.

use fomdp_core::folp::{Cmp, LPModel, LinearConstraint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-9;

/// Solve `a x = b` for square `a`; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for k in col..n {
                        a[r][k] -= f * a[col][k];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn rank(rows: &[Vec<f64>]) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| m[i][c].abs() > 1e-10) else {
            continue;
        };
        m.swap(r, p);
        for i in 0..m.len() {
            if i != r {
                let f = m[i][c] / m[r][c];
                for k in c..cols {
                    m[i][k] -= f * m[r][k];
                }
            }
        }
        r += 1;
    }
    r
}

/// Next k-subset of 0..n in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Basic nonnegative solutions of `a x = b`, visited by callback.
fn basic_solutions(a: &[Vec<f64>], b: &[f64], mut visit: impl FnMut(&[usize], &[f64])) {
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    if m == 0 {
        visit(&[], &[]);
        return;
    }
    if m > n {
        return;
    }
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        let sub: Vec<Vec<f64>> = a.iter().map(|row| idx.iter().map(|&j| row[j]).collect()).collect();
        if let Some(x) = solve_square(sub, b.to_vec()) {
            if x.iter().all(|v| *v >= -EPS) {
                visit(&idx, &x);
            }
        }
        if !next_combination(&mut idx, n) {
            break;
        }
    }
}

/// Exact verdict by enumerating basic feasible solutions and extreme rays.
pub fn vertex_oracle(m: &LPModel) -> Verdict {
    let n = m.num_vars();
    let ineq: Vec<usize> = (0..m.constraints.len()).filter(|&i| m.constraints[i].cmp != Cmp::Eq).collect();
    let width = n + ineq.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for (i, c) in m.constraints.iter().enumerate() {
        let mut row = c.coeffs.clone();
        row.resize(width, 0.0);
        if let Some(k) = ineq.iter().position(|&j| j == i) {
            row[n + k] = if c.cmp == Cmp::Le { 1.0 } else { -1.0 };
        }
        rows.push(row);
        rhs.push(c.rhs);
    }
    // drop dependent rows, detecting inconsistent ones
    let mut keep: Vec<usize> = Vec::new();
    for i in 0..rows.len() {
        let mut cand: Vec<Vec<f64>> = keep.iter().map(|&k| rows[k].clone()).collect();
        cand.push(rows[i].clone());
        if rank(&cand) > keep.len() {
            keep.push(i);
        } else {
            let aug: Vec<Vec<f64>> = cand
                .iter()
                .zip(keep.iter().chain(std::iter::once(&i)))
                .map(|(r, &k)| {
                    let mut r = r.clone();
                    r.push(rhs[k]);
                    r
                })
                .collect();
            if rank(&aug) > keep.len() {
                return Verdict::Infeasible;
            }
        }
    }
    let a: Vec<Vec<f64>> = keep.iter().map(|&k| rows[k].clone()).collect();
    let b: Vec<f64> = keep.iter().map(|&k| rhs[k]).collect();
    let mut cost = m.objective.clone();
    cost.resize(width, 0.0);

    let mut best: Option<f64> = None;
    basic_solutions(&a, &b, |idx, x| {
        let v: f64 = idx.iter().zip(x).map(|(&j, v)| cost[j] * v).sum();
        best = Some(best.map_or(v, |b: f64| b.min(v)));
    });
    let Some(best) = best else {
        return Verdict::Infeasible;
    };
    // extreme rays: basic solutions of {A d = 0, Σd = 1, d ≥ 0}
    let mut ra = a.clone();
    ra.push(vec![1.0; width]);
    let mut rb = vec![0.0; a.len()];
    rb.push(1.0);
    let mut unbounded = false;
    basic_solutions(&ra, &rb, |idx, d| {
        let v: f64 = idx.iter().zip(d).map(|(&j, v)| cost[j] * v).sum();
        if v < -1e-9 {
            unbounded = true;
        }
    });
    if unbounded {
        Verdict::Unbounded
    } else {
        Verdict::Optimal(best)
    }
}

/// Random small-integer LP over nonnegative variables.
pub fn random_lp(seed: u64) -> LPModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=20);
    let rows = rng.gen_range(1..=4);
    let mut m = LPModel::new(n).nonnegative();
    m.objective = (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect();
    for _ in 0..rows {
        let coeffs: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.6) { rng.gen_range(-5..=5) as f64 } else { 0.0 })
            .collect();
        let cmp = match rng.gen_range(0..10) {
            0..=4 => Cmp::Le,
            5..=7 => Cmp::Ge,
            _ => Cmp::Eq,
        };
        m.add(LinearConstraint::new(coeffs, cmp, rng.gen_range(-10..=20) as f64));
    }
    // a budget row keeps most instances bounded
    if rng.gen_bool(0.7) {
        m.add(LinearConstraint::new(vec![1.0; n], Cmp::Le, 30.0));
    }
    m
}
