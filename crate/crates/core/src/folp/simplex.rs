//! Dense two-phase primal simplex.

use crate::error::{Error, Result};

pub const FEAS_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_SWITCH: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<f64>, cmp: Cmp, rhs: f64) -> LinearConstraint {
        LinearConstraint { coeffs, cmp, rhs }
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Amount by which `x` violates the constraint (0 if satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let l = self.lhs(x);
        match self.cmp {
            Cmp::Le => (l - self.rhs).max(0.0),
            Cmp::Ge => (self.rhs - l).max(0.0),
            Cmp::Eq => (l - self.rhs).abs(),
        }
    }
}

/// Minimize `objective · x` subject to the constraints and bounds.
/// Variables are free unless a bound is given.
#[derive(Clone, Debug, Default)]
pub struct LPModel {
    pub names: Vec<String>,
    pub objective: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LPSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LPModel {
    pub fn new(n: usize) -> LPModel {
        LPModel {
            names: (0..n).map(|i| format!("x{i}")).collect(),
            objective: vec![0.0; n],
            constraints: Vec::new(),
            lower: vec![None; n],
            upper: vec![None; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, c: LinearConstraint) {
        assert_eq!(c.coeffs.len(), self.num_vars(), "constraint width");
        self.constraints.push(c);
    }

    pub fn nonnegative(mut self) -> LPModel {
        self.lower = vec![Some(0.0); self.num_vars()];
        self
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if self.names.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Model("LP dimensions disagree".into()));
        }
        let finite = |v: &f64| v.is_finite();
        if !self.objective.iter().all(finite)
            || self
                .constraints
                .iter()
                .any(|c| c.coeffs.len() != n || !c.coeffs.iter().all(finite) || !c.rhs.is_finite())
        {
            return Err(Error::Model("LP coefficients must be finite and sized".into()));
        }
        Ok(())
    }
}

/// Column mapping from original variables to nonnegative columns.
enum ColMap {
    Shift { col: usize, lo: f64 },
    Mirror { col: usize, hi: f64 },
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row; last entry is minus the objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Run primal simplex on columns `< limit`. Returns false when unbounded.
    fn optimize(&mut self, limit: usize) -> bool {
        let rhs = self.width;
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_SWITCH;
            let mut enter = None;
            let mut best = -PIVOT_TOL;
            for j in 0..limit {
                let d = self.cost[j];
                if d < -PIVOT_TOL {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if d < best {
                        best = d;
                        enter = Some(j);
                    }
                }
            }
            let Some(c) = enter else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[c];
                if a > PIVOT_TOL {
                    let ratio = row[rhs] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, rk)) => {
                            if ratio < rk - 1e-12
                                || (ratio <= rk + 1e-12 && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, rk))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return false;
            };
            if ratio.abs() <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
    }
}

/// Solve by two-phase simplex.
pub fn solve_lp(m: &LPModel) -> Result<LPSolution> {
    m.check()?;
    let n = m.num_vars();
    // map every variable to nonnegative columns
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut extra_rows: Vec<LinearConstraint> = Vec::new();
    for j in 0..n {
        match (m.lower[j], m.upper[j]) {
            (Some(lo), hi) => {
                maps.push(ColMap::Shift { col: ncols, lo });
                if let Some(hi) = hi {
                    let mut coeffs = vec![0.0; n];
                    coeffs[j] = 1.0;
                    extra_rows.push(LinearConstraint::new(coeffs, Cmp::Le, hi));
                }
                ncols += 1;
            }
            (None, Some(hi)) => {
                maps.push(ColMap::Mirror { col: ncols, hi });
                ncols += 1;
            }
            (None, None) => {
                maps.push(ColMap::Split {
                    pos: ncols,
                    neg: ncols + 1,
                });
                ncols += 2;
            }
        }
    }
    let all: Vec<&LinearConstraint> = m.constraints.iter().chain(extra_rows.iter()).collect();
    let nrows = all.len();

    // rows over structural columns with shifted right-hand sides
    let mut rows_struct: Vec<(Vec<f64>, Cmp, f64)> = Vec::with_capacity(nrows);
    for c in &all {
        let mut row = vec![0.0; ncols];
        let mut rhs = c.rhs;
        for (j, a) in c.coeffs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            match maps[j] {
                ColMap::Shift { col, lo } => {
                    row[col] += a;
                    rhs -= a * lo;
                }
                ColMap::Mirror { col, hi } => {
                    row[col] -= a;
                    rhs -= a * hi;
                }
                ColMap::Split { pos, neg } => {
                    row[pos] += a;
                    row[neg] -= a;
                }
            }
        }
        let mut cmp = c.cmp;
        if rhs < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
            cmp = match cmp {
                Cmp::Le => Cmp::Ge,
                Cmp::Ge => Cmp::Le,
                Cmp::Eq => Cmp::Eq,
            };
        }
        rows_struct.push((row, cmp, rhs));
    }
    let n_slack = rows_struct.iter().filter(|r| r.1 != Cmp::Eq).count();
    let n_art = rows_struct.iter().filter(|r| r.1 != Cmp::Le).count();
    let art_start = ncols + n_slack;
    let width = art_start + n_art;
    let mut rows = Vec::with_capacity(nrows);
    let mut basis = Vec::with_capacity(nrows);
    let (mut s, mut a) = (ncols, art_start);
    for (row, cmp, rhs) in rows_struct {
        let mut full = row;
        full.resize(width + 1, 0.0);
        full[width] = rhs;
        match cmp {
            Cmp::Le => {
                full[s] = 1.0;
                basis.push(s);
                s += 1;
            }
            Cmp::Ge => {
                full[s] = -1.0;
                s += 1;
                full[a] = 1.0;
                basis.push(a);
                a += 1;
            }
            Cmp::Eq => {
                full[a] = 1.0;
                basis.push(a);
                a += 1;
            }
        }
        rows.push(full);
    }
    let mut t = Tableau {
        rows,
        cost: vec![0.0; width + 1],
        basis,
        width,
        pivots: 0,
    };

    if n_art > 0 {
        // phase one: minimize the sum of artificials
        for j in art_start..width {
            t.cost[j] = 1.0;
        }
        for i in 0..t.rows.len() {
            if t.basis[i] >= art_start {
                let row = t.rows[i].clone();
                for (v, rv) in t.cost.iter_mut().zip(&row) {
                    *v -= rv;
                }
            }
        }
        t.optimize(width);
        let infeas = -t.cost[width];
        if infeas > FEAS_TOL {
            return Err(Error::Infeasible);
        }
        // drive remaining artificials out of the basis
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= art_start {
                let col = (0..art_start).find(|&j| t.rows[i][j].abs() > PIVOT_TOL);
                match col {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        t.rows.remove(i);
                        t.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        for row in t.rows.iter_mut() {
            for v in &mut row[art_start..width] {
                *v = 0.0;
            }
        }
    }

    // phase two
    let mut cost = vec![0.0; width + 1];
    let mut obj_shift = 0.0;
    for (j, c) in m.objective.iter().enumerate() {
        match maps[j] {
            ColMap::Shift { col, lo } => {
                cost[col] += c;
                obj_shift += c * lo;
            }
            ColMap::Mirror { col, hi } => {
                cost[col] -= c;
                obj_shift += c * hi;
            }
            ColMap::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }
    for i in 0..t.rows.len() {
        let b = t.basis[i];
        let f = cost[b];
        if f != 0.0 {
            for (v, rv) in cost.iter_mut().zip(&t.rows[i]) {
                *v -= f * rv;
            }
        }
    }
    t.cost = cost;
    if !t.optimize(art_start) {
        return Err(Error::Unbounded("objective decreases without limit".into()));
    }

    let mut cols = vec![0.0; width];
    for (i, &b) in t.basis.iter().enumerate() {
        cols[b] = t.rows[i][width];
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|mp| match *mp {
            ColMap::Shift { col, lo } => lo + cols[col],
            ColMap::Mirror { col, hi } => hi - cols[col],
            ColMap::Split { pos, neg } => cols[pos] - cols[neg],
        })
        .collect();
    let objective: f64 = m.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    debug_assert!((objective - (obj_shift - t.cost[width])).abs() < 1e-6 * (1.0 + objective.abs()));
    for c in &all {
        let scale = 1.0 + c.rhs.abs() + c.coeffs.iter().map(|a| a.abs()).fold(0.0, f64::max);
        if c.violation(&x) > 1e-6 * scale {
            return Err(Error::Numerical(format!(
                "residual {} after {} pivots",
                c.violation(&x),
                t.pivots
            )));
        }
    }
    for j in 0..n {
        if m.lower[j].is_some_and(|l| x[j] < l - 1e-6) || m.upper[j].is_some_and(|u| x[j] > u + 1e-6) {
            return Err(Error::Numerical(format!("bound on {} violated", m.names[j])));
        }
    }
    Ok(LPSolution {
        x,
        objective,
        pivots: t.pivots,
    })
}
