//! Exact two-phase simplex over rationals.
//!
//! Programs are stated over nonnegative variables (the [`ThetaId`]s that
//! occur anywhere in the program): minimize an affine objective subject to
//! affine expressions that must be nonnegative.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};

use crate::minplus::{AffineExpr, Assignment, ThetaId};
use crate::Rational;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinearProgram {
    pub objective: AffineExpr,
    pub constraints: Vec<AffineExpr>,
}

impl LinearProgram {
    pub fn new(objective: AffineExpr) -> Self {
        LinearProgram {
            objective,
            constraints: Vec::new(),
        }
    }

    /// Adds `expr ≥ 0`.
    pub fn add_constraint(&mut self, expr: AffineExpr) {
        self.constraints.push(expr);
    }

    pub fn variables(&self) -> Vec<ThetaId> {
        let mut v: Vec<ThetaId> = self
            .objective
            .thetas()
            .chain(self.constraints.iter().flat_map(|c| c.thetas()))
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// One line per inequality, readable by humans and easy to transcribe
    /// for an external solver.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "minimize {}", self.objective);
        let _ = writeln!(out, "subject to");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = writeln!(out, "  c{i}: {c} >= 0");
        }
        for v in self.variables() {
            let _ = writeln!(out, "  {v} >= 0");
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: Rational,
    pub assignment: Assignment,
}

impl LpSolution {
    fn failed(status: LpStatus) -> Self {
        LpSolution {
            status,
            value: Rational::zero(),
            assignment: Assignment::new(),
        }
    }
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    /// reduced costs of the current objective
    cost: Vec<Rational>,
    cost_value: Rational,
    blocked: Vec<bool>,
    bland: bool,
}

impl Tableau {
    fn ncols(&self) -> usize {
        self.cost.len()
    }

    fn set_objective(&mut self, c: &[Rational]) {
        self.cost = c.to_vec();
        self.cost_value = Rational::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = c[b].clone();
            if cb.is_zero() {
                continue;
            }
            for (j, a) in self.rows[i].iter().enumerate() {
                if !a.is_zero() {
                    self.cost[j] -= &cb * a;
                }
            }
            self.cost_value -= &cb * &self.rhs[i];
        }
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col].clone();
        if !p.is_one() {
            let inv = p.recip();
            for a in self.rows[r].iter_mut() {
                if !a.is_zero() {
                    *a *= &inv;
                }
            }
            self.rhs[r] *= &inv;
        }
        let nz: Vec<usize> = (0..self.ncols())
            .filter(|&j| !self.rows[r][j].is_zero())
            .collect();
        let prow: Vec<Rational> = nz.iter().map(|&j| self.rows[r][j].clone()).collect();
        let prhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][col].clone();
            if f.is_zero() {
                continue;
            }
            for (k, &j) in nz.iter().enumerate() {
                let d = &f * &prow[k];
                self.rows[i][j] -= d;
            }
            self.rhs[i] -= &f * &prhs;
        }
        let f = self.cost[col].clone();
        if !f.is_zero() {
            for (k, &j) in nz.iter().enumerate() {
                let d = &f * &prow[k];
                self.cost[j] -= d;
            }
            self.cost_value -= &f * &prhs;
        }
        self.basis[r] = col;
    }

    fn entering(&self) -> Option<usize> {
        let cands = (0..self.ncols()).filter(|&j| !self.blocked[j] && self.cost[j].is_negative());
        if self.bland {
            cands.min()
        } else {
            // most negative reduced cost, lowest index on ties
            let mut best: Option<usize> = None;
            for j in cands {
                if best.map_or(true, |b| self.cost[j] < self.cost[b]) {
                    best = Some(j);
                }
            }
            best
        }
    }

    fn leaving(&self, col: usize) -> Option<usize> {
        let mut best: Option<(usize, Rational)> = None;
        for i in 0..self.rows.len() {
            let a = &self.rows[i][col];
            if !a.is_positive() {
                continue;
            }
            let ratio = &self.rhs[i] / a;
            let better = match &best {
                None => true,
                Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
            };
            if better {
                best = Some((i, ratio));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Runs simplex iterations on the current objective. Returns false when
    /// the objective is unbounded below.
    fn optimize(&mut self) -> bool {
        loop {
            let Some(col) = self.entering() else {
                return true;
            };
            let Some(r) = self.leaving(col) else {
                return false;
            };
            if self.rhs[r].is_zero() {
                self.bland = true;
            }
            self.pivot(r, col);
        }
    }
}

/// Solves `lp` exactly. Pivoting is deterministic: largest-coefficient
/// entering column until the first degenerate pivot, Bland's rule from then
/// on.
pub fn solve(lp: &LinearProgram) -> LpSolution {
    let vars = lp.variables();
    let index: BTreeMap<ThetaId, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let n = vars.len();
    let m = lp.constraints.len();

    // row i: sign·(a·x − s_i) = −sign·c with a nonnegative right-hand side
    let needs_art: Vec<bool> = lp
        .constraints
        .iter()
        .map(|c| c.constant_part().is_negative())
        .collect();
    let n_art = needs_art.iter().filter(|b| **b).count();
    let ncols = n + m + n_art;
    let mut rows = vec![vec![Rational::zero(); ncols]; m];
    let mut rhs = vec![Rational::zero(); m];
    let mut basis = vec![0; m];
    let mut art = n + m;
    for (i, c) in lp.constraints.iter().enumerate() {
        let sign = if needs_art[i] { Rational::one() } else { -Rational::one() };
        for (id, a) in c.coeffs() {
            rows[i][index[&id]] = &sign * a;
        }
        rows[i][n + i] = -&sign;
        rhs[i] = -(&sign * c.constant_part());
        if needs_art[i] {
            rows[i][art] = Rational::one();
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }

    let mut tab = Tableau {
        rows,
        rhs,
        basis,
        cost: vec![Rational::zero(); ncols],
        cost_value: Rational::zero(),
        blocked: vec![false; ncols],
        bland: false,
    };

    if n_art > 0 {
        let mut c1 = vec![Rational::zero(); ncols];
        for c in c1.iter_mut().skip(n + m) {
            *c = Rational::one();
        }
        tab.set_objective(&c1);
        tab.optimize();
        if !tab.cost_value.is_zero() {
            return LpSolution::failed(LpStatus::Infeasible);
        }
        for j in n + m..ncols {
            tab.blocked[j] = true;
        }
        // drive remaining artificials (all at zero) out of the basis
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= n + m {
                match (0..n + m).find(|&j| !tab.rows[i][j].is_zero()) {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.rows.remove(i);
                        tab.rhs.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let mut c2 = vec![Rational::zero(); ncols];
    for (id, a) in lp.objective.coeffs() {
        c2[index[&id]] = a.clone();
    }
    tab.set_objective(&c2);
    if !tab.optimize() {
        return LpSolution::failed(LpStatus::Unbounded);
    }

    let mut assignment: Assignment = vars.iter().map(|v| (*v, Rational::zero())).collect();
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            assignment.insert(vars[b], tab.rhs[i].clone());
        }
    }
    let value = lp.objective.eval(&assignment);
    LpSolution {
        status: LpStatus::Optimal,
        value,
        assignment,
    }
}
