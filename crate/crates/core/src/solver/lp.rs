//! Dense two-phase simplex for the small linear programs used as oracles.
//!
//! Solves `min cᵀx` subject to `A_ub·x ≤ b_ub`, `A_eq·x = b_eq`, `x ≥ 0`
//! with Bland's rule, so it terminates on degenerate problems. Every row
//! carries its own artificial column for the whole solve; reading the
//! reduced costs of those columns gives the row duals at the end.

use crate::error::{Error, Result};

/// Pivot and feasibility tolerance.
pub const LP_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// `∂objective/∂b_ub`, always `≤ 0`.
    pub dual_ub: Vec<f64>,
    /// `∂objective/∂b_eq`.
    pub dual_eq: Vec<f64>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Reduced costs, one per column.
    obj: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f != 0.0 {
                for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.rhs[i] -= f * pivot_rhs;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule over columns `< allowed`.
    fn optimise(&mut self, allowed: usize) -> Result<()> {
        loop {
            let Some(c) = (0..allowed).find(|&j| self.obj[j] < -LP_TOLERANCE) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > LP_TOLERANCE {
                    let ratio = self.rhs[i] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((b, br)) => {
                            if ratio < br - LP_TOLERANCE
                                || (ratio <= br + LP_TOLERANCE && self.basis[i] < self.basis[b])
                            {
                                Some((i, ratio))
                            } else {
                                Some((b, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return Err(Error::Unbounded),
            }
        }
    }

    /// Reduced costs for cost vector `c` given the current basis.
    fn price(&mut self, c: &[f64]) {
        self.obj = c.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = c[b];
            if cb != 0.0 {
                for (o, v) in self.obj.iter_mut().zip(&self.rows[i]) {
                    *o -= cb * v;
                }
            }
        }
    }
}

impl LinearProgram {
    fn check(&self) -> Result<usize> {
        let n = self.cost.len();
        if self.a_ub.len() != self.b_ub.len() || self.a_eq.len() != self.b_eq.len() {
            return Err(Error::Dimension("row count and right-hand side differ".into()));
        }
        if self.a_ub.iter().chain(&self.a_eq).any(|r| r.len() != n) {
            return Err(Error::Dimension("constraint row length differs from cost".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.cost)
            || !finite(&self.b_ub)
            || !finite(&self.b_eq)
            || !self.a_ub.iter().chain(&self.a_eq).all(|r| finite(r))
        {
            return Err(Error::Numeric("non-finite LP data".into()));
        }
        Ok(n)
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let n = self.check()?;
        let m_ub = self.a_ub.len();
        let m = m_ub + self.a_eq.len();
        let art0 = n + m_ub;
        let width = art0 + m;

        let mut sign = vec![1.0; m];
        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        for (i, (a, &b)) in self
            .a_ub
            .iter()
            .zip(&self.b_ub)
            .chain(self.a_eq.iter().zip(&self.b_eq))
            .enumerate()
        {
            let s = if b < 0.0 { -1.0 } else { 1.0 };
            sign[i] = s;
            let mut row = vec![0.0; width];
            for (r, v) in row.iter_mut().zip(a) {
                *r = s * v;
            }
            if i < m_ub {
                row[n + i] = s;
            }
            row[art0 + i] = 1.0;
            rows.push(row);
            rhs.push(s * b);
        }
        let mut tab = Tableau {
            rows,
            rhs,
            obj: Vec::new(),
            basis: (art0..width).collect(),
        };

        let mut phase1 = vec![0.0; width];
        for c in &mut phase1[art0..] {
            *c = 1.0;
        }
        tab.price(&phase1);
        tab.optimise(art0)?;
        let infeasibility: f64 = tab
            .basis
            .iter()
            .zip(&tab.rhs)
            .filter(|(&b, _)| b >= art0)
            .map(|(_, r)| r)
            .sum();
        if infeasibility > LP_TOLERANCE * (1.0 + m as f64) {
            // phase-one duals certify infeasibility
            let certificate = (0..m)
                .map(|i| sign[i] * (1.0 - tab.obj[art0 + i]))
                .collect();
            return Err(Error::Infeasible {
                residual: infeasibility,
                certificate,
            });
        }
        // drive zero-level artificials out where a real column can replace them
        for r in 0..m {
            if tab.basis[r] >= art0 {
                if let Some(c) = (0..art0).find(|&j| tab.rows[r][j].abs() > LP_TOLERANCE) {
                    tab.pivot(r, c);
                }
            }
        }

        let mut phase2 = vec![0.0; width];
        phase2[..n].copy_from_slice(&self.cost);
        tab.price(&phase2);
        tab.optimise(art0)?;

        let mut x = vec![0.0; n];
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < n {
                x[b] = tab.rhs[i].max(0.0);
            }
        }
        let objective = self.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        let dual: Vec<f64> = (0..m).map(|i| -sign[i] * tab.obj[art0 + i]).collect();
        Ok(LpSolution {
            x,
            objective,
            dual_ub: dual[..m_ub].to_vec(),
            dual_eq: dual[m_ub..].to_vec(),
        })
    }
}
