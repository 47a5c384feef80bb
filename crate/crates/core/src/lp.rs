//! Minimum-norm linear programs and the dense two-phase simplex that solves them.
//!
//! A program is `minimize ||d||` subject to rows `c_i . d <= r_i`, for
//! `||.||` either L1 or L-infinity. Both reformulate into a standard-form LP
//! with non-negative variables:
//!
//! * L1: `d = d+ - d-`, objective `sum(d+ + d-)`.
//! * L-inf: `d = d+ - d-` plus `t >= 0` with `-t <= d_j <= t`, objective `t`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest magnitude accepted as a pivot element.
pub const PIVOT_TOL: f64 = 1e-9;

/// Guard against numerical cycling; Bland's rule terminates in exact arithmetic.
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Norm {
    #[serde(rename = "l1", alias = "L1")]
    L1,
    #[serde(rename = "linf", alias = "Linf", alias = "LInf", alias = "l-inf")]
    LInf,
}

impl Norm {
    pub fn of(&self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// Combines per-sub-network costs: sum under L1, max under L-inf.
    pub fn total(&self, costs: &[f64]) -> f64 {
        match self {
            Norm::L1 => costs.iter().sum(),
            Norm::LInf => costs.iter().fold(0.0, |m, &c| m.max(c)),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "l1",
            Norm::LInf => "linf",
        })
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "linf" | "l-inf" | "linfinity" => Ok(Norm::LInf),
            other => Err(Error::InvalidConfig(format!("unknown norm `{other}`"))),
        }
    }
}

/// `minimize ||d||` over `d` in `R^m` subject to `coeffs_i . d <= rhs_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    dim: usize,
    coeffs: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    norm: Norm,
}

impl LinearProgram {
    pub fn new(dim: usize, norm: Norm) -> Self {
        Self {
            dim,
            coeffs: Vec::new(),
            rhs: Vec::new(),
            norm,
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<()> {
        if coeffs.len() != self.dim {
            return Err(Error::LpInternal(format!(
                "row has {} coefficients, program has {} variables",
                coeffs.len(),
                self.dim
            )));
        }
        if !rhs.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::LpInternal("non-finite coefficient".into()));
        }
        self.coeffs.push(coeffs);
        self.rhs.push(rhs);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn num_rows(&self) -> usize {
        self.coeffs.len()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.coeffs.iter().map(Vec::as_slice).zip(self.rhs.iter().copied())
    }

    /// Largest row violation of `delta`; `-inf` when there are no rows.
    pub fn max_violation(&self, delta: &[f64]) -> f64 {
        self.rows()
            .map(|(c, r)| c.iter().zip(delta).map(|(a, d)| a * d).sum::<f64>() - r)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn standard_form(&self) -> StandardForm {
        let m = self.dim;
        match self.norm {
            Norm::L1 => {
                let a = self
                    .coeffs
                    .iter()
                    .map(|row| row.iter().copied().chain(row.iter().map(|c| -c)).collect())
                    .collect();
                StandardForm {
                    cost: vec![1.0; 2 * m],
                    a,
                    b: self.rhs.clone(),
                }
            }
            Norm::LInf => {
                let width = 2 * m + 1;
                let mut a: Vec<Vec<f64>> = self
                    .coeffs
                    .iter()
                    .map(|row| {
                        row.iter()
                            .copied()
                            .chain(row.iter().map(|c| -c))
                            .chain(std::iter::once(0.0))
                            .collect()
                    })
                    .collect();
                let mut b = self.rhs.clone();
                for j in 0..m {
                    // d_j - t <= 0 and -d_j - t <= 0
                    let mut upper = vec![0.0; width];
                    upper[j] = 1.0;
                    upper[m + j] = -1.0;
                    upper[2 * m] = -1.0;
                    let mut lower = vec![0.0; width];
                    lower[j] = -1.0;
                    lower[m + j] = 1.0;
                    lower[2 * m] = -1.0;
                    a.push(upper);
                    a.push(lower);
                    b.extend([0.0, 0.0]);
                }
                let mut cost = vec![0.0; width];
                cost[2 * m] = 1.0;
                StandardForm { cost, a, b }
            }
        }
    }

    /// Plain-text dump of the standard-form program and its initial tableau.
    pub fn to_tableau_text(&self) -> String {
        let sf = self.standard_form();
        let m = self.dim;
        let mut names: Vec<String> = (0..m)
            .map(|j| format!("d{j}+"))
            .chain((0..m).map(|j| format!("d{j}-")))
            .collect();
        if self.norm == Norm::LInf {
            names.push("t".into());
        }
        names.extend((0..sf.a.len()).map(|i| format!("s{i}")));

        let mut out = String::new();
        let _ = writeln!(
            out,
            "# min-norm LP: norm={} vars={} rows={}",
            self.norm,
            m,
            self.num_rows()
        );
        for (i, (c, r)) in self.rows().enumerate() {
            let terms: Vec<String> = c
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| format!("{v:+} d{j}"))
                .collect();
            let lhs = if terms.is_empty() {
                "0".to_string()
            } else {
                terms.join(" ")
            };
            let _ = writeln!(out, "# row {i}: {lhs} <= {r}");
        }
        let _ = writeln!(out, "{} | rhs", names.join("\t"));
        let rows = sf.a.len();
        for (i, (row, b)) in sf.a.iter().zip(&sf.b).enumerate() {
            let mut cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            cells.extend((0..rows).map(|k| if k == i { "1" } else { "0" }.to_string()));
            let _ = writeln!(out, "{} | {b}", cells.join("\t"));
        }
        let mut obj: Vec<String> = sf.cost.iter().map(|v| format!("{v}")).collect();
        obj.extend((0..rows).map(|_| "0".to_string()));
        let _ = writeln!(out, "{} | min", obj.join("\t"));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub delta: Vec<f64>,
    pub objective: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub fn solve_min_norm(program: &LinearProgram) -> Result<LpSolution> {
    let m = program.dim;
    if program.num_rows() == 0 {
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            delta: vec![0.0; m],
            objective: 0.0,
        });
    }
    let sf = program.standard_form();
    match simplex(&sf)? {
        None => Ok(LpSolution {
            status: LpStatus::Infeasible,
            delta: vec![0.0; m],
            objective: f64::INFINITY,
        }),
        Some(x) => {
            let delta: Vec<f64> = (0..m).map(|j| x[j] - x[m + j]).collect();
            let objective = program.norm.of(&delta);
            Ok(LpSolution {
                status: LpStatus::Optimal,
                delta,
                objective,
            })
        }
    }
}

/// `minimize cost . x` s.t. `a x <= b`, `x >= 0`.
struct StandardForm {
    cost: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

/// Dense tableau. Columns: structural, one slack per row, then artificials.
struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    num_cols: usize,
}

enum PivotOutcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[i][self.num_cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    fn reduced_costs(&self, cost: &[f64], allowed: usize) -> Vec<f64> {
        let mut r = cost[..allowed].to_vec();
        for (i, &bv) in self.basis.iter().enumerate() {
            let cb = cost[bv];
            if cb != 0.0 {
                for (rj, tj) in r.iter_mut().zip(&self.t[i]) {
                    *rj -= cb * tj;
                }
            }
        }
        r
    }

    /// Runs Bland's-rule pivots over the first `allowed` columns.
    fn optimize(&mut self, cost: &[f64], allowed: usize, pivots: &mut usize) -> Result<PivotOutcome> {
        loop {
            let reduced = self.reduced_costs(cost, allowed);
            let Some(col) = reduced.iter().position(|&r| r < -PIVOT_TOL) else {
                return Ok(PivotOutcome::Optimal);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12
                                || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = best else {
                return Ok(PivotOutcome::Unbounded);
            };
            self.pivot(row, col);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::LpInternal("pivot limit exceeded".into()));
            }
        }
    }
}

/// Two-phase simplex. `None` means infeasible.
fn simplex(sf: &StandardForm) -> Result<Option<Vec<f64>>> {
    let rows = sf.a.len();
    let n = sf.cost.len();
    let negative: Vec<usize> = (0..rows).filter(|&i| sf.b[i] < 0.0).collect();
    let structural_and_slack = n + rows;
    let num_cols = structural_and_slack + negative.len();

    let mut t = vec![vec![0.0; num_cols + 1]; rows];
    let mut basis = vec![0; rows];
    let mut art = structural_and_slack;
    for i in 0..rows {
        let sign = if sf.b[i] < 0.0 { -1.0 } else { 1.0 };
        for (cell, &a) in t[i].iter_mut().zip(&sf.a[i][..n]) {
            *cell = sign * a;
        }
        t[i][n + i] = sign;
        t[i][num_cols] = sign * sf.b[i];
        if sign < 0.0 {
            t[i][art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let mut tab = Tableau { t, basis, num_cols };
    let mut pivots = 0;

    if !negative.is_empty() {
        let mut phase1 = vec![0.0; num_cols];
        for c in phase1.iter_mut().skip(structural_and_slack) {
            *c = 1.0;
        }
        if let PivotOutcome::Unbounded = tab.optimize(&phase1, num_cols, &mut pivots)? {
            return Err(Error::LpInternal("phase 1 unbounded".into()));
        }
        let infeasibility: f64 = (0..rows)
            .filter(|&i| tab.basis[i] >= structural_and_slack)
            .map(|i| tab.rhs(i))
            .sum();
        let scale = 1.0 + sf.b.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        if infeasibility > PIVOT_TOL * scale {
            return Ok(None);
        }
        // Drive remaining (zero-valued) artificials out of the basis.
        let mut i = 0;
        while i < tab.t.len() {
            if tab.basis[i] >= structural_and_slack {
                let col = (0..structural_and_slack)
                    .filter(|&j| tab.t[i][j].abs() > PIVOT_TOL)
                    .max_by(|&a, &b| tab.t[i][a].abs().total_cmp(&tab.t[i][b].abs()));
                match col {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.t.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let mut phase2 = vec![0.0; num_cols];
    phase2[..n].copy_from_slice(&sf.cost);
    match tab.optimize(&phase2, structural_and_slack, &mut pivots)? {
        PivotOutcome::Optimal => {}
        PivotOutcome::Unbounded => {
            return Err(Error::LpInternal("norm objective reported unbounded".into()));
        }
    }
    let mut x = vec![0.0; n];
    for (i, &bv) in tab.basis.iter().enumerate() {
        if bv < n {
            x[bv] = tab.rhs(i).max(0.0);
        }
    }
    Ok(Some(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn program(dim: usize, norm: Norm, rows: &[(&[f64], f64)]) -> LinearProgram {
        let mut lp = LinearProgram::new(dim, norm);
        for (c, r) in rows {
            lp.add_row(c.to_vec(), *r).unwrap();
        }
        lp
    }

    #[test]
    fn single_free_weight_toy() {
        // 10 a + 1 + 0.1 <= -11
        let lp = program(1, Norm::L1, &[(&[10.0], -12.1)]);
        let sol = solve_min_norm(&lp).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.delta[0] + 1.21).abs() < 1e-9);
        assert!((sol.objective - 1.21).abs() < 1e-9);
    }

    #[test]
    fn empty_program_is_zero() {
        for norm in [Norm::L1, Norm::LInf] {
            let sol = solve_min_norm(&LinearProgram::new(4, norm)).unwrap();
            assert_eq!(sol.delta, vec![0.0; 4]);
            assert_eq!(sol.objective, 0.0);
        }
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        for norm in [Norm::L1, Norm::LInf] {
            let lp = program(1, norm, &[(&[1.0], -1.0), (&[-1.0], -1.0)]);
            assert_eq!(solve_min_norm(&lp).unwrap().status, LpStatus::Infeasible);
        }
    }

    #[test]
    fn linf_spreads_change() {
        // d0 + d1 >= 2: L1 optimum 2 (any split), Linf optimum 1 at (1, 1).
        let rows: &[(&[f64], f64)] = &[(&[-1.0, -1.0], -2.0)];
        let l1 = solve_min_norm(&program(2, Norm::L1, rows)).unwrap();
        assert!((l1.objective - 2.0).abs() < 1e-9);
        let linf = solve_min_norm(&program(2, Norm::LInf, rows)).unwrap();
        assert!((linf.objective - 1.0).abs() < 1e-9);
        assert!((linf.delta[0] - 1.0).abs() < 1e-9 && (linf.delta[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn feasible_origin_costs_nothing() {
        let lp = program(3, Norm::L1, &[(&[1.0, 2.0, 3.0], 4.0), (&[-1.0, 0.0, 0.0], 0.5)]);
        let sol = solve_min_norm(&lp).unwrap();
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn equality_pair_and_redundant_rows() {
        // d0 = 3 written twice, forcing redundant artificial rows.
        let lp = program(
            2,
            Norm::L1,
            &[(&[1.0, 0.0], 3.0), (&[-1.0, 0.0], -3.0), (&[-2.0, 0.0], -6.0)],
        );
        let sol = solve_min_norm(&lp).unwrap();
        assert!((sol.delta[0] - 3.0).abs() < 1e-9);
        assert!(sol.delta[1].abs() < 1e-12);
    }

    #[test]
    fn wrong_row_width_rejected() {
        let mut lp = LinearProgram::new(2, Norm::L1);
        assert!(lp.add_row(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn tableau_dump_lists_rows_and_columns() {
        let lp = program(2, Norm::LInf, &[(&[1.0, -1.0], -2.1)]);
        let text = lp.to_tableau_text();
        assert!(text.starts_with("# min-norm LP: norm=linf vars=2 rows=1"));
        assert!(text.contains("# row 0: +1 d0 -1 d1 <= -2.1"));
        assert!(text.contains("d0+\td1+\td0-\td1-\tt\ts0"));
        // one original row plus two bound rows per variable, plus header and objective
        assert_eq!(text.lines().count(), 2 + 1 + 5 + 1);
    }

    #[test]
    fn norm_parse_and_total() {
        assert_eq!("L1".parse::<Norm>().unwrap(), Norm::L1);
        assert_eq!("linf".parse::<Norm>().unwrap(), Norm::LInf);
        assert!("l2".parse::<Norm>().is_err());
        assert_eq!(Norm::L1.total(&[0.01, 2.1]), 2.11);
        assert_eq!(Norm::LInf.total(&[0.01, 2.1]), 2.1);
    }

    /// Exact oracle: the optimum sits at a vertex of the arrangement formed by
    /// the rows (as equalities) and the hyperplanes where the norm changes
    /// slope. Enumerate every `m`-subset, solve it, keep the cheapest feasible.
    fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
        let m = lp.dim();
        let mut planes: Vec<(Vec<f64>, f64)> =
            lp.rows().map(|(c, r)| (c.to_vec(), r)).collect();
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            planes.push((e, 0.0));
        }
        if lp.norm() == Norm::LInf {
            for i in 0..m {
                for j in i + 1..m {
                    for s in [1.0, -1.0] {
                        let mut e = vec![0.0; m];
                        e[i] = 1.0;
                        e[j] = -s;
                        planes.push((e, 0.0));
                    }
                }
            }
        }
        let mut best: Option<f64> = None;
        let mut idx: Vec<usize> = (0..m).collect();
        loop {
            let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
            let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
            if let Some(x) = gauss_solve(a, b) {
                if lp.max_violation(&x) <= 1e-9 {
                    let v = lp.norm().of(&x);
                    best = Some(best.map_or(v, |bv: f64| bv.min(v)));
                }
            }
            // next combination
            let k = planes.len();
            let mut i = m;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < k - m + i {
                    idx[i] += 1;
                    for j in i + 1..m {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
            if a[p][c].abs() < 1e-10 {
                return None;
            }
            a.swap(c, p);
            b.swap(c, p);
            for r in 0..n {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    let pivot = a[c].clone();
                    for (x, p) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                        *x -= f * p;
                    }
                    b[r] -= f * b[c];
                }
            }
        }
        Some((0..n).map(|i| b[i] / a[i][i]).collect())
    }

    fn arb_program() -> impl Strategy<Value = LinearProgram> {
        (1usize..=3, 0usize..=6, prop_oneof![Just(Norm::L1), Just(Norm::LInf)]).prop_flat_map(
            |(m, k, norm)| {
                proptest::collection::vec(
                    (proptest::collection::vec(-2.0f64..2.0, m), -3.0f64..3.0),
                    k,
                )
                .prop_map(move |rows| {
                    let mut lp = LinearProgram::new(m, norm);
                    for (c, r) in rows {
                        lp.add_row(c, r).unwrap();
                    }
                    lp
                })
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]

        #[test]
        fn matches_vertex_oracle(lp in arb_program()) {
            let sol = solve_min_norm(&lp).unwrap();
            let oracle = if lp.num_rows() == 0 { Some(0.0) } else { vertex_oracle(&lp) };
            match oracle {
                None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
                Some(v) => {
                    prop_assert!(sol.is_optimal());
                    prop_assert!((sol.objective - v).abs() <= 1e-7 * (1.0 + v),
                        "lp {} vs oracle {}", sol.objective, v);
                    prop_assert!(lp.max_violation(&sol.delta) <= 1e-8);
                }
            }
        }

        #[test]
        fn scaling_rows_preserves_objective(lp in arb_program(), s in 0.01f64..100.0) {
            let mut scaled = LinearProgram::new(lp.dim(), lp.norm());
            for (c, r) in lp.rows() {
                scaled.add_row(c.iter().map(|v| v * s).collect(), r * s).unwrap();
            }
            let a = solve_min_norm(&lp).unwrap();
            let b = solve_min_norm(&scaled).unwrap();
            prop_assert_eq!(a.status, b.status);
            if a.is_optimal() {
                prop_assert!((a.objective - b.objective).abs() <= 1e-6);
            }
        }
    }
}
