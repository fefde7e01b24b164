//! Dense two-phase simplex for box-constrained linear programs.
//!
//! Every variable carries finite lower and upper bounds, so DER capacities,
//! SOC windows and shedding limits stay out of the row space and the tableaus
//! remain small. Pivoting uses Bland's rule (smallest eligible index, with the
//! entering variable's own bound counted as a blocking candidate), which makes
//! results deterministic and cycle-free.

use crate::scalar::Scalar;
use std::io::{self, Write};

/// Handle to a decision variable of a [`Problem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOp {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivot-count guard tripped; never expected with Bland's rule.
    IterationLimit,
}

#[derive(Debug, Clone)]
struct Col<T> {
    name: String,
    lower: T,
    upper: T,
    cost: T,
}

#[derive(Debug, Clone)]
struct Row<T> {
    name: String,
    op: RowOp,
    rhs: T,
    coeffs: Vec<(usize, T)>,
}

/// A linear program `min c'x  s.t.  rows, l <= x <= u`.
#[derive(Debug, Clone, Default)]
pub struct Problem<T> {
    cols: Vec<Col<T>>,
    rows: Vec<Row<T>>,
}

/// Solver output; variable values are retrieved through [`Solution::value`].
#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub status: Status,
    pub objective: T,
    values: Vec<T>,
}

impl<T: Scalar> Solution<T> {
    pub fn value(&self, v: Var) -> T {
        self.values[v.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

impl<T: Scalar> Problem<T> {
    pub fn new() -> Self {
        Problem { cols: Vec::new(), rows: Vec::new() }
    }

    /// Adds a variable with finite bounds. Bounds with `lower > upper` are
    /// accepted and surface as an infeasible status.
    pub fn add_var(&mut self, name: impl Into<String>, lower: T, upper: T, cost: T) -> Var {
        assert!(
            lower.is_finite() && upper.is_finite(),
            "simplex variables must carry finite bounds"
        );
        self.cols.push(Col { name: name.into(), lower, upper, cost });
        Var(self.cols.len() - 1)
    }

    pub fn set_cost(&mut self, v: Var, cost: T) {
        self.cols[v.0].cost = cost;
    }

    pub fn add_row(&mut self, name: impl Into<String>, op: RowOp, rhs: T, coeffs: &[(Var, T)]) {
        let mut merged: Vec<(usize, T)> = Vec::with_capacity(coeffs.len());
        for &(v, c) in coeffs {
            if let Some(slot) = merged.iter_mut().find(|(j, _)| *j == v.0) {
                slot.1 = slot.1 + c;
            } else {
                merged.push((v.0, c));
            }
        }
        self.rows.push(Row { name: name.into(), op, rhs, coeffs: merged });
    }

    pub fn num_vars(&self) -> usize {
        self.cols.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Writes the problem in LP text format for cross-checking with external
    /// solvers.
    pub fn write_lp(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "Minimize")?;
        write!(w, " obj:")?;
        for c in &self.cols {
            if c.cost != T::zero() {
                write!(w, " {} {}", fmt_signed(c.cost), c.name)?;
            }
        }
        writeln!(w)?;
        writeln!(w, "Subject To")?;
        for r in &self.rows {
            write!(w, " {}:", r.name)?;
            for &(j, c) in &r.coeffs {
                write!(w, " {} {}", fmt_signed(c), self.cols[j].name)?;
            }
            let op = match r.op {
                RowOp::Eq => "=",
                RowOp::Le => "<=",
                RowOp::Ge => ">=",
            };
            writeln!(w, " {} {}", op, r.rhs)?;
        }
        writeln!(w, "Bounds")?;
        for c in &self.cols {
            writeln!(w, " {} <= {} <= {}", c.lower, c.name, c.upper)?;
        }
        writeln!(w, "End")
    }

    pub fn solve(&self) -> Solution<T> {
        Tableau::build(self).solve()
    }
}

fn fmt_signed<T: Scalar>(v: T) -> String {
    if v < T::zero() {
        format!("- {}", -v)
    } else {
        format!("+ {}", v)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau<T> {
    m: usize,
    /// structural + slack columns (artificials live in `m` extra columns).
    n: usize,
    width: usize,
    tab: Vec<T>, // row-major m x width
    lower: Vec<T>,
    upper: Vec<T>,
    cost: Vec<T>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    x_basic: Vec<T>,
    zrow: Vec<T>,
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

impl<T: Scalar> Tableau<T> {
    fn build(p: &Problem<T>) -> Self {
        let m = p.rows.len();
        // Slack per inequality row, with a finite bound derived from the
        // variable box by interval arithmetic.
        let mut n = p.cols.len();
        let mut lower: Vec<T> = p.cols.iter().map(|c| c.lower).collect();
        let mut upper: Vec<T> = p.cols.iter().map(|c| c.upper).collect();
        let mut cost: Vec<T> = p.cols.iter().map(|c| c.cost).collect();
        let mut slack_of_row: Vec<Option<(usize, T)>> = vec![None; m];

        for (i, row) in p.rows.iter().enumerate() {
            if row.op == RowOp::Eq {
                continue;
            }
            let mut lo = T::zero();
            let mut hi = T::zero();
            for &(j, c) in &row.coeffs {
                let a = c * p.cols[j].lower;
                let b = c * p.cols[j].upper;
                lo = lo + a.min(b);
                hi = hi + a.max(b);
            }
            // Le: a'x + s = rhs with s in [0, rhs - lo]; Ge: a'x - s = rhs
            // with s in [0, hi - rhs].
            let (coef, ub) = match row.op {
                RowOp::Le => (T::one(), (row.rhs - lo).max(T::zero())),
                RowOp::Ge => (-T::one(), (hi - row.rhs).max(T::zero())),
                RowOp::Eq => unreachable!(),
            };
            lower.push(T::zero());
            upper.push(ub);
            cost.push(T::zero());
            slack_of_row[i] = Some((n, coef));
            n += 1;
        }

        let width = n + m; // artificial column per row
        let mut tab = vec![T::zero(); m * width];
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, c) in &row.coeffs {
                tab[i * width + j] = tab[i * width + j] + c;
            }
            if let Some((j, c)) = slack_of_row[i] {
                tab[i * width + j] = c;
            }
        }

        // Nonbasic structural/slack variables start at their lower bound.
        let state = vec![VarState::AtLower; n];

        // Residual r = b - A x_N determines the artificial signs.
        let mut resid: Vec<T> = p.rows.iter().map(|r| r.rhs).collect();
        for i in 0..m {
            for j in 0..n {
                let a = tab[i * width + j];
                if a != T::zero() {
                    resid[i] = resid[i] - a * lower[j];
                }
            }
        }
        let mut basis = Vec::with_capacity(m);
        let mut x_basic = Vec::with_capacity(m);
        for i in 0..m {
            let sigma = if resid[i] < T::zero() { -T::one() } else { T::one() };
            if sigma < T::zero() {
                for j in 0..width {
                    tab[i * width + j] = -tab[i * width + j];
                }
            }
            tab[i * width + n + i] = T::one();
            basis.push(n + i);
            x_basic.push(resid[i].abs());
        }
        let mut st = state;
        st.extend(std::iter::repeat(VarState::Basic).take(m));
        for (i, &b) in basis.iter().enumerate() {
            debug_assert_eq!(b, n + i);
        }

        // Artificial bounds [0, inf-ish]; a large finite stand-in keeps every
        // column boxed. They are clamped to zero after phase 1.
        let big = T::of(1e30);
        lower.extend(std::iter::repeat(T::zero()).take(m));
        upper.extend(std::iter::repeat(big).take(m));
        cost.extend(std::iter::repeat(T::zero()).take(m));

        Tableau {
            m,
            n,
            width,
            tab,
            lower,
            upper,
            cost,
            state: st,
            basis,
            x_basic,
            zrow: vec![T::zero(); width],
        }
    }

    fn nonbasic_value(&self, j: usize) -> T {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::Basic => unreachable!(),
        }
    }

    fn reduced_costs(&mut self, phase1: bool) {
        // z_j = d_j - d_B' (B^-1 A)_j with the tableau already holding B^-1 A.
        let d = |t: &Self, j: usize| -> T {
            if phase1 {
                if j >= t.n {
                    T::one()
                } else {
                    T::zero()
                }
            } else {
                t.cost[j]
            }
        };
        for j in 0..self.width {
            self.zrow[j] = d(self, j);
        }
        for i in 0..self.m {
            let db = d(self, self.basis[i]);
            if db != T::zero() {
                for j in 0..self.width {
                    let a = self.tab[i * self.width + j];
                    if a != T::zero() {
                        self.zrow[j] = self.zrow[j] - db * a;
                    }
                }
            }
        }
    }

    fn pivot_loop(&mut self) -> Status {
        let ptol = T::of(PIVOT_TOL);
        let ctol = T::of(COST_TOL);
        let max_iter = 5000 + 400 * (self.m + self.width);
        for _ in 0..max_iter {
            // Bland: smallest eligible index enters. Artificials start basic
            // and are never allowed back in once they leave.
            let mut entering = None;
            for j in 0..self.n {
                if self.state[j] == VarState::Basic {
                    continue;
                }
                if self.lower[j] >= self.upper[j] {
                    continue; // fixed
                }
                let z = self.zrow[j];
                let eligible = match self.state[j] {
                    VarState::AtLower => z < -ctol,
                    VarState::AtUpper => z > ctol,
                    VarState::Basic => false,
                };
                if eligible {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Status::Optimal;
            };
            let dir = if self.state[j] == VarState::AtLower { T::one() } else { -T::one() };

            // Ratio test; the entering variable's own range is a candidate.
            let mut t_best = self.upper[j] - self.lower[j];
            let mut blocker: Option<(usize, usize, VarState)> = None; // (row, var, leave-to)
            for i in 0..self.m {
                let a = self.tab[i * self.width + j] * dir;
                let b = self.basis[i];
                if a > ptol {
                    let room = self.x_basic[i] - self.lower[b];
                    let lim = room.max(T::zero()) / a;
                    if lim < t_best - ptol
                        || (lim < t_best + ptol && blocker.map_or(j, |(_, v, _)| v) > b)
                    {
                        t_best = lim;
                        blocker = Some((i, b, VarState::AtLower));
                    }
                } else if a < -ptol {
                    let room = self.upper[b] - self.x_basic[i];
                    let lim = room.max(T::zero()) / (-a);
                    if lim < t_best - ptol
                        || (lim < t_best + ptol && blocker.map_or(j, |(_, v, _)| v) > b)
                    {
                        t_best = lim;
                        blocker = Some((i, b, VarState::AtUpper));
                    }
                }
            }

            if !t_best.is_finite() {
                return Status::Unbounded;
            }
            let step = t_best.max(T::zero());

            match blocker {
                None => {
                    // Bound flip.
                    for i in 0..self.m {
                        let a = self.tab[i * self.width + j];
                        if a != T::zero() {
                            self.x_basic[i] = self.x_basic[i] - step * a * dir;
                        }
                    }
                    self.state[j] = match self.state[j] {
                        VarState::AtLower => VarState::AtUpper,
                        VarState::AtUpper => VarState::AtLower,
                        VarState::Basic => unreachable!(),
                    };
                }
                Some((r, leaving, leave_to)) => {
                    let enter_val = self.nonbasic_value(j) + dir * step;
                    for i in 0..self.m {
                        if i != r {
                            let a = self.tab[i * self.width + j];
                            if a != T::zero() {
                                self.x_basic[i] = self.x_basic[i] - step * a * dir;
                            }
                        }
                    }
                    // Eliminate column j from all other rows and the cost row.
                    let piv = self.tab[r * self.width + j];
                    debug_assert!(piv.abs() > ptol);
                    let inv = T::one() / piv;
                    for c in 0..self.width {
                        self.tab[r * self.width + c] = self.tab[r * self.width + c] * inv;
                    }
                    for i in 0..self.m {
                        if i == r {
                            continue;
                        }
                        let f = self.tab[i * self.width + j];
                        if f != T::zero() {
                            for c in 0..self.width {
                                let upd = self.tab[r * self.width + c] * f;
                                self.tab[i * self.width + c] = self.tab[i * self.width + c] - upd;
                            }
                            self.tab[i * self.width + j] = T::zero();
                        }
                    }
                    let zf = self.zrow[j];
                    if zf != T::zero() {
                        for c in 0..self.width {
                            let upd = self.tab[r * self.width + c] * zf;
                            self.zrow[c] = self.zrow[c] - upd;
                        }
                        self.zrow[j] = T::zero();
                    }
                    self.state[leaving] = leave_to;
                    self.state[j] = VarState::Basic;
                    self.basis[r] = j;
                    self.x_basic[r] = enter_val;
                }
            }
        }
        Status::IterationLimit
    }

    fn solve(mut self) -> Solution<T> {
        let infeasible = |t: &Tableau<T>| Solution {
            status: Status::Infeasible,
            objective: T::zero(),
            values: t.extract(),
        };

        // Inverted boxes cannot be satisfied.
        for j in 0..self.n {
            if self.lower[j] > self.upper[j] + T::of(FEAS_TOL) {
                return infeasible(&self);
            }
        }

        // Phase 1: drive artificials to zero.
        self.reduced_costs(true);
        match self.pivot_loop() {
            Status::Optimal => {}
            s => {
                return Solution { status: s, objective: T::zero(), values: self.extract() };
            }
        }
        let mut art_sum = T::zero();
        for i in 0..self.m {
            if self.basis[i] >= self.n {
                art_sum = art_sum + self.x_basic[i].max(T::zero());
            }
        }
        for j in self.n..self.width {
            if self.state[j] == VarState::AtUpper {
                art_sum = art_sum + self.upper[j];
            }
        }
        if art_sum > T::of(FEAS_TOL) {
            return infeasible(&self);
        }
        // Freeze artificials at zero; basic ones may linger at value zero.
        for j in self.n..self.width {
            self.upper[j] = T::zero();
            if self.state[j] == VarState::AtUpper {
                self.state[j] = VarState::AtLower;
            }
        }

        // Phase 2 with the true costs.
        self.reduced_costs(false);
        let status = self.pivot_loop();
        let values = self.extract();
        let mut objective = T::zero();
        for (j, v) in values.iter().enumerate() {
            objective = objective + self.cost[j] * *v;
        }
        Solution { status, objective, values }
    }

    fn extract(&self) -> Vec<T> {
        let mut x = vec![T::zero(); self.n];
        for j in 0..self.n {
            x[j] = match self.state[j] {
                VarState::AtLower => self.lower[j],
                VarState::AtUpper => self.upper[j],
                VarState::Basic => T::zero(),
            };
        }
        for i in 0..self.m {
            if self.basis[i] < self.n {
                x[self.basis[i]] = self.x_basic[i];
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = Problem<f64>;

    #[test]
    fn min_x_at_least_three() {
        let mut p = P::new();
        let x = p.add_var("x", 0.0, 100.0, 1.0);
        p.add_row("r", RowOp::Ge, 3.0, &[(x, 1.0)]);
        let s = p.solve();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.value(x) - 3.0).abs() < 1e-9);
        assert!((s.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut p = P::new();
        let x = p.add_var("x", 0.0, 10.0, 1.0);
        p.add_row("lo", RowOp::Ge, 5.0, &[(x, 1.0)]);
        p.add_row("hi", RowOp::Le, 1.0, &[(x, 1.0)]);
        assert_eq!(p.solve().status, Status::Infeasible);
    }

    #[test]
    fn inverted_box_is_infeasible() {
        let mut p = P::new();
        let _ = p.add_var("x", 2.0, 1.0, 1.0);
        assert_eq!(p.solve().status, Status::Infeasible);
    }

    #[test]
    fn negative_costs_push_to_upper_bounds() {
        let mut p = P::new();
        let x = p.add_var("x", -1.5, 4.0, -2.0);
        let y = p.add_var("y", 0.0, 2.0, -1.0);
        p.add_row("cap", RowOp::Le, 5.0, &[(x, 1.0), (y, 1.0)]);
        let s = p.solve();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.value(x) - 4.0).abs() < 1e-9);
        assert!((s.value(y) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equality_chain_like_soc_recursion() {
        // s1 = s0 + c1, s2 = s1 + c2, terminal pinned: plain transshipment.
        let mut p = P::new();
        let c1 = p.add_var("c1", 0.0, 1.0, 3.0);
        let c2 = p.add_var("c2", 0.0, 1.0, 1.0);
        let s1 = p.add_var("s1", 0.0, 2.0, 0.0);
        let s2 = p.add_var("s2", 1.5, 1.5, 0.0);
        p.add_row("r1", RowOp::Eq, 0.5, &[(s1, 1.0), (c1, -1.0)]); // s0 = 0.5
        p.add_row("r2", RowOp::Eq, 0.0, &[(s2, 1.0), (s1, -1.0), (c2, -1.0)]);
        let s = p.solve();
        assert_eq!(s.status, Status::Optimal);
        // need total charge 1.0, cheapest via c2 to its cap, remainder c1
        assert!((s.value(c2) - 1.0).abs() < 1e-9);
        assert!((s.value(c1) - 0.0).abs() < 1e-9);
        assert!((s.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_ties_terminate() {
        let mut p = P::new();
        let x = p.add_var("x", 0.0, 1.0, -1.0);
        let y = p.add_var("y", 0.0, 1.0, -1.0);
        let z = p.add_var("z", 0.0, 1.0, -1.0);
        p.add_row("a", RowOp::Le, 1.0, &[(x, 1.0), (y, 1.0)]);
        p.add_row("b", RowOp::Le, 1.0, &[(y, 1.0), (z, 1.0)]);
        p.add_row("c", RowOp::Le, 1.0, &[(x, 1.0), (z, 1.0)]);
        let s = p.solve();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective + 1.5).abs() < 1e-9);
    }

    /// Brute-force oracle: enumerate the variable boxes on a fixed grid and
    /// keep the best feasible point.
    fn grid_best(p: &P, bounds: &[(f64, f64)], costs: &[f64], rows: &[(RowOp, f64, Vec<f64>)], step: f64) -> f64 {
        let n = bounds.len();
        let axes: Vec<Vec<f64>> = bounds
            .iter()
            .map(|&(lo, hi)| {
                let mut v = Vec::new();
                let mut x = lo;
                while x <= hi + 1e-12 {
                    v.push(x.min(hi));
                    x += step;
                }
                if *v.last().unwrap() < hi - 1e-12 {
                    v.push(hi);
                }
                v
            })
            .collect();
        let mut idx = vec![0usize; n];
        let mut best = f64::INFINITY;
        'outer: loop {
            let x: Vec<f64> = (0..n).map(|i| axes[i][idx[i]]).collect();
            let feasible = rows.iter().all(|(op, rhs, coef)| {
                let lhs: f64 = coef.iter().zip(&x).map(|(c, v)| c * v).sum();
                match op {
                    RowOp::Eq => (lhs - rhs).abs() < 1e-9,
                    RowOp::Le => lhs <= rhs + 1e-9,
                    RowOp::Ge => lhs >= rhs - 1e-9,
                }
            });
            if feasible {
                let obj: f64 = costs.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = best.min(obj);
            }
            let _ = p;
            for i in (0..n).rev() {
                idx[i] += 1;
                if idx[i] < axes[i].len() {
                    continue 'outer;
                }
                idx[i] = 0;
                if i == 0 {
                    break 'outer;
                }
            }
        }
        best
    }

    #[test]
    fn random_lps_match_grid_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let n = rng.gen_range(2..=3);
            let bounds: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    let lo = (rng.gen_range(-4..=0) as f64) * 0.25;
                    let hi = lo + (rng.gen_range(1..=6) as f64) * 0.25;
                    (lo, hi)
                })
                .collect();
            let costs: Vec<f64> = (0..n).map(|_| (rng.gen_range(-8..=8) as f64) * 0.5).collect();
            let n_rows = rng.gen_range(0..=2);
            let rows: Vec<(RowOp, f64, Vec<f64>)> = (0..n_rows)
                .map(|_| {
                    let coef: Vec<f64> = (0..n).map(|_| rng.gen_range(-2..=2) as f64).collect();
                    let op = if rng.gen_bool(0.5) { RowOp::Le } else { RowOp::Ge };
                    let rhs = (rng.gen_range(-4..=4) as f64) * 0.25;
                    (op, rhs, coef)
                })
                .collect();

            let mut p = P::new();
            let vars: Vec<Var> = (0..n)
                .map(|i| p.add_var(format!("x{i}"), bounds[i].0, bounds[i].1, costs[i]))
                .collect();
            for (k, (op, rhs, coef)) in rows.iter().enumerate() {
                let terms: Vec<(Var, f64)> =
                    vars.iter().zip(coef).map(|(v, c)| (*v, *c)).collect();
                p.add_row(format!("r{k}"), *op, *rhs, &terms);
            }
            let s = p.solve();
            let best = grid_best(&p, &bounds, &costs, &rows, 0.25);
            if best.is_finite() {
                // The 0.25 grid contains every vertex here (all data on the
                // grid), so the LP must match it to numerical tolerance.
                assert_eq!(s.status, Status::Optimal);
                assert!(
                    s.objective <= best + 1e-7,
                    "lp {} worse than grid {best}",
                    s.objective
                );
                assert!(
                    s.objective >= best - 0.25 * 8.0 * n as f64,
                    "lp suspiciously below grid"
                );
            } else {
                // The 0.25 grid can miss a thin feasible sliver, so only the
                // converse is asserted strictly.
                assert!(matches!(s.status, Status::Infeasible | Status::Optimal));
            }
        }
    }

    #[test]
    fn lp_dump_roundtrips_text() {
        let mut p = P::new();
        let x = p.add_var("x", 0.0, 1.0, 2.0);
        p.add_row("r", RowOp::Le, 0.5, &[(x, 1.0)]);
        let mut buf = Vec::new();
        p.write_lp(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("Minimize"));
        assert!(text.contains("r:"));
        assert!(text.contains("Bounds"));
    }
}
