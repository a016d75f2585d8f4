//! Bounded-variable simplex on a dense tableau. Primal and dual iterations
//! share one pivot core; starts that are neither primal nor dual feasible go
//! through an artificial-variable phase. Pricing is Dantzig with a Bland
//! fallback once degenerate pivots pile up.

/// Minimum magnitude for a pivot element.
pub(super) const EPS_PIVOT: f64 = 1e-10;
/// Reduced-cost tolerance for pricing and dual feasibility.
const EPS_DJ: f64 = 1e-9;
/// Steps below this count as degenerate.
const DEGEN_STEP: f64 = 1e-12;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_AFTER: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum LpOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

const NONE: usize = usize::MAX;

/// Dense tableau over structural columns, one slack per row, and (only when
/// the initial basis is infeasible in both senses) artificial columns.
/// `t` holds `B⁻¹A`; `xb` holds current basic variable values; nonbasic
/// values are implied by `state` and the working bounds.
pub(super) struct Tableau {
    m: usize,
    n_struct: usize,
    n_cols: usize,
    width: usize,
    t: Vec<f64>,
    xb: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    state: Vec<VarState>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    /// Per-variable absolute feasibility tolerance.
    tol: Vec<f64>,
    /// Canonical maximization objective (zero on slacks/artificials).
    c: Vec<f64>,
    /// Reduced costs c_j − c_Bᵀ B⁻¹ A_j.
    g: Vec<f64>,
    n_artificial: usize,
    bland: bool,
    degen: u32,
    pub(super) iterations: u64,
}

impl Tableau {
    /// Builds the all-slack start. Nonbasic structural variables sit at the
    /// bound their objective coefficient prefers, which makes the start dual
    /// feasible whenever the preferred bounds are finite. Rows whose slack
    /// starts below zero get an artificial column when the start is not dual
    /// feasible either.
    pub fn new(
        n_struct: usize,
        c: &[f64],
        lb: &[f64],
        ub: &[f64],
        rows: &[(Vec<(usize, f64)>, f64)],
    ) -> Self {
        let m = rows.len();
        let mut state = Vec::with_capacity(n_struct + m);
        for j in 0..n_struct {
            let s = if lb[j] == ub[j] {
                VarState::AtLower
            } else if c[j] > EPS_DJ {
                if ub[j].is_finite() {
                    VarState::AtUpper
                } else if lb[j].is_finite() {
                    VarState::AtLower
                } else {
                    VarState::Free
                }
            } else if c[j] < -EPS_DJ {
                if lb[j].is_finite() {
                    VarState::AtLower
                } else if ub[j].is_finite() {
                    VarState::AtUpper
                } else {
                    VarState::Free
                }
            } else if lb[j].is_finite() {
                VarState::AtLower
            } else if ub[j].is_finite() {
                VarState::AtUpper
            } else {
                VarState::Free
            };
            state.push(s);
        }

        let value = |j: usize, s: VarState| match s {
            VarState::AtLower => lb[j],
            VarState::AtUpper => ub[j],
            _ => 0.0,
        };
        let mut xb = Vec::with_capacity(m);
        for (support, rhs) in rows {
            let used: f64 = support.iter().map(|&(j, a)| a * value(j, state[j])).sum();
            xb.push(rhs - used);
        }

        let dual_ok = (0..n_struct).all(|j| {
            lb[j] == ub[j]
                || match state[j] {
                    VarState::AtLower => c[j] <= EPS_DJ,
                    VarState::AtUpper => c[j] >= -EPS_DJ,
                    _ => c[j].abs() <= EPS_DJ,
                }
        });
        let bad_rows: Vec<usize> = (0..m)
            .filter(|&r| xb[r] < -1e-9 * (1.0 + rows[r].1.abs()))
            .collect();
        let artificials = if dual_ok { vec![] } else { bad_rows };
        let n_artificial = artificials.len();
        let n_cols = n_struct + m + n_artificial;
        let width = n_cols;

        let mut t = vec![0.0; m * width];
        for (r, (support, _)) in rows.iter().enumerate() {
            for &(j, a) in support {
                t[r * width + j] = a;
            }
            t[r * width + n_struct + r] = 1.0;
        }

        let mut full_lb = lb.to_vec();
        let mut full_ub = ub.to_vec();
        let mut tol: Vec<f64> = (0..n_struct)
            .map(|j| {
                let scale = [lb[j], ub[j]]
                    .into_iter()
                    .filter(|v| v.is_finite())
                    .fold(0.0f64, |a, v| a.max(v.abs()));
                1e-9 * (1.0 + scale)
            })
            .collect();
        for (_, rhs) in rows {
            full_lb.push(0.0);
            full_ub.push(f64::INFINITY);
            tol.push(1e-9 * (1.0 + rhs.abs()));
        }
        let mut basis: Vec<usize> = (0..m).map(|r| n_struct + r).collect();
        state.extend(std::iter::repeat(VarState::Basic).take(m));
        let mut full_c = c.to_vec();
        full_c.extend(std::iter::repeat(0.0).take(m + n_artificial));

        // install artificial columns: negate the bad row so the artificial
        // enters the basis at a positive value, and park the slack at zero
        for (k, &r) in artificials.iter().enumerate() {
            let col = n_struct + m + k;
            for j in 0..width {
                t[r * width + j] = -t[r * width + j];
            }
            t[r * width + col] = 1.0;
            xb[r] = -xb[r];
            state[basis[r]] = VarState::AtLower;
            basis[r] = col;
            state.push(VarState::Basic);
            full_lb.push(0.0);
            full_ub.push(f64::INFINITY);
            tol.push(1e-9);
        }

        let mut pos = vec![NONE; n_cols];
        for (r, &j) in basis.iter().enumerate() {
            pos[j] = r;
        }

        let g = full_c.clone();
        let mut out = Self {
            m,
            n_struct,
            n_cols,
            width,
            t,
            xb,
            basis,
            pos,
            state,
            lb: full_lb,
            ub: full_ub,
            tol,
            c: full_c,
            g,
            n_artificial,
            bland: false,
            degen: 0,
            iterations: 0,
        };
        if n_artificial > 0 {
            out.recompute_g();
        }
        out
    }

    pub fn has_artificials(&self) -> bool {
        self.n_artificial > 0
    }

    fn at(&self, r: usize, j: usize) -> f64 {
        self.t[r * self.width + j]
    }

    fn nb_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lb[j],
            VarState::AtUpper => self.ub[j],
            VarState::Free => 0.0,
            VarState::Basic => unreachable!("basic variable has no bound value"),
        }
    }

    pub fn value_of(&self, j: usize) -> f64 {
        if self.state[j] == VarState::Basic {
            self.xb[self.pos[j]]
        } else {
            self.nb_value(j)
        }
    }

    pub fn structural_solution(&self) -> Vec<f64> {
        (0..self.n_struct).map(|j| self.value_of(j)).collect()
    }

    fn fixed(&self, j: usize) -> bool {
        self.lb[j] == self.ub[j]
    }

    /// Violation of row r's basic variable against its bounds; positive means
    /// below lower, negative means above upper, zero means in range.
    fn basic_violation(&self, r: usize) -> f64 {
        let j = self.basis[r];
        let v = self.xb[r];
        if v < self.lb[j] - self.tol[j] {
            self.lb[j] - v
        } else if v > self.ub[j] + self.tol[j] {
            -(v - self.ub[j])
        } else {
            0.0
        }
    }

    pub fn primal_feasible(&self) -> bool {
        (0..self.m).all(|r| self.basic_violation(r) == 0.0)
    }

    pub fn dual_feasible(&self) -> bool {
        (0..self.n_cols).all(|j| {
            self.state[j] == VarState::Basic
                || self.fixed(j)
                || match self.state[j] {
                    VarState::AtLower => self.g[j] <= EPS_DJ,
                    VarState::AtUpper => self.g[j] >= -EPS_DJ,
                    VarState::Free => self.g[j].abs() <= EPS_DJ,
                    VarState::Basic => unreachable!(),
                }
        })
    }

    pub fn recompute_g(&mut self) {
        self.g.copy_from_slice(&self.c);
        for r in 0..self.m {
            let cb = self.c[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * self.width..r * self.width + self.n_cols];
                for (gj, tj) in self.g.iter_mut().zip(row) {
                    *gj -= cb * tj;
                }
            }
        }
    }

    /// Moves nonbasic j to its opposite bound, adjusting basic values.
    fn flip(&mut self, j: usize) {
        let (from, to, next) = match self.state[j] {
            VarState::AtLower => (self.lb[j], self.ub[j], VarState::AtUpper),
            VarState::AtUpper => (self.ub[j], self.lb[j], VarState::AtLower),
            _ => unreachable!("only bounded nonbasics flip"),
        };
        let delta = to - from;
        for r in 0..self.m {
            let a = self.at(r, j);
            if a != 0.0 {
                self.xb[r] -= a * delta;
            }
        }
        self.state[j] = next;
    }

    /// Pivots entering column `je` into row `r` after the entering variable
    /// moved by `dir·step` from its current value.
    fn pivot(&mut self, r: usize, je: usize, dir: f64, step: f64) {
        let enter_val = if self.state[je] == VarState::Basic {
            unreachable!("entering variable already basic")
        } else {
            self.nb_value(je) + dir * step
        };
        let move_amt = dir * step;
        if move_amt != 0.0 {
            for rr in 0..self.m {
                let a = self.at(rr, je);
                if a != 0.0 {
                    self.xb[rr] -= a * move_amt;
                }
            }
        }
        let leaving = self.basis[r];
        // leaving lands on whichever of its bounds is nearer its final value
        let lv = self.xb[r];
        self.state[leaving] = if (lv - self.lb[leaving]).abs() <= (lv - self.ub[leaving]).abs() {
            VarState::AtLower
        } else {
            VarState::AtUpper
        };
        self.pos[leaving] = NONE;

        let piv = self.at(r, je);
        debug_assert!(piv.abs() > EPS_PIVOT);
        let inv = 1.0 / piv;
        {
            let row = &mut self.t[r * self.width..(r + 1) * self.width];
            for v in row.iter_mut() {
                *v *= inv;
            }
        }
        let (head, tail) = self.t.split_at_mut(r * self.width);
        let (prow, rest) = tail.split_at_mut(self.width);
        for row in head
            .chunks_exact_mut(self.width)
            .chain(rest.chunks_exact_mut(self.width))
        {
            let f = row[je];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[je] = 0.0;
            }
        }
        let gf = self.g[je];
        if gf != 0.0 {
            let prow = &self.t[r * self.width..r * self.width + self.n_cols];
            for (gj, p) in self.g.iter_mut().zip(prow) {
                *gj -= gf * p;
            }
            self.g[je] = 0.0;
        }

        self.basis[r] = je;
        self.state[je] = VarState::Basic;
        self.pos[je] = r;
        self.xb[r] = enter_val;
    }

    fn count_degenerate(&mut self, progress: f64) {
        if progress.abs() <= DEGEN_STEP {
            self.degen += 1;
            if self.degen >= BLAND_AFTER {
                self.bland = true;
            }
        } else {
            self.degen = 0;
        }
    }

    /// Entering candidates for the primal: eligible direction of improvement.
    fn price_primal(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n_cols {
            if self.state[j] == VarState::Basic || self.fixed(j) {
                continue;
            }
            let gj = self.g[j];
            let dir = match self.state[j] {
                VarState::AtLower if gj > EPS_DJ => 1.0,
                VarState::AtUpper if gj < -EPS_DJ => -1.0,
                VarState::Free if gj.abs() > EPS_DJ => gj.signum(),
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            let score = gj.abs();
            if best.map_or(true, |(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Primal ratio test: smallest step before a basic hits a bound, or the
    /// entering variable's own range. Ties go to the lowest row index.
    fn ratio_primal(&self, je: usize, dir: f64) -> (f64, Option<usize>) {
        let mut t_best = if self.lb[je].is_finite() && self.ub[je].is_finite() {
            self.ub[je] - self.lb[je]
        } else {
            f64::INFINITY
        };
        let mut r_best = None;
        for r in 0..self.m {
            let alpha = dir * self.at(r, je);
            if alpha.abs() <= EPS_PIVOT {
                continue;
            }
            let bj = self.basis[r];
            let limit = if alpha > 0.0 {
                if self.lb[bj].is_finite() {
                    (self.xb[r] - self.lb[bj]) / alpha
                } else {
                    continue;
                }
            } else if self.ub[bj].is_finite() {
                (self.xb[r] - self.ub[bj]) / alpha
            } else {
                continue;
            };
            let limit = limit.max(0.0);
            if limit < t_best {
                t_best = limit;
                r_best = Some(r);
            }
        }
        (t_best, r_best)
    }

    /// Primal simplex from a primal-feasible basis.
    pub fn primal_solve(&mut self, limit: u64) -> LpOutcome {
        loop {
            if self.iterations >= limit {
                return LpOutcome::IterLimit;
            }
            let Some((je, dir)) = self.price_primal() else {
                return LpOutcome::Optimal;
            };
            let (step, row) = self.ratio_primal(je, dir);
            if !step.is_finite() {
                return LpOutcome::Unbounded;
            }
            self.iterations += 1;
            self.count_degenerate(step);
            match row {
                Some(r) => self.pivot(r, je, dir, step),
                None => self.flip(je),
            }
        }
    }

    /// Leaving-row selection for the dual: most infeasible basic, ties to the
    /// lowest row; Bland mode takes the lowest infeasible row outright.
    fn price_dual(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.m {
            let v = self.basic_violation(r).abs();
            if v == 0.0 {
                continue;
            }
            if self.bland {
                return Some(r);
            }
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((r, v));
            }
        }
        best.map(|(r, _)| r)
    }

    /// Dual simplex from a dual-feasible basis; drives out primal
    /// infeasibility or proves the LP infeasible.
    pub fn dual_solve(&mut self, limit: u64) -> LpOutcome {
        loop {
            if self.iterations >= limit {
                return LpOutcome::IterLimit;
            }
            let Some(r) = self.price_dual() else {
                return LpOutcome::Optimal;
            };
            let below = self.basic_violation(r) > 0.0;
            let violation = self.basic_violation(r).abs();

            // entering: preserves dual feasibility, minimal |g/w| ratio
            let mut best: Option<(usize, f64, f64)> = None;
            let row_off = r * self.width;
            for j in 0..self.n_cols {
                if self.state[j] == VarState::Basic || self.fixed(j) {
                    continue;
                }
                let w = self.t[row_off + j];
                if w.abs() <= EPS_PIVOT {
                    continue;
                }
                let dir = if below { -w.signum() } else { w.signum() };
                let ok = match self.state[j] {
                    VarState::AtLower => dir > 0.0,
                    VarState::AtUpper => dir < 0.0,
                    VarState::Free => true,
                    VarState::Basic => unreachable!(),
                };
                if !ok {
                    continue;
                }
                let ratio = (self.g[j] / w).abs();
                if best.map_or(true, |(_, br, _)| ratio < br) {
                    best = Some((j, ratio, dir));
                }
            }
            let Some((je, ratio, dir)) = best else {
                return LpOutcome::Infeasible;
            };

            self.iterations += 1;
            self.count_degenerate(ratio);
            // the entering step restores row r exactly; it may overshoot the
            // entering variable's own range, leaving it an out-of-bounds
            // basic for a later dual iteration to repair
            let step = violation / self.at(r, je).abs();
            self.pivot(r, je, dir, step);
        }
    }

    /// Drives artificial variables to zero under a temporary objective, then
    /// restores the real one. Returns Infeasible when they cannot all vanish.
    pub fn phase1(&mut self, limit: u64) -> LpOutcome {
        let art_lo = self.n_struct + self.m;
        let real_c = self.c.clone();
        for v in self.c.iter_mut() {
            *v = 0.0;
        }
        for j in art_lo..self.n_cols {
            self.c[j] = -1.0;
        }
        self.recompute_g();
        let out = self.primal_solve(limit);
        if out != LpOutcome::Optimal {
            // the auxiliary objective is bounded, so anything but Optimal
            // here is a resource or numeric stop
            self.c = real_c;
            return LpOutcome::IterLimit;
        }
        let residual: f64 = (art_lo..self.n_cols)
            .map(|j| self.value_of(j).max(0.0))
            .sum();
        if residual > 1e-7 {
            self.c = real_c;
            return LpOutcome::Infeasible;
        }
        // pivot lingering zero-valued artificials out of the basis when a
        // usable column exists; otherwise freeze them at zero
        for r in 0..self.m {
            let bj = self.basis[r];
            if bj < art_lo {
                continue;
            }
            let row_off = r * self.width;
            let je = (0..art_lo)
                .find(|&j| self.state[j] != VarState::Basic && !self.fixed(j)
                    && self.t[row_off + j].abs() > EPS_PIVOT);
            if let Some(je) = je {
                self.pivot(r, je, 1.0, 0.0);
            }
        }
        for j in art_lo..self.n_cols {
            self.lb[j] = 0.0;
            self.ub[j] = 0.0;
        }
        self.c = real_c;
        self.recompute_g();
        LpOutcome::Optimal
    }

    /// Installs new working bounds for the structural variables, shifting
    /// nonbasic variables whose resting value moved. The tableau and reduced
    /// costs are bound-independent, so dual feasibility is preserved.
    pub fn apply_bounds(&mut self, lb: &[f64], ub: &[f64]) {
        for j in 0..self.n_struct {
            if self.lb[j] == lb[j] && self.ub[j] == ub[j] {
                continue;
            }
            match self.state[j] {
                VarState::Basic | VarState::Free => {
                    self.lb[j] = lb[j];
                    self.ub[j] = ub[j];
                }
                VarState::AtLower | VarState::AtUpper => {
                    let old = self.nb_value(j);
                    self.lb[j] = lb[j];
                    self.ub[j] = ub[j];
                    // a vanished bound sends the variable to the remaining one
                    if self.state[j] == VarState::AtLower && !self.lb[j].is_finite() {
                        self.state[j] = VarState::AtUpper;
                    }
                    if self.state[j] == VarState::AtUpper && !self.ub[j].is_finite() {
                        self.state[j] = if self.lb[j].is_finite() {
                            VarState::AtLower
                        } else {
                            VarState::Free
                        };
                    }
                    let new = match self.state[j] {
                        VarState::Free => 0.0,
                        _ => self.nb_value(j),
                    };
                    let delta = new - old;
                    if delta != 0.0 {
                        for r in 0..self.m {
                            let a = self.at(r, j);
                            if a != 0.0 {
                                self.xb[r] -= a * delta;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Re-establishes dual feasibility after bound edits. Columns that were
    /// fixed are exempt from the dual sign test, so their reduced costs can
    /// drift during other pivots; unfixing such a column may surface a
    /// wrong-signed reduced cost. Flipping the variable to its other bound
    /// repairs the sign exactly. Returns false when no finite bound exists to
    /// flip to, in which case the caller must resolve from scratch.
    pub fn restore_dual_feasibility(&mut self) -> bool {
        for j in 0..self.n_cols {
            if self.state[j] == VarState::Basic || self.fixed(j) {
                continue;
            }
            match self.state[j] {
                VarState::AtLower if self.g[j] > EPS_DJ => {
                    if self.ub[j].is_finite() {
                        self.flip(j);
                    } else {
                        return false;
                    }
                }
                VarState::AtUpper if self.g[j] < -EPS_DJ => {
                    if self.lb[j].is_finite() {
                        self.flip(j);
                    } else {
                        return false;
                    }
                }
                VarState::Free if self.g[j].abs() > EPS_DJ => return false,
                _ => {}
            }
        }
        true
    }

    pub fn objective(&self, c: &[f64]) -> f64 {
        (0..self.n_struct).map(|j| c[j] * self.value_of(j)).sum()
    }

    pub fn reset_pricing(&mut self) {
        self.bland = false;
        self.degen = 0;
    }
}
