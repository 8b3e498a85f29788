//! Thin wrapper over the CaDiCaL bindings: variable allocation, cardinality
//! helpers and cooperative cancellation.

use std::time::Instant;

use cadical::{Callbacks, Solver};

use crate::error::{Error, Result};

pub(crate) struct Deadline(Option<Instant>);

impl Callbacks for Deadline {
    fn terminate(&mut self) -> bool {
        self.0.is_some_and(|d| Instant::now() >= d)
    }
}

pub(crate) struct Sat {
    solver: Solver<Deadline>,
    deadline: Option<Instant>,
    vars: i32,
    pub(crate) calls: u64,
}

impl Sat {
    pub(crate) fn new(deadline: Option<Instant>) -> Self {
        let mut solver: Solver<Deadline> = Solver::new();
        solver.set_callbacks(Some(Deadline(deadline)));
        Sat { solver, deadline, vars: 0, calls: 0 }
    }

    pub(crate) fn var(&mut self) -> i32 {
        self.vars += 1;
        self.vars
    }

    pub(crate) fn clause(&mut self, lits: impl IntoIterator<Item = i32>) {
        self.solver.add_clause(lits);
    }

    pub(crate) fn solve(&mut self, assumptions: &[i32]) -> Result<bool> {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Error::TimeLimit);
        }
        self.calls += 1;
        self.solver.solve_with(assumptions.iter().copied()).ok_or(Error::TimeLimit)
    }

    pub(crate) fn value(&self, lit: i32) -> bool {
        self.solver.value(lit) == Some(true)
    }

    /// At most one of `lits`: pairwise for short lists, sequential counter
    /// otherwise.
    pub(crate) fn at_most_one(&mut self, lits: &[i32]) {
        if lits.len() <= 5 {
            for (i, &a) in lits.iter().enumerate() {
                for &b in &lits[i + 1..] {
                    self.clause([-a, -b]);
                }
            }
            return;
        }
        // s_i: some literal among lits[..=i] is true
        let mut prev = lits[0];
        for (i, &x) in lits.iter().enumerate().skip(1) {
            self.clause([-prev, -x]);
            if i + 1 == lits.len() {
                break;
            }
            let s = self.var();
            self.clause([-prev, s]);
            self.clause([-x, s]);
            prev = s;
        }
    }

    /// Totalizer over `inputs` (repeats allowed). Returns `out` where
    /// `out[k]` is implied whenever at least `k + 1` inputs are true, for
    /// `k < cap`.
    pub(crate) fn totalizer(&mut self, inputs: &[i32], cap: usize) -> Vec<i32> {
        if inputs.is_empty() || cap == 0 {
            return Vec::new();
        }
        if inputs.len() == 1 {
            return inputs.to_vec();
        }
        let (l, r) = inputs.split_at(inputs.len() / 2);
        let left = self.totalizer(l, cap);
        let right = self.totalizer(r, cap);
        let width = (left.len() + right.len()).min(cap);
        let out: Vec<i32> = (0..width).map(|_| self.var()).collect();
        for i in 0..=left.len() {
            for j in 0..=right.len() {
                if i + j == 0 {
                    continue;
                }
                let k = (i + j).min(width);
                let mut c = Vec::with_capacity(3);
                if i > 0 {
                    c.push(-left[i - 1]);
                }
                if j > 0 {
                    c.push(-right[j - 1]);
                }
                c.push(out[k - 1]);
                self.clause(c);
            }
        }
        out
    }
}
