//! Double-chirp preamble construction and collision-free chirp-pair assignment.
//!
//! Each end device u owns an ordered chirp pair (κ_{u,1}, κ_{u,2}); its preamble
//! symbol is (s_{κ1} + s_{κ2})/√2 repeated N times. A window sliding τ samples into
//! the preamble sees the pair shifted to (κ1+τ, κ2+τ) mod M, so the quantity that
//! survives timing offsets is Δ_u = |κ1 − κ2| mod M/2. Assignments are valid when
//! every Δ_u is nonzero (no self-resemblance at offset M/2) and pairwise distinct
//! (no end device resembling another); that caps the population at M/2 − 1 devices.

use crate::css::ChirpTable;
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

pub const DEFAULT_N_PREAMBLE: usize = 8;

/// Distance invariant Δ = |κ1 − κ2| mod M/2.
pub fn delta_of(kappa1: usize, kappa2: usize, m: usize) -> usize {
    kappa1.abs_diff(kappa2) % (m / 2)
}

/// One end device's chirp pair and its derived Δ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PreambleAssignment {
    pub ed_id: usize,
    pub kappa1: usize,
    pub kappa2: usize,
    pub delta: usize,
}

impl PreambleAssignment {
    /// Validated constructor: indices in range, distinct chirps, Δ ≠ 0.
    pub fn new(ed_id: usize, kappa1: usize, kappa2: usize, m: usize) -> Result<Self> {
        let a = Self::unvalidated(ed_id, kappa1, kappa2, m);
        if kappa1 >= m || kappa2 >= m {
            return Err(Error::Config(format!(
                "chirp indices ({kappa1}, {kappa2}) out of range for M = {m}"
            )));
        }
        if kappa1 == kappa2 {
            return Err(Error::Config(format!(
                "ED {ed_id}: preamble chirps must be distinct"
            )));
        }
        if a.delta == 0 {
            return Err(Error::Config(format!(
                "ED {ed_id}: pair ({kappa1}, {kappa2}) is self-resembling (Δ = 0)"
            )));
        }
        Ok(a)
    }

    /// Constructor without constraint checks, for deliberately broken plans in
    /// experiments; `validate_assignment` reports the violations.
    pub fn unvalidated(ed_id: usize, kappa1: usize, kappa2: usize, m: usize) -> Self {
        PreambleAssignment {
            ed_id,
            kappa1,
            kappa2,
            delta: delta_of(kappa1, kappa2, m),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssignmentPolicy {
    /// ED u gets the pair (0, u); Δ values are 1, 2, 3, …
    Sequential,
    /// Random constraint-satisfying pairs by rejection sampling.
    SeededRandom,
}

impl std::str::FromStr for AssignmentPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(AssignmentPolicy::Sequential),
            "seeded-random" => Ok(AssignmentPolicy::SeededRandom),
            other => Err(Error::Config(format!(
                "unknown assignment policy '{other}' (expected 'sequential' or 'seeded-random')"
            ))),
        }
    }
}

impl fmt::Display for AssignmentPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssignmentPolicy::Sequential => "sequential",
            AssignmentPolicy::SeededRandom => "seeded-random",
        })
    }
}

/// A full network assignment: who owns which pair, at which symbol length, with
/// how many preamble repetitions.
#[derive(Clone, Debug)]
pub struct AssignmentPlan {
    pub assignments: Vec<PreambleAssignment>,
    pub m: usize,
    pub n_preamble: usize,
}

/// Builds a constraint-satisfying plan for `n_users` devices, deterministic in
/// (policy, seed). Fails with the capacity bound M/2 − 1 when oversubscribed.
pub fn assign_preambles(
    n_users: usize,
    m: usize,
    policy: AssignmentPolicy,
    seed: u64,
) -> Result<AssignmentPlan> {
    let max = m / 2 - 1;
    if n_users == 0 {
        return Err(Error::Config("at least one user required".into()));
    }
    if n_users > max {
        return Err(Error::Capacity {
            requested: n_users,
            max,
        });
    }
    let assignments = match policy {
        AssignmentPolicy::Sequential => (1..=n_users)
            .map(|u| PreambleAssignment::unvalidated(u, 0, u, m))
            .collect(),
        AssignmentPolicy::SeededRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut used_delta = vec![false; m / 2];
            let mut out = Vec::with_capacity(n_users);
            while out.len() < n_users {
                let kappa1 = rng.gen_range(0..m);
                let kappa2 = rng.gen_range(0..m);
                let delta = delta_of(kappa1, kappa2, m);
                if kappa1 == kappa2 || delta == 0 || used_delta[delta] {
                    continue;
                }
                used_delta[delta] = true;
                out.push(PreambleAssignment::unvalidated(out.len() + 1, kappa1, kappa2, m));
            }
            out
        }
    };
    Ok(AssignmentPlan {
        assignments,
        m,
        n_preamble: DEFAULT_N_PREAMBLE,
    })
}

/// One preamble symbol (s_{κ1} + s_{κ2})/√2: unit mean power, total energy M.
pub fn build_preamble_symbol(
    assignment: &PreambleAssignment,
    table: &ChirpTable,
) -> Result<Vec<Complex64>> {
    let m = table.m();
    if assignment.kappa1 >= m || assignment.kappa2 >= m {
        return Err(Error::Config(format!(
            "ED {}: chirp indices ({}, {}) out of range for M = {m}",
            assignment.ed_id, assignment.kappa1, assignment.kappa2
        )));
    }
    if assignment.kappa1 == assignment.kappa2 {
        return Err(Error::Config(format!(
            "ED {}: preamble chirps must be distinct",
            assignment.ed_id
        )));
    }
    let scale = 0.5f64.sqrt();
    Ok(table
        .chirp(assignment.kappa1)
        .iter()
        .zip(table.chirp(assignment.kappa2))
        .map(|(a, b)| (a + b) * scale)
        .collect())
}

/// A broken constraint found by `validate_assignment`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    IndexOutOfRange { ed_id: usize, index: usize },
    ZeroDelta { ed_id: usize },
    DuplicatePair { first_ed: usize, second_ed: usize },
    DuplicateDelta { first_ed: usize, second_ed: usize, delta: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexOutOfRange { ed_id, index } => {
                write!(f, "ED {ed_id}: chirp index {index} out of range")
            }
            Violation::ZeroDelta { ed_id } => {
                write!(f, "ED {ed_id}: Δ = 0 (self-resembling pair)")
            }
            Violation::DuplicatePair { first_ed, second_ed } => {
                write!(f, "EDs {first_ed} and {second_ed} share the same chirp pair")
            }
            Violation::DuplicateDelta { first_ed, second_ed, delta } => {
                write!(f, "EDs {first_ed} and {second_ed} share Δ = {delta}")
            }
        }
    }
}

/// Constraint report for a plan; empty iff the plan is valid.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            writeln!(f, "plan: ok")
        } else {
            for v in &self.violations {
                writeln!(f, "violation: {v}")?;
            }
            Ok(())
        }
    }
}

/// Checks every assignment constraint; total (never errors), reporting all
/// violations it finds.
pub fn validate_assignment(plan: &AssignmentPlan) -> ValidationReport {
    let mut violations = Vec::new();
    let m = plan.m;
    for a in &plan.assignments {
        for index in [a.kappa1, a.kappa2] {
            if index >= m {
                violations.push(Violation::IndexOutOfRange { ed_id: a.ed_id, index });
            }
        }
        if delta_of(a.kappa1, a.kappa2, m) == 0 {
            violations.push(Violation::ZeroDelta { ed_id: a.ed_id });
        }
    }
    for (i, a) in plan.assignments.iter().enumerate() {
        for b in &plan.assignments[i + 1..] {
            let same_pair = (a.kappa1, a.kappa2) == (b.kappa1, b.kappa2)
                || (a.kappa1, a.kappa2) == (b.kappa2, b.kappa1);
            if same_pair {
                violations.push(Violation::DuplicatePair {
                    first_ed: a.ed_id,
                    second_ed: b.ed_id,
                });
                continue;
            }
            let (da, db) = (delta_of(a.kappa1, a.kappa2, m), delta_of(b.kappa1, b.kappa2, m));
            if da == db && da != 0 {
                violations.push(Violation::DuplicateDelta {
                    first_ed: a.ed_id,
                    second_ed: b.ed_id,
                    delta: da,
                });
            }
        }
    }
    ValidationReport { violations }
}
