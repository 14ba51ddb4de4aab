//! Per-attribute train/test assignment of whole groups.
//!
//! Each attribute gets its own split over a shared [`Grouping`]. A split keeps
//! every group on one side, keeps the train share inside a window around the
//! target ratio, and keeps the positive rate on both sides close.
//!
//! The search is a randomized greedy construction repeated `trials` times.
//! Each trial is polished by a flip/swap local search before the trials are
//! compared.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::AttributeMatrix;
use crate::error::{Error, Result};
use crate::grouping::{Grouping, Hint};
use crate::seed;

/// Slack on every feasibility comparison, shared by the verifier.
pub const FEASIBILITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyWeights {
    /// weight of |train ratio - target|
    pub ratio: f64,
    /// weight of |pos rate train - pos rate test|
    pub pos_rate: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self {
            ratio: 1.0,
            pos_rate: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConstraints {
    pub target_train_ratio: f64,
    pub ratio_window: [f64; 2],
    pub pos_rate_tolerance: f64,
    pub min_pos_per_side: usize,
    pub min_neg_per_side: usize,
    pub trials: usize,
    pub penalty_weights: PenaltyWeights,
    pub master_seed: u64,
}

impl Default for SplitConstraints {
    fn default() -> Self {
        Self {
            target_train_ratio: 0.8,
            ratio_window: [0.5, 0.9],
            pos_rate_tolerance: 0.1,
            min_pos_per_side: 1,
            min_neg_per_side: 1,
            trials: 64,
            penalty_weights: PenaltyWeights::default(),
            master_seed: 0,
        }
    }
}

impl SplitConstraints {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.ratio_window;
        let bad = |msg: &str| Err(Error::Config(format!("split constraints: {msg}")));
        if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
            return bad("ratio_window must lie inside (0, 1) with lo <= hi");
        }
        if !(self.target_train_ratio >= 0.5 && self.target_train_ratio >= lo && self.target_train_ratio <= hi) {
            return bad("target_train_ratio must be >= 0.5 and inside ratio_window");
        }
        if self.pos_rate_tolerance.is_nan() || self.pos_rate_tolerance < 0.0 {
            return bad("pos_rate_tolerance must be non-negative");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        let w = self.penalty_weights;
        if !(w.ratio >= 0.0 && w.pos_rate >= 0.0) {
            return bad("penalty weights must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub attribute_id: usize,
    pub side: Vec<Side>,
    pub feasible: bool,
    pub penalty: f64,
    pub achieved_train_ratio: f64,
    pub pos_rate_train: f64,
    pub pos_rate_test: f64,
    pub trial_seed: u64,
}

impl SplitAssignment {
    pub fn train_ids(&self) -> Vec<usize> {
        self.ids_on(Side::Train)
    }

    pub fn test_ids(&self) -> Vec<usize> {
        self.ids_on(Side::Test)
    }

    fn ids_on(&self, side: Side) -> Vec<usize> {
        self.side
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == side)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Concept counts on each side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    train: usize,
    test: usize,
    pos_train: usize,
    pos_test: usize,
}

impl Tally {
    fn with(mut self, size: usize, pos: usize, side: Side) -> Self {
        match side {
            Side::Train => {
                self.train += size;
                self.pos_train += pos;
            }
            Side::Test => {
                self.test += size;
                self.pos_test += pos;
            }
        }
        self
    }

    fn without(mut self, size: usize, pos: usize, side: Side) -> Self {
        match side {
            Side::Train => {
                self.train -= size;
                self.pos_train -= pos;
            }
            Side::Test => {
                self.test -= size;
                self.pos_test -= pos;
            }
        }
        self
    }

    fn total(&self) -> usize {
        self.train + self.test
    }

    fn ratio(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.train as f64 / self.total() as f64
        }
    }

    /// Positive rates with `empty` standing in for a side with no concepts.
    fn pos_rates(&self, empty: f64) -> (f64, f64) {
        let rate = |pos: usize, n: usize| if n == 0 { empty } else { pos as f64 / n as f64 };
        (rate(self.pos_train, self.train), rate(self.pos_test, self.test))
    }

    fn penalty(&self, c: &SplitConstraints, empty_rate: f64) -> f64 {
        let (pt, pe) = self.pos_rates(empty_rate);
        c.penalty_weights.ratio * (self.ratio() - c.target_train_ratio).abs()
            + c.penalty_weights.pos_rate * (pt - pe).abs()
    }

    /// Per-constraint violation amounts of a complete assignment.
    fn violations(&self, c: &SplitConstraints) -> Violations {
        let n = self.total().max(1) as f64;
        let [lo, hi] = c.ratio_window;
        let r = self.ratio();
        let (pt, pe) = self.pos_rates(0.0);
        let gap = (pt - pe).abs();
        let neg_train = self.train - self.pos_train;
        let neg_test = self.test - self.pos_test;
        let short = |have: usize, need: usize| need.saturating_sub(have) as f64 / n;
        Violations {
            ratio: (lo - FEASIBILITY_EPS - r).max(0.0) + (r - hi - FEASIBILITY_EPS).max(0.0),
            pos_rate_gap: (gap - c.pos_rate_tolerance - FEASIBILITY_EPS).max(0.0),
            positives: short(self.pos_train, c.min_pos_per_side) + short(self.pos_test, c.min_pos_per_side),
            negatives: short(neg_train, c.min_neg_per_side) + short(neg_test, c.min_neg_per_side),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Violations {
    ratio: f64,
    pos_rate_gap: f64,
    positives: f64,
    negatives: f64,
}

impl Violations {
    fn total(&self) -> f64 {
        self.ratio + self.pos_rate_gap + self.positives + self.negatives
    }

    fn dominant(&self) -> RejectReason {
        let ranked = [
            (self.ratio, RejectReason::TrainRatioWindow),
            (self.pos_rate_gap, RejectReason::PositiveRateGap),
            (self.positives, RejectReason::TooFewPositives),
            (self.negatives, RejectReason::TooFewNegatives),
        ];
        ranked
            .into_iter()
            .fold((0.0, RejectReason::TrainRatioWindow), |best, cur| {
                if cur.0 > best.0 {
                    cur
                } else {
                    best
                }
            })
            .1
    }
}

/// Search objective: constraint violation first, then penalty.
#[derive(Debug, Clone, Copy)]
struct Score {
    violation: f64,
    penalty: f64,
}

impl Score {
    fn of(t: &Tally, c: &SplitConstraints) -> Self {
        Self {
            violation: t.violations(c).total(),
            penalty: t.penalty(c, 0.0),
        }
    }

    fn better_than(&self, other: &Score) -> bool {
        const V_EPS: f64 = 1e-15;
        const P_EPS: f64 = 1e-12;
        self.violation < other.violation - V_EPS
            || ((self.violation - other.violation).abs() <= V_EPS && self.penalty < other.penalty - P_EPS)
    }
}

struct GroupStats {
    size: usize,
    pos: usize,
    hint: Hint,
}

fn group_stats(g: &Grouping, labels: &[u8]) -> Vec<GroupStats> {
    g.groups
        .iter()
        .map(|grp| GroupStats {
            size: grp.members.len(),
            pos: grp.members.iter().filter(|&&m| labels[m] == 1).count(),
            hint: grp.hint,
        })
        .collect()
}

struct Trial {
    sides: Vec<Side>,
    tally: Tally,
    score: Score,
    seed: u64,
}

fn run_trial(stats: &[GroupStats], c: &SplitConstraints, overall_rate: f64, trial_seed: u64) -> Trial {
    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(trial_seed));
    let rank = |h: Hint| match h {
        Hint::ForceTrain => 0,
        Hint::PreferTrain => 1,
        Hint::Free => 2,
    };
    order.sort_by_key(|&g| rank(stats[g].hint));

    let mut sides = vec![Side::Train; stats.len()];
    let mut tally = Tally::default();
    for &g in &order {
        let s = &stats[g];
        let side = if s.hint == Hint::ForceTrain {
            Side::Train
        } else {
            let to_train = tally.with(s.size, s.pos, Side::Train).penalty(c, overall_rate);
            let to_test = tally.with(s.size, s.pos, Side::Test).penalty(c, overall_rate);
            if to_train <= to_test {
                Side::Train
            } else {
                Side::Test
            }
        };
        sides[g] = side;
        tally = tally.with(s.size, s.pos, side);
    }

    let score = local_search(stats, c, &order, &mut sides, &mut tally);
    Trial {
        sides,
        tally,
        score,
        seed: trial_seed,
    }
}

/// Best-improvement descent over single-group flips and train/test swaps.
///
/// The objective only depends on each group's (size, positives), so moves are
/// enumerated per distinct signature; the group actually moved is the first
/// one with that signature in the trial's placement order.
fn local_search(
    stats: &[GroupStats],
    c: &SplitConstraints,
    order: &[usize],
    sides: &mut [Side],
    tally: &mut Tally,
) -> Score {
    let mut current = Score::of(tally, c);
    loop {
        let mut by_sig: [BTreeMap<(usize, usize), usize>; 2] = [BTreeMap::new(), BTreeMap::new()];
        for &g in order {
            if stats[g].hint == Hint::ForceTrain {
                continue;
            }
            let slot = match sides[g] {
                Side::Train => 0,
                Side::Test => 1,
            };
            by_sig[slot].entry((stats[g].size, stats[g].pos)).or_insert(g);
        }

        let mut best: Option<(Score, Tally, Vec<usize>)> = None;
        let mut consider = |score: Score, t: Tally, moved: Vec<usize>| {
            let beats_best = best.as_ref().is_none_or(|(b, _, _)| score.better_than(b));
            if score.better_than(&current) && beats_best {
                best = Some((score, t, moved));
            }
        };

        for (slot, from) in [(0, Side::Train), (1, Side::Test)] {
            let to = if from == Side::Train { Side::Test } else { Side::Train };
            for (&(size, pos), &g) in &by_sig[slot] {
                let t = tally.without(size, pos, from).with(size, pos, to);
                consider(Score::of(&t, c), t, vec![g]);
            }
        }
        for (&(s1, p1), &g1) in &by_sig[0] {
            for (&(s2, p2), &g2) in &by_sig[1] {
                let t = tally
                    .without(s1, p1, Side::Train)
                    .with(s1, p1, Side::Test)
                    .without(s2, p2, Side::Test)
                    .with(s2, p2, Side::Train);
                consider(Score::of(&t, c), t, vec![g1, g2]);
            }
        }

        match best {
            Some((score, t, moved)) => {
                for g in moved {
                    sides[g] = match sides[g] {
                        Side::Train => Side::Test,
                        Side::Test => Side::Train,
                    };
                }
                *tally = t;
                current = score;
            }
            None => return current,
        }
    }
}

fn check_labels(labels: &[u8], n: usize) -> Result<usize> {
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "label vector has {} entries, grouping covers {n} concepts",
            labels.len()
        )));
    }
    if labels.iter().any(|&v| v > 1) {
        return Err(Error::InvalidArgument("labels must be 0/1".into()));
    }
    let pos = labels.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::InvalidArgument(
            "degenerate labels: need at least one positive and one negative".into(),
        ));
    }
    Ok(pos)
}

fn assign_inner(
    g: &Grouping,
    labels: &[u8],
    c: &SplitConstraints,
    seed: u64,
    attribute_id: usize,
) -> Result<(SplitAssignment, Violations)> {
    let n = g.n_concepts();
    let pos = check_labels(labels, n)?;
    c.validate()?;
    let overall_rate = pos as f64 / n as f64;
    let stats = group_stats(g, labels);

    let mut best: Option<Trial> = None;
    for t in 0..c.trials {
        let trial = run_trial(&stats, c, overall_rate, seed::derive(seed, t as u64));
        let replace = match &best {
            None => true,
            Some(b) => {
                let (tf, bf) = (trial.score.violation == 0.0, b.score.violation == 0.0);
                match (tf, bf) {
                    (true, false) => true,
                    (false, true) => false,
                    _ => trial.score.better_than(&b.score),
                }
            }
        };
        if replace {
            best = Some(trial);
        }
    }
    let best = best.expect("trials >= 1");

    let mut side = vec![Side::Train; n];
    for (grp, &s) in g.groups.iter().zip(&best.sides) {
        for &m in &grp.members {
            side[m] = s;
        }
    }
    let violations = best.tally.violations(c);
    let (pos_rate_train, pos_rate_test) = best.tally.pos_rates(0.0);
    Ok((
        SplitAssignment {
            attribute_id,
            side,
            feasible: violations.total() == 0.0,
            penalty: best.score.penalty,
            achieved_train_ratio: best.tally.ratio(),
            pos_rate_train,
            pos_rate_test,
            trial_seed: best.seed,
        },
        violations,
    ))
}

/// Splits one attribute. Deterministic in `(g, labels, c, seed)`.
pub fn assign_split(g: &Grouping, labels: &[u8], c: &SplitConstraints, seed: u64) -> Result<SplitAssignment> {
    assign_inner(g, labels, c, seed, 0).map(|(sa, _)| sa)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TrainRatioWindow,
    PositiveRateGap,
    TooFewPositives,
    TooFewNegatives,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub attribute_id: usize,
    pub attribute: String,
    pub reason: RejectReason,
}

/// Splits for every attribute plus the feasibility verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSet {
    pub assignments: Vec<SplitAssignment>,
    pub rejected: Vec<Rejection>,
}

impl SplitSet {
    pub fn splittable(&self) -> Vec<usize> {
        self.assignments
            .iter()
            .filter(|a| a.feasible)
            .map(|a| a.attribute_id)
            .collect()
    }
}

/// Runs [`assign_split`] for every attribute, seeding attribute `a` with
/// `derive(master_seed, a)`. Output order is attribute order regardless of
/// how the work is scheduled.
pub fn split_all(am: &AttributeMatrix, g: &Grouping, c: &SplitConstraints) -> Result<SplitSet> {
    if am.n_concepts() != g.n_concepts() {
        return Err(Error::Validation(format!(
            "attribute matrix has {} concepts, grouping has {}",
            am.n_concepts(),
            g.n_concepts()
        )));
    }
    c.validate()?;
    let results: Vec<(SplitAssignment, Violations)> = (0..am.n_attributes())
        .into_par_iter()
        .map(|a| {
            let labels = am.column(a);
            assign_inner(g, &labels, c, seed::derive(c.master_seed, a as u64), a)
        })
        .collect::<Result<_>>()?;
    let rejected = results
        .iter()
        .filter(|(sa, _)| !sa.feasible)
        .map(|(sa, v)| Rejection {
            attribute_id: sa.attribute_id,
            attribute: am.names()[sa.attribute_id].clone(),
            reason: v.dominant(),
        })
        .collect();
    Ok(SplitSet {
        assignments: results.into_iter().map(|(sa, _)| sa).collect(),
        rejected,
    })
}

/// Splittable attribute ids, and the rejected ones with their dominant
/// violated constraint.
pub fn filter_attributes(
    am: &AttributeMatrix,
    g: &Grouping,
    c: &SplitConstraints,
) -> Result<(Vec<usize>, Vec<Rejection>)> {
    let set = split_all(am, g, c)?;
    Ok((set.splittable(), set.rejected))
}

/// A single split for all attributes: each group goes to the side most of the
/// feasible per-attribute splits put it on (ties to train).
pub fn majority_vote(assignments: &[SplitAssignment], g: &Grouping) -> Vec<Side> {
    let mut sides = vec![Side::Train; g.n_concepts()];
    for grp in &g.groups {
        let anchor = grp.members[0];
        let (train, test) = assignments
            .iter()
            .filter(|a| a.feasible)
            .fold((0usize, 0usize), |(tr, te), a| match a.side[anchor] {
                Side::Train => (tr + 1, te),
                Side::Test => (tr, te + 1),
            });
        let side = if train >= test { Side::Train } else { Side::Test };
        for &m in &grp.members {
            sides[m] = side;
        }
    }
    sides
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Recomputes every split property from scratch, independent of the search.
pub fn verify_split(sa: &SplitAssignment, g: &Grouping, labels: &[u8], c: &SplitConstraints) -> VerificationReport {
    let mut checks = Vec::new();
    let mut push = |name: &'static str, passed: bool, detail: String| checks.push(Check { name, passed, detail });

    let sized = sa.side.len() == labels.len() && sa.side.len() == g.n_concepts();
    push(
        "lengths match",
        sized,
        format!(
            "{} sides, {} labels, {} concepts",
            sa.side.len(),
            labels.len(),
            g.n_concepts()
        ),
    );
    if !sized {
        return VerificationReport { checks };
    }

    let broken: Vec<usize> = g
        .groups
        .iter()
        .enumerate()
        .filter(|(_, grp)| grp.members.iter().any(|&m| sa.side[m] != sa.side[grp.members[0]]))
        .map(|(i, _)| i)
        .collect();
    push(
        "group unbroken",
        broken.is_empty(),
        format!("broken groups: {broken:?}"),
    );

    let forced_out: Vec<usize> = g
        .groups
        .iter()
        .filter(|grp| grp.hint == Hint::ForceTrain)
        .flat_map(|grp| grp.members.iter().copied())
        .filter(|&m| sa.side[m] == Side::Test)
        .collect();
    push(
        "force-train honored",
        forced_out.is_empty(),
        format!("forced concepts on test: {forced_out:?}"),
    );

    let mut n_train = 0usize;
    let mut n_test = 0usize;
    let mut pos_train = 0usize;
    let mut pos_test = 0usize;
    for (s, &y) in sa.side.iter().zip(labels) {
        match s {
            Side::Train => {
                n_train += 1;
                pos_train += y as usize;
            }
            Side::Test => {
                n_test += 1;
                pos_test += y as usize;
            }
        }
    }
    let n = labels.len() as f64;
    let ratio = n_train as f64 / n;
    let rate = |p: usize, m: usize| if m == 0 { 0.0 } else { p as f64 / m as f64 };
    let (rt, re) = (rate(pos_train, n_train), rate(pos_test, n_test));

    let stats_ok = (ratio - sa.achieved_train_ratio).abs() <= 1e-12
        && (rt - sa.pos_rate_train).abs() <= 1e-12
        && (re - sa.pos_rate_test).abs() <= 1e-12;
    push(
        "recorded statistics",
        stats_ok,
        format!("recomputed ratio {ratio}, pos rates {rt} / {re}"),
    );

    let [lo, hi] = c.ratio_window;
    let in_window = ratio >= lo - FEASIBILITY_EPS && ratio <= hi + FEASIBILITY_EPS;
    let gap = (rt - re).abs();
    let gap_ok = n_train > 0 && n_test > 0 && gap <= c.pos_rate_tolerance + FEASIBILITY_EPS;
    let pos_ok = pos_train >= c.min_pos_per_side && pos_test >= c.min_pos_per_side;
    let neg_ok = n_train - pos_train >= c.min_neg_per_side && n_test - pos_test >= c.min_neg_per_side;
    push(
        "train ratio in window",
        in_window,
        format!("ratio {ratio:.6} vs [{lo}, {hi}]"),
    );
    push(
        "positive-rate gap",
        gap_ok,
        format!("gap {gap:.6} vs tolerance {}", c.pos_rate_tolerance),
    );
    push(
        "min positives per side",
        pos_ok,
        format!("train {pos_train}, test {pos_test}, need {}", c.min_pos_per_side),
    );
    push(
        "min negatives per side",
        neg_ok,
        format!(
            "train {}, test {}, need {}",
            n_train - pos_train,
            n_test - pos_test,
            c.min_neg_per_side
        ),
    );
    let all_constraints = in_window && gap_ok && pos_ok && neg_ok;
    push(
        "feasible flag",
        sa.feasible == all_constraints,
        format!("recorded {}, recomputed {all_constraints}", sa.feasible),
    );
    VerificationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::{Group, Strategy};

    fn singletons(n: usize) -> Grouping {
        Grouping::new(
            Strategy::Random,
            n,
            (0..n)
                .map(|i| Group {
                    members: vec![i],
                    hint: Hint::Free,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn whole_set_in_one_group_is_infeasible() {
        let g = Grouping::new(
            Strategy::Supercategory,
            6,
            vec![Group {
                members: (0..6).collect(),
                hint: Hint::Free,
            }],
        )
        .unwrap();
        let sa = assign_split(&g, &[1, 0, 1, 0, 0, 0], &SplitConstraints::default(), 3).unwrap();
        assert!(!sa.feasible);
        assert!(
            verify_split(&sa, &g, &[1, 0, 1, 0, 0, 0], &SplitConstraints::default())
                .check("group unbroken")
                .unwrap()
                .passed
        );
    }

    #[test]
    fn ten_singletons_feasible_eight_two() {
        let g = singletons(10);
        let labels = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let c = SplitConstraints::default();
        let sa = assign_split(&g, &labels, &c, 42).unwrap();
        assert!(sa.feasible);
        assert!((sa.achieved_train_ratio - 0.8).abs() < 1e-12);
        assert!((sa.pos_rate_train - sa.pos_rate_test).abs() <= 0.1);
        assert!(verify_split(&sa, &g, &labels, &c).all_passed());
    }

    #[test]
    fn force_train_is_respected() {
        let mut groups = vec![Group {
            members: vec![0, 1],
            hint: Hint::ForceTrain,
        }];
        groups.extend((2..12).map(|i| Group {
            members: vec![i],
            hint: Hint::Free,
        }));
        let g = Grouping::new(Strategy::Llm, 12, groups).unwrap();
        let labels = [0, 1, 1, 0, 1, 0, 0, 1, 0, 0, 1, 0];
        for seed in 0..20 {
            let sa = assign_split(&g, &labels, &SplitConstraints::default(), seed).unwrap();
            assert_eq!(sa.side[0], Side::Train);
            assert_eq!(sa.side[1], Side::Train);
        }
    }

    #[test]
    fn degenerate_labels_error() {
        let g = singletons(4);
        assert!(assign_split(&g, &[0, 0, 0, 0], &SplitConstraints::default(), 0).is_err());
        assert!(assign_split(&g, &[1, 1, 1, 1], &SplitConstraints::default(), 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let g = singletons(30);
        let labels: Vec<u8> = (0..30).map(|i| (i % 3 == 0) as u8).collect();
        let c = SplitConstraints::default();
        let a = assign_split(&g, &labels, &c, 9).unwrap();
        let b = assign_split(&g, &labels, &c, 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn verify_flags_broken_group() {
        let g = Grouping::new(
            Strategy::Clustering,
            4,
            vec![
                Group {
                    members: vec![0, 1],
                    hint: Hint::Free,
                },
                Group {
                    members: vec![2, 3],
                    hint: Hint::Free,
                },
            ],
        )
        .unwrap();
        let sa = SplitAssignment {
            attribute_id: 0,
            side: vec![Side::Train, Side::Test, Side::Train, Side::Train],
            feasible: false,
            penalty: 0.0,
            achieved_train_ratio: 0.75,
            pos_rate_train: 1.0 / 3.0,
            pos_rate_test: 1.0,
            trial_seed: 0,
        };
        let report = verify_split(&sa, &g, &[0, 1, 1, 0], &SplitConstraints::default());
        assert!(!report.check("group unbroken").unwrap().passed);
    }

    #[test]
    fn five_of_six_ratio_passes_window() {
        let g = singletons(6);
        let labels = [1, 0, 0, 1, 0, 0];
        let side = vec![
            Side::Train,
            Side::Train,
            Side::Train,
            Side::Test,
            Side::Train,
            Side::Test,
        ];
        let sa = SplitAssignment {
            attribute_id: 0,
            side,
            feasible: false,
            penalty: 0.0,
            achieved_train_ratio: 5.0 / 6.0,
            pos_rate_train: 0.25,
            pos_rate_test: 0.5,
            trial_seed: 0,
        };
        let report = verify_split(&sa, &g, &labels, &SplitConstraints::default());
        assert!(report.check("train ratio in window").unwrap().passed);
        // gap 0.25 > 0.1, so the recorded infeasible flag is the correct one
        assert!(!report.check("positive-rate gap").unwrap().passed);
        assert!(report.check("feasible flag").unwrap().passed);
    }

    #[test]
    fn constraint_validation() {
        let mut c = SplitConstraints::default();
        assert!(c.validate().is_ok());
        c.ratio_window = [0.0, 0.9];
        assert!(c.validate().is_err());
        c = SplitConstraints {
            target_train_ratio: 0.95,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c = SplitConstraints {
            trials: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn majority_vote_keeps_groups_whole() {
        let g = Grouping::new(
            Strategy::Clustering,
            4,
            vec![
                Group {
                    members: vec![0, 3],
                    hint: Hint::Free,
                },
                Group {
                    members: vec![1, 2],
                    hint: Hint::Free,
                },
            ],
        )
        .unwrap();
        let mk = |s: [Side; 4]| SplitAssignment {
            attribute_id: 0,
            side: s.to_vec(),
            feasible: true,
            penalty: 0.0,
            achieved_train_ratio: 0.5,
            pos_rate_train: 0.0,
            pos_rate_test: 0.0,
            trial_seed: 0,
        };
        use Side::*;
        let votes = [
            mk([Train, Test, Test, Train]),
            mk([Test, Test, Test, Test]),
            mk([Train, Test, Test, Train]),
        ];
        assert_eq!(majority_vote(&votes, &g), vec![Train, Test, Test, Train]);
    }
}
