//! Two-player normal-form stage games: payoff matrices, stochastic payoff
//! sampling, and norm identification.
//!
//! A norm is a pure Nash equilibrium of the expected-payoff matrix that the
//! population can settle on. Games carry their optimal and suboptimal norm
//! sets explicitly so the engine can score convergence without re-deriving
//! equilibria at runtime.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Player role within one interaction. Roles are the entire state space of
/// every learner: value tables are keyed by (role, action).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Row,
    Column,
}

impl Role {
    pub const COUNT: usize = 2;

    /// Table index for this role.
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Role::Row => 0,
            Role::Column => 1,
        }
    }

    pub fn other(self) -> Role {
        match self {
            Role::Row => Role::Column,
            Role::Column => Role::Row,
        }
    }
}

/// A joint action `(row_action, col_action)`.
pub type JointAction = (usize, usize);

/// Lowercase letter label for an action index (`0 -> "a"`), falling back to
/// the bare index past `z`.
pub fn action_label(action: usize) -> String {
    if action < 26 {
        ((b'a' + action as u8) as char).to_string()
    } else {
        action.to_string()
    }
}

/// One possible payoff realization of a matrix cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub row: f64,
    pub col: f64,
    pub prob: f64,
}

/// The payoff distribution of one matrix cell. Deterministic cells hold a
/// single outcome with probability 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffEntry {
    pub outcomes: Vec<Outcome>,
}

impl PayoffEntry {
    pub fn deterministic(row: f64, col: f64) -> Self {
        PayoffEntry {
            outcomes: vec![Outcome { row, col, prob: 1.0 }],
        }
    }

    /// Two equiprobable payoff assignments: `(hi, lo)` or `(lo, hi)`.
    pub fn split(hi: f64, lo: f64) -> Self {
        PayoffEntry {
            outcomes: vec![
                Outcome { row: hi, col: lo, prob: 0.5 },
                Outcome { row: lo, col: hi, prob: 0.5 },
            ],
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.outcomes.len() == 1
    }

    /// Probability-weighted average payoff pair.
    pub fn expected(&self) -> (f64, f64) {
        let mut row = 0.0;
        let mut col = 0.0;
        for o in &self.outcomes {
            row += o.prob * o.row;
            col += o.prob * o.col;
        }
        (row, col)
    }

    /// Draws one outcome. Consumes exactly one value from `rng` for
    /// stochastic entries and none for deterministic ones, so callers can
    /// rely on a fixed draw count per interaction.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        if self.outcomes.len() == 1 {
            let o = &self.outcomes[0];
            return (o.row, o.col);
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for o in &self.outcomes {
            acc += o.prob;
            if u < acc {
                return (o.row, o.col);
            }
        }
        let last = self.outcomes.last().expect("entry has outcomes");
        (last.row, last.col)
    }
}

/// Built-in game families.
///
/// `Cg`/`Acg` are pure (anti-)coordination games for any `n >= 2`.
/// `Cghp`/`Fscghp` are the high-penalty variants: exact tables at `n = 6`,
/// the parametric extension elsewhere. `Cghp3` is the 3-action high-penalty
/// game used by the late-intervention experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GameKind {
    Cg,
    Acg,
    Cghp,
    Fscghp,
    Cghp3,
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GameKind::Cg => "CG",
            GameKind::Acg => "ACG",
            GameKind::Cghp => "CGHP",
            GameKind::Fscghp => "FSCGHP",
            GameKind::Cghp3 => "CGHP3",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("unsupported game: {kind} with {n_actions} actions ({reason})")]
    Unsupported {
        kind: GameKind,
        n_actions: usize,
        reason: String,
    },
    #[error("invalid game definition: {0}")]
    Invalid(String),
    #[error("failed to read game file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse game file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// A complete two-player stage game plus its declared norm sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    n_actions: usize,
    entries: Vec<PayoffEntry>,
    optimal_norms: Vec<JointAction>,
    suboptimal_norms: Vec<JointAction>,
}

impl Game {
    /// Validates and constructs a game from explicit parts.
    ///
    /// Rejects incomplete matrices, outcome probabilities that do not sum to
    /// one, overlapping norm sets, and declared norms that are not pure Nash
    /// equilibria of the expected-payoff matrix.
    pub fn new(
        n_actions: usize,
        entries: Vec<PayoffEntry>,
        optimal_norms: Vec<JointAction>,
        suboptimal_norms: Vec<JointAction>,
    ) -> Result<Self, GameError> {
        if n_actions == 0 {
            return Err(GameError::Invalid("n_actions must be positive".into()));
        }
        if entries.len() != n_actions * n_actions {
            return Err(GameError::Invalid(format!(
                "matrix has {} entries, expected {}",
                entries.len(),
                n_actions * n_actions
            )));
        }
        for (i, entry) in entries.iter().enumerate() {
            if entry.outcomes.is_empty() {
                return Err(GameError::Invalid(format!(
                    "entry ({}, {}) has no outcomes",
                    i / n_actions,
                    i % n_actions
                )));
            }
            let total: f64 = entry.outcomes.iter().map(|o| o.prob).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(GameError::Invalid(format!(
                    "entry ({}, {}) outcome probabilities sum to {total}, expected 1",
                    i / n_actions,
                    i % n_actions
                )));
            }
            if entry.outcomes.iter().any(|o| o.prob < 0.0 || o.prob > 1.0) {
                return Err(GameError::Invalid(format!(
                    "entry ({}, {}) has an outcome probability outside [0, 1]",
                    i / n_actions,
                    i % n_actions
                )));
            }
        }
        let mut optimal_norms = optimal_norms;
        let mut suboptimal_norms = suboptimal_norms;
        optimal_norms.sort_unstable();
        optimal_norms.dedup();
        suboptimal_norms.sort_unstable();
        suboptimal_norms.dedup();
        for &(r, c) in optimal_norms.iter().chain(&suboptimal_norms) {
            if r >= n_actions || c >= n_actions {
                return Err(GameError::Invalid(format!(
                    "norm ({r}, {c}) out of range for {n_actions} actions"
                )));
            }
        }
        if optimal_norms.iter().any(|n| suboptimal_norms.contains(n)) {
            return Err(GameError::Invalid(
                "optimal and suboptimal norm sets overlap".into(),
            ));
        }
        let game = Game {
            n_actions,
            entries,
            optimal_norms,
            suboptimal_norms,
        };
        for &norm in game.optimal_norms.iter().chain(&game.suboptimal_norms) {
            if !game.is_pure_nash(norm) {
                return Err(GameError::Invalid(format!(
                    "declared norm ({}, {}) is not a pure Nash equilibrium of the expected matrix",
                    action_label(norm.0),
                    action_label(norm.1)
                )));
            }
        }
        Ok(game)
    }

    /// Builds one of the built-in games.
    pub fn make_builtin(kind: GameKind, n_actions: usize) -> Result<Self, GameError> {
        let unsupported = |reason: &str| GameError::Unsupported {
            kind,
            n_actions,
            reason: reason.to_string(),
        };
        if n_actions < 2 {
            return Err(unsupported("at least 2 actions required"));
        }
        match kind {
            GameKind::Cg => Self::coordination(n_actions, false),
            GameKind::Acg => Self::coordination(n_actions, true),
            GameKind::Cghp => Self::high_penalty(n_actions, false),
            GameKind::Fscghp => Self::high_penalty(n_actions, true),
            GameKind::Cghp3 => {
                if n_actions != 3 {
                    return Err(unsupported("CGHP3 is defined for exactly 3 actions"));
                }
                Self::high_penalty(3, false)
            }
        }
    }

    /// Coordination payoff 1 on the diagonal (anti-diagonal when `anti`),
    /// -1 elsewhere; every coordinated cell is an optimal norm.
    fn coordination(n: usize, anti: bool) -> Result<Self, GameError> {
        let mut entries = Vec::with_capacity(n * n);
        let mut norms = Vec::with_capacity(n);
        for r in 0..n {
            for c in 0..n {
                let matched = if anti { c == n - 1 - r } else { r == c };
                let v = if matched { 1.0 } else { -1.0 };
                entries.push(PayoffEntry::deterministic(v, v));
            }
        }
        for r in 0..n {
            norms.push(if anti { (r, n - 1 - r) } else { (r, r) });
        }
        Game::new(n, entries, norms, Vec::new())
    }

    /// High-penalty coordination game. Actions at even indices carry the
    /// optimal diagonal payoff 10, odd indices the suboptimal 7;
    /// mis-coordination between two distinct optimal actions costs -30,
    /// every other mismatch 0. At `n = 6` the optimal/suboptimal split is
    /// {a,c,d,f} / {b,e} instead, matching the reference 6-action tables.
    /// The stochastic variant splits each expected value v into the
    /// equiprobable pair (v + delta, v - delta) with delta 2 on optimal
    /// norms, 7 on suboptimal norms, 10 on the -30 cells and 5 on the zeros.
    fn high_penalty(n: usize, stochastic: bool) -> Result<Self, GameError> {
        let optimal_action = |i: usize| {
            if n == 6 {
                matches!(i, 0 | 2 | 3 | 5)
            } else {
                i % 2 == 0
            }
        };
        let mut entries = Vec::with_capacity(n * n);
        let mut optimal = Vec::new();
        let mut suboptimal = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let v = if r == c {
                    if optimal_action(r) {
                        10.0
                    } else {
                        7.0
                    }
                } else if optimal_action(r) && optimal_action(c) {
                    -30.0
                } else {
                    0.0
                };
                let entry = if stochastic {
                    let delta = match v as i64 {
                        10 => 2.0,
                        7 => 7.0,
                        -30 => 10.0,
                        _ => 5.0,
                    };
                    PayoffEntry::split(v + delta, v - delta)
                } else {
                    PayoffEntry::deterministic(v, v)
                };
                entries.push(entry);
            }
        }
        for i in 0..n {
            if optimal_action(i) {
                optimal.push((i, i));
            } else {
                suboptimal.push((i, i));
            }
        }
        Game::new(n, entries, optimal, suboptimal)
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn entry(&self, row_action: usize, col_action: usize) -> &PayoffEntry {
        &self.entries[row_action * self.n_actions + col_action]
    }

    pub fn optimal_norms(&self) -> &[JointAction] {
        &self.optimal_norms
    }

    pub fn suboptimal_norms(&self) -> &[JointAction] {
        &self.suboptimal_norms
    }

    /// Draws a payoff pair for the given joint action. Stochastic entries
    /// consume exactly one rng value, deterministic entries none.
    #[inline]
    pub fn sample_payoff<R: Rng + ?Sized>(
        &self,
        row_action: usize,
        col_action: usize,
        rng: &mut R,
    ) -> (f64, f64) {
        self.entry(row_action, col_action).sample(rng)
    }

    /// The probability-weighted average payoff matrix, row-major.
    pub fn expected_matrix(&self) -> Vec<(f64, f64)> {
        self.entries.iter().map(PayoffEntry::expected).collect()
    }

    fn expected(&self, row_action: usize, col_action: usize) -> (f64, f64) {
        self.entry(row_action, col_action).expected()
    }

    /// Brute-force pure-Nash check of a joint action over the expected
    /// matrix: no unilateral deviation strictly improves the deviator.
    pub fn is_pure_nash(&self, (r, c): JointAction) -> bool {
        let (row_pay, col_pay) = self.expected(r, c);
        for alt in 0..self.n_actions {
            if self.expected(alt, c).0 > row_pay + 1e-12 {
                return false;
            }
            if self.expected(r, alt).1 > col_pay + 1e-12 {
                return false;
            }
        }
        true
    }

    /// Loads a game from the JSON file format (see [`GameFile`]).
    pub fn from_path(path: &Path) -> Result<Self, GameError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, GameError> {
        let file: GameFile = serde_json::from_str(text)?;
        file.into_game()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&GameFile::from_game(self)).expect("game serializes")
    }
}

/// On-disk game document: `n_actions`, the complete matrix as
/// `matrix[row][col] = [[row_payoff, col_payoff, probability], ...]`, and
/// the norm sets as `[row_action, col_action]` pairs.
#[derive(Debug, Serialize, Deserialize)]
pub struct GameFile {
    pub n_actions: usize,
    pub matrix: Vec<Vec<Vec<[f64; 3]>>>,
    pub optimal_norms: Vec<[usize; 2]>,
    #[serde(default)]
    pub suboptimal_norms: Vec<[usize; 2]>,
}

impl GameFile {
    fn from_game(game: &Game) -> Self {
        let n = game.n_actions;
        let matrix = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        game.entry(r, c)
                            .outcomes
                            .iter()
                            .map(|o| [o.row, o.col, o.prob])
                            .collect()
                    })
                    .collect()
            })
            .collect();
        GameFile {
            n_actions: n,
            matrix,
            optimal_norms: game.optimal_norms.iter().map(|&(r, c)| [r, c]).collect(),
            suboptimal_norms: game.suboptimal_norms.iter().map(|&(r, c)| [r, c]).collect(),
        }
    }

    fn into_game(self) -> Result<Game, GameError> {
        let n = self.n_actions;
        if self.matrix.len() != n {
            return Err(GameError::Invalid(format!(
                "matrix has {} rows, expected {n}",
                self.matrix.len()
            )));
        }
        let mut entries = Vec::with_capacity(n * n);
        for (r, row) in self.matrix.iter().enumerate() {
            if row.len() != n {
                return Err(GameError::Invalid(format!(
                    "matrix row {r} has {} columns, expected {n}",
                    row.len()
                )));
            }
            for cell in row {
                entries.push(PayoffEntry {
                    outcomes: cell
                        .iter()
                        .map(|&[row_pay, col_pay, prob]| Outcome {
                            row: row_pay,
                            col: col_pay,
                            prob,
                        })
                        .collect(),
                });
            }
        }
        Game::new(
            n,
            entries,
            self.optimal_norms.iter().map(|&[r, c]| (r, c)).collect(),
            self.suboptimal_norms.iter().map(|&[r, c]| (r, c)).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp(game: &Game, r: usize, c: usize) -> (f64, f64) {
        game.expected_matrix()[r * game.n_actions() + c]
    }

    #[test]
    fn cg2_matches_reference_table() {
        let g = Game::make_builtin(GameKind::Cg, 2).unwrap();
        assert_eq!(exp(&g, 0, 0), (1.0, 1.0));
        assert_eq!(exp(&g, 0, 1), (-1.0, -1.0));
        assert_eq!(exp(&g, 1, 0), (-1.0, -1.0));
        assert_eq!(exp(&g, 1, 1), (1.0, 1.0));
        assert_eq!(g.optimal_norms(), &[(0, 0), (1, 1)]);
        assert!(g.suboptimal_norms().is_empty());
    }

    #[test]
    fn acg_norms_are_anti_diagonal() {
        let g = Game::make_builtin(GameKind::Acg, 6).unwrap();
        for r in 0..6 {
            assert_eq!(exp(&g, r, 5 - r), (1.0, 1.0));
            assert!(g.optimal_norms().contains(&(r, 5 - r)));
        }
        assert_eq!(exp(&g, 0, 0), (-1.0, -1.0));
        assert_eq!(g.optimal_norms().len(), 6);
    }

    #[test]
    fn cghp6_matches_reference_table() {
        let g = Game::make_builtin(GameKind::Cghp, 6).unwrap();
        #[rustfmt::skip]
        let table: [[f64; 6]; 6] = [
            [ 10.0, 0.0, -30.0, -30.0, 0.0, -30.0],
            [  0.0, 7.0,   0.0,   0.0, 0.0,   0.0],
            [-30.0, 0.0,  10.0, -30.0, 0.0, -30.0],
            [-30.0, 0.0, -30.0,  10.0, 0.0, -30.0],
            [  0.0, 0.0,   0.0,   0.0, 7.0,   0.0],
            [-30.0, 0.0, -30.0, -30.0, 0.0,  10.0],
        ];
        for r in 0..6 {
            for c in 0..6 {
                assert_eq!(exp(&g, r, c), (table[r][c], table[r][c]), "cell ({r}, {c})");
            }
        }
        assert_eq!(g.optimal_norms(), &[(0, 0), (2, 2), (3, 3), (5, 5)]);
        assert_eq!(g.suboptimal_norms(), &[(1, 1), (4, 4)]);
    }

    #[test]
    fn fscghp6_outcomes_match_reference_table() {
        let g = Game::make_builtin(GameKind::Fscghp, 6).unwrap();
        let aa = &g.entry(0, 0).outcomes;
        assert_eq!(aa.len(), 2);
        assert_eq!((aa[0].row, aa[0].col, aa[0].prob), (12.0, 8.0, 0.5));
        assert_eq!((aa[1].row, aa[1].col, aa[1].prob), (8.0, 12.0, 0.5));
        let ac = &g.entry(0, 2).outcomes;
        assert_eq!((ac[0].row, ac[0].col), (-20.0, -40.0));
        assert_eq!((ac[1].row, ac[1].col), (-40.0, -20.0));
        let bb = &g.entry(1, 1).outcomes;
        assert_eq!((bb[0].row, bb[0].col), (14.0, 0.0));
        assert_eq!((bb[1].row, bb[1].col), (0.0, 14.0));
        let ab = &g.entry(0, 1).outcomes;
        assert_eq!((ab[0].row, ab[0].col), (5.0, -5.0));
    }

    #[test]
    fn fscghp6_expected_equals_cghp6() {
        let f = Game::make_builtin(GameKind::Fscghp, 6).unwrap();
        let c = Game::make_builtin(GameKind::Cghp, 6).unwrap();
        let fe = f.expected_matrix();
        let ce = c.expected_matrix();
        for (i, (a, b)) in fe.iter().zip(&ce).enumerate() {
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12, "cell {i}");
        }
        assert_eq!(exp(&f, 0, 0), (10.0, 10.0));
        assert_eq!(f.optimal_norms(), c.optimal_norms());
        assert_eq!(f.suboptimal_norms(), c.suboptimal_norms());
    }

    #[test]
    fn cghp3_matches_late_intervention_table() {
        let g = Game::make_builtin(GameKind::Cghp3, 3).unwrap();
        #[rustfmt::skip]
        let table: [[f64; 3]; 3] = [
            [ 10.0, 0.0, -30.0],
            [  0.0, 7.0,   0.0],
            [-30.0, 0.0,  10.0],
        ];
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(exp(&g, r, c), (table[r][c], table[r][c]));
            }
        }
        assert_eq!(g.optimal_norms(), &[(0, 0), (2, 2)]);
        assert_eq!(g.suboptimal_norms(), &[(1, 1)]);
        assert_eq!(
            Game::make_builtin(GameKind::Cghp, 3).unwrap(),
            g,
            "parametric CGHP(3) coincides with CGHP3"
        );
        assert!(Game::make_builtin(GameKind::Cghp3, 6).is_err());
    }

    /// Counts rng words consumed, to pin the draw-count contract.
    struct CountingRng {
        inner: ChaCha8Rng,
        draws: u64,
    }

    impl rand::RngCore for CountingRng {
        fn next_u32(&mut self) -> u32 {
            self.draws += 1;
            self.inner.next_u32()
        }
        fn next_u64(&mut self) -> u64 {
            self.draws += 1;
            self.inner.next_u64()
        }
        fn fill_bytes(&mut self, dest: &mut [u8]) {
            self.draws += 1;
            self.inner.fill_bytes(dest)
        }
    }

    #[test]
    fn sampling_draw_counts_and_values() {
        let cg = Game::make_builtin(GameKind::Cg, 2).unwrap();
        let cghp = Game::make_builtin(GameKind::Cghp, 6).unwrap();
        let mut rng = CountingRng {
            inner: ChaCha8Rng::seed_from_u64(7),
            draws: 0,
        };
        assert_eq!(cg.sample_payoff(0, 0, &mut rng), (1.0, 1.0));
        assert_eq!(cghp.sample_payoff(1, 4, &mut rng), (0.0, 0.0));
        assert_eq!(rng.draws, 0, "deterministic entries must not draw");

        let fs = Game::make_builtin(GameKind::Fscghp, 6).unwrap();
        fs.sample_payoff(0, 0, &mut rng);
        assert_eq!(rng.draws, 1, "stochastic entries draw exactly once");
    }

    #[test]
    fn fscghp_bb_monte_carlo_mean() {
        // Independent check of the two equiprobable (b,b) outcomes: the
        // empirical mean row payoff over 1e5 draws must sit near (14+0)/2.
        let g = Game::make_builtin(GameKind::Fscghp, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut total = 0.0;
        for _ in 0..n {
            total += g.sample_payoff(1, 1, &mut rng).0;
        }
        let mean = total / n as f64;
        assert!((mean - 7.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn sampling_is_seed_reproducible() {
        let g = Game::make_builtin(GameKind::Fscghp, 6).unwrap();
        let draw_all = || {
            let mut rng = ChaCha8Rng::seed_from_u64(123);
            (0..1000)
                .map(|i| g.sample_payoff(i % 6, (i / 6) % 6, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw_all(), draw_all());
    }

    #[test]
    fn all_builtin_norms_are_pure_nash() {
        let cases = [
            (GameKind::Cg, vec![2, 3, 4, 6, 8]),
            (GameKind::Acg, vec![2, 3, 6]),
            (GameKind::Cghp, vec![2, 3, 4, 6, 8, 10]),
            (GameKind::Fscghp, vec![2, 4, 6, 8]),
            (GameKind::Cghp3, vec![3]),
        ];
        for (kind, sizes) in cases {
            for n in sizes {
                let g = Game::make_builtin(kind, n).unwrap();
                for &norm in g.optimal_norms().iter().chain(g.suboptimal_norms()) {
                    assert!(g.is_pure_nash(norm), "{kind}({n}) norm {norm:?}");
                }
            }
        }
    }

    #[test]
    fn expected_diagonals_are_role_symmetric() {
        for kind in [GameKind::Cghp, GameKind::Fscghp] {
            let g = Game::make_builtin(kind, 6).unwrap();
            for &(r, c) in g.optimal_norms().iter().chain(g.suboptimal_norms()) {
                let (row_pay, col_pay) = exp(&g, r, c);
                assert!((row_pay - col_pay).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let g = Game::make_builtin(GameKind::Fscghp, 6).unwrap();
        let text = g.to_json_string();
        let back = Game::from_json_str(&text).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn rejects_malformed_files() {
        // Incomplete matrix.
        let bad = r#"{"n_actions": 2, "matrix": [[[[1,1,1.0]]]], "optimal_norms": [[0,0]]}"#;
        assert!(Game::from_json_str(bad).is_err());
        // Probabilities that do not sum to one.
        let bad = r#"{"n_actions": 1, "matrix": [[[[1,1,0.4]]]], "optimal_norms": [[0,0]]}"#;
        assert!(Game::from_json_str(bad).is_err());
        // Declared norm that is not a Nash equilibrium.
        let bad = r#"{
            "n_actions": 2,
            "matrix": [
                [[[1,1,1.0]], [[2,2,1.0]]],
                [[[0,0,1.0]], [[0,0,1.0]]]
            ],
            "optimal_norms": [[0,0]]
        }"#;
        let err = Game::from_json_str(bad).unwrap_err();
        assert!(err.to_string().contains("Nash"), "{err}");
    }
}
