//! Hand-specified structural causal model over strategic game variables.
//!
//! Thirteen variables in four layers feed a logistic win-probability head
//! whose six parents are the causal factors used for credit assignment.
//! Structural equations:
//!
//! ```text
//! mana_t1        = mana_t + 1[land_drop] + mana_creatures
//! board_press    = sum own creature power - sum opponent creature power
//! threat_density = own threats / max(1, own permanents)
//! tempo          = clip(spent / max(1, mana_t) - opp_spent / max(1, opp_mana), -1, 1)
//! removal_avail  = has_removal
//! win_prob       = sigmoid(w . standardize(phi) + b)
//! ```
//!
//! The graph edge list (used for descendant enumeration) includes edges
//! whose target equation does not read the source, e.g. mana_t1 ->
//! board_press. Values follow the equations; a descendant whose equation
//! ignores the intervened variable is re-evaluated and comes back unchanged.
//! Variables measured from the board (board_press, threat_density,
//! card_adv, life_buffer, and the resource counts) have no equation over
//! other variables and keep their value on re-evaluation.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::{decode, Category, TARGET_OPP_PLAYER, TARGET_OWN_PLAYER};
use crate::cards::{CardId, Effect, TargetSpec};
use crate::engine::{GameState, Pending, TargetRef};

#[derive(Debug, Error, PartialEq)]
pub enum ScmError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("value {value} out of range for {var}")]
    OutOfRange { var: Var, value: f64 },
    #[error("action {0} is not legal in this state")]
    IllegalAction(usize),
}

/// Variables in listing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Var {
    ManaT,
    LandDrop,
    ManaCreatures,
    ManaT1,
    CardCount,
    HasRemoval,
    BoardPress,
    ThreatDensity,
    CardAdv,
    Tempo,
    LifeBuffer,
    RemovalAvail,
    WinProb,
}

pub const NUM_VARS: usize = 13;
pub const NUM_FACTORS: usize = 6;

/// The six parents of win_prob, in factor order.
pub const FACTORS: [Var; NUM_FACTORS] = [
    Var::CardAdv,
    Var::BoardPress,
    Var::Tempo,
    Var::LifeBuffer,
    Var::ThreatDensity,
    Var::RemovalAvail,
];

pub const FACTOR_NAMES: [&str; NUM_FACTORS] = [
    "card_adv",
    "board_press",
    "tempo",
    "life_buffer",
    "threat_density",
    "removal_avail",
];

impl Var {
    pub const ALL: [Var; NUM_VARS] = [
        Var::ManaT,
        Var::LandDrop,
        Var::ManaCreatures,
        Var::ManaT1,
        Var::CardCount,
        Var::HasRemoval,
        Var::BoardPress,
        Var::ThreatDensity,
        Var::CardAdv,
        Var::Tempo,
        Var::LifeBuffer,
        Var::RemovalAvail,
        Var::WinProb,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::ManaT => "mana_t",
            Var::LandDrop => "land_drop",
            Var::ManaCreatures => "mana_creatures",
            Var::ManaT1 => "mana_t1",
            Var::CardCount => "card_count",
            Var::HasRemoval => "has_removal",
            Var::BoardPress => "board_press",
            Var::ThreatDensity => "threat_density",
            Var::CardAdv => "card_adv",
            Var::Tempo => "tempo",
            Var::LifeBuffer => "life_buffer",
            Var::RemovalAvail => "removal_avail",
            Var::WinProb => "win_prob",
        }
    }

    /// Closed range; win_prob is open (0, 1) and checked separately.
    pub fn range(self) -> (f64, f64) {
        match self {
            Var::ManaT | Var::ManaCreatures | Var::ManaT1 => (0.0, 10.0),
            Var::LandDrop | Var::HasRemoval | Var::RemovalAvail => (0.0, 1.0),
            Var::CardCount => (0.0, 15.0),
            Var::BoardPress | Var::LifeBuffer => (-20.0, 20.0),
            Var::ThreatDensity | Var::WinProb => (0.0, 1.0),
            Var::CardAdv => (-10.0, 10.0),
            Var::Tempo => (-1.0, 1.0),
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, Var::LandDrop | Var::HasRemoval | Var::RemovalAvail)
    }

    pub fn in_range(self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        if self == Var::WinProb {
            return x > 0.0 && x < 1.0;
        }
        let (lo, hi) = self.range();
        if self.is_binary() {
            return x == 0.0 || x == 1.0;
        }
        x >= lo && x <= hi
    }

    pub fn clip(self, x: f64) -> f64 {
        let (lo, hi) = self.range();
        x.clamp(lo, hi)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Var {
    type Err = ScmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Var::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| ScmError::UnknownVariable(s.to_string()))
    }
}

/// Exogenous per-turn spending inputs of the tempo equation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TempoInputs {
    pub mana_spent: f64,
    pub opp_mana_spent: f64,
    pub opp_mana: f64,
}

impl TempoInputs {
    pub fn tempo(&self, mana_t: f64) -> f64 {
        let own = self.mana_spent / mana_t.max(1.0);
        let opp = self.opp_mana_spent / self.opp_mana.max(1.0);
        Var::Tempo.clip(own - opp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausalVars {
    /// Values indexed by [`Var::index`].
    pub values: [f64; NUM_VARS],
    pub tempo_inputs: TempoInputs,
}

impl CausalVars {
    pub fn get(&self, v: Var) -> f64 {
        self.values[v.index()]
    }

    pub fn set(&mut self, v: Var, x: f64) {
        self.values[v.index()] = x;
    }

    /// The six-factor vector in factor order.
    pub fn factors(&self) -> [f64; NUM_FACTORS] {
        let mut out = [0.0; NUM_FACTORS];
        for (k, v) in FACTORS.iter().enumerate() {
            out[k] = self.get(*v);
        }
        out
    }

    pub fn all_in_range(&self) -> bool {
        Var::ALL.iter().all(|v| v.in_range(self.get(*v)))
    }
}

/// One directed edge of the causal graph.
pub type Edge = (Var, Var);

/// Edge list of the causal graph.
pub const EDGES: [Edge; 17] = [
    (Var::ManaT, Var::ManaT1),
    (Var::ManaCreatures, Var::ManaT1),
    (Var::LandDrop, Var::ManaT1),
    (Var::ManaT, Var::Tempo),
    (Var::ManaT1, Var::BoardPress),
    (Var::ManaT1, Var::ThreatDensity),
    (Var::BoardPress, Var::CardAdv),
    (Var::BoardPress, Var::Tempo),
    (Var::BoardPress, Var::WinProb),
    (Var::ThreatDensity, Var::WinProb),
    (Var::ThreatDensity, Var::BoardPress),
    (Var::CardCount, Var::CardAdv),
    (Var::HasRemoval, Var::RemovalAvail),
    (Var::RemovalAvail, Var::WinProb),
    (Var::CardAdv, Var::WinProb),
    (Var::Tempo, Var::WinProb),
    (Var::LifeBuffer, Var::WinProb),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalGraph {
    pub edges: Vec<Edge>,
    topo: Vec<Var>,
}

impl Default for CausalGraph {
    fn default() -> Self {
        CausalGraph::new(EDGES.to_vec()).expect("bundled graph is acyclic")
    }
}

impl CausalGraph {
    /// Build a graph; returns `None` if the edges contain a cycle.
    pub fn new(edges: Vec<Edge>) -> Option<Self> {
        let topo = topo_order(&edges)?;
        Some(CausalGraph { edges, topo })
    }

    pub fn parents(&self, v: Var) -> Vec<Var> {
        let mut p: Vec<Var> = self.edges.iter().filter(|e| e.1 == v).map(|e| e.0).collect();
        p.sort();
        p
    }

    pub fn children(&self, v: Var) -> Vec<Var> {
        let mut c: Vec<Var> = self.edges.iter().filter(|e| e.0 == v).map(|e| e.1).collect();
        c.sort();
        c
    }

    /// Topological order with ties broken by listing order.
    pub fn topological_order(&self) -> &[Var] {
        &self.topo
    }

    /// Transitive closure of children (excluding `v` itself).
    pub fn descendants(&self, v: Var) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        let mut queue = VecDeque::from([v]);
        while let Some(x) = queue.pop_front() {
            for c in self.children(x) {
                if out.insert(c) {
                    queue.push_back(c);
                }
            }
        }
        out
    }

    pub fn descendants_by_name(&self, name: &str) -> Result<BTreeSet<Var>, ScmError> {
        Ok(self.descendants(Var::from_str(name)?))
    }

    /// Graphviz DOT rendering.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph scm {\n  rankdir=TB;\n");
        for v in Var::ALL {
            s.push_str(&format!("  {};\n", v.name()));
        }
        for (a, b) in &self.edges {
            s.push_str(&format!("  {} -> {};\n", a.name(), b.name()));
        }
        s.push_str("}\n");
        s
    }
}

fn topo_order(edges: &[Edge]) -> Option<Vec<Var>> {
    let mut indeg = [0usize; NUM_VARS];
    for (_, b) in edges {
        indeg[b.index()] += 1;
    }
    let mut done = [false; NUM_VARS];
    let mut order = Vec::with_capacity(NUM_VARS);
    while order.len() < NUM_VARS {
        // Smallest listing index with no remaining parents.
        let next = Var::ALL.iter().copied().find(|v| !done[v.index()] && indeg[v.index()] == 0)?;
        done[next.index()] = true;
        order.push(next);
        for (a, b) in edges {
            if *a == next {
                indeg[b.index()] -= 1;
            }
        }
    }
    Some(order)
}

/// Clamp floor for standardization; keeps constant columns finite.
pub const STD_FLOOR: f64 = 1e-6;

/// Logistic win-probability head over the six factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinWeights {
    pub w: [f64; NUM_FACTORS],
    pub intercept: f64,
    pub means: [f64; NUM_FACTORS],
    pub stds: [f64; NUM_FACTORS],
}

impl Default for WinWeights {
    /// Prior before any fit: all weights +0.1, no intercept, identity
    /// standardization.
    fn default() -> Self {
        WinWeights { w: [0.1; NUM_FACTORS], intercept: 0.0, means: [0.0; NUM_FACTORS], stds: [1.0; NUM_FACTORS] }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Keep a probability strictly inside (0, 1).
fn open_unit(p: f64) -> f64 {
    p.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

impl WinWeights {
    pub fn zero() -> Self {
        WinWeights { w: [0.0; NUM_FACTORS], ..Default::default() }
    }

    pub fn standardize(&self, phi: &[f64; NUM_FACTORS]) -> [f64; NUM_FACTORS] {
        let mut z = [0.0; NUM_FACTORS];
        for k in 0..NUM_FACTORS {
            z[k] = (phi[k] - self.means[k]) / self.stds[k].max(STD_FLOOR);
        }
        z
    }

    pub fn logit(&self, phi: &[f64; NUM_FACTORS]) -> f64 {
        let z = self.standardize(phi);
        self.intercept + (0..NUM_FACTORS).map(|k| self.w[k] * z[k]).sum::<f64>()
    }

    pub fn prob(&self, phi: &[f64; NUM_FACTORS]) -> f64 {
        open_unit(sigmoid(self.logit(phi)))
    }

    /// Weights in raw-factor units, `w_k / std_k`.
    pub fn raw_slopes(&self) -> [f64; NUM_FACTORS] {
        let mut out = [0.0; NUM_FACTORS];
        for k in 0..NUM_FACTORS {
            out[k] = self.w[k] / self.stds[k].max(STD_FLOOR);
        }
        out
    }
}

/// win_prob of the current factor values.
pub fn win_prob(vars: &CausalVars, weights: &WinWeights) -> f64 {
    weights.prob(&vars.factors())
}

/// Ring buffer of (terminal factors, win label).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeBuffer {
    capacity: usize,
    items: VecDeque<([f64; NUM_FACTORS], bool)>,
}

pub const OUTCOME_BUFFER_CAPACITY: usize = 2000;

impl Default for OutcomeBuffer {
    fn default() -> Self {
        OutcomeBuffer::new(OUTCOME_BUFFER_CAPACITY)
    }
}

impl OutcomeBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        OutcomeBuffer { capacity, items: VecDeque::with_capacity(capacity) }
    }

    pub fn push(&mut self, phi: [f64; NUM_FACTORS], won: bool) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back((phi, won));
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &([f64; NUM_FACTORS], bool)> {
        self.items.iter()
    }
}

pub const FIT_STEPS: usize = 200;
pub const FIT_LR: f64 = 0.01;
pub const REFIT_INTERVAL: usize = 200;

/// Z-score the buffer, then run full-batch gradient descent on the mean
/// logistic loss starting from the current weights.
pub fn fit_winprob(buffer: &OutcomeBuffer, weights: &WinWeights) -> WinWeights {
    fit_winprob_with(buffer, weights, FIT_STEPS, FIT_LR)
}

pub fn fit_winprob_with(buffer: &OutcomeBuffer, weights: &WinWeights, steps: usize, lr: f64) -> WinWeights {
    if buffer.is_empty() {
        return *weights;
    }
    let n = buffer.len() as f64;
    let mut out = *weights;
    for k in 0..NUM_FACTORS {
        let mean = buffer.iter().map(|(x, _)| x[k]).sum::<f64>() / n;
        let var = buffer.iter().map(|(x, _)| (x[k] - mean).powi(2)).sum::<f64>() / n;
        out.means[k] = mean;
        out.stds[k] = var.sqrt().max(STD_FLOOR);
    }
    let data: Vec<([f64; NUM_FACTORS], f64)> = buffer
        .iter()
        .map(|(x, y)| (out.standardize(x), if *y { 1.0 } else { 0.0 }))
        .collect();
    for _ in 0..steps {
        let mut gw = [0.0; NUM_FACTORS];
        let mut gb = 0.0;
        for (z, y) in &data {
            let logit = out.intercept + (0..NUM_FACTORS).map(|k| out.w[k] * z[k]).sum::<f64>();
            let err = sigmoid(logit) - y;
            for k in 0..NUM_FACTORS {
                gw[k] += err * z[k];
            }
            gb += err;
        }
        for k in 0..NUM_FACTORS {
            out.w[k] -= lr * gw[k] / n;
        }
        out.intercept -= lr * gb / n;
    }
    out
}

/// Online learner: buffers terminal outcomes and refits on a fixed
/// interval of terminal games.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinProbLearner {
    pub weights: WinWeights,
    pub buffer: OutcomeBuffer,
    pub refit_interval: usize,
    games_since_fit: usize,
    pub fits: usize,
}

impl Default for WinProbLearner {
    fn default() -> Self {
        WinProbLearner {
            weights: WinWeights::default(),
            buffer: OutcomeBuffer::default(),
            refit_interval: REFIT_INTERVAL,
            games_since_fit: 0,
            fits: 0,
        }
    }
}

impl WinProbLearner {
    /// Record a finished game. Returns true when this triggered a refit.
    pub fn record(&mut self, phi: [f64; NUM_FACTORS], won: bool) -> bool {
        self.buffer.push(phi, won);
        self.games_since_fit += 1;
        if self.games_since_fit >= self.refit_interval {
            self.weights = fit_winprob(&self.buffer, &self.weights);
            self.games_since_fit = 0;
            self.fits += 1;
            true
        } else {
            false
        }
    }
}

/// The model: graph plus logistic head.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scm {
    pub graph: CausalGraph,
    pub weights: WinWeights,
}

impl Scm {
    pub fn new(weights: WinWeights) -> Self {
        Scm { graph: CausalGraph::default(), weights }
    }

    /// Equation for `v` given the other current values; measured variables
    /// return their current value.
    fn equation(&self, v: Var, vars: &CausalVars) -> f64 {
        match v {
            Var::ManaT1 => Var::ManaT1.clip(
                vars.get(Var::ManaT) + vars.get(Var::LandDrop).clamp(0.0, 1.0).round() + vars.get(Var::ManaCreatures),
            ),
            Var::RemovalAvail => vars.get(Var::HasRemoval),
            Var::Tempo => vars.tempo_inputs.tempo(vars.get(Var::ManaT)),
            Var::WinProb => win_prob(vars, &self.weights),
            _ => vars.get(v),
        }
    }

    /// Recompute mana_t1, removal_avail and win_prob; measured variables are
    /// left as they are.
    pub fn structural_eval(&self, vars: &CausalVars) -> CausalVars {
        let mut out = *vars;
        for &v in self.graph.topological_order() {
            if matches!(v, Var::ManaT1 | Var::RemovalAvail | Var::WinProb) {
                let x = self.equation(v, &out);
                out.set(v, x);
            }
        }
        out
    }

    /// Fix the assigned variables, then re-evaluate their descendants in
    /// topological order. Everything else is copied unchanged.
    pub fn do_intervene(&self, vars: &CausalVars, assignments: &[(Var, f64)]) -> Result<CausalVars, ScmError> {
        for &(v, x) in assignments {
            if !v.in_range(x) {
                return Err(ScmError::OutOfRange { var: v, value: x });
            }
        }
        let mut out = *vars;
        let mut fixed = BTreeSet::new();
        let mut affected = BTreeSet::new();
        for &(v, x) in assignments {
            out.set(v, x);
            fixed.insert(v);
            affected.extend(self.graph.descendants(v));
        }
        for &v in self.graph.topological_order() {
            if affected.contains(&v) && !fixed.contains(&v) {
                let x = self.equation(v, &out);
                out.set(v, x);
            }
        }
        Ok(out)
    }

    /// Measure all variables from `perspective`'s point of view.
    pub fn extract(&self, state: &GameState, perspective: usize) -> CausalVars {
        extract_with(state, perspective, &self.weights)
    }

    /// Per-factor SCM-predicted change of taking `action` in `state`.
    pub fn intervention_effect(&self, state: &GameState, action: usize) -> Result<[f64; NUM_FACTORS], ScmError> {
        let legal = state.legal_actions().map_err(|_| ScmError::IllegalAction(action))?;
        if !legal.contains(&action) {
            return Err(ScmError::IllegalAction(action));
        }
        let actor = state.decision_player;
        let before = self.extract(state, actor);
        let assignments = intervention_for(state, action, &before);
        let after = self.do_intervene(&before, &assignments)?;
        let (b, a) = (before.factors(), after.factors());
        let mut eps = [0.0; NUM_FACTORS];
        for k in 0..NUM_FACTORS {
            eps[k] = a[k] - b[k];
        }
        Ok(eps)
    }
}

/// Free-function form of [`Scm::intervention_effect`].
pub fn intervention_effect(state: &GameState, action: usize, weights: &WinWeights) -> Result<[f64; NUM_FACTORS], ScmError> {
    Scm::new(*weights).intervention_effect(state, action)
}

/// Board tallies feeding the measured variables.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Board {
    own_power: f64,
    opp_power: f64,
    own_perms: f64,
    opp_perms: f64,
    own_threats: f64,
}

impl Board {
    fn measure(state: &GameState, me: usize) -> Board {
        let cat = state.catalog();
        let own = &state.players[me].battlefield;
        let opp = &state.players[1 - me].battlefield;
        let power = |ps: &[crate::engine::Permanent]| -> f64 {
            ps.iter().filter(|p| p.is_creature(cat)).map(|p| p.power(cat) as f64).sum()
        };
        Board {
            own_power: power(own),
            opp_power: power(opp),
            own_perms: own.len() as f64,
            opp_perms: opp.len() as f64,
            own_threats: own.iter().filter(|p| p.is_threat(cat)).count() as f64,
        }
    }

    fn board_press(&self) -> f64 {
        Var::BoardPress.clip(self.own_power - self.opp_power)
    }

    fn threat_density(&self) -> f64 {
        self.own_threats / self.own_perms.max(1.0)
    }

    fn card_adv(&self) -> f64 {
        Var::CardAdv.clip(self.own_perms - self.opp_perms)
    }
}

fn extract_with(state: &GameState, me: usize, weights: &WinWeights) -> CausalVars {
    let cat = state.catalog();
    let own = &state.players[me];
    let opp = &state.players[1 - me];
    let mana_of = |ps: &crate::engine::PlayerState| ps.battlefield.iter().filter(|p| p.is_mana_producer(cat)).count() as f64;
    let mana_t = Var::ManaT.clip(mana_of(own));
    let mana_creatures = Var::ManaCreatures.clip(
        own.battlefield
            .iter()
            .filter(|p| p.is_mana_producer(cat) && p.is_creature(cat))
            .count() as f64,
    );
    let land_drop = if own.hand.iter().any(|&c| cat.get(c).is_land()) { 1.0 } else { 0.0 };
    let has_removal = if own.hand.iter().any(|&c| cat.get(c).flags.is_removal) { 1.0 } else { 0.0 };
    let board = Board::measure(state, me);
    let tempo_inputs = TempoInputs {
        mana_spent: state.mana_spent[me] as f64,
        opp_mana_spent: state.mana_spent[1 - me] as f64,
        opp_mana: Var::ManaT.clip(mana_of(opp)),
    };
    let mut v = CausalVars { values: [0.0; NUM_VARS], tempo_inputs };
    v.set(Var::ManaT, mana_t);
    v.set(Var::LandDrop, land_drop);
    v.set(Var::ManaCreatures, mana_creatures);
    v.set(Var::CardCount, Var::CardCount.clip(own.hand.len() as f64));
    v.set(Var::HasRemoval, has_removal);
    v.set(Var::BoardPress, board.board_press());
    v.set(Var::ThreatDensity, board.threat_density());
    v.set(Var::CardAdv, board.card_adv());
    v.set(Var::Tempo, tempo_inputs.tempo(mana_t));
    v.set(Var::LifeBuffer, Var::LifeBuffer.clip((own.life - opp.life) as f64));
    let scm = Scm::new(*weights);
    scm.structural_eval(&v)
}

/// Measure all variables for `perspective` using `weights` for win_prob.
pub fn extract(state: &GameState, perspective: usize, weights: &WinWeights) -> CausalVars {
    extract_with(state, perspective, weights)
}

/// Map an action to the do-assignments it stands for.
///
/// * PLAY_LAND: land_drop = 1 and one more mana source.
/// * Spells are credited at the decision that fixes what they do: the
///   TARGET choice for targeted spells, the CAST choice otherwise. The card
///   leaving the hand updates card_count and has_removal; the mana value
///   spent updates tempo through its equation; removal, damage, pumps,
///   life gain, draws and permanents entering update the board tallies.
/// * ACTIVATE: the created tokens enter.
/// * Counterspells, PASS, payment and other plumbing: empty.
pub fn intervention_for(state: &GameState, action: usize, before: &CausalVars) -> Vec<(Var, f64)> {
    let Ok(dec) = decode(action) else {
        return Vec::new();
    };
    let me = state.decision_player;
    let cat = state.catalog();
    match (dec.category, &state.pending) {
        (Category::PlayLand, None) => {
            let mana = Var::ManaT.clip(before.get(Var::ManaT) + 1.0);
            let mut board = Board::measure(state, me);
            board.own_perms += 1.0;
            let mut out = vec![(Var::LandDrop, 1.0), (Var::ManaT, mana)];
            push_changed(&mut out, before, Var::ThreatDensity, board.threat_density());
            push_changed(&mut out, before, Var::CardAdv, board.card_adv());
            let rest: Vec<_> = state.players[me]
                .hand
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != dec.slot)
                .map(|(_, &c)| c)
                .collect();
            push_changed(&mut out, before, Var::CardCount, Var::CardCount.clip(rest.len() as f64));
            out
        }
        (Category::CastSorcery | Category::CastInstant, None) => {
            let card = state.players[me].hand[dec.slot];
            if cat.get(card).chosen_target().is_some() {
                Vec::new()
            } else {
                spell_assignments(state, me, card, dec.slot, None, before)
            }
        }
        (Category::Target, Some(Pending::Target { spell })) => {
            let target = match dec.slot {
                TARGET_OWN_PLAYER => Some(TargetRef::Player(me)),
                TARGET_OPP_PLAYER => Some(TargetRef::Player(1 - me)),
                _ => state.target_from_slot(me, dec.slot),
            };
            spell_assignments(state, me, spell.card, spell.hand_pos, target, before)
        }
        (Category::Activate, None) => {
            let Some(perm) = state.players[me].permanent_at_slot(dec.slot) else {
                return Vec::new();
            };
            let Some((p, _t, n)) = cat.get(perm.card).activated_token() else {
                return Vec::new();
            };
            let mut board = Board::measure(state, me);
            board.own_power += (p * n as i32) as f64;
            board.own_perms += n as f64;
            board.own_threats += n as f64;
            let mut out = Vec::new();
            push_changed(&mut out, before, Var::BoardPress, board.board_press());
            push_changed(&mut out, before, Var::ThreatDensity, board.threat_density());
            push_changed(&mut out, before, Var::CardAdv, board.card_adv());
            out
        }
        _ => Vec::new(),
    }
}

fn push_changed(out: &mut Vec<(Var, f64)>, before: &CausalVars, v: Var, x: f64) {
    if x != before.get(v) {
        out.push((v, x));
    }
}

fn spell_assignments(
    state: &GameState,
    me: usize,
    card: CardId,
    hand_pos: usize,
    target: Option<TargetRef>,
    before: &CausalVars,
) -> Vec<(Var, f64)> {
    let cat = state.catalog();
    let def = cat.get(card);
    let mut out = Vec::new();
    if def.is_counterspell() {
        return out;
    }
    let mut board = Board::measure(state, me);
    let mut life_delta = 0.0;
    let mut drawn = 0.0;
    let mut mana_delta = 0.0;
    let mut mana_creature_delta = 0.0;

    if def.is_permanent() {
        board.own_perms += 1.0;
        if def.flags.is_threat {
            board.own_threats += 1.0;
        }
        if def.is_creature() {
            board.own_power += def.power.unwrap_or(0) as f64;
        }
        if def.flags.mana_producer {
            mana_delta += 1.0;
            if def.is_creature() {
                mana_creature_delta += 1.0;
            }
        }
    }

    let remove = |board: &mut Board, controller: usize, ordinal: u32| {
        let Some(perm) = state.players[controller].permanent(ordinal) else {
            return;
        };
        let power = if perm.is_creature(cat) { perm.power(cat) as f64 } else { 0.0 };
        if controller == me {
            board.own_power -= power;
            board.own_perms -= 1.0;
            if perm.is_threat(cat) {
                board.own_threats -= 1.0;
            }
        } else {
            board.opp_power -= power;
            board.opp_perms -= 1.0;
        }
    };

    for effect in &def.effects {
        match *effect {
            Effect::DealDamage { amount, .. } => match target {
                Some(TargetRef::Player(p)) => life_delta += if p == me { -amount as f64 } else { amount as f64 },
                Some(TargetRef::Permanent { controller, ordinal }) => {
                    if let Some(perm) = state.players[controller].permanent(ordinal) {
                        if perm.damage_marked + amount >= perm.toughness(cat) {
                            remove(&mut board, controller, ordinal);
                        }
                    }
                }
                None => {}
            },
            Effect::Destroy { target: TargetSpec::AllCreatures } => {
                for side in 0..2 {
                    for perm in &state.players[side].battlefield {
                        if perm.is_creature(cat) {
                            remove(&mut board, side, perm.ordinal);
                        }
                    }
                }
                // A creature spell cast alongside is not part of this pool.
            }
            Effect::Destroy { .. } => {
                if let Some(TargetRef::Permanent { controller, ordinal }) = target {
                    remove(&mut board, controller, ordinal);
                }
            }
            Effect::Pump { power, .. } => {
                if let Some(TargetRef::Permanent { controller, .. }) = target {
                    if controller == me {
                        board.own_power += power as f64;
                    } else {
                        board.opp_power += power as f64;
                    }
                }
            }
            Effect::Draw { count } => drawn += count as f64,
            Effect::GainLife { amount } => life_delta += amount as f64,
            Effect::CreateToken { power, count, activated: false, .. } => {
                board.own_power += (power * count as i32) as f64;
                board.own_perms += count as f64;
                board.own_threats += count as f64;
            }
            Effect::AddMana { ramp: true } => {
                mana_delta += 1.0;
                board.own_perms += 1.0;
            }
            _ => {}
        }
    }

    let hand = &state.players[me].hand;
    let rest_removal = hand
        .iter()
        .enumerate()
        .any(|(i, &c)| i != hand_pos && cat.get(c).flags.is_removal);
    let card_count = Var::CardCount.clip(hand.len() as f64 - 1.0 + drawn);
    let mana_t = Var::ManaT.clip(before.get(Var::ManaT) + mana_delta);
    let mut tempo_in = before.tempo_inputs;
    tempo_in.mana_spent += def.cost.total() as f64;

    push_changed(&mut out, before, Var::ManaT, mana_t);
    push_changed(
        &mut out,
        before,
        Var::ManaCreatures,
        Var::ManaCreatures.clip(before.get(Var::ManaCreatures) + mana_creature_delta),
    );
    push_changed(&mut out, before, Var::CardCount, card_count);
    push_changed(&mut out, before, Var::HasRemoval, if rest_removal { 1.0 } else { 0.0 });
    push_changed(&mut out, before, Var::BoardPress, board.board_press());
    push_changed(&mut out, before, Var::ThreatDensity, board.threat_density().clamp(0.0, 1.0));
    push_changed(&mut out, before, Var::CardAdv, board.card_adv());
    push_changed(&mut out, before, Var::Tempo, tempo_in.tempo(mana_t));
    push_changed(
        &mut out,
        before,
        Var::LifeBuffer,
        Var::LifeBuffer.clip(before.get(Var::LifeBuffer) + life_delta),
    );
    out
}

/// One row of the exported action-to-intervention table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct InterventionRow {
    pub action_class: String,
    pub credited_at: String,
    pub assignments: String,
}

/// Human-readable action-to-intervention table.
pub fn intervention_table() -> Vec<InterventionRow> {
    let row = |a: &str, c: &str, s: &str| InterventionRow {
        action_class: a.to_string(),
        credited_at: c.to_string(),
        assignments: s.to_string(),
    };
    vec![
        row("play_land", "PLAY_LAND", "land_drop=1, mana_t+1, card_adv/threat_density from own permanents+1, card_count-1"),
        row("removal (destroy)", "TARGET", "board_press, card_adv, threat_density with the target removed"),
        row("direct damage to creature", "TARGET", "as removal when damage is lethal, else no board change"),
        row("direct damage to player", "TARGET", "life_buffer +/- amount"),
        row("board wipe", "CAST_SORCERY", "board_press, card_adv, threat_density with all creatures removed"),
        row("pump", "TARGET", "board_press +/- power bonus"),
        row("card draw", "CAST_*", "card_count + n (card_adv unchanged by its equation)"),
        row("life gain", "CAST_*", "life_buffer + amount"),
        row("permanent entering", "CAST_* or TARGET", "board_press + power, card_adv + 1, threat_density recomputed, mana_t/mana_creatures for mana producers"),
        row("token creation", "CAST_* or ACTIVATE", "board_press + token power, card_adv + tokens, threat_density recomputed"),
        row("any spell", "CAST_* or TARGET", "card_count - 1, has_removal over the rest of the hand, tempo from mana spent + mana value"),
        row("counterspell", "-", "empty"),
        row("pass, confirm, cancel, payment, combat declarations, mulligan", "-", "empty"),
    ]
}

/// Factor vector of `state` for `perspective` (win_prob excluded).
pub fn factors_of(state: &GameState, perspective: usize) -> [f64; NUM_FACTORS] {
    extract_with(state, perspective, &WinWeights::default()).factors()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_vars() -> CausalVars {
        let mut v = CausalVars { values: [0.0; NUM_VARS], tempo_inputs: TempoInputs::default() };
        v.set(Var::WinProb, 0.5);
        v
    }

    #[test]
    fn mana_equation() {
        let scm = Scm::default();
        let mut v = zero_vars();
        v.set(Var::ManaT, 3.0);
        v.set(Var::LandDrop, 1.0);
        v.set(Var::ManaCreatures, 2.0);
        assert_eq!(scm.structural_eval(&v).get(Var::ManaT1), 6.0);
    }

    #[test]
    fn removal_pass_through() {
        let scm = Scm::default();
        let mut v = zero_vars();
        v.set(Var::HasRemoval, 1.0);
        assert_eq!(scm.structural_eval(&v).get(Var::RemovalAvail), 1.0);
    }

    #[test]
    fn zero_factors_give_half() {
        let scm = Scm::new(WinWeights::zero());
        assert_eq!(scm.structural_eval(&zero_vars()).get(Var::WinProb), 0.5);
        let scm = Scm::default();
        assert_eq!(scm.structural_eval(&zero_vars()).get(Var::WinProb), 0.5);
    }

    #[test]
    fn topo_order_puts_threat_density_before_board_press() {
        let g = CausalGraph::default();
        let order = g.topological_order();
        let pos = |v| order.iter().position(|&x| x == v).unwrap();
        assert!(pos(Var::ThreatDensity) < pos(Var::BoardPress));
        assert_eq!(*order.last().unwrap(), Var::WinProb);
        assert_eq!(g.parents(Var::WinProb).len(), 6);
    }

    #[test]
    fn graph_rejects_cycles() {
        assert!(CausalGraph::new(vec![(Var::ManaT, Var::Tempo), (Var::Tempo, Var::ManaT)]).is_none());
    }

    #[test]
    fn unknown_variable() {
        assert!(CausalGraph::default().descendants_by_name("luck").is_err());
    }
}
