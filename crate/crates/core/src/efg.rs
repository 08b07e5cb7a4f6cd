//! Extensive-form games (possibly with imperfect recall) converted to
//! polynomial games over products of simplices via behavioral strategies.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{PolynomialGame, SemialgebraicSet};
use crate::poly::Polynomial;

const CHANCE_TOL: f64 = 1e-12;
const STRATEGY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "OwnerRepr", into = "OwnerRepr")]
pub enum Owner {
    /// Zero-based player index.
    Player(usize),
    Chance,
    Terminal,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OwnerRepr {
    Player(usize),
    Label(String),
}

impl TryFrom<OwnerRepr> for Owner {
    type Error = String;

    fn try_from(r: OwnerRepr) -> std::result::Result<Self, String> {
        match r {
            OwnerRepr::Player(p) => Ok(Owner::Player(p)),
            OwnerRepr::Label(s) => match s.as_str() {
                "chance" => Ok(Owner::Chance),
                "terminal" => Ok(Owner::Terminal),
                other => Err(format!(
                    "owner must be a player index, \"chance\" or \"terminal\", got \"{other}\""
                )),
            },
        }
    }
}

impl From<Owner> for OwnerRepr {
    fn from(o: Owner) -> Self {
        match o {
            Owner::Player(p) => OwnerRepr::Player(p),
            Owner::Chance => OwnerRepr::Label("chance".into()),
            Owner::Terminal => OwnerRepr::Label("terminal".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InfosetId {
    Index(u64),
    Name(String),
}

impl fmt::Display for InfosetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfosetId::Index(i) => write!(f, "{i}"),
            InfosetId::Name(s) => f.write_str(s),
        }
    }
}

impl From<&str> for InfosetId {
    fn from(s: &str) -> Self {
        InfosetId::Name(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfgNode {
    pub owner: Owner,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infoset: Option<InfosetId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chance_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<EfgNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<Vec<f64>>,
}

impl EfgNode {
    pub fn terminal(payoffs: Vec<f64>) -> Self {
        EfgNode {
            owner: Owner::Terminal,
            infoset: None,
            actions: Vec::new(),
            chance_probs: None,
            children: Vec::new(),
            payoffs: Some(payoffs),
        }
    }

    /// Decision node; `children` pairs action labels with subtrees.
    pub fn decision(
        player: usize,
        infoset: impl Into<InfosetId>,
        children: Vec<(&str, EfgNode)>,
    ) -> Self {
        let (actions, children) = children
            .into_iter()
            .map(|(a, c)| (a.to_string(), c))
            .unzip();
        EfgNode {
            owner: Owner::Player(player),
            infoset: Some(infoset.into()),
            actions,
            chance_probs: None,
            children,
            payoffs: None,
        }
    }

    pub fn chance(children: Vec<(&str, f64, EfgNode)>) -> Self {
        let mut actions = Vec::new();
        let mut probs = Vec::new();
        let mut nodes = Vec::new();
        for (a, p, c) in children {
            actions.push(a.to_string());
            probs.push(p);
            nodes.push(c);
        }
        EfgNode {
            owner: Owner::Chance,
            infoset: None,
            actions,
            chance_probs: Some(probs),
            children: nodes,
            payoffs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfgTree {
    pub players: usize,
    pub root: EfgNode,
}

/// Probabilities over each information set's actions, in action order.
pub type BehavioralStrategy = BTreeMap<InfosetId, Vec<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfosetVars {
    pub infoset: InfosetId,
    pub player: usize,
    pub actions: Vec<String>,
    /// Variables for all actions but the last, whose probability is one
    /// minus their sum.
    pub variables: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfosetVariableMap {
    pub infosets: Vec<InfosetVars>,
    pub block_sizes: Vec<usize>,
}

impl InfosetVariableMap {
    pub fn n_vars(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Game variables for a full behavioral strategy.
    pub fn point(&self, strategy: &BehavioralStrategy) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.n_vars()];
        for info in &self.infosets {
            let probs = checked_probs(strategy, &info.infoset, info.actions.len())?;
            for (&v, &p) in info.variables.iter().zip(probs) {
                x[v] = p;
            }
        }
        Ok(x)
    }

    /// Uniformly distributed point of every information set's simplex.
    pub fn random_strategy<R: Rng + ?Sized>(&self, rng: &mut R) -> BehavioralStrategy {
        self.infosets
            .iter()
            .map(|info| {
                let e: Vec<f64> = (0..info.actions.len())
                    .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                    .collect();
                let total: f64 = e.iter().sum();
                (info.infoset.clone(), e.iter().map(|v| v / total).collect())
            })
            .collect()
    }
}

fn checked_probs<'a>(
    strategy: &'a BehavioralStrategy,
    infoset: &InfosetId,
    n_actions: usize,
) -> Result<&'a [f64]> {
    let probs = strategy
        .get(infoset)
        .ok_or_else(|| Error::InvalidStrategy(format!("no probabilities for infoset {infoset}")))?;
    if probs.len() != n_actions {
        return Err(Error::InvalidStrategy(format!(
            "infoset {infoset} has {n_actions} actions, got {} probabilities",
            probs.len()
        )));
    }
    if probs
        .iter()
        .any(|p| !(-STRATEGY_TOL..=1.0 + STRATEGY_TOL).contains(p))
    {
        return Err(Error::InvalidStrategy(format!(
            "infoset {infoset}: probabilities outside [0, 1]"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > STRATEGY_TOL {
        return Err(Error::InvalidStrategy(format!(
            "infoset {infoset}: probabilities sum to {sum}"
        )));
    }
    Ok(probs)
}

struct InfosetInfo<'a> {
    owner: usize,
    actions: &'a [String],
}

impl EfgTree {
    pub fn from_json(text: &str) -> Result<Self> {
        let tree: EfgTree = serde_json::from_str(text)?;
        tree.validate()?;
        Ok(tree)
    }

    /// Checks node shapes, chance distributions and infoset consistency.
    pub fn validate(&self) -> Result<()> {
        if self.players == 0 {
            return Err(Error::MalformedTree("no players".into()));
        }
        self.infosets().map(|_| ())
    }

    /// Infosets in order of first appearance (pre-order, children in order).
    fn infosets(&self) -> Result<Vec<(InfosetId, InfosetInfo<'_>)>> {
        let mut order: Vec<(InfosetId, InfosetInfo<'_>)> = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            self.check_node(node)?;
            if let (Owner::Player(p), Some(id)) = (node.owner, &node.infoset) {
                match order.iter().find(|(k, _)| k == id) {
                    Some((_, info)) => {
                        if info.owner != p || info.actions != node.actions.as_slice() {
                            return Err(Error::MalformedTree(format!(
                                "nodes of infoset {id} disagree on owner or actions"
                            )));
                        }
                    }
                    None => order.push((
                        id.clone(),
                        InfosetInfo {
                            owner: p,
                            actions: &node.actions,
                        },
                    )),
                }
            }
            stack.extend(node.children.iter().rev());
        }
        Ok(order)
    }

    fn check_node(&self, node: &EfgNode) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedTree(msg));
        match node.owner {
            Owner::Terminal => {
                if !node.children.is_empty() || !node.actions.is_empty() {
                    return bad("terminal node with actions or children".into());
                }
                if node.infoset.is_some() || node.chance_probs.is_some() {
                    return bad("terminal node with infoset or chance probabilities".into());
                }
                match &node.payoffs {
                    Some(p) if p.len() == self.players => {
                        if p.iter().any(|v| !v.is_finite()) {
                            return bad("non-finite payoff".into());
                        }
                    }
                    Some(p) => {
                        return bad(format!(
                            "terminal node has {} payoffs for {} players",
                            p.len(),
                            self.players
                        ))
                    }
                    None => return bad("terminal node without payoffs".into()),
                }
            }
            Owner::Chance => {
                if node.payoffs.is_some() || node.infoset.is_some() {
                    return bad("chance node with payoffs or infoset".into());
                }
                let probs = match &node.chance_probs {
                    Some(p) => p,
                    None => return bad("chance node without probabilities".into()),
                };
                if node.children.is_empty() || probs.len() != node.children.len() {
                    return bad(format!(
                        "chance node has {} probabilities for {} children",
                        probs.len(),
                        node.children.len()
                    ));
                }
                if !node.actions.is_empty() && node.actions.len() != node.children.len() {
                    return bad("chance node action labels do not match its children".into());
                }
                if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return bad("negative or non-finite chance probability".into());
                }
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > CHANCE_TOL {
                    return bad(format!("chance probabilities sum to {sum}"));
                }
            }
            Owner::Player(p) => {
                if p >= self.players {
                    return bad(format!(
                        "owner {p} out of range for {} players",
                        self.players
                    ));
                }
                if node.payoffs.is_some() || node.chance_probs.is_some() {
                    return bad("decision node with payoffs or chance probabilities".into());
                }
                if node.infoset.is_none() {
                    return bad("decision node without infoset".into());
                }
                if node.actions.is_empty() || node.actions.len() != node.children.len() {
                    return bad(format!(
                        "decision node has {} actions and {} children",
                        node.actions.len(),
                        node.children.len()
                    ));
                }
            }
        }
        Ok(())
    }

    /// Largest number of decision and chance edges on a root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(n: &EfgNode) -> usize {
            n.children.iter().map(|c| 1 + go(c)).max().unwrap_or(0)
        }
        go(&self.root)
    }

    /// Variables grouped by player; within a player, by first appearance.
    pub fn variable_map(&self) -> Result<InfosetVariableMap> {
        let mut infosets = self.infosets()?;
        infosets.sort_by_key(|(_, info)| info.owner);
        let mut block_sizes = vec![0; self.players];
        let mut next = 0;
        let mut out = Vec::with_capacity(infosets.len());
        for (id, info) in infosets {
            let k = info.actions.len() - 1;
            out.push(InfosetVars {
                infoset: id,
                player: info.owner,
                actions: info.actions.to_vec(),
                variables: (next..next + k).collect(),
            });
            next += k;
            block_sizes[info.owner] += k;
        }
        Ok(InfosetVariableMap {
            infosets: out,
            block_sizes,
        })
    }

    /// Expected payoffs under `strategy`, by direct traversal.
    pub fn expected_utility_at(&self, strategy: &BehavioralStrategy) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.players];
        for (leaf, reach) in self.leaf_reach(strategy)? {
            let payoffs = leaf.payoffs.as_ref().expect("validated terminal");
            for (o, v) in out.iter_mut().zip(payoffs) {
                *o += reach * v;
            }
        }
        Ok(out)
    }

    /// Probability of reaching each leaf, in pre-order.
    pub fn leaf_reach_probabilities(&self, strategy: &BehavioralStrategy) -> Result<Vec<f64>> {
        Ok(self
            .leaf_reach(strategy)?
            .into_iter()
            .map(|(_, r)| r)
            .collect())
    }

    fn leaf_reach(&self, strategy: &BehavioralStrategy) -> Result<Vec<(&EfgNode, f64)>> {
        let infosets = self.infosets()?;
        for (id, info) in &infosets {
            checked_probs(strategy, id, info.actions.len())?;
        }
        let mut leaves = Vec::new();
        let mut stack = vec![(&self.root, 1.0)];
        while let Some((node, reach)) = stack.pop() {
            let probs: &[f64] = match node.owner {
                Owner::Terminal => {
                    leaves.push((node, reach));
                    continue;
                }
                Owner::Chance => node.chance_probs.as_deref().expect("validated chance"),
                Owner::Player(_) => &strategy[node.infoset.as_ref().expect("validated")],
            };
            for (child, p) in node.children.iter().zip(probs).rev() {
                stack.push((child, reach * p));
            }
        }
        Ok(leaves)
    }
}

/// Expected-utility polynomials over the infoset variables, with each
/// infoset constrained to its simplex.
pub fn efg_to_game(tree: &EfgTree) -> Result<(PolynomialGame, InfosetVariableMap)> {
    tree.validate()?;
    let map = tree.variable_map()?;
    let n = map.n_vars();
    let mut action_probs: BTreeMap<&InfosetId, Vec<Polynomial>> = BTreeMap::new();
    let mut ineq = Vec::new();
    for info in &map.infosets {
        let vars: Vec<Polynomial> = info
            .variables
            .iter()
            .map(|&v| Polynomial::var(n, v))
            .collect();
        let mut last = Polynomial::constant(n, 1.0);
        for v in &vars {
            last = last.sub(v)?;
        }
        let mut probs = vars;
        probs.push(last);
        action_probs.insert(&info.infoset, probs);
        if let (Some(&first), Some(&end)) = (info.variables.first(), info.variables.last()) {
            ineq.extend(SemialgebraicSet::simplex_constraints(n, first..end + 1));
        }
    }

    let mut payoffs = vec![Polynomial::zero(n); tree.players];
    let mut stack = vec![(&tree.root, Polynomial::constant(n, 1.0))];
    while let Some((node, reach)) = stack.pop() {
        match node.owner {
            Owner::Terminal => {
                let values = node.payoffs.as_ref().expect("validated terminal");
                for (u, &v) in payoffs.iter_mut().zip(values) {
                    *u = u.add(&reach.scale(v))?;
                }
            }
            Owner::Chance => {
                let probs = node.chance_probs.as_ref().expect("validated chance");
                for (child, &p) in node.children.iter().zip(probs) {
                    stack.push((child, reach.scale(p)));
                }
            }
            Owner::Player(_) => {
                let probs = &action_probs[node.infoset.as_ref().expect("validated")];
                for (child, p) in node.children.iter().zip(probs) {
                    stack.push((child, reach.mul(p)?));
                }
            }
        }
    }
    let domain = SemialgebraicSet::new(n, ineq, Vec::new())?;
    let game = PolynomialGame::new(&map.block_sizes, payoffs, domain)?;
    Ok((game, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn strategy(pairs: &[(&str, &[f64])]) -> BehavioralStrategy {
        pairs
            .iter()
            .map(|(k, v)| (InfosetId::from(*k), v.to_vec()))
            .collect()
    }

    #[test]
    fn driver_converts_to_published_polynomial() {
        let (game, map) = efg_to_game(&corpus::driver_tree()).unwrap();
        assert_eq!(map.block_sizes, vec![1]);
        assert!(game.distance(&corpus::driver_game()).unwrap() <= 1e-12);
        assert_eq!(game.domain(), corpus::driver_game().domain());
    }

    #[test]
    fn driver_utilities_by_hand() {
        let tree = corpus::driver_tree();
        let u = |c: f64| {
            tree.expected_utility_at(&strategy(&[("I", &[c, 1.0 - c])]))
                .unwrap()[0]
        };
        assert_eq!(u(1.0), 1.0);
        assert_eq!(u(0.0), 0.0);
        assert!((u(0.5) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn fig1_converts_to_published_polynomials() {
        let (game, map) = efg_to_game(&corpus::fig1_tree()).unwrap();
        assert_eq!(map.block_sizes, vec![2, 1]);
        assert!(game.distance(&corpus::fig1_game()).unwrap() <= 1e-12);
    }

    #[test]
    fn fig3_converts_to_published_polynomials() {
        let (game, _) = efg_to_game(&corpus::fig3_tree()).unwrap();
        assert!(game.distance(&corpus::fig3_game()).unwrap() <= 1e-12);
    }

    #[test]
    fn single_leaf_is_constant() {
        let tree = EfgTree {
            players: 3,
            root: EfgNode::terminal(vec![1.5, -2.0, 0.25]),
        };
        let (game, map) = efg_to_game(&tree).unwrap();
        assert_eq!(map.n_vars(), 0);
        for (i, c) in [1.5, -2.0, 0.25].into_iter().enumerate() {
            assert_eq!(game.payoff(i), &Polynomial::constant(0, c));
        }
    }

    #[test]
    fn chance_scales_payoffs() {
        let tree = EfgTree {
            players: 1,
            root: EfgNode::chance(vec![
                ("a", 0.25, EfgNode::terminal(vec![4.0])),
                (
                    "b",
                    0.75,
                    EfgNode::decision(
                        0,
                        "I",
                        vec![
                            ("x", EfgNode::terminal(vec![2.0])),
                            ("y", EfgNode::terminal(vec![0.0])),
                        ],
                    ),
                ),
            ]),
        };
        let (game, _) = efg_to_game(&tree).unwrap();
        let expect = corpus::poly(1, &[(1.0, &[0]), (1.5, &[1])]);
        assert!(game.payoff(0).max_abs_diff(&expect).unwrap() <= 1e-15);
    }

    #[test]
    fn rejects_inconsistent_infoset() {
        let tree = EfgTree {
            players: 1,
            root: EfgNode::decision(
                0,
                "I",
                vec![
                    ("a", EfgNode::terminal(vec![0.0])),
                    (
                        "b",
                        EfgNode::decision(
                            0,
                            "I",
                            vec![
                                ("a", EfgNode::terminal(vec![0.0])),
                                ("c", EfgNode::terminal(vec![1.0])),
                            ],
                        ),
                    ),
                ],
            ),
        };
        assert!(matches!(efg_to_game(&tree), Err(Error::MalformedTree(_))));
    }

    #[test]
    fn rejects_bad_chance() {
        let tree = EfgTree {
            players: 1,
            root: EfgNode::chance(vec![
                ("a", 0.5, EfgNode::terminal(vec![0.0])),
                ("b", 0.4, EfgNode::terminal(vec![1.0])),
            ]),
        };
        assert!(matches!(efg_to_game(&tree), Err(Error::MalformedTree(_))));
    }

    #[test]
    fn rejects_bad_strategies() {
        let tree = corpus::driver_tree();
        for s in [
            strategy(&[("I", &[0.5, 0.6])]),
            strategy(&[("I", &[1.5, -0.5])]),
            strategy(&[("I", &[1.0])]),
            strategy(&[]),
        ] {
            assert!(matches!(
                tree.expected_utility_at(&s),
                Err(Error::InvalidStrategy(_))
            ));
        }
    }

    #[test]
    fn json_round_trip_and_owner_labels() {
        let tree = corpus::fig1_tree();
        let text = serde_json::to_string(&tree).unwrap();
        assert!(text.contains("\"terminal\""));
        assert_eq!(EfgTree::from_json(&text).unwrap(), tree);
        let bad = r#"{"players": 1, "root": {"owner": "nature"}}"#;
        assert!(EfgTree::from_json(bad).is_err());
    }

    #[test]
    fn tree_and_polynomial_agree_on_random_strategies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for tree in [
            corpus::driver_tree(),
            corpus::fig1_tree(),
            corpus::fig3_tree(),
        ] {
            let (game, map) = efg_to_game(&tree).unwrap();
            for _ in 0..100 {
                let s = map.random_strategy(&mut rng);
                let direct = tree.expected_utility_at(&s).unwrap();
                let x = map.point(&s).unwrap();
                for (u, d) in game.payoffs().iter().zip(&direct) {
                    assert!((u.evaluate(&x).unwrap() - d).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn degree_bounded_by_depth_and_zero_sum_preserved() {
        for tree in [
            corpus::driver_tree(),
            corpus::fig1_tree(),
            corpus::fig3_tree(),
        ] {
            let (game, _) = efg_to_game(&tree).unwrap();
            assert!(game.degree() as usize <= tree.depth());
        }
        for tree in [corpus::fig1_tree(), corpus::fig3_tree()] {
            let (game, _) = efg_to_game(&tree).unwrap();
            let sum = game.payoff(0).add(game.payoff(1)).unwrap();
            assert!(sum.is_zero() || sum.max_abs_coeff() <= 1e-12);
        }
    }

    /// Random tree over `players` players with shared infosets and chance.
    fn random_tree(rng: &mut ChaCha8Rng, players: usize, depth: usize) -> EfgTree {
        fn node(rng: &mut ChaCha8Rng, players: usize, depth: usize) -> EfgNode {
            if depth == 0 || rng.gen_bool(0.2) {
                return EfgNode::terminal((0..players).map(|_| rng.gen_range(-5.0..5.0)).collect());
            }
            if rng.gen_bool(0.2) {
                let p: f64 = rng.gen_range(0.0..1.0);
                return EfgNode::chance(vec![
                    ("h", p, node(rng, players, depth - 1)),
                    ("t", 1.0 - p, node(rng, players, depth - 1)),
                ]);
            }
            let player = rng.gen_range(0..players);
            // two infosets per player, each with a fixed action count
            let which = rng.gen_range(0..2usize);
            let k = 2 + which;
            let labels = ["a", "b", "c"];
            let children = (0..k)
                .map(|a| (labels[a], node(rng, players, depth - 1)))
                .collect();
            EfgNode::decision(player, format!("p{player}i{which}").as_str(), children)
        }
        EfgTree {
            players,
            root: node(rng, players, depth),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn random_trees_conserve_probability_and_agree(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let players = rng.gen_range(1..4);
            let tree = random_tree(&mut rng, players, 5);
            let (game, map) = efg_to_game(&tree).unwrap();
            prop_assert!(game.degree() as usize <= tree.depth());
            for _ in 0..5 {
                let s = map.random_strategy(&mut rng);
                let reach: f64 = tree.leaf_reach_probabilities(&s).unwrap().iter().sum();
                prop_assert!((reach - 1.0).abs() <= 1e-10);
                let x = map.point(&s).unwrap();
                let direct = tree.expected_utility_at(&s).unwrap();
                for (u, d) in game.payoffs().iter().zip(&direct) {
                    prop_assert!((u.evaluate(&x).unwrap() - d).abs() <= 1e-10);
                }
            }
        }
    }
}
