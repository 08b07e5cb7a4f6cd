//! JSON file formats for games and extensive-form trees.
//!
//! A game file reads
//! `{"players": [{"m": 2}, ...], "payoffs": [poly, ...], "domain": {"ineq": [poly, ...], "eq": [poly, ...]}}`
//! where each `poly` is `{"n_vars": n, "terms": [{"exps": [e_1, ..., e_n], "coeff": c}, ...]}`
//! over all `n = sum m_i` variables, player blocks in order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::efg::{EfgTree, InfosetVariableMap};
use crate::error::{Error, Result};
use crate::game::{PolynomialGame, SemialgebraicSet};
use crate::poly::Polynomial;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerJson {
    pub m: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainJson {
    #[serde(default)]
    pub ineq: Vec<Polynomial>,
    #[serde(default)]
    pub eq: Vec<Polynomial>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameJson {
    pub players: Vec<PlayerJson>,
    pub payoffs: Vec<Polynomial>,
    #[serde(default)]
    pub domain: DomainJson,
    /// Present when the game was converted from an extensive-form tree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infosets: Option<InfosetVariableMap>,
}

impl GameJson {
    pub fn from_game(game: &PolynomialGame, infosets: Option<&InfosetVariableMap>) -> Self {
        GameJson {
            players: game
                .block_sizes()
                .into_iter()
                .map(|m| PlayerJson { m })
                .collect(),
            payoffs: game.payoffs().to_vec(),
            domain: DomainJson {
                ineq: game.domain().inequalities().to_vec(),
                eq: game.domain().equalities().to_vec(),
            },
            infosets: infosets.cloned(),
        }
    }

    pub fn to_game(&self) -> Result<PolynomialGame> {
        let sizes: Vec<usize> = self.players.iter().map(|p| p.m).collect();
        let n: usize = sizes.iter().sum();
        let all = self
            .payoffs
            .iter()
            .chain(&self.domain.ineq)
            .chain(&self.domain.eq);
        if let Some(p) = all.into_iter().find(|p| p.n_vars() != n) {
            return Err(Error::MalformedGame(format!(
                "polynomial over {} variables in a game with {n}",
                p.n_vars()
            )));
        }
        let domain = SemialgebraicSet::new(
            n,
            self.domain.ineq.clone(),
            self.domain.eq.clone(),
        )?;
        PolynomialGame::new(&sizes, self.payoffs.clone(), domain)
    }
}

pub fn game_to_json(game: &PolynomialGame, infosets: Option<&InfosetVariableMap>) -> String {
    let mut s = serde_json::to_string_pretty(&GameJson::from_game(game, infosets))
        .expect("game JSON serializes");
    s.push('\n');
    s
}

pub fn game_from_json(text: &str) -> Result<PolynomialGame> {
    serde_json::from_str::<GameJson>(text)?.to_game()
}

pub fn read_game(path: &Path) -> Result<PolynomialGame> {
    game_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_game(
    path: &Path,
    game: &PolynomialGame,
    infosets: Option<&InfosetVariableMap>,
) -> Result<()> {
    std::fs::write(path, game_to_json(game, infosets))?;
    Ok(())
}

pub fn read_efg(path: &Path) -> Result<EfgTree> {
    EfgTree::from_json(&std::fs::read_to_string(path)?)
}

pub fn efg_to_json(tree: &EfgTree) -> String {
    let mut s = serde_json::to_string_pretty(tree).expect("tree JSON serializes");
    s.push('\n');
    s
}

/// Serializes any report as pretty JSON with a trailing newline.
pub fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
