//! Plain-text game and weights files.
//!
//! Both formats are whitespace separated, line oriented and allow `#`
//! comments. A game file looks like
//!
//! ```text
//! players 2
//! actions 2 2
//! rewards
//! 0 0  1 1
//! 0 1  0 0
//! 1 0  0 0
//! 1 1  1 1
//! ```
//!
//! with one row per joint action (0-based indices, then one reward per
//! player). A weights file holds one block per ordered player pair:
//!
//! ```text
//! weights 0 1
//! 0.511 0.489
//! weights 1 0
//! 0.489 0.511
//! ```

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::game::{Game, JointAction};
use crate::learners::PairVectors;

/// Non-empty lines with comments removed, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(k, line)| {
        let body = line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        (!tokens.is_empty()).then_some((k + 1, tokens))
    })
}

struct Cursor<'a> {
    path: &'a Path,
    last_line: usize,
}

impl Cursor<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn number<T: FromStr>(&self, line: usize, token: &str, what: &str) -> Result<T> {
        token
            .parse()
            .map_err(|_| self.err(line, format!("malformed {what} `{token}`")))
    }
}

pub fn parse_game(path: &Path) -> Result<Game> {
    let text = std::fs::read_to_string(path)?;
    parse_game_str(&text, path)
}

/// Parses game-file text; `path` only labels error messages.
pub fn parse_game_str(text: &str, path: &Path) -> Result<Game> {
    let cur = Cursor {
        path,
        last_line: text.lines().count(),
    };
    let mut lines = content_lines(text);

    let (line, tokens) = lines
        .next()
        .ok_or_else(|| cur.err(cur.last_line, "expected `players I`"))?;
    if tokens.len() != 2 || tokens[0] != "players" {
        return Err(cur.err(line, "expected `players I`"));
    }
    let players: usize = cur.number(line, tokens[1], "player count")?;
    if players == 0 {
        return Err(cur.err(line, "a game needs at least one player"));
    }

    let (line, tokens) = lines
        .next()
        .ok_or_else(|| cur.err(cur.last_line, "expected `actions n1 ... nI`"))?;
    if tokens[0] != "actions" || tokens.len() != players + 1 {
        return Err(cur.err(
            line,
            format!("expected `actions` followed by {players} counts"),
        ));
    }
    let action_counts = tokens[1..]
        .iter()
        .map(|t| cur.number::<usize>(line, t, "action count"))
        .collect::<Result<Vec<_>>>()?;
    if let Some(i) = action_counts.iter().position(|&n| n == 0) {
        return Err(cur.err(line, format!("player {i} has no actions")));
    }

    let (line, tokens) = lines
        .next()
        .ok_or_else(|| cur.err(cur.last_line, "expected `rewards`"))?;
    if tokens != ["rewards"] {
        return Err(cur.err(line, "expected `rewards`"));
    }

    let joint_count: usize = action_counts.iter().product();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; joint_count];
    let mut seen_line = vec![0usize; joint_count];
    for (line, tokens) in lines {
        if tokens.len() != 2 * players {
            return Err(cur.err(
                line,
                format!(
                    "expected {players} action indices and {players} rewards, got {} fields",
                    tokens.len()
                ),
            ));
        }
        let mut flat = 0;
        for (i, t) in tokens[..players].iter().enumerate() {
            let a: usize = cur.number(line, t, "action index")?;
            if a >= action_counts[i] {
                return Err(cur.err(
                    line,
                    format!(
                        "action {a} out of range for player {i} ({} actions)",
                        action_counts[i]
                    ),
                ));
            }
            flat = flat * action_counts[i] + a;
        }
        let rewards = tokens[players..]
            .iter()
            .map(|t| {
                let r: f64 = cur.number(line, t, "reward")?;
                if r.is_finite() {
                    Ok(r)
                } else {
                    Err(cur.err(line, format!("reward `{t}` is not finite")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if rows[flat].is_some() {
            return Err(cur.err(
                line,
                format!(
                    "duplicate joint action, first given on line {}",
                    seen_line[flat]
                ),
            ));
        }
        rows[flat] = Some(rewards);
        seen_line[flat] = line;
    }

    let missing: Vec<String> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_none())
        .map(|(flat, _)| joint_of(&action_counts, flat).to_string())
        .collect();
    if !missing.is_empty() {
        return Err(cur.err(
            cur.last_line,
            format!("missing joint action rows: {}", missing.join(" ")),
        ));
    }
    let rewards = rows.into_iter().flatten().flatten().collect();
    Game::new(action_counts, rewards)
}

fn joint_of(action_counts: &[usize], mut flat: usize) -> JointAction {
    let mut actions = vec![0; action_counts.len()];
    for (slot, &n) in actions.iter_mut().zip(action_counts).rev() {
        *slot = flat % n;
        flat /= n;
    }
    JointAction::new(actions)
}

/// Game-file text for `game`. Rewards use the shortest representation that
/// parses back to the same value.
pub fn game_to_string(game: &Game) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "players {}", game.num_players());
    let counts: Vec<String> = game.action_counts().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "actions {}", counts.join(" "));
    out.push_str("rewards\n");
    for joint in game.joint_actions() {
        let mut fields: Vec<String> = joint.actions().iter().map(usize::to_string).collect();
        fields.extend((0..game.num_players()).map(|i| game.reward(i, &joint).to_string()));
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

pub fn save_game(game: &Game, path: &Path) -> Result<()> {
    write_atomic(path, game_to_string(game).as_bytes())
}

pub fn parse_weights(path: &Path, game: &Game) -> Result<PairVectors> {
    let text = std::fs::read_to_string(path)?;
    parse_weights_str(&text, path, game)
}

/// Parses weights-file text for `game`. Every ordered pair of distinct
/// players must appear exactly once with strictly positive entries.
pub fn parse_weights_str(text: &str, path: &Path, game: &Game) -> Result<PairVectors> {
    let cur = Cursor {
        path,
        last_line: text.lines().count(),
    };
    let players = game.num_players();
    let mut weights = PairVectors::zeros(game);
    let mut given = vec![false; players * players];
    let mut lines = content_lines(text);
    while let Some((line, tokens)) = lines.next() {
        if tokens.len() != 3 || tokens[0] != "weights" {
            return Err(cur.err(line, "expected `weights i j`"));
        }
        let i: usize = cur.number(line, tokens[1], "player index")?;
        let j: usize = cur.number(line, tokens[2], "player index")?;
        if i >= players || j >= players || i == j {
            return Err(cur.err(line, format!("({i},{j}) is not a pair of distinct players")));
        }
        if given[i * players + j] {
            return Err(cur.err(line, format!("weights for ({i},{j}) given twice")));
        }
        let (vline, values) = lines.next().ok_or_else(|| {
            cur.err(
                cur.last_line,
                format!("weights for ({i},{j}) have no values"),
            )
        })?;
        let want = game.num_actions(j);
        if values.len() != want {
            return Err(cur.err(
                vline,
                format!(
                    "expected {want} weights for ({i},{j}), got {}",
                    values.len()
                ),
            ));
        }
        let parsed = values
            .iter()
            .map(|t| {
                let w: f64 = cur.number(vline, t, "weight")?;
                if w.is_finite() && w > 0.0 {
                    Ok(w)
                } else {
                    Err(cur.err(vline, format!("weight `{t}` is not strictly positive")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        weights.set(i, j, parsed);
        given[i * players + j] = true;
    }
    let missing: Vec<String> = weights
        .pairs()
        .filter(|&(i, j)| !given[i * players + j])
        .map(|(i, j)| format!("({i},{j})"))
        .collect();
    if !missing.is_empty() {
        return Err(cur.err(
            cur.last_line,
            format!("missing weights for pairs {}", missing.join(" ")),
        ));
    }
    Ok(weights)
}

pub fn weights_to_string(weights: &PairVectors) -> String {
    let mut out = String::new();
    for (i, j) in weights.pairs() {
        let values: Vec<String> = weights.get(i, j).iter().map(f64::to_string).collect();
        let _ = writeln!(out, "weights {i} {j}");
        let _ = writeln!(out, "{}", values.join(" "));
    }
    out
}

pub fn save_weights(weights: &PairVectors, path: &Path) -> Result<()> {
    write_atomic(path, weights_to_string(weights).as_bytes())
}

/// Writes through a temporary file in the target directory, then renames it
/// into place so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
