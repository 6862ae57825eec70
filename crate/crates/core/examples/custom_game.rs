//! A three-player game given in the plain-text game format, checked under
//! geometric fictitious play from random beliefs. Everyone is paid when all
//! three pick the same action, and the second action pays more.

use std::path::Path;

use smcl::io::{game_to_string, parse_game_str};
use smcl::{run_check, Algorithm, RunConfig};

const GAME: &str = "\
# three players, two actions each
players 3
actions 2 2 2
rewards
0 0 0  1 1 1
0 0 1  0 0 0
0 1 0  0 0 0
0 1 1  0 0 0
1 0 0  0 0 0
1 0 1  0 0 0
1 1 0  0 0 0
1 1 1  2 2 2
";

fn main() -> smcl::Result<()> {
    let game = parse_game_str(GAME, Path::new("three_player.txt"))?;
    assert_eq!(
        parse_game_str(&game_to_string(&game), Path::new("copy"))?,
        game
    );
    let config = RunConfig::batch(Algorithm::Gfp, 20, 7);
    let report = run_check(&config, &game, &config.initializations(&game, None)?);
    print!("{}", report.to_table());
    Ok(())
}
