use std::collections::HashSet;
use std::fmt::Write as _;

/// Max-parity convention throughout: the winner of an infinite play is the
/// player whose parity matches the greatest priority occurring infinitely
/// often; a player who cannot move loses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Player {
    Exists,
    Forall,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Exists => Player::Forall,
            Player::Forall => Player::Exists,
        }
    }
    pub fn of_priority(p: u32) -> Player {
        if p % 2 == 0 {
            Player::Exists
        } else {
            Player::Forall
        }
    }
}

#[derive(Clone, Debug)]
pub struct Position {
    pub owner: Player,
    pub priority: u32,
    pub moves: Vec<usize>,
    pub label: String,
}

#[derive(Clone, Debug)]
pub struct ParityGame {
    pub positions: Vec<Position>,
    pub start: usize,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// Winner per position; the two regions partition the game.
    pub winner: Vec<Player>,
    /// Positional strategy at positions owned and won by their owner.
    pub strategy: Vec<Option<usize>>,
}

impl SolveResult {
    pub fn exists_wins(&self, v: usize) -> bool {
        self.winner[v] == Player::Exists
    }
}

impl ParityGame {
    pub fn new(positions: Vec<Position>, start: usize) -> ParityGame {
        ParityGame { positions, start }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// DOT rendering with stable node ordering.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph game {\n");
        for (i, p) in self.positions.iter().enumerate() {
            let shape = match p.owner {
                Player::Exists => "ellipse",
                Player::Forall => "box",
            };
            let mark = if i == self.start { ", peripheries=2" } else { "" };
            let _ = writeln!(
                out,
                "  n{i} [shape={shape}, label=\"{}\\np{}\"{mark}];",
                p.label.replace('"', "'"),
                p.priority
            );
        }
        for (i, p) in self.positions.iter().enumerate() {
            for &m in &p.moves {
                let _ = writeln!(out, "  n{i} -> n{m};");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Zielonka's recursive algorithm with positional strategy extraction.
/// Dead-end positions are first rerouted to losing sinks so the recursion
/// can assume every position has a move.
pub fn solve_parity(game: &ParityGame) -> SolveResult {
    let n = game.len();
    let mut aug = game.clone();
    let sink_odd = n; // self-loop of priority 1: whoever is sent here loses if Exists
    let sink_even = n + 1;
    aug.positions.push(Position {
        owner: Player::Forall,
        priority: 1,
        moves: vec![sink_odd],
        label: "sink-".into(),
    });
    aug.positions.push(Position {
        owner: Player::Forall,
        priority: 0,
        moves: vec![sink_even],
        label: "sink+".into(),
    });
    let mut dead = Vec::new();
    for i in 0..n {
        if aug.positions[i].moves.is_empty() {
            let target = match aug.positions[i].owner {
                Player::Exists => sink_odd,
                Player::Forall => sink_even,
            };
            aug.positions[i].moves.push(target);
            dead.push(i);
        }
    }

    let mut solver = Zielonka {
        game: &aug,
        winner: vec![Player::Exists; aug.len()],
        strategy: vec![None; aug.len()],
    };
    solver.solve(vec![true; aug.len()]);

    let mut winner = solver.winner;
    let mut strategy = solver.strategy;
    winner.truncate(n);
    strategy.truncate(n);
    for &i in &dead {
        strategy[i] = None;
    }
    let result = SolveResult { winner, strategy };
    debug_assert!(strategy_is_sound(game, &result), "unsound strategies");
    result
}

struct Zielonka<'a> {
    game: &'a ParityGame,
    winner: Vec<Player>,
    strategy: Vec<Option<usize>>,
}

impl Zielonka<'_> {
    /// Solves the subgame induced by `alive` (every alive position must keep
    /// at least one alive move); writes winners and strategies.
    fn solve(&mut self, alive: Vec<bool>) {
        if !alive.iter().any(|&b| b) {
            return;
        }
        let max_p = self
            .game
            .positions
            .iter()
            .enumerate()
            .filter(|&(i, _)| alive[i])
            .map(|(_, p)| p.priority)
            .max()
            .unwrap();
        let alpha = Player::of_priority(max_p);
        let opp = alpha.opponent();

        let mut region = vec![false; self.game.len()];
        for (i, p) in self.game.positions.iter().enumerate() {
            if alive[i] && p.priority == max_p {
                region[i] = true;
            }
        }
        // inside the top region, alpha may move anywhere alive
        let mut seed: Vec<Option<usize>> = vec![None; self.game.len()];
        for i in 0..self.game.len() {
            if region[i] && self.game.positions[i].owner == alpha {
                seed[i] = self.game.positions[i]
                    .moves
                    .iter()
                    .copied()
                    .find(|&m| alive[m]);
            }
        }
        let (attr, attr_strategy) = attractor(self.game, &alive, alpha, region);

        let mut rest = alive.clone();
        for i in 0..self.game.len() {
            if attr[i] {
                rest[i] = false;
            }
        }
        self.solve(rest.clone());

        let opp_wins_rest = (0..self.game.len()).any(|i| rest[i] && self.winner[i] == opp);
        if !opp_wins_rest {
            for i in 0..self.game.len() {
                if attr[i] {
                    self.winner[i] = alpha;
                    self.strategy[i] = if self.game.positions[i].owner == alpha {
                        attr_strategy[i].or(seed[i])
                    } else {
                        None
                    };
                }
            }
            return;
        }

        // the opponent wins part of the rest: attract to it and resolve the remainder
        let mut opp_region = vec![false; self.game.len()];
        for i in 0..self.game.len() {
            if rest[i] && self.winner[i] == opp {
                opp_region[i] = true;
            }
        }
        let inner_strategy = self.strategy.clone();
        let (b, b_strategy) = attractor(self.game, &alive, opp, opp_region.clone());
        let mut remaining = alive.clone();
        for i in 0..self.game.len() {
            if b[i] {
                remaining[i] = false;
            }
        }
        self.solve(remaining);
        for i in 0..self.game.len() {
            if b[i] {
                self.winner[i] = opp;
                self.strategy[i] = if self.game.positions[i].owner == opp {
                    if opp_region[i] {
                        inner_strategy[i]
                    } else {
                        b_strategy[i]
                    }
                } else {
                    None
                };
            }
        }
    }
}

/// Attractor of `target` for `player` within `alive`, with the attractor
/// strategy for player-owned positions pulled in along the way.
fn attractor(
    game: &ParityGame,
    alive: &[bool],
    player: Player,
    mut target: Vec<bool>,
) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = game.len();
    let mut strategy: Vec<Option<usize>> = vec![None; n];
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            if !alive[i] || target[i] {
                continue;
            }
            let pos = &game.positions[i];
            if pos.owner == player {
                if let Some(m) = pos.moves.iter().copied().find(|&m| alive[m] && target[m]) {
                    target[i] = true;
                    strategy[i] = Some(m);
                    changed = true;
                }
            } else {
                let mut any = false;
                let mut all_in = true;
                for m in pos.moves.iter().copied().filter(|&m| alive[m]) {
                    any = true;
                    if !target[m] {
                        all_in = false;
                        break;
                    }
                }
                if !any || all_in {
                    target[i] = true;
                    changed = true;
                }
            }
        }
    }
    (target, strategy)
}

/// Validates a solve result: inside each winner's region, following the
/// winner's strategy, the loser cannot leave the region, the winner is never
/// stuck, and every reachable cycle has the winner's parity.
pub fn strategy_is_sound(game: &ParityGame, result: &SolveResult) -> bool {
    [Player::Exists, Player::Forall]
        .into_iter()
        .all(|p| region_strategy_sound(game, result, p))
}

fn region_strategy_sound(game: &ParityGame, result: &SolveResult, player: Player) -> bool {
    let n = game.len();
    let in_region: Vec<bool> = (0..n).map(|i| result.winner[i] == player).collect();
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        if !in_region[i] {
            continue;
        }
        let pos = &game.positions[i];
        if pos.owner == player {
            match result.strategy[i] {
                Some(m) => {
                    if !in_region[m] {
                        return false;
                    }
                    edges[i].push(m);
                }
                // a winning owner must have a move
                None => return false,
            }
        } else {
            for &m in &pos.moves {
                if !in_region[m] {
                    return false;
                }
                edges[i].push(m);
            }
        }
    }
    // every cycle reachable in the restricted graph must favor the player
    for scc in tarjan(&edges, &in_region) {
        let cyclic = scc.len() > 1 || edges[scc[0]].contains(&scc[0]);
        if !cyclic {
            continue;
        }
        for p in scc.iter().map(|&i| game.positions[i].priority) {
            if Player::of_priority(p) != player && cycle_with_max(&edges, &scc, p, game) {
                return false;
            }
        }
    }
    true
}

/// Is there a cycle within `scc` whose maximum priority is exactly `p`?
fn cycle_with_max(edges: &[Vec<usize>], scc: &[usize], p: u32, game: &ParityGame) -> bool {
    let member: HashSet<usize> = scc.iter().copied().collect();
    let ok = |i: usize| member.contains(&i) && game.positions[i].priority <= p;
    for &v in scc {
        if game.positions[v].priority != p {
            continue;
        }
        let mut stack: Vec<usize> = edges[v].iter().copied().filter(|&m| ok(m)).collect();
        let mut seen: HashSet<usize> = stack.iter().copied().collect();
        while let Some(u) = stack.pop() {
            if u == v {
                return true;
            }
            for &m in &edges[u] {
                if ok(m) && seen.insert(m) {
                    stack.push(m);
                }
            }
        }
    }
    false
}

fn tarjan(edges: &[Vec<usize>], alive: &[bool]) -> Vec<Vec<usize>> {
    let n = edges.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut counter = 0usize;
    let mut out = Vec::new();

    enum Frame {
        Enter(usize),
        Continue(usize, usize),
    }
    for root in 0..n {
        if !alive[root] || index[root] != usize::MAX {
            continue;
        }
        let mut call = vec![Frame::Enter(root)];
        while let Some(frame) = call.pop() {
            match frame {
                Frame::Enter(v) => {
                    index[v] = counter;
                    low[v] = counter;
                    counter += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    call.push(Frame::Continue(v, 0));
                }
                Frame::Continue(v, mut ei) => {
                    let mut descend = None;
                    while ei < edges[v].len() {
                        let w = edges[v][ei];
                        ei += 1;
                        if !alive[w] {
                            continue;
                        }
                        if index[w] == usize::MAX {
                            descend = Some(w);
                            break;
                        } else if on_stack[w] {
                            low[v] = low[v].min(index[w]);
                        }
                    }
                    if let Some(w) = descend {
                        call.push(Frame::Continue(v, ei));
                        call.push(Frame::Enter(w));
                        continue;
                    }
                    if low[v] == index[v] {
                        let mut scc = Vec::new();
                        loop {
                            let w = stack.pop().unwrap();
                            on_stack[w] = false;
                            scc.push(w);
                            if w == v {
                                break;
                            }
                        }
                        out.push(scc);
                    }
                    if let Some(Frame::Continue(parent, _)) = call.last() {
                        let parent = *parent;
                        low[parent] = low[parent].min(low[v]);
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

/// Reference solver: enumerate all positional strategies for Exists; with the
/// strategy fixed the game is one-player, and Forall wins a position exactly
/// when it can steer into an Exists-stuck position or an odd-max lasso.
/// Intended for games of at most ~12 positions.
pub fn solve_bruteforce(game: &ParityGame) -> Vec<Player> {
    let n = game.len();
    let exists_positions: Vec<usize> = (0..n)
        .filter(|&i| {
            game.positions[i].owner == Player::Exists && !game.positions[i].moves.is_empty()
        })
        .collect();
    let mut winner = vec![Player::Forall; n];
    let mut choice = vec![0usize; exists_positions.len()];
    loop {
        let wins = analyze_fixed_strategy(game, &exists_positions, &choice);
        for i in 0..n {
            if wins[i] {
                winner[i] = Player::Exists;
            }
        }
        let mut pos = 0;
        while pos < choice.len() {
            choice[pos] += 1;
            if choice[pos] < game.positions[exists_positions[pos]].moves.len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
        if pos == choice.len() {
            break;
        }
    }
    winner
}

fn analyze_fixed_strategy(game: &ParityGame, eps: &[usize], choice: &[usize]) -> Vec<bool> {
    let n = game.len();
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut exists_stuck = vec![false; n];
    for i in 0..n {
        let pos = &game.positions[i];
        if pos.owner == Player::Exists {
            if let Some(k) = eps.iter().position(|&e| e == i) {
                edges[i].push(pos.moves[choice[k]]);
            } else {
                exists_stuck[i] = true;
            }
        } else {
            edges[i] = pos.moves.clone();
        }
    }
    // bad = positions from which Forall can reach an Exists-stuck position or
    // force an odd-max lasso
    let mut bad = exists_stuck;
    let maxp = game.positions.iter().map(|p| p.priority).max().unwrap_or(0);
    for p in (0..=maxp).filter(|q| q % 2 == 1) {
        for v in 0..n {
            if game.positions[v].priority != p || bad[v] {
                continue;
            }
            let ok = |i: usize| game.positions[i].priority <= p;
            let mut stack: Vec<usize> = edges[v].iter().copied().filter(|&m| ok(m)).collect();
            let mut seen: HashSet<usize> = stack.iter().copied().collect();
            let mut hit = false;
            while let Some(u) = stack.pop() {
                if u == v {
                    hit = true;
                    break;
                }
                for &m in &edges[u] {
                    if ok(m) && seen.insert(m) {
                        stack.push(m);
                    }
                }
            }
            if hit {
                bad[v] = true;
            }
        }
    }
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            if !bad[i] && edges[i].iter().any(|&m| bad[m]) {
                bad[i] = true;
                changed = true;
            }
        }
    }
    bad.iter().map(|&b| !b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn pos(owner: Player, priority: u32, moves: &[usize]) -> Position {
        Position {
            owner,
            priority,
            moves: moves.to_vec(),
            label: String::new(),
        }
    }

    #[test]
    fn stuck_player_loses() {
        let g = ParityGame::new(vec![pos(Player::Exists, 0, &[])], 0);
        assert_eq!(solve_parity(&g).winner[0], Player::Forall);
        let g2 = ParityGame::new(vec![pos(Player::Forall, 1, &[])], 0);
        assert_eq!(solve_parity(&g2).winner[0], Player::Exists);
    }

    #[test]
    fn self_loop_priority_decides() {
        for owner in [Player::Exists, Player::Forall] {
            let g = ParityGame::new(vec![pos(owner, 2, &[0])], 0);
            assert_eq!(solve_parity(&g).winner[0], Player::Exists);
            let g = ParityGame::new(vec![pos(owner, 1, &[0])], 0);
            assert_eq!(solve_parity(&g).winner[0], Player::Forall);
        }
    }

    #[test]
    fn choice_between_loops() {
        let g = ParityGame::new(
            vec![
                pos(Player::Exists, 0, &[1, 2]),
                pos(Player::Forall, 1, &[1]),
                pos(Player::Forall, 2, &[2]),
            ],
            0,
        );
        let r = solve_parity(&g);
        assert_eq!(r.winner[0], Player::Exists);
        assert_eq!(r.strategy[0], Some(2));
        let g2 = ParityGame::new(
            vec![
                pos(Player::Forall, 0, &[1, 2]),
                pos(Player::Forall, 1, &[1]),
                pos(Player::Forall, 2, &[2]),
            ],
            0,
        );
        assert_eq!(solve_parity(&g2).winner[0], Player::Forall);
    }

    fn random_game(rng: &mut StdRng, n: usize) -> ParityGame {
        let positions = (0..n)
            .map(|_| {
                let owner = if rng.gen_bool(0.5) {
                    Player::Exists
                } else {
                    Player::Forall
                };
                let priority = rng.gen_range(0..4);
                let deg = rng.gen_range(0..=3);
                let moves = (0..deg).map(|_| rng.gen_range(0..n)).collect();
                Position {
                    owner,
                    priority,
                    moves,
                    label: String::new(),
                }
            })
            .collect();
        ParityGame::new(positions, 0)
    }

    #[test]
    fn zielonka_matches_bruteforce_on_random_games() {
        let mut rng = StdRng::seed_from_u64(0xCA5E);
        for round in 0..200 {
            let n = rng.gen_range(1..=10);
            let g = random_game(&mut rng, n);
            let fast = solve_parity(&g);
            let slow = solve_bruteforce(&g);
            assert_eq!(fast.winner, slow, "disagreement in round {round}: {g:?}");
        }
    }

    #[test]
    fn strategies_stay_in_region_and_are_sound() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..80 {
            let n = rng.gen_range(1..=10);
            let g = random_game(&mut rng, n);
            let r = solve_parity(&g);
            for i in 0..g.len() {
                if let Some(m) = r.strategy[i] {
                    assert_eq!(r.winner[i], r.winner[m]);
                }
            }
            assert!(strategy_is_sound(&g, &r));
        }
    }
}
