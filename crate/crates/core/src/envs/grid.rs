use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{action, success_reward, EnvId, InfoRecord, Observation, StepResult};
use crate::error::{contract, Result};

pub const VIEW_SIZE: usize = 7;

// MiniGrid symbolic encoding.
const OBJ_EMPTY: u8 = 1;
const OBJ_WALL: u8 = 2;
const OBJ_DOOR: u8 = 4;
const OBJ_KEY: u8 = 5;
const OBJ_BALL: u8 = 6;
const OBJ_GOAL: u8 = 8;
const OBJ_LAVA: u8 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Color {
    Red,
    Green,
    Blue,
    Purple,
    Yellow,
    Grey,
}

impl Color {
    fn index(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Purple => "purple",
            Color::Yellow => "yellow",
            Color::Grey => "grey",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoorState {
    Open = 0,
    Closed = 1,
    Locked = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Empty,
    Wall,
    Door(Color, DoorState),
    Key(Color),
    Ball(Color),
    Goal,
    Lava,
}

impl Cell {
    fn encode(self) -> [u8; 3] {
        match self {
            Cell::Empty => [OBJ_EMPTY, 0, 0],
            Cell::Wall => [OBJ_WALL, Color::Grey.index(), 0],
            Cell::Door(c, s) => [OBJ_DOOR, c.index(), s as u8],
            Cell::Key(c) => [OBJ_KEY, c.index(), 0],
            Cell::Ball(c) => [OBJ_BALL, c.index(), 0],
            Cell::Goal => [OBJ_GOAL, Color::Green.index(), 0],
            Cell::Lava => [OBJ_LAVA, Color::Red.index(), 0],
        }
    }

    fn passable(self) -> bool {
        matches!(self, Cell::Empty | Cell::Goal | Cell::Lava | Cell::Door(_, DoorState::Open))
    }

    fn describe(self) -> String {
        match self {
            Cell::Key(c) => format!("{} key", c.name()),
            Cell::Ball(c) => format!("{} ball", c.name()),
            _ => "nothing".to_string(),
        }
    }
}

/// Facing direction; the vector for each matches MiniGrid (east, south, west, north).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    East = 0,
    South = 1,
    West = 2,
    North = 3,
}

impl Direction {
    fn from_index(i: u8) -> Direction {
        match i % 4 {
            0 => Direction::East,
            1 => Direction::South,
            2 => Direction::West,
            _ => Direction::North,
        }
    }

    fn vec(self) -> (i32, i32) {
        match self {
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
            Direction::North => (0, -1),
        }
    }

    fn left(self) -> Direction {
        Direction::from_index(self as u8 + 3)
    }

    fn right(self) -> Direction {
        Direction::from_index(self as u8 + 1)
    }
}

/// 7x7x3 egocentric symbolic view, indexed `[x][y][channel]` with the agent
/// at `(3, 6)` looking towards `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridObservation {
    pub cells: [[[u8; 3]; VIEW_SIZE]; VIEW_SIZE],
}

impl GridObservation {
    pub fn to_features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(VIEW_SIZE * VIEW_SIZE * 3);
        for col in &self.cells {
            for cell in col {
                out.extend(cell.iter().map(|&v| v as f64));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GridEnv {
    id: EnvId,
    width: i32,
    height: i32,
    cells: Vec<Cell>,
    agent: (i32, i32),
    dir: Direction,
    carrying: Option<Cell>,
    step_count: u32,
    max_steps: u32,
    done: bool,
}

impl GridEnv {
    pub fn new(id: EnvId) -> GridEnv {
        let (width, height) = match id {
            EnvId::DoorKey5 | EnvId::LavaGapS5 => (5, 5),
            EnvId::DoorKey8 => (8, 8),
            EnvId::KeyCorridorS3R1 => (7, 5),
            other => panic!("{other} is not a grid environment"),
        };
        GridEnv {
            id,
            width,
            height,
            cells: vec![Cell::Empty; (width * height) as usize],
            agent: (1, 1),
            dir: Direction::East,
            carrying: None,
            step_count: 0,
            max_steps: id.spec().max_steps,
            done: true,
        }
    }

    pub fn id(&self) -> EnvId {
        self.id
    }

    pub fn agent_pos(&self) -> (i32, i32) {
        self.agent
    }

    pub fn direction(&self) -> Direction {
        self.dir
    }

    pub fn cell(&self, x: i32, y: i32) -> Cell {
        if x < 0 || y < 0 || x >= self.width || y >= self.height {
            Cell::Wall
        } else {
            self.cells[(y * self.width + x) as usize]
        }
    }

    fn set(&mut self, x: i32, y: i32, c: Cell) {
        self.cells[(y * self.width + x) as usize] = c;
    }

    /// Human-readable map, one row per line (`A` marks the agent).
    pub fn render_ascii(&self) -> String {
        let mut s = String::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let ch = if (x, y) == self.agent {
                    'A'
                } else {
                    match self.cell(x, y) {
                        Cell::Empty => '.',
                        Cell::Wall => '#',
                        Cell::Door(_, DoorState::Open) => '/',
                        Cell::Door(..) => 'D',
                        Cell::Key(_) => 'K',
                        Cell::Ball(_) => 'B',
                        Cell::Goal => 'G',
                        Cell::Lava => '~',
                    }
                };
                s.push(ch);
            }
            s.push('\n');
        }
        s
    }

    pub fn reset(&mut self, seed: u64) -> (Observation, InfoRecord) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.cells.iter_mut().for_each(|c| *c = Cell::Empty);
        for x in 0..self.width {
            self.set(x, 0, Cell::Wall);
            self.set(x, self.height - 1, Cell::Wall);
        }
        for y in 0..self.height {
            self.set(0, y, Cell::Wall);
            self.set(self.width - 1, y, Cell::Wall);
        }
        self.carrying = None;
        self.step_count = 0;
        self.done = false;
        match self.id {
            EnvId::DoorKey5 | EnvId::DoorKey8 => self.gen_doorkey(&mut rng),
            EnvId::LavaGapS5 => self.gen_lavagap(&mut rng),
            EnvId::KeyCorridorS3R1 => self.gen_corridor(&mut rng),
            _ => unreachable!(),
        }
        (Observation::Grid(self.observe()), self.info(String::new()))
    }

    fn random_empty(&self, rng: &mut ChaCha8Rng, xs: std::ops::Range<i32>, ys: std::ops::Range<i32>) -> (i32, i32) {
        loop {
            let p = (rng.random_range(xs.clone()), rng.random_range(ys.clone()));
            if self.cell(p.0, p.1) == Cell::Empty && p != self.agent {
                return p;
            }
        }
    }

    fn gen_doorkey(&mut self, rng: &mut ChaCha8Rng) {
        let n = self.width;
        self.set(n - 2, n - 2, Cell::Goal);
        let split = rng.random_range(2..n - 2);
        for y in 0..n {
            self.set(split, y, Cell::Wall);
        }
        let door_y = rng.random_range(1..n - 2);
        self.set(split, door_y, Cell::Door(Color::Yellow, DoorState::Locked));
        // Park the agent off-grid while sampling so random_empty ignores it.
        self.agent = (-1, -1);
        self.agent = self.random_empty(rng, 1..split, 1..n - 1);
        self.dir = Direction::from_index(rng.random_range(0..4));
        let key = self.random_empty(rng, 1..split, 1..n - 1);
        self.set(key.0, key.1, Cell::Key(Color::Yellow));
    }

    fn gen_lavagap(&mut self, rng: &mut ChaCha8Rng) {
        let (w, h) = (self.width, self.height);
        self.agent = (1, 1);
        self.dir = Direction::East;
        self.set(w - 2, h - 2, Cell::Goal);
        let gap = (rng.random_range(2..w - 2), rng.random_range(1..h - 1));
        for y in 1..h - 1 {
            if y != gap.1 {
                self.set(gap.0, y, Cell::Lava);
            }
        }
    }

    fn gen_corridor(&mut self, rng: &mut ChaCha8Rng) {
        // Columns: 1 = key room, 2 = wall with grey door, 3 = corridor,
        // 4 = wall with locked yellow door, 5 = ball room.
        let h = self.height;
        for y in 1..h - 1 {
            self.set(2, y, Cell::Wall);
            self.set(4, y, Cell::Wall);
        }
        let grey_y = rng.random_range(1..h - 1);
        self.set(2, grey_y, Cell::Door(Color::Grey, DoorState::Closed));
        let locked_y = rng.random_range(1..h - 1);
        self.set(4, locked_y, Cell::Door(Color::Yellow, DoorState::Locked));
        self.agent = (-1, -1);
        self.agent = self.random_empty(rng, 3..4, 1..h - 1);
        self.dir = Direction::from_index(rng.random_range(0..4));
        let key = self.random_empty(rng, 1..2, 1..h - 1);
        self.set(key.0, key.1, Cell::Key(Color::Yellow));
        let ball = self.random_empty(rng, 5..6, 1..h - 1);
        self.set(ball.0, ball.1, Cell::Ball(Color::Purple));
    }

    fn front(&self) -> (i32, i32) {
        let (dx, dy) = self.dir.vec();
        (self.agent.0 + dx, self.agent.1 + dy)
    }

    pub fn step(&mut self, a: u8) -> Result<StepResult> {
        if self.done {
            return Err(contract("step called on a finished episode; call reset first"));
        }
        if a as usize >= super::NUM_GRID_ACTIONS {
            return Err(contract(format!("grid action {a} outside 0..6")));
        }
        self.step_count += 1;
        let mut event = String::new();
        let mut terminated = false;
        let mut success = false;
        let (fx, fy) = self.front();
        let front = self.cell(fx, fy);
        match a {
            action::LEFT => self.dir = self.dir.left(),
            action::RIGHT => self.dir = self.dir.right(),
            action::FORWARD => {
                if front.passable() {
                    self.agent = (fx, fy);
                    match front {
                        Cell::Goal => {
                            terminated = true;
                            success = true;
                            event = "reached goal".into();
                        }
                        Cell::Lava => {
                            terminated = true;
                            event = "stepped in lava".into();
                        }
                        _ => {}
                    }
                }
            }
            action::PICKUP => {
                if self.carrying.is_none() && matches!(front, Cell::Key(_) | Cell::Ball(_)) {
                    self.carrying = Some(front);
                    self.set(fx, fy, Cell::Empty);
                    event = format!("picked up {}", front.describe());
                    if self.id == EnvId::KeyCorridorS3R1 && matches!(front, Cell::Ball(_)) {
                        terminated = true;
                        success = true;
                    }
                }
            }
            action::DROP => {
                if let Some(obj) = self.carrying {
                    if front == Cell::Empty {
                        self.set(fx, fy, obj);
                        self.carrying = None;
                        event = format!("dropped {}", obj.describe());
                    }
                }
            }
            action::TOGGLE => {
                if let Cell::Door(color, state) = front {
                    match state {
                        DoorState::Locked => {
                            if self.carrying == Some(Cell::Key(color)) {
                                self.set(fx, fy, Cell::Door(color, DoorState::Open));
                                event = "opened door".into();
                            }
                        }
                        DoorState::Closed => {
                            self.set(fx, fy, Cell::Door(color, DoorState::Open));
                            event = "opened door".into();
                        }
                        DoorState::Open => self.set(fx, fy, Cell::Door(color, DoorState::Closed)),
                    }
                }
            }
            _ => {}
        }
        let raw_reward = if success {
            success_reward(self.step_count, self.max_steps)
        } else {
            0.0
        };
        let truncated = !terminated && self.step_count >= self.max_steps;
        self.done = terminated || truncated;
        Ok(StepResult {
            observation: Observation::Grid(self.observe()),
            raw_reward,
            terminated,
            truncated,
            success,
            info: self.info(event),
        })
    }

    fn info(&self, event_text: String) -> InfoRecord {
        let mut info = InfoRecord::new(self.max_steps);
        info.agent_pos = Some(self.agent);
        info.carrying = self.carrying.map_or_else(|| "nothing".to_string(), Cell::describe);
        info.event_text = event_text;
        info.step_count = self.step_count;
        info
    }

    fn observe(&self) -> GridObservation {
        let fwd = self.dir.vec();
        let right = self.dir.right().vec();
        let half = (VIEW_SIZE / 2) as i32;
        let mut view = [[Cell::Empty; VIEW_SIZE]; VIEW_SIZE];
        for (vx, col) in view.iter_mut().enumerate() {
            for (vy, slot) in col.iter_mut().enumerate() {
                let f = (VIEW_SIZE as i32 - 1) - vy as i32;
                let r = vx as i32 - half;
                let wx = self.agent.0 + f * fwd.0 + r * right.0;
                let wy = self.agent.1 + f * fwd.1 + r * right.1;
                *slot = if f == 0 && r == 0 {
                    self.carrying.unwrap_or(Cell::Empty)
                } else {
                    self.cell(wx, wy)
                };
            }
        }
        let visible = visibility(&view);
        let mut cells = [[[0u8; 3]; VIEW_SIZE]; VIEW_SIZE];
        for vx in 0..VIEW_SIZE {
            for vy in 0..VIEW_SIZE {
                if visible[vx][vy] {
                    cells[vx][vy] = view[vx][vy].encode();
                }
            }
        }
        GridObservation { cells }
    }
}

fn see_behind(c: Cell) -> bool {
    !matches!(c, Cell::Wall | Cell::Door(_, DoorState::Closed | DoorState::Locked))
}

/// MiniGrid's occlusion sweep: light spreads row by row away from the agent
/// (bottom centre of the view) and stops at walls and closed doors. Cells
/// left dark are encoded as all zeros.
fn visibility(view: &[[Cell; VIEW_SIZE]; VIEW_SIZE]) -> [[bool; VIEW_SIZE]; VIEW_SIZE] {
    let n = VIEW_SIZE;
    let mut mask = [[false; VIEW_SIZE]; VIEW_SIZE];
    mask[n / 2][n - 1] = true;
    for j in (0..n).rev() {
        for i in 0..n - 1 {
            if !mask[i][j] || !see_behind(view[i][j]) {
                continue;
            }
            mask[i + 1][j] = true;
            if j > 0 {
                mask[i + 1][j - 1] = true;
                mask[i][j - 1] = true;
            }
        }
        for i in (1..n).rev() {
            if !mask[i][j] || !see_behind(view[i][j]) {
                continue;
            }
            mask[i - 1][j] = true;
            if j > 0 {
                mask[i - 1][j - 1] = true;
                mask[i][j - 1] = true;
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turn_to(env: &mut GridEnv, d: Direction) {
        while env.direction() != d {
            env.step(action::LEFT).unwrap();
        }
    }

    /// Shortest path over passable cells from the agent to `target`.
    fn path_to(env: &GridEnv, target: (i32, i32)) -> Option<Vec<(i32, i32)>> {
        use std::collections::{HashMap, VecDeque};
        let start = env.agent_pos();
        let mut prev = HashMap::new();
        let mut q = VecDeque::from([start]);
        prev.insert(start, start);
        while let Some(p) = q.pop_front() {
            if p == target {
                break;
            }
            for d in [(1, 0), (0, 1), (-1, 0), (0, -1)] {
                let n = (p.0 + d.0, p.1 + d.1);
                if !prev.contains_key(&n) && env.cell(n.0, n.1).passable() {
                    prev.insert(n, p);
                    q.push_back(n);
                }
            }
        }
        prev.get(&target)?;
        let mut path = vec![target];
        while *path.last().unwrap() != start {
            path.push(prev[path.last().unwrap()]);
        }
        path.reverse();
        Some(path)
    }

    /// Drives the agent to stand on `target`.
    fn walk_to(env: &mut GridEnv, target: (i32, i32)) {
        let path = path_to(env, target).expect("target reachable");
        for w in path.windows(2) {
            let d = match (w[1].0 - w[0].0, w[1].1 - w[0].1) {
                (1, 0) => Direction::East,
                (0, 1) => Direction::South,
                (-1, 0) => Direction::West,
                _ => Direction::North,
            };
            turn_to(env, d);
            env.step(action::FORWARD).unwrap();
        }
    }

    fn find(env: &GridEnv, pred: impl Fn(Cell) -> bool) -> (i32, i32) {
        for y in 0..env.height {
            for x in 0..env.width {
                if pred(env.cell(x, y)) {
                    return (x, y);
                }
            }
        }
        panic!("cell not found");
    }

    fn face_cell(env: &mut GridEnv, target: (i32, i32)) {
        // Stand on a passable neighbour, then face the target.
        let neighbours = [(-1, 0), (1, 0), (0, -1), (0, 1)];
        let stand = neighbours
            .iter()
            .map(|d| (target.0 + d.0, target.1 + d.1))
            .find(|p| *p == env.agent_pos() || (matches!(env.cell(p.0, p.1), Cell::Empty | Cell::Door(_, DoorState::Open)) && path_to(env, *p).is_some()))
            .expect("a reachable neighbour");
        walk_to(env, stand);
        let d = match (target.0 - stand.0, target.1 - stand.1) {
            (1, 0) => Direction::East,
            (0, 1) => Direction::South,
            (-1, 0) => Direction::West,
            _ => Direction::North,
        };
        turn_to(env, d);
    }

    #[test]
    fn walls_hide_cells_behind_them() {
        // #####
        // #.#.#
        // #KD.#
        // #A#G#   agent faces east into the wall; the goal behind it is hidden
        let mut env = GridEnv::new(EnvId::DoorKey5);
        env.reset(42);
        assert_eq!(env.agent_pos(), (1, 3));
        turn_to(&mut env, Direction::East);
        let obs = env.observe();
        assert_eq!(obs.cells[3][5], Cell::Wall.encode());
        assert_eq!(obs.cells[3][4], [0, 0, 0]);
        assert!(obs.cells.iter().flatten().all(|c| c[0] != OBJ_GOAL));
    }

    #[test]
    fn reset_is_deterministic() {
        for id in [EnvId::DoorKey5, EnvId::DoorKey8, EnvId::LavaGapS5, EnvId::KeyCorridorS3R1] {
            let mut a = GridEnv::new(id);
            let mut b = GridEnv::new(id);
            let ra = a.reset(42);
            let rb = b.reset(42);
            assert_eq!(ra, rb);
            assert_eq!(a.render_ascii(), b.render_ascii());
            assert_eq!(ra.1.carrying, "nothing");
            assert_eq!(ra.1.step_count, 0);
        }
    }

    #[test]
    fn seeds_vary_layouts() {
        let layouts: std::collections::HashSet<String> = (0..20)
            .map(|s| {
                let mut e = GridEnv::new(EnvId::DoorKey8);
                e.reset(s);
                e.render_ascii()
            })
            .collect();
        assert!(layouts.len() > 5);
    }

    #[test]
    fn observation_values_in_range() {
        let mut env = GridEnv::new(EnvId::KeyCorridorS3R1);
        let (obs, _) = env.reset(3);
        let Observation::Grid(g) = obs else { panic!() };
        assert!(g.cells.iter().flatten().flatten().all(|&v| v <= 10));
        assert_eq!(g.to_features().len(), 147);
    }

    #[test]
    fn forward_into_wall_is_blocked() {
        let mut env = GridEnv::new(EnvId::LavaGapS5);
        env.reset(0);
        env.step(action::LEFT).unwrap(); // face north, wall at y = 0
        let before = env.agent_pos();
        let r = env.step(action::FORWARD).unwrap();
        assert_eq!(env.agent_pos(), before);
        assert_eq!(r.raw_reward, 0.0);
        assert!(r.info.event_text.is_empty());
    }

    #[test]
    fn solve_doorkey5_by_script() {
        let mut env = GridEnv::new(EnvId::DoorKey5);
        env.reset(42);
        let key = find(&env, |c| matches!(c, Cell::Key(_)));
        face_cell(&mut env, key);
        let r = env.step(action::PICKUP).unwrap();
        assert!(r.info.event_text.contains("picked up"));
        assert_eq!(r.info.carrying, "yellow key");
        let door = find(&env, |c| matches!(c, Cell::Door(..)));
        face_cell(&mut env, door);
        let r = env.step(action::TOGGLE).unwrap();
        assert_eq!(r.info.event_text, "opened door");
        env.step(action::FORWARD).unwrap();
        let goal = find(&env, |c| c == Cell::Goal);
        let mut last = None;
        face_cell(&mut env, goal);
        let r = env.step(action::FORWARD).unwrap();
        last.replace(r.clone());
        assert!(r.terminated && r.success && !r.truncated);
        assert_eq!(r.info.event_text, "reached goal");
        let expected = 1.0 - 0.9 * (r.info.step_count as f64 / 250.0);
        assert!((r.raw_reward - expected).abs() < 1e-12);
        assert!(env.step(action::FORWARD).is_err());
    }

    #[test]
    fn locked_door_needs_matching_key() {
        let mut env = GridEnv::new(EnvId::DoorKey5);
        env.reset(7);
        let door = find(&env, |c| matches!(c, Cell::Door(..)));
        // Door column is x = 2 and the agent lives in column 1, so it can face it.
        face_cell(&mut env, door);
        let r = env.step(action::TOGGLE).unwrap();
        assert!(r.info.event_text.is_empty());
        assert!(matches!(env.cell(door.0, door.1), Cell::Door(_, DoorState::Locked)));
    }

    #[test]
    fn lava_terminates_without_reward() {
        let mut env = GridEnv::new(EnvId::LavaGapS5);
        env.reset(1);
        let lava = find(&env, |c| c == Cell::Lava);
        face_cell(&mut env, lava);
        let r = env.step(action::FORWARD).unwrap();
        assert!(r.terminated && !r.success);
        assert_eq!(r.raw_reward, 0.0);
        assert_eq!(r.info.event_text, "stepped in lava");
    }

    #[test]
    fn truncation_at_max_steps() {
        let mut env = GridEnv::new(EnvId::LavaGapS5);
        env.reset(1);
        let mut last = None;
        for _ in 0..100 {
            last = Some(env.step(action::LEFT).unwrap());
        }
        let r = last.unwrap();
        assert!(r.truncated && !r.terminated);
        assert_eq!(r.info.step_count, 100);
    }

    #[test]
    fn corridor_requires_drop_before_ball() {
        let mut env = GridEnv::new(EnvId::KeyCorridorS3R1);
        env.reset(5);
        let grey = find(&env, |c| matches!(c, Cell::Door(Color::Grey, _)));
        face_cell(&mut env, grey);
        assert_eq!(env.step(action::TOGGLE).unwrap().info.event_text, "opened door");
        let key = find(&env, |c| matches!(c, Cell::Key(_)));
        face_cell(&mut env, key);
        assert_eq!(env.step(action::PICKUP).unwrap().info.event_text, "picked up yellow key");
        let locked = find(&env, |c| matches!(c, Cell::Door(Color::Yellow, _)));
        face_cell(&mut env, locked);
        assert_eq!(env.step(action::TOGGLE).unwrap().info.event_text, "opened door");
        let ball = find(&env, |c| matches!(c, Cell::Ball(_)));
        face_cell(&mut env, ball);
        let r = env.step(action::PICKUP).unwrap();
        assert!(r.info.event_text.is_empty(), "cannot pick up while carrying");
        // Drop the key behind us, in the doorway-adjacent cell we came from.
        env.step(action::LEFT).unwrap();
        env.step(action::LEFT).unwrap();
        let dropped = env.step(action::DROP).unwrap();
        if dropped.info.event_text.is_empty() {
            // Front cell occupied; try the sides.
            env.step(action::LEFT).unwrap();
            let d = env.step(action::DROP).unwrap();
            assert_eq!(d.info.event_text, "dropped yellow key");
        } else {
            assert_eq!(dropped.info.event_text, "dropped yellow key");
        }
        face_cell(&mut env, ball);
        let r = env.step(action::PICKUP).unwrap();
        assert_eq!(r.info.event_text, "picked up purple ball");
        assert!(r.terminated && r.success);
        assert!(r.raw_reward > 0.0);
    }

    #[test]
    fn view_shows_carried_object_at_agent_cell() {
        let mut env = GridEnv::new(EnvId::DoorKey5);
        env.reset(42);
        let key = find(&env, |c| matches!(c, Cell::Key(_)));
        face_cell(&mut env, key);
        let r = env.step(action::PICKUP).unwrap();
        let Observation::Grid(g) = r.observation else { panic!() };
        assert_eq!(g.cells[3][6], [OBJ_KEY, Color::Yellow.index(), 0]);
    }
}
