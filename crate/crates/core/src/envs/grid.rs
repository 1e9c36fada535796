use std::path::Path;

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

pub type Cell = (usize, usize);

/// Moves in action-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Deterministic grid world: reward 1 on entering the terminal cell, 0
/// otherwise. Off-grid moves and moves into walls leave the agent in place.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorldSpec {
    pub rows: usize,
    pub cols: usize,
    pub start: Cell,
    pub terminal: Cell,
    pub walls: Vec<Cell>,
    pub gamma: f64,
}

impl Default for GridWorldSpec {
    fn default() -> Self {
        GridWorldSpec {
            rows: 4,
            cols: 6,
            start: (0, 0),
            terminal: (3, 5),
            walls: Vec::new(),
            gamma: 0.95,
        }
    }
}

impl GridWorldSpec {
    /// Parses a layout of `.`, `S`, `T` and `#` characters, one row per line.
    pub fn parse_layout(text: &str, gamma: f64) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        if lines.is_empty() {
            return Err(Error::Spec("empty layout".into()));
        }
        let cols = lines[0].chars().count();
        let (mut start, mut terminal, mut walls) = (None, None, Vec::new());
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(Error::Spec(format!("layout row {r} has {} cells, expected {cols}", line.chars().count())));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '.' => {}
                    '#' => walls.push((r, c)),
                    'S' if start.is_none() => start = Some((r, c)),
                    'T' if terminal.is_none() => terminal = Some((r, c)),
                    'S' | 'T' => return Err(Error::Spec(format!("duplicate '{ch}' at ({r}, {c})"))),
                    other => return Err(Error::Spec(format!("unexpected character {other:?} at ({r}, {c})"))),
                }
            }
        }
        let spec = GridWorldSpec {
            rows: lines.len(),
            cols,
            start: start.ok_or_else(|| Error::Spec("layout has no 'S'".into()))?,
            terminal: terminal.ok_or_else(|| Error::Spec("layout has no 'T'".into()))?,
            walls,
            gamma,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_layout_file(path: impl AsRef<Path>, gamma: f64) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_layout(&text, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |(r, c): Cell| r < self.rows && c < self.cols;
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Spec("grid must be non-empty".into()));
        }
        if !inside(self.start) || !inside(self.terminal) {
            return Err(Error::Spec("start and terminal must lie inside the grid".into()));
        }
        if self.start == self.terminal {
            return Err(Error::Spec("start and terminal must differ".into()));
        }
        if self.walls.iter().any(|&w| !inside(w) || w == self.start || w == self.terminal) {
            return Err(Error::Spec("walls must be inside the grid and off S/T".into()));
        }
        Ok(())
    }

    /// Renders the layout in the same format [`parse_layout`](Self::parse_layout) reads.
    pub fn to_layout(&self) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(if (r, c) == self.start {
                    'S'
                } else if (r, c) == self.terminal {
                    'T'
                } else if self.walls.contains(&(r, c)) {
                    '#'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out
    }
}

/// A validated grid world with its state indexing (row-major over open cells).
#[derive(Debug, Clone)]
pub struct GridWorld {
    spec: GridWorldSpec,
    cell_state: Vec<Option<usize>>,
    state_cell: Vec<Cell>,
}

impl GridWorld {
    pub fn new(spec: GridWorldSpec) -> Result<Self> {
        spec.validate()?;
        let mut cell_state = vec![None; spec.rows * spec.cols];
        let mut state_cell = Vec::new();
        for r in 0..spec.rows {
            for c in 0..spec.cols {
                if !spec.walls.contains(&(r, c)) {
                    cell_state[r * spec.cols + c] = Some(state_cell.len());
                    state_cell.push((r, c));
                }
            }
        }
        Ok(GridWorld {
            spec,
            cell_state,
            state_cell,
        })
    }

    pub fn spec(&self) -> &GridWorldSpec {
        &self.spec
    }

    pub fn n_states(&self) -> usize {
        self.state_cell.len()
    }

    pub fn state_of(&self, (r, c): Cell) -> Option<usize> {
        if r >= self.spec.rows || c >= self.spec.cols {
            return None;
        }
        self.cell_state[r * self.spec.cols + c]
    }

    pub fn cell_of(&self, s: usize) -> Cell {
        self.state_cell[s]
    }

    pub fn start_state(&self) -> usize {
        self.state_of(self.spec.start).expect("validated start")
    }

    pub fn terminal_state(&self) -> usize {
        self.state_of(self.spec.terminal).expect("validated terminal")
    }

    /// Cell reached by `mv` from `cell`; blocked moves stay put.
    pub fn next_cell(&self, (r, c): Cell, mv: Move) -> Cell {
        let target = match mv {
            Move::Up => r.checked_sub(1).map(|r| (r, c)),
            Move::Down => Some((r + 1, c)),
            Move::Left => c.checked_sub(1).map(|c| (r, c)),
            Move::Right => Some((r, c + 1)),
        };
        match target {
            Some(t) if self.state_of(t).is_some() => t,
            _ => (r, c),
        }
    }

    pub fn to_mdp(&self) -> Result<TabularMdp> {
        let n = self.n_states();
        let na = Move::ALL.len();
        let goal = self.terminal_state();
        let mut transition = vec![0.0; n * na * n];
        let mut reward = vec![0.0; n * na];
        for s in 0..n {
            for mv in Move::ALL {
                let a = mv.index();
                let next = if s == goal {
                    s
                } else {
                    self.state_of(self.next_cell(self.cell_of(s), mv)).expect("open cell")
                };
                transition[(s * na + a) * n + next] = 1.0;
                if s != goal && next == goal {
                    reward[s * na + a] = 1.0;
                }
            }
        }
        let terminal = (0..n).map(|s| s == goal).collect();
        let mut initial = vec![0.0; n];
        initial[self.start_state()] = 1.0;
        TabularMdp::new(n, na, transition, reward, self.spec.gamma, terminal, initial)
    }
}

pub fn gridworld_to_mdp(spec: &GridWorldSpec) -> Result<TabularMdp> {
    GridWorld::new(spec.clone())?.to_mdp()
}
