//! The 2D grid world: cell placement, nano-agent movement, perception and
//! FIFO memory.

use std::collections::VecDeque;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::evolution::assign_resistance;
use crate::kinetics::{AgentState, NanoAgentGenome, ResistanceModifier};
use crate::rng::{rng_from_seed, SimRng};

pub type CellId = u32;
pub type AgentId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub row: usize,
    pub col: usize,
}

impl Position {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Fixed-length bit pattern by which nano-agents recognise cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VisibleSignature {
    bits: u64,
    len: u8,
}

impl VisibleSignature {
    pub fn new(bits: u64, len: u8) -> Self {
        assert!((1..=64).contains(&len), "signature length {len} outside [1, 64]");
        Self {
            bits: bits & Self::mask(len),
            len,
        }
    }

    pub fn zeros(len: u8) -> Self {
        Self::new(0, len)
    }

    pub fn random<R: Rng + ?Sized>(len: u8, rng: &mut R) -> Self {
        Self::new(rng.random::<u64>(), len)
    }

    fn mask(len: u8) -> u64 {
        if len == 64 {
            u64::MAX
        } else {
            (1u64 << len) - 1
        }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn flip(&mut self, bit: u8) {
        assert!(bit < self.len);
        self.bits ^= 1 << bit;
    }

    pub fn hamming(&self, other: &Self) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    #[serde(rename = "CC")]
    Cancer,
    #[serde(rename = "HC")]
    Healthy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellAgent {
    pub id: CellId,
    pub kind: CellKind,
    pub signature: VisibleSignature,
    pub resistance: Option<ResistanceModifier>,
    pub alive: bool,
    pub position: Position,
    /// Id of the initial cell this one descends from (itself for founders).
    pub founder: CellId,
}

impl CellAgent {
    pub fn new(
        id: CellId,
        kind: CellKind,
        signature: VisibleSignature,
        resistance: Option<ResistanceModifier>,
        position: Position,
    ) -> Self {
        Self {
            id,
            kind,
            signature,
            resistance,
            alive: true,
            position,
            founder: id,
        }
    }
}

/// Bounded FIFO of recognised signatures, oldest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Memory {
    capacity: usize,
    entries: VecDeque<VisibleSignature>,
}

impl Memory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "memory capacity must be at least 1");
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &VisibleSignature> {
        self.entries.iter()
    }

    /// Exact-match lookup.
    pub fn is_familiar(&self, sig: &VisibleSignature) -> bool {
        self.entries.contains(sig)
    }

    /// Appends `sig`, evicting and returning the oldest entry when full.
    ///
    /// `sig` must not already be remembered; callers check with
    /// [`Memory::is_familiar`] first.
    pub fn memorize(&mut self, sig: VisibleSignature) -> Result<Option<VisibleSignature>> {
        if self.is_familiar(&sig) {
            return Err(Error::Contract("signature is already memorized".into()));
        }
        self.entries.push_back(sig);
        Ok(if self.entries.len() > self.capacity {
            self.entries.pop_front()
        } else {
            None
        })
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NanoAgent {
    pub id: AgentId,
    pub genome: NanoAgentGenome,
    pub memory: Memory,
    pub state: AgentState,
    pub cc_killed: u64,
    pub hc_killed: u64,
    pub position: Position,
}

impl NanoAgent {
    pub fn new(id: AgentId, genome: NanoAgentGenome, position: Position, memory_capacity: usize) -> Self {
        Self {
            id,
            genome,
            memory: Memory::new(memory_capacity),
            state: AgentState::Free,
            cc_killed: 0,
            hc_killed: 0,
            position,
        }
    }
}

pub fn is_familiar(agent: &NanoAgent, sig: &VisibleSignature) -> bool {
    agent.memory.is_familiar(sig)
}

pub fn memorize(agent: &mut NanoAgent, sig: VisibleSignature) -> Result<Option<VisibleSignature>> {
    agent.memory.memorize(sig)
}

/// World-level event counters, never reset by selection.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldCounters {
    pub cc_killed: u64,
    pub hc_killed: u64,
    pub divisions: u64,
    pub internalizations: u64,
}

#[derive(Clone, Debug)]
pub struct GridWorld {
    width: usize,
    height: usize,
    /// Index into `cells` of the cell occupying each site, row-major. Dead
    /// cells stay referenced until a daughter overwrites the site.
    sites: Vec<Option<CellId>>,
    pub cells: Vec<CellAgent>,
    pub agents: Vec<NanoAgent>,
    pub rng: SimRng,
    pub step_index: u64,
    pub counters: WorldCounters,
    pub(crate) next_agent_id: AgentId,
    memory_capacity: usize,
}

const MOORE: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Builds the initial world for `config` and `seed`.
///
/// Cancer cells occupy the `cc_count` sites nearest the grid centre, healthy
/// cells the next `hc_count` sites; ties in distance are broken row-major so
/// the geometry does not depend on the seed. Cancer cells share one random
/// founder signature and healthy cells another, distinct one. A resistant
/// subset of cancer cells is then drawn with [`assign_resistance`]. No
/// nano-agents are placed; see [`GridWorld::populate_random`].
pub fn init_world(config: &SimConfig, seed: u64) -> Result<GridWorld> {
    config.validate()?;
    let wc = &config.world;
    let mut rng = rng_from_seed(seed);
    let (w, h) = (wc.width, wc.height);
    let centre = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);

    let mut order: Vec<Position> = (0..h).flat_map(|r| (0..w).map(move |c| Position::new(r, c))).collect();
    let dist2 = |p: &Position| {
        let dr = p.row as f64 - centre.0;
        let dc = p.col as f64 - centre.1;
        dr * dr + dc * dc
    };
    order.sort_by(|a, b| dist2(a).total_cmp(&dist2(b)).then(a.cmp(b)));

    let cc_sig = VisibleSignature::random(wc.signature_bits, &mut rng);
    let hc_sig = loop {
        let s = VisibleSignature::random(wc.signature_bits, &mut rng);
        if s != cc_sig {
            break s;
        }
    };

    let mut world = GridWorld {
        width: w,
        height: h,
        sites: vec![None; w * h],
        cells: Vec::with_capacity(wc.cc_count + wc.hc_count),
        agents: Vec::new(),
        rng,
        step_index: 0,
        counters: WorldCounters::default(),
        next_agent_id: 0,
        memory_capacity: wc.memory_capacity,
    };
    for (i, &pos) in order.iter().take(wc.cc_count + wc.hc_count).enumerate() {
        let (kind, sig) = if i < wc.cc_count {
            (CellKind::Cancer, cc_sig)
        } else {
            (CellKind::Healthy, hc_sig)
        };
        world.place_cell(kind, sig, None, pos, None);
    }

    let mut cc: Vec<&mut CellAgent> = world.cells.iter_mut().filter(|c| c.kind == CellKind::Cancer).collect();
    assign_resistance(&mut cc, &config.evolution, &mut world.rng);
    Ok(world)
}

impl GridWorld {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn memory_capacity(&self) -> usize {
        self.memory_capacity
    }

    fn site_index(&self, pos: Position) -> usize {
        pos.row * self.width + pos.col
    }

    pub fn in_bounds(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    /// Cell id recorded at `pos`, alive or dead.
    pub fn cell_id_at(&self, pos: Position) -> Option<CellId> {
        self.sites[self.site_index(pos)]
    }

    pub fn cell(&self, id: CellId) -> &CellAgent {
        &self.cells[id as usize]
    }

    pub fn cell_mut(&mut self, id: CellId) -> &mut CellAgent {
        &mut self.cells[id as usize]
    }

    pub fn living_cell_at(&self, pos: Position) -> Option<&CellAgent> {
        self.cell_id_at(pos).map(|id| self.cell(id)).filter(|c| c.alive)
    }

    pub fn has_living_cell(&self, pos: Position) -> bool {
        self.living_cell_at(pos).is_some()
    }

    /// In-bounds Moore neighbours of `pos`, in a fixed order.
    pub fn neighbours(&self, pos: Position) -> impl Iterator<Item = Position> + '_ {
        MOORE.iter().filter_map(move |&(dr, dc)| {
            let (r, c) = (pos.row as isize + dr, pos.col as isize + dc);
            self.in_bounds(r, c).then(|| Position::new(r as usize, c as usize))
        })
    }

    pub(crate) fn place_cell(
        &mut self,
        kind: CellKind,
        signature: VisibleSignature,
        resistance: Option<ResistanceModifier>,
        pos: Position,
        founder: Option<CellId>,
    ) -> CellId {
        debug_assert!(!self.has_living_cell(pos), "site {pos:?} already holds a living cell");
        let id = self.cells.len() as CellId;
        let mut cell = CellAgent::new(id, kind, signature, resistance, pos);
        if let Some(f) = founder {
            cell.founder = f;
        }
        self.cells.push(cell);
        let idx = self.site_index(pos);
        self.sites[idx] = Some(id);
        id
    }

    pub fn next_agent_id(&mut self) -> AgentId {
        let id = self.next_agent_id;
        self.next_agent_id += 1;
        id
    }

    /// Adds a free agent with empty memory at `pos`.
    pub fn spawn_agent(&mut self, genome: NanoAgentGenome, pos: Position) -> AgentId {
        let id = self.next_agent_id();
        self.agents.push(NanoAgent::new(id, genome, pos, self.memory_capacity));
        id
    }

    /// Places `genomes.len()` agents on uniformly random sites.
    pub fn populate_random(&mut self, genomes: &[NanoAgentGenome]) {
        for &g in genomes {
            let pos = Position::new(self.rng.random_range(0..self.height), self.rng.random_range(0..self.width));
            self.spawn_agent(g, pos);
        }
    }

    pub fn alive_count(&self, kind: CellKind) -> usize {
        self.cells.iter().filter(|c| c.alive && c.kind == kind).count()
    }

    /// Random walk of a free agent: up to `speed` uniform Moore hops, stopping
    /// on the first site that holds a living cell.
    pub fn move_agent(&mut self, agent_idx: usize) -> Position {
        let agent = &self.agents[agent_idx];
        debug_assert_eq!(agent.state, AgentState::Free);
        let mut pos = agent.position;
        let mut buf = [Position::new(0, 0); 8];
        for _ in 0..agent.genome.speed.max(1) {
            let mut n = 0;
            for p in self.neighbours(pos) {
                buf[n] = p;
                n += 1;
            }
            pos = *buf[..n].choose(&mut self.rng).expect("grid is at least 2x2");
            if self.has_living_cell(pos) {
                break;
            }
        }
        self.agents[agent_idx].position = pos;
        pos
    }

    /// The living cell at the agent's site, if any.
    pub fn perceive(&self, agent: &NanoAgent) -> Option<&CellAgent> {
        self.living_cell_at(agent.position)
    }

    /// Sites adjacent to `pos` that do not hold a living cell.
    pub fn empty_neighbours(&self, pos: Position) -> Vec<Position> {
        self.neighbours(pos).filter(|&p| !self.has_living_cell(p)).collect()
    }

    /// Full-grid audit: every living cell sits on the site that references
    /// it, and no two living cells share a site.
    pub fn check_site_uniqueness(&self) -> Result<()> {
        let mut seen = vec![false; self.width * self.height];
        for c in self.cells.iter().filter(|c| c.alive) {
            let idx = self.site_index(c.position);
            if seen[idx] {
                return Err(Error::Contract(format!("two living cells at {:?}", c.position)));
            }
            seen[idx] = true;
            if self.sites[idx] != Some(c.id) {
                return Err(Error::Contract(format!("site {:?} does not reference cell {}", c.position, c.id)));
            }
        }
        Ok(())
    }
}
