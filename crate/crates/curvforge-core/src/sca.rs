//! Space-colonization growth of curvilinear trees.
//!
//! A tree grows from root nodes toward a field of attractor points. Each
//! iteration: every live attractor picks the nearest node within the
//! attraction distance; each node with at least one assigned attractor spawns
//! a child one segment length along the average pull direction; attractors
//! with any node inside their kill distance are then removed. Growth halts at
//! the node cap or when a full step spawns nothing. Branch radii follow the
//! cubed-radius branching rule (leaf radius 1, parent^n = sum of child^n).
//!
//! Given the same [`GrowthConfig`] (seed included), [`grow`] is bit-for-bit
//! reproducible across runs and platforms.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geom::{Point2, Region};
use crate::rng::{stream_rng, STREAM_ATTRACTORS, STREAM_OBSTACLES, STREAM_ROOTS};

/// Average pull directions shorter than this are treated as zero (no spawn).
const MIN_AVERAGE_NORM: f64 = 1e-9;
/// Attempts to draw a boxed root landing inside the bound and outside
/// obstacles before giving up.
const ROOT_SAMPLE_ATTEMPTS: u32 = 10_000;

/// Where root nodes come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RootSpec {
    /// Explicit root positions, used verbatim.
    FixedPoints { points: Vec<Point2> },
    /// One root drawn uniformly from an axis-aligned box; draws landing
    /// outside the bound or inside an obstacle are redrawn.
    UniformBox {
        x_range: (f64, f64),
        y_range: (f64, f64),
    },
}

/// An exclusion zone, either fixed or with a per-tree sampled radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObstacleSpec {
    /// A fixed region.
    Fixed { region: Region },
    /// A circle whose radius is drawn uniformly from `radius_range`
    /// (inclusive) once per tree.
    CircleRadiusRange {
        center: Point2,
        radius_range: (f64, f64),
    },
}

/// Full parameter set for growing one tree.
///
/// `attraction_distance` is the farthest an attractor reaches when pulling
/// growth; `kill_distance` is the radius around an attractor within which an
/// arriving node consumes it. Healthy growth needs the kill distance well
/// below the attraction distance, otherwise attractors die before they can
/// steer anything (validation warns about that).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfig {
    /// Region every node must stay inside.
    pub bound: Region,
    /// Exclusion zones no node may enter.
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    /// Root placement.
    pub roots: RootSpec,
    /// Attractors start as an `attractor_grid` x `attractor_grid` lattice
    /// over the bound's bounding box.
    pub attractor_grid: u32,
    /// Uniform per-axis jitter (pixels) applied to each lattice point.
    #[serde(default)]
    pub jitter: f64,
    /// Maximum node-to-attractor distance at which the attractor pulls.
    #[serde(default = "default_attraction_distance")]
    pub attraction_distance: f64,
    /// Node-to-attractor distance below which the attractor is consumed.
    #[serde(default = "default_kill_distance")]
    pub kill_distance: f64,
    /// Length of every spawned edge (pixels).
    #[serde(default = "default_segment_length")]
    pub segment_length: f64,
    /// Growth stops once the node list reaches this size.
    pub max_nodes: usize,
    /// Exponent n of the branching rule parent^n = sum child^n.
    #[serde(default = "default_murray_exponent")]
    pub murray_exponent: f64,
    /// Seed for all randomness in this tree.
    #[serde(default)]
    pub seed: u64,
}

fn default_attraction_distance() -> f64 {
    30.0
}

fn default_kill_distance() -> f64 {
    5.0
}

fn default_segment_length() -> f64 {
    5.0
}

fn default_murray_exponent() -> f64 {
    3.0
}

/// Configuration or root-placement failure.
#[derive(Debug, Error)]
pub enum GrowthError {
    #[error("invalid growth config: {0}")]
    InvalidConfig(String),
    #[error("root {index} at ({x}, {y}) rejected: {reason}")]
    RootRejected {
        index: usize,
        x: f64,
        y: f64,
        reason: String,
    },
    #[error("no root inside the bound after {attempts} draws from the root box")]
    RootSamplingExhausted { attempts: u32 },
}

impl GrowthConfig {
    /// Validate the config. Returns human-readable warnings for legal but
    /// suspicious settings; hard violations are errors.
    pub fn validate(&self) -> Result<Vec<String>, GrowthError> {
        let err = |m: String| Err(GrowthError::InvalidConfig(m));
        if !self.bound.is_valid() {
            return err(format!("bound is degenerate: {:?}", self.bound));
        }
        for (i, ob) in self.obstacles.iter().enumerate() {
            match ob {
                ObstacleSpec::Fixed { region } => {
                    if !region.is_valid() {
                        return err(format!("obstacle {i} is degenerate: {region:?}"));
                    }
                }
                ObstacleSpec::CircleRadiusRange {
                    center,
                    radius_range: (lo, hi),
                } => {
                    if !center.is_finite() || !lo.is_finite() || !hi.is_finite() {
                        return err(format!("obstacle {i} has non-finite geometry"));
                    }
                    if !(*lo > 0.0 && lo <= hi) {
                        return err(format!(
                            "obstacle {i} radius range [{lo}, {hi}] must satisfy 0 < lo <= hi"
                        ));
                    }
                }
            }
        }
        match &self.roots {
            RootSpec::FixedPoints { points } => {
                if points.is_empty() {
                    return err("roots.points is empty".into());
                }
                if let Some(p) = points.iter().find(|p| !p.is_finite()) {
                    return err(format!("root point ({}, {}) is not finite", p.x, p.y));
                }
            }
            RootSpec::UniformBox { x_range, y_range } => {
                for (axis, (lo, hi)) in [("x", x_range), ("y", y_range)] {
                    if !lo.is_finite() || !hi.is_finite() || lo > hi {
                        return err(format!("root box {axis}_range [{lo}, {hi}] is invalid"));
                    }
                }
            }
        }
        if self.attractor_grid < 1 {
            return err("attractor_grid must be >= 1".into());
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return err(format!("jitter {} must be finite and >= 0", self.jitter));
        }
        for (name, v) in [
            ("attraction_distance", self.attraction_distance),
            ("kill_distance", self.kill_distance),
            ("segment_length", self.segment_length),
            ("murray_exponent", self.murray_exponent),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return err(format!("{name} {v} must be finite and > 0"));
            }
        }
        if self.max_nodes < 1 {
            return err("max_nodes must be >= 1".into());
        }

        let mut warnings = Vec::new();
        if self.kill_distance >= self.attraction_distance {
            warnings.push(format!(
                "kill_distance ({}) >= attraction_distance ({}): attractors die before \
                 they can steer growth, expect stunted trees",
                self.kill_distance, self.attraction_distance
            ));
        }
        Ok(warnings)
    }
}

/// A growth target. Dead attractors never revive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Attractor {
    pub pos: Point2,
    pub alive: bool,
}

/// One node of a grown tree. `parent` is always a smaller index (creation
/// order), so parents precede children in the node list. `radius` is 0 until
/// [`compute_radii`] assigns it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveNode {
    pub pos: Point2,
    pub parent: Option<usize>,
    pub radius: f64,
}

/// A grown tree: nodes in creation order plus a digest of the config that
/// produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveTree {
    pub nodes: Vec<CurveNode>,
    pub config_hash: String,
}

/// SHA-256 (hex) of the config's canonical JSON form. Serde emits struct
/// fields in declaration order, so the digest is stable for equal configs.
pub fn config_hash(config: &GrowthConfig) -> String {
    let json = serde_json::to_string(config).expect("growth config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Draw concrete obstacle regions for one tree. Radius ranges are resolved
/// with one uniform draw each, in declaration order, from the obstacle
/// stream.
pub fn resolve_obstacles(config: &GrowthConfig, rng: &mut ChaCha8Rng) -> Vec<Region> {
    config
        .obstacles
        .iter()
        .map(|ob| match ob {
            ObstacleSpec::Fixed { region } => region.clone(),
            ObstacleSpec::CircleRadiusRange {
                center,
                radius_range: (lo, hi),
            } => Region::Circle {
                center: *center,
                radius: rng.random_range(*lo..=*hi),
            },
        })
        .collect()
}

fn position_allowed(p: &Point2, bound: &Region, obstacles: &[Region]) -> bool {
    bound.contains(p) && obstacles.iter().all(|ob| !ob.contains(p))
}

/// Lay an `attractor_grid` x `attractor_grid` lattice of cell centers over
/// the bound's bounding box, jitter each point uniformly in
/// `[-jitter, +jitter]` per axis (x drawn before y), and drop points outside
/// the bound or inside an obstacle. Order is row-major (x varies fastest).
/// Jitter is drawn for every lattice point, including ones later dropped, so
/// the draw schedule depends only on `attractor_grid`.
pub fn place_attractors(
    config: &GrowthConfig,
    obstacles: &[Region],
    rng: &mut ChaCha8Rng,
) -> Vec<Attractor> {
    let (lo, hi) = config.bound.bbox();
    let n = config.attractor_grid as usize;
    let cell_w = (hi.x - lo.x) / n as f64;
    let cell_h = (hi.y - lo.y) / n as f64;
    let j = config.jitter;
    let mut out = Vec::new();
    for row in 0..n {
        for col in 0..n {
            let dx = rng.random_range(-j..=j);
            let dy = rng.random_range(-j..=j);
            let p = Point2::new(
                lo.x + (col as f64 + 0.5) * cell_w + dx,
                lo.y + (row as f64 + 0.5) * cell_h + dy,
            );
            if position_allowed(&p, &config.bound, obstacles) {
                out.push(Attractor { pos: p, alive: true });
            }
        }
    }
    out
}

/// Materialize root nodes. Fixed points are used verbatim and rejected with
/// an error if they violate the bound or an obstacle; a box spec draws
/// (x then y) until the point is admissible, erroring after
/// [`ROOT_SAMPLE_ATTEMPTS`] tries.
pub fn init_roots(
    config: &GrowthConfig,
    obstacles: &[Region],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<CurveNode>, GrowthError> {
    let mut roots = Vec::new();
    match &config.roots {
        RootSpec::FixedPoints { points } => {
            for (index, p) in points.iter().enumerate() {
                if !position_allowed(p, &config.bound, obstacles) {
                    let reason = if !config.bound.contains(p) {
                        "outside the bound"
                    } else {
                        "inside an obstacle"
                    };
                    return Err(GrowthError::RootRejected {
                        index,
                        x: p.x,
                        y: p.y,
                        reason: reason.to_string(),
                    });
                }
                roots.push(CurveNode {
                    pos: *p,
                    parent: None,
                    radius: 0.0,
                });
            }
        }
        RootSpec::UniformBox { x_range, y_range } => {
            let mut placed = false;
            for _ in 0..ROOT_SAMPLE_ATTEMPTS {
                let p = Point2::new(
                    rng.random_range(x_range.0..=x_range.1),
                    rng.random_range(y_range.0..=y_range.1),
                );
                if position_allowed(&p, &config.bound, obstacles) {
                    roots.push(CurveNode {
                        pos: p,
                        parent: None,
                        radius: 0.0,
                    });
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(GrowthError::RootSamplingExhausted {
                    attempts: ROOT_SAMPLE_ATTEMPTS,
                });
            }
        }
    }
    Ok(roots)
}

/// Index of the nearest node within `attraction_distance` of the attractor,
/// or `None`. Ties go to the lowest node index.
pub fn influencer_of(
    attractor: &Attractor,
    nodes: &[CurveNode],
    attraction_distance: f64,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, node) in nodes.iter().enumerate() {
        let d = attractor.pos.dist(&node.pos);
        if d <= attraction_distance && best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Child position for a node pulled by the given attractor positions: unit
/// node-to-attractor vectors are averaged; `None` when the average norm falls
/// below 1e-9 (opposing pulls cancel). An attractor exactly on the node
/// contributes nothing but still counts toward the average's denominator.
fn spawn_position(node: &Point2, pulls: &[Point2], segment_length: f64) -> Option<Point2> {
    let mut sx = 0.0;
    let mut sy = 0.0;
    for a in pulls {
        let dx = a.x - node.x;
        let dy = a.y - node.y;
        let d = (dx * dx + dy * dy).sqrt();
        if d == 0.0 {
            continue;
        }
        sx += dx / d;
        sy += dy / d;
    }
    let k = pulls.len() as f64;
    let ax = sx / k;
    let ay = sy / k;
    let norm = (ax * ax + ay * ay).sqrt();
    if norm < MIN_AVERAGE_NORM {
        return None;
    }
    Some(Point2::new(
        node.x + (ax / norm) * segment_length,
        node.y + (ay / norm) * segment_length,
    ))
}

/// Static spatial hash over attractor positions. Cell size equals the query
/// radius, so a disk query touches at most a 3x3 cell block.
struct AttractorGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl AttractorGrid {
    fn build(attractors: &[Attractor], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, a) in attractors.iter().enumerate() {
            buckets.entry(Self::key(&a.pos, cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(p: &Point2, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }
}

/// Incremental growth state. Step it manually for instrumentation, or let
/// [`grow`] drive it to completion.
///
/// Internally each live attractor tracks its nearest node (exact within
/// `max(attraction_distance, kill_distance)`); attractors farther than that
/// from every node can neither pull nor die, so the record never needs to
/// reach farther.
pub struct Growth {
    config: GrowthConfig,
    obstacles: Vec<Region>,
    nodes: Vec<CurveNode>,
    attractors: Vec<Attractor>,
    /// Per attractor: (nearest node index, distance); `usize::MAX` = none yet.
    near: Vec<(usize, f64)>,
    grid: AttractorGrid,
    track_radius: f64,
}

impl Growth {
    /// Validate the config, resolve obstacles, place attractors, and set
    /// roots. Each concern draws from its own rng stream of `config.seed`.
    pub fn new(config: &GrowthConfig) -> Result<Self, GrowthError> {
        config.validate()?;
        let obstacles = resolve_obstacles(config, &mut stream_rng(config.seed, STREAM_OBSTACLES));
        let attractors = place_attractors(
            config,
            &obstacles,
            &mut stream_rng(config.seed, STREAM_ATTRACTORS),
        );
        let roots = init_roots(config, &obstacles, &mut stream_rng(config.seed, STREAM_ROOTS))?;
        let track_radius = config.attraction_distance.max(config.kill_distance);
        let grid = AttractorGrid::build(&attractors, track_radius);
        let mut growth = Self {
            config: config.clone(),
            obstacles,
            nodes: Vec::new(),
            attractors,
            near: vec![(usize::MAX, f64::INFINITY); 0],
            grid,
            track_radius,
        };
        growth.near = vec![(usize::MAX, f64::INFINITY); growth.attractors.len()];
        for root in roots {
            let idx = growth.nodes.len();
            growth.nodes.push(root);
            growth.register_node(idx);
        }
        Ok(growth)
    }

    /// Fold node `idx` into every nearby attractor's nearest-node record.
    /// Strict `<` keeps the lowest node index on distance ties.
    fn register_node(&mut self, idx: usize) {
        let p = self.nodes[idx].pos;
        let r = self.track_radius;
        let cell = self.grid.cell;
        let (cx0, cy0) = AttractorGrid::key(&Point2::new(p.x - r, p.y - r), cell);
        let (cx1, cy1) = AttractorGrid::key(&Point2::new(p.x + r, p.y + r), cell);
        for cx in cx0..=cx1 {
            for cy in cy0..=cy1 {
                let Some(bucket) = self.grid.buckets.get(&(cx, cy)) else {
                    continue;
                };
                for &ai in bucket {
                    if !self.attractors[ai].alive {
                        continue;
                    }
                    let d = self.attractors[ai].pos.dist(&p);
                    if d <= r && d < self.near[ai].1 {
                        self.near[ai] = (idx, d);
                    }
                }
            }
        }
    }

    /// One growth iteration: assign attractors to nearest nodes, spawn
    /// children (skipping degenerate averages and disallowed positions,
    /// stopping at the node cap), then kill attractors that now have a node
    /// within the kill distance. Returns the number of nodes spawned.
    pub fn step(&mut self) -> usize {
        // Assignment: BTreeMap gives node-index iteration order; pushing in
        // ascending attractor index keeps each pull list index-ordered.
        let mut assignments: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for ai in 0..self.attractors.len() {
            if !self.attractors[ai].alive {
                continue;
            }
            let (node, dist) = self.near[ai];
            if node != usize::MAX && dist <= self.config.attraction_distance {
                assignments.entry(node).or_default().push(ai);
            }
        }

        let mut spawned = 0;
        for (&node_idx, atts) in &assignments {
            if self.nodes.len() >= self.config.max_nodes {
                break;
            }
            let pulls: Vec<Point2> = atts.iter().map(|&ai| self.attractors[ai].pos).collect();
            let node_pos = self.nodes[node_idx].pos;
            let Some(pos) = spawn_position(&node_pos, &pulls, self.config.segment_length) else {
                continue;
            };
            if !position_allowed(&pos, &self.config.bound, &self.obstacles) {
                continue;
            }
            let idx = self.nodes.len();
            self.nodes.push(CurveNode {
                pos,
                parent: Some(node_idx),
                radius: 0.0,
            });
            self.register_node(idx);
            spawned += 1;
        }

        for ai in 0..self.attractors.len() {
            if !self.attractors[ai].alive {
                continue;
            }
            let (node, dist) = self.near[ai];
            if node != usize::MAX && dist <= self.config.kill_distance {
                self.attractors[ai].alive = false;
            }
        }
        spawned
    }

    /// Step until the node cap is reached or a step spawns nothing.
    pub fn run(&mut self) {
        loop {
            if self.nodes.len() >= self.config.max_nodes {
                break;
            }
            if self.step() == 0 {
                break;
            }
        }
    }

    /// Nodes created so far, in creation order.
    pub fn nodes(&self) -> &[CurveNode] {
        &self.nodes
    }

    /// All attractors with their live/dead flags.
    pub fn attractors(&self) -> &[Attractor] {
        &self.attractors
    }

    /// Obstacle regions with sampled radii resolved.
    pub fn obstacles(&self) -> &[Region] {
        &self.obstacles
    }

    /// The validated config this growth runs under.
    pub fn config(&self) -> &GrowthConfig {
        &self.config
    }

    /// Finish into a tree tagged with the config digest.
    pub fn into_tree(self) -> CurveTree {
        CurveTree {
            nodes: self.nodes,
            config_hash: config_hash(&self.config),
        }
    }
}

/// Grow one tree to completion. Pure in (config, seed): reruns produce
/// identical node lists. Roots always materialize, even when they already
/// meet or exceed `max_nodes` (no growth happens then).
pub fn grow(config: &GrowthConfig) -> Result<CurveTree, GrowthError> {
    let mut growth = Growth::new(config)?;
    growth.run();
    Ok(growth.into_tree())
}

/// Assign branch radii: leaves get exactly 1, a single-child node copies its
/// child, and a node with k >= 2 children gets (sum child^n)^(1/n). Children
/// always have larger indices than parents, so one reverse pass suffices.
pub fn compute_radii(mut tree: CurveTree, n: f64) -> CurveTree {
    let len = tree.nodes.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); len];
    for (i, node) in tree.nodes.iter().enumerate() {
        if let Some(p) = node.parent {
            children[p].push(i);
        }
    }
    for i in (0..len).rev() {
        tree.nodes[i].radius = match children[i].as_slice() {
            [] => 1.0,
            [only] => tree.nodes[*only].radius,
            kids => kids
                .iter()
                .map(|&c| tree.nodes[c].radius.powf(n))
                .sum::<f64>()
                .powf(1.0 / n),
        };
    }
    tree
}

/// Bundle two trees for joint rasterization; empty trees are dropped and no
/// geometry changes.
/// Scale node positions and radii by one factor, shrinking (or enlarging) a
/// grown tree onto a raster canvas of a different size.
pub fn scale_tree(mut tree: CurveTree, factor: f64) -> CurveTree {
    assert!(factor.is_finite() && factor > 0.0, "scale factor {factor}");
    for node in &mut tree.nodes {
        node.pos.x *= factor;
        node.pos.y *= factor;
        node.radius *= factor;
    }
    tree
}

pub fn union_trees(a: CurveTree, b: CurveTree) -> Vec<CurveTree> {
    [a, b]
        .into_iter()
        .filter(|t| !t.nodes.is_empty())
        .collect()
}
