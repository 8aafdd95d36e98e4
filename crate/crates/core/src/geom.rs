//! Node placement, random-walk mobility and unit-disk connectivity.

use std::f64::consts::PI;

use crate::error::SimError;
use crate::kernel::RngStream;

/// Seconds between heading redraws in the random-walk model.
pub const LEG_SECONDS: f64 = 5.0;

/// Scenario area: a grid of candidate positions inside a larger
/// rectangular arena that bounds mobility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaSpec {
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub spacing: f64,
    pub area_w: f64,
    pub area_h: f64,
    pub radio_radius: f64,
}

impl AreaSpec {
    /// 50-node preset: 10x5 grid, 100 m spacing (900 m x 400 m span)
    /// inside a 1500 m x 1000 m arena.
    pub fn preset_50() -> Self {
        AreaSpec {
            grid_cols: 10,
            grid_rows: 5,
            spacing: 100.0,
            area_w: 1500.0,
            area_h: 1000.0,
            radio_radius: 125.0,
        }
    }

    /// 100-node preset: 10x10 grid (900 m x 900 m span) inside a
    /// 1500 m x 1500 m arena.
    pub fn preset_100() -> Self {
        AreaSpec {
            grid_cols: 10,
            grid_rows: 10,
            spacing: 100.0,
            area_w: 1500.0,
            area_h: 1500.0,
            radio_radius: 125.0,
        }
    }

    pub fn for_node_count(count: usize) -> Option<Self> {
        match count {
            50 => Some(Self::preset_50()),
            100 => Some(Self::preset_100()),
            _ => None,
        }
    }

    pub fn capacity(&self) -> usize {
        self.grid_cols * self.grid_rows
    }
}

/// Kinematic state of one node.
#[derive(Debug, Clone, Copy)]
pub struct NodePosition {
    pub node: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    /// Virtual time at which the current leg ends and a new heading is drawn.
    pub leg_end: f64,
    /// Time this position was last advanced to.
    pub updated_at: f64,
}

impl NodePosition {
    pub fn stationary(node: usize, x: f64, y: f64) -> Self {
        NodePosition {
            node,
            x,
            y,
            heading: 0.0,
            speed: 0.0,
            leg_end: LEG_SECONDS,
            updated_at: 0.0,
        }
    }
}

/// Assign `count` nodes to distinct grid intersections via a seeded
/// random permutation.
pub fn place_grid(
    count: usize,
    area: &AreaSpec,
    rng: &mut RngStream,
) -> Result<Vec<NodePosition>, SimError> {
    let capacity = area.capacity();
    if count > capacity {
        return Err(SimError::GridCapacity { count, capacity });
    }
    let mut cells: Vec<usize> = (0..capacity).collect();
    rng.shuffle(&mut cells);
    Ok(cells
        .into_iter()
        .take(count)
        .enumerate()
        .map(|(node, cell)| {
            let col = cell % area.grid_cols;
            let row = cell / area.grid_cols;
            NodePosition::stationary(node, col as f64 * area.spacing, row as f64 * area.spacing)
        })
        .collect())
}

/// Give every node the scenario speed and an initial uniform-random
/// heading. Stationary scenarios draw nothing.
pub fn init_mobility(positions: &mut [NodePosition], speed: f64, rng: &mut RngStream) {
    if speed == 0.0 {
        return;
    }
    for pos in positions.iter_mut() {
        pos.speed = speed;
        pos.heading = rng.uniform(0.0, 2.0 * PI).expect("valid range");
        pos.leg_end = LEG_SECONDS;
    }
}

/// Advance a node's position to `now`, redrawing the heading at each
/// 5-second leg boundary and reflecting at the arena bounds.
pub fn step_mobility(pos: &mut NodePosition, now: f64, area: &AreaSpec, rng: &mut RngStream) {
    if pos.speed == 0.0 {
        pos.updated_at = now;
        return;
    }
    while pos.updated_at < now {
        let seg_end = pos.leg_end.min(now);
        let dt = seg_end - pos.updated_at;
        advance(pos, dt, area);
        pos.updated_at = seg_end;
        if pos.updated_at >= pos.leg_end {
            pos.heading = rng.uniform(0.0, 2.0 * PI).expect("valid range");
            pos.leg_end += LEG_SECONDS;
        }
    }
}

fn advance(pos: &mut NodePosition, dt: f64, area: &AreaSpec) {
    pos.x += pos.speed * dt * pos.heading.cos();
    pos.y += pos.speed * dt * pos.heading.sin();
    // Reflect until back inside; a single step is short relative to the
    // arena, so this loops at most a couple of times near corners.
    loop {
        let mut reflected = false;
        if pos.x < 0.0 {
            pos.x = -pos.x;
            pos.heading = PI - pos.heading;
            reflected = true;
        } else if pos.x > area.area_w {
            pos.x = 2.0 * area.area_w - pos.x;
            pos.heading = PI - pos.heading;
            reflected = true;
        }
        if pos.y < 0.0 {
            pos.y = -pos.y;
            pos.heading = -pos.heading;
            reflected = true;
        } else if pos.y > area.area_h {
            pos.y = 2.0 * area.area_h - pos.y;
            pos.heading = -pos.heading;
            reflected = true;
        }
        if !reflected {
            break;
        }
    }
    pos.heading = pos.heading.rem_euclid(2.0 * PI);
}

/// Two nodes communicate iff their Euclidean distance is within the
/// radio radius (closed boundary).
pub fn in_range(a: &NodePosition, b: &NodePosition, radius: f64) -> bool {
    dist2(a, b) <= radius * radius
}

pub fn dist2(a: &NodePosition, b: &NodePosition) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn preset_50_matches_layout() {
        let a = AreaSpec::preset_50();
        assert_eq!((a.grid_cols, a.grid_rows), (10, 5));
        assert_eq!(a.spacing, 100.0);
        assert_eq!((a.area_w, a.area_h), (1500.0, 1000.0));
        assert_eq!(a.radio_radius, 125.0);
        assert_eq!(a.capacity(), 50);
    }

    #[test]
    fn place_grid_50_covers_the_grid() {
        let area = AreaSpec::preset_50();
        let mut rng = RngStream::new(11, "placement");
        let placed = place_grid(50, &area, &mut rng).unwrap();
        assert_eq!(placed.len(), 50);
        let cells: HashSet<(i64, i64)> = placed
            .iter()
            .map(|p| (p.x.round() as i64, p.y.round() as i64))
            .collect();
        assert_eq!(cells.len(), 50, "positions are distinct");
        for (x, y) in &cells {
            assert!((0..=900).contains(x) && x % 100 == 0);
            assert!((0..=400).contains(y) && y % 100 == 0);
        }
    }

    #[test]
    fn place_grid_100_spans_900_square() {
        let area = AreaSpec::preset_100();
        let mut rng = RngStream::new(5, "placement");
        let placed = place_grid(100, &area, &mut rng).unwrap();
        let max_x = placed.iter().map(|p| p.x).fold(0.0, f64::max);
        let max_y = placed.iter().map(|p| p.y).fold(0.0, f64::max);
        assert_eq!((max_x, max_y), (900.0, 900.0));
        assert_eq!((area.area_w, area.area_h), (1500.0, 1500.0));
    }

    #[test]
    fn place_grid_two_nodes() {
        let area = AreaSpec {
            grid_cols: 2,
            grid_rows: 1,
            spacing: 100.0,
            area_w: 200.0,
            area_h: 100.0,
            radio_radius: 125.0,
        };
        let mut rng = RngStream::new(0, "placement");
        let placed = place_grid(2, &area, &mut rng).unwrap();
        let cells: HashSet<(i64, i64)> = placed
            .iter()
            .map(|p| (p.x.round() as i64, p.y.round() as i64))
            .collect();
        assert_eq!(cells, HashSet::from([(0, 0), (100, 0)]));
    }

    #[test]
    fn place_grid_rejects_overflow() {
        let area = AreaSpec::preset_50();
        let mut rng = RngStream::new(0, "placement");
        assert!(matches!(
            place_grid(51, &area, &mut rng),
            Err(SimError::GridCapacity { .. })
        ));
    }

    #[test]
    fn in_range_examples() {
        let a = NodePosition::stationary(0, 0.0, 0.0);
        let b = NodePosition::stationary(1, 100.0, 0.0);
        let c = NodePosition::stationary(2, 100.0, 100.0);
        let d = NodePosition::stationary(3, 125.0, 0.0);
        assert!(in_range(&a, &b, 125.0), "grid neighbors at 100 m");
        assert!(!in_range(&a, &c, 125.0), "diagonal at ~141.4 m");
        assert!(in_range(&a, &d, 125.0), "exactly 125 m is in range");
    }

    #[test]
    fn in_range_is_symmetric() {
        let mut rng = RngStream::new(17, "t");
        for _ in 0..200 {
            let a = NodePosition::stationary(
                0,
                rng.uniform(0.0, 1500.0).unwrap(),
                rng.uniform(0.0, 1000.0).unwrap(),
            );
            let b = NodePosition::stationary(
                1,
                rng.uniform(0.0, 1500.0).unwrap(),
                rng.uniform(0.0, 1000.0).unwrap(),
            );
            assert_eq!(in_range(&a, &b, 125.0), in_range(&b, &a, 125.0));
        }
    }

    /// With speed=0 on the preset grid, connectivity is exactly the
    /// 4-neighbor grid graph.
    #[test]
    fn stationary_grid_connectivity_matches_grid_graph() {
        let area = AreaSpec::preset_50();
        let mut rng = RngStream::new(23, "placement");
        let placed = place_grid(50, &area, &mut rng).unwrap();
        for a in &placed {
            for b in &placed {
                if a.node == b.node {
                    continue;
                }
                let dx = (a.x - b.x).abs();
                let dy = (a.y - b.y).abs();
                let grid_neighbor = (dx == 100.0 && dy == 0.0) || (dx == 0.0 && dy == 100.0);
                assert_eq!(
                    in_range(a, b, area.radio_radius),
                    grid_neighbor,
                    "nodes {} and {}",
                    a.node,
                    b.node
                );
            }
        }
    }

    #[test]
    fn zero_speed_never_moves() {
        let area = AreaSpec::preset_50();
        let mut rng = RngStream::new(1, "mobility");
        let mut pos = NodePosition::stationary(0, 300.0, 200.0);
        step_mobility(&mut pos, 100.0, &area, &mut rng);
        assert_eq!((pos.x, pos.y), (300.0, 200.0));
    }

    #[test]
    fn straight_leg_advances_linearly() {
        let area = AreaSpec::preset_50();
        let mut rng = RngStream::new(1, "mobility");
        let mut pos = NodePosition::stationary(0, 100.0, 200.0);
        pos.speed = 4.0;
        pos.heading = 0.0;
        step_mobility(&mut pos, 1.0, &area, &mut rng);
        assert!((pos.x - 104.0).abs() < 1e-9);
        assert!((pos.y - 200.0).abs() < 1e-9);
    }

    #[test]
    fn trajectory_is_deterministic_across_reruns() {
        let area = AreaSpec::preset_50();
        let run = || {
            let mut rng = RngStream::new(77, "mobility");
            let mut pos = NodePosition::stationary(0, 450.0, 300.0);
            pos.speed = 8.0;
            pos.heading = rng.uniform(0.0, 2.0 * PI).unwrap();
            let mut track = Vec::new();
            for step in 1..=400 {
                step_mobility(&mut pos, step as f64 * 0.1, &area, &mut rng);
                track.push((pos.x, pos.y));
            }
            track
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn mobility_stays_within_bounds() {
        let area = AreaSpec::preset_50();
        let mut rng = RngStream::new(13, "mobility");
        let mut pos = NodePosition::stationary(0, 10.0, 990.0);
        pos.speed = 8.0;
        pos.heading = 2.0; // up and to the left, hits the top edge
        for step in 1..=2000 {
            step_mobility(&mut pos, step as f64 * 0.1, &area, &mut rng);
            assert!((0.0..=area.area_w).contains(&pos.x), "x={}", pos.x);
            assert!((0.0..=area.area_h).contains(&pos.y), "y={}", pos.y);
        }
    }
}
