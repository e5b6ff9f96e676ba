//! Cellular geometry: base-station layouts, user drops, path loss with
//! log-normal shadowing, and the per-user noise-plus-interference floor.
//!
//! Users are indexed cell by cell: user `k` of cell `m` has index `K m + k`
//! (zero based), so the users of cell `m` occupy `K m .. K (m + 1)`.

use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::special::{db_to_linear, thermal_noise_watts};
use crate::{Error, Result};

/// Minimum user-to-BS distance in metres.
pub const MIN_BS_DISTANCE_M: f64 = 35.0;

const MAX_DROP_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Topology {
    /// Mutually adjacent hexagonal cells (1, 2 or 3), optionally surrounded by
    /// `interferer_rings` rings of non-cooperating cells.
    Hexagonal { cluster_size: usize, interferer_rings: usize },
    /// Two base stations at `-spacing/2` and `+spacing/2` on a line, users on the line.
    TwoCellLine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayoutConfig {
    pub topology: Topology,
    pub bs_spacing_m: f64,
    pub antennas_per_bs: usize,
    pub users_per_cell: usize,
    pub max_power_w: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
}

impl LayoutConfig {
    /// Three coordinated cells, nine interferers, 500 m spacing, four antennas,
    /// 20 users per cell, 40 W, 10 MHz, 9 dB noise figure.
    pub fn main_campaign() -> Self {
        LayoutConfig {
            topology: Topology::Hexagonal { cluster_size: 3, interferer_rings: 1 },
            bs_spacing_m: 500.0,
            antennas_per_bs: 4,
            users_per_cell: 20,
            max_power_w: 40.0,
            bandwidth_hz: 10e6,
            noise_figure_db: 9.0,
        }
    }

    /// Two base stations at `-half_distance` and `+half_distance`.
    pub fn two_cell(half_distance_m: f64, antennas_per_bs: usize) -> Self {
        LayoutConfig {
            topology: Topology::TwoCellLine,
            bs_spacing_m: 2.0 * half_distance_m,
            antennas_per_bs,
            users_per_cell: 1,
            ..Self::main_campaign()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkLayout {
    pub topology: Topology,
    pub coordinated_bs_positions: Vec<Point>,
    pub interferer_bs_positions: Vec<Point>,
    pub bs_to_bs_distance: f64,
    pub antennas_per_bs: usize,
    pub users_per_cell: usize,
    pub max_power_w: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
}

impl NetworkLayout {
    /// Number of coordinated base stations `M`.
    pub fn num_coordinated(&self) -> usize {
        self.coordinated_bs_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.num_coordinated() * self.users_per_cell
    }

    /// Total transmit antennas `M N_t`.
    pub fn total_antennas(&self) -> usize {
        self.num_coordinated() * self.antennas_per_bs
    }

    pub fn thermal_noise_w(&self) -> f64 {
        thermal_noise_watts(self.bandwidth_hz, self.noise_figure_db)
    }

    fn all_bs(&self) -> impl Iterator<Item = &Point> {
        self.coordinated_bs_positions.iter().chain(&self.interferer_bs_positions)
    }

    /// Whether `p` lies in the geometric cell served by coordinated BS `m`.
    pub fn in_cell(&self, m: usize, p: &Point) -> bool {
        let c = &self.coordinated_bs_positions[m];
        let d = self.bs_to_bs_distance;
        match self.topology {
            Topology::Hexagonal { .. } => {
                let (dx, dy) = (p.x - c.x, p.y - c.y);
                // Voronoi cell of a triangular lattice: inside all three strips
                // perpendicular to the neighbour directions.
                [0.0f64, 60.0, 120.0].iter().all(|deg| {
                    let a = deg.to_radians();
                    (dx * a.cos() + dy * a.sin()).abs() <= 0.5 * d
                })
            }
            Topology::TwoCellLine => p.y == 0.0 && (p.x - c.x).abs() <= 0.5 * d,
        }
    }
}

/// Axial coordinates of the first three cells of a compact cluster.
const CLUSTER_AXIAL: [(i32, i32); 3] = [(0, 0), (1, 0), (0, 1)];

fn axial_to_point(q: i32, r: i32, d: f64) -> Point {
    Point::new(d * (q as f64 + 0.5 * r as f64), d * 3.0f64.sqrt() / 2.0 * r as f64)
}

fn hex_distance(a: (i32, i32), b: (i32, i32)) -> i32 {
    let dq = a.0 - b.0;
    let dr = a.1 - b.1;
    (dq.abs() + dr.abs() + (dq + dr).abs()) / 2
}

pub fn build_layout(config: &LayoutConfig) -> Result<NetworkLayout> {
    if !(config.bs_spacing_m > 0.0) {
        return Err(Error::invalid("bs_spacing_m", "BS spacing must be positive"));
    }
    if !(config.max_power_w > 0.0) {
        return Err(Error::invalid("max_power_w", "maximum BS power must be positive"));
    }
    if config.antennas_per_bs == 0 || config.users_per_cell == 0 {
        return Err(Error::invalid("layout", "antennas and users per cell must be at least 1"));
    }
    let d = config.bs_spacing_m;
    let (coordinated, interferers) = match config.topology {
        Topology::Hexagonal { cluster_size, interferer_rings } => {
            if !(1..=3).contains(&cluster_size) {
                return Err(Error::invalid("cluster_size", "hexagonal clusters hold 1 to 3 cells"));
            }
            let cluster = &CLUSTER_AXIAL[..cluster_size];
            let ring = interferer_rings as i32;
            let mut interferers: Vec<(i32, i32)> = Vec::new();
            for q in -ring - 2..=ring + 2 {
                for r in -ring - 2..=ring + 2 {
                    let cell = (q, r);
                    if cluster.contains(&cell) {
                        continue;
                    }
                    let nearest = cluster.iter().map(|&c| hex_distance(c, cell)).min().unwrap_or(i32::MAX);
                    if nearest <= ring {
                        interferers.push(cell);
                    }
                }
            }
            interferers.sort_by(|a, b| {
                let pa = axial_to_point(a.0, a.1, 1.0);
                let pb = axial_to_point(b.0, b.1, 1.0);
                libm::atan2(pa.y, pa.x).total_cmp(&libm::atan2(pb.y, pb.x)).then(a.cmp(b))
            });
            (
                cluster.iter().map(|&(q, r)| axial_to_point(q, r, d)).collect(),
                interferers.iter().map(|&(q, r)| axial_to_point(q, r, d)).collect(),
            )
        }
        Topology::TwoCellLine => (alloc::vec![Point::new(-0.5 * d, 0.0), Point::new(0.5 * d, 0.0)], Vec::new()),
    };
    Ok(NetworkLayout {
        topology: config.topology,
        coordinated_bs_positions: coordinated,
        interferer_bs_positions: interferers,
        bs_to_bs_distance: d,
        antennas_per_bs: config.antennas_per_bs,
        users_per_cell: config.users_per_cell,
        max_power_w: config.max_power_w,
        bandwidth_hz: config.bandwidth_hz,
        noise_figure_db: config.noise_figure_db,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UserDrop {
    pub positions: Vec<Point>,
    pub home_cell: Vec<usize>,
}

impl UserDrop {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// A drop with explicitly placed users, e.g. the fixed positions of the two-cell studies.
    pub fn at_positions(layout: &NetworkLayout, positions: Vec<Point>) -> Result<Self> {
        let mut home_cell = Vec::with_capacity(positions.len());
        for p in &positions {
            if layout.all_bs().any(|b| b.distance(p) < 1.0) {
                return Err(Error::invalid("positions", "user placed on top of a BS"));
            }
            let cell = (0..layout.num_coordinated())
                .min_by(|&a, &b| {
                    let da = layout.coordinated_bs_positions[a].distance(p);
                    let db = layout.coordinated_bs_positions[b].distance(p);
                    da.total_cmp(&db)
                })
                .unwrap_or(0);
            home_cell.push(cell);
        }
        Ok(UserDrop { positions, home_cell })
    }
}

/// Drops `K` users uniformly over each coordinated cell, rejecting positions
/// closer than [`MIN_BS_DISTANCE_M`] to any base station.
pub fn drop_users<R: Rng + ?Sized>(layout: &NetworkLayout, rng: &mut R) -> Result<UserDrop> {
    let m_count = layout.num_coordinated();
    let k = layout.users_per_cell;
    let d = layout.bs_to_bs_distance;
    let radius = d / 3.0f64.sqrt();
    let mut positions = Vec::with_capacity(m_count * k);
    let mut home_cell = Vec::with_capacity(m_count * k);
    for m in 0..m_count {
        let c = layout.coordinated_bs_positions[m];
        for _ in 0..k {
            let mut attempts = 0;
            let p = loop {
                attempts += 1;
                if attempts > MAX_DROP_ATTEMPTS {
                    return Err(Error::DropRejection { cell: m, attempts: MAX_DROP_ATTEMPTS });
                }
                let candidate = match layout.topology {
                    Topology::Hexagonal { .. } => {
                        Point::new(c.x + rng.random_range(-radius..radius), c.y + rng.random_range(-radius..radius))
                    }
                    Topology::TwoCellLine => Point::new(c.x + rng.random_range(-0.5 * d..0.5 * d), 0.0),
                };
                if !layout.in_cell(m, &candidate) {
                    continue;
                }
                if layout.all_bs().any(|b| b.distance(&candidate) < MIN_BS_DISTANCE_M) {
                    continue;
                }
                break candidate;
            };
            positions.push(p);
            home_cell.push(m);
        }
    }
    Ok(UserDrop { positions, home_cell })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PathlossModel {
    /// `-35.3 - 37.6 log10(d)` dB, used for the two-cell studies.
    TwoCell,
    /// `-36.3 - 37.6 log10(d)` dB, used for the system-level campaign.
    Campaign,
}

impl PathlossModel {
    fn intercept_db(self) -> f64 {
        match self {
            PathlossModel::TwoCell => -35.3,
            PathlossModel::Campaign => -36.3,
        }
    }
}

/// Path gain in dB (negative) at `distance_m` metres.
pub fn pathloss_db(distance_m: f64, model: PathlossModel) -> Result<f64> {
    if !(distance_m >= 1.0) {
        return Err(Error::invalid("distance_m", "path loss needs a distance of at least 1 m"));
    }
    Ok(model.intercept_db() - 37.6 * distance_m.log10())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LargeScaleGains {
    /// `alpha[i][n]`: linear power gain from coordinated BS `n` to user `i`.
    pub alpha: Vec<Vec<f64>>,
    /// Per-user noise plus out-of-cluster interference, in watts.
    pub sigma2: Vec<f64>,
    pub thermal_noise_w: f64,
    pub pathloss_model: PathlossModel,
}

impl LargeScaleGains {
    pub fn num_users(&self) -> usize {
        self.alpha.len()
    }

    /// Index of the BS with the largest average received power (the user's local BS).
    pub fn local_bs(&self, user: usize) -> usize {
        let row = &self.alpha[user];
        (0..row.len()).fold(0, |best, n| if row[n] > row[best] { n } else { best })
    }
}

/// Large-scale gains with i.i.d. log-normal shadowing per (user, BS) link.
///
/// Interfering cells transmit at full power and count as noise.
pub fn compute_gains<R: Rng + ?Sized>(
    layout: &NetworkLayout,
    users: &UserDrop,
    model: PathlossModel,
    shadowing_sigma_db: f64,
    rng: &mut R,
) -> Result<LargeScaleGains> {
    if !(shadowing_sigma_db >= 0.0) {
        return Err(Error::invalid("shadowing_sigma_db", "must be non-negative"));
    }
    let shadow = Normal::new(0.0, shadowing_sigma_db).map_err(|_| Error::invalid("shadowing_sigma_db", "bad value"))?;
    let thermal = layout.thermal_noise_w();
    let link_gain = |bs: &Point, user: &Point, rng: &mut R| -> Result<f64> {
        let pl = pathloss_db(bs.distance(user), model)?;
        let s: f64 = if shadowing_sigma_db > 0.0 { shadow.sample(rng) } else { 0.0 };
        Ok(db_to_linear(pl + s))
    };
    let mut alpha = Vec::with_capacity(users.len());
    let mut sigma2 = Vec::with_capacity(users.len());
    for p in &users.positions {
        let mut row = Vec::with_capacity(layout.num_coordinated());
        for bs in &layout.coordinated_bs_positions {
            row.push(link_gain(bs, p, rng)?);
        }
        let mut interference = 0.0;
        for bs in &layout.interferer_bs_positions {
            interference += layout.max_power_w * link_gain(bs, p, rng)?;
        }
        alpha.push(row);
        sigma2.push(interference + thermal);
    }
    Ok(LargeScaleGains { alpha, sigma2, thermal_noise_w: thermal, pathloss_model: model })
}
