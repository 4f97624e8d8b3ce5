//! Walker Delta shell geometry, ISL adjacency, ground-station access and routing.
//!
//! Satellites follow ideal circular Keplerian orbits. The ground station rotates
//! with the Earth at the sidereal rate, with the Greenwich meridian aligned to the
//! inertial x axis at t = 0.

use crate::error::{Error, Result};
use crate::geo::{Vec3, EARTH_MU_KM3_S2, EARTH_RADIUS_KM, EARTH_ROTATION_RAD_S};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::f64::consts::PI;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkerConfig {
    pub planes: usize,
    pub sats_per_plane: usize,
    pub inclination_deg: f64,
    pub altitude_km: f64,
    pub phasing_factor: i64,
    pub earth_radius_km: f64,
    pub epoch_s: f64,
}

impl Default for WalkerConfig {
    fn default() -> Self {
        Self {
            planes: 72,
            sats_per_plane: 22,
            inclination_deg: 53.0,
            altitude_km: 550.0,
            phasing_factor: 0,
            earth_radius_km: EARTH_RADIUS_KM,
            epoch_s: 0.0,
        }
    }
}

impl WalkerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.planes < 1 {
            return Err(Error::config("constellation.planes", "must be at least 1"));
        }
        if self.sats_per_plane < 3 {
            return Err(Error::config(
                "constellation.sats_per_plane",
                "must be at least 3",
            ));
        }
        if !(0.0..=90.0).contains(&self.inclination_deg) {
            return Err(Error::config(
                "constellation.inclination_deg",
                "must lie in [0, 90]",
            ));
        }
        if !(self.altitude_km > 0.0) {
            return Err(Error::config("constellation.altitude_km", "must be positive"));
        }
        if !(self.earth_radius_km > 0.0) {
            return Err(Error::config(
                "constellation.earth_radius_km",
                "must be positive",
            ));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.planes * self.sats_per_plane
    }
}

/// Plane and in-plane slot of a satellite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SatelliteId {
    pub plane: usize,
    pub slot: usize,
}

impl SatelliteId {
    pub const fn new(plane: usize, slot: usize) -> Self {
        Self { plane, slot }
    }
}

impl fmt::Display for SatelliteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.plane, self.slot)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundStation {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub min_elevation_deg: f64,
}

impl Default for GroundStation {
    /// Shanghai, 15 degree mask.
    fn default() -> Self {
        Self {
            latitude_deg: 31.2,
            longitude_deg: 121.4,
            min_elevation_deg: 15.0,
        }
    }
}

impl GroundStation {
    pub fn validate(&self) -> Result<()> {
        if !(self.latitude_deg.abs() <= 90.0) {
            return Err(Error::config(
                "ground_station.latitude_deg",
                "must lie in [-90, 90]",
            ));
        }
        if !(self.min_elevation_deg > 0.0 && self.min_elevation_deg < 90.0) {
            return Err(Error::config(
                "ground_station.min_elevation_deg",
                "must lie in (0, 90)",
            ));
        }
        Ok(())
    }
}

/// Ordered hop sequence from a satellite to the GS-connected satellite.
#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub hops: Vec<SatelliteId>,
    pub hop_distances_km: Vec<f64>,
}

impl Route {
    /// Number of ISL hops (0 when the source is the GS-connected satellite).
    pub fn hop_count(&self) -> usize {
        self.hops.len() - 1
    }
}

/// One stretch of time during which the ground station stays attached to `satellite`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccessWindow {
    pub satellite: SatelliteId,
    pub start_s: f64,
    pub end_s: f64,
}

impl AccessWindow {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Immutable Walker Delta shell.
#[derive(Clone, Debug)]
pub struct Constellation {
    cfg: WalkerConfig,
    radius_km: f64,
    mean_motion: f64,
    inclination: f64,
    raan: Vec<f64>,
    phase: Vec<f64>,
    /// Slot shift mapping (p, s) to its closest-phasing satellite in plane p + 1.
    east_shift: Vec<usize>,
}

fn wrap_pi(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut x = a.rem_euclid(two_pi);
    if x > PI {
        x -= two_pi;
    }
    x
}

pub fn build_walker(cfg: &WalkerConfig) -> Result<Constellation> {
    cfg.validate()?;
    let p = cfg.planes;
    let s = cfg.sats_per_plane;
    let radius_km = cfg.earth_radius_km + cfg.altitude_km;
    let mean_motion = (EARTH_MU_KM3_S2 / radius_km.powi(3)).sqrt();
    let raan: Vec<f64> = (0..p).map(|k| 2.0 * PI * k as f64 / p as f64).collect();
    let phase: Vec<f64> = (0..p)
        .map(|k| cfg.phasing_factor as f64 * 2.0 * PI * k as f64 / (p * s) as f64)
        .collect();
    let spacing = 2.0 * PI / s as f64;
    let east_shift = (0..p)
        .map(|k| {
            let next = (k + 1) % p;
            let mut best = 0;
            let mut best_diff = f64::INFINITY;
            for slot in 0..s {
                let diff = wrap_pi(slot as f64 * spacing + phase[next] - phase[k]).abs();
                if diff < best_diff - 1e-12 {
                    best = slot;
                    best_diff = diff;
                }
            }
            best
        })
        .collect();
    Ok(Constellation {
        cfg: cfg.clone(),
        radius_km,
        mean_motion,
        inclination: cfg.inclination_deg.to_radians(),
        raan,
        phase,
        east_shift,
    })
}

impl Constellation {
    pub fn config(&self) -> &WalkerConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.cfg.total()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radius_km(&self) -> f64 {
        self.radius_km
    }

    /// Orbital period in seconds.
    pub fn period_s(&self) -> f64 {
        2.0 * PI / self.mean_motion
    }

    /// Chord between two consecutive satellites of the same plane, km.
    pub fn intra_plane_chord_km(&self) -> f64 {
        2.0 * self.radius_km * (PI / self.cfg.sats_per_plane as f64).sin()
    }

    pub fn flat(&self, id: SatelliteId) -> usize {
        id.plane * self.cfg.sats_per_plane + id.slot
    }

    pub fn id(&self, flat: usize) -> SatelliteId {
        SatelliteId::new(flat / self.cfg.sats_per_plane, flat % self.cfg.sats_per_plane)
    }

    pub fn ids(&self) -> impl Iterator<Item = SatelliteId> + '_ {
        (0..self.len()).map(|k| self.id(k))
    }

    fn check(&self, id: SatelliteId) -> Result<()> {
        if id.plane >= self.cfg.planes || id.slot >= self.cfg.sats_per_plane {
            return Err(Error::Topology(format!("satellite {id} does not exist")));
        }
        Ok(())
    }

    fn position_unchecked(&self, id: SatelliteId, t: f64) -> Vec3 {
        let u = 2.0 * PI * id.slot as f64 / self.cfg.sats_per_plane as f64
            + self.phase[id.plane]
            + self.mean_motion * (t - self.cfg.epoch_s);
        let raan = self.raan[id.plane];
        let (su, cu) = u.sin_cos();
        let (so, co) = raan.sin_cos();
        let (si, ci) = self.inclination.sin_cos();
        Vec3::new(
            self.radius_km * (co * cu - so * su * ci),
            self.radius_km * (so * cu + co * su * ci),
            self.radius_km * su * si,
        )
    }

    /// Earth-centered inertial position in km.
    pub fn position_at(&self, id: SatelliteId, t: f64) -> Result<Vec3> {
        self.check(id)?;
        Ok(self.position_unchecked(id, t))
    }

    pub fn position_flat(&self, flat: usize, t: f64) -> Vec3 {
        self.position_unchecked(self.id(flat), t)
    }

    /// The four ISL partners: next and previous in-plane slot, then the
    /// closest-phasing satellites of the next and previous plane.
    pub fn isl_neighbors(&self, id: SatelliteId) -> Result<[SatelliteId; 4]> {
        self.check(id)?;
        let p = self.cfg.planes;
        let s = self.cfg.sats_per_plane;
        if p < 3 {
            return Err(Error::Topology(format!(
                "inter-plane ISLs need at least 3 planes, got {p}"
            )));
        }
        let east_plane = (id.plane + 1) % p;
        let west_plane = (id.plane + p - 1) % p;
        let east = SatelliteId::new(east_plane, (id.slot + self.east_shift[id.plane]) % s);
        let west = SatelliteId::new(west_plane, (id.slot + s - self.east_shift[west_plane]) % s);
        Ok([
            SatelliteId::new(id.plane, (id.slot + 1) % s),
            SatelliteId::new(id.plane, (id.slot + s - 1) % s),
            east,
            west,
        ])
    }

    /// ISL neighbors by flat index, ascending.
    pub fn neighbors_flat(&self, flat: usize) -> Result<[usize; 4]> {
        let n = self.isl_neighbors(self.id(flat))?;
        let mut out = n.map(|x| self.flat(x));
        out.sort_unstable();
        Ok(out)
    }

    /// Undirected ISL edge list `(a, b, distance_km)` with `a < b`, at time `t`.
    pub fn isl_edges(&self, t: f64) -> Result<Vec<(usize, usize, f64)>> {
        let mut edges = Vec::with_capacity(self.len() * 2);
        for a in 0..self.len() {
            for b in self.neighbors_flat(a)? {
                if a < b {
                    let d = self.position_flat(a, t).distance(self.position_flat(b, t));
                    edges.push((a, b, d));
                }
            }
        }
        Ok(edges)
    }

    pub fn ground_position(&self, gs: &GroundStation, t: f64) -> Vec3 {
        let lat = gs.latitude_deg.to_radians();
        let lon = gs.longitude_deg.to_radians() + EARTH_ROTATION_RAD_S * (t - self.cfg.epoch_s);
        let r = self.cfg.earth_radius_km;
        Vec3::new(r * lat.cos() * lon.cos(), r * lat.cos() * lon.sin(), r * lat.sin())
    }

    /// Elevation of `sat` above the local horizon of `gs`, degrees.
    pub fn elevation_deg(&self, gs: &GroundStation, sat: SatelliteId, t: f64) -> Result<f64> {
        let s = self.position_at(sat, t)?;
        Ok(elevation_from(self.ground_position(gs, t), s))
    }

    /// Satellite the ground station is attached to at `t`. A still-visible
    /// `previous` satellite is kept; otherwise the closest visible one is chosen.
    pub fn gs_access_satellite(
        &self,
        gs: &GroundStation,
        t: f64,
        previous: Option<SatelliteId>,
    ) -> Result<SatelliteId> {
        let g = self.ground_position(gs, t);
        if let Some(prev) = previous {
            let s = self.position_at(prev, t)?;
            if elevation_from(g, s) >= gs.min_elevation_deg {
                return Ok(prev);
            }
        }
        let mut best: Option<(f64, usize)> = None;
        for k in 0..self.len() {
            let s = self.position_flat(k, t);
            if elevation_from(g, s) < gs.min_elevation_deg {
                continue;
            }
            let range = g.distance(s);
            if best.is_none_or(|(r, _)| range < r) {
                best = Some((range, k));
            }
        }
        best.map(|(_, k)| self.id(k)).ok_or(Error::Visibility { t })
    }

    /// Access windows starting at or after `t_start`, sampled every `dt` seconds
    /// up to `t_end`. The first window is truncated at `t_start`; later windows
    /// start at a handover.
    pub fn access_windows(
        &self,
        gs: &GroundStation,
        t_start: f64,
        t_end: f64,
        dt: f64,
    ) -> Result<Vec<AccessWindow>> {
        if !(dt > 0.0) {
            return Err(Error::config("dt", "must be positive"));
        }
        let mut windows = Vec::new();
        let mut current = self.gs_access_satellite(gs, t_start, None)?;
        let mut start = t_start;
        let mut step = 1u64;
        loop {
            let t = t_start + step as f64 * dt;
            if t > t_end {
                windows.push(AccessWindow {
                    satellite: current,
                    start_s: start,
                    end_s: t_end,
                });
                break;
            }
            let next = self.gs_access_satellite(gs, t, Some(current))?;
            if next != current {
                windows.push(AccessWindow {
                    satellite: current,
                    start_s: start,
                    end_s: t,
                });
                current = next;
                start = t;
            }
            step += 1;
        }
        Ok(windows)
    }

    /// Shortest-path tree toward `gs_sat` under the hybrid hop + distance weight
    /// `1 + eta * d / d_ref`, with `d_ref` the in-plane neighbor chord.
    pub fn routing_tree(&self, gs_sat: SatelliteId, eta: f64, t: f64) -> Result<RoutingTree> {
        self.check(gs_sat)?;
        if !(eta >= 0.0) {
            return Err(Error::config("routing.eta", "must be non-negative"));
        }
        let n = self.len();
        let d_ref = self.intra_plane_chord_km();
        let positions: Vec<Vec3> = (0..n).map(|k| self.position_flat(k, t)).collect();
        let mut adj = Vec::with_capacity(n);
        for k in 0..n {
            let nb = self.neighbors_flat(k)?;
            adj.push(nb.map(|j| (j, 1.0 + eta * positions[k].distance(positions[j]) / d_ref)));
        }
        let root = self.flat(gs_sat);
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        dist[root] = 0.0;
        heap.push(HeapItem { cost: 0.0, node: root });
        while let Some(HeapItem { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for &(j, w) in &adj[node] {
                let c = cost + w;
                if c < dist[j] {
                    dist[j] = c;
                    heap.push(HeapItem { cost: c, node: j });
                }
            }
        }
        let mut next = vec![None; n];
        for k in 0..n {
            if k == root {
                continue;
            }
            if !dist[k].is_finite() {
                return Err(Error::Routing(format!(
                    "satellite {} cannot reach {}",
                    self.id(k),
                    gs_sat
                )));
            }
            // Smallest flat index among optimal next hops gives the
            // lexicographically smallest shortest route.
            let tol = 1e-9 * (1.0 + dist[k]);
            next[k] = adj[k]
                .iter()
                .filter(|(j, w)| (dist[*j] + w - dist[k]).abs() <= tol)
                .map(|(j, _)| *j)
                .min();
            if next[k].is_none() {
                return Err(Error::Routing(format!(
                    "no consistent next hop at {}",
                    self.id(k)
                )));
            }
        }
        Ok(RoutingTree { root, dist, next })
    }

    pub fn route_to_gs(
        &self,
        src: SatelliteId,
        gs_sat: SatelliteId,
        eta: f64,
        t: f64,
    ) -> Result<Route> {
        self.check(src)?;
        let tree = self.routing_tree(gs_sat, eta, t)?;
        self.route_in_tree(&tree, src, t)
    }

    pub fn route_in_tree(&self, tree: &RoutingTree, src: SatelliteId, t: f64) -> Result<Route> {
        self.check(src)?;
        let mut hops = vec![src];
        let mut dists = Vec::new();
        let mut cur = self.flat(src);
        while cur != tree.root {
            let nxt = tree.next[cur]
                .ok_or_else(|| Error::Routing(format!("dangling route at {}", self.id(cur))))?;
            dists.push(self.position_flat(cur, t).distance(self.position_flat(nxt, t)));
            hops.push(self.id(nxt));
            if hops.len() > self.len() {
                return Err(Error::Routing("route revisits a satellite".into()));
            }
            cur = nxt;
        }
        Ok(Route {
            hops,
            hop_distances_km: dists,
        })
    }

    /// Breadth-first hop distances from `root` over the ISL graph.
    pub fn hop_distances(&self, root: usize) -> Result<Vec<Option<usize>>> {
        let mut dist = vec![None; self.len()];
        let mut queue = VecDeque::from([root]);
        dist[root] = Some(0);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for v in self.neighbors_flat(u)? {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }
}

/// Elevation in degrees of a point `sat` seen from the ground point `ground`.
pub fn elevation_from(ground: Vec3, sat: Vec3) -> f64 {
    let los = sat - ground;
    let up = ground * (1.0 / ground.norm());
    (los.dot(up) / los.norm()).clamp(-1.0, 1.0).asin().to_degrees()
}

/// Next-hop pointers toward a single GS-connected satellite.
#[derive(Clone, Debug)]
pub struct RoutingTree {
    pub root: usize,
    pub dist: Vec<f64>,
    pub next: Vec<Option<usize>>,
}

#[derive(Clone, Copy, Debug)]
struct HeapItem {
    cost: f64,
    node: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    // Min-heap on cost, then on node index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn default_shell() -> Constellation {
        build_walker(&WalkerConfig::default()).unwrap()
    }

    #[test]
    fn default_shell_has_1584_satellites_at_6921_km() {
        let c = default_shell();
        assert_eq!(c.len(), 1584);
        assert_eq!(c.radius_km(), 6921.0);
        for id in c.ids().step_by(37) {
            for t in [0.0, 123.4, 5000.0] {
                let r = c.position_at(id, t).unwrap().norm();
                assert!((r - 6921.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_plane_four_sats_are_quarter_turn_apart() {
        let cfg = WalkerConfig {
            planes: 1,
            sats_per_plane: 4,
            ..Default::default()
        };
        let c = build_walker(&cfg).unwrap();
        assert_eq!(c.len(), 4);
        for s in 0..4 {
            let a = c.position_at(SatelliteId::new(0, s), 10.0).unwrap();
            let b = c.position_at(SatelliteId::new(0, (s + 1) % 4), 10.0).unwrap();
            let angle = (a.dot(b) / (a.norm() * b.norm())).acos();
            assert!((angle - PI / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_config_names_field() {
        let cfg = WalkerConfig {
            sats_per_plane: 2,
            ..Default::default()
        };
        match build_walker(&cfg) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "constellation.sats_per_plane"),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = WalkerConfig {
            altitude_km: 0.0,
            ..Default::default()
        };
        assert!(matches!(build_walker(&cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn positions_are_periodic() {
        let c = default_shell();
        let period = c.period_s();
        for id in [SatelliteId::new(0, 0), SatelliteId::new(40, 13)] {
            let a = c.position_at(id, 17.0).unwrap();
            let b = c.position_at(id, 17.0 + period).unwrap();
            assert!(a.distance(b) < 1e-6);
        }
    }

    #[test]
    fn intra_plane_chord_matches_closed_form() {
        let c = default_shell();
        let expected = 2.0 * 6921.0 * (PI / 22.0).sin();
        assert!((expected - 1969.9).abs() < 0.05);
        for t in [0.0, 311.0] {
            let a = c.position_at(SatelliteId::new(5, 3), t).unwrap();
            let b = c.position_at(SatelliteId::new(5, 4), t).unwrap();
            assert!((a.distance(b) - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn ring_and_zero_phase_neighbors() {
        let c = default_shell();
        let n = c.isl_neighbors(SatelliteId::new(0, 0)).unwrap();
        assert!(n.contains(&SatelliteId::new(0, 1)));
        assert!(n.contains(&SatelliteId::new(0, 21)));
        for k in 0..22 {
            let n = c.isl_neighbors(SatelliteId::new(0, k)).unwrap();
            assert_eq!(n[2], SatelliteId::new(1, k));
            assert_eq!(n[3], SatelliteId::new(71, k));
        }
    }

    #[test]
    fn too_few_planes_is_topology_error() {
        let cfg = WalkerConfig {
            planes: 2,
            ..Default::default()
        };
        let c = build_walker(&cfg).unwrap();
        assert!(matches!(
            c.isl_neighbors(SatelliteId::new(0, 0)),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn adjacency_is_symmetric_and_four_regular() {
        for f in [0, 1, 7, 36, 71] {
            let cfg = WalkerConfig {
                phasing_factor: f,
                ..Default::default()
            };
            let c = build_walker(&cfg).unwrap();
            for a in 0..c.len() {
                let nb = c.neighbors_flat(a).unwrap();
                let mut uniq = nb.to_vec();
                uniq.dedup();
                assert_eq!(uniq.len(), 4, "satellite {a} with F={f}");
                for b in nb {
                    assert!(c.neighbors_flat(b).unwrap().contains(&a), "F={f}: {a}<->{b}");
                }
            }
        }
    }

    #[test]
    fn isl_graph_is_connected() {
        let c = default_shell();
        let d = c.hop_distances(0).unwrap();
        assert!(d.iter().all(Option::is_some));
    }

    #[test]
    fn inter_plane_neighbor_minimizes_anomaly_difference() {
        let cfg = WalkerConfig {
            phasing_factor: 17,
            ..Default::default()
        };
        let c = build_walker(&cfg).unwrap();
        let s = 22usize;
        let u = |id: SatelliteId| 2.0 * PI * id.slot as f64 / s as f64 + c.phase[id.plane];
        for id in [SatelliteId::new(3, 5), SatelliteId::new(71, 0), SatelliteId::new(0, 21)] {
            let n = c.isl_neighbors(id).unwrap();
            for nb in [n[2], n[3]] {
                let best = (0..s)
                    .map(|k| wrap_pi(u(SatelliteId::new(nb.plane, k)) - u(id)).abs())
                    .fold(f64::INFINITY, f64::min);
                assert!((wrap_pi(u(nb) - u(id)).abs() - best).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zenith_satellite_is_selected() {
        let c = default_shell();
        let t = 42.0;
        let target = SatelliteId::new(10, 7);
        let p = c.position_at(target, t).unwrap();
        let lat = (p.z / p.norm()).asin().to_degrees();
        let lon = (p.y.atan2(p.x) - EARTH_ROTATION_RAD_S * t).to_degrees();
        let gs = GroundStation {
            latitude_deg: lat,
            longitude_deg: lon,
            min_elevation_deg: 15.0,
        };
        assert!((c.elevation_deg(&gs, target, t).unwrap() - 90.0).abs() < 1e-6);
        assert_eq!(c.gs_access_satellite(&gs, t, None).unwrap(), target);
    }

    #[test]
    fn access_is_sticky_while_visible() {
        let c = default_shell();
        let gs = GroundStation::default();
        let first = c.gs_access_satellite(&gs, 0.0, None).unwrap();
        let mut switched_closest = false;
        let mut t = 0.0;
        while c.elevation_deg(&gs, first, t).unwrap() >= gs.min_elevation_deg {
            assert_eq!(c.gs_access_satellite(&gs, t, Some(first)).unwrap(), first);
            if c.gs_access_satellite(&gs, t, None).unwrap() != first {
                switched_closest = true;
            }
            t += 5.0;
        }
        assert!(switched_closest, "closest satellite never changed during the pass");
        assert_ne!(c.gs_access_satellite(&gs, t, Some(first)).unwrap(), first);
    }

    #[test]
    fn shanghai_access_windows_last_minutes() {
        let c = default_shell();
        let gs = GroundStation::default();
        let w = c.access_windows(&gs, 0.0, 3600.0, 1.0).unwrap();
        // Skip the truncated first and last windows.
        let full = &w[1..w.len() - 1];
        assert!(!full.is_empty());
        let mean = full.iter().map(AccessWindow::duration_s).sum::<f64>() / full.len() as f64;
        assert!((100.0..=1000.0).contains(&mean), "mean window {mean} s");
    }

    #[test]
    fn trivial_routes() {
        let c = default_shell();
        let gs = SatelliteId::new(20, 10);
        let r = c.route_to_gs(gs, gs, 0.5, 0.0).unwrap();
        assert_eq!(r.hop_count(), 0);
        for nb in c.isl_neighbors(gs).unwrap() {
            let r = c.route_to_gs(nb, gs, 0.5, 0.0).unwrap();
            assert_eq!(r.hop_count(), 1);
            assert_eq!(r.hops, vec![nb, gs]);
        }
    }

    #[test]
    fn zero_eta_matches_bfs_hop_count() {
        let c = default_shell();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let src = rng.random_range(0..c.len());
            let dst = rng.random_range(0..c.len());
            let bfs = c.hop_distances(dst).unwrap();
            let r = c.route_to_gs(c.id(src), c.id(dst), 0.0, 0.0).unwrap();
            assert_eq!(Some(r.hop_count()), bfs[src]);
        }
    }

    #[test]
    fn routes_are_simple_isl_paths() {
        let c = default_shell();
        let gs = SatelliteId::new(3, 3);
        let tree = c.routing_tree(gs, 0.5, 100.0).unwrap();
        for src in (0..c.len()).step_by(97) {
            let r = c.route_in_tree(&tree, c.id(src), 100.0).unwrap();
            let mut seen = std::collections::HashSet::new();
            for w in r.hops.windows(2) {
                assert!(c.isl_neighbors(w[0]).unwrap().contains(&w[1]));
            }
            for h in &r.hops {
                assert!(seen.insert(*h));
            }
            assert_eq!(*r.hops.last().unwrap(), gs);
        }
    }

    #[test]
    fn route_cost_shrinks_toward_hop_count_as_eta_falls() {
        let c = default_shell();
        let gs = SatelliteId::new(30, 4);
        let src = c.flat(SatelliteId::new(50, 17));
        let mut prev = f64::INFINITY;
        for eta in [1.0, 0.5, 0.25, 0.0] {
            let d = c.routing_tree(gs, eta, 0.0).unwrap().dist[src];
            assert!(d <= prev + 1e-12);
            prev = d;
        }
        let bfs = c.hop_distances(c.flat(gs)).unwrap()[src].unwrap();
        assert!((prev - bfs as f64).abs() < 1e-9);
    }
}
