//! Billiard flow in a trapezoid, the named periodic orbits, and a shooting
//! search for regular periodic orbits.
//!
//! The flow stops at corners instead of branching: diffraction at a vertex is
//! set-valued, so diffractive orbits are constructed explicitly by
//! [`named_orbits`] rather than discovered by the flow.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffraction::is_diffractive_vertex;
use crate::geometry::{dist, orthic_triangle, Point, TrapezoidSpec, BASE, TOP};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitKind {
    AltitudeFamily,
    TopEdge,
    Orthic,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum BoundaryEvent {
    Reflection { edge: usize, point: Point },
    Corner { vertex: usize, point: Point, diffractive: bool },
}

impl BoundaryEvent {
    pub fn point(&self) -> Point {
        match *self {
            BoundaryEvent::Reflection { point, .. } | BoundaryEvent::Corner { point, .. } => point,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub kind: OrbitKind,
    pub length: f64,
    /// Boundary events of one period, in order; the orbit returns from the
    /// last event to the first.
    pub itinerary: Vec<BoundaryEvent>,
    /// Horizontal extent swept by the altitude family.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family_parameter_range: Option<(f64, f64)>,
}

impl OrbitRecord {
    /// Sum of the closed polygon's segment lengths through the itinerary.
    pub fn itinerary_length(&self) -> f64 {
        let n = self.itinerary.len();
        (0..n)
            .map(|i| dist(self.itinerary[i].point(), self.itinerary[(i + 1) % n].point()))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilliardState {
    pub position: Point,
    pub direction: [f64; 2],
}

impl BilliardState {
    /// State at `position` heading at angle `theta` from the x-axis.
    pub fn new(position: Point, theta: f64) -> Self {
        Self { position, direction: [theta.cos(), theta.sin()] }
    }

    pub fn reversed(&self) -> Self {
        Self { position: self.position, direction: [-self.direction[0], -self.direction[1]] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PathStatus {
    Completed,
    CornerHit { vertex: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BilliardPath {
    /// Polyline vertices: the start, every boundary hit, and the end point.
    pub points: Vec<Point>,
    /// Edge of each reflection, aligned with `points[1..]`.
    pub edges: Vec<usize>,
    pub status: PathStatus,
    pub length: f64,
    pub final_state: BilliardState,
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    a: Point,
    len: f64,
    tangent: [f64; 2],
    normal: [f64; 2],
}

/// Boundary of `t` as four oriented edges with inward unit normals.
struct Table {
    edges: [Edge; 4],
    perimeter: f64,
    corner_tol: f64,
    eps: f64,
}

impl Table {
    fn new(t: &TrapezoidSpec, corner_rel: f64) -> Self {
        let v = t.vertices();
        let diam = t.diameter();
        let edges = std::array::from_fn(|i| {
            let (a, b) = (v[i], v[(i + 1) % 4]);
            let len = dist(a, b);
            let tangent = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
            Edge { a, len, tangent, normal: [-tangent[1], tangent[0]] }
        });
        let perimeter = edges.iter().map(|e: &Edge| e.len).sum();
        Self { edges, perimeter, corner_tol: corner_rel * diam, eps: 1e-12 * diam }
    }

    fn point_on(&self, edge: usize, u: f64) -> Point {
        let e = &self.edges[edge];
        [e.a[0] + u * e.tangent[0], e.a[1] + u * e.tangent[1]]
    }

    /// Direction leaving `edge` at angle `theta` in (0, pi) from its tangent.
    fn direction_from(&self, edge: usize, theta: f64) -> [f64; 2] {
        let e = &self.edges[edge];
        let (c, s) = (theta.cos(), theta.sin());
        [c * e.tangent[0] + s * e.normal[0], c * e.tangent[1] + s * e.normal[1]]
    }

    fn angle_on(&self, edge: usize, d: [f64; 2]) -> f64 {
        let e = &self.edges[edge];
        let c = d[0] * e.tangent[0] + d[1] * e.tangent[1];
        let s = d[0] * e.normal[0] + d[1] * e.normal[1];
        s.atan2(c)
    }

    /// First boundary hit of the ray `p + s d`, `s > eps`, skipping `skip`.
    fn next_hit(&self, p: Point, d: [f64; 2], skip: Option<usize>) -> Result<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for (i, e) in self.edges.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let denom = d[0] * e.normal[0] + d[1] * e.normal[1];
            if denom >= -1e-15 {
                // moving away from or parallel to this edge
                continue;
            }
            let off = (e.a[0] - p[0]) * e.normal[0] + (e.a[1] - p[1]) * e.normal[1];
            let s = off / denom;
            if s <= self.eps {
                continue;
            }
            let q = [p[0] + s * d[0], p[1] + s * d[1]];
            let u = (q[0] - e.a[0]) * e.tangent[0] + (q[1] - e.a[1]) * e.tangent[1];
            let slack = 1e-9 * e.len;
            if u < -slack || u > e.len + slack {
                continue;
            }
            if best.is_none_or(|(_, bs, _)| s < bs) {
                best = Some((i, s, u.clamp(0.0, e.len)));
            }
        }
        best.ok_or_else(|| {
            Error::Tolerance(format!("ray from ({}, {}) does not meet the boundary", p[0], p[1]))
        })
    }

    fn corner_at(&self, edge: usize, u: f64) -> Option<usize> {
        let e = &self.edges[edge];
        if u < self.corner_tol {
            Some(edge)
        } else if e.len - u < self.corner_tol {
            Some((edge + 1) % 4)
        } else {
            None
        }
    }

    fn reflect(&self, edge: usize, d: [f64; 2]) -> [f64; 2] {
        let n = self.edges[edge].normal;
        let dn = d[0] * n[0] + d[1] * n[1];
        let r = [d[0] - 2.0 * dn * n[0], d[1] - 2.0 * dn * n[1]];
        let norm = r[0].hypot(r[1]);
        [r[0] / norm, r[1] / norm]
    }
}

/// Straight-line flow with specular reflection for a total length `t_max`.
///
/// Stops early with [`PathStatus::CornerHit`] when a boundary hit lies
/// within `corner_rel * diameter` of a vertex.
pub fn trace_billiard(
    t: &TrapezoidSpec,
    s0: BilliardState,
    t_max: f64,
    corner_rel: f64,
) -> Result<BilliardPath> {
    if !(t_max > 0.0) {
        return Err(Error::Precondition(format!("t_max must be positive, got {t_max}")));
    }
    let diam = t.diameter();
    if !t.contains(s0.position, 1e-10 * diam) {
        return Err(Error::Precondition("start point lies outside the trapezoid".into()));
    }
    let norm = s0.direction[0].hypot(s0.direction[1]);
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!("direction must be a unit vector, norm {norm}")));
    }
    let table = Table::new(t, corner_rel);
    let mut p = s0.position;
    let mut d = s0.direction;
    let mut points = vec![p];
    let mut edges = Vec::new();
    let mut length = 0.0;
    let mut skip = None;
    loop {
        let (edge, s, u) = table.next_hit(p, d, skip)?;
        if length + s >= t_max {
            let r = t_max - length;
            p = [p[0] + r * d[0], p[1] + r * d[1]];
            points.push(p);
            return Ok(BilliardPath {
                points,
                edges,
                status: PathStatus::Completed,
                length: t_max,
                final_state: BilliardState { position: p, direction: d },
            });
        }
        length += s;
        p = table.point_on(edge, u);
        points.push(p);
        if let Some(vertex) = table.corner_at(edge, u) {
            p = t.vertices()[vertex];
            *points.last_mut().unwrap() = p;
            return Ok(BilliardPath {
                points,
                edges,
                status: PathStatus::CornerHit { vertex },
                length,
                final_state: BilliardState { position: p, direction: d },
            });
        }
        edges.push(edge);
        d = table.reflect(edge, d);
        skip = Some(edge);
    }
}

/// The altitude family, the top-edge orbit (non-rectangles) and the orthic
/// triangle when it fits inside `t`, with closed-form lengths.
pub fn named_orbits(t: &TrapezoidSpec) -> Vec<OrbitRecord> {
    let v = t.vertices();
    let angles = t.interior_angles();
    let (x0, x1) = t.inner_rectangle_span();
    let xm = 0.5 * (x0 + x1);
    let mut out = vec![OrbitRecord {
        kind: OrbitKind::AltitudeFamily,
        length: 2.0 * t.h(),
        itinerary: vec![
            BoundaryEvent::Reflection { edge: BASE, point: [xm, 0.0] },
            BoundaryEvent::Reflection { edge: TOP, point: [xm, t.h()] },
        ],
        family_parameter_range: Some((x0, x1)),
    }];
    if t.b() < t.base() {
        out.push(OrbitRecord {
            kind: OrbitKind::TopEdge,
            length: 2.0 * t.b(),
            itinerary: [3, 2]
                .into_iter()
                .map(|i| BoundaryEvent::Corner {
                    vertex: i,
                    point: v[i],
                    diffractive: is_diffractive_vertex(angles[i]),
                })
                .collect(),
            family_parameter_range: None,
        });
    }
    if let Some(p) = orthic_triangle(t) {
        out.push(OrbitRecord {
            kind: OrbitKind::Orthic,
            length: 2.0 * t.base() * t.alpha().sin() * t.beta().sin(),
            itinerary: vec![
                BoundaryEvent::Reflection { edge: 3, point: p[0] },
                BoundaryEvent::Reflection { edge: BASE, point: p[1] },
                BoundaryEvent::Reflection { edge: 1, point: p[2] },
            ],
            family_parameter_range: None,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub boundary_points: usize,
    pub directions: usize,
    pub shot_cap: usize,
    /// Corner-hit distance relative to the diameter.
    pub corner_rel: f64,
    /// Closure tolerance on the refined return map.
    pub closure_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            boundary_points: 200,
            directions: 360,
            shot_cap: 1_000_000,
            corner_rel: 1e-9,
            closure_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    /// Deduplicated primitive orbits, sorted by length then itinerary.
    pub orbits: Vec<OrbitRecord>,
    /// Shots that ended at a vertex before closing.
    pub corner_hits: usize,
    pub shots: usize,
}

struct Shot {
    code: Vec<usize>,
    edge: usize,
    u: f64,
    theta: f64,
    bounces: usize,
    residual: f64,
}

/// Flow from `(edge, u)` leaving at `theta`; returns `(edge, u, theta,
/// length, path points)` after each bounce via `visit`, which may stop the
/// flow by returning `false`. `Err(vertex)` reports a corner hit.
fn flow<F>(
    table: &Table,
    edge: usize,
    u: f64,
    theta: f64,
    max_bounces: usize,
    max_length: f64,
    mut visit: F,
) -> std::result::Result<(), usize>
where
    F: FnMut(usize, f64, f64, f64, Point) -> bool,
{
    let mut p = table.point_on(edge, u);
    let mut d = table.direction_from(edge, theta);
    let mut skip = Some(edge);
    let mut length = 0.0;
    for _ in 0..max_bounces {
        let Ok((e, s, ue)) = table.next_hit(p, d, skip) else {
            return Ok(());
        };
        length += s;
        if length > max_length {
            return Ok(());
        }
        if let Some(v) = table.corner_at(e, ue) {
            return Err(v);
        }
        p = table.point_on(e, ue);
        d = table.reflect(e, d);
        skip = Some(e);
        if !visit(e, ue, table.angle_on(e, d), length, p) {
            return Ok(());
        }
    }
    Ok(())
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Return-map residual after exactly `bounces` bounces, scaled so position
/// and angle mismatches are comparable.
fn return_residual(table: &Table, edge: usize, u: f64, theta: f64, bounces: usize, code: &[usize]) -> Option<[f64; 2]> {
    if !(0.0..=table.edges[edge].len).contains(&u) || !(0.0..PI).contains(&theta) {
        return None;
    }
    let mut out = None;
    let mut k = 0;
    let res = flow(table, edge, u, theta, bounces, f64::INFINITY, |e, ue, th, _, _| {
        if code.get(k) != Some(&e) {
            return false;
        }
        k += 1;
        if k == bounces {
            out = Some([(ue - u) / table.perimeter, wrap_angle(th - theta) / PI]);
        }
        true
    });
    res.ok()?;
    out
}

/// Levenberg-Marquardt on the return map with a central-difference Jacobian.
fn refine(table: &Table, shot: &Shot, tol: f64) -> Option<(f64, f64)> {
    let (mut u, mut th) = (shot.u, shot.theta);
    let f = |u: f64, th: f64| return_residual(table, shot.edge, u, th, shot.bounces, &shot.code);
    let mut r = f(u, th)?;
    let mut mu = 1e-3;
    let h_u = 1e-7 * table.edges[shot.edge].len;
    let h_t = 1e-7;
    for _ in 0..100 {
        let norm = r[0].hypot(r[1]);
        if norm < tol {
            return Some((u, th));
        }
        let (ru_p, ru_m) = (f(u + h_u, th)?, f(u - h_u, th)?);
        let (rt_p, rt_m) = (f(u, th + h_t)?, f(u, th - h_t)?);
        let j = [
            [(ru_p[0] - ru_m[0]) / (2.0 * h_u), (rt_p[0] - rt_m[0]) / (2.0 * h_t)],
            [(ru_p[1] - ru_m[1]) / (2.0 * h_u), (rt_p[1] - rt_m[1]) / (2.0 * h_t)],
        ];
        // normal equations (J^T J + mu diag) delta = -J^T r
        let a00 = j[0][0] * j[0][0] + j[1][0] * j[1][0];
        let a01 = j[0][0] * j[0][1] + j[1][0] * j[1][1];
        let a11 = j[0][1] * j[0][1] + j[1][1] * j[1][1];
        let g0 = j[0][0] * r[0] + j[1][0] * r[1];
        let g1 = j[0][1] * r[0] + j[1][1] * r[1];
        let mut improved = false;
        for _ in 0..30 {
            let (m00, m11) = (a00 * (1.0 + mu) + 1e-300, a11 * (1.0 + mu) + 1e-300);
            let det = m00 * m11 - a01 * a01;
            if det == 0.0 {
                mu *= 10.0;
                continue;
            }
            let du = -(m11 * g0 - a01 * g1) / det;
            let dt = -(m00 * g1 - a01 * g0) / det;
            if let Some(rn) = f(u + du, th + dt) {
                if rn[0].hypot(rn[1]) < norm {
                    u += du;
                    th += dt;
                    r = rn;
                    mu = (mu / 3.0).max(1e-12);
                    improved = true;
                    break;
                }
            }
            mu *= 4.0;
        }
        if !improved {
            return None;
        }
    }
    (r[0].hypot(r[1]) < tol).then_some((u, th))
}

/// Smallest representative of `code` under cyclic shifts and reversal.
fn canonical_code(code: &[usize]) -> Vec<usize> {
    let n = code.len();
    let mut best: Option<Vec<usize>> = None;
    let rev: Vec<usize> = code.iter().rev().copied().collect();
    for seq in [code, &rev[..]] {
        for s in 0..n {
            let c: Vec<usize> = (0..n).map(|i| seq[(s + i) % n]).collect();
            if best.as_ref().is_none_or(|b| c < *b) {
                best = Some(c);
            }
        }
    }
    best.unwrap_or_default()
}

/// Shooting search for regular periodic orbits of length at most
/// `length_budget` with at most `max_bounces` reflections per period.
pub fn search_periodic_orbits(
    t: &TrapezoidSpec,
    length_budget: f64,
    max_bounces: usize,
    opts: &SearchOptions,
) -> Result<SearchResult> {
    if !(length_budget > 0.0) {
        return Err(Error::Precondition(format!("length budget must be positive, got {length_budget}")));
    }
    if max_bounces == 0 || max_bounces > 8 {
        return Err(Error::Precondition(format!("max_bounces must lie in 1..=8, got {max_bounces}")));
    }
    let shots = opts.boundary_points.saturating_mul(opts.directions);
    if shots > opts.shot_cap {
        return Err(Error::BudgetExceeded { requested: shots, cap: opts.shot_cap });
    }
    if shots == 0 {
        return Err(Error::Precondition("empty shooting grid".into()));
    }
    let table = Table::new(t, opts.corner_rel);
    let ds = table.perimeter / opts.boundary_points as f64;
    let dth = PI / opts.directions as f64;
    // Generous first-pass closure window; refinement decides.
    let window = 4.0 * (ds / table.perimeter + dth / PI);

    let starts: Vec<(usize, f64)> = (0..opts.boundary_points)
        .filter_map(|i| {
            let mut s = (i as f64 + 0.5) * ds;
            for (e, edge) in table.edges.iter().enumerate() {
                if s < edge.len {
                    return Some((e, s));
                }
                s -= edge.len;
            }
            None
        })
        .collect();

    let per_start: Vec<(Vec<Shot>, usize)> = starts
        .par_iter()
        .map(|&(edge, u)| {
            let mut found = Vec::new();
            let mut corners = 0;
            for j in 0..opts.directions {
                let theta = (j as f64 + 0.5) * dth;
                let mut code = Vec::new();
                let res = flow(&table, edge, u, theta, max_bounces, length_budget * 1.05 + 1e-9, |e, ue, th, _, _| {
                    code.push(e);
                    if e == edge {
                        let r = [(ue - u) / table.perimeter, wrap_angle(th - theta) / PI];
                        let residual = r[0].abs() + r[1].abs();
                        if residual < window {
                            found.push(Shot { code: code.clone(), edge, u, theta, bounces: code.len(), residual });
                        }
                    }
                    true
                });
                if res.is_err() {
                    corners += 1;
                }
            }
            (found, corners)
        })
        .collect();

    let corner_hits = per_start.iter().map(|(_, c)| c).sum();
    let mut groups: std::collections::BTreeMap<Vec<usize>, Vec<Shot>> = Default::default();
    for shot in per_start.into_iter().flat_map(|(f, _)| f) {
        groups.entry(canonical_code(&shot.code)).or_default().push(shot);
    }

    let refined: Vec<OrbitRecord> = groups
        .into_par_iter()
        .filter_map(|(_, mut shots)| {
            shots.sort_by(|a, b| a.residual.total_cmp(&b.residual));
            shots.iter().take(6).find_map(|shot| {
                let (u, th) = refine(&table, shot, opts.closure_tol)?;
                build_orbit(&table, shot, u, th, length_budget, opts.closure_tol)
            })
        })
        .collect();

    let mut orbits: Vec<OrbitRecord> = Vec::new();
    for o in refined {
        let code = canonical_code(&edge_code(&o));
        if !orbits
            .iter()
            .any(|p| (p.length - o.length).abs() < 1e-8 && canonical_code(&edge_code(p)) == code)
        {
            orbits.push(o);
        }
    }
    orbits.sort_by(|a, b| a.length.total_cmp(&b.length).then_with(|| edge_code(a).cmp(&edge_code(b))));
    Ok(SearchResult { orbits, corner_hits, shots })
}

fn edge_code(o: &OrbitRecord) -> Vec<usize> {
    o.itinerary
        .iter()
        .map(|e| match *e {
            BoundaryEvent::Reflection { edge, .. } => edge,
            BoundaryEvent::Corner { vertex, .. } => 100 + vertex,
        })
        .collect()
}

/// Retraces a refined shot and keeps it if it closes, avoids corners, is
/// primitive and fits in the budget.
fn build_orbit(table: &Table, shot: &Shot, u: f64, th: f64, budget: f64, tol: f64) -> Option<OrbitRecord> {
    let start = table.point_on(shot.edge, u);
    let mut events = Vec::new();
    let mut states = Vec::new();
    let mut length = 0.0;
    flow(table, shot.edge, u, th, shot.bounces, f64::INFINITY, |e, ue, a, l, p| {
        events.push(BoundaryEvent::Reflection { edge: e, point: p });
        states.push((e, ue, a));
        length = l;
        true
    })
    .ok()?;
    if events.len() != shot.bounces || length > budget {
        return None;
    }
    let (e_end, u_end, a_end) = *states.last()?;
    let pos_err = dist(table.point_on(e_end, u_end), start);
    if e_end != shot.edge || pos_err > 1e-8 || wrap_angle(a_end - th).abs() > 1e-8 {
        return None;
    }
    // An earlier return to the start state means the orbit is an iterate.
    let n = shot.bounces;
    for (k, &(e, ue, a)) in states.iter().enumerate().take(n - 1) {
        if n % (k + 1) == 0
            && e == shot.edge
            && ((ue - u) / table.perimeter).abs() < tol.sqrt()
            && wrap_angle(a - th).abs() < tol.sqrt()
        {
            return None;
        }
    }
    Some(OrbitRecord { kind: OrbitKind::Generic, length, itinerary: events, family_parameter_range: None })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShortestOrbitReport {
    pub budget: f64,
    pub boundary_points: usize,
    pub directions: usize,
    pub max_bounces: usize,
    pub corner_hits: usize,
    pub found_lengths: Vec<f64>,
    pub pass: bool,
}

/// Searches below `min(2h, 2b) - 1e-6` and passes when nothing is found.
pub fn shortest_orbit_check(t: &TrapezoidSpec, opts: &SearchOptions) -> Result<ShortestOrbitReport> {
    let budget = 2.0 * t.h().min(t.b()) - 1e-6;
    let max_bounces = 8;
    let res = search_periodic_orbits(t, budget, max_bounces, opts)?;
    let found_lengths: Vec<f64> = res.orbits.iter().map(|o| o.length).collect();
    Ok(ShortestOrbitReport {
        budget,
        boundary_points: opts.boundary_points,
        directions: opts.directions,
        max_bounces,
        corner_hits: res.corner_hits,
        pass: found_lengths.is_empty(),
        found_lengths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeAngle {
    pub vertex: usize,
    pub cone_angle: f64,
    pub diffractive: bool,
}

/// Cone angles of the doubled trapezoid, twice the interior angles.
pub fn cone_angles_of_double(t: &TrapezoidSpec) -> Vec<ConeAngle> {
    t.interior_angles()
        .iter()
        .enumerate()
        .map(|(vertex, &theta)| ConeAngle {
            vertex,
            cone_angle: 2.0 * theta,
            diffractive: is_diffractive_vertex(theta),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn atan2_trap() -> TrapezoidSpec {
        let a = 2f64.atan();
        TrapezoidSpec::new(1.0, 1.0, a, a).unwrap()
    }

    fn sorted_lengths(orbits: &[OrbitRecord]) -> Vec<f64> {
        let mut l: Vec<f64> = orbits.iter().map(|o| o.length).collect();
        l.sort_by(f64::total_cmp);
        l
    }

    #[test]
    fn bouncing_ball_in_square() {
        let sq = TrapezoidSpec::rectangle(1.0, 1.0).unwrap();
        let p = trace_billiard(&sq, BilliardState::new([0.5, 0.5], FRAC_PI_2), 2.0, 1e-9).unwrap();
        assert_eq!(p.status, PathStatus::Completed);
        assert_relative_eq!(p.length, 2.0);
        assert!(dist(p.final_state.position, [0.5, 0.5]) < 1e-12);
        assert_eq!(p.edges, vec![TOP, BASE]);
    }

    #[test]
    fn heading_into_corner() {
        let t = atan2_trap();
        let start = [0.9, 0.3];
        let v2 = t.vertices()[2];
        let theta = (v2[1] - start[1]).atan2(v2[0] - start[0]);
        let p = trace_billiard(&t, BilliardState::new(start, theta), 10.0, 1e-9).unwrap();
        assert_eq!(p.status, PathStatus::CornerHit { vertex: 2 });
        assert_relative_eq!(p.length, dist(start, v2), epsilon = 1e-12);
    }

    #[test]
    fn altitude_return() {
        let t = atan2_trap();
        let (x0, x1) = t.inner_rectangle_span();
        let start = [0.5 * (x0 + x1), 0.0];
        let p = trace_billiard(&t, BilliardState::new(start, FRAC_PI_2), 2.0 * t.h(), 1e-9).unwrap();
        assert_eq!(p.status, PathStatus::Completed);
        assert!(dist(p.final_state.position, start) < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        let t = atan2_trap();
        assert!(trace_billiard(&t, BilliardState::new([0.5, 0.5], 0.3), 0.0, 1e-9).is_err());
        assert!(trace_billiard(&t, BilliardState::new([5.0, 0.5], 0.3), 1.0, 1e-9).is_err());
        let bad = BilliardState { position: [1.0, 0.5], direction: [1.0, 1.0] };
        assert!(trace_billiard(&t, bad, 1.0, 1e-9).is_err());
    }

    #[test]
    fn named_orbit_examples() {
        let t = atan2_trap();
        let orbits = named_orbits(&t);
        let l = sorted_lengths(&orbits);
        assert_eq!(l.len(), 3);
        assert_relative_eq!(l[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(l[1], 2.0, epsilon = 1e-14);
        assert_relative_eq!(l[2], 16.0 / 5.0, epsilon = 1e-13);
        for o in &orbits {
            assert_relative_eq!(o.itinerary_length(), o.length, epsilon = 1e-10);
        }
        let alt = &orbits[0];
        let (lo, hi) = alt.family_parameter_range.unwrap();
        assert_relative_eq!(lo, 0.5, epsilon = 1e-14);
        assert_relative_eq!(hi, 1.5, epsilon = 1e-14);

        let sq = named_orbits(&TrapezoidSpec::rectangle(1.0, 1.0).unwrap());
        assert_eq!(sq.len(), 1);
        assert_eq!(sq[0].kind, OrbitKind::AltitudeFamily);

        let tall = named_orbits(&TrapezoidSpec::new(1.0, 3.0, PI / 3.0, PI / 3.0).unwrap());
        assert!(tall.iter().any(|o| o.kind == OrbitKind::Orthic));
    }

    #[test]
    fn orthic_orbit_is_a_billiard_orbit() {
        let t = TrapezoidSpec::new(0.8, 2.5, 1.3, 1.0).unwrap();
        let o = named_orbits(&t).into_iter().find(|o| o.kind == OrbitKind::Orthic).unwrap();
        let p0 = o.itinerary[1].point();
        let p1 = o.itinerary[2].point();
        let theta = (p1[1] - p0[1]).atan2(p1[0] - p0[0]);
        let path = trace_billiard(&t, BilliardState::new(p0, theta), o.length, 1e-9).unwrap();
        assert!(dist(path.final_state.position, p0) < 1e-9);
        // the return to the base is the closing reflection
        assert_eq!(path.edges, vec![1, 3, 0]);
    }

    #[test]
    fn search_unit_square() {
        let sq = TrapezoidSpec::rectangle(1.0, 1.0).unwrap();
        let res = search_periodic_orbits(&sq, 2.5, 4, &SearchOptions::default()).unwrap();
        let l = sorted_lengths(&res.orbits);
        assert_eq!(l.len(), 2, "{l:?}");
        for x in l {
            assert_relative_eq!(x, 2.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn search_one_by_two() {
        let r = TrapezoidSpec::rectangle(1.0, 2.0).unwrap();
        let res = search_periodic_orbits(&r, 5.0, 6, &SearchOptions::default()).unwrap();
        let l = sorted_lengths(&res.orbits);
        let want = [2.0, 4.0, 2.0 * 5f64.sqrt()];
        assert_eq!(l.len(), 3, "{l:?}");
        for (a, b) in l.iter().zip(want) {
            assert_relative_eq!(*a, b, epsilon = 1e-8);
        }
        for o in &res.orbits {
            assert_relative_eq!(o.itinerary_length(), o.length, epsilon = 1e-10);
        }
    }

    #[test]
    fn search_below_shortest() {
        let res = search_periodic_orbits(&atan2_trap(), 1.9, 8, &SearchOptions::default()).unwrap();
        assert!(res.orbits.is_empty());
        let rep = shortest_orbit_check(&TrapezoidSpec::rectangle(2.0, 1.0).unwrap(), &SearchOptions::default()).unwrap();
        assert!(rep.pass);
        assert_relative_eq!(rep.budget, 2.0 - 1e-6);
    }

    #[test]
    fn search_finds_orthic() {
        let t = TrapezoidSpec::new(0.8, 2.5, 1.3, 1.0).unwrap();
        let lf = 2.0 * t.base() * t.alpha().sin() * t.beta().sin();
        let res = search_periodic_orbits(&t, lf + 0.01, 6, &SearchOptions::default()).unwrap();
        assert!(res.orbits.iter().any(|o| (o.length - lf).abs() < 1e-8), "{:?}", sorted_lengths(&res.orbits));
    }

    #[test]
    fn budget_cap() {
        let opts = SearchOptions { boundary_points: 2000, directions: 1000, ..Default::default() };
        let err = search_periodic_orbits(&atan2_trap(), 2.0, 4, &opts).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { requested: 2_000_000, cap: 1_000_000 }));
        assert!(search_periodic_orbits(&atan2_trap(), 2.0, 9, &SearchOptions::default()).is_err());
    }

    #[test]
    fn canonical_codes() {
        assert_eq!(canonical_code(&[2, 3, 0, 1]), vec![0, 1, 2, 3]);
        assert_eq!(canonical_code(&[3, 2, 1, 0]), vec![0, 1, 2, 3]);
        assert_eq!(canonical_code(&[2, 0]), vec![0, 2]);
    }

    #[test]
    fn cone_angle_examples() {
        let sq = cone_angles_of_double(&TrapezoidSpec::rectangle(1.0, 1.0).unwrap());
        assert!(sq.iter().all(|c| (c.cone_angle - PI).abs() < 1e-15 && !c.diffractive));

        let r = cone_angles_of_double(&TrapezoidSpec::new(1.0, 1.0, FRAC_PI_2, PI / 3.0).unwrap());
        assert_relative_eq!(r[3].cone_angle, PI);
        assert!(!r[3].diffractive);
        assert_relative_eq!(r[2].cone_angle, 4.0 * PI / 3.0, epsilon = 1e-14);
        assert!(r[2].diffractive);

        let f = cone_angles_of_double(&TrapezoidSpec::new(1.0, 1.0, 0.4 * PI, 0.4 * PI).unwrap());
        assert!(f[0].diffractive && f[1].diffractive);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn flow_is_reversible(
            b in 0.3f64..3.0, h in 0.3f64..3.0, a in 0.3f64..FRAC_PI_2, f in 0.3f64..1.0,
            px in 0.1f64..0.9, py in 0.1f64..0.9, theta in 0.0f64..(2.0 * PI), tm in 0.5f64..10.0,
        ) {
            let t = TrapezoidSpec::new(b, h, a, a * f).unwrap();
            let (x0, x1) = t.inner_rectangle_span();
            let start = [x0 + px * (x1 - x0), py * t.h()];
            let fwd = trace_billiard(&t, BilliardState::new(start, theta), tm, 1e-9).unwrap();
            prop_assume!(fwd.status == PathStatus::Completed);
            for w in fwd.points.windows(2) {
                prop_assert!(dist(w[0], w[1]) <= tm + 1e-12);
            }
            let back = trace_billiard(&t, fwd.final_state.reversed(), tm, 1e-9).unwrap();
            prop_assume!(back.status == PathStatus::Completed);
            prop_assert!(dist(back.final_state.position, start) < 1e-8);
        }
    }
}
