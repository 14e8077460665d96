//! Piecewise-rigid fields on convex-polygonal partitions of the unit square
//! `Q_η` (n = 2) and their jump energies `∫_{J_u} f([u], ν) dH¹`.
//!
//! Coordinates are world coordinates: `Q_η = T [−½, ½]²` with the rotation
//! `T = [[η₂, η₁], [−η₁, η₂]]` taking `e₂` to `η`. Each cell carries
//! `u(x) = s R x + b` with `R = [[0, −1], [1, 0]]`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::Density;
use crate::geometry::{self, Point};
use crate::quadrature::{self, QuadratureError};
use crate::tolerances::{
    AREA_TOL, COLLINEAR_TOL, EDGE_TOL, JUMP_ZERO_TOL, MIN_CELL_AREA, OVERLAP_TOL, QUAD_MAX_DEPTH,
    UNIT_TOL,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidCell {
    #[serde(rename = "vertices")]
    pub polygon: Vec<Point>,
    #[serde(default)]
    pub spin: f64,
    pub offset: [f64; 2],
}

impl RigidCell {
    pub fn constant(polygon: Vec<Point>, value: [f64; 2]) -> Self {
        RigidCell {
            polygon,
            spin: 0.0,
            offset: value,
        }
    }

    pub fn value_at(&self, x: Point) -> [f64; 2] {
        [
            -self.spin * x[1] + self.offset[0],
            self.spin * x[0] + self.offset[1],
        ]
    }

    pub fn area(&self) -> f64 {
        geometry::signed_area(&self.polygon)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionField {
    pub eta: [f64; 2],
    pub lambda: [f64; 2],
    pub cells: Vec<RigidCell>,
    /// Boundary cells agree with `u_{λ,η}` on `∂Q_η`.
    pub admissible: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("η must be a unit vector (|η| = {0})")]
    Eta(f64),
    #[error("cell {cell}: polygon is not convex and counterclockwise")]
    NonConvex { cell: usize },
    #[error("cell {cell}: degenerate polygon (area {area:e})")]
    Degenerate { cell: usize, area: f64 },
    #[error("cell {cell}: vertex outside the unit square Q_η")]
    Outside { cell: usize },
    #[error("cells {a} and {b} overlap with area {area:e}")]
    Overlap { a: usize, b: usize, area: f64 },
    #[error("cells cover area {total}, not 1 (gap)")]
    Gap { total: f64 },
    #[error("cell {cell}: value at boundary point {point:?} differs from u_(λ,η)")]
    BoundaryMismatch { cell: usize, point: Point },
    #[error("field JSON: {0}")]
    Json(String),
}

/// Rotation `T` with `T e₂ = η`.
pub fn frame(eta: [f64; 2]) -> [[f64; 2]; 2] {
    [[eta[1], eta[0]], [-eta[0], eta[1]]]
}

pub fn to_local(eta: [f64; 2], x: Point) -> Point {
    let t = frame(eta);
    [t[0][0] * x[0] + t[1][0] * x[1], t[0][1] * x[0] + t[1][1] * x[1]]
}

pub fn to_world(eta: [f64; 2], x: Point) -> Point {
    let t = frame(eta);
    [t[0][0] * x[0] + t[0][1] * x[1], t[1][0] * x[0] + t[1][1] * x[1]]
}

/// The elementary jump `u_{λ,η}` at `x`.
pub fn elementary(lambda: [f64; 2], eta: [f64; 2], x: Point) -> [f64; 2] {
    if geometry::dot(x, eta) >= 0.0 {
        lambda
    } else {
        [0.0, 0.0]
    }
}

fn validate_cells(cells: &[RigidCell], eta: [f64; 2]) -> Result<(), FieldError> {
    let mut total = 0.0;
    for (i, c) in cells.iter().enumerate() {
        if !geometry::is_convex_ccw(&c.polygon, 1e-12) {
            return Err(FieldError::NonConvex { cell: i });
        }
        let a = c.area();
        if a <= MIN_CELL_AREA {
            return Err(FieldError::Degenerate { cell: i, area: a });
        }
        for p in &c.polygon {
            let l = to_local(eta, *p);
            if l[0].abs() > 0.5 + EDGE_TOL || l[1].abs() > 0.5 + EDGE_TOL {
                return Err(FieldError::Outside { cell: i });
            }
        }
        total += a;
    }
    // Overlaps, checked pairwise within a uniform bucket grid of bounding boxes.
    let g = ((cells.len() as f64).sqrt().ceil() as usize).clamp(1, 512);
    let lo = -0.75;
    let w = 1.5 / g as f64;
    let cell_of = |v: f64| (((v - lo) / w).floor().max(0.0) as usize).min(g - 1);
    let mut buckets: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let boxes: Vec<(Point, Point)> = cells.iter().map(|c| geometry::bbox(&c.polygon)).collect();
    for (i, (a, b)) in boxes.iter().enumerate() {
        for bx in cell_of(a[0])..=cell_of(b[0]) {
            for by in cell_of(a[1])..=cell_of(b[1]) {
                buckets.entry((bx, by)).or_default().push(i);
            }
        }
    }
    let mut keys: Vec<_> = buckets.keys().copied().collect();
    keys.sort_unstable();
    let mut seen = std::collections::HashSet::new();
    for key in keys {
        let list = &buckets[&key];
        for (x, &i) in list.iter().enumerate() {
            for &j in &list[x + 1..] {
                let (ai, bi) = boxes[i];
                let (aj, bj) = boxes[j];
                if ai[0] >= bj[0] || aj[0] >= bi[0] || ai[1] >= bj[1] || aj[1] >= bi[1] {
                    continue;
                }
                if !seen.insert((i.min(j), i.max(j))) {
                    continue;
                }
                let area = geometry::intersection_area(&cells[i].polygon, &cells[j].polygon);
                if area > OVERLAP_TOL {
                    return Err(FieldError::Overlap { a: i, b: j, area });
                }
            }
        }
    }
    if (total - 1.0).abs() > AREA_TOL {
        return Err(FieldError::Gap { total });
    }
    Ok(())
}

fn boundary_check(
    cells: &[RigidCell],
    eta: [f64; 2],
    lambda: [f64; 2],
) -> Result<(), FieldError> {
    let scale = lambda[0].hypot(lambda[1]).max(1.0);
    for (i, c) in cells.iter().enumerate() {
        let m = c.polygon.len();
        for k in 0..m {
            let p = c.polygon[k];
            let q = c.polygon[(k + 1) % m];
            let lp = to_local(eta, p);
            let lq = to_local(eta, q);
            let on_side = (0..2).any(|a| {
                (lp[a].abs() - 0.5).abs() <= EDGE_TOL
                    && (lq[a].abs() - 0.5).abs() <= EDGE_TOL
                    && lp[a] * lq[a] > 0.0
            });
            if !on_side {
                continue;
            }
            for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let x = geometry::lerp(p, q, t);
                if geometry::dot(x, eta).abs() <= EDGE_TOL {
                    continue;
                }
                let u = c.value_at(x);
                let e = elementary(lambda, eta, x);
                if (u[0] - e[0]).hypot(u[1] - e[1]) > 1e-9 * scale {
                    return Err(FieldError::BoundaryMismatch { cell: i, point: x });
                }
            }
        }
    }
    Ok(())
}

/// Validates tiling and admissibility of a field.
pub fn build_partition(
    cells: Vec<RigidCell>,
    eta: [f64; 2],
    lambda: [f64; 2],
) -> Result<PartitionField, FieldError> {
    let mut f = build_partition_relaxed(cells, eta, lambda)?;
    boundary_check(&f.cells, f.eta, f.lambda)?;
    f.admissible = true;
    Ok(f)
}

/// As [`build_partition`], but boundary mismatch only clears the
/// `admissible` flag.
pub fn build_partition_relaxed(
    cells: Vec<RigidCell>,
    eta: [f64; 2],
    lambda: [f64; 2],
) -> Result<PartitionField, FieldError> {
    let r = eta[0].hypot(eta[1]);
    if (r - 1.0).abs() > UNIT_TOL {
        return Err(FieldError::Eta(r));
    }
    validate_cells(&cells, eta)?;
    let admissible = boundary_check(&cells, eta, lambda).is_ok();
    Ok(PartitionField {
        eta,
        lambda,
        cells,
        admissible,
    })
}

impl PartitionField {
    /// The elementary jump `u_{λ,η}` as a two-cell field.
    pub fn elementary(lambda: [f64; 2], eta: [f64; 2]) -> Result<Self, FieldError> {
        let w = |x: Point| to_world(eta, x);
        let cells = vec![
            RigidCell::constant(
                vec![w([-0.5, -0.5]), w([0.5, -0.5]), w([0.5, 0.0]), w([-0.5, 0.0])],
                [0.0, 0.0],
            ),
            RigidCell::constant(
                vec![w([-0.5, 0.0]), w([0.5, 0.0]), w([0.5, 0.5]), w([-0.5, 0.5])],
                lambda,
            ),
        ];
        build_partition(cells, eta, lambda)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "eta": self.eta,
            "lambda": self.lambda,
            "cells": self.cells,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, FieldError> {
        #[derive(Deserialize)]
        struct Raw {
            eta: [f64; 2],
            lambda: [f64; 2],
            cells: Vec<RigidCell>,
        }
        let raw: Raw =
            serde_json::from_value(v.clone()).map_err(|e| FieldError::Json(e.to_string()))?;
        build_partition(raw.cells, raw.eta, raw.lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpEdge {
    pub p: Point,
    pub q: Point,
    /// Points from the minus cell into the plus cell; the plus cell lies to
    /// the left of `p → q`.
    pub normal: [f64; 2],
    /// Plus (left) cell.
    pub left: usize,
    /// Minus (right) cell.
    pub right: usize,
    pub jump_p: [f64; 2],
    pub jump_q: [f64; 2],
}

impl JumpEdge {
    pub fn length(&self) -> f64 {
        geometry::dist(self.p, self.q)
    }

    pub fn jump_at(&self, t: f64) -> [f64; 2] {
        [
            self.jump_p[0] + t * (self.jump_q[0] - self.jump_p[0]),
            self.jump_p[1] + t * (self.jump_q[1] - self.jump_p[1]),
        ]
    }

    pub fn midpoint(&self) -> Point {
        geometry::lerp(self.p, self.q, 0.5)
    }
}

struct RawEdge {
    cell: usize,
    /// Cell lies on the side `x·ν ≥ c`.
    plus: bool,
    angle: f64,
    nu: [f64; 2],
    offset: f64,
    lo: f64,
    hi: f64,
}

fn jump_between(field: &PartitionField, plus: usize, minus: usize, x: Point) -> [f64; 2] {
    let a = field.cells[plus].value_at(x);
    let b = field.cells[minus].value_at(x);
    [a[0] - b[0], a[1] - b[1]]
}

/// All maximal segments shared by two cells whose traces differ, ordered
/// lexicographically by midpoint.
pub fn extract_jump_edges(field: &PartitionField) -> Vec<JumpEdge> {
    let pi = std::f64::consts::PI;
    let mut raw = vec![];
    for (ci, c) in field.cells.iter().enumerate() {
        let m = c.polygon.len();
        for k in 0..m {
            let p = c.polygon[k];
            let q = c.polygon[(k + 1) % m];
            let len = geometry::dist(p, q);
            if len <= EDGE_TOL {
                continue;
            }
            // Outward normal of a ccw edge.
            let out = [(q[1] - p[1]) / len, (p[0] - q[0]) / len];
            let mut angle = out[1].atan2(out[0]);
            let mut nu = out;
            let mut plus = false;
            if angle < -COLLINEAR_TOL || angle >= pi - COLLINEAR_TOL {
                nu = [-out[0], -out[1]];
                angle = nu[1].atan2(nu[0]);
                plus = true;
            }
            let tau = [-nu[1], nu[0]];
            let (a, b) = (geometry::dot(p, tau), geometry::dot(q, tau));
            raw.push(RawEdge {
                cell: ci,
                plus,
                angle,
                nu,
                offset: geometry::dot(p, nu),
                lo: a.min(b),
                hi: a.max(b),
            });
        }
    }
    raw.sort_by(|a, b| a.angle.total_cmp(&b.angle));
    let mut groups: Vec<Vec<RawEdge>> = vec![];
    let mut run: Vec<RawEdge> = vec![];
    let flush = |run: &mut Vec<RawEdge>, groups: &mut Vec<Vec<RawEdge>>| {
        run.sort_by(|a, b| a.offset.total_cmp(&b.offset));
        let mut g: Vec<RawEdge> = vec![];
        for e in run.drain(..) {
            if let Some(last) = g.last() {
                if (e.offset - last.offset).abs() > EDGE_TOL {
                    groups.push(std::mem::take(&mut g));
                }
            }
            g.push(e);
        }
        if !g.is_empty() {
            groups.push(g);
        }
    };
    for e in raw {
        if let Some(last) = run.last() {
            if (e.angle - last.angle).abs() > COLLINEAR_TOL {
                flush(&mut run, &mut groups);
            }
        }
        run.push(e);
    }
    flush(&mut run, &mut groups);

    let mut edges = vec![];
    for g in groups {
        let sum = g.iter().fold([0.0, 0.0], |s, e| [s[0] + e.nu[0], s[1] + e.nu[1]]);
        let r = sum[0].hypot(sum[1]);
        let nu = [sum[0] / r, sum[1] / r];
        let offset = g.iter().map(|e| e.offset).sum::<f64>() / g.len() as f64;
        let tau = [-nu[1], nu[0]];
        let mut plus: Vec<&RawEdge> = g.iter().filter(|e| e.plus).collect();
        let mut minus: Vec<&RawEdge> = g.iter().filter(|e| !e.plus).collect();
        if plus.is_empty() || minus.is_empty() {
            continue;
        }
        plus.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        minus.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        // Overlapping pieces of plus and minus intervals (two-pointer sweep),
        // merged when consecutive pieces share the same cell pair.
        let mut pieces: Vec<(usize, usize, f64, f64)> = vec![];
        let (mut i, mut j) = (0, 0);
        while i < plus.len() && j < minus.len() {
            let a = plus[i];
            let b = minus[j];
            let lo = a.lo.max(b.lo);
            let hi = a.hi.min(b.hi);
            if hi - lo > EDGE_TOL {
                match pieces.last_mut() {
                    Some(last)
                        if last.0 == a.cell && last.1 == b.cell && (lo - last.3).abs() <= EDGE_TOL =>
                    {
                        last.3 = hi;
                    }
                    _ => pieces.push((a.cell, b.cell, lo, hi)),
                }
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        for (pc, mc, lo, hi) in pieces {
            let at = |s: f64| [offset * nu[0] + s * tau[0], offset * nu[1] + s * tau[1]];
            // Plus cell (in direction ν) on the left of p → q.
            let p = at(hi);
            let q = at(lo);
            let jp = jump_between(field, pc, mc, p);
            let jq = jump_between(field, pc, mc, q);
            let jm = jump_between(field, pc, mc, geometry::lerp(p, q, 0.5));
            let small = |v: [f64; 2]| v[0].hypot(v[1]) < JUMP_ZERO_TOL;
            if small(jp) && small(jq) && small(jm) {
                continue;
            }
            edges.push(JumpEdge {
                p,
                q,
                normal: nu,
                left: pc,
                right: mc,
                jump_p: jp,
                jump_q: jq,
            });
        }
    }
    edges.sort_by(|a, b| {
        let (ma, mb) = (a.midpoint(), b.midpoint());
        ma[0]
            .total_cmp(&mb[0])
            .then(ma[1].total_cmp(&mb[1]))
    });
    edges
}

/// Parameters in `(0, 1)` where `f(jump(t), ν)` may have a kink: zeros of
/// the jump components and the point of smallest `|jump|`.
fn breakpoints(e: &JumpEdge) -> Vec<f64> {
    let d = [e.jump_q[0] - e.jump_p[0], e.jump_q[1] - e.jump_p[1]];
    let mut ts = vec![0.0, 1.0];
    for k in 0..2 {
        if d[k] != 0.0 {
            ts.push(-e.jump_p[k] / d[k]);
        }
    }
    let dd = d[0] * d[0] + d[1] * d[1];
    if dd > 0.0 {
        ts.push(-(e.jump_p[0] * d[0] + e.jump_p[1] * d[1]) / dd);
    }
    ts.retain(|t| (0.0..=1.0).contains(t));
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    ts
}

/// `∫_e f([u], ν) dH¹` and an error estimate. Constant jumps are evaluated
/// exactly; otherwise adaptive Gauss–Legendre on the pieces between kinks
/// to tolerance `tol·max(1, energy)`.
pub fn edge_energy(d: &Density, e: &JumpEdge, tol: f64) -> Result<(f64, f64), QuadratureError> {
    let len = e.length();
    let dj = (e.jump_q[0] - e.jump_p[0]).hypot(e.jump_q[1] - e.jump_p[1]);
    let size = e.jump_p[0].hypot(e.jump_p[1]).max(e.jump_q[0].hypot(e.jump_q[1]));
    if dj <= 1e-15 * size.max(1e-300) {
        return Ok((len * d.value(&e.jump_p, &e.normal), 0.0));
    }
    let g = |t: f64| d.value(&e.jump_at(t), &e.normal);
    // Rough magnitude for the relative tolerance.
    let ts = breakpoints(e);
    let guess: f64 = ts
        .windows(2)
        .map(|w| quadrature::gauss7(&g, w[0], w[1]))
        .sum::<f64>()
        * len;
    let abs_tol = tol * guess.abs().max(1.0) / len.max(1e-300);
    let mut value = 0.0;
    let mut err = 0.0;
    let total = ts[ts.len() - 1] - ts[0];
    for w in ts.windows(2) {
        let share = abs_tol * (w[1] - w[0]) / total;
        let q = quadrature::integrate(&g, w[0], w[1], share, QUAD_MAX_DEPTH)?;
        value += q.value;
        err += q.error;
    }
    Ok((value * len, err * len))
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyBreakdown {
    pub per_edge: Vec<(usize, f64)>,
    pub total: f64,
    pub quadrature_error_bound: f64,
}

/// Sum of edge energies over the jump set.
pub fn total_energy(
    d: &Density,
    field: &PartitionField,
    tol: f64,
) -> Result<EnergyBreakdown, QuadratureError> {
    energy_of_edges(d, &extract_jump_edges(field), tol)
}

pub fn energy_of_edges(
    d: &Density,
    edges: &[JumpEdge],
    tol: f64,
) -> Result<EnergyBreakdown, QuadratureError> {
    use rayon::prelude::*;
    let parts: Vec<(f64, f64)> = edges
        .par_iter()
        .map(|e| edge_energy(d, e, tol))
        .collect::<Result<_, _>>()?;
    let mut total = 0.0;
    let mut err = 0.0;
    let mut per_edge = Vec::with_capacity(parts.len());
    for (i, (v, e)) in parts.into_iter().enumerate() {
        total += v;
        err += e;
        per_edge.push((i, v));
    }
    Ok(EnergyBreakdown {
        per_edge,
        total,
        quadrature_error_bound: err,
    })
}
