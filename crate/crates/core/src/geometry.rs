//! Planar convex-polygon helpers.

pub type Point = [f64; 2];

pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let p = poly[i];
            let q = poly[(i + 1) % n];
            p[0] * q[1] - p[1] * q[0]
        })
        .sum::<f64>()
        * 0.5
}

pub fn centroid(poly: &[Point]) -> Point {
    let a = signed_area(poly);
    if a.abs() < 1e-300 {
        let n = poly.len() as f64;
        let s = poly.iter().fold([0.0, 0.0], |s, p| [s[0] + p[0], s[1] + p[1]]);
        return [s[0] / n, s[1] / n];
    }
    let n = poly.len();
    let mut c = [0.0, 0.0];
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let w = p[0] * q[1] - p[1] * q[0];
        c[0] += (p[0] + q[0]) * w;
        c[1] += (p[1] + q[1]) * w;
    }
    [c[0] / (6.0 * a), c[1] / (6.0 * a)]
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counterclockwise and convex: every turn is a left turn up to `tol`
/// (relative to the squared edge lengths).
pub fn is_convex_ccw(poly: &[Point], tol: f64) -> bool {
    let n = poly.len();
    if n < 3 || signed_area(poly) <= 0.0 {
        return false;
    }
    (0..n).all(|i| {
        let o = poly[i];
        let a = poly[(i + 1) % n];
        let b = poly[(i + 2) % n];
        let la = dist(o, a);
        let lb = dist(a, b);
        cross(o, a, b) >= -tol * la.max(lb).max(1e-300).powi(2)
    })
}

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Part of `poly` in the half-plane `{x : x·n ≤ c}`.
pub fn clip_halfplane(poly: &[Point], n: Point, c: f64) -> Vec<Point> {
    let m = poly.len();
    let mut out = Vec::with_capacity(m + 1);
    for i in 0..m {
        let p = poly[i];
        let q = poly[(i + 1) % m];
        let sp = dot(p, n) - c;
        let sq = dot(q, n) - c;
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            out.push(lerp(p, q, sp / (sp - sq)));
        }
    }
    dedup(out)
}

/// Drops consecutive (cyclically) coincident vertices.
pub fn dedup(poly: Vec<Point>) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(poly.len());
    for p in poly {
        if out.last().map_or(true, |q| dist(*q, p) > 1e-15) {
            out.push(p);
        }
    }
    while out.len() > 1 && dist(out[0], *out.last().unwrap()) <= 1e-15 {
        out.pop();
    }
    out
}

/// Area of the intersection of two convex counterclockwise polygons.
pub fn intersection_area(a: &[Point], b: &[Point]) -> f64 {
    let mut poly = a.to_vec();
    let m = b.len();
    for i in 0..m {
        if poly.len() < 3 {
            return 0.0;
        }
        let p = b[i];
        let q = b[(i + 1) % m];
        // outward normal of a ccw edge
        let n = [q[1] - p[1], p[0] - q[0]];
        poly = clip_halfplane(&poly, n, dot(n, p));
    }
    if poly.len() < 3 {
        0.0
    } else {
        signed_area(&poly).max(0.0)
    }
}

pub fn bbox(poly: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in poly {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Length of the chord `{x : x·n = c}` through a convex polygon.
pub fn chord_length(poly: &[Point], n: Point, c: f64) -> f64 {
    let m = poly.len();
    let t = [-n[1], n[0]];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let p = poly[i];
        let q = poly[(i + 1) % m];
        let sp = dot(p, n) - c;
        let sq = dot(q, n) - c;
        let mut hit = |x: Point| {
            let s = dot(x, t);
            lo = lo.min(s);
            hi = hi.max(s);
        };
        if sp == 0.0 {
            hit(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            hit(lerp(p, q, sp / (sp - sq)));
        }
    }
    if hi > lo {
        (hi - lo) / dot(n, n).sqrt()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQ: [Point; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

    #[test]
    fn area_and_centroid() {
        assert_eq!(signed_area(&SQ), 1.0);
        assert_eq!(centroid(&SQ), [0.5, 0.5]);
        assert!(is_convex_ccw(&SQ, 1e-12));
        let mut cw = SQ;
        cw.reverse();
        assert!(!is_convex_ccw(&cw, 1e-12));
    }

    #[test]
    fn clipping() {
        let half = clip_halfplane(&SQ, [1.0, 0.0], 0.25);
        assert!((signed_area(&half) - 0.25).abs() < 1e-15);
        let shifted: Vec<Point> = SQ.iter().map(|p| [p[0] + 0.5, p[1]]).collect();
        assert!((intersection_area(&SQ, &shifted) - 0.5).abs() < 1e-15);
        assert!((chord_length(&SQ, [1.0, 1.0], 1.0) - 2f64.sqrt()).abs() < 1e-15);
    }
}
