//! Planar polygon triangulation: fan for convex rings, ear clipping with hole
//! bridging otherwise.

use super::Point3;

#[derive(Copy, Clone, Debug, PartialEq)]
struct P2 {
    x: f64,
    y: f64,
}

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn signed_area(pts: &[P2], ring: &[usize]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[ring[i]], pts[ring[(i + 1) % n]]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        * 0.5
}

/// Newell normal of a closed ring (not normalized).
pub(crate) fn newell_normal(ring: &[Point3]) -> Point3 {
    let n = ring.len();
    let mut acc = Point3::ORIGIN;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        acc = acc + Point3::new((a.y - b.y) * (a.z + b.z), (a.z - b.z) * (a.x + b.x), (a.x - b.x) * (a.y + b.y));
    }
    acc
}

/// Triangulates a planar polygon with optional holes.
///
/// Indices refer to the concatenation `outer ++ holes[0] ++ holes[1] ...`.
/// Triangles keep the winding of `outer`. Degenerate input yields no triangles.
pub fn triangulate_polygon(outer: &[Point3], holes: &[Vec<Point3>]) -> Vec<[usize; 3]> {
    if outer.len() < 3 {
        return Vec::new();
    }
    let Some(normal) = newell_normal(outer).normalized() else {
        return Vec::new();
    };
    let helper = if normal.x.abs() < 0.9 { Point3::new(1.0, 0.0, 0.0) } else { Point3::new(0.0, 1.0, 0.0) };
    let u = normal.cross(helper).normalized().expect("helper is not parallel to normal");
    let v = normal.cross(u);
    // (u, v, normal) is right-handed, so `outer` projects counter-clockwise
    let project = |p: Point3| P2 { x: p.dot(u), y: p.dot(v) };

    let mut pts: Vec<P2> = outer.iter().map(|&p| project(p)).collect();
    let outer_ring: Vec<usize> = (0..outer.len()).collect();

    if holes.is_empty() && is_convex(&pts, &outer_ring) {
        return (1..outer.len() - 1).map(|i| [0, i, i + 1]).collect();
    }

    let mut hole_rings = Vec::new();
    for h in holes.iter().filter(|h| h.len() >= 3) {
        let start = pts.len();
        pts.extend(h.iter().map(|&p| project(p)));
        let mut ring: Vec<usize> = (start..pts.len()).collect();
        if signed_area(&pts, &ring) > 0.0 {
            ring.reverse();
        }
        hole_rings.push(ring);
    }

    let mut ring = outer_ring;
    if signed_area(&pts, &ring) < 0.0 {
        // projection disagrees with the Newell normal only for self-overlapping rings
        ring.reverse();
    }
    hole_rings.sort_by(|a, b| max_x(&pts, b).total_cmp(&max_x(&pts, a)));
    for hole in &hole_rings {
        bridge(&pts, &mut ring, hole);
    }
    ear_clip(&pts, ring)
}

fn max_x(pts: &[P2], ring: &[usize]) -> f64 {
    ring.iter().map(|&i| pts[i].x).fold(f64::NEG_INFINITY, f64::max)
}

fn is_convex(pts: &[P2], ring: &[usize]) -> bool {
    let n = ring.len();
    let scale = ring_scale(pts, ring);
    let area_sign = signed_area(pts, ring).signum();
    (0..n).all(|i| {
        let (a, b, c) = (pts[ring[i]], pts[ring[(i + 1) % n]], pts[ring[(i + 2) % n]]);
        cross(a, b, c) * area_sign >= -1e-12 * scale
    })
}

fn ring_scale(pts: &[P2], ring: &[usize]) -> f64 {
    let (mut lo, mut hi) =
        (P2 { x: f64::INFINITY, y: f64::INFINITY }, P2 { x: f64::NEG_INFINITY, y: f64::NEG_INFINITY });
    for &i in ring {
        lo = P2 { x: lo.x.min(pts[i].x), y: lo.y.min(pts[i].y) };
        hi = P2 { x: hi.x.max(pts[i].x), y: hi.y.max(pts[i].y) };
    }
    ((hi.x - lo.x).powi(2) + (hi.y - lo.y).powi(2)).max(f64::MIN_POSITIVE)
}

/// Splices a clockwise hole into a counter-clockwise ring through a mutually
/// visible vertex pair.
fn bridge(pts: &[P2], ring: &mut Vec<usize>, hole: &[usize]) {
    let (hole_pos, &m_idx) =
        hole.iter().enumerate().max_by(|a, b| pts[*a.1].x.total_cmp(&pts[*b.1].x)).expect("hole has vertices");
    let m = pts[m_idx];

    // nearest edge hit by the ray from m towards +x
    let n = ring.len();
    let mut best: Option<(f64, usize)> = None;
    for i in 0..n {
        let (a, b) = (pts[ring[i]], pts[ring[(i + 1) % n]]);
        if a.y == b.y || m.y < a.y.min(b.y) || m.y > a.y.max(b.y) {
            continue;
        }
        let t = (m.y - a.y) / (b.y - a.y);
        if !(0.0..=1.0).contains(&t) {
            continue;
        }
        let x = a.x + t * (b.x - a.x);
        if x >= m.x && best.is_none_or(|(bx, _)| x < bx) {
            best = Some((x, i));
        }
    }
    let Some((hit_x, edge)) = best else {
        return;
    };
    let hit = P2 { x: hit_x, y: m.y };
    let (ea, eb) = (ring[edge], ring[(edge + 1) % n]);
    let mut target = if pts[ea].x > pts[eb].x { edge } else { (edge + 1) % n };
    let p = pts[ring[target]];

    // a reflex vertex inside (m, hit, p) would block the view; take the one
    // closest in angle to the ray
    let mut best_angle = f64::INFINITY;
    for (i, &ri) in ring.iter().enumerate() {
        let q = pts[ri];
        let prev = pts[ring[(i + n - 1) % n]];
        let next = pts[ring[(i + 1) % n]];
        let reflex = cross(prev, q, next) <= 0.0;
        if !reflex || q == p || !in_triangle(m, hit, p, q) {
            continue;
        }
        let angle = (q.y - m.y).abs().atan2(q.x - m.x);
        if angle < best_angle {
            best_angle = angle;
            target = i;
        }
    }

    let mut spliced = Vec::with_capacity(ring.len() + hole.len() + 2);
    spliced.extend_from_slice(&ring[..=target]);
    spliced.extend(hole[hole_pos..].iter().chain(&hole[..hole_pos]));
    spliced.push(m_idx);
    spliced.push(ring[target]);
    spliced.extend_from_slice(&ring[target + 1..]);
    *ring = spliced;
}

fn in_triangle(a: P2, b: P2, c: P2, p: P2) -> bool {
    let (d1, d2, d3) = (cross(a, b, p), cross(b, c, p), cross(c, a, p));
    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(neg && pos)
}

fn ear_clip(pts: &[P2], mut ring: Vec<usize>) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(ring.len().saturating_sub(2));
    let eps = 1e-14 * ring_scale(pts, &ring);
    while ring.len() > 3 {
        let n = ring.len();
        let mut ear = None;
        for i in 0..n {
            let (ip, inx) = ((i + n - 1) % n, (i + 1) % n);
            let (a, b, c) = (pts[ring[ip]], pts[ring[i]], pts[ring[inx]]);
            if cross(a, b, c) <= eps {
                continue;
            }
            let blocked = ring.iter().enumerate().any(|(j, &rj)| {
                if j == ip || j == i || j == inx {
                    return false;
                }
                let q = pts[rj];
                q != a && q != b && q != c && in_triangle(a, b, c, q)
            });
            if !blocked {
                ear = Some(i);
                break;
            }
        }
        // no clean ear: clip the most convex corner so the ring still shrinks
        let i = ear.unwrap_or_else(|| {
            (0..n)
                .max_by(|&x, &y| {
                    let cx = cross(pts[ring[(x + n - 1) % n]], pts[ring[x]], pts[ring[(x + 1) % n]]);
                    let cy = cross(pts[ring[(y + n - 1) % n]], pts[ring[y]], pts[ring[(y + 1) % n]]);
                    cx.total_cmp(&cy)
                })
                .expect("ring is not empty")
        });
        out.push([ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]]);
        ring.remove(i);
    }
    if ring.len() == 3 {
        out.push([ring[0], ring[1], ring[2]]);
    }
    out
}
