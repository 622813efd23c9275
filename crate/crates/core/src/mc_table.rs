//! Marching-cubes case table, built once from the cube's face topology.
//!
//! For each of the 256 inside/outside corner patterns, the contour on every
//! face is traced with a fixed rule (on a face with two diagonal inside
//! corners, the inside corners are kept apart), the face segments are
//! chained into closed loops on the cube surface, and each loop is fanned
//! into triangles. Neighbouring cubes see the same corner pattern on a
//! shared face and therefore the same segments, which makes the extracted
//! mesh watertight.

use std::sync::OnceLock;

/// Corner offsets in cell units.
pub(crate) const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Edge endpoints as corner indices. The first corner is the lower one
/// along the edge's axis.
pub(crate) const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [3, 2],
    [0, 3],
    [1, 2],
    [4, 5],
    [7, 6],
    [4, 7],
    [5, 6],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Face corners in counter-clockwise order seen from outside the cube.
const FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [3, 7, 6, 2],
    [0, 4, 7, 3],
    [1, 2, 6, 5],
];

pub(crate) fn edge_axis(e: usize) -> usize {
    let [a, b] = EDGES[e];
    (0..3).find(|&k| CORNERS[a][k] != CORNERS[b][k]).expect("edge spans one axis")
}

fn edge_between(a: usize, b: usize) -> usize {
    EDGES
        .iter()
        .position(|&[x, y]| (x == a && y == b) || (x == b && y == a))
        .expect("face corners are adjacent")
}

/// Triangles (as triples of cube edges) for every corner mask.
/// Bit `i` of the mask is set when corner `i` is inside.
pub(crate) fn table() -> &'static [Vec<[usize; 3]>; 256] {
    static TABLE: OnceLock<[Vec<[usize; 3]>; 256]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(|mask| triangulate(mask as u8)))
}

fn triangulate(mask: u8) -> Vec<[usize; 3]> {
    let inside = |c: usize| mask & (1 << c) != 0;
    // next[e] = edge where the contour segment starting at e ends.
    let mut next = [usize::MAX; 12];
    for face in FACES {
        // Crossings in CCW order: (edge, leaves the inside region).
        let mut crossings = Vec::with_capacity(4);
        for k in 0..4 {
            let (a, b) = (face[k], face[(k + 1) % 4]);
            if inside(a) != inside(b) {
                crossings.push((edge_between(a, b), inside(a)));
            }
        }
        let n = crossings.len();
        for k in 0..n {
            let (edge, exits) = crossings[k];
            if exits {
                // Pair with the preceding entry, cutting off the inside
                // corner that sits between them.
                let (prev, prev_exits) = crossings[(k + n - 1) % n];
                debug_assert!(!prev_exits);
                next[edge] = prev;
            }
        }
    }

    let mut tris = Vec::new();
    let mut seen = [false; 12];
    for start in 0..12 {
        if next[start] == usize::MAX || seen[start] {
            continue;
        }
        let mut lp = Vec::new();
        let mut e = start;
        while !seen[e] {
            seen[e] = true;
            lp.push(e);
            e = next[e];
        }
        debug_assert_eq!(e, start);
        for i in 1..lp.len() - 1 {
            tris.push([lp[0], lp[i + 1], lp[i]]);
        }
    }
    tris
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    fn corner(c: usize) -> Vec3 {
        let o = CORNERS[c];
        Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64)
    }

    fn midpoint(e: usize) -> Vec3 {
        let [a, b] = EDGES[e];
        0.5 * (corner(a) + corner(b))
    }

    #[test]
    fn faces_are_counter_clockwise_from_outside() {
        let centre = Vec3::repeat(0.5);
        for face in FACES {
            let c: Vec<Vec3> = face.iter().map(|&i| corner(i)).collect();
            let n = (c[1] - c[0]).cross(&(c[2] - c[1]));
            let outward = (c[0] + c[2]) / 2.0 - centre;
            assert!(n.dot(&outward) > 0.0);
        }
    }

    #[test]
    fn edges_run_along_positive_axis() {
        for e in 0..12 {
            let [a, b] = EDGES[e];
            let ax = edge_axis(e);
            assert_eq!(CORNERS[a][ax], 0);
            assert_eq!(CORNERS[b][ax], 1);
        }
    }

    #[test]
    fn trivial_cases_are_empty() {
        assert!(table()[0].is_empty());
        assert!(table()[255].is_empty());
    }

    #[test]
    fn single_corner_triangle_faces_away_from_inside() {
        for c in 0..8 {
            let tris = &table()[1 << c];
            assert_eq!(tris.len(), 1);
            let [a, b, d] = tris[0].map(midpoint);
            let n = (b - a).cross(&(d - a));
            assert!(n.dot(&(a - corner(c))) > 0.0, "corner {c}");
        }
    }

    #[test]
    fn every_crossed_edge_is_used_and_surface_closes() {
        for mask in 0..=255u8 {
            let tris = &table()[mask as usize];
            let inside = |c: usize| mask & (1 << c) != 0;
            let crossed: Vec<usize> = (0..12).filter(|&e| inside(EDGES[e][0]) != inside(EDGES[e][1])).collect();
            let mut used: Vec<usize> = tris.iter().flatten().copied().collect();
            used.sort_unstable();
            used.dedup();
            assert_eq!(used, crossed, "mask {mask}");
            // Within the cube, each directed interior edge of the patch is
            // matched by its reverse; boundary edges lie on cube faces.
            let mut directed = Vec::new();
            for t in tris {
                for k in 0..3 {
                    directed.push((t[k], t[(k + 1) % 3]));
                }
            }
            for &(a, b) in &directed {
                assert!(!directed.iter().filter(|&&d| d == (a, b)).nth(1).is_some(), "mask {mask}");
            }
        }
    }

    #[test]
    fn complement_uses_the_same_edges() {
        for mask in 0..=255u8 {
            let mut a: Vec<usize> = table()[mask as usize].iter().flatten().copied().collect();
            let mut b: Vec<usize> = table()[(!mask) as usize].iter().flatten().copied().collect();
            a.sort_unstable();
            a.dedup();
            b.sort_unstable();
            b.dedup();
            assert_eq!(a, b);
        }
    }
}
