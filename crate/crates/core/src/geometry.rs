//! Small fixed-size vector helpers shared by the mesh and assembly code.

pub type Point = [f64; 3];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn midpoint(a: Point, b: Point) -> Point {
    scale(add(a, b), 0.5)
}

/// Signed volume of the tetrahedron `(a, b, c, d)`.
#[inline]
pub fn signed_volume(a: Point, b: Point, c: Point, d: Point) -> f64 {
    dot(sub(b, a), cross(sub(c, a), sub(d, a))) / 6.0
}

pub fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let s = points.iter().fold([0.0; 3], |acc, &p| add(acc, p));
    scale(s, 1.0 / n)
}

/// Gradients of the four barycentric coordinates of a tetrahedron, together
/// with its (unsigned) volume.
pub fn barycentric_gradients(p: [Point; 4]) -> ([Point; 4], f64) {
    let vol6 = 6.0 * signed_volume(p[0], p[1], p[2], p[3]);
    let mut g = [[0.0; 3]; 4];
    // grad(lambda_i) is orthogonal to the face opposite vertex i.
    for (i, gi) in g.iter_mut().enumerate() {
        let o: Vec<usize> = (0..4).filter(|&k| k != i).collect();
        let (a, b, c) = (p[o[0]], p[o[1]], p[o[2]]);
        let n = cross(sub(b, a), sub(c, a));
        let s = dot(n, sub(p[i], a));
        *gi = scale(n, 1.0 / s);
    }
    (g, vol6.abs() / 6.0)
}

/// Surface gradients of the three barycentric coordinates of a triangle,
/// its unit normal (right-hand rule on the vertex order) and its area.
pub fn triangle_gradients(p: [Point; 3]) -> ([Point; 3], Point, f64) {
    let n2 = cross(sub(p[1], p[0]), sub(p[2], p[0]));
    let twice_area = norm(n2);
    let n = scale(n2, 1.0 / twice_area);
    let mut g = [[0.0; 3]; 3];
    for (i, gi) in g.iter_mut().enumerate() {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        // n x (b - a) points from the opposite edge towards vertex i.
        *gi = scale(cross(n, sub(b, a)), 1.0 / twice_area);
    }
    (g, n, 0.5 * twice_area)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barycentric_gradients_partition_unity() {
        let p = [[0.1, 0.0, 0.2], [1.0, 0.3, 0.0], [0.2, 1.1, 0.1], [0.0, 0.2, 0.9]];
        let (g, vol) = barycentric_gradients(p);
        assert!(vol > 0.0);
        let s = g.iter().fold([0.0; 3], |acc, &x| add(acc, x));
        assert!(norm(s) < 1e-13);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                let d = dot(g[i], sub(p[j], p[(j + 1) % 4]));
                let e = expect - if i == (j + 1) % 4 { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn triangle_gradients_are_tangent_and_dual() {
        let p = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.5], [0.3, 1.0, 0.0]];
        let (g, n, area) = triangle_gradients(p);
        assert!(area > 0.0);
        for i in 0..3 {
            assert!(dot(g[i], n).abs() < 1e-14);
            for j in 0..3 {
                let d = dot(g[i], sub(p[j], p[0]));
                let expect = if j == i { 1.0 } else { 0.0 } - if i == 0 { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12, "{i} {j} {d}");
            }
        }
    }
}
