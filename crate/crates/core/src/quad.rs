//! Fixed-order quadrature on triangles (symmetric barycentric rules) and on
//! segments (Gauss-Legendre mapped to [0, 1]).
//!
//! Reference weights sum to one; physical integrals are the weighted sum of
//! samples scaled by |K| or |e|.

use crate::geom::Vec2;
use std::sync::LazyLock;

/// Symmetric quadrature rule on the triangle, points in barycentric coordinates.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

/// Gauss rule on [0, 1].
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

fn perm3(a: f64) -> [[f64; 3]; 3] {
    let c = 1.0 - 2.0 * a;
    [[a, a, c], [a, c, a], [c, a, a]]
}

fn perm6(a: f64, b: f64) -> [[f64; 3]; 6] {
    let c = 1.0 - a - b;
    [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
}

static TRI_DEG2: LazyLock<TriangleRule> = LazyLock::new(|| TriangleRule {
    points: perm3(0.5).to_vec(),
    weights: vec![1.0 / 3.0; 3],
    exact_degree: 2,
});

// 6-point Dunavant rule; parameters solved from the symmetric moment
// equations to 50 digits and rounded to f64.
static TRI_DEG4: LazyLock<TriangleRule> = LazyLock::new(|| {
    let (w1, a1) = (0.223_381_589_678_011_47, 0.445_948_490_915_964_89);
    let (w2, a2) = (0.109_951_743_655_321_87, 0.091_576_213_509_770_743);
    let mut points = perm3(a1).to_vec();
    points.extend(perm3(a2));
    let mut weights = vec![w1; 3];
    weights.extend([w2; 3]);
    TriangleRule { points, weights, exact_degree: 4 }
});

// 12-point Dunavant rule, same provenance as the degree-4 parameters.
static TRI_DEG6: LazyLock<TriangleRule> = LazyLock::new(|| {
    let (w1, a1) = (0.116_786_275_726_379_37, 0.249_286_745_170_910_42);
    let (w2, a2) = (0.050_844_906_370_206_817, 0.063_089_014_491_502_228);
    let (w3, a3, b3) = (
        0.082_851_075_618_373_575,
        0.310_352_451_033_784_41,
        0.636_502_499_121_398_65,
    );
    let mut points = perm3(a1).to_vec();
    points.extend(perm3(a2));
    points.extend(perm6(a3, b3));
    let mut weights = vec![w1; 3];
    weights.extend([w2; 3]);
    weights.extend([w3; 6]);
    TriangleRule { points, weights, exact_degree: 6 }
});

impl TriangleRule {
    /// Smallest shipped rule that is exact at least to `deg`.
    ///
    /// Shipped degrees are 2, 4 and 6; higher requests panic.
    pub fn degree(deg: usize) -> &'static TriangleRule {
        match deg {
            0..=2 => &TRI_DEG2,
            3..=4 => &TRI_DEG4,
            5..=6 => &TRI_DEG6,
            _ => panic!("no shipped triangle rule of exact degree {deg}"),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical quadrature points for the (counterclockwise) triangle `tri`.
    pub fn physical_points(&self, tri: [Vec2; 3]) -> impl Iterator<Item = (Vec2, f64)> + '_ {
        self.points.iter().zip(self.weights.iter()).map(move |(b, &w)| {
            (tri[0] * b[0] + tri[1] * b[1] + tri[2] * b[2], w)
        })
    }
}

fn gauss_on_unit(nodes: &[f64], weights: &[f64], exact_degree: usize) -> EdgeRule {
    // map from [-1, 1] to [0, 1]
    EdgeRule {
        points: nodes.iter().map(|&x| 0.5 * (1.0 + x)).collect(),
        weights: weights.iter().map(|&w| 0.5 * w).collect(),
        exact_degree,
    }
}

static EDGE_RULES: LazyLock<[EdgeRule; 5]> = LazyLock::new(|| {
    let r3 = (0.6f64).sqrt();
    let n4a = ((3.0 - 2.0 * (1.2f64).sqrt()) / 7.0).sqrt();
    let n4b = ((3.0 + 2.0 * (1.2f64).sqrt()) / 7.0).sqrt();
    let w4a = (18.0 + 30.0f64.sqrt()) / 36.0;
    let w4b = (18.0 - 30.0f64.sqrt()) / 36.0;
    let n5a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let n5b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let w5a = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
    let w5b = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
    [
        gauss_on_unit(&[0.0], &[2.0], 1),
        gauss_on_unit(&[-1.0 / 3.0f64.sqrt(), 1.0 / 3.0f64.sqrt()], &[1.0, 1.0], 3),
        gauss_on_unit(&[-r3, 0.0, r3], &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0], 5),
        gauss_on_unit(&[-n4b, -n4a, n4a, n4b], &[w4b, w4a, w4a, w4b], 7),
        gauss_on_unit(&[-n5b, -n5a, 0.0, n5a, n5b], &[w5b, w5a, 128.0 / 225.0, w5a, w5b], 9),
    ]
});

impl EdgeRule {
    /// n-point Gauss-Legendre rule on [0, 1], exact to degree 2n - 1 (n <= 5).
    pub fn gauss(n: usize) -> &'static EdgeRule {
        assert!((1..=5).contains(&n), "no shipped edge rule with {n} points");
        &EDGE_RULES[n - 1]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Integral of `f` over the triangle with vertices `tri`.
pub fn integrate_triangle(rule: &TriangleRule, tri: [Vec2; 3], f: impl Fn(Vec2) -> f64) -> f64 {
    let area = 0.5 * (tri[1] - tri[0]).cross(tri[2] - tri[0]);
    let mut acc = 0.0;
    for (x, w) in rule.physical_points(tri) {
        acc += w * f(x);
    }
    acc * area
}

/// Composite integral: the rule applied on the `4^sub` red-subdivided
/// children of the triangle. Same exact degree, smaller truncation error on
/// smooth integrands.
pub fn integrate_triangle_composite(
    rule: &TriangleRule,
    tri: [Vec2; 3],
    sub: u32,
    f: impl Fn(Vec2) -> f64 + Copy,
) -> f64 {
    if sub == 0 {
        return integrate_triangle(rule, tri, f);
    }
    let [a, b, c] = tri;
    let (mab, mbc, mca) = ((a + b) * 0.5, (b + c) * 0.5, (c + a) * 0.5);
    [[a, mab, mca], [mab, b, mbc], [mca, mbc, c], [mbc, mca, mab]]
        .into_iter()
        .map(|child| integrate_triangle_composite(rule, child, sub - 1, f))
        .sum()
}

/// Integral of `f` along the segment from `a` to `b`.
pub fn integrate_edge(rule: &EdgeRule, a: Vec2, b: Vec2, f: impl Fn(Vec2) -> f64) -> f64 {
    let len = (b - a).norm();
    let mut acc = 0.0;
    for (&t, &w) in rule.points.iter().zip(rule.weights.iter()) {
        acc += w * f(a + (b - a) * t);
    }
    acc * len
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u64) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Closed-form monomial integral over the reference triangle (0,0),(1,0),(0,1):
    /// int x^a y^b = a! b! / (a + b + 2)!.
    fn ref_monomial(a: u32, b: u32) -> f64 {
        factorial(a as u64) * factorial(b as u64) / factorial((a + b + 2) as u64)
    }

    const REF: [Vec2; 3] = [
        Vec2 { x: 0.0, y: 0.0 },
        Vec2 { x: 1.0, y: 0.0 },
        Vec2 { x: 0.0, y: 1.0 },
    ];

    #[test]
    fn triangle_rules_are_monomial_exact() {
        for deg in [2usize, 4, 6] {
            let rule = TriangleRule::degree(deg);
            assert_eq!(rule.exact_degree, deg);
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for a in 0..=deg as u32 {
                for b in 0..=(deg as u32 - a) {
                    let got = integrate_triangle(rule, REF, |p| {
                        p.x.powi(a as i32) * p.y.powi(b as i32)
                    });
                    let want = ref_monomial(a, b);
                    assert!(
                        (got - want).abs() <= 1e-14 * want.abs().max(1.0),
                        "degree {deg} rule fails x^{a} y^{b}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn edge_rules_are_monomial_exact() {
        for n in 1..=5usize {
            let rule = EdgeRule::gauss(n);
            for k in 0..=rule.exact_degree as u32 {
                let got = integrate_edge(rule, Vec2::ZERO, Vec2::new(1.0, 0.0), |p| {
                    p.x.powi(k as i32)
                });
                let want = 1.0 / (k as f64 + 1.0);
                assert!(
                    (got - want).abs() <= 1e-14 * want,
                    "{n}-point rule fails t^{k}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn constant_integrates_to_area_and_length() {
        let tri = [Vec2::new(0.2, 0.1), Vec2::new(1.3, 0.4), Vec2::new(0.6, 1.9)];
        let area = 0.5 * (tri[1] - tri[0]).cross(tri[2] - tri[0]);
        for deg in [2, 4, 6] {
            let got = integrate_triangle(TriangleRule::degree(deg), tri, |_| 3.5);
            assert!((got - 3.5 * area).abs() < 1e-14 * area.abs());
        }
        let (a, b) = (Vec2::new(0.5, -1.0), Vec2::new(2.0, 2.5));
        let got = integrate_edge(EdgeRule::gauss(3), a, b, |_| 3.5);
        assert!((got - 3.5 * (b - a).norm()).abs() < 1e-13);
    }

    #[test]
    fn barycentric_bubble_on_unit_right_triangle() {
        // psi1 psi2 psi3 integrates to 2|K| 1!1!1!/5! = 1/120 on the unit right triangle
        let got = integrate_triangle(TriangleRule::degree(4), REF, |p| {
            let (psi2, psi3) = (p.x, p.y);
            let psi1 = 1.0 - p.x - p.y;
            psi1 * psi2 * psi3
        });
        assert!((got - 1.0 / 120.0).abs() < 1e-16);
    }

    #[test]
    fn composite_rule_agrees_on_polynomials_and_improves_on_transcendentals() {
        let tri = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.2), Vec2::new(0.3, 1.1)];
        let rule = TriangleRule::degree(6);
        // exact agreement on a degree-6 polynomial
        let poly = |p: Vec2| p.x.powi(4) * p.y.powi(2) - 2.0 * p.x * p.y;
        let plain = integrate_triangle(rule, tri, poly);
        let comp = integrate_triangle_composite(rule, tri, 2, poly);
        assert!((plain - comp).abs() < 1e-14 * plain.abs().max(1.0));
        // smaller truncation error on an oscillatory integrand
        let f = |p: Vec2| (7.0 * p.x).sin() * (5.0 * p.y).cos();
        let fine = integrate_triangle_composite(rule, tri, 4, f);
        let e_plain = (integrate_triangle(rule, tri, f) - fine).abs();
        let e_comp = (integrate_triangle_composite(rule, tri, 2, f) - fine).abs();
        assert!(e_comp < e_plain / 100.0, "{e_comp} vs {e_plain}");
    }

    #[test]
    fn gauss3_is_degree_five_exact() {
        let got = integrate_edge(EdgeRule::gauss(3), Vec2::ZERO, Vec2::new(1.0, 0.0), |p| {
            p.x.powi(5)
        });
        assert!((got - 1.0 / 6.0).abs() < 1e-15);
    }
}
