use crate::{Point, Real};

/// Gauss-Legendre points and weights on `[0, 1]` for 1 to 5 points.
pub fn gauss_1d<T: Real>(n: usize) -> Vec<(T, T)> {
    let table: &[(f64, f64)] = match n {
        1 => &[(0.0, 2.0)],
        2 => &[(-0.577_350_269_189_625_8, 1.0), (0.577_350_269_189_625_8, 1.0)],
        3 => &[(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)],
        4 => &[
            (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
            (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
        ],
        5 => &[
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.0, 0.568_888_888_888_888_9),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ],
        _ => panic!("Gauss rule with {n} points not tabulated"),
    };
    table.iter().map(|&(x, w)| (T::lit(0.5 * (x + 1.0)), T::lit(0.5 * w))).collect()
}

/// Tensor Gauss rule on the unit square.
pub fn gauss_square<T: Real>(n: usize) -> Vec<(Point<T>, T)> {
    let g = gauss_1d::<T>(n);
    let mut out = Vec::with_capacity(n * n);
    for &(y, wy) in &g {
        for &(x, wx) in &g {
            out.push(([x, y], wx * wy));
        }
    }
    out
}
