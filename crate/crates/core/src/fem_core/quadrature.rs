//! Quadrature rules in barycentric coordinates with weights normalised to sum to one.

/// A quadrature point: barycentric coordinates and weight (fraction of the cell measure).
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint<const N: usize> {
    pub bary: [f64; N],
    pub weight: f64,
}

const TA: f64 = 0.310_885_919_263_300_609_797_345_733_763_457_8;
const TB: f64 = 0.092_735_250_310_891_226_402_323_913_737_030_61;
const TC: f64 = 0.045_503_704_125_649_649_491_880_526_279_339_43;
const WA: f64 = 0.112_687_925_718_015_850_799_185_652_333_28;
const WB: f64 = 0.073_493_043_116_361_949_543_719_782_557_60;
const WC: f64 = 0.042_546_020_777_081_466_438_069_428_120_25;

/// 14-point positive rule on the tetrahedron, exact through degree 5.
pub fn tet_rule() -> [QuadPoint<4>; 14] {
    let ta = 1.0 - 3.0 * TA;
    let tb = 1.0 - 3.0 * TB;
    let tc = 0.5 - TC;
    let q = |bary, weight| QuadPoint { bary, weight };
    [
        q([ta, TA, TA, TA], WA),
        q([TA, ta, TA, TA], WA),
        q([TA, TA, ta, TA], WA),
        q([TA, TA, TA, ta], WA),
        q([tb, TB, TB, TB], WB),
        q([TB, tb, TB, TB], WB),
        q([TB, TB, tb, TB], WB),
        q([TB, TB, TB, tb], WB),
        q([TC, TC, tc, tc], WC),
        q([TC, tc, TC, tc], WC),
        q([TC, tc, tc, TC], WC),
        q([tc, TC, TC, tc], WC),
        q([tc, TC, tc, TC], WC),
        q([tc, tc, TC, TC], WC),
    ]
}

const SA: f64 = 0.445_948_490_915_965;
const SB: f64 = 0.091_576_213_509_771;
const WSA: f64 = 0.223_381_589_678_011;
const WSB: f64 = 0.109_951_743_655_322;

/// 6-point rule on the triangle, exact through degree 4.
pub fn triangle_rule() -> [QuadPoint<3>; 6] {
    let sa = 1.0 - 2.0 * SA;
    let sb = 1.0 - 2.0 * SB;
    let q = |bary, weight| QuadPoint { bary, weight };
    [
        q([sa, SA, SA], WSA),
        q([SA, sa, SA], WSA),
        q([SA, SA, sa], WSA),
        q([sb, SB, SB], WSB),
        q([SB, sb, SB], WSB),
        q([SB, SB, sb], WSB),
    ]
}
