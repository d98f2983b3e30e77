//! Octonion product on the basis 1, e1..e7 = i, j, k, x, ix, jx, kx.

use nalgebra::{DMatrix, DVector};

pub type Octonion = [f64; 8];

/// Signed basis index: e_a e_b = sign * e_c (c = 0 is the unit).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Signed {
    pub sign: f64,
    pub index: usize,
}

const fn s(sign: f64, index: usize) -> Signed {
    Signed { sign, index }
}

// Rows ix, jx, kx times columns i, j, k, x, ix, jx, kx.
const TABLE_ROWS: [[Signed; 7]; 3] = [
    [s(1., 4), s(-1., 7), s(1., 6), s(-1., 1), s(-1., 0), s(-1., 3), s(1., 2)],
    [s(1., 7), s(1., 4), s(-1., 5), s(-1., 2), s(1., 3), s(-1., 0), s(-1., 1)],
    [s(-1., 6), s(1., 5), s(1., 4), s(-1., 3), s(-1., 2), s(1., 1), s(-1., 0)],
];

/// The 7x7 product table on imaginary units, indices 1..=7.
pub fn table() -> [[Signed; 8]; 8] {
    let mut t: [[Option<Signed>; 8]; 8] = [[None; 8]; 8];
    let mut put = |a: usize, b: usize, v: Signed| {
        if let Some(old) = t[a][b] {
            assert_eq!(old, v, "octonion table conflict at ({a},{b})");
        }
        t[a][b] = Some(v);
        if a != b {
            let neg = Signed { sign: -v.sign, index: v.index };
            if let Some(old) = t[b][a] {
                assert_eq!(old, neg, "octonion table conflict at ({b},{a})");
            }
            t[b][a] = Some(neg);
        }
    };
    for a in 1..8 {
        put(a, a, s(-1., 0));
    }
    put(1, 2, s(1., 3));
    put(2, 3, s(1., 1));
    put(3, 1, s(1., 2));
    put(1, 4, s(1., 5));
    put(2, 4, s(1., 6));
    put(3, 4, s(1., 7));
    for (r, row) in TABLE_ROWS.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            put(5 + r, 1 + c, v);
        }
    }
    let mut out = [[s(0., 0); 8]; 8];
    for a in 0..8 {
        for b in 0..8 {
            out[a][b] = if a == 0 {
                s(1., b)
            } else if b == 0 {
                s(1., a)
            } else {
                t[a][b].expect("octonion table incomplete")
            };
        }
    }
    out
}

pub fn mul(x: &Octonion, y: &Octonion) -> Octonion {
    let t = table();
    let mut out = [0.0; 8];
    for a in 0..8 {
        if x[a] == 0.0 {
            continue;
        }
        for b in 0..8 {
            if y[b] == 0.0 {
                continue;
            }
            let e = t[a][b];
            out[e.index] += e.sign * x[a] * y[b];
        }
    }
    out
}

pub fn imaginary(v: &DVector<f64>) -> Octonion {
    let mut o = [0.0; 8];
    o[1..8].copy_from_slice(&v.as_slice()[..7]);
    o
}

/// Matrix of v -> Im(v u) on Im O = R^7 (the almost complex structure at u).
pub fn right_mul_matrix(u: &DVector<f64>) -> DMatrix<f64> {
    let uo = imaginary(u);
    let mut m = DMatrix::zeros(7, 7);
    for i in 0..7 {
        let mut e = [0.0; 8];
        e[i + 1] = 1.0;
        let p = mul(&e, &uo);
        for r in 0..7 {
            m[(r, i)] = p[r + 1];
        }
    }
    m
}

/// Largest defect of x(xy) = (xx)y and (yx)x = y(xx) over all basis pairs.
pub fn alternativity_defect() -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..8 {
        for b in 0..8 {
            let mut x = [0.0; 8];
            let mut y = [0.0; 8];
            x[a] += 1.0;
            x[(a + 3) % 8] += 0.5;
            y[b] = 1.0;
            let l = mul(&x, &mul(&x, &y));
            let r = mul(&mul(&x, &x), &y);
            let l2 = mul(&mul(&y, &x), &x);
            let r2 = mul(&y, &mul(&x, &x));
            for i in 0..8 {
                worst = worst.max((l[i] - r[i]).abs()).max((l2[i] - r2[i]).abs());
            }
        }
    }
    worst
}

/// Linear constraints D(e_a e_b) = D(e_a) e_b + e_a D(e_b) on the 49 entries
/// of D (row-major unknowns), one block of 8 rows per ordered pair.
pub fn derivation_constraints() -> DMatrix<f64> {
    let t = table();
    let mut m = DMatrix::zeros(49 * 8, 49);
    let mut row = 0;
    for a in 1..8 {
        for b in 1..8 {
            let prod = t[a][b];
            // D(e_a e_b): D e_c = sum_r D[r][c] e_r, for imaginary c
            if prod.index != 0 {
                let c = prod.index - 1;
                for r in 0..7 {
                    m[(row + r + 1, r * 7 + c)] += prod.sign;
                }
            }
            // - D(e_a) e_b = - sum_r D[r][a] e_r e_b
            for r in 0..7 {
                let e = t[r + 1][b];
                m[(row + e.index, r * 7 + (a - 1))] -= e.sign;
            }
            // - e_a D(e_b)
            for r in 0..7 {
                let e = t[a][r + 1];
                m[(row + e.index, r * 7 + (b - 1))] -= e.sign;
            }
            row += 8;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_alternative() {
        assert_eq!(alternativity_defect(), 0.0);
    }

    #[test]
    fn quaternion_and_doubling_entries() {
        let t = table();
        assert_eq!(t[1][2], s(1., 3));
        assert_eq!(t[3][2], s(-1., 1));
        assert_eq!(t[5][1], s(1., 4));
        assert_eq!(t[1][5], s(-1., 4));
        assert_eq!(t[7][6], s(1., 1));
    }

    #[test]
    fn right_multiplication_is_complex_structure() {
        let mut u = DVector::zeros(7);
        u[0] = 0.6;
        u[4] = 0.8;
        let j = right_mul_matrix(&u);
        // on the orthogonal complement of u, J^2 = -1
        let proj = DMatrix::identity(7, 7) - &u * u.transpose();
        let jj = &j * &j * &proj + &proj;
        assert!(jj.norm() < 1e-14);
    }
}
