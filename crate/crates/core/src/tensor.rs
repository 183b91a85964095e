//! Dense four-index tensors in row-major `[i][j][k][l]` layout.

use nalgebra::DMatrix;

#[inline]
pub fn idx4(n: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * n + j) * n + k) * n + l
}

/// One quarter transform along the leading axis followed by a cyclic shift
/// of the axes, so four calls transform every index once.
fn quarter(src: &[f64], dims: [usize; 4], c: &DMatrix<f64>) -> (Vec<f64>, [usize; 4]) {
    let [d0, d1, d2, d3] = dims;
    let m = c.ncols();
    let rest = d1 * d2 * d3;
    let mut out = vec![0.0; rest * m];
    // out[(j,k,l), a] = sum_i c[i,a] src[i,(j,k,l)]
    for i in 0..d0 {
        let row = &src[i * rest..(i + 1) * rest];
        for a in 0..m {
            let w = c[(i, a)];
            if w == 0.0 {
                continue;
            }
            for (r, &v) in row.iter().enumerate() {
                out[r * m + a] += w * v;
            }
        }
    }
    (out, [d1, d2, d3, m])
}

/// `out[a][b][c][d] = sum_ijkl c1[i,a] c2[j,b] c3[k,c] c4[l,d] g[i][j][k][l]`.
pub fn transform4(g: &[f64], n: usize, c: [&DMatrix<f64>; 4]) -> Vec<f64> {
    assert_eq!(g.len(), n * n * n * n);
    let mut dims = [n; 4];
    let mut cur = g.to_vec();
    for m in c {
        assert_eq!(m.nrows(), dims[0], "transform matrix rows must match the axis length");
        let (next, d) = quarter(&cur, dims, m);
        cur = next;
        dims = d;
    }
    cur
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(n^8) reference.
    fn naive(g: &[f64], n: usize, c: [&DMatrix<f64>; 4]) -> Vec<f64> {
        let m: Vec<usize> = c.iter().map(|x| x.ncols()).collect();
        let mut out = vec![0.0; m[0] * m[1] * m[2] * m[3]];
        for a in 0..m[0] {
            for b in 0..m[1] {
                for cc in 0..m[2] {
                    for d in 0..m[3] {
                        let mut s = 0.0;
                        for i in 0..n {
                            for j in 0..n {
                                for k in 0..n {
                                    for l in 0..n {
                                        s += c[0][(i, a)] * c[1][(j, b)] * c[2][(k, cc)] * c[3][(l, d)] * g[idx4(n, i, j, k, l)];
                                    }
                                }
                            }
                        }
                        out[((a * m[1] + b) * m[2] + cc) * m[3] + d] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_with_distinct_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4;
        let g: Vec<f64> = (0..n * n * n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mats: Vec<DMatrix<f64>> = [2, 3, 1, 4].iter().map(|&m| DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let refs = [&mats[0], &mats[1], &mats[2], &mats[3]];
        assert!(max_abs_diff(&transform4(&g, n, refs), &naive(&g, n, refs)) < 1e-12);
    }
}
