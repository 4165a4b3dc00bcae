//! Five-point Laplacian with zero-flux (mirrored ghost) or pinned-zero boundaries.

use rayon::prelude::*;

use crate::types::{BoundaryKind, Field2D, GridSpec};

/// Rows handed to one rayon task.
const ROWS_PER_TASK: usize = 8;

/// Reusable scratch storage for Laplacian evaluations on one grid.
#[derive(Debug, Clone)]
pub struct LaplacianWorkspace {
    pub(crate) scratch: Field2D,
}

impl LaplacianWorkspace {
    pub fn new(grid: &GridSpec) -> Self {
        LaplacianWorkspace {
            scratch: Field2D::zeros(grid.nodes()),
        }
    }

    /// Laplacian of `f`, borrowed from the workspace until the next call.
    pub fn apply(&mut self, f: &Field2D, grid: &GridSpec) -> &Field2D {
        if self.scratch.nodes() != grid.nodes() {
            self.scratch = Field2D::zeros(grid.nodes());
        }
        laplacian_into(f, grid, self.scratch.values_mut());
        &self.scratch
    }
}

/// Discrete Laplacian of `f` on `grid`.
///
/// Under `NeumannZeroFlux` every node is evaluated, with an out-of-domain
/// neighbor replaced by its mirror image across the boundary. Under
/// `DirichletZero` boundary nodes are not evolved and get 0.
pub fn laplacian(f: &Field2D, grid: &GridSpec) -> Field2D {
    let mut out = Field2D::zeros(grid.nodes());
    laplacian_into(f, grid, out.values_mut());
    out
}

/// In-place variant of [`laplacian`]; `out` must hold `n²` values.
pub fn laplacian_into(f: &Field2D, grid: &GridSpec, out: &mut [f64]) {
    let n = grid.nodes();
    assert_eq!(f.nodes(), n, "field does not match grid");
    assert_eq!(out.len(), n * n, "output buffer does not match grid");
    let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    let boundary = grid.boundary();

    out.par_chunks_mut(n)
        .with_min_len(ROWS_PER_TASK)
        .enumerate()
        .for_each(|(i, row)| laplacian_row(f, i, boundary, inv_dx2, row));
}

/// Ghost-aware neighbor index: `-1 -> 1` and `n -> n-2`.
#[inline]
fn mirror(k: isize, n: usize) -> usize {
    if k < 0 {
        (-k) as usize
    } else if k as usize >= n {
        2 * (n - 1) - k as usize
    } else {
        k as usize
    }
}

#[inline]
fn laplacian_row(f: &Field2D, i: usize, boundary: BoundaryKind, inv_dx2: f64, out: &mut [f64]) {
    let n = f.nodes();
    match boundary {
        BoundaryKind::NeumannZeroFlux => {
            let up = f.row(mirror(i as isize - 1, n));
            let mid = f.row(i);
            let down = f.row(mirror(i as isize + 1, n));
            for j in 0..n {
                let left = mid[mirror(j as isize - 1, n)];
                let right = mid[mirror(j as isize + 1, n)];
                out[j] = five_point(up[j], down[j], left, right, mid[j], inv_dx2);
            }
        }
        BoundaryKind::DirichletZero => {
            if i == 0 || i == n - 1 {
                out.fill(0.0);
                return;
            }
            let up = f.row(i - 1);
            let mid = f.row(i);
            let down = f.row(i + 1);
            out[0] = 0.0;
            out[n - 1] = 0.0;
            for j in 1..n - 1 {
                out[j] = five_point(up[j], down[j], mid[j - 1], mid[j + 1], mid[j], inv_dx2);
            }
        }
    }
}

// Pairing (up+down) and (left+right) keeps the result bitwise invariant under
// transposition and quarter-turn rotations of the input.
#[inline(always)]
fn five_point(up: f64, down: f64, left: f64, right: f64, center: f64, inv_dx2: f64) -> f64 {
    ((up + down) + (left + right) - 4.0 * center) * inv_dx2
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: usize, b: BoundaryKind) -> GridSpec {
        GridSpec::new(1.0, n, b).unwrap()
    }

    #[test]
    fn constant_field_neumann_is_zero() {
        let g = grid(21, BoundaryKind::NeumannZeroFlux);
        let lap = laplacian(&Field2D::constant(21, 3.7), &g);
        assert!(lap.values().iter().all(|&v| v.abs() < 1e-9), "{:?}", lap.max());
    }

    #[test]
    fn quadratic_gives_four_at_interior_nodes() {
        for b in [BoundaryKind::NeumannZeroFlux, BoundaryKind::DirichletZero] {
            let g = grid(41, b);
            let f = Field2D::from_fn(41, |i, j| {
                let (x, y) = (g.coord(i), g.coord(j));
                x * x + y * y
            });
            let lap = laplacian(&f, &g);
            for i in 1..40 {
                for j in 1..40 {
                    assert!((lap.get(i, j) - 4.0).abs() < 1e-9, "{i},{j}: {}", lap.get(i, j));
                }
            }
        }
    }

    #[test]
    fn dirichlet_boundary_nodes_are_zero() {
        let g = grid(11, BoundaryKind::DirichletZero);
        let f = Field2D::from_fn(11, |i, j| (i * 11 + j) as f64);
        let lap = laplacian(&f, &g);
        for k in 0..11 {
            for (i, j) in [(0, k), (10, k), (k, 0), (k, 10)] {
                assert_eq!(lap.get(i, j), 0.0);
            }
        }
    }

    fn cos_error(n: usize) -> f64 {
        let g = grid(n, BoundaryKind::NeumannZeroFlux);
        let f = Field2D::from_fn(n, |i, j| (PI * g.coord(i)).cos() * (PI * g.coord(j)).cos());
        let lap = laplacian(&f, &g);
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                err = err.max((lap.get(i, j) + 2.0 * PI * PI * f.get(i, j)).abs());
            }
        }
        err
    }

    #[test]
    fn cosine_mode_second_order() {
        // cos(πx)cos(πy) satisfies the zero-flux condition, so the mirrored
        // ghosts are exact and the error is the stencil truncation error
        // π⁴ dx²/12 · 2 · max|f| at leading order.
        let e101 = cos_error(101);
        let leading = 2.0 * PI.powi(4) * 1e-4 / 12.0;
        assert!((e101 / leading - 1.0).abs() < 1e-2, "e101 = {e101:e}");
        let order = (cos_error(51) / e101).log2();
        assert!((1.8..=2.2).contains(&order), "order {order}");
        let order = (e101 / cos_error(201)).log2();
        assert!((1.8..=2.2).contains(&order), "order {order}");
    }

    #[test]
    fn neumann_trapezoid_sum_vanishes() {
        let n = 31;
        let g = grid(n, BoundaryKind::NeumannZeroFlux);
        let f = Field2D::from_fn(n, |i, j| ((i * 7 + j * 13) % 17) as f64 - 3.0 * (i as f64).sin());
        let lap = laplacian(&f, &g);
        let sum: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| g.trapezoid_weight(i, j) * lap.get(i, j) * g.dx() * g.dx())
            .sum();
        let fmax = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(sum.abs() <= 1e-10 * fmax * (n * n) as f64, "sum = {sum:e}");
    }

    #[test]
    fn transpose_and_rotation_commute() {
        let n = 17;
        for b in [BoundaryKind::NeumannZeroFlux, BoundaryKind::DirichletZero] {
            let g = grid(n, b);
            let f = Field2D::from_fn(n, |i, j| ((i * 31 + j * 7) % 11) as f64 * 0.37 + (j as f64).cos());
            let ft = Field2D::from_fn(n, |i, j| f.get(j, i));
            let fr = Field2D::from_fn(n, |i, j| f.get(j, n - 1 - i));
            let lap = laplacian(&f, &g);
            let lapt = laplacian(&ft, &g);
            let lapr = laplacian(&fr, &g);
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(lapt.get(i, j), lap.get(j, i));
                    assert_eq!(lapr.get(i, j), lap.get(j, n - 1 - i));
                }
            }
        }
    }

    #[test]
    fn workspace_matches_free_function() {
        let g = grid(13, BoundaryKind::NeumannZeroFlux);
        let f = Field2D::from_fn(13, |i, j| (i as f64 * 0.3).sin() + j as f64);
        let mut ws = LaplacianWorkspace::new(&g);
        assert_eq!(ws.apply(&f, &g), &laplacian(&f, &g));
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let n = 64;
        let g = grid(n, BoundaryKind::NeumannZeroFlux);
        let f = Field2D::from_fn(n, |i, j| ((i * j) as f64).sqrt().sin());
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| laplacian(&f, &g));
        let wide = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| laplacian(&f, &g));
        assert_eq!(serial, wide);
    }

    proptest! {
        #[test]
        fn linearity(
            vals in prop::collection::vec(-10.0f64..10.0, 2 * 9 * 9),
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
            dirichlet in any::<bool>(),
        ) {
            let kind = if dirichlet { BoundaryKind::DirichletZero } else { BoundaryKind::NeumannZeroFlux };
            let g = grid(9, kind);
            let f = Field2D::from_vec(9, vals[..81].to_vec()).unwrap();
            let h = Field2D::from_vec(9, vals[81..].to_vec()).unwrap();
            let combo = Field2D::from_vec(
                9,
                f.values().iter().zip(h.values()).map(|(x, y)| a * x + b * y).collect(),
            ).unwrap();
            let lf = laplacian(&f, &g);
            let lh = laplacian(&h, &g);
            let lc = laplacian(&combo, &g);
            let scale = lf.values().iter().chain(lh.values()).fold(1.0f64, |m, v| m.max(v.abs()))
                * (a.abs() + b.abs()).max(1.0);
            for k in 0..81 {
                let expect = a * lf.values()[k] + b * lh.values()[k];
                prop_assert!((lc.values()[k] - expect).abs() <= 1e-12 * scale);
            }
        }
    }
}
