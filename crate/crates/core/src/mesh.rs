//! Uniform node-centered grid on a rectangle.
//!
//! Nodes sit at `(i*h, j*h)` for `i = 0..nx`, `j = 0..ny`, stored row-major
//! (`node = j*nx + i`). Perimeter nodes lie on the boundary, so the trace of a
//! bulk field is a plain index subset. The perimeter is walked counterclockwise
//! starting at the origin corner and treated as a uniform periodic 1D lattice
//! with spacing `h`, corners included.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Relative tolerance used to decide that `Lx/(nx-1)` and `Ly/(ny-1)` agree.
const SQUARE_CELL_RTOL: f64 = 1e-12;

/// Side of the rectangle a perimeter node belongs to, named by its outward normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `x = 0`, outward normal `-x`.
    Left,
    /// `x = Lx`, outward normal `+x`.
    Right,
    /// `y = 0`, outward normal `-y`.
    Bottom,
    /// `y = Ly`, outward normal `+y`.
    Top,
}

impl Side {
    /// Unit step `(di, dj)` pointing from the boundary into the domain.
    fn inward(self) -> (isize, isize) {
        match self {
            Side::Left => (1, 0),
            Side::Right => (-1, 0),
            Side::Bottom => (0, 1),
            Side::Top => (0, -1),
        }
    }
}

/// One entry of the boundary loop.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryNode {
    pub i: usize,
    pub j: usize,
    /// Row-major bulk index.
    pub node: usize,
    /// Arc-length coordinate along the loop, `k*h`.
    pub arc: f64,
    /// One side for edge nodes, two for corners.
    pub normals: Vec<Side>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    h: f64,
    lx: f64,
    ly: f64,
    boundary: Vec<BoundaryNode>,
    /// `loop_index[node]` is the loop position of a perimeter node, `None` inside.
    loop_index: Vec<Option<usize>>,
}

impl Grid {
    /// Builds a grid with `nx * ny` nodes covering `[0, lx] x [0, ly]`.
    ///
    /// Cells must be square.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3x3 nodes, got {nx}x{ny}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!("extents must be positive, got {lx} x {ly}")));
        }
        let hx = lx / (nx - 1) as f64;
        let hy = ly / (ny - 1) as f64;
        if (hx - hy).abs() > SQUARE_CELL_RTOL * hx.max(hy) {
            return Err(Error::InvalidGrid(format!(
                "anisotropic spacing: hx = {hx}, hy = {hy}"
            )));
        }
        let h = hx;

        let mut coords = Vec::with_capacity(2 * (nx - 1) + 2 * (ny - 1));
        for i in 0..nx {
            coords.push((i, 0));
        }
        for j in 1..ny {
            coords.push((nx - 1, j));
        }
        for i in (0..nx - 1).rev() {
            coords.push((i, ny - 1));
        }
        for j in (1..ny - 1).rev() {
            coords.push((0, j));
        }

        let mut loop_index = vec![None; nx * ny];
        let boundary = coords
            .into_iter()
            .enumerate()
            .map(|(k, (i, j))| {
                let node = j * nx + i;
                loop_index[node] = Some(k);
                let mut normals = Vec::with_capacity(2);
                if i == 0 {
                    normals.push(Side::Left);
                }
                if i == nx - 1 {
                    normals.push(Side::Right);
                }
                if j == 0 {
                    normals.push(Side::Bottom);
                }
                if j == ny - 1 {
                    normals.push(Side::Top);
                }
                BoundaryNode { i, j, node, arc: k as f64 * h, normals }
            })
            .collect();

        Ok(Grid { nx, ny, h, lx, ly, boundary, loop_index })
    }

    /// Square grid on `[0, len]^2` with `n` nodes per side.
    pub fn square(n: usize, len: f64) -> Result<Self> {
        Grid::new(n, n, len, len)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn num_nodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn loop_len(&self) -> usize {
        self.boundary.len()
    }

    /// Loop perimeter `P = M*h`.
    pub fn perimeter(&self) -> f64 {
        self.boundary.len() as f64 * self.h
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn boundary(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn loop_index(&self, node: usize) -> Option<usize> {
        self.loop_index[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.loop_index[node].is_some()
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, node: usize) -> (f64, f64) {
        let i = node % self.nx;
        let j = node / self.nx;
        (i as f64 * self.h, j as f64 * self.h)
    }

    /// Tensor trapezoid weight of a node (area units).
    #[inline]
    pub fn weight(&self, node: usize) -> f64 {
        let i = node % self.nx;
        let j = node / self.nx;
        let wi = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let wj = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        wi * wj * self.h * self.h
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.num_nodes()).map(|n| self.weight(n)).collect()
    }

    /// Emits the 5-point Laplacian row of `node` as `(column, coefficient)`.
    ///
    /// With `neumann` set, missing neighbours are mirrored (`u_ghost = u_inner`),
    /// which gives every node a row. Without it, only interior nodes get a row;
    /// perimeter values enter as ordinary columns.
    pub fn laplacian_row(&self, node: usize, neumann: bool, mut emit: impl FnMut(usize, f64)) {
        let i = node % self.nx;
        let j = node / self.nx;
        let inv_h2 = 1.0 / (self.h * self.h);
        if !neumann && self.is_boundary(node) {
            return;
        }
        let mut axis = |pos: usize, len: usize, stride: usize| {
            if pos == 0 {
                emit(node + stride, 2.0 * inv_h2);
            } else if pos == len - 1 {
                emit(node - stride, 2.0 * inv_h2);
            } else {
                emit(node + stride, inv_h2);
                emit(node - stride, inv_h2);
            }
            emit(node, -2.0 * inv_h2);
        };
        axis(i, self.nx, 1);
        axis(j, self.ny, self.nx);
    }

    /// Emits the periodic second-difference row of loop entry `k`.
    pub fn laplace_beltrami_row(&self, k: usize, mut emit: impl FnMut(usize, f64)) {
        let m = self.loop_len();
        let inv_h2 = 1.0 / (self.h * self.h);
        emit((k + m - 1) % m, inv_h2);
        emit(k, -2.0 * inv_h2);
        emit((k + 1) % m, inv_h2);
    }

    /// Emits the one-sided normal-derivative row of loop entry `k` in bulk columns.
    ///
    /// Requires `nx, ny >= 4`; callers check via [`Grid::supports_normal_derivative`].
    pub fn normal_derivative_row(&self, k: usize, mut emit: impl FnMut(usize, f64)) {
        let b = &self.boundary[k];
        let scale = 1.0 / (2.0 * self.h * b.normals.len() as f64);
        for side in &b.normals {
            let (di, dj) = side.inward();
            let step = |s: isize| -> usize {
                let ii = (b.i as isize + di * s) as usize;
                let jj = (b.j as isize + dj * s) as usize;
                self.node(ii, jj)
            };
            emit(b.node, 3.0 * scale);
            emit(step(1), -4.0 * scale);
            emit(step(2), scale);
        }
    }

    pub fn supports_normal_derivative(&self) -> bool {
        self.nx >= 4 && self.ny >= 4
    }

    /// Undirected grid edges with their Dirichlet-energy weight: `1/2` for
    /// edges lying on the perimeter, `1` otherwise.
    ///
    /// `sum_e w_e (u_a - u_b)^2` is the quadratic form of `-W L` for the
    /// mirrored Neumann Laplacian `L` and trapezoid weights `W`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let (nx, ny) = (self.nx, self.ny);
        let horizontal = (0..ny).flat_map(move |j| {
            let w = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
            (0..nx - 1).map(move |i| (j * nx + i, j * nx + i + 1, w))
        });
        let vertical = (0..ny - 1).flat_map(move |j| {
            (0..nx).map(move |i| {
                let w = if i == 0 || i == nx - 1 { 0.5 } else { 1.0 };
                (j * nx + i, (j + 1) * nx + i, w)
            })
        });
        horizontal.chain(vertical)
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Scalar values on every grid node (houses `phi` and `mu`).
#[derive(Debug, Clone, PartialEq)]
pub struct BulkField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl BulkField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        BulkField { grid: Arc::clone(grid), values: vec![0.0; grid.num_nodes()] }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        BulkField { grid: Arc::clone(grid), values: vec![c; grid.num_nodes()] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.num_nodes())
            .map(|n| {
                let (x, y) = grid.coords(n);
                f(x, y)
            })
            .collect();
        BulkField { grid: Arc::clone(grid), values }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::DimensionMismatch { expected: grid.num_nodes(), got: values.len() });
        }
        check_finite(&values, "bulk field")?;
        Ok(BulkField { grid: Arc::clone(grid), values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.node(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Trapezoid-weighted mean over the rectangle.
    pub fn mean(&self) -> f64 {
        let g = &self.grid;
        let s: f64 = self.values.iter().enumerate().map(|(n, v)| g.weight(n) * v).sum();
        s / g.area()
    }

    pub fn check_grid(&self, other: &Arc<Grid>) -> Result<()> {
        if same_grid(&self.grid, other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "bulk field on {}x{} grid, expected {}x{}",
                self.grid.nx, self.grid.ny, other.nx, other.ny
            )))
        }
    }
}

/// Scalar values on the boundary loop (houses `psi` and `mu_Gamma`).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl BoundaryField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        BoundaryField { grid: Arc::clone(grid), values: vec![0.0; grid.loop_len()] }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        BoundaryField { grid: Arc::clone(grid), values: vec![c; grid.loop_len()] }
    }

    /// Builds loop values from the arc coordinate of each entry.
    pub fn from_arc_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.boundary().iter().map(|b| f(b.arc)).collect();
        BoundaryField { grid: Arc::clone(grid), values }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.loop_len() {
            return Err(Error::DimensionMismatch { expected: grid.loop_len(), got: values.len() });
        }
        check_finite(&values, "boundary field")?;
        Ok(BoundaryField { grid: Arc::clone(grid), values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Loop mean (plain average; the loop lattice is uniform).
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn check_grid(&self, other: &Arc<Grid>) -> Result<()> {
        if same_grid(&self.grid, other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "boundary field on {}x{} grid, expected {}x{}",
                self.grid.nx, self.grid.ny, other.nx, other.ny
            )))
        }
    }
}

/// Boundary closure for [`bulk_laplacian`].
#[derive(Debug, Clone, Copy)]
pub enum LaplacianBc<'a> {
    /// Mirror ghosts; defined on every node. Used for chemical potentials.
    NeumannGhost,
    /// Perimeter values taken from the supplied loop field; result defined on
    /// interior nodes and zero on the perimeter. Used for phase fields.
    DirichletTrace(&'a BoundaryField),
}

/// Applies the 5-point Laplacian under the given boundary closure.
pub fn bulk_laplacian(u: &BulkField, bc: LaplacianBc<'_>) -> Result<BulkField> {
    check_finite(&u.values, "bulk laplacian input")?;
    let grid = &u.grid;
    let mut out = vec![0.0; grid.num_nodes()];
    match bc {
        LaplacianBc::NeumannGhost => apply_neumann_laplacian(grid, &u.values, &mut out),
        LaplacianBc::DirichletTrace(trace_values) => {
            trace_values.check_grid(grid)?;
            check_finite(&trace_values.values, "dirichlet trace")?;
            let mut src = u.values.clone();
            for (b, v) in grid.boundary().iter().zip(&trace_values.values) {
                src[b.node] = *v;
            }
            apply_dirichlet_laplacian(grid, &src, &mut out);
        }
    }
    Ok(BulkField { grid: Arc::clone(grid), values: out })
}

/// Slice kernel of the mirrored Neumann Laplacian.
pub fn apply_neumann_laplacian(grid: &Grid, u: &[f64], out: &mut [f64]) {
    for (n, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        grid.laplacian_row(n, true, |c, a| acc += a * u[c]);
        *o = acc;
    }
}

/// Slice kernel of the interior 5-point Laplacian; perimeter outputs are zero.
pub fn apply_dirichlet_laplacian(grid: &Grid, u: &[f64], out: &mut [f64]) {
    for (n, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        grid.laplacian_row(n, false, |c, a| acc += a * u[c]);
        *o = acc;
    }
}

/// Periodic 3-point second difference along the loop.
pub fn boundary_laplace_beltrami(v: &BoundaryField) -> Result<BoundaryField> {
    check_finite(&v.values, "laplace-beltrami input")?;
    let mut out = vec![0.0; v.values.len()];
    apply_laplace_beltrami(&v.grid, &v.values, &mut out);
    Ok(BoundaryField { grid: Arc::clone(&v.grid), values: out })
}

pub fn apply_laplace_beltrami(grid: &Grid, v: &[f64], out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        grid.laplace_beltrami_row(k, |c, a| acc += a * v[c]);
        *o = acc;
    }
}

/// Second-order one-sided outward normal derivative at every perimeter node.
/// Corner values average the two axis derivatives.
pub fn normal_derivative(u: &BulkField) -> Result<BoundaryField> {
    let grid = &u.grid;
    if !grid.supports_normal_derivative() {
        return Err(Error::InvalidGrid(format!(
            "normal derivative needs at least 4x4 nodes, got {}x{}",
            grid.nx, grid.ny
        )));
    }
    check_finite(&u.values, "normal derivative input")?;
    let mut out = vec![0.0; grid.loop_len()];
    apply_normal_derivative(grid, &u.values, &mut out);
    Ok(BoundaryField { grid: Arc::clone(grid), values: out })
}

pub fn apply_normal_derivative(grid: &Grid, u: &[f64], out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        grid.normal_derivative_row(k, |c, a| acc += a * u[c]);
        *o = acc;
    }
}

/// Perimeter values of `u` in loop order.
pub fn trace(u: &BulkField) -> BoundaryField {
    let values = trace_values(&u.grid, &u.values);
    BoundaryField { grid: Arc::clone(&u.grid), values }
}

pub fn trace_values(grid: &Grid, u: &[f64]) -> Vec<f64> {
    grid.boundary().iter().map(|b| u[b.node]).collect()
}

/// Copy of `u` with its perimeter overwritten by `v`.
pub fn inject(v: &BoundaryField, u: &BulkField) -> Result<BulkField> {
    v.check_grid(&u.grid)?;
    let mut values = u.values.clone();
    for (b, x) in u.grid.boundary().iter().zip(&v.values) {
        values[b.node] = *x;
    }
    Ok(BulkField { grid: Arc::clone(&u.grid), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(n: usize) -> Arc<Grid> {
        Arc::new(Grid::square(n, 1.0).unwrap())
    }

    #[test]
    fn loop_visits_every_perimeter_node_once() {
        let g = Grid::new(5, 7, 1.0, 1.5).unwrap();
        assert_eq!(g.loop_len(), 2 * 4 + 2 * 6);
        let mut seen = vec![0; g.num_nodes()];
        for b in g.boundary() {
            seen[b.node] += 1;
        }
        for n in 0..g.num_nodes() {
            let (i, j) = (n % 5, n / 5);
            let on_perimeter = i == 0 || j == 0 || i == 4 || j == 6;
            assert_eq!(seen[n], usize::from(on_perimeter));
        }
        // closed and adjacent
        let m = g.loop_len();
        for k in 0..m {
            let a = &g.boundary()[k];
            let b = &g.boundary()[(k + 1) % m];
            assert_eq!(a.i.abs_diff(b.i) + a.j.abs_diff(b.j), 1);
        }
    }

    #[test]
    fn corners_have_two_normals() {
        let g = Grid::square(6, 1.0).unwrap();
        let corners = g.boundary().iter().filter(|b| b.normals.len() == 2).count();
        assert_eq!(corners, 4);
        assert!(g.boundary().iter().all(|b| !b.normals.is_empty() && b.normals.len() <= 2));
    }

    #[test]
    fn rejects_anisotropic_cells() {
        assert!(matches!(Grid::new(5, 5, 1.0, 2.0), Err(Error::InvalidGrid(_))));
        assert!(Grid::new(5, 9, 1.0, 2.0).is_ok());
    }

    #[test]
    fn constant_has_zero_laplacian() {
        let g = unit(9);
        let u = BulkField::constant(&g, 3.5);
        let lap = bulk_laplacian(&u, LaplacianBc::NeumannGhost).unwrap();
        assert!(lap.values().iter().all(|v| v.abs() < 1e-9));
        let lb = boundary_laplace_beltrami(&trace(&u)).unwrap();
        assert!(lb.values().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn quadratic_laplacian_is_exact() {
        let g = unit(11);
        let u = BulkField::from_fn(&g, |x, y| x * x + y * y);
        let lap = bulk_laplacian(&u, LaplacianBc::DirichletTrace(&trace(&u))).unwrap();
        for n in 0..g.num_nodes() {
            let expected = if g.is_boundary(n) { 0.0 } else { 4.0 };
            assert_abs_diff_eq!(lap.values()[n], expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn dirichlet_trace_overrides_perimeter() {
        let g = unit(6);
        let u = BulkField::zeros(&g);
        let ones = BoundaryField::constant(&g, 1.0);
        let lap = bulk_laplacian(&u, LaplacianBc::DirichletTrace(&ones)).unwrap();
        let h2 = g.h() * g.h();
        // node (1,1) touches two perimeter nodes
        assert_abs_diff_eq!(lap.get(1, 1), 2.0 / h2, epsilon = 1e-9);
        assert_abs_diff_eq!(lap.get(2, 2), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn laplace_beltrami_spike_is_periodic_row() {
        let g = unit(5);
        let m = g.loop_len();
        for k in [0, 3, m - 1] {
            let mut v = BoundaryField::zeros(&g);
            v.values_mut()[k] = 1.0;
            let lb = boundary_laplace_beltrami(&v).unwrap();
            let h2 = g.h() * g.h();
            for (idx, val) in lb.values().iter().enumerate() {
                let expected = if idx == k {
                    -2.0 / h2
                } else if idx == (k + 1) % m || idx == (k + m - 1) % m {
                    1.0 / h2
                } else {
                    0.0
                };
                assert_abs_diff_eq!(*val, expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn normal_derivative_of_linear_and_quadratic() {
        let g = unit(9);
        let nd = normal_derivative(&BulkField::from_fn(&g, |x, _| x)).unwrap();
        for (b, v) in g.boundary().iter().zip(nd.values()) {
            let expected = match b.normals.as_slice() {
                [Side::Left] => -1.0,
                [Side::Right] => 1.0,
                [_] => 0.0,
                two => {
                    let s: f64 = two
                        .iter()
                        .map(|s| match s {
                            Side::Left => -1.0,
                            Side::Right => 1.0,
                            _ => 0.0,
                        })
                        .sum();
                    s / 2.0
                }
            };
            assert_abs_diff_eq!(*v, expected, epsilon = 1e-12);
        }
        let nd2 = normal_derivative(&BulkField::from_fn(&g, |x, _| x * x)).unwrap();
        for (b, v) in g.boundary().iter().zip(nd2.values()) {
            if b.normals == [Side::Right] {
                assert_abs_diff_eq!(*v, 2.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn normal_derivative_needs_four_nodes() {
        let g = unit(3);
        assert!(normal_derivative(&BulkField::zeros(&g)).is_err());
    }

    #[test]
    fn trace_inject_round_trip() {
        let g = unit(7);
        let u = BulkField::from_fn(&g, |x, y| x + 10.0 * y);
        let v = BoundaryField::from_arc_fn(&g, |s| s.sin());
        let w = inject(&v, &u).unwrap();
        assert_eq!(trace(&w), v);
        let t = trace(&BulkField::from_fn(&g, |x, _| x));
        for (b, val) in g.boundary().iter().zip(t.values()) {
            assert_eq!(*val, b.i as f64 * g.h());
        }
        assert!(trace(&BulkField::constant(&g, 2.0)).values().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn edge_form_matches_weighted_laplacian() {
        let g = unit(6);
        let u: Vec<f64> = (0..g.num_nodes()).map(|n| ((n * 37) % 11) as f64 / 7.0).collect();
        let mut lu = vec![0.0; g.num_nodes()];
        apply_neumann_laplacian(&g, &u, &mut lu);
        let quad: f64 = (0..g.num_nodes()).map(|n| -g.weight(n) * u[n] * lu[n]).sum();
        let edges: f64 = g.edges().map(|(a, b, w)| w * (u[a] - u[b]).powi(2)).sum();
        assert_abs_diff_eq!(quad, edges, epsilon = 1e-9);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = unit(5);
        let b = unit(6);
        let u = BulkField::zeros(&a);
        let v = BoundaryField::zeros(&b);
        assert!(matches!(inject(&v, &u), Err(Error::GridMismatch(_))));
        assert!(bulk_laplacian(&u, LaplacianBc::DirichletTrace(&v)).is_err());
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let g = unit(5);
        let mut u = BulkField::zeros(&g);
        u.values_mut()[3] = f64::NAN;
        assert!(matches!(
            bulk_laplacian(&u, LaplacianBc::NeumannGhost),
            Err(Error::NonFinite { index: 3, .. })
        ));
    }
}
