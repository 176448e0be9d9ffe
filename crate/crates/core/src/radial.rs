//! Radial discretization of `H^1_r(R^N)` (truncated) and `H^1_0(B_R)`.
//!
//! A [`RadialGrid`] is a uniform mesh `r_i = i h`, `i = 0..=n+1`, with a
//! homogeneous Dirichlet condition at `r_{n+1} = R`. All integrals carry the
//! surface constant `ω_N`, so discrete functionals are approximations of the
//! functionals on `R^N`, not rescalings of them.
//!
//! The strong-form Laplacian uses the centered stencil
//! `u'' + (N-1)/r u'` at interior nodes and `2N (u_1 - u_0)/h^2` at the
//! origin. The gradient energy uses the edge weight `ω (r_i r_{i+1})^{(N-1)/2} / h`,
//! which for `N = 3` makes the pairing `∫ v (-Δ_h u)` coincide exactly with
//! the discrete Dirichlet form. Derivatives of discrete energies are then
//! exactly the nodal strong-form residuals paired by [`integrate`].

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of interior nodes accepted by [`make_grid`].
pub const MIN_INTERIOR_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// `R^N` truncated at radius `R` with a Dirichlet condition.
    TruncatedWholeSpace,
    /// The ball `B_R` with a Dirichlet condition.
    Ball,
}

/// Three-point row `lower·u_{i-1} + diag·u_i + upper·u_{i+1}` of `-Δ_h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilRow {
    pub lower: f64,
    pub diag: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    radius: f64,
    interior: usize,
    spacing: f64,
    kind: DomainKind,
    surface: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    edge_weights: Vec<f64>,
    stencil: Vec<StencilRow>,
}

/// Surface area of the unit sphere in `R^N`, `2 π^{N/2} / Γ(N/2)`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    2.0 * PI.powf(dim as f64 / 2.0) / gamma_half_integer(dim)
}

// Γ(N/2) for a positive integer N.
fn gamma_half_integer(dim: usize) -> f64 {
    if dim.is_multiple_of(2) {
        (1..dim / 2).map(|k| k as f64).product()
    } else {
        // Γ(k + 1/2) = √π · Π_{j=1..k} (j - 1/2)
        let k = dim / 2;
        PI.sqrt() * (1..=k).map(|j| j as f64 - 0.5).product::<f64>()
    }
}

pub fn make_grid(
    dim: usize,
    radius: f64,
    interior: usize,
    kind: DomainKind,
) -> Result<Arc<RadialGrid>> {
    if dim < 3 {
        return Err(Error::InvalidGrid(format!(
            "dimension must be at least 3, got {dim}"
        )));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidGrid(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if interior < MIN_INTERIOR_NODES {
        return Err(Error::InvalidGrid(format!(
            "need at least {MIN_INTERIOR_NODES} interior nodes, got {interior}"
        )));
    }

    let h = radius / (interior + 1) as f64;
    let surface = unit_sphere_area(dim);
    let nodes: Vec<f64> = (0..interior + 2)
        .map(|i| {
            if i == interior + 1 {
                radius
            } else {
                i as f64 * h
            }
        })
        .collect();
    let expo = (dim - 1) as i32;

    let mut weights: Vec<f64> = nodes.iter().map(|r| surface * h * r.powi(expo)).collect();
    weights[0] *= 0.5;
    weights[interior + 1] *= 0.5;

    let half = (dim - 1) as f64 / 2.0;
    let edge_weights: Vec<f64> = (0..=interior)
        .map(|i| surface * (nodes[i] * nodes[i + 1]).powf(half) / h)
        .collect();

    let h2 = h * h;
    let nf = dim as f64;
    let mut stencil = Vec::with_capacity(interior + 1);
    stencil.push(StencilRow {
        lower: 0.0,
        diag: 2.0 * nf / h2,
        upper: -2.0 * nf / h2,
    });
    for &r in &nodes[1..=interior] {
        let drift = (nf - 1.0) / (2.0 * h * r);
        stencil.push(StencilRow {
            lower: -1.0 / h2 + drift,
            diag: 2.0 / h2,
            upper: -1.0 / h2 - drift,
        });
    }

    Ok(Arc::new(RadialGrid {
        dim,
        radius,
        interior,
        spacing: h,
        kind,
        surface,
        nodes,
        weights,
        edge_weights,
        stencil,
    }))
}

impl RadialGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Number of interior nodes `n`; the grid has `n + 2` nodes in total.
    pub fn interior(&self) -> usize {
        self.interior
    }

    pub fn len(&self) -> usize {
        self.interior + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn surface(&self) -> f64 {
        self.surface
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Trapezoid weights `ω h r_i^{N-1}` (halved at both ends).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Rows `0..=n` of `-Δ_h`.
    pub fn stencil(&self) -> &[StencilRow] {
        &self.stencil
    }

    /// Critical Sobolev exponent `(N+2)/(N-2)`.
    pub fn critical_exponent(&self) -> f64 {
        critical_exponent(self.dim)
    }
}

pub fn critical_exponent(dim: usize) -> f64 {
    (dim as f64 + 2.0) / (dim as f64 - 2.0)
}

/// Nodal values of a radial function; the last node always holds 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f` at every node; the Dirichlet node is set to 0.
    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let mut values: Vec<f64> = grid.nodes().iter().map(|&r| f(r)).collect();
        values[grid.interior() + 1] = 0.0;
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    /// Wraps nodal values; the Dirichlet node is overwritten with 0.
    pub fn from_values(grid: &Arc<RadialGrid>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "expected {} nodal values, got {}",
                grid.len(),
                values.len()
            )));
        }
        values[grid.interior() + 1] = 0.0;
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at the origin.
    pub fn at_origin(&self) -> f64 {
        self.values[0]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values(&self.grid, self.values.iter().map(|&v| f(v)).collect())
            .expect("same grid")
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + a * y)
            .collect();
        Self::from_values(&self.grid, values).expect("same grid")
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x * y)
            .collect();
        Self::from_values(&self.grid, values).expect("same grid")
    }

    /// Maximum absolute nodal value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Minimum over the nodes `0..=n` (the Dirichlet node excluded).
    pub fn interior_min(&self) -> f64 {
        self.values[..=self.grid.interior()]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `ω ∫_0^R w(r) r^{N-1} dr` by the composite trapezoid rule.
pub fn integrate(w: &RadialField) -> f64 {
    w.grid
        .weights()
        .iter()
        .zip(w.values())
        .map(|(a, b)| a * b)
        .sum()
}

/// Weighted pairing `integrate(u·v)` without allocating the product.
pub fn dot(u: &RadialField, v: &RadialField) -> f64 {
    u.grid
        .weights()
        .iter()
        .zip(u.values().iter().zip(v.values()))
        .map(|(w, (a, b))| w * a * b)
        .sum()
}

/// Nodal values of `-Δ_h u + λ u`; the Dirichlet node is 0.
pub fn apply_operator(u: &RadialField, lambda: f64) -> RadialField {
    let grid = u.grid();
    let n = grid.interior();
    let x = u.values();
    let mut out = vec![0.0; grid.len()];
    for (i, row) in grid.stencil().iter().enumerate() {
        let left = if i == 0 { 0.0 } else { row.lower * x[i - 1] };
        out[i] = left + row.diag * x[i] + row.upper * x[i + 1] + lambda * x[i];
    }
    out[n + 1] = 0.0;
    RadialField::from_values(grid, out).expect("same grid")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub grad_sq: f64,
    pub l2_sq: f64,
    pub h1_sq: f64,
}

/// Discrete Dirichlet form `ω ∫ u'_h v'_h r^{N-1} dr` with midpoint difference quotients.
pub fn dirichlet_form(u: &RadialField, v: &RadialField) -> f64 {
    let grid = u.grid();
    let (a, b) = (u.values(), v.values());
    grid.edge_weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * (a[i + 1] - a[i]) * (b[i + 1] - b[i]))
        .sum()
}

pub fn norms(u: &RadialField, lambda: f64) -> Norms {
    let grad_sq = dirichlet_form(u, u);
    let l2_sq = dot(u, u);
    Norms {
        grad_sq,
        l2_sq,
        h1_sq: grad_sq + lambda * l2_sq,
    }
}

/// `(integrate(|u|^p))^{1/p}`.
pub fn lp_norm(u: &RadialField, p: f64) -> f64 {
    assert!(p >= 1.0, "lp_norm needs p >= 1, got {p}");
    let s: f64 = u
        .grid
        .weights()
        .iter()
        .zip(u.values())
        .map(|(w, v)| w * v.abs().powf(p))
        .sum();
    s.powf(1.0 / p)
}

/// Solves `(-Δ_h + shift) x = rhs` on nodes `0..=n` with `x_{n+1} = 0`.
pub fn solve_shifted(rhs: &RadialField, shift: f64) -> Result<RadialField> {
    let grid = rhs.grid();
    let n = grid.interior();
    let rows = grid.stencil();
    let lower: Vec<f64> = rows.iter().map(|r| r.lower).collect();
    let diag: Vec<f64> = rows.iter().map(|r| r.diag + shift).collect();
    let upper: Vec<f64> = rows.iter().map(|r| r.upper).collect();
    let mut x = solve_tridiagonal(&lower, &diag, &upper, &rhs.values()[..=n])
        .ok_or_else(|| Error::Singular("shifted Laplacian".into()))?;
    x.push(0.0);
    RadialField::from_values(grid, x)
}

/// Thomas algorithm for a tridiagonal system. `lower[0]` and `upper[last]`
/// are ignored. Returns `None` on a vanishing pivot.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Option<Vec<f64>> {
    let m = diag.len();
    debug_assert!(lower.len() == m && upper.len() == m && rhs.len() == m);
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut pivot = diag[0];
    if pivot.abs() < f64::MIN_POSITIVE {
        return None;
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..m {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot.abs() < 1e-300 || !pivot.is_finite() {
            return None;
        }
        c[i] = if i + 1 < m { upper[i] / pivot } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..m - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ball(n: usize) -> Arc<RadialGrid> {
        make_grid(3, 1.0, n, DomainKind::Ball).unwrap()
    }

    #[test]
    fn grid_construction() {
        let g = make_grid(3, 20.0, 2000, DomainKind::TruncatedWholeSpace).unwrap();
        assert_relative_eq!(g.spacing(), 20.0 / 2001.0);
        assert_relative_eq!(g.surface(), 4.0 * PI, max_relative = 1e-15);
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[2001], 20.0);

        let b = ball(200);
        assert_eq!(b.kind(), DomainKind::Ball);
        assert_eq!(b.len(), 202);
    }

    #[test]
    fn sphere_area_closed_forms() {
        assert_relative_eq!(unit_sphere_area(3), 4.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(unit_sphere_area(4), 2.0 * PI * PI, max_relative = 1e-14);
        assert_relative_eq!(
            unit_sphere_area(5),
            8.0 * PI * PI / 3.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(make_grid(2, 10.0, 100, DomainKind::TruncatedWholeSpace).is_err());
        assert!(make_grid(3, 10.0, 15, DomainKind::Ball).is_err());
        assert!(make_grid(3, 0.0, 100, DomainKind::Ball).is_err());
        assert!(make_grid(3, -1.0, 100, DomainKind::Ball).is_err());
    }

    #[test]
    fn integrate_constant_and_zero() {
        let g = ball(400);
        let one = RadialField::from_fn(&g, |_| 1.0);
        // The Dirichlet node is forced to 0, which costs one half-cell.
        assert_relative_eq!(integrate(&one), 4.0 * PI / 3.0, max_relative = 1e-2);
        assert_eq!(integrate(&RadialField::zeros(&g)), 0.0);
    }

    #[test]
    fn integrate_gaussian_is_second_order() {
        let exact = PI.powf(1.5);
        let err = |n: usize| {
            let g = make_grid(3, 20.0, n, DomainKind::TruncatedWholeSpace).unwrap();
            let w = RadialField::from_fn(&g, |r| (-r * r).exp());
            (integrate(&w) - exact).abs() / exact
        };
        assert!(err(2000) < 1e-6);
        // Trapezoid on a smooth even integrand: superconvergent, so only
        // require at least second order.
        let (e1, e2) = (err(250), err(501));
        assert!(e2 <= e1 / 3.5, "e1 = {e1}, e2 = {e2}");
    }

    #[test]
    fn constants_are_harmonic_away_from_the_boundary() {
        let g = ball(100);
        let u = RadialField::from_fn(&g, |_| 3.0);
        let lu = apply_operator(&u, 0.0);
        for i in 0..95 {
            assert!(lu.values()[i].abs() < 1e-9, "node {i}: {}", lu.values()[i]);
        }
    }

    #[test]
    fn quadratic_has_constant_laplacian() {
        let g = ball(200);
        let u = RadialField::from_fn(&g, |r| r * r - 1.0);
        let lu = apply_operator(&u, 0.0);
        for i in 0..=200 {
            assert_relative_eq!(lu.values()[i], -6.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn tent_gradient_and_scaling() {
        let g = ball(400);
        let u = RadialField::from_fn(&g, |r| (1.0 - r).max(0.0));
        let nm = norms(&u, 1.0);
        assert_relative_eq!(nm.grad_sq, 4.0 * PI / 3.0, max_relative = 1e-4);
        let nm2 = norms(&u.scale(2.0), 1.0);
        assert_relative_eq!(nm2.grad_sq, 4.0 * nm.grad_sq, max_relative = 1e-14);
        assert_relative_eq!(nm2.l2_sq, 4.0 * nm.l2_sq, max_relative = 1e-14);
        assert_relative_eq!(nm2.h1_sq, 4.0 * nm.h1_sq, max_relative = 1e-14);
        let z = norms(&RadialField::zeros(&g), 1.0);
        assert_eq!((z.grad_sq, z.l2_sq, z.h1_sq), (0.0, 0.0, 0.0));
    }

    #[test]
    fn lp_norms() {
        let g = ball(400);
        assert_eq!(lp_norm(&RadialField::zeros(&g), 3.0), 0.0);
        let one = RadialField::from_fn(&g, |_| 1.0);
        assert_relative_eq!(
            lp_norm(&one, 2.0),
            (4.0 * PI / 3.0).sqrt(),
            max_relative = 1e-2
        );
        let u = RadialField::from_fn(&g, |r| (2.0 * r).sin() - 0.3);
        assert_relative_eq!(
            lp_norm(&u, 2.0),
            norms(&u, 1.0).l2_sq.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn shifted_solve_inverts_operator() {
        let g = make_grid(3, 5.0, 300, DomainKind::TruncatedWholeSpace).unwrap();
        let u = RadialField::from_fn(&g, |r| (-r * r).exp() * (1.0 + r));
        let rhs = apply_operator(&u, 1.5);
        let back = solve_shifted(&rhs, 1.5).unwrap();
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
