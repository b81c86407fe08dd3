//! Tensor grids on [0, 1] × [−1, 1] and nodal fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default half-width of the graded zones around ξ = 0 and ξ = ±1.
pub const DEFAULT_ZONE: f64 = 0.2;
/// Default Gauss points per cell and direction.
pub const DEFAULT_ORDER: usize = 4;

/// Node placement in ξ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    /// Uniform fine spacing on [0, δ] and [1 − δ, 1] (mirrored to the
    /// negative half), geometric transition in between.
    ThreeZone {
        zone: f64,
        /// Share of the half-grid cells placed in [0, δ].
        center: f64,
        /// Share of the half-grid cells placed in [1 − δ, 1].
        well: f64,
    },
}

impl Default for Grading {
    fn default() -> Self {
        Self::three_zone()
    }
}

impl Grading {
    pub fn three_zone() -> Self {
        Grading::ThreeZone {
            zone: DEFAULT_ZONE,
            center: 0.35,
            well: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x: Vec<f64>,
    xi: Vec<f64>,
    order: usize,
}

impl Grid {
    /// Grid from explicit node lists; ξ must contain −1, 0 and 1.
    pub fn from_nodes(x: Vec<f64>, xi: Vec<f64>, order: usize) -> Result<Self> {
        check_nodes("x", &x, 0.0, 1.0, 3)?;
        check_nodes("ξ", &xi, -1.0, 1.0, 3)?;
        if !xi.contains(&0.0) {
            return Err(Error::InvalidGrid("ξ nodes must contain 0".into()));
        }
        if order == 0 {
            return Err(Error::InvalidGrid("quadrature order must be positive".into()));
        }
        Ok(Self { x, xi, order })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nxi(&self) -> usize {
        self.xi.len()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.nxi()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of node (i, j); ξ runs fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nxi() + j
    }

    pub fn center(&self) -> usize {
        self.xi.iter().position(|&v| v == 0.0).expect("validated")
    }

    pub fn with_order(mut self, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidGrid("quadrature order must be positive".into()));
        }
        self.order = order;
        Ok(self)
    }
}

fn check_nodes(name: &str, v: &[f64], lo: f64, hi: f64, min: usize) -> Result<()> {
    if v.len() < min {
        return Err(Error::InvalidGrid(format!(
            "{name} needs at least {min} nodes, got {}",
            v.len()
        )));
    }
    if v[0] != lo || v[v.len() - 1] != hi {
        return Err(Error::InvalidGrid(format!("{name} nodes must start at {lo} and end at {hi}")));
    }
    if let Some(k) = v.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid(format!(
            "{name} nodes not strictly increasing at index {k}"
        )));
    }
    Ok(())
}

/// Uniform nodes on [0, 1].
pub fn uniform_x(nx: usize) -> Vec<f64> {
    let n = (nx - 1) as f64;
    (0..nx)
        .map(|i| if i + 1 == nx { 1.0 } else { i as f64 / n })
        .collect()
}

/// ξ nodes on [−1, 1] for an odd node count, exactly mirrored about 0.
pub fn xi_nodes(nxi: usize, grading: Grading) -> Result<Vec<f64>> {
    if nxi < 5 || nxi % 2 == 0 {
        return Err(Error::InvalidGrid(format!(
            "ξ node count must be odd and at least 5, got {nxi}"
        )));
    }
    let half = (nxi - 1) / 2;
    let positive = match grading {
        Grading::Uniform => (0..=half)
            .map(|k| if k == half { 1.0 } else { k as f64 / half as f64 })
            .collect(),
        Grading::ThreeZone { zone, center, well } => three_zone_half(half, zone, center, well)?,
    };
    let mut nodes: Vec<f64> = positive.iter().rev().map(|&v| -v).collect();
    nodes.extend_from_slice(&positive[1..]);
    Ok(nodes)
}

fn three_zone_half(cells: usize, zone: f64, center: f64, well: f64) -> Result<Vec<f64>> {
    if !(zone > 0.0 && zone < 0.5) {
        return Err(Error::InvalidGrid(format!("zone width must lie in (0, 0.5), got {zone}")));
    }
    if !(center > 0.0 && well > 0.0 && center + well < 1.0) {
        return Err(Error::InvalidGrid(format!(
            "zone shares must be positive with sum below 1, got {center} and {well}"
        )));
    }
    let nc = ((center * cells as f64).round() as usize).max(1);
    let nw = ((well * cells as f64).round() as usize).max(1);
    if nc + nw >= cells {
        return Err(Error::InvalidGrid(format!(
            "{} ξ cells per half are too few for three zones",
            cells
        )));
    }
    let nm = cells - nc - nw;
    let hc = zone / nc as f64;
    let hw = zone / nw as f64;
    let widths = tent_widths(nm, 1.0 - 2.0 * zone, hc, hw);

    let mut nodes = Vec::with_capacity(cells + 1);
    for k in 0..nc {
        nodes.push(k as f64 * hc);
    }
    let mut s = zone;
    nodes.push(s);
    for w in &widths[..nm - 1] {
        s += w;
        nodes.push(s);
    }
    let outer = 1.0 - zone;
    nodes.push(outer);
    for k in 1..nw {
        nodes.push(outer + k as f64 * hw);
    }
    nodes.push(1.0);
    Ok(nodes)
}

/// Widths of `n` cells filling `length` that grow geometrically away from
/// both ends, starting from `left` and `right`.
fn tent_widths(n: usize, length: f64, left: f64, right: f64) -> Vec<f64> {
    let widths = |r: f64| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let a = left * r.powi(k as i32 + 1);
                let b = right * r.powi((n - k) as i32);
                a.min(b)
            })
            .collect()
    };
    let total = |r: f64| widths(r).iter().sum::<f64>();
    if total(1.0) >= length {
        return vec![length / n as f64; n];
    }
    let (mut lo, mut hi) = (1.0, 2.0);
    while total(hi) < length {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < length {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = widths(0.5 * (lo + hi));
    let scale = length / w.iter().sum::<f64>();
    w.into_iter().map(|v| v * scale).collect()
}

/// Tensor grid with `nx` uniform x nodes and `nxi` graded ξ nodes.
pub fn build_grid(nx: usize, nxi: usize, grading: Grading) -> Result<Grid> {
    if nx < 4 {
        return Err(Error::InvalidGrid(format!("x node count must be at least 4, got {nx}")));
    }
    Grid::from_nodes(uniform_x(nx), xi_nodes(nxi, grading)?, DEFAULT_ORDER)
}

/// Nodal values of a density on a tensor grid, stored with ξ fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    nx: usize,
    nxi: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn new(nx: usize, nxi: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * nxi {
            return Err(Error::ShapeMismatch {
                what: "field values",
                expected: nx * nxi,
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("field value {k} is not finite")));
        }
        Ok(Self { nx, nxi, values })
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            nx: grid.nx(),
            nxi: grid.nxi(),
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: &Grid, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &x in grid.x() {
            for &xi in grid.xi() {
                values.push(f(x, xi));
            }
        }
        Self {
            nx: grid.nx(),
            nxi: grid.nxi(),
            values,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nxi(&self) -> usize {
        self.nxi
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
        self.values[i * self.nxi + j]
    }

    /// The ξ-fiber over x node i.
    pub fn fiber(&self, i: usize) -> &[f64] {
        &self.values[i * self.nxi..(i + 1) * self.nxi]
    }

    /// Values along the ξ node row j.
    pub fn row(&self, j: usize) -> Vec<f64> {
        (0..self.nx).map(|i| self.get(i, j)).collect()
    }

    pub fn matches(&self, grid: &Grid) -> Result<()> {
        if self.nx != grid.nx() || self.nxi != grid.nxi() {
            return Err(Error::ShapeMismatch {
                what: "field on grid",
                expected: grid.len(),
                found: self.values.len(),
            });
        }
        Ok(())
    }

    /// Largest |u(x, ξ) − u(x, −ξ)| over the nodes; meaningful on mirrored grids.
    pub fn mirror_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nx {
            let f = self.fiber(i);
            for j in 0..self.nxi / 2 {
                worst = worst.max((f[j] - f[self.nxi - 1 - j]).abs());
            }
        }
        worst
    }
}

/// Pair of nodal functions (u⁻, u⁺) on the x nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitField {
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
}

impl LimitField {
    pub fn new(minus: Vec<f64>, plus: Vec<f64>) -> Result<Self> {
        if minus.len() != plus.len() {
            return Err(Error::ShapeMismatch {
                what: "limit field components",
                expected: minus.len(),
                found: plus.len(),
            });
        }
        if minus.iter().chain(&plus).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("limit field values must be finite".into()));
        }
        Ok(Self { minus, plus })
    }

    pub fn constant(n: usize, minus: f64, plus: f64) -> Self {
        Self {
            minus: vec![minus; n],
            plus: vec![plus; n],
        }
    }

    pub fn from_fns<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(x: &[f64], minus: F, plus: G) -> Self {
        Self {
            minus: x.iter().map(|&v| minus(v)).collect(),
            plus: x.iter().map(|&v| plus(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.minus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minus.is_empty()
    }

    pub fn swapped(&self) -> Self {
        Self {
            minus: self.plus.clone(),
            plus: self.minus.clone(),
        }
    }
}
