//! Domains, uniform grids and region masks.
//!
//! A [`DomainSpec`] describes one of a handful of closed-form shapes in one or
//! two dimensions. Every shape has an exact signed distance, which drives node
//! classification on a [`Grid`] and the tubular neighbourhoods used by the
//! collar construction.
//!
//! Rectangles have corners and so are not C² domains; they are supported
//! because the unit square has an exact principal eigenvalue (2π²) that makes a
//! good two-dimensional test oracle.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A point in the plane. One-dimensional domains use `p[0]` and ignore `p[1]`.
pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq)]
pub enum DomainSpec {
    Interval { x0: f64, x1: f64 },
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    Disk { center: Point, radius: f64 },
    Annulus { center: Point, r_inner: f64, r_outer: f64 },
}

impl DomainSpec {
    pub fn interval(x0: f64, x1: f64) -> Result<Self> {
        Self::Interval { x0, x1 }.validated()
    }

    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        Self::Rectangle { x0, x1, y0, y1 }.validated()
    }

    pub fn disk(center: Point, radius: f64) -> Result<Self> {
        Self::Disk { center, radius }.validated()
    }

    pub fn annulus(center: Point, r_inner: f64, r_outer: f64) -> Result<Self> {
        Self::Annulus {
            center,
            r_inner,
            r_outer,
        }
        .validated()
    }

    fn validated(self) -> Result<Self> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            Self::Interval { x0, x1 } => finite(&[x0, x1]) && x1 > x0,
            Self::Rectangle { x0, x1, y0, y1 } => finite(&[x0, x1, y0, y1]) && x1 > x0 && y1 > y0,
            Self::Disk { center, radius } => finite(&[center[0], center[1], radius]) && radius > 0.0,
            Self::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                finite(&[center[0], center[1], r_inner, r_outer])
                    && r_inner > 0.0
                    && r_outer > r_inner
            }
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidDomain(self.to_string()))
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Exact signed distance to ∂Ω: negative inside, zero on the boundary,
    /// positive outside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match *self {
            Self::Interval { x0, x1 } => (x0 - p[0]).max(p[0] - x1),
            Self::Rectangle { x0, x1, y0, y1 } => {
                let dx = (x0 - p[0]).max(p[0] - x1);
                let dy = (y0 - p[1]).max(p[1] - y1);
                if dx <= 0.0 && dy <= 0.0 {
                    dx.max(dy)
                } else {
                    dx.max(0.0).hypot(dy.max(0.0))
                }
            }
            Self::Disk { center, radius } => radial(p, center) - radius,
            Self::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let r = radial(p, center);
                (r_inner - r).max(r - r_outer)
            }
        }
    }

    /// Closest point of ∂Ω to `p`. Ties (the centre of a disk, the medial axis
    /// of a rectangle) are broken deterministically.
    pub fn nearest_boundary_point(&self, p: Point) -> Point {
        match *self {
            Self::Interval { x0, x1 } => {
                if p[0] - x0 <= x1 - p[0] {
                    [x0, 0.0]
                } else {
                    [x1, 0.0]
                }
            }
            Self::Rectangle { x0, x1, y0, y1 } => {
                let inside = p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1;
                if !inside {
                    return [p[0].clamp(x0, x1), p[1].clamp(y0, y1)];
                }
                let gaps = [p[0] - x0, x1 - p[0], p[1] - y0, y1 - p[1]];
                let mut best = 0;
                for k in 1..4 {
                    if gaps[k] < gaps[best] {
                        best = k;
                    }
                }
                match best {
                    0 => [x0, p[1]],
                    1 => [x1, p[1]],
                    2 => [p[0], y0],
                    _ => [p[0], y1],
                }
            }
            Self::Disk { center, radius } => project_to_circle(p, center, radius),
            Self::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let r = radial(p, center);
                if (r - r_inner).abs() <= (r - r_outer).abs() {
                    project_to_circle(p, center, r_inner)
                } else {
                    project_to_circle(p, center, r_outer)
                }
            }
        }
    }

    /// Inradius: the largest distance from ∂Ω attained inside Ω.
    pub fn inradius(&self) -> f64 {
        match *self {
            Self::Interval { x0, x1 } => 0.5 * (x1 - x0),
            Self::Rectangle { x0, x1, y0, y1 } => 0.5 * (x1 - x0).min(y1 - y0),
            Self::Disk { radius, .. } => radius,
            Self::Annulus { r_inner, r_outer, .. } => 0.5 * (r_outer - r_inner),
        }
    }

    /// Lebesgue measure of Ω in closed form.
    pub fn exact_measure(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Self::Interval { x0, x1 } => x1 - x0,
            Self::Rectangle { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
            Self::Disk { radius, .. } => PI * radius * radius,
            Self::Annulus { r_inner, r_outer, .. } => PI * (r_outer * r_outer - r_inner * r_inner),
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match *self {
            Self::Interval { x0, x1 } => ([x0, 0.0], [x1, 0.0]),
            Self::Rectangle { x0, x1, y0, y1 } => ([x0, y0], [x1, y1]),
            Self::Disk { center, radius }
            | Self::Annulus {
                center,
                r_outer: radius,
                ..
            } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
        }
    }

    /// Membership from the shape's defining inequality, independent of
    /// [`signed_distance`](Self::signed_distance). Used by tests.
    pub fn contains_strictly(&self, p: Point) -> bool {
        match *self {
            Self::Interval { x0, x1 } => p[0] > x0 && p[0] < x1,
            Self::Rectangle { x0, x1, y0, y1 } => p[0] > x0 && p[0] < x1 && p[1] > y0 && p[1] < y1,
            Self::Disk { center, radius } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                dx * dx + dy * dy < radius * radius
            }
            Self::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                let r2 = dx * dx + dy * dy;
                r2 > r_inner * r_inner && r2 < r_outer * r_outer
            }
        }
    }
}

fn radial(p: Point, c: Point) -> f64 {
    (p[0] - c[0]).hypot(p[1] - c[1])
}

fn project_to_circle(p: Point, c: Point, r: f64) -> Point {
    let dist = radial(p, c);
    if dist == 0.0 {
        return [c[0] + r, c[1]];
    }
    let s = r / dist;
    [c[0] + s * (p[0] - c[0]), c[1] + s * (p[1] - c[1])]
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Interval { x0, x1 } => write!(f, "interval({x0}, {x1})"),
            Self::Rectangle { x0, x1, y0, y1 } => write!(f, "rectangle({x0}, {x1}, {y0}, {y1})"),
            Self::Disk { center, radius } => write!(f, "disk({}, {}, {radius})", center[0], center[1]),
            Self::Annulus {
                center,
                r_inner,
                r_outer,
            } => write!(f, "annulus({}, {}, {r_inner}, {r_outer})", center[0], center[1]),
        }
    }
}

impl FromStr for DomainSpec {
    type Err = Error;

    /// Parses `interval(x0, x1)`, `rectangle(x0, x1, y0, y1)`,
    /// `disk(cx, cy, r)` or `annulus(cx, cy, r_inner, r_outer)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidDomain(s.trim().to_string());
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let body = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let args = body
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        match (s[..open].trim(), args.as_slice()) {
            ("interval", &[x0, x1]) => Self::interval(x0, x1),
            ("rectangle", &[x0, x1, y0, y1]) => Self::rectangle(x0, x1, y0, y1),
            ("disk", &[cx, cy, r]) => Self::disk([cx, cy], r),
            ("annulus", &[cx, cy, ri, ro]) => Self::annulus([cx, cy], ri, ro),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

/// Uniform Cartesian grid over the padded bounding box of a domain.
///
/// Nodes with `sd < -h/2` are interior, nodes with `|sd| <= h/2` are boundary
/// nodes (Dirichlet data is imposed there, taken at the nearest point of ∂Ω),
/// everything else is exterior. Since the signed distance is 1-Lipschitz, every
/// stencil neighbour of an interior node is interior or boundary.
#[derive(Debug)]
pub struct Grid {
    domain: DomainSpec,
    h: f64,
    low: Point,
    pad: usize,
    dims: [usize; 2],
    class: Vec<NodeClass>,
    sd: Vec<f64>,
    foot: Vec<Point>,
}

impl Grid {
    /// Grid padded by two cells around the bounding box.
    pub fn build(domain: &DomainSpec, h: f64) -> Result<Arc<Self>> {
        Self::build_padded(domain, h, 2)
    }

    /// Grid padded by `pad` cells. Grids of the same domain and spacing are
    /// node-aligned regardless of padding (see [`Grid::locate_in`]).
    pub fn build_padded(domain: &DomainSpec, h: f64, pad: usize) -> Result<Arc<Self>> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidSpacing(h));
        }
        let (lo, hi) = domain.bounding_box();
        let n_axes = domain.dimension();
        let mut dims = [1usize; 2];
        for k in 0..n_axes {
            let cells = (hi[k] - lo[k]) / h;
            let rounded = cells.round();
            let cells = if (cells - rounded).abs() <= 1e-9 * cells.max(1.0) {
                rounded
            } else {
                cells.ceil()
            };
            if cells > 1e8 {
                return Err(Error::InvalidSpacing(h));
            }
            dims[k] = cells as usize + 2 * pad + 1;
        }
        let total = dims[0] * dims[1];
        let mut grid = Grid {
            domain: domain.clone(),
            h,
            low: lo,
            pad,
            dims,
            class: Vec::with_capacity(total),
            sd: Vec::with_capacity(total),
            foot: Vec::with_capacity(total),
        };
        for idx in 0..total {
            let p = grid.coords(idx);
            let sd = domain.signed_distance(p);
            let class = if sd < -0.5 * h {
                NodeClass::Interior
            } else if sd <= 0.5 * h {
                NodeClass::Boundary
            } else {
                NodeClass::Exterior
            };
            grid.class.push(class);
            grid.sd.push(sd);
            grid.foot.push(domain.nearest_boundary_point(p));
        }
        if !grid.class.contains(&NodeClass::Interior) {
            return Err(Error::GridTooCoarse { h });
        }
        Ok(Arc::new(grid))
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.dims[0], idx / self.dims[0])
    }

    pub fn coords(&self, idx: usize) -> Point {
        let (i, j) = self.ij(idx);
        let pad = self.pad as f64;
        let x = self.low[0] + (i as f64 - pad) * self.h;
        let y = if self.dimension() == 1 {
            0.0
        } else {
            self.low[1] + (j as f64 - pad) * self.h
        };
        [x, y]
    }

    pub fn class(&self, idx: usize) -> NodeClass {
        self.class[idx]
    }

    pub fn signed_distance(&self, idx: usize) -> f64 {
        self.sd[idx]
    }

    /// Unsigned distance to ∂Ω, the `d` variable of coefficient expressions.
    pub fn distance(&self, idx: usize) -> f64 {
        self.sd[idx].abs()
    }

    /// Nearest point of ∂Ω; boundary data is evaluated there.
    pub fn boundary_foot(&self, idx: usize) -> Point {
        self.foot[idx]
    }

    /// Number of stencil neighbours per node (2N).
    pub fn stencil_len(&self) -> usize {
        2 * self.dimension()
    }

    /// Axis neighbours of a node; the first [`stencil_len`](Self::stencil_len)
    /// entries are meaningful and `None` marks the edge of the grid.
    pub fn stencil(&self, idx: usize) -> [Option<usize>; 4] {
        let (i, j) = self.ij(idx);
        let nx = self.dims[0];
        let mut out = [None; 4];
        out[0] = (i > 0).then(|| idx - 1);
        out[1] = (i + 1 < nx).then(|| idx + 1);
        if self.dimension() == 2 {
            out[2] = (j > 0).then(|| idx - nx);
            out[3] = (j + 1 < self.dims[1]).then(|| idx + nx);
        }
        out
    }

    /// Nodes of Ω (interior nodes only).
    pub fn interior_mask(self: &Arc<Self>) -> RegionMask {
        RegionMask::from_fn(self, |g, i| g.class(i) == NodeClass::Interior)
    }

    /// Nodes of Ω̄ (interior and boundary nodes).
    pub fn closure_mask(self: &Arc<Self>) -> RegionMask {
        RegionMask::from_fn(self, |g, i| g.class(i) != NodeClass::Exterior)
    }

    pub fn boundary_mask(self: &Arc<Self>) -> RegionMask {
        RegionMask::from_fn(self, |g, i| g.class(i) == NodeClass::Boundary)
    }

    pub fn full_mask(self: &Arc<Self>) -> RegionMask {
        RegionMask::from_fn(self, |_, _| true)
    }

    /// True when both grids discretize the same domain with the same nodes.
    pub fn same_layout(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other)
            || (self.domain == other.domain
                && self.h == other.h
                && self.pad == other.pad
                && self.dims == other.dims)
    }

    /// Index of node `idx` of this grid in an aligned grid `other` (same
    /// domain and spacing, any padding), or `None` if it falls outside.
    pub fn locate_in(&self, idx: usize, other: &Grid) -> Option<usize> {
        if self.domain != other.domain || self.h != other.h {
            return None;
        }
        let (i, j) = self.ij(idx);
        let shift = other.pad as isize - self.pad as isize;
        let oi = i as isize + shift;
        let oj = if self.dimension() == 1 { 0 } else { j as isize + shift };
        if oi < 0 || oj < 0 || oi as usize >= other.dims[0] || oj as usize >= other.dims[1] {
            return None;
        }
        Some(oj as usize * other.dims[0] + oi as usize)
    }
}

/// Which side of ∂Ω a tubular neighbourhood keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TubeSide {
    /// O_ε: nodes within ε of ∂Ω on either side.
    Both,
    /// Ω̄ ∩ O_ε.
    InsideOnly,
}

/// A subset of the nodes of one grid.
#[derive(Clone, Debug)]
pub struct RegionMask {
    grid: Arc<Grid>,
    members: Vec<bool>,
}

impl RegionMask {
    pub fn from_fn(grid: &Arc<Grid>, pred: impl Fn(&Grid, usize) -> bool) -> Self {
        let members = (0..grid.len()).map(|i| pred(grid, i)).collect();
        Self {
            grid: Arc::clone(grid),
            members,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.members[idx]
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&m| m)
    }

    /// Member node indices in increasing order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.grid.same_layout(&other.grid)
            && self.members.iter().zip(&other.members).all(|(&a, &b)| !a || b)
    }

    pub fn union(&self, other: &RegionMask) -> Result<RegionMask> {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &RegionMask) -> Result<RegionMask> {
        self.combine(other, |a, b| a && b)
    }

    fn combine(&self, other: &RegionMask, op: impl Fn(bool, bool) -> bool) -> Result<RegionMask> {
        if !self.grid.same_layout(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let members = self.members.iter().zip(&other.members).map(|(&a, &b)| op(a, b)).collect();
        Ok(RegionMask {
            grid: Arc::clone(&self.grid),
            members,
        })
    }

    /// Cell-counting estimate of the Lebesgue measure: `count · h^N`.
    pub fn measure(&self) -> Result<f64> {
        let n = self.count();
        if n == 0 {
            return Err(Error::EmptyRegion);
        }
        Ok(n as f64 * self.grid.spacing().powi(self.grid.dimension() as i32))
    }

    /// Connected components under stencil adjacency, ordered by their lowest
    /// node index.
    pub fn components(&self) -> Vec<RegionMask> {
        let mut label = vec![usize::MAX; self.members.len()];
        let mut comps = Vec::new();
        let mut stack = Vec::new();
        let nst = self.grid.stencil_len();
        for seed in 0..self.members.len() {
            if !self.members[seed] || label[seed] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = vec![false; self.members.len()];
            label[seed] = id;
            stack.push(seed);
            while let Some(n) = stack.pop() {
                members[n] = true;
                for nb in self.grid.stencil(n)[..nst].iter().flatten() {
                    if self.members[*nb] && label[*nb] == usize::MAX {
                        label[*nb] = id;
                        stack.push(*nb);
                    }
                }
            }
            comps.push(RegionMask {
                grid: Arc::clone(&self.grid),
                members,
            });
        }
        comps
    }
}

/// Nodes whose distance to ∂Ω is below `eps`. Nodes on the edge of the tube
/// up to rounding (within `1e-9·h`) are left out, so that they act as its
/// Dirichlet boundary.
pub fn tubular_mask(grid: &Arc<Grid>, eps: f64, side: TubeSide) -> RegionMask {
    let cut = eps - 1e-9 * grid.spacing();
    RegionMask::from_fn(grid, |g, i| {
        g.distance(i) < cut && (side == TubeSide::Both || g.class(i) != NodeClass::Exterior)
    })
}
