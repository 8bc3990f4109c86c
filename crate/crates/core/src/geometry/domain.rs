use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use super::primitives::{cuboid_level, ellipsoid_level, polygon_level, union_level};
use super::{dist, dot, norm, point, scale, Point};
use crate::error::{Error, Result};

pub type LevelFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Parsed geometry of a [`DomainSpec`].
#[derive(Clone)]
pub enum Shape {
    Ball { center: Point, radius: f64 },
    /// Spherical shell `inner < |x - center| < outer`.
    Annulus { center: Point, inner: f64, outer: f64 },
    /// Axis-aligned ellipse or ellipsoid.
    Ellipsoid { center: Point, semi_axes: [f64; 3] },
    UnionOfBalls { centers: Vec<Point>, radii: Vec<f64> },
    /// Simple polygon, either orientation.
    Polygon { vertices: Vec<[f64; 2]> },
    /// Axis-aligned box (the polyhedral kind in any dimension).
    Cuboid { lo: Point, hi: Point },
    /// `{ x : normal . x > offset }` with a unit normal.
    HalfSpace { normal: Point, offset: f64 },
    /// Open `radius`-neighbourhood of the closure of `base`.
    ParallelBody { base: Box<DomainSpec>, radius: f64 },
    /// Points of `base` farther than `radius` from its boundary.
    InnerParallel { base: Box<DomainSpec>, radius: f64 },
    /// `base` minus the closure of `remove`.
    Difference { base: Box<DomainSpec>, remove: Box<DomainSpec> },
    /// Interior of the complement of `of`.
    Complement { of: Box<DomainSpec> },
    /// `{ f > 0 }` for a user function; `lo`, `hi` bound the zero set.
    Implicit { f: LevelFn, lo: Point, hi: Point },
}

/// A domain description: the JSON triple `{kind, params, dim}` plus its parsed shape.
#[derive(Clone)]
pub struct DomainSpec {
    kind: String,
    params: Value,
    dim: usize,
    shape: Shape,
}

impl fmt::Debug for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DomainSpec({}, dim {}, {})", self.kind, self.dim, self.params)
    }
}

impl PartialEq for DomainSpec {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.dim == other.dim && self.params == other.params
    }
}

#[derive(Serialize, Deserialize)]
struct RawDomain {
    kind: String,
    #[serde(default)]
    params: Value,
    dim: usize,
}

impl Serialize for DomainSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawDomain {
            kind: self.kind.clone(),
            params: self.params.clone(),
            dim: self.dim,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DomainSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawDomain::deserialize(d)?;
        DomainSpec::from_parts(&raw.kind, raw.params, raw.dim).map_err(serde::de::Error::custom)
    }
}

fn field<'a>(params: &'a Value, name: &str, kind: &str) -> Result<&'a Value> {
    params
        .get(name)
        .ok_or_else(|| Error::Config(format!("domain `{kind}`: missing params.{name}")))
}

fn real(params: &Value, name: &str, kind: &str) -> Result<f64> {
    field(params, name, kind)?
        .as_f64()
        .ok_or_else(|| Error::Config(format!("domain `{kind}`: params.{name} must be a number")))
}

fn reals(v: &Value, name: &str, kind: &str) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Config(format!("domain `{kind}`: params.{name} must be an array")))?;
    arr.iter()
        .map(|x| {
            x.as_f64().ok_or_else(|| {
                Error::Config(format!("domain `{kind}`: params.{name} must hold numbers"))
            })
        })
        .collect()
}

fn vector(params: &Value, name: &str, kind: &str, dim: usize) -> Result<Point> {
    let v = reals(field(params, name, kind)?, name, kind)?;
    if v.len() != dim {
        return Err(Error::Config(format!(
            "domain `{kind}`: params.{name} has {} entries, expected {dim}",
            v.len()
        )));
    }
    Ok(point(&v))
}

fn center(params: &Value, kind: &str, dim: usize) -> Result<Point> {
    if params.get("center").is_some() {
        vector(params, "center", kind, dim)
    } else {
        Ok([0.0; 3])
    }
}

fn positive(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{what} must be > 0, got {v}")))
    }
}

fn nested(params: &Value, name: &str, kind: &str, dim: usize) -> Result<Box<DomainSpec>> {
    let d: DomainSpec = serde_json::from_value(field(params, name, kind)?.clone())
        .map_err(|e| Error::Config(format!("domain `{kind}`: params.{name}: {e}")))?;
    if d.dim != dim {
        return Err(Error::Config(format!(
            "domain `{kind}`: params.{name} has dimension {}, expected {dim}",
            d.dim
        )));
    }
    Ok(Box::new(d))
}

impl DomainSpec {
    /// Parses and validates a domain from its serialized parts.
    pub fn from_parts(kind: &str, params: Value, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!("domain dimension must be 1, 2 or 3, got {dim}")));
        }
        let p = &params;
        let shape = match kind {
            "ball" => Shape::Ball {
                center: center(p, kind, dim)?,
                radius: positive(real(p, "radius", kind)?, "ball radius")?,
            },
            "annulus" => {
                if dim < 2 {
                    return Err(Error::Config("annulus needs dimension 2 or 3".into()));
                }
                let inner = positive(real(p, "inner", kind)?, "annulus inner radius")?;
                let outer = real(p, "outer", kind)?;
                if !(outer > inner) {
                    return Err(Error::Config(format!(
                        "annulus outer radius {outer} must exceed inner radius {inner}"
                    )));
                }
                Shape::Annulus {
                    center: center(p, kind, dim)?,
                    inner,
                    outer,
                }
            }
            "ellipse" | "ellipsoid" => {
                if dim < 2 {
                    return Err(Error::Config("ellipse needs dimension 2 or 3".into()));
                }
                let axes = vector(p, "semi_axes", kind, dim)?;
                let mut semi_axes = [1.0; 3];
                for a in 0..dim {
                    semi_axes[a] = positive(axes[a], "semi-axis")?;
                }
                Shape::Ellipsoid {
                    center: center(p, kind, dim)?,
                    semi_axes,
                }
            }
            "union_of_balls" => {
                let cs = field(p, "centers", kind)?
                    .as_array()
                    .ok_or_else(|| Error::Config("union_of_balls: params.centers must be an array".into()))?;
                let radii = reals(field(p, "radii", kind)?, "radii", kind)?;
                if cs.is_empty() || cs.len() != radii.len() {
                    return Err(Error::Config(
                        "union_of_balls: centers and radii must be nonempty and of equal length".into(),
                    ));
                }
                let mut centers = Vec::with_capacity(cs.len());
                for c in cs {
                    let v = reals(c, "centers", kind)?;
                    if v.len() != dim {
                        return Err(Error::Config(format!(
                            "union_of_balls: every center needs {dim} coordinates"
                        )));
                    }
                    centers.push(point(&v));
                }
                for r in &radii {
                    positive(*r, "union_of_balls radius")?;
                }
                Shape::UnionOfBalls { centers, radii }
            }
            "polygon" => {
                if dim != 2 {
                    return Err(Error::Config("polygon needs dimension 2".into()));
                }
                let vs = field(p, "vertices", kind)?
                    .as_array()
                    .ok_or_else(|| Error::Config("polygon: params.vertices must be an array".into()))?;
                let mut vertices = Vec::with_capacity(vs.len());
                for v in vs {
                    let c = reals(v, "vertices", kind)?;
                    if c.len() != 2 {
                        return Err(Error::Config("polygon: vertices need 2 coordinates".into()));
                    }
                    vertices.push([c[0], c[1]]);
                }
                if vertices.len() < 3 {
                    return Err(Error::Config("polygon: at least 3 vertices required".into()));
                }
                Shape::Polygon { vertices }
            }
            "box" => {
                let lo = vector(p, "lo", kind, dim)?;
                let hi = vector(p, "hi", kind, dim)?;
                for a in 0..dim {
                    if !(hi[a] > lo[a]) {
                        return Err(Error::Config(format!("box: hi[{a}] must exceed lo[{a}]")));
                    }
                }
                Shape::Cuboid { lo, hi }
            }
            "polyhedron" => {
                return Err(Error::UnsupportedKind {
                    op: "domain construction (use `box` for polyhedral domains)",
                    kind: kind.into(),
                })
            }
            "half_space" => {
                let n = vector(p, "normal", kind, dim)?;
                let len = norm(&n);
                if !(len > 0.0) {
                    return Err(Error::Config("half_space: normal must be nonzero".into()));
                }
                Shape::HalfSpace {
                    normal: scale(&n, 1.0 / len),
                    offset: p.get("offset").and_then(Value::as_f64).unwrap_or(0.0) / len,
                }
            }
            "parallel_body" => Shape::ParallelBody {
                base: nested(p, "base", kind, dim)?,
                radius: positive(real(p, "radius", kind)?, "parallel_body radius")?,
            },
            "inner_parallel" => Shape::InnerParallel {
                base: nested(p, "base", kind, dim)?,
                radius: positive(real(p, "radius", kind)?, "inner_parallel radius")?,
            },
            "difference" => Shape::Difference {
                base: nested(p, "base", kind, dim)?,
                remove: nested(p, "remove", kind, dim)?,
            },
            "complement" => Shape::Complement {
                of: nested(p, "of", kind, dim)?,
            },
            "implicit" => {
                return Err(Error::Config(
                    "implicit domains wrap code and can only be built with DomainSpec::implicit".into(),
                ))
            }
            other => {
                return Err(Error::Config(format!("unknown domain kind `{other}`")));
            }
        };
        Ok(Self {
            kind: kind.to_string(),
            params,
            dim,
            shape,
        })
    }

    pub fn ball(center: &[f64], radius: f64) -> Result<Self> {
        Self::from_parts("ball", json!({"center": center, "radius": radius}), center.len())
    }

    pub fn annulus(center: &[f64], inner: f64, outer: f64) -> Result<Self> {
        Self::from_parts(
            "annulus",
            json!({"center": center, "inner": inner, "outer": outer}),
            center.len(),
        )
    }

    pub fn ellipse(center: &[f64], semi_axes: &[f64]) -> Result<Self> {
        let kind = if center.len() == 3 { "ellipsoid" } else { "ellipse" };
        Self::from_parts(kind, json!({"center": center, "semi_axes": semi_axes}), center.len())
    }

    pub fn union_of_balls(centers: &[Vec<f64>], radii: &[f64]) -> Result<Self> {
        let dim = centers.first().map(Vec::len).unwrap_or(0);
        Self::from_parts("union_of_balls", json!({"centers": centers, "radii": radii}), dim)
    }

    pub fn polygon(vertices: &[[f64; 2]]) -> Result<Self> {
        Self::from_parts("polygon", json!({ "vertices": vertices }), 2)
    }

    pub fn cuboid(lo: &[f64], hi: &[f64]) -> Result<Self> {
        Self::from_parts("box", json!({"lo": lo, "hi": hi}), lo.len())
    }

    /// `{ x : normal . x > offset }`.
    pub fn half_space(normal: &[f64], offset: f64) -> Result<Self> {
        Self::from_parts("half_space", json!({"normal": normal, "offset": offset}), normal.len())
    }

    pub fn inner_parallel(base: &DomainSpec, radius: f64) -> Result<Self> {
        Self::from_parts(
            "inner_parallel",
            json!({"base": base, "radius": radius}),
            base.dim,
        )
    }

    pub fn difference(base: &DomainSpec, remove: &DomainSpec) -> Result<Self> {
        Self::from_parts("difference", json!({"base": base, "remove": remove}), base.dim)
    }

    pub fn complement(of: &DomainSpec) -> Result<Self> {
        Self::from_parts("complement", json!({ "of": of }), of.dim)
    }

    /// Domain `{ f > 0 }`. The zero set must lie in the box `[lo, hi]`; `f`
    /// should behave like a distance near it. The standing assumption that
    /// the boundary of the set equals the boundary of its exterior is not
    /// checked for user functions.
    pub fn implicit<F>(label: &str, lo: &[f64], hi: &[f64], f: F) -> Result<Self>
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        let dim = lo.len();
        if !(1..=3).contains(&dim) || hi.len() != dim {
            return Err(Error::Config("implicit domain: bad bounding box".into()));
        }
        Ok(Self {
            kind: "implicit".into(),
            params: json!({"label": label, "lo": lo, "hi": hi}),
            dim,
            shape: Shape::Implicit {
                f: Arc::new(f),
                lo: point(lo),
                hi: point(hi),
            },
        })
    }

    pub(crate) fn with_shape(kind: &str, params: Value, dim: usize, shape: Shape) -> Self {
        Self {
            kind: kind.into(),
            params,
            dim,
            shape,
        }
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn params(&self) -> &Value {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Signed distance-like level: positive inside, negative outside, zero on
    /// the boundary, and 1-Lipschitz. Exact for the closed-form kinds (see
    /// [`DomainSpec::is_exact`]); composite kinds return a lower bound on the
    /// magnitude with the correct sign; implicit kinds return the user function.
    pub fn level(&self, x: &Point) -> f64 {
        match &self.shape {
            Shape::Ball { center, radius } => radius - dist(x, center),
            Shape::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = dist(x, center);
                (r - inner).min(outer - r)
            }
            Shape::Ellipsoid { center, semi_axes } => {
                if self.dim == 1 {
                    semi_axes[0] - (x[0] - center[0]).abs()
                } else {
                    ellipsoid_level(center, semi_axes, self.dim, x)
                }
            }
            Shape::UnionOfBalls { centers, radii } => union_level(centers, radii, self.dim, x),
            Shape::Polygon { vertices } => polygon_level(vertices, x),
            Shape::Cuboid { lo, hi } => cuboid_level(lo, hi, self.dim, x),
            Shape::HalfSpace { normal, offset } => dot(normal, x) - offset,
            Shape::ParallelBody { base, radius } => radius + base.level(x),
            Shape::InnerParallel { base, radius } => base.level(x) - radius,
            Shape::Difference { base, remove } => base.level(x).min(-remove.level(x)),
            Shape::Complement { of } => -of.level(x),
            Shape::Implicit { f, .. } => f(x),
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.level(x) > 0.0
    }

    /// Whether [`DomainSpec::level`] is the exact signed distance everywhere.
    pub fn is_exact(&self) -> bool {
        match &self.shape {
            Shape::Ball { .. }
            | Shape::Annulus { .. }
            | Shape::Ellipsoid { .. }
            | Shape::UnionOfBalls { .. }
            | Shape::Polygon { .. }
            | Shape::Cuboid { .. }
            | Shape::HalfSpace { .. } => true,
            Shape::ParallelBody { base, .. } => matches!(base.shape, Shape::Ball { .. }),
            Shape::Complement { of } => of.is_exact(),
            _ => false,
        }
    }

    /// Bounding box of the boundary; `None` when the boundary is unbounded.
    pub fn boundary_bounds(&self) -> Option<(Point, Point)> {
        let d = self.dim;
        let pad = |c: &Point, r: &[f64]| {
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            for a in 0..d {
                lo[a] = c[a] - r[a];
                hi[a] = c[a] + r[a];
            }
            (lo, hi)
        };
        match &self.shape {
            Shape::Ball { center, radius } => Some(pad(center, &[*radius; 3])),
            Shape::Annulus { center, outer, .. } => Some(pad(center, &[*outer; 3])),
            Shape::Ellipsoid { center, semi_axes } => Some(pad(center, semi_axes)),
            Shape::UnionOfBalls { centers, radii } => centers
                .iter()
                .zip(radii)
                .map(|(c, r)| pad(c, &[*r; 3]))
                .reduce(|a, b| merge(a, b, d)),
            Shape::Polygon { vertices } => {
                let mut lo = [f64::INFINITY, f64::INFINITY, 0.0];
                let mut hi = [f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0];
                for v in vertices {
                    for a in 0..2 {
                        lo[a] = lo[a].min(v[a]);
                        hi[a] = hi[a].max(v[a]);
                    }
                }
                Some((lo, hi))
            }
            Shape::Cuboid { lo, hi } => Some((*lo, *hi)),
            Shape::HalfSpace { .. } => None,
            Shape::ParallelBody { base, radius } => {
                base.boundary_bounds().map(|(lo, hi)| pad_box(lo, hi, *radius, d))
            }
            Shape::InnerParallel { base, .. } => base.boundary_bounds(),
            Shape::Difference { base, remove } => match (base.boundary_bounds(), remove.boundary_bounds()) {
                (Some(a), Some(b)) => Some(merge(a, b, d)),
                _ => None,
            },
            Shape::Complement { of } => of.boundary_bounds(),
            Shape::Implicit { lo, hi, .. } => Some((*lo, *hi)),
        }
    }

    /// Diameter of the boundary bounding box, or 1 for unbounded boundaries.
    pub fn length_scale(&self) -> f64 {
        match self.boundary_bounds() {
            Some((lo, hi)) => dist(&lo, &hi).max(1e-12),
            None => 1.0,
        }
    }

    /// Central-difference gradient of [`DomainSpec::level`] with step `eta`.
    pub fn level_gradient(&self, x: &Point, eta: f64) -> Point {
        let mut g = [0.0; 3];
        for a in 0..self.dim {
            let mut p = *x;
            let mut m = *x;
            p[a] += eta;
            m[a] -= eta;
            g[a] = (self.level(&p) - self.level(&m)) / (2.0 * eta);
        }
        g
    }

    /// Unit normal pointing into the domain at (or near) a boundary point.
    pub fn inward_normal(&self, x: &Point) -> Point {
        match &self.shape {
            Shape::Ball { center, .. } => super::normalize(&super::sub(center, x)),
            Shape::HalfSpace { normal, .. } => *normal,
            _ => {
                let eta = 1e-6 * self.length_scale().max(1e-3);
                super::normalize(&self.level_gradient(x, eta))
            }
        }
    }
}

fn merge(a: (Point, Point), b: (Point, Point), d: usize) -> (Point, Point) {
    let mut lo = a.0;
    let mut hi = a.1;
    for k in 0..d {
        lo[k] = lo[k].min(b.0[k]);
        hi[k] = hi[k].max(b.1[k]);
    }
    (lo, hi)
}

fn pad_box(mut lo: Point, mut hi: Point, r: f64, d: usize) -> (Point, Point) {
    for k in 0..d {
        lo[k] -= r;
        hi[k] += r;
    }
    (lo, hi)
}
