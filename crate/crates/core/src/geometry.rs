//! Tables of the flat-point family: two arcs `y = ±(|x|^β + 1)` on
//! `|x| ≤ X` closed by circular dispersing arcs, or the half table with a
//! straight floor `y = 0`.
//!
//! The boundary is traversed counter-clockwise, so the inward normal is the
//! tangent turned a quarter to the left. The arc-length coordinate `r`
//! starts at the lower-left end of the first component.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{adaptive_gk15, gauss_legendre8};
use crate::vec2::Vec2;

pub const DEFAULT_HALF_WIDTH: f64 = 0.7;
pub const DEFAULT_CLOSURE_SLACK: f64 = 4.0;

/// Junction tangents closer than this to parallel are treated as a cusp.
pub const JUNCTION_TOLERANCE: f64 = 1e-9;
/// Closing arcs with curvature below this are reported as near-flat.
pub const NEAR_FLAT_CURVATURE: f64 = 1e-2;
/// Below this |x| the flat-curve normal is taken to be exactly vertical.
pub const FLAT_POINT_CUTOFF: f64 = 1e-12;

const ARC_LENGTH_TOLERANCE: f64 = 1e-12;

/// `|x|^p` as `exp(p ln|x|)`, with `0^p = 0`.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        0.0
    } else {
        (p * a.ln()).exp()
    }
}

/// The profile `g_β(x) = |x|^β + 1`.
#[inline]
pub fn profile(beta: f64, x: f64) -> f64 {
    abs_pow(x, beta) + 1.0
}

/// `g_β'(x) = β sign(x) |x|^{β-1}`.
#[inline]
pub fn profile_slope(beta: f64, x: f64) -> f64 {
    beta * abs_pow(x, beta - 1.0).copysign(x)
}

/// Curvature of `y = ±g_β(x)` at abscissa `x`.
pub fn flat_curvature(beta: f64, x: f64) -> f64 {
    let slope_sq = beta * beta * abs_pow(x, 2.0 * (beta - 1.0));
    beta * (beta - 1.0) * abs_pow(x, beta - 2.0) / (1.0 + slope_sq).powf(1.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Half,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "half" => Ok(Variant::Half),
            other => Err(Error::InvalidParams(format!("unknown variant '{other}'"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::Half => "half",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatFamilyParams {
    pub beta: f64,
    pub half_width: f64,
    pub closure_slack: f64,
    pub variant: Variant,
}

impl FlatFamilyParams {
    /// Full table with the default half-width and closure slack.
    pub fn new(beta: f64) -> Self {
        FlatFamilyParams {
            beta,
            half_width: DEFAULT_HALF_WIDTH,
            closure_slack: DEFAULT_CLOSURE_SLACK,
            variant: Variant::Full,
        }
    }

    pub fn half(beta: f64) -> Self {
        FlatFamilyParams {
            variant: Variant::Half,
            ..Self::new(beta)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 2.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParams(format!(
                "beta must be > 2, got {}",
                self.beta
            )));
        }
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::InvalidParams(format!(
                "half_width must be > 0, got {}",
                self.half_width
            )));
        }
        if !(self.closure_slack > 0.0) || !self.closure_slack.is_finite() {
            return Err(Error::InvalidParams(format!(
                "closure_slack must be > 0, got {}",
                self.closure_slack
            )));
        }
        Ok(())
    }
}

/// Center and radius of the right closing circle: centered at `(X + s, 0)`
/// and passing through `(X, ±g_β(X))`. The left one is its mirror image.
pub fn closing_arc(params: &FlatFamilyParams) -> (Vec2, f64) {
    let g = profile(params.beta, params.half_width);
    let s = params.closure_slack;
    (
        Vec2::new(params.half_width + s, 0.0),
        (s * s + g * g).sqrt(),
    )
}

/// Arc length along `y = g_β(x)` measured from `x = 0`.
///
/// The excess `√(1+g'²) − 1` is integrated once per panel by adaptive
/// Gauss-Kronrod; partial panels use an 8-point Gauss-Legendre rule. Panels
/// are graded geometrically towards the flat point.
#[derive(Clone, Debug)]
struct FlatArcLength {
    beta: f64,
    breaks: Vec<f64>,
    prefix: Vec<f64>,
    half_length: f64,
    max_speed: f64,
}

impl FlatArcLength {
    fn new(beta: f64, half_width: f64) -> Self {
        const UNIFORM_PANELS: usize = 64;
        const GRADED_PANELS: i32 = 40;
        let first = half_width / UNIFORM_PANELS as f64;
        let mut breaks = vec![0.0];
        for k in (1..=GRADED_PANELS).rev() {
            breaks.push(first * 2f64.powi(-k));
        }
        for j in 1..=UNIFORM_PANELS {
            breaks.push(half_width * j as f64 / UNIFORM_PANELS as f64);
        }
        let excess = |t: f64| excess_speed(beta, t);
        let mut prefix = Vec::with_capacity(breaks.len());
        let mut acc = 0.0;
        prefix.push(0.0);
        for w in breaks.windows(2) {
            acc += adaptive_gk15(
                &excess,
                w[0],
                w[1],
                ARC_LENGTH_TOLERANCE / breaks.len() as f64,
            );
            prefix.push(acc);
        }
        let half_length = half_width + acc;
        FlatArcLength {
            beta,
            breaks,
            prefix,
            half_length,
            max_speed: 1.0 + excess_speed(beta, half_width),
        }
    }

    /// `S(u)` for `u ≥ 0`.
    fn unsigned(&self, u: f64) -> f64 {
        let k = self.breaks.partition_point(|&b| b <= u).saturating_sub(1);
        let k = k.min(self.breaks.len() - 1);
        let a = self.breaks[k];
        let beta = self.beta;
        u + self.prefix[k] + gauss_legendre8(&|t| excess_speed(beta, t), a, u)
    }

    fn signed(&self, x: f64) -> f64 {
        self.unsigned(x.abs()).copysign(x)
    }

    /// Inverse of `signed`; Newton from the right on the convex `S`, kept
    /// inside a shrinking bracket.
    fn inverse(&self, s: f64) -> f64 {
        let target = s.abs();
        let mut lo = target / self.max_speed;
        let mut hi = target;
        let mut u = hi;
        for _ in 0..80 {
            let residual = self.unsigned(u) - target;
            if residual.abs() <= 1e-15 * target.max(1.0) {
                break;
            }
            if residual > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let next = u - residual / (1.0 + excess_speed(self.beta, u));
            u = if next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        u.copysign(s)
    }
}

/// `√(1 + g'(t)²) − 1`, written to avoid cancellation near the flat point.
#[inline]
fn excess_speed(beta: f64, t: f64) -> f64 {
    let q = beta * beta * abs_pow(t, 2.0 * (beta - 1.0));
    q / ((1.0 + q).sqrt() + 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    IncreasingX,
    DecreasingX,
    /// Clockwise about the arc's own center.
    Clockwise,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentKind {
    FlatCurveBottom,
    FlatCurveTop,
    CircularArc {
        center: Vec2,
        radius: f64,
        /// Polar angle about `center` where the component starts; the angle
        /// decreases along the traversal.
        angle_start: f64,
        angle_end: f64,
    },
    StraightSegment {
        start: Vec2,
        end: Vec2,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryComponent {
    #[serde(flatten)]
    pub kind: ComponentKind,
    pub arclength_start: f64,
    pub arclength_end: f64,
    pub orientation: Orientation,
}

impl BoundaryComponent {
    pub fn length(&self) -> f64 {
        self.arclength_end - self.arclength_start
    }

    pub fn is_flat_curve(&self) -> bool {
        matches!(
            self.kind,
            ComponentKind::FlatCurveBottom | ComponentKind::FlatCurveTop
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub r: f64,
    pub position: Vec2,
    pub unit_tangent: Vec2,
    pub unit_inward_normal: Vec2,
    pub curvature: f64,
    pub component_id: usize,
}

/// Position and orientation at a boundary parameter, without `r`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Frame {
    pub position: Vec2,
    pub tangent: Vec2,
    pub normal: Vec2,
}

#[derive(Clone, Debug)]
pub struct BetaTable {
    pub params: FlatFamilyParams,
    pub components: Vec<BoundaryComponent>,
    pub total_length: f64,
    arc_length: FlatArcLength,
    diameter: f64,
}

/// JSON description of a table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableDescription {
    pub beta: f64,
    pub half_width: f64,
    pub closure_slack: f64,
    pub variant: Variant,
    pub components: Vec<BoundaryComponent>,
    pub total_length: f64,
}

/// Builds and validates a table.
pub fn build_table(params: FlatFamilyParams) -> Result<BetaTable> {
    params.validate()?;
    let table = BetaTable::assemble(params)?;
    let report = validate_table(&table);
    if let Some(issue) = report.fatal_issues().next() {
        return Err(Error::Geometry(issue.to_string()));
    }
    Ok(table)
}

impl BetaTable {
    fn assemble(params: FlatFamilyParams) -> Result<BetaTable> {
        let beta = params.beta;
        let half_width = params.half_width;
        let arc_length = FlatArcLength::new(beta, half_width);
        let flat_len = 2.0 * arc_length.half_length;
        let (right_center, radius) = closing_arc(&params);
        let left_center = Vec2::new(-right_center.x, 0.0);
        let g = profile(beta, half_width);
        let half_opening = g.atan2(params.closure_slack);

        let mut kinds: Vec<(ComponentKind, f64, Orientation)> = Vec::with_capacity(4);
        match params.variant {
            Variant::Full => {
                kinds.push((
                    ComponentKind::FlatCurveBottom,
                    flat_len,
                    Orientation::IncreasingX,
                ));
                kinds.push((
                    ComponentKind::CircularArc {
                        center: right_center,
                        radius,
                        angle_start: PI + half_opening,
                        angle_end: PI - half_opening,
                    },
                    2.0 * radius * half_opening,
                    Orientation::Clockwise,
                ));
                kinds.push((
                    ComponentKind::FlatCurveTop,
                    flat_len,
                    Orientation::DecreasingX,
                ));
                kinds.push((
                    ComponentKind::CircularArc {
                        center: left_center,
                        radius,
                        angle_start: half_opening,
                        angle_end: -half_opening,
                    },
                    2.0 * radius * half_opening,
                    Orientation::Clockwise,
                ));
            }
            Variant::Half => {
                let foot = right_center.x - radius;
                if !(foot > 0.0) {
                    return Err(Error::Geometry(format!(
                        "closing arcs reach past the symmetry axis (foot at x = {foot})"
                    )));
                }
                kinds.push((
                    ComponentKind::StraightSegment {
                        start: Vec2::new(-foot, 0.0),
                        end: Vec2::new(foot, 0.0),
                    },
                    2.0 * foot,
                    Orientation::IncreasingX,
                ));
                kinds.push((
                    ComponentKind::CircularArc {
                        center: right_center,
                        radius,
                        angle_start: PI,
                        angle_end: PI - half_opening,
                    },
                    radius * half_opening,
                    Orientation::Clockwise,
                ));
                kinds.push((
                    ComponentKind::FlatCurveTop,
                    flat_len,
                    Orientation::DecreasingX,
                ));
                kinds.push((
                    ComponentKind::CircularArc {
                        center: left_center,
                        radius,
                        angle_start: half_opening,
                        angle_end: 0.0,
                    },
                    radius * half_opening,
                    Orientation::Clockwise,
                ));
            }
        }

        let mut components = Vec::with_capacity(kinds.len());
        let mut start = 0.0;
        for (kind, len, orientation) in kinds {
            components.push(BoundaryComponent {
                kind,
                arclength_start: start,
                arclength_end: start + len,
                orientation,
            });
            start += len;
        }
        let mut table = BetaTable {
            params,
            components,
            total_length: start,
            arc_length,
            diameter: 0.0,
        };
        table.diameter = table.compute_diameter();
        Ok(table)
    }

    fn compute_diameter(&self) -> f64 {
        let pts: Vec<Vec2> = (0..720)
            .map(|i| {
                let r = self.total_length * i as f64 / 720.0;
                let (c, local) = self.locate_unchecked(r);
                self.frame(c, self.param_at(c, local)).position
            })
            .collect();
        let mut best = 0.0f64;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                best = best.max((*a - *b).norm());
            }
        }
        // The sampled chord can only underestimate; pad by the sampling step.
        best + self.total_length / 720.0
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn half_width(&self) -> f64 {
        self.params.half_width
    }

    /// Upper bound on any chord of the table.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn describe(&self) -> TableDescription {
        TableDescription {
            beta: self.params.beta,
            half_width: self.params.half_width,
            closure_slack: self.params.closure_slack,
            variant: self.params.variant,
            components: self.components.clone(),
            total_length: self.total_length,
        }
    }

    /// Arc length of a flat curve from `x = 0` to `x` (signed).
    pub fn flat_arclength(&self, x: f64) -> f64 {
        self.arc_length.signed(x)
    }

    /// Inverse of [`flat_arclength`](Self::flat_arclength).
    pub fn flat_x_of_arclength(&self, s: f64) -> f64 {
        self.arc_length.inverse(s)
    }

    fn locate_unchecked(&self, r: f64) -> (usize, f64) {
        let last = self.components.len() - 1;
        let c = self
            .components
            .iter()
            .position(|c| r < c.arclength_end)
            .unwrap_or(last);
        (c, r - self.components[c].arclength_start)
    }

    /// Component index and its natural parameter (x for flat curves and
    /// segments, polar angle for arcs) at boundary coordinate `r`.
    pub fn locate(&self, r: f64) -> Result<(usize, f64)> {
        if !(r >= 0.0 && r < self.total_length) {
            return Err(Error::OutOfRange {
                r,
                length: self.total_length,
            });
        }
        let (c, local) = self.locate_unchecked(r);
        Ok((c, self.param_at(c, local)))
    }

    pub(crate) fn param_at(&self, c: usize, local: f64) -> f64 {
        let half = self.arc_length.half_length;
        match self.components[c].kind {
            ComponentKind::FlatCurveBottom => self.arc_length.inverse(local - half),
            ComponentKind::FlatCurveTop => self.arc_length.inverse(half - local),
            ComponentKind::CircularArc {
                radius,
                angle_start,
                ..
            } => angle_start - local / radius,
            ComponentKind::StraightSegment { start, .. } => start.x + local,
        }
    }

    /// Boundary coordinate of a component parameter, wrapped into `[0, L)`.
    pub fn r_of(&self, c: usize, param: f64) -> f64 {
        let comp = &self.components[c];
        let half = self.arc_length.half_length;
        let local = match comp.kind {
            ComponentKind::FlatCurveBottom => half + self.arc_length.signed(param),
            ComponentKind::FlatCurveTop => half - self.arc_length.signed(param),
            ComponentKind::CircularArc {
                radius,
                angle_start,
                ..
            } => radius * (angle_start - param),
            ComponentKind::StraightSegment { start, .. } => param - start.x,
        };
        let mut r = comp.arclength_start + local.clamp(0.0, comp.length());
        if r >= self.total_length {
            r -= self.total_length;
        }
        r.max(0.0)
    }

    pub(crate) fn frame(&self, c: usize, param: f64) -> Frame {
        let beta = self.params.beta;
        match self.components[c].kind {
            ComponentKind::FlatCurveBottom | ComponentKind::FlatCurveTop => {
                let top = matches!(self.components[c].kind, ComponentKind::FlatCurveTop);
                let slope = if param.abs() < FLAT_POINT_CUTOFF {
                    0.0
                } else {
                    profile_slope(beta, param)
                };
                let g = profile(beta, param);
                let inv = 1.0 / (1.0 + slope * slope).sqrt();
                if top {
                    Frame {
                        position: Vec2::new(param, g),
                        tangent: Vec2::new(-inv, -slope * inv),
                        normal: Vec2::new(slope * inv, -inv),
                    }
                } else {
                    Frame {
                        position: Vec2::new(param, -g),
                        tangent: Vec2::new(inv, -slope * inv),
                        normal: Vec2::new(slope * inv, inv),
                    }
                }
            }
            ComponentKind::CircularArc { center, radius, .. } => {
                let (sin, cos) = param.sin_cos();
                Frame {
                    position: center + Vec2::new(cos, sin) * radius,
                    tangent: Vec2::new(sin, -cos),
                    normal: Vec2::new(cos, sin),
                }
            }
            ComponentKind::StraightSegment { .. } => Frame {
                position: Vec2::new(param, 0.0),
                tangent: Vec2::new(1.0, 0.0),
                normal: Vec2::new(0.0, 1.0),
            },
        }
    }

    pub(crate) fn curvature(&self, c: usize, param: f64) -> f64 {
        match self.components[c].kind {
            ComponentKind::FlatCurveBottom | ComponentKind::FlatCurveTop => {
                if param.abs() < FLAT_POINT_CUTOFF {
                    0.0
                } else {
                    flat_curvature(self.params.beta, param)
                }
            }
            ComponentKind::CircularArc { radius, .. } => 1.0 / radius,
            ComponentKind::StraightSegment { .. } => 0.0,
        }
    }

    pub(crate) fn point_from_param(&self, c: usize, param: f64) -> BoundaryPoint {
        let frame = self.frame(c, param);
        BoundaryPoint {
            r: self.r_of(c, param),
            position: frame.position,
            unit_tangent: frame.tangent,
            unit_inward_normal: frame.normal,
            curvature: self.curvature(c, param),
            component_id: c,
        }
    }

    /// Geometry at boundary coordinate `r ∈ [0, L)`.
    pub fn boundary_point(&self, r: f64) -> Result<BoundaryPoint> {
        let (c, param) = self.locate(r)?;
        let mut point = self.point_from_param(c, param);
        point.r = r;
        Ok(point)
    }

    /// Boundary coordinate of the point on flat component `c` at abscissa `x`.
    pub fn r_at_flat_x(&self, c: usize, x: f64) -> Result<f64> {
        if !self.components.get(c).is_some_and(|k| k.is_flat_curve()) {
            return Err(Error::InvalidParams(format!(
                "component {c} is not a flat curve"
            )));
        }
        if x.abs() > self.params.half_width {
            return Err(Error::InvalidParams(format!(
                "|x| = {} exceeds the half-width",
                x.abs()
            )));
        }
        Ok(self.r_of(c, x))
    }

    pub fn bottom_component(&self) -> Option<usize> {
        self.components
            .iter()
            .position(|c| matches!(c.kind, ComponentKind::FlatCurveBottom))
    }

    pub fn top_component(&self) -> usize {
        self.components
            .iter()
            .position(|c| matches!(c.kind, ComponentKind::FlatCurveTop))
            .expect("every table has a top flat curve")
    }

    /// The points bordering the window `|x| < ε` on ∂Q, as `r` values:
    /// `q1 = (ε, -g(ε))`, then counter-clockwise. Two points in the half
    /// table's top curve plus the floor's two.
    pub fn window_corners(&self, epsilon: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(4);
        for (c, comp) in self.components.iter().enumerate() {
            match comp.kind {
                ComponentKind::FlatCurveBottom => {
                    out.push(self.r_of(c, -epsilon));
                    out.push(self.r_of(c, epsilon));
                }
                ComponentKind::FlatCurveTop => {
                    out.push(self.r_of(c, epsilon));
                    out.push(self.r_of(c, -epsilon));
                }
                ComponentKind::StraightSegment { start, end } => {
                    out.push(self.r_of(c, (-epsilon).max(start.x)));
                    out.push(self.r_of(c, epsilon.min(end.x)));
                }
                ComponentKind::CircularArc { .. } => {}
            }
        }
        // Order from q1 = (ε, -g(ε)) counter-clockwise.
        out.rotate_left(1);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JunctionReport {
    /// The junction between component `index` and its successor.
    pub index: usize,
    pub r: f64,
    pub position: Vec2,
    pub interior_angle: f64,
    pub continuity_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosingCurvature {
    pub component_id: usize,
    pub min_curvature: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum ValidationIssue {
    JunctionAngle {
        index: usize,
        interior_angle: f64,
    },
    Discontinuity {
        index: usize,
        residual: f64,
    },
    NonPositiveCurvature {
        component_id: usize,
        curvature: f64,
    },
    ArcLeavesCorridor {
        component_id: usize,
        x: f64,
        y: f64,
    },
    ArcsCrossAxis {
        foot: f64,
    },
    /// Not fatal: the closure is nearly flat and hyperbolicity there is weak.
    NearFlatClosure {
        component_id: usize,
        curvature: f64,
    },
}

impl ValidationIssue {
    pub fn is_fatal(&self) -> bool {
        !matches!(self, ValidationIssue::NearFlatClosure { .. })
    }
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValidationIssue::JunctionAngle {
                index,
                interior_angle,
            } => write!(
                f,
                "junction {index}: interior angle {interior_angle:.6} rad is not in (0, pi)"
            ),
            ValidationIssue::Discontinuity { index, residual } => {
                write!(f, "junction {index}: components do not meet (gap {residual:e})")
            }
            ValidationIssue::NonPositiveCurvature {
                component_id,
                curvature,
            } => write!(
                f,
                "closing component {component_id} has curvature {curvature:e} <= 0"
            ),
            ValidationIssue::ArcLeavesCorridor { component_id, x, y } => write!(
                f,
                "closing arc {component_id} is not convex inward: it crosses a flat curve near ({x:.4}, {y:.4})"
            ),
            ValidationIssue::ArcsCrossAxis { foot } => {
                write!(f, "closing arcs reach the symmetry axis (foot at x = {foot:.6})")
            }
            ValidationIssue::NearFlatClosure {
                component_id,
                curvature,
            } => write!(
                f,
                "closing component {component_id} is nearly flat (curvature {curvature:e})"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub junctions: Vec<JunctionReport>,
    pub closing_curvature: Vec<ClosingCurvature>,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn fatal_issues(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.is_fatal())
    }

    pub fn is_valid(&self) -> bool {
        self.fatal_issues().next().is_none()
    }

    pub fn max_continuity_residual(&self) -> f64 {
        self.junctions
            .iter()
            .map(|j| j.continuity_residual)
            .fold(0.0, f64::max)
    }
}

pub fn validate_table(table: &BetaTable) -> ValidationReport {
    let n = table.components.len();
    let mut junctions = Vec::with_capacity(n);
    let mut issues = Vec::new();
    for i in 0..n {
        let next = (i + 1) % n;
        let end = end_frame(table, i);
        let start = start_frame(table, next);
        let residual = (end.position - start.position).norm();
        let turning = end
            .tangent
            .cross(start.tangent)
            .atan2(end.tangent.dot(start.tangent));
        let interior_angle = PI - turning;
        if !(interior_angle > JUNCTION_TOLERANCE && interior_angle < PI - JUNCTION_TOLERANCE) {
            issues.push(ValidationIssue::JunctionAngle {
                index: i,
                interior_angle,
            });
        }
        if residual >= 1e-10 {
            issues.push(ValidationIssue::Discontinuity { index: i, residual });
        }
        junctions.push(JunctionReport {
            index: i,
            r: table.components[i].arclength_end % table.total_length,
            position: end.position,
            interior_angle,
            continuity_residual: residual,
        });
    }

    let beta = table.params.beta;
    let mut closing_curvature = Vec::new();
    for (id, comp) in table.components.iter().enumerate() {
        if let ComponentKind::CircularArc {
            center,
            radius,
            angle_start,
            angle_end,
        } = comp.kind
        {
            let curvature = 1.0 / radius;
            closing_curvature.push(ClosingCurvature {
                component_id: id,
                min_curvature: curvature,
            });
            if !(curvature > 0.0) {
                issues.push(ValidationIssue::NonPositiveCurvature {
                    component_id: id,
                    curvature,
                });
            } else if curvature < NEAR_FLAT_CURVATURE {
                issues.push(ValidationIssue::NearFlatClosure {
                    component_id: id,
                    curvature,
                });
            }
            // Interior arc points must lie strictly between the flat curves.
            for k in 1..256 {
                let a = angle_start + (angle_end - angle_start) * k as f64 / 256.0;
                let p = center + Vec2::new(a.cos(), a.sin()) * radius;
                let inside = p.x.abs() < table.params.half_width && p.y.abs() < profile(beta, p.x);
                if !inside {
                    issues.push(ValidationIssue::ArcLeavesCorridor {
                        component_id: id,
                        x: p.x,
                        y: p.y,
                    });
                    break;
                }
            }
        }
    }
    let (center, radius) = closing_arc(&table.params);
    let foot = center.x - radius;
    if !(foot > 0.0) {
        issues.push(ValidationIssue::ArcsCrossAxis { foot });
    }

    ValidationReport {
        junctions,
        closing_curvature,
        issues,
    }
}

fn start_frame(table: &BetaTable, c: usize) -> Frame {
    table.frame(c, table.param_at(c, 0.0))
}

fn end_frame(table: &BetaTable, c: usize) -> Frame {
    let comp = &table.components[c];
    let param = match comp.kind {
        ComponentKind::FlatCurveBottom => table.params.half_width,
        ComponentKind::FlatCurveTop => -table.params.half_width,
        ComponentKind::CircularArc { angle_end, .. } => angle_end,
        ComponentKind::StraightSegment { end, .. } => end.x,
    };
    table.frame(c, param)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_table(beta: f64) -> BetaTable {
        build_table(FlatFamilyParams::new(beta)).unwrap()
    }

    #[test]
    fn rejects_beta_at_two() {
        let err = build_table(FlatFamilyParams::new(2.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidParams(_)));
        let mut p = FlatFamilyParams::new(4.0);
        p.half_width = 0.0;
        assert!(matches!(build_table(p), Err(Error::InvalidParams(_))));
        p = FlatFamilyParams::new(4.0);
        p.closure_slack = -1.0;
        assert!(matches!(build_table(p), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn closing_radius_for_unit_half_width() {
        let p = FlatFamilyParams {
            beta: 4.0,
            half_width: 1.0,
            closure_slack: 0.5,
            variant: Variant::Full,
        };
        let (center, radius) = closing_arc(&p);
        assert_eq!(center, Vec2::new(1.5, 0.0));
        assert!((radius - 4.25f64.sqrt()).abs() < 1e-15);
        // The arc through (1, ±2) meets the steep flat curve at a reflex
        // corner, so this closure is rejected.
        assert!(matches!(build_table(p), Err(Error::Geometry(_))));
    }

    #[test]
    fn default_table_shape() {
        let t = default_table(4.0);
        assert_eq!(t.components.len(), 4);
        let top = t.top_component();
        let comp = t.components[top];
        let mid = 0.5 * (comp.arclength_start + comp.arclength_end);
        let p = t.boundary_point(mid).unwrap();
        assert!((p.position.x).abs() < 1e-12);
        assert!((p.position.y - 1.0).abs() < 1e-12);
        assert_eq!(p.curvature, 0.0);
        assert!((p.unit_inward_normal.y + 1.0).abs() < 1e-15);
    }

    #[test]
    fn flat_curvature_values() {
        assert_eq!(flat_curvature(3.0, 0.0), 0.0);
        assert!((flat_curvature(3.0, 1.0) - 6.0 / 10f64.powf(1.5)).abs() < 1e-12);
        assert!((flat_curvature(4.0, 0.5) - 3.0 / 1.25f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn default_tables_validate() {
        for beta in [3.0, 4.0, 6.0] {
            let report = validate_table(&default_table(beta));
            assert!(report.issues.is_empty(), "{beta}: {:?}", report.issues);
            for j in &report.junctions {
                assert!(j.interior_angle >= 0.1 && j.interior_angle <= PI - 0.1);
                assert!(j.continuity_residual < 1e-10);
            }
            for c in &report.closing_curvature {
                assert!(c.min_curvature > 0.0);
            }
        }
    }

    #[test]
    fn wide_closure_is_flagged_near_flat() {
        let mut p = FlatFamilyParams::new(4.0);
        p.closure_slack = 1e4;
        let table = build_table(p).unwrap();
        let report = validate_table(&table);
        assert!(report.is_valid());
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::NearFlatClosure { .. })));
    }

    #[test]
    fn half_table_accepts_straight_floor() {
        let table = build_table(FlatFamilyParams::half(4.0)).unwrap();
        let report = validate_table(&table);
        assert!(report.is_valid(), "{:?}", report.issues);
        let floor = &table.components[0];
        assert!(matches!(floor.kind, ComponentKind::StraightSegment { .. }));
        let p = table.boundary_point(0.5 * floor.length()).unwrap();
        assert_eq!(p.curvature, 0.0);
        assert!(p.position.y.abs() < 1e-15);
        // Floor meets the circle centered on y = 0 at a right angle.
        assert!((report.junctions[0].interior_angle - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_r() {
        let t = default_table(4.0);
        assert!(matches!(
            t.boundary_point(-1e-9),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            t.boundary_point(t.total_length),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn arclength_matches_direct_quadrature() {
        let t = default_table(3.5);
        let beta = 3.5;
        for &x in &[1e-6, 0.013, 0.2, 0.55, 0.7] {
            let direct = adaptive_gk15(
                &|u: f64| (1.0 + profile_slope(beta, u).powi(2)).sqrt(),
                0.0,
                x,
                1e-14,
            );
            assert!((t.flat_arclength(x) - direct).abs() < 1e-12, "x = {x}");
            assert!((t.flat_arclength(-x) + direct).abs() < 1e-12);
        }
    }

    #[test]
    fn window_corners_sit_at_epsilon() {
        let t = default_table(6.0);
        let q = t.window_corners(0.5);
        assert_eq!(q.len(), 4);
        let q1 = t.boundary_point(q[0]).unwrap().position;
        assert!((q1.x - 0.5).abs() < 1e-12 && (q1.y + profile(6.0, 0.5)).abs() < 1e-12);
        let q3 = t.boundary_point(q[2]).unwrap().position;
        assert!((q3.x + 0.5).abs() < 1e-12 && (q3.y - profile(6.0, 0.5)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn curvature_even_nonnegative(beta in 2.01f64..12.0, x in -2.0f64..2.0) {
            let k = flat_curvature(beta, x);
            prop_assert!(k >= 0.0);
            prop_assert_eq!(k, flat_curvature(beta, -x));
            prop_assert_eq!(k == 0.0, x == 0.0);
        }

        #[test]
        fn arclength_round_trip(beta in 2.05f64..10.0, frac in -1.0f64..1.0) {
            let t = build_table(FlatFamilyParams::new(beta)).unwrap();
            let x = frac * t.half_width();
            let s = t.flat_arclength(x);
            prop_assert!((t.flat_x_of_arclength(s) - x).abs() < 1e-10);
            prop_assert!((t.flat_arclength(t.flat_x_of_arclength(s)) - s).abs() < 1e-10);
        }

        #[test]
        fn frames_are_orthonormal(u in 0.0f64..1.0) {
            let t = default_table(4.0);
            let p = t.boundary_point(u * t.total_length * (1.0 - 1e-12)).unwrap();
            prop_assert!((p.unit_tangent.norm() - 1.0).abs() < 1e-12);
            prop_assert!((p.unit_inward_normal.norm() - 1.0).abs() < 1e-12);
            prop_assert!(p.unit_tangent.dot(p.unit_inward_normal).abs() < 1e-12);
            prop_assert!(p.curvature >= 0.0);
        }
    }
}
