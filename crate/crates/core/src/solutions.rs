//! Problem catalog: cavities with analytic modes, a manufactured solution
//! around star-shaped obstacles, and a pulsed plane wave scattered by a PEC.

use std::f64::consts::PI;

use crate::bessel::{bessel_j, bessel_root, bessel_y};
use crate::geometry::{BoundaryCurve, EmbeddedBoundary, Orientation, Point, Shape};
use crate::grid::Family;
use crate::{Error, Result};

/// Closed-form fields valid in `Ω+` (and, for the pulse, everywhere).
#[derive(Debug, Clone, PartialEq)]
pub enum Fields {
    Zero,
    CircularCavity { order: u32, alpha: f64 },
    SquareCavity { m: f64, n: f64, omega: f64 },
    ConcentricCylinders { alpha: f64, omega: f64 },
    Manufactured,
    Pulse { sigma: f64, gamma: f64 },
}

impl Fields {
    pub fn eval(&self, family: Family, p: Point, t: f64) -> f64 {
        match *self {
            Fields::Zero => 0.0,
            Fields::CircularCavity { order, alpha } => {
                let rho = p.norm();
                let phi = p.y.atan2(p.x);
                let i = order as f64;
                let ar = alpha * rho;
                match family {
                    Family::Ez => bessel_j(order, ar) * (i * phi).cos() * (alpha * t).cos(),
                    _ => {
                        // J_i(αρ) / (αρ), with its limit at ρ = 0
                        let j_over = if ar > 1e-12 {
                            bessel_j(order, ar) / ar
                        } else if order == 1 {
                            0.5
                        } else {
                            0.0
                        };
                        let h_rho = i * j_over * (i * phi).sin() * (alpha * t).sin();
                        let jm = if order == 0 { -bessel_j(1, ar) } else { bessel_j(order - 1, ar) };
                        let h_phi = 0.5 * (jm - bessel_j(order + 1, ar)) * (i * phi).cos() * (alpha * t).sin();
                        if family == Family::Hx {
                            h_rho * phi.cos() - h_phi * phi.sin()
                        } else {
                            h_rho * phi.sin() + h_phi * phi.cos()
                        }
                    }
                }
            }
            Fields::SquareCavity { m, n, omega } => {
                let (x, y) = (p.x, p.y);
                match family {
                    Family::Hx => -PI * n / omega * (m * PI * x).sin() * (n * PI * y).cos() * (omega * t).sin(),
                    Family::Hy => PI * m / omega * (m * PI * x).cos() * (n * PI * y).sin() * (omega * t).sin(),
                    Family::Ez => (m * PI * x).sin() * (n * PI * y).sin() * (omega * t).cos(),
                }
            }
            Fields::ConcentricCylinders { alpha, omega } => {
                let rho = p.norm();
                if rho < 1e-12 {
                    // outside Ω+ (inner cylinder); Y_n is singular there
                    return 0.0;
                }
                let phi = p.y.atan2(p.x);
                let z = 0.5 * omega * rho;
                let y = |n| bessel_y(n, z).expect("z > 0");
                let c1 = bessel_j(1, z) + alpha * y(1);
                let c02 = bessel_j(0, z) - bessel_j(2, z) + alpha * (y(0) - y(2));
                let (s, c) = ((omega * t + phi).sin(), (omega * t + phi).cos());
                match family {
                    Family::Hx => -0.5 * s * phi.sin() * c02 - 2.0 * phi.cos() / (omega * rho) * c * c1,
                    Family::Hy => 0.5 * s * phi.cos() * c02 - 2.0 * phi.sin() / (omega * rho) * c * c1,
                    Family::Ez => c * c1,
                }
            }
            Fields::Manufactured => {
                let (a, b, w) = (2.0 * PI * p.x, 2.0 * PI * p.y, 2.0 * PI * t);
                match family {
                    Family::Hx => 0.5 * a.sin() * b.sin() * w.sin(),
                    Family::Hy => 0.5 * a.cos() * b.cos() * w.sin(),
                    Family::Ez => a.sin() * b.cos() * w.cos(),
                }
            }
            Fields::Pulse { sigma, gamma } => {
                let u = p.x - gamma - t;
                let g = 2.0 / (sigma * sigma) * u * (-(u / sigma).powi(2)).exp();
                match family {
                    Family::Hx => 0.0,
                    Family::Hy => -g,
                    Family::Ez => g,
                }
            }
        }
    }
}

/// How the past time levels needed by the schemes are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Past levels from the analytic solution.
    AnalyticHistory,
    /// Past levels from the incident pulse.
    PulseHistory,
    /// Fields vanish near `Γ` for `t <= 0`.
    QuiescentNearGamma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub boundary: EmbeddedBoundary,
    pub eps: f64,
    pub mu: f64,
    pub t_final: f64,
    pub dt_ratio: f64,
    pub beta: f64,
    /// Exact solution in `Ω+`, if known.
    pub exact: Option<Fields>,
    /// Fields used to fill the initial and past time levels.
    pub initial: Fields,
    /// Boundary data `n x E+` and `n . H+` are taken from `exact` (false: PEC, zero data).
    pub inhomogeneous_boundary: bool,
    pub init_mode: InitMode,
    /// Temporal period of the exact solution.
    pub period: Option<f64>,
}

impl ProblemSpec {
    /// `(g_E, g_H)`: tangential E and normal H prescribed at a boundary point.
    pub fn boundary_data(&self, p: Point, normal: Point, t: f64) -> (f64, f64) {
        match (&self.exact, self.inhomogeneous_boundary) {
            (Some(f), true) => {
                (f.eval(Family::Ez, p, t), normal.x * f.eval(Family::Hx, p, t) + normal.y * f.eval(Family::Hy, p, t))
            }
            _ => (0.0, 0.0),
        }
    }

    /// `a = n x E+` as an in-plane vector and `b = n . (μ H+)`.
    pub fn boundary_data_ab(&self, p: Point, normal: Point, t: f64) -> (Point, f64) {
        let (ge, gh) = self.boundary_data(p, normal, t);
        (Point::new(normal.y * ge, -normal.x * ge), self.mu * gh)
    }

    pub fn with_t_final(mut self, t: f64) -> Self {
        self.t_final = t;
        self
    }
}

pub fn circular_cavity(i: u32, j: u32) -> Result<ProblemSpec> {
    if i < 1 || j < 1 {
        return Err(Error::Config(format!("circular cavity needs i, j >= 1 (got {i}, {j})")));
    }
    let alpha = bessel_root(i, j)?;
    Ok(ProblemSpec {
        name: "circular_cavity".into(),
        x_range: (-1.25, 1.25),
        y_range: (-1.25, 1.25),
        boundary: EmbeddedBoundary::single(BoundaryCurve::circle(Point::new(0.0, 0.0), 1.0, Orientation::PlusInside)?),
        eps: 1.0,
        mu: 1.0,
        t_final: 0.5,
        dt_ratio: 0.5,
        beta: 7.0,
        exact: Some(Fields::CircularCavity { order: i, alpha }),
        initial: Fields::CircularCavity { order: i, alpha },
        inhomogeneous_boundary: false,
        init_mode: InitMode::AnalyticHistory,
        period: Some(2.0 * PI / alpha),
    })
}

pub fn square_cavity(m: u32, n: u32) -> Result<ProblemSpec> {
    if m < 1 || n < 1 {
        return Err(Error::Config(format!("square cavity needs m, n >= 1 (got {m}, {n})")));
    }
    let omega = PI * ((m * m + n * n) as f64).sqrt();
    let fields = Fields::SquareCavity { m: m as f64, n: n as f64, omega };
    Ok(ProblemSpec {
        name: "square_cavity".into(),
        x_range: (-0.75, 0.75),
        y_range: (-0.75, 0.75),
        boundary: EmbeddedBoundary::single(BoundaryCurve::new(
            Shape::Square { center: Point::new(0.0, 0.0), side: 1.0 },
            Orientation::PlusInside,
        )?),
        eps: 1.0,
        mu: 1.0,
        t_final: 0.5,
        dt_ratio: 0.5,
        beta: 7.0,
        exact: Some(fields.clone()),
        initial: fields,
        inhomogeneous_boundary: false,
        init_mode: InitMode::AnalyticHistory,
        period: Some(2.0 * PI / omega),
    })
}

pub const CONCENTRIC_ALPHA: f64 = 1.76368380110927;
pub const CONCENTRIC_OMEGA: f64 = 9.813695999428405;

pub fn concentric_cylinders() -> Result<ProblemSpec> {
    let fields = Fields::ConcentricCylinders { alpha: CONCENTRIC_ALPHA, omega: CONCENTRIC_OMEGA };
    Ok(ProblemSpec {
        name: "concentric_cylinders".into(),
        x_range: (-1.25, 1.25),
        y_range: (-1.25, 1.25),
        boundary: EmbeddedBoundary::annulus(Point::new(0.0, 0.0), 1.0 / 3.0, 1.0)?,
        eps: 0.5,
        mu: 0.5,
        t_final: 0.75,
        dt_ratio: 0.25,
        beta: 7.0,
        exact: Some(fields.clone()),
        initial: fields,
        inhomogeneous_boundary: false,
        init_mode: InitMode::AnalyticHistory,
        period: Some(2.0 * PI / CONCENTRIC_OMEGA),
    })
}

/// Star obstacles used by the manufactured and scattering problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Obstacle {
    Circle,
    FiveStar,
    ThreeStar,
}

impl Obstacle {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(Obstacle::Circle),
            "star5" | "5star" | "five_star" => Ok(Obstacle::FiveStar),
            "star3" | "3star" | "three_star" => Ok(Obstacle::ThreeStar),
            _ => Err(Error::Config(format!("unknown obstacle '{s}' (circle, star5, star3)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Obstacle::Circle => "circle",
            Obstacle::FiveStar => "star5",
            Obstacle::ThreeStar => "star3",
        }
    }

    /// The obstacle centered at `c` with `Ω+` outside.
    pub fn curve(self, c: Point) -> Result<BoundaryCurve> {
        let shape = match self {
            Obstacle::Circle => Shape::Circle { center: c, radius: 0.25 },
            Obstacle::FiveStar => {
                Shape::StarPolygon { center: c, points: 5, r_outer: 0.45, r_inner: 0.25, phase: PI / 2.0 }
            }
            Obstacle::ThreeStar => {
                Shape::StarPolygon { center: c, points: 3, r_outer: 0.45, r_inner: 0.2, phase: PI / 2.0 }
            }
        };
        BoundaryCurve::new(shape, Orientation::PlusOutside)
    }
}

/// Manufactured solution outside a star-shaped `Ω-` centered in `[-1, 1]^2`.
pub fn manufactured(obstacle: Obstacle) -> Result<ProblemSpec> {
    Ok(ProblemSpec {
        name: format!("manufactured_{}", obstacle.name()),
        x_range: (-1.0, 1.0),
        y_range: (-1.0, 1.0),
        boundary: EmbeddedBoundary::single(obstacle.curve(Point::new(0.0, 0.0))?),
        eps: 1.0,
        mu: 2.0,
        t_final: 1.0,
        dt_ratio: 0.5,
        beta: 7.0,
        exact: Some(Fields::Manufactured),
        initial: Fields::Manufactured,
        inhomogeneous_boundary: true,
        init_mode: InitMode::AnalyticHistory,
        period: Some(1.0),
    })
}

pub const PULSE_SIGMA: f64 = 0.1;
pub const PULSE_GAMMA: f64 = -0.3;

/// Pulsed plane wave hitting a PEC obstacle centered at `(0.25, 0.5)`.
pub fn pulsed_wave_scattering(obstacle: Obstacle) -> Result<ProblemSpec> {
    Ok(ProblemSpec {
        name: format!("scattering_{}", obstacle.name()),
        x_range: (-1.0, 1.5),
        y_range: (-0.75, 1.75),
        boundary: EmbeddedBoundary::single(obstacle.curve(Point::new(0.25, 0.5))?),
        eps: 1.0,
        mu: 1.0,
        t_final: 1.5,
        dt_ratio: 0.5,
        beta: if obstacle == Obstacle::Circle { 6.0 } else { 7.0 },
        exact: None,
        initial: Fields::Pulse { sigma: PULSE_SIGMA, gamma: PULSE_GAMMA },
        inhomogeneous_boundary: false,
        init_mode: InitMode::PulseHistory,
        period: None,
    })
}

/// Problem with no boundary and zero fields (pipeline sanity checks).
pub fn zero_problem() -> ProblemSpec {
    ProblemSpec {
        name: "zero".into(),
        x_range: (-0.5, 0.5),
        y_range: (-0.5, 0.5),
        boundary: EmbeddedBoundary::empty(),
        eps: 1.0,
        mu: 1.0,
        t_final: 0.1,
        dt_ratio: 0.5,
        beta: 7.0,
        exact: Some(Fields::Zero),
        initial: Fields::Zero,
        inhomogeneous_boundary: false,
        init_mode: InitMode::AnalyticHistory,
        period: Some(1.0),
    }
}

/// Catalog lookup: `circular_cavity`, `square_cavity`, `concentric_cylinders`,
/// `manufactured_star5`, `manufactured_star3`, `scattering_circle`,
/// `scattering_star5`, `scattering_star3`, `zero`.
pub fn by_name(name: &str) -> Result<ProblemSpec> {
    match name {
        "circular_cavity" => circular_cavity(6, 2),
        "square_cavity" => square_cavity(4, 4),
        "concentric_cylinders" => concentric_cylinders(),
        "zero" => Ok(zero_problem()),
        _ => {
            if let Some(rest) = name.strip_prefix("manufactured_") {
                manufactured(Obstacle::parse(rest)?)
            } else if let Some(rest) = name.strip_prefix("scattering_") {
                pulsed_wave_scattering(Obstacle::parse(rest)?)
            } else {
                Err(Error::Config(format!("unknown problem '{name}'")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// TMz residuals by 6th-order central differences of the formulas.
    fn residuals(f: &Fields, eps: f64, mu: f64, p: Point, t: f64) -> [f64; 3] {
        let d = 1e-3;
        let dd = |g: &dyn Fn(f64) -> f64| {
            (-g(-3.0 * d) + 9.0 * g(-2.0 * d) - 45.0 * g(-d) + 45.0 * g(d) - 9.0 * g(2.0 * d) + g(3.0 * d)) / (60.0 * d)
        };
        let dt = |fam| dd(&|s| f.eval(fam, p, t + s));
        let dx = |fam| dd(&|s| f.eval(fam, Point::new(p.x + s, p.y), t));
        let dy = |fam| dd(&|s| f.eval(fam, Point::new(p.x, p.y + s), t));
        [
            mu * dt(Family::Hx) + dy(Family::Ez),
            mu * dt(Family::Hy) - dx(Family::Ez),
            eps * dt(Family::Ez) - (dx(Family::Hy) - dy(Family::Hx)),
        ]
    }

    fn check_pde(p: &ProblemSpec) {
        let f = p.exact.as_ref().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut n = 0;
        while n < 100 {
            let x = Point::new(rng.gen_range(p.x_range.0..p.x_range.1), rng.gen_range(p.y_range.0..p.y_range.1));
            // keep the difference stencil inside Ω+
            let ok = [(-0.003, 0.0), (0.003, 0.0), (0.0, -0.003), (0.0, 0.003)]
                .iter()
                .all(|&(a, b)| p.boundary.classify(Point::new(x.x + a, x.y + b)) == Region::Plus);
            if !ok {
                continue;
            }
            n += 1;
            let t = rng.gen_range(0.0..1.0);
            for r in residuals(f, p.eps, p.mu, x, t) {
                assert!(r.abs() <= 1e-8, "{}: residual {r:e} at {x:?}, t={t}", p.name);
            }
        }
    }

    #[test]
    fn exact_fields_solve_tmz() {
        check_pde(&circular_cavity(6, 2).unwrap());
        check_pde(&square_cavity(4, 4).unwrap());
        check_pde(&concentric_cylinders().unwrap());
        check_pde(&manufactured(Obstacle::FiveStar).unwrap());
        let pulse = Fields::Pulse { sigma: PULSE_SIGMA, gamma: PULSE_GAMMA };
        for k in 0..20 {
            let r = residuals(&pulse, 1.0, 1.0, Point::new(-0.5 + 0.05 * k as f64, 0.3), 0.1);
            assert!(r.iter().all(|v| v.abs() < 1e-6 * 2.0 / (PULSE_SIGMA * PULSE_SIGMA)));
        }
    }

    #[test]
    fn pec_walls_have_zero_tangential_e_and_normal_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in [circular_cavity(6, 2).unwrap(), square_cavity(4, 4).unwrap(), concentric_cylinders().unwrap()] {
            let f = p.exact.as_ref().unwrap();
            for c in &p.boundary.curves {
                let (sa, sb) = c.param_range();
                for _ in 0..100 {
                    let s = rng.gen_range(sa..sb);
                    let x = c.eval_point(s).unwrap();
                    let n = c.unit_normal(s);
                    let t = rng.gen_range(0.0..1.0);
                    assert!(f.eval(Family::Ez, x, t).abs() <= 1e-9, "{} Ez at {x:?}", p.name);
                    let hn = n.x * f.eval(Family::Hx, x, t) + n.y * f.eval(Family::Hy, x, t);
                    assert!(hn.abs() <= 1e-9, "{} n.H at {x:?}", p.name);
                    assert_eq!(p.boundary_data(x, n, t), (0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn catalog_examples() {
        let cc = circular_cavity(6, 2).unwrap();
        let f = cc.exact.clone().unwrap();
        assert!((cc.period.unwrap() - 2.0 * PI / 13.589290170541217).abs() < 1e-12);
        for k in 0..16 {
            let a = k as f64 * 0.4;
            let x = Point::new(a.cos(), a.sin());
            assert!(f.eval(Family::Ez, x, 0.0).abs() < 1e-12);
            assert_eq!(f.eval(Family::Hx, x * 0.5, 0.0), 0.0);
            assert_eq!(f.eval(Family::Hy, x * 0.5, 0.0), 0.0);
        }
        let sq = square_cavity(4, 4).unwrap();
        let Some(Fields::SquareCavity { omega, .. }) = sq.exact else { panic!() };
        assert!((omega - PI * 32f64.sqrt()).abs() < 1e-14);
        assert!(sq.exact.as_ref().unwrap().eval(Family::Ez, Point::new(0.5, 0.3), 0.2).abs() < 1e-14);
        let z = 0.5 * CONCENTRIC_OMEGA;
        assert!((bessel_j(1, z) + CONCENTRIC_ALPHA * bessel_y(1, z).unwrap()).abs() < 1e-10);
        let z = CONCENTRIC_OMEGA / 6.0;
        assert!((bessel_j(1, z) + CONCENTRIC_ALPHA * bessel_y(1, z).unwrap()).abs() < 1e-10);
        assert!(circular_cavity(0, 1).is_err());
        assert!(by_name("nope").is_err());
        assert_eq!(by_name("scattering_star5").unwrap().beta, 7.0);
        assert_eq!(by_name("scattering_circle").unwrap().beta, 6.0);
    }

    #[test]
    fn manufactured_data() {
        let p = manufactured(Obstacle::ThreeStar).unwrap();
        let f = Fields::Manufactured;
        let q = Point::new(0.13, -0.41);
        assert_eq!(f.eval(Family::Hx, q, 0.0), 0.0);
        assert_eq!(f.eval(Family::Ez, q, 0.0), (2.0 * PI * 0.13).sin() * (2.0 * PI * -0.41).cos());
        let c = &p.boundary.curves[0];
        let mut nonzero = 0;
        for k in 0..50 {
            let s = k as f64 / 50.0;
            let (x, n) = (c.eval_point(s).unwrap(), c.unit_normal(s));
            let t = 0.37;
            let (a, b) = p.boundary_data_ab(x, n, t);
            let e = f.eval(Family::Ez, x, t);
            assert_eq!(a, Point::new(n.y * e, -n.x * e));
            assert_eq!(b, 2.0 * (n.x * f.eval(Family::Hx, x, t) + n.y * f.eval(Family::Hy, x, t)));
            if a.norm() > 1e-3 || b.abs() > 1e-3 {
                nonzero += 1;
            }
        }
        assert!(nonzero > 25);
    }

    #[test]
    fn pulse_is_quiet_near_obstacle_at_start() {
        let f = Fields::Pulse { sigma: PULSE_SIGMA, gamma: PULSE_GAMMA };
        let q = Point::new(0.0, 0.5);
        assert_eq!(f.eval(Family::Hy, q, 0.0), -f.eval(Family::Ez, q, 0.0));
        let peak = f.eval(Family::Ez, Point::new(PULSE_GAMMA + PULSE_SIGMA / 2f64.sqrt(), 0.0), 0.0);
        assert!(f.eval(Family::Ez, q, 0.0).abs() <= 2e-3 * peak.abs());
        // zero crossing of the derivative-of-Gaussian profile sits at x = γ
        assert_eq!(f.eval(Family::Ez, Point::new(PULSE_GAMMA, 0.0), 0.0), 0.0);
    }
}
