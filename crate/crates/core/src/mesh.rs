//! Bakhvalov-type layer-adapted meshes on [0, 1].
//!
//! Inside the layer the nodes crowd together at distances of order `eps`, so
//! `1 - x_j` and the widths `h_j` are computed directly from logarithms
//! (`ln_1p`) instead of by subtracting nearby abscissae.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("N must be even and at least 4 (got {0})")]
    BadElementCount(usize),
    #[error("transition point tau = {tau} < 1/2: eps too large for sigma and alpha")]
    TransitionTooSmall { tau: f64 },
    #[error("invalid mesh parameter: {0}")]
    InvalidParameter(String),
    #[error("mesh points must be finite and strictly increasing")]
    NotIncreasing,
    #[error("csv output failed: {0}")]
    Io(String),
}

/// Parameters of the Bakhvalov-type generating function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshConfig {
    pub n: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub epsilon: f64,
}

impl MeshConfig {
    pub fn new(n: usize, sigma: f64, alpha: f64, epsilon: f64) -> Self {
        Self { n, sigma, alpha, epsilon }
    }

    /// `sigma * eps / alpha`, the length scale of the fine region.
    pub fn layer_scale(&self) -> f64 {
        self.sigma * self.epsilon / self.alpha
    }

    /// Transition point `tau = 1 + (sigma eps / alpha) ln eps`.
    pub fn tau(&self) -> f64 {
        1.0 + self.layer_scale() * self.epsilon.ln()
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.n < 4 || !self.n.is_multiple_of(2) {
            return Err(MeshError::BadElementCount(self.n));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(MeshError::InvalidParameter(format!("eps = {} not in (0, 1)", self.epsilon)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(MeshError::InvalidParameter(format!("sigma = {}", self.sigma)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(MeshError::InvalidParameter(format!("alpha = {}", self.alpha)));
        }
        let tau = self.tau();
        if tau < 0.5 {
            return Err(MeshError::TransitionTooSmall { tau });
        }
        Ok(())
    }

    /// The generating function `psi(t)` for `t` in [0, 1].
    pub fn psi(&self, t: f64) -> f64 {
        if t < 0.5 {
            2.0 * self.tau() * t
        } else {
            1.0 + self.layer_scale() * (-2.0 * (1.0 - self.epsilon) * (1.0 - t)).ln_1p()
        }
    }
}

/// A physical point carried together with its distance to the right end of
/// the domain, which stays accurate where `x` itself has run out of digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coord {
    pub x: f64,
    pub to_right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Transition {
    index: usize,
    tau: f64,
}

/// A partition `x_0 < x_1 < ... < x_N`; element `e` (0-based) is
/// `[x_e, x_{e+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    points: Vec<f64>,
    to_right: Vec<f64>,
    widths: Vec<f64>,
    transition: Option<Transition>,
}

impl Mesh {
    /// Builds a general mesh from its nodes.
    pub fn from_points(points: Vec<f64>) -> Result<Self, MeshError> {
        if points.len() < 2 || points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MeshError::NotIncreasing);
        }
        let end = *points.last().unwrap();
        let to_right = points.iter().map(|p| end - p).collect();
        let widths = points.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { points, to_right, widths, transition: None })
    }

    pub fn uniform(n: usize) -> Self {
        let mut pts: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        pts[n] = 1.0;
        Self::from_points(pts).expect("uniform mesh is increasing")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `h_e` for each element, 0-based.
    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn width(&self, element: usize) -> f64 {
        self.widths[element]
    }

    /// Distance from node `j` to the right end of the domain.
    pub fn node_to_right(&self, j: usize) -> f64 {
        self.to_right[j]
    }

    pub fn node(&self, j: usize) -> Coord {
        Coord { x: self.points[j], to_right: self.to_right[j] }
    }

    pub fn elements(&self) -> usize {
        self.widths.len()
    }

    /// Node index `N/2` of a layer mesh.
    pub fn transition_index(&self) -> Option<usize> {
        self.transition.map(|t| t.index)
    }

    pub fn tau(&self) -> Option<f64> {
        self.transition.map(|t| t.tau)
    }

    /// Maps reference coordinate `t` in [-1, 1] into element `e`.
    pub fn coord(&self, e: usize, t: f64) -> Coord {
        let h = self.widths[e];
        if t <= 0.0 {
            let off = 0.5 * h * (1.0 + t);
            Coord { x: self.points[e] + off, to_right: self.to_right[e] - off }
        } else {
            let off = 0.5 * h * (1.0 - t);
            Coord { x: self.points[e + 1] - off, to_right: self.to_right[e + 1] + off }
        }
    }

    /// Writes `j, x_j, h_j` rows (`h_0` left empty).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MeshError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| MeshError::Io(e.to_string());
        w.write_record(["j", "x_j", "h_j"]).map_err(io)?;
        for (j, x) in self.points.iter().enumerate() {
            let h = if j == 0 { String::new() } else { format!("{:e}", self.widths[j - 1]) };
            w.write_record([j.to_string(), format!("{x:e}"), h]).map_err(io)?;
        }
        w.flush().map_err(|e| MeshError::Io(e.to_string()))
    }
}

/// Builds the Bakhvalov-type mesh `x_j = psi(j / N)`.
pub fn bakhvalov_mesh(config: &MeshConfig) -> Result<Mesh, MeshError> {
    config.validate()?;
    let n = config.n;
    let half = n / 2;
    let nf = n as f64;
    let eps = config.epsilon;
    let scale = config.layer_scale();
    let tau = config.tau();
    let one_minus_tau = -scale * eps.ln();

    let mut points = Vec::with_capacity(n + 1);
    let mut to_right = Vec::with_capacity(n + 1);
    for j in 0..=n {
        if j < half {
            let t2 = 2.0 * j as f64 / nf;
            points.push(tau * t2);
            to_right.push((1.0 - t2) + t2 * one_minus_tau);
        } else if j == half {
            points.push(tau);
            to_right.push(one_minus_tau);
        } else {
            // 1 - psi(t) = -(sigma eps / alpha) ln(1 - 2 (1 - eps)(1 - t))
            let d = -scale * (-(1.0 - eps) * 2.0 * (n - j) as f64 / nf).ln_1p();
            points.push(1.0 - d);
            to_right.push(d);
        }
    }
    points[n] = 1.0;
    to_right[n] = 0.0;

    let coarse = 2.0 * tau / nf;
    let step = 2.0 * (1.0 - eps) / nf;
    let widths = (1..=n)
        .map(|j| {
            if j <= half {
                coarse
            } else {
                // s_{j-1} = 1 + 2 (1 - eps)(t_{j-1} - 1), and s_j - s_{j-1} = step
                let s_prev = eps + (1.0 - eps) * (2.0 * (j - 1) as f64 - nf) / nf;
                scale * (step / s_prev).ln_1p()
            }
        })
        .collect();

    Ok(Mesh { points, to_right, widths, transition: Some(Transition { index: half, tau }) })
}

/// One inequality from the mesh-width lemma.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshLemmaReport {
    pub checks: Vec<LemmaCheck>,
    /// False when `eps > 1/N`; the inequalities are only claimed under that assumption.
    pub assumption_holds: bool,
}

impl MeshLemmaReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LemmaCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }
}

// Round-off allowance on the constant-free width inequalities.
const LEMMA_SLACK: f64 = 1e-12;

fn within(lo: f64, v: f64, hi: f64) -> bool {
    v >= lo * (1.0 - LEMMA_SLACK) && v <= hi * (1.0 + LEMMA_SLACK)
}

/// Evaluates the concrete width/position inequalities of the mesh lemma.
pub fn check_mesh_lemma(mesh: &Mesh, config: &MeshConfig) -> MeshLemmaReport {
    let n = mesh.elements();
    let nf = n as f64;
    let half = n / 2;
    let eps = config.epsilon;
    let (sigma, alpha) = (config.sigma, config.alpha);
    // 1-based h_j
    let h = |j: usize| mesh.width(j - 1);
    let mut checks = Vec::new();

    let pts = mesh.points();
    checks.push(LemmaCheck {
        name: "endpoints",
        holds: pts[0] == 0.0 && pts[n] == 1.0 && pts.windows(2).all(|w| w[0] < w[1]),
        detail: format!("x_0 = {}, x_N = {}", pts[0], pts[n]),
    });

    let tau = config.tau();
    let tau_err = (pts[half] - tau).abs();
    checks.push(LemmaCheck {
        name: "transition x_{N/2} = tau",
        holds: tau_err <= 1e-14,
        detail: format!("|x_(N/2) - tau| = {tau_err:e}"),
    });

    let monotone = n >= 4 && (half + 2..n).all(|j| h(j) * (1.0 + LEMMA_SLACK) >= h(j + 1));
    checks.push(LemmaCheck {
        name: "fine widths nonincreasing",
        holds: monotone,
        detail: format!("h_(N/2+2) = {:e}, h_N = {:e}", h((half + 2).min(n)), h(n)),
    });

    if half + 2 <= n {
        let v = h(half + 2);
        let (lo, hi) = (sigma * eps / (4.0 * alpha), sigma * eps / alpha);
        checks.push(LemmaCheck {
            name: "h_(N/2+2) in [sigma eps/(4 alpha), sigma eps/alpha]",
            holds: within(lo, v, hi),
            detail: format!("{lo:e} <= {v:e} <= {hi:e}"),
        });
    }

    let v = h(half + 1);
    let (lo, hi) = (sigma * eps / (2.0 * alpha), 2.0 * sigma / (alpha * nf));
    checks.push(LemmaCheck {
        name: "h_(N/2+1) in [sigma eps/(2 alpha), 2 sigma/(alpha N)]",
        holds: within(lo, v, hi),
        detail: format!("{lo:e} <= {v:e} <= {hi:e}"),
    });

    let bad: Vec<usize> = (1..=half).filter(|&j| !within(1.0 / nf, h(j), 2.0 / nf)).collect();
    checks.push(LemmaCheck {
        name: "coarse widths in [1/N, 2/N]",
        holds: bad.is_empty(),
        detail: if bad.is_empty() { format!("h_1 = {:e}", h(1)) } else { format!("violated at j = {bad:?}") },
    });

    MeshLemmaReport { checks, assumption_holds: eps <= 1.0 / nf }
}
