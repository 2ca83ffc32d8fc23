//! Shared branch dynamics of the four circle flows.
//!
//! Every flow is generated by the field X(s) = kappa (s - p) beta((s - p)/rho)
//! with beta(w) = exp(1 - 1/(1 - w^2)) on |w| < 1 and 0 outside. The field is
//! odd around p, so both halves of the support evolve by the single scalar
//! equation du/dt = kappa u beta(u) in the normalized coordinate u = |s - p|/rho.
//! That equation is solved once and for all through its time potential
//!
//! ```text
//! G(u) = int_{1/2}^{u} du' / (u' beta(u'))
//! ```
//!
//! which satisfies G(u(t)) = G(u(0)) + kappa t along orbits. Time-t maps are
//! then G-shifts followed by inversion, the group law holds to table accuracy
//! for arbitrary t, and the spatial derivative of the time-t map has the
//! closed form X(phi_t(s)) / X(s); no per-call integration happens at all.
//! This is what keeps million-point derivative sweeps with |t| in the
//! hundreds affordable, while a fourth-order integrator with a 1e-12
//! per-step budget serves as the independent cross-check (see `ode`).
//!
//! The potential is represented in three zones:
//! - u < 1e-3: G(u) = ln(2u) + H0 + u^2/2 + 3 u^4/8, with H0 computed once by
//!   quadrature; the omitted O(u^6) term is below 1e-18 there. The log form
//!   keeps relative accuracy for orbits exponentially close to the fixed
//!   point.
//! - core: cubic Hermite interpolation of G through nodes that are
//!   log-uniform in u up to 1/2 and uniform in W = 1/(1 - u^2) beyond, with
//!   exact node derivatives G'(u) = 1/(u beta(u)) and node values accumulated
//!   by adaptive Simpson quadrature.
//! - u above the last node (W > 45, within ~7e-4 rho of the support edge):
//!   the field is below 1e-20 there, so points are treated as frozen; the
//!   error of that truncation is far below one ulp of the circle coordinate
//!   for every time this crate can request.

/// Normalized bump profile beta(u) = exp(1 - 1/(1 - u^2)) for |u| < 1.
pub fn beta(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let one_minus = (1.0 - u) * (1.0 + u);
    (1.0 - 1.0 / one_minus).exp()
}

/// d beta / du.
pub fn beta_prime(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let one_minus = (1.0 - u) * (1.0 + u);
    beta(u) * (-2.0 * u / (one_minus * one_minus))
}

/// beta(u) + u beta'(u), the u-derivative of u beta(u). Multiplied by kappa
/// this is the spatial derivative of the field at |s - p| = rho u.
pub fn field_slope_factor(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let one_minus = (1.0 - u) * (1.0 + u);
    beta(u) * (1.0 - 2.0 * u * u / (one_minus * one_minus))
}

/// Left edge of the tabulated core zone.
const U_LEFT: f64 = 1e-3;
/// Nodes below u = 1/2, log-uniform in u.
const NODES_LOG: usize = 1600;
/// Nodes above u = 1/2, uniform in W = 1/(1 - u^2) up to W_HI.
const NODES_W: usize = 9900;
const W_LO: f64 = 4.0 / 3.0;
const W_HI: f64 = 45.0;

/// Orbit position on a branch: the normalized coordinate and its logarithm.
/// The logarithm stays finite (and meaningful for derivative accounting)
/// even when u itself underflows next to the fixed point.
#[derive(Debug, Clone, Copy)]
pub struct BranchPoint {
    pub u: f64,
    pub ln_u: f64,
}

/// Tabulated time potential for the normalized branch equation
/// du/dt = kappa u beta(u). Shared by all four flows and both branch signs.
#[derive(Debug)]
pub struct RadialProfile {
    /// H(0) in G(u) = ln(2u) + H(u); fixes the left-zone closed form.
    h0: f64,
    u_nodes: Vec<f64>,
    g_nodes: Vec<f64>,
    /// Exact derivatives G'(u) at the nodes.
    d_nodes: Vec<f64>,
    /// sup_u |beta + u beta'| over [0, 1]; kappa times this bounds |X'|.
    slope_factor_sup: f64,
}

impl RadialProfile {
    pub fn build() -> Self {
        // H0 = -int_0^{1/2} (1 - beta)/(u beta) du. The integrand extends
        // continuously by 0 at u = 0; the series guard below 1e-4 avoids the
        // 0/0 evaluation.
        let h_integrand = |u: f64| {
            if u < 1e-4 {
                u + 1.5 * u * u * u
            } else {
                (1.0 - beta(u)) / (u * beta(u))
            }
        };
        let h0 = -simpson_adaptive(&h_integrand, 0.0, 0.5);

        let mut u_nodes = Vec::with_capacity(NODES_LOG + NODES_W + 1);
        let log_step = (0.5f64 / U_LEFT).ln() / NODES_LOG as f64;
        for j in 0..=NODES_LOG {
            u_nodes.push(U_LEFT * (j as f64 * log_step).exp());
        }
        let w_step = (W_HI - W_LO) / NODES_W as f64;
        for j in 1..=NODES_W {
            let w = W_LO + j as f64 * w_step;
            u_nodes.push((1.0 - 1.0 / w).sqrt());
        }

        let g_integrand = |u: f64| 1.0 / (u * beta(u));
        let mut g_nodes = Vec::with_capacity(u_nodes.len());
        let mut acc = left_zone_g(h0, U_LEFT);
        let mut comp = 0.0f64; // Kahan compensation for the long cumulative sum
        g_nodes.push(acc);
        for j in 1..u_nodes.len() {
            let panel = simpson_adaptive(&g_integrand, u_nodes[j - 1], u_nodes[j]);
            let y = panel - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
            g_nodes.push(acc);
        }
        let d_nodes: Vec<f64> = u_nodes.iter().map(|&u| g_integrand(u)).collect();

        let slope_factor_sup = (0..=200_000)
            .map(|k| field_slope_factor(k as f64 / 200_000.0).abs())
            .fold(0.0, f64::max);

        RadialProfile { h0, u_nodes, g_nodes, d_nodes, slope_factor_sup }
    }

    pub fn slope_factor_sup(&self) -> f64 {
        self.slope_factor_sup
    }

    /// Largest tabulated u; points beyond it sit in the frozen shell at the
    /// support edge.
    pub fn u_ceiling(&self) -> f64 {
        *self.u_nodes.last().unwrap()
    }

    /// Time potential G(u) for u in (0, u_ceiling].
    pub fn g_of_u(&self, u: f64) -> f64 {
        assert!(u > 0.0 && u <= self.u_ceiling() + 1e-12, "u = {u} outside profile domain");
        if u < U_LEFT {
            return left_zone_g(self.h0, u);
        }
        let j = self.node_index(u);
        hermite(
            u,
            self.u_nodes[j],
            self.u_nodes[j + 1],
            self.g_nodes[j],
            self.g_nodes[j + 1],
            self.d_nodes[j],
            self.d_nodes[j + 1],
        )
        .0
    }

    /// Inverse of the tabulated potential. Inverting the same interpolant
    /// that `g_of_u` evaluates is what makes flow(t) after flow(-t) cancel
    /// to rounding error.
    pub fn u_of_g(&self, y: f64) -> BranchPoint {
        if y < self.g_nodes[0] {
            return invert_left_zone(self.h0, y);
        }
        let last = self.g_nodes.len() - 1;
        if y >= self.g_nodes[last] {
            let u = self.u_nodes[last];
            return BranchPoint { u, ln_u: u.ln() };
        }
        let hi = self.g_nodes.partition_point(|&g| g < y).max(1);
        let (j, k) = (hi - 1, hi);
        let (ua, ub) = (self.u_nodes[j], self.u_nodes[k]);
        let (ga, gb) = (self.g_nodes[j], self.g_nodes[k]);
        let (da, db) = (self.d_nodes[j], self.d_nodes[k]);
        // Safeguarded Newton on the Hermite cubic within [ua, ub].
        let mut lo = ua;
        let mut hi_b = ub;
        let mut u = ua + (ub - ua) * ((y - ga) / (gb - ga)).clamp(0.0, 1.0);
        for _ in 0..60 {
            let (g, dg) = hermite(u, ua, ub, ga, gb, da, db);
            let err = g - y;
            if err > 0.0 {
                hi_b = u;
            } else {
                lo = u;
            }
            let step = if dg > 0.0 { err / dg } else { 0.0 };
            let mut next = u - step;
            if !(lo..=hi_b).contains(&next) || step == 0.0 {
                next = 0.5 * (lo + hi_b);
            }
            if (next - u).abs() <= 1e-16 * u.abs() + 1e-300 {
                u = next;
                break;
            }
            u = next;
        }
        BranchPoint { u, ln_u: u.ln() }
    }

    /// Time-t image of the branch point at normalized coordinate u0, for the
    /// time measured in potential units (kappa * t).
    pub fn advance(&self, u0: f64, kappa_t: f64) -> BranchPoint {
        let y = self.g_of_u(u0) + kappa_t;
        self.u_of_g(y)
    }

    fn node_index(&self, u: f64) -> usize {
        let log_step = (0.5f64 / U_LEFT).ln() / NODES_LOG as f64;
        let raw = if u <= 0.5 {
            ((u / U_LEFT).ln() / log_step).floor() as isize
        } else {
            let w = 1.0 / ((1.0 - u) * (1.0 + u));
            let w_step = (W_HI - W_LO) / NODES_W as f64;
            NODES_LOG as isize + ((w - W_LO) / w_step).floor() as isize
        };
        let j = raw.clamp(0, (self.u_nodes.len() - 2) as isize) as usize;
        // Float rounding at zone boundaries can land one interval off.
        if u < self.u_nodes[j] {
            j - 1
        } else if u > self.u_nodes[j + 1] {
            j + 1
        } else {
            j
        }
    }
}

fn left_zone_g(h0: f64, u: f64) -> f64 {
    (2.0 * u).ln() + h0 + 0.5 * u * u + 0.375 * u.powi(4)
}

fn invert_left_zone(h0: f64, y: f64) -> BranchPoint {
    // Solve z + corr(e^z / 2) = y - h0 for z = ln(2u); the correction is at
    // most 5e-7 in this zone, so three fixed-point sweeps reach roundoff.
    let target = y - h0;
    let mut z = target;
    for _ in 0..3 {
        let u = 0.5 * z.exp();
        z = target - (0.5 * u * u + 0.375 * u.powi(4));
    }
    let ln_u = z - std::f64::consts::LN_2;
    BranchPoint { u: ln_u.exp(), ln_u }
}

/// Cubic Hermite value and derivative on [ua, ub].
#[allow(clippy::too_many_arguments)]
fn hermite(u: f64, ua: f64, ub: f64, ga: f64, gb: f64, da: f64, db: f64) -> (f64, f64) {
    let h = ub - ua;
    let t = (u - ua) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let v = ga * (2.0 * t3 - 3.0 * t2 + 1.0)
        + gb * (-2.0 * t3 + 3.0 * t2)
        + h * (da * (t3 - 2.0 * t2 + t) + db * (t3 - t2));
    let dv_dt = ga * (6.0 * t2 - 6.0 * t)
        + gb * (-6.0 * t2 + 6.0 * t)
        + h * (da * (3.0 * t2 - 4.0 * t + 1.0) + db * (3.0 * t2 - 2.0 * t));
    (v, dv_dt / h)
}

/// Adaptive Simpson quadrature; the tolerance is relative to the panel
/// magnitude, aimed at full double precision on the smooth integrands here.
fn simpson_adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    let tol = 1e-15 * whole.abs().max((b - a) * fm.abs()) + 1e-305;
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 40)
}
