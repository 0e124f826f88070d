//! Fixed-step RK4 integration of the continuous-time models of learning rules.

use std::collections::BTreeMap;
use std::fmt;

use crate::closedform::GradNormHistory;
use crate::error::{Error, Result};
use crate::geometry::{BregmanSchedule, Metric, Vector};
use crate::losses::Loss;

/// Relative tolerance for grid uniformity.
const GRID_TOL: f64 = 1e-12;

/// A uniformly sampled solution: positions, velocities and named observables.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub q: Vec<Vector>,
    pub qdot: Vec<Vector>,
    pub channels: BTreeMap<String, Vec<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, q: Vec<Vector>, qdot: Vec<Vector>) -> Result<Self> {
        if times.len() != q.len() || times.len() != qdot.len() {
            return Err(Error::Grid("times, q and qdot must have equal length".into()));
        }
        check_uniform(&times)?;
        Ok(Trajectory {
            times,
            q,
            qdot,
            channels: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn step(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::Grid("a single sample has no step".into()));
        }
        Ok(self.times[1] - self.times[0])
    }

    pub fn add_channel(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.times.len() {
            return Err(Error::Grid(format!(
                "channel {name} has {} samples, grid has {}",
                values.len(),
                self.times.len()
            )));
        }
        self.channels.insert(name.to_string(), values);
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.get(name).map(Vec::as_slice)
    }

    pub fn last_q(&self) -> &Vector {
        self.q.last().expect("trajectory is never empty")
    }
}

pub(crate) fn check_uniform(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Ok(());
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::Grid("time grid must be increasing".into()));
    }
    for (i, w) in times.windows(2).enumerate() {
        let expected = times[0] + (i + 1) as f64 * dt;
        if (w[1] - expected).abs() > GRID_TOL * (1.0 + expected.abs()) {
            return Err(Error::Grid(format!("non-uniform grid at sample {}", i + 1)));
        }
    }
    Ok(())
}

/// A first-order system `y' = F(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn derivative(&self, t: f64, y: &Vector) -> Result<Vector>;

    /// Hook applied after each accepted step (constraint projection).
    fn project(&self, _y: &mut Vector) {}
}

/// Classical RK4 on the grid `t0 + i dt`, `i = 0..=round((t1 - t0) / dt)`.
pub fn solve_rk4<S: OdeSystem + ?Sized>(
    system: &S,
    y0: Vector,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<(Vec<f64>, Vec<Vector>)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {dt}")));
    }
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("need t0 < t1, got [{t0}, {t1}]")));
    }
    if y0.len() != system.dim() {
        return Err(Error::InvalidArgument("initial state has wrong dimension".into()));
    }
    let steps = ((t1 - t0) / dt).round().max(1.0) as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut y = y0;
    system.project(&mut y);
    times.push(t0);
    states.push(y.clone());
    for i in 0..steps {
        let t = t0 + i as f64 * dt;
        let eval = |tt: f64, yy: &Vector| system.derivative(tt, yy).map_err(|e| e.at_time(tt));
        let k1 = eval(t, &y)?;
        let k2 = eval(t + 0.5 * dt, &(&y + &k1 * (0.5 * dt)))?;
        let k3 = eval(t + 0.5 * dt, &(&y + &k2 * (0.5 * dt)))?;
        let k4 = eval(t + dt, &(&y + &k3 * dt))?;
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        system.project(&mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singularity {
                time: t + dt,
                what: "state became non-finite".into(),
            });
        }
        times.push(t0 + (i + 1) as f64 * dt);
        states.push(y.clone());
    }
    Ok((times, states))
}

type Rhs = Box<dyn Fn(f64, &Vector, &Vector) -> Result<Vector> + Send + Sync>;

/// `q'' = rhs(t, q, q')`.
pub struct SecondOrderSystem {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    dim: Option<usize>,
    rhs: Rhs,
}

impl fmt::Debug for SecondOrderSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecondOrderSystem")
            .field("name", &self.name)
            .field("parameters", &self.parameters)
            .finish()
    }
}

impl SecondOrderSystem {
    pub fn new<F>(name: &str, parameters: &[(&str, f64)], dim: Option<usize>, rhs: F) -> Self
    where
        F: Fn(f64, &Vector, &Vector) -> Result<Vector> + Send + Sync + 'static,
    {
        SecondOrderSystem {
            name: name.to_string(),
            parameters: parameters.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            dim,
            rhs: Box::new(rhs),
        }
    }

    pub fn acceleration(&self, t: f64, q: &Vector, q_dot: &Vector) -> Result<Vector> {
        (self.rhs)(t, q, q_dot)
    }
}

struct FirstOrder<'a> {
    system: &'a SecondOrderSystem,
    dim: usize,
}

impl OdeSystem for FirstOrder<'_> {
    fn dim(&self) -> usize {
        2 * self.dim
    }

    fn derivative(&self, t: f64, y: &Vector) -> Result<Vector> {
        let d = self.dim;
        let q = y.rows(0, d).into_owned();
        let v = y.rows(d, d).into_owned();
        let a = self.system.acceleration(t, &q, &v)?;
        let mut out = Vector::zeros(2 * d);
        out.rows_mut(0, d).copy_from(&v);
        out.rows_mut(d, d).copy_from(&a);
        Ok(out)
    }
}

fn stack(parts: &[&Vector]) -> Vector {
    let n = parts.iter().map(|p| p.len()).sum();
    let mut out = Vector::zeros(n);
    let mut at = 0;
    for p in parts {
        out.rows_mut(at, p.len()).copy_from(p);
        at += p.len();
    }
    out
}

/// Integrates a second-order system from `(q0, qdot0)` at `t0`.
pub fn integrate_rk4(
    system: &SecondOrderSystem,
    q0: &Vector,
    qdot0: &Vector,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Trajectory> {
    if q0.len() != qdot0.len() {
        return Err(Error::InvalidArgument("q0 and qdot0 differ in dimension".into()));
    }
    if let Some(d) = system.dim {
        if d != q0.len() {
            return Err(Error::InvalidArgument(format!(
                "{} acts on dimension {d}, got {}",
                system.name,
                q0.len()
            )));
        }
    }
    let d = q0.len();
    let first = FirstOrder { system, dim: d };
    let (times, states) = solve_rk4(&first, stack(&[q0, qdot0]), t0, t1, dt)?;
    let q = states.iter().map(|y| y.rows(0, d).into_owned()).collect();
    let qdot = states.iter().map(|y| y.rows(d, d).into_owned()).collect();
    Trajectory::new(times, q, qdot)
}

/// Finite-learning-rate model of heavy-ball SGD with weight decay:
/// `eta (1 + beta) / 2 q'' + (1 - beta) q' + ∇f(q) + k q = 0`.
pub fn eom_modified(eta: f64, beta: f64, k: f64, loss: Loss) -> Result<SecondOrderSystem> {
    check_sgd_params(eta, beta, k)?;
    let mass = eta * (1.0 + beta) / 2.0;
    let friction = 1.0 - beta;
    let dim = loss.dim();
    Ok(SecondOrderSystem::new(
        "modified-heavy-ball",
        &[("eta", eta), ("beta", beta), ("k", k), ("m", mass), ("mu", friction)],
        dim,
        move |_, q, v| {
            let g = loss.grad(q)?;
            Ok((v * friction + g + q * k) * (-1.0 / mass))
        },
    ))
}

pub(crate) fn check_sgd_params(eta: f64, beta: f64, k: f64) -> Result<()> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {eta}")));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("momentum must lie in [0, 1), got {beta}")));
    }
    if !(k >= 0.0) {
        return Err(Error::InvalidArgument(format!("weight decay must be non-negative, got {k}")));
    }
    Ok(())
}

/// Euclidean Bregman Euler-Lagrange equation
/// `q'' + (gamma' - alpha') q' + e^{2 alpha + beta} ∇f(q) = 0`.
pub fn eom_bregman_euclidean(schedule: BregmanSchedule, loss: Loss) -> SecondOrderSystem {
    let dim = loss.dim();
    SecondOrderSystem::new("bregman-euclidean", &schedule_params(&schedule), dim, move |t, q, v| {
        let s = schedule.at(t).map_err(|e| match e {
            Error::Domain(what) => Error::Singularity { time: t, what },
            other => other,
        })?;
        let g = loss.grad(q)?;
        Ok(v * (-(s.gamma_dot - s.alpha_dot)) - g * (2.0 * s.alpha + s.beta).exp())
    })
}

/// Euler-Lagrange equation of the Bregman Lagrangian for an arbitrary metric:
/// `∇²h(y) y' = (e^alpha - gamma') Δ_h - e^{alpha+beta} ∇f(q)`, `y = q + e^{-alpha} q'`.
pub fn eom_bregman(metric: Metric, schedule: BregmanSchedule, loss: Loss) -> SecondOrderSystem {
    let dim = Some(metric.dim());
    let mut params = schedule_params(&schedule);
    params.push(("metric_dim", metric.dim() as f64));
    SecondOrderSystem::new("bregman", &params, dim, move |t, q, v| {
        let s = schedule.at(t).map_err(|e| match e {
            Error::Domain(what) => Error::Singularity { time: t, what },
            other => other,
        })?;
        let ea = s.alpha.exp();
        let delta = crate::symmetry::delta_h(&metric, q, v, s.alpha)?;
        let y = q + v / ea;
        let drive = delta * (ea - s.gamma_dot) - loss.grad(q)? * (s.alpha + s.beta).exp();
        let ydot = metric.hessian_solve(&y, &drive)?;
        Ok(ydot * ea - v * (ea - s.alpha_dot))
    })
}

fn schedule_params(schedule: &BregmanSchedule) -> Vec<(&'static str, f64)> {
    match *schedule {
        BregmanSchedule::Natural { mass, friction } => vec![("m", mass), ("mu", friction)],
        BregmanSchedule::Sgdm { eta, momentum } => vec![("eta", eta), ("beta", momentum)],
        BregmanSchedule::Nesterov { power, scale } => vec![("n", power), ("C", scale)],
    }
}

/// Series start for the Nesterov ODE, which is singular at `t = 0`:
/// `q(t0) = q0 - t0^2/8 ∇f(q0)`, `q'(t0) = -t0/4 ∇f(q0)` (exact to `O(t0^4)`, `O(t0^3)`).
pub fn nesterov_start(loss: &Loss, q0: &Vector, t0: f64) -> Result<(Vector, Vector)> {
    let g = loss.grad(q0)?;
    Ok((q0 - &g * (t0 * t0 / 8.0), &g * (-t0 / 4.0)))
}

/// Initial velocity such that the trajectory from `q0` at `t0` passes through
/// `target` at `t0 + horizon`, by Newton iteration on RK4 solutions.
pub fn shoot_initial_velocity(
    system: &SecondOrderSystem,
    q0: &Vector,
    target: &Vector,
    t0: f64,
    horizon: f64,
    substeps: usize,
    guess: &Vector,
) -> Result<Vector> {
    let dt = horizon / substeps.max(1) as f64;
    let end = |v: &Vector| -> Result<Vector> {
        Ok(integrate_rk4(system, q0, v, t0, t0 + horizon, dt)?.last_q().clone())
    };
    let d = q0.len();
    let mut v = guess.clone();
    for _ in 0..30 {
        let miss = end(&v)? - target;
        if miss.norm() <= 1e-14 * (1.0 + target.norm()) {
            return Ok(v);
        }
        let h = 1e-6 * (1.0 + v.amax());
        let mut jac = nalgebra::DMatrix::zeros(d, d);
        for j in 0..d {
            let mut vp = v.clone();
            vp[j] += h;
            let mut vm = v.clone();
            vm[j] -= h;
            let col = (end(&vp)? - end(&vm)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let step = jac
            .lu()
            .solve(&miss)
            .ok_or_else(|| Error::InvalidArgument("shooting Jacobian is singular".into()))?;
        v -= step;
    }
    Ok(v)
}

/// Polar-coordinate model of damped motion in a scale-invariant potential with weight decay:
///
/// ```text
/// m r''  + mu r'  = (m |u'|^2 - k) r
/// m u''  + mu u'  = -ĝ(u) / r^2           (u = q / |q|, tangential part)
/// ```
///
/// The unit-norm constraint is carried by the exact normal (centripetal)
/// acceleration `-|u'|^2 u` plus a projection after every step.
#[derive(Debug, Clone)]
pub struct RadialAngularSystem {
    pub mass: f64,
    pub friction: f64,
    pub wd: f64,
    loss: Loss,
    dim: usize,
    /// Keep the `-2 m (r'/r) u'` coupling that the first-order reduction drops.
    pub exact_coupling: bool,
}

impl OdeSystem for RadialAngularSystem {
    fn dim(&self) -> usize {
        2 + 2 * self.dim
    }

    fn derivative(&self, t: f64, y: &Vector) -> Result<Vector> {
        let d = self.dim;
        let (r, rdot) = (y[0], y[1]);
        if !(r > 1e-8) {
            return Err(Error::Singularity {
                time: t,
                what: format!("radius collapsed to {r:e}"),
            });
        }
        let u = y.rows(2, d).into_owned();
        let w = y.rows(2 + d, d).into_owned();
        let speed2 = w.norm_squared();
        let rddot = ((self.mass * speed2 - self.wd) * r - self.friction * rdot) / self.mass;
        let ghat = self.loss.grad(&u)?;
        let mut force = (ghat / (-r * r) - &w * self.friction) / self.mass;
        if self.exact_coupling {
            force -= &w * (2.0 * rdot / r);
        }
        let tangential = &force - &u * u.dot(&force);
        let uddot = tangential - &u * speed2;
        let mut out = Vector::zeros(self.dim());
        out[0] = rdot;
        out[1] = rddot;
        out.rows_mut(2, d).copy_from(&w);
        out.rows_mut(2 + d, d).copy_from(&uddot);
        Ok(out)
    }

    fn project(&self, y: &mut Vector) {
        let d = self.dim;
        let u = y.rows(2, d).into_owned();
        let w = y.rows(2 + d, d).into_owned();
        let w_t = &w - &u * (u.dot(&w) / u.norm_squared());
        let n = u.norm();
        y.rows_mut(2, d).copy_from(&(u / n));
        y.rows_mut(2 + d, d).copy_from(&w_t);
    }
}

/// Builds the coupled `(r, u)` system; `loss` must be scale invariant.
pub fn eom_radial_angular(mass: f64, friction: f64, wd: f64, loss: Loss, dim: usize) -> Result<RadialAngularSystem> {
    if !loss.is_scale_invariant() {
        return Err(Error::Contract(format!("{} is not scale invariant", loss.name())));
    }
    if !(mass > 0.0 && friction >= 0.0 && wd >= 0.0) {
        return Err(Error::InvalidArgument("need m > 0, mu >= 0, k >= 0".into()));
    }
    Ok(RadialAngularSystem {
        mass,
        friction,
        wd,
        loss,
        dim,
        exact_coupling: false,
    })
}

impl RadialAngularSystem {
    pub fn with_exact_coupling(mut self, exact: bool) -> Self {
        self.exact_coupling = exact;
        self
    }

    /// Integrates from `(r0, r0_dot, u0, u0_dot)` and returns the trajectory of
    /// `q = r u` with channels `r`, `r_dot`, `angular_speed`, `unit_norm_error`.
    #[allow(clippy::too_many_arguments)]
    pub fn integrate(
        &self,
        r0: f64,
        r0_dot: f64,
        u0: &Vector,
        u0_dot: &Vector,
        t0: f64,
        t1: f64,
        dt: f64,
    ) -> Result<Trajectory> {
        if !(r0 > 0.0) {
            return Err(Error::InvalidArgument("initial radius must be positive".into()));
        }
        if (u0.norm() - 1.0).abs() > 1e-10 || u0.dot(u0_dot).abs() > 1e-10 {
            return Err(Error::InvalidArgument(
                "initial direction must be a unit vector with tangent velocity".into(),
            ));
        }
        let d = self.dim;
        let y0 = stack(&[&Vector::from_row_slice(&[r0, r0_dot]), u0, u0_dot]);
        let (times, states) = solve_rk4(self, y0, t0, t1, dt)?;
        let mut q = Vec::with_capacity(states.len());
        let mut qdot = Vec::with_capacity(states.len());
        let (mut rs, mut rds, mut speed, mut unit_err) = (vec![], vec![], vec![], vec![]);
        for y in &states {
            let u = y.rows(2, d).into_owned();
            let w = y.rows(2 + d, d).into_owned();
            q.push(&u * y[0]);
            qdot.push(&u * y[1] + &w * y[0]);
            rs.push(y[0]);
            rds.push(y[1]);
            speed.push(w.norm());
            unit_err.push((u.norm() - 1.0).abs());
        }
        let mut traj = Trajectory::new(times, q, qdot)?;
        traj.add_channel("r", rs)?;
        traj.add_channel("r_dot", rds)?;
        traj.add_channel("angular_speed", speed)?;
        traj.add_channel("unit_norm_error", unit_err)?;
        Ok(traj)
    }
}

/// Radial Noether dynamics in `x = r^2` driven by a recorded `|ĝ|^2` signal:
/// `m x'' + mu x' = -2 k x + 2 m |ĝ|^2 / (mu^2 x)`.
#[derive(Debug, Clone)]
pub struct NoetherRadialSystem {
    pub mass: f64,
    pub friction: f64,
    pub wd: f64,
    gsq: GradNormHistory,
}

pub fn eom_noether_radial(mass: f64, friction: f64, wd: f64, gsq: GradNormHistory) -> Result<NoetherRadialSystem> {
    if !(mass > 0.0 && friction > 0.0 && wd >= 0.0) {
        return Err(Error::InvalidArgument("need m > 0, mu > 0, k >= 0".into()));
    }
    Ok(NoetherRadialSystem { mass, friction, wd, gsq })
}

impl OdeSystem for NoetherRadialSystem {
    fn dim(&self) -> usize {
        2
    }

    fn derivative(&self, t: f64, y: &Vector) -> Result<Vector> {
        let x = y[0];
        if !(x > 0.0) {
            return Err(Error::Singularity {
                time: t,
                what: format!("r^2 reached {x:e}"),
            });
        }
        let drive = 2.0 * self.mass * self.gsq.at(t)? / (self.friction * self.friction * x);
        let xddot = (-2.0 * self.wd * x + drive - self.friction * y[1]) / self.mass;
        Ok(Vector::from_row_slice(&[y[1], xddot]))
    }
}

impl NoetherRadialSystem {
    /// Returns a trajectory with `q = [r^2]`, `qdot = [d r^2 / dt]`.
    pub fn integrate(&self, r2_0: f64, r2_dot0: f64, t1: f64, dt: f64) -> Result<Trajectory> {
        if !(r2_0 > 0.0) {
            return Err(Error::InvalidArgument("initial r^2 must be positive".into()));
        }
        let t0 = self.gsq.times[0];
        let (times, states) = solve_rk4(self, Vector::from_row_slice(&[r2_0, r2_dot0]), t0, t1, dt)?;
        let q = states.iter().map(|y| Vector::from_element(1, y[0])).collect();
        let qdot = states.iter().map(|y| Vector::from_element(1, y[1])).collect();
        Trajectory::new(times, q, qdot)
    }
}

/// Continuous model of scalar-accumulator RMSProp:
/// `eta/2 q'' + q' = -g / sqrt(G)`, `eta G' = -(1 - rho) G + (1 - rho) |g|^2`.
#[derive(Debug, Clone)]
pub struct RmspropSystem {
    pub eta: f64,
    pub rho: f64,
    loss: Loss,
    dim: usize,
}

pub fn eom_rmsprop(eta: f64, rho: f64, loss: Loss, dim: usize) -> Result<RmspropSystem> {
    if !(eta > 0.0) || !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument("need eta > 0 and 0 < rho < 1".into()));
    }
    Ok(RmspropSystem { eta, rho, loss, dim })
}

impl OdeSystem for RmspropSystem {
    fn dim(&self) -> usize {
        2 * self.dim + 1
    }

    fn derivative(&self, t: f64, y: &Vector) -> Result<Vector> {
        let d = self.dim;
        let big_g = y[2 * d];
        if !(big_g > 0.0) {
            return Err(Error::Singularity {
                time: t,
                what: format!("accumulator G reached {big_g:e}"),
            });
        }
        let q = y.rows(0, d).into_owned();
        let v = y.rows(d, d).into_owned();
        let g = self.loss.grad(&q)?;
        let acc = (&g / (-big_g.sqrt()) - &v) * (2.0 / self.eta);
        let mut out = Vector::zeros(self.dim());
        out.rows_mut(0, d).copy_from(&v);
        out.rows_mut(d, d).copy_from(&acc);
        out[2 * d] = (1.0 - self.rho) * (g.norm_squared() - big_g) / self.eta;
        Ok(out)
    }
}

impl RmspropSystem {
    /// Trajectory of `q` with channels `G` and `gsq` (`|g|^2`).
    pub fn integrate(&self, q0: &Vector, qdot0: &Vector, g0: f64, t0: f64, t1: f64, dt: f64) -> Result<Trajectory> {
        if !(g0 > 0.0) {
            return Err(Error::InvalidArgument("initial accumulator must be positive".into()));
        }
        let d = self.dim;
        let y0 = stack(&[q0, qdot0, &Vector::from_element(1, g0)]);
        let (times, states) = solve_rk4(self, y0, t0, t1, dt)?;
        let q: Vec<Vector> = states.iter().map(|y| y.rows(0, d).into_owned()).collect();
        let qdot = states.iter().map(|y| y.rows(d, d).into_owned()).collect();
        let big_g = states.iter().map(|y| y[2 * d]).collect();
        let gsq = q
            .iter()
            .map(|x| self.loss.grad(x).map(|g| g.norm_squared()))
            .collect::<Result<Vec<_>>>()?;
        let mut traj = Trajectory::new(times, q, qdot)?;
        traj.add_channel("G", big_g)?;
        traj.add_channel("gsq", gsq)?;
        Ok(traj)
    }
}
