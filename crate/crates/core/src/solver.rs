//! Single-replicate samplers for the mild solution, its rescaled version,
//! space averages, chaos-expansion terms, and the nonlinear equation, all
//! by discretized Walsh integration, plus the deterministic variance
//! oracles the Monte Carlo estimates are verified against.
//!
//! The horizon-t mild solution is simulated on the rescaled unit-time grid
//! through the reparametrization W(t sigma, y) = sqrt(t) B(sigma, y) with B
//! a unit sheet, so one GridSpec describes every experiment:
//!
//!   u(t,x)      = sqrt(t) Sum p_{t(1-s_i)}(x - .) phi(sqrt(t) B) dB
//!   u~(t,x)     = t^{1/4} Sum p_{1-s_i}(x/sqrt(t) - .) phi(t^{3/4} B) dB
//!   u_R(t)      = sqrt(t) Sum K_{R,t}(s_i, .) phi(sqrt(t) B) dB
//!
//! with K the window-integrated kernel (a Gaussian CDF difference, no
//! x-grid). Coefficients are cell-exact RMS kernel weights (see weights).

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernels::heat_kernel_mass;
use crate::phi::PhiSpec;
use crate::quad::{adaptive_quartic_right, adaptive_sqrt_left, GL8};
use crate::rng::Stream;
use crate::sheet::SheetSample;
use crate::walsh::walsh_sum;
use crate::weights::{KernelShape, WeightTable};

/// Magnitude cap for the nonlinear field.
const FIELD_CAP: f64 = 1e6;

/// One sample of u(t,x) (or its rescaled version) with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MildSample {
    pub value: f64,
    pub t: f64,
    pub x: f64,
    pub grid: GridSpec,
    pub phi: PhiSpec,
    pub lineage: crate::rng::SeedLineage,
}

/// A prepared Walsh sampler: weight table built once, reused across
/// replicates.
#[derive(Debug, Clone)]
pub struct WalshSimulator {
    pub grid: GridSpec,
    pub phi: PhiSpec,
    table: Arc<WeightTable>,
    field_scale: f64,
    prefactor: f64,
    pub t: f64,
    pub x: f64,
}

impl WalshSimulator {
    /// u(t, x) on [0,t] x [-y_max, y_max].
    pub fn mild(phi: PhiSpec, t: f64, x: f64, grid: GridSpec) -> Result<Self> {
        check_mild_inputs(&phi, t)?;
        let table = WeightTable::cached(grid, KernelShape::Heat { time_scale: t, center: x, y_clip: None });
        Ok(Self { grid, phi, table, field_scale: t.sqrt(), prefactor: t.sqrt(), t, x })
    }

    /// The rescaled representation on the fixed unit time interval.
    pub fn rescaled(phi: PhiSpec, t: f64, x: f64, grid: GridSpec) -> Result<Self> {
        check_mild_inputs(&phi, t)?;
        let table = WeightTable::cached(
            grid,
            KernelShape::Heat { time_scale: 1.0, center: x / t.sqrt(), y_clip: None },
        );
        Ok(Self { grid, phi, table, field_scale: t.powf(0.75), prefactor: t.powf(0.25), t, x })
    }

    /// Space average over [-R, R] with the window-integrated kernel.
    pub fn space_average(phi: PhiSpec, t: f64, radius: f64, grid: GridSpec) -> Result<Self> {
        check_mild_inputs(&phi, t)?;
        if !(radius > 0.0) {
            return Err(Error::Precondition(format!("radius must be positive, got {radius}")));
        }
        let table =
            WeightTable::cached(grid, KernelShape::Window { half_width: radius, time_scale: t });
        Ok(Self { grid, phi, table, field_scale: t.sqrt(), prefactor: t.sqrt(), t, x: 0.0 })
    }

    /// Draw a fresh sheet from the stream and integrate.
    pub fn sample(&self, stream: &mut Stream) -> f64 {
        let sheet = SheetSample::draw(self.grid, &mut stream.rng, stream.lineage);
        self.sample_on(&sheet, &mut stream.rng)
    }

    /// Integrate over an existing sheet (stratification draws come from `rng`).
    pub fn sample_on(&self, sheet: &SheetSample, rng: &mut ChaCha8Rng) -> f64 {
        walsh_sum(sheet, &self.table, &self.phi, self.field_scale, self.prefactor, rng)
    }
}

fn check_mild_inputs(phi: &PhiSpec, t: f64) -> Result<()> {
    phi.validate()?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {t}")));
    }
    Ok(())
}

/// u(t, x): discretized mild solution.
pub fn simulate_mild(
    phi: PhiSpec,
    t: f64,
    x: f64,
    grid: GridSpec,
    stream: &mut Stream,
) -> Result<MildSample> {
    let sim = WalshSimulator::mild(phi.clone(), t, x, grid)?;
    let value = sim.sample(stream);
    Ok(MildSample { value, t, x, grid, phi, lineage: stream.lineage })
}

/// The rescaled version; equal in law to `simulate_mild` (verified by
/// two-sample tests, not assumed).
pub fn simulate_rescaled(
    phi: PhiSpec,
    t: f64,
    x: f64,
    grid: GridSpec,
    stream: &mut Stream,
) -> Result<MildSample> {
    let sim = WalshSimulator::rescaled(phi.clone(), t, x, grid)?;
    let value = sim.sample(stream);
    Ok(MildSample { value, t, x, grid, phi, lineage: stream.lineage })
}

/// Space average u_R(t).
pub fn simulate_space_average(
    phi: PhiSpec,
    t: f64,
    radius: f64,
    grid: GridSpec,
    stream: &mut Stream,
) -> Result<f64> {
    let sim = WalshSimulator::space_average(phi, t, radius, grid)?;
    Ok(sim.sample(stream))
}

// ---------------------------------------------------------------------------
// Chaos expansion
// ---------------------------------------------------------------------------

/// Result of a chaos-term draw. `degraded` flags grids too coarse for the
/// requested order (heuristic n * ds >= 0.1).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChaosSample {
    pub value: f64,
    pub degraded: bool,
}

/// Prepared sampler for the rescaled per-chaos object
/// t^{3n/4} * (iterated integral over the unit simplex, outer kernel
/// argument x/sqrt(t)), realized by the Picard recursion
/// V_k(s, y) = int_0^s int p_{s-r}(y - z) V_{k-1}(r, z) W(dr, dz), V_0 = 1.
///
/// Inner levels propagate by the heat semigroup: the freshest slice enters
/// through a cell-exact RMS lag-1 kernel, older slices through midpoint-lag
/// kernels p_{(m-1/2) ds}; this combination reproduces the singular lag sum
/// int u^{-1/2} to O(0.02 sqrt(ds)). The outermost integral uses the
/// cell-exact weight table, so order 1 coincides with the constant-phi
/// Walsh sum.
#[derive(Debug)]
pub struct ChaosSimulator {
    grid: GridSpec,
    n: usize,
    t: f64,
    outer: Arc<WeightTable>,
    /// node -> node mass taps of p_ds, renormalized to sum 1.
    step_taps: Vec<f64>,
    /// cell -> node mass taps of p_{3 ds / 2}; index j encodes node - cell.
    inject_taps: Vec<f64>,
    inject_off: isize,
    /// cell -> node RMS taps with exact lag-1 second moment.
    lag1_taps: Vec<f64>,
    lag1_off: isize,
    step_off: isize,
}

impl ChaosSimulator {
    pub fn new(n: usize, t: f64, x: f64, grid: GridSpec) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {t}")));
        }
        let outer = WeightTable::cached(
            grid,
            KernelShape::Heat { time_scale: 1.0, center: x / t.sqrt(), y_clip: None },
        );
        let ds = grid.ds();
        let dy = grid.dy();

        // node -> node taps for the semigroup step.
        let h_step = ((8.0 * ds.sqrt() / dy).ceil() as isize).max(1);
        let mut step_taps: Vec<f64> = (-h_step..=h_step)
            .map(|m| heat_kernel_mass(ds, (m as f64 - 0.5) * dy, (m as f64 + 0.5) * dy))
            .collect();
        let mass: f64 = step_taps.iter().sum();
        for w in &mut step_taps {
            *w /= mass;
        }

        // cell -> node taps: offset j = node - cell; the cell spans
        // [(j-1) dy, j dy] relative to the node.
        let v_inj = 1.5 * ds;
        let h_inj = ((8.0 * v_inj.sqrt() / dy).ceil() as isize).max(2);
        let inject_taps: Vec<f64> = (-h_inj..=h_inj)
            .map(|j| heat_kernel_mass(v_inj, (j as f64 - 1.0) * dy, j as f64 * dy))
            .collect();

        // Lag-1 RMS taps: K1(j)^2 = (1/(ds dy)) int_0^ds int_cell p_u^2.
        let h_lag = ((8.0 * ds.sqrt() / dy).ceil() as isize).max(2);
        let w_hi = ds.sqrt();
        let lag1_taps: Vec<f64> = (-h_lag..=h_lag)
            .map(|j| {
                let a = (j as f64 - 1.0) * dy;
                let b = j as f64 * dy;
                // u = w^2 substitution for the time integral.
                let int: f64 = GL8
                    .iter()
                    .map(|&(xq, wq)| {
                        let w = 0.5 * w_hi * (xq + 1.0);
                        wq * w * crate::kernels::heat_kernel_sq_mass(w * w, 0.0, a, b)
                    })
                    .sum::<f64>()
                    * w_hi; // [0, w_hi] half-width * 2w factor
                (int / (ds * dy)).max(0.0).sqrt()
            })
            .collect();

        Ok(Self {
            grid,
            n,
            t,
            outer,
            step_taps,
            step_off: h_step,
            inject_taps,
            inject_off: h_inj,
            lag1_taps,
            lag1_off: h_lag,
        })
    }

    fn conv_node_node(&self, src: &[f64], dst: &mut [f64]) {
        let taps = &self.step_taps;
        let off = self.step_off;
        let n = src.len() as isize;
        for (out, i) in dst.iter_mut().zip(0..n) {
            let mut acc = 0.0;
            for (jj, &w) in taps.iter().enumerate() {
                let j = i - (jj as isize - off);
                if j >= 0 && j < n {
                    acc += w * src[j as usize];
                }
            }
            *out = acc;
        }
    }

    fn conv_cell_node(&self, taps: &[f64], off: isize, cells: &[f64], dst: &mut [f64], add: bool) {
        let nc = cells.len() as isize;
        let nn = dst.len() as isize;
        for i in 0..nn {
            let mut acc = 0.0;
            for (jj, &w) in taps.iter().enumerate() {
                let k = i - (jj as isize - off);
                if k >= 0 && k < nc {
                    acc += w * cells[k as usize];
                }
            }
            if add {
                dst[i as usize] += acc;
            } else {
                dst[i as usize] = acc;
            }
        }
    }

    /// Build the level-k field history from the level-(k-1) history.
    /// `prev = None` stands for the constant field 1.
    fn propagate_level(&self, sheet: &SheetSample, prev: Option<&[f64]>) -> Vec<f64> {
        let grid = self.grid;
        let n = grid.n_time;
        let nodes = grid.space_nodes();
        let cells = grid.space_cells();
        let mut field = vec![0.0; (n + 1) * nodes];
        let mut s_state = vec![0.0; nodes];
        let mut s_next = vec![0.0; nodes];
        let mut d_prev: Vec<f64> = vec![0.0; cells];
        let mut d_cur: Vec<f64> = vec![0.0; cells];
        for i in 0..n {
            let incs = sheet.increments_row(i);
            match prev {
                None => d_cur.copy_from_slice(incs),
                Some(p) => {
                    let row = &p[i * nodes..(i + 1) * nodes];
                    for k in 0..cells {
                        d_cur[k] = row[k] * incs[k];
                    }
                }
            }
            // S_{i+1} = p_ds * S_i + p_{3ds/2} * D_{i-1}
            self.conv_node_node(&s_state, &mut s_next);
            self.conv_cell_node(&self.inject_taps, self.inject_off, &d_prev, &mut s_next, true);
            std::mem::swap(&mut s_state, &mut s_next);
            // F_{i+1} = S_{i+1} + K1 * D_i
            let out = &mut field[(i + 1) * nodes..(i + 2) * nodes];
            out.copy_from_slice(&s_state);
            let mut t_row = vec![0.0; nodes];
            self.conv_cell_node(&self.lag1_taps, self.lag1_off, &d_cur, &mut t_row, false);
            for (o, t) in out.iter_mut().zip(&t_row) {
                *o += t;
            }
            std::mem::swap(&mut d_prev, &mut d_cur);
        }
        field
    }

    pub fn sample(&self, stream: &mut Stream) -> ChaosSample {
        if self.n == 0 {
            return ChaosSample { value: 1.0, degraded: false };
        }
        let sheet = SheetSample::draw(self.grid, &mut stream.rng, stream.lineage);
        let grid = self.grid;
        let cells = grid.space_cells();
        let nodes = grid.space_nodes();
        let mut prev: Option<Vec<f64>> = None;
        for _ in 1..self.n {
            prev = Some(self.propagate_level(&sheet, prev.as_deref()));
        }
        let mut acc = 0.0;
        for i in 0..grid.n_time {
            let coefs = self.outer.coef_row(i);
            let incs = sheet.increments_row(i);
            match &prev {
                None => {
                    for k in 0..cells {
                        acc += coefs[k] * incs[k];
                    }
                }
                Some(p) => {
                    let row = &p[i * nodes..(i + 1) * nodes];
                    for k in 0..cells {
                        acc += coefs[k] * row[k] * incs[k];
                    }
                }
            }
        }
        let degraded = self.n as f64 * grid.ds() >= 0.1;
        ChaosSample { value: self.t.powf(0.75 * self.n as f64) * acc, degraded }
    }
}

/// One draw of the order-n chaos term at horizon t.
pub fn chaos_term(
    n: usize,
    t: f64,
    x: f64,
    grid: GridSpec,
    stream: &mut Stream,
) -> Result<ChaosSample> {
    Ok(ChaosSimulator::new(n, t, x, grid)?.sample(stream))
}

// ---------------------------------------------------------------------------
// Nonlinear equation
// ---------------------------------------------------------------------------

/// Exponential-Euler mild scheme for the nonlinear equation with initial
/// condition 1: one semigroup step of the field plus one kernel-smoothed
/// predictable noise slice per time step. The grid's y_max is used as the
/// physical truncation radius; time covers [0, t] in n_time steps. The
/// deterministic convolution extends the field by its edge values, so
/// constants are preserved exactly.
pub fn simulate_nonlinear(
    sigma: PhiSpec,
    t: f64,
    x_eval: f64,
    grid: GridSpec,
    stream: &mut Stream,
) -> Result<f64> {
    sigma.validate()?;
    if !sigma.is_lipschitz() {
        return Err(Error::Precondition(
            "nonlinear coefficient must be Lipschitz (constant, gaussian bump, |x|, x, or table)"
                .into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {t}")));
    }
    if x_eval.abs() > grid.y_max {
        return Err(Error::Domain(format!(
            "evaluation point {x_eval} outside the truncated domain +-{}",
            grid.y_max
        )));
    }
    let n = grid.n_time;
    let dt = t * grid.ds();
    let dy = grid.dy();
    let nodes = grid.space_nodes();
    let cells = grid.space_cells();

    let h = ((8.0 * dt.sqrt() / dy).ceil() as isize).max(1);
    let det_taps: Vec<f64> = (-h..=h)
        .map(|m| heat_kernel_mass(dt, (m as f64 - 0.5) * dy, (m as f64 + 0.5) * dy))
        .collect();
    let det_mass: f64 = det_taps.iter().sum();
    let det_taps: Vec<f64> = det_taps.into_iter().map(|w| w / det_mass).collect();
    // cell -> node averaged point values of p_dt.
    let noise_taps: Vec<f64> = (-h..=h + 1)
        .map(|j| heat_kernel_mass(dt, (j as f64 - 1.0) * dy, j as f64 * dy) / dy)
        .collect();

    let mut field = vec![1.0f64; nodes];
    let mut smoothed = vec![0.0f64; nodes];
    let mut slice = vec![0.0f64; cells];
    let sd = (dt * dy).sqrt();
    for step in 0..n {
        // Heat semigroup with edge replication.
        for (i, out) in smoothed.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (jj, &w) in det_taps.iter().enumerate() {
                let j = i as isize - (jj as isize - h);
                let j = j.clamp(0, nodes as isize - 1) as usize;
                acc += w * field[j];
            }
            *out = acc;
        }
        // Predictable noise slice: sigma at the left node of each cell.
        for (k, s) in slice.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut stream.rng);
            *s = sigma.eval(field[k]) * sd * z;
        }
        for (i, out) in smoothed.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (jj, &w) in noise_taps.iter().enumerate() {
                let k = i as isize - (jj as isize - h);
                if k >= 0 && (k as usize) < cells {
                    acc += w * slice[k as usize];
                }
            }
            *out += acc;
        }
        std::mem::swap(&mut field, &mut smoothed);
        let max = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max > FIELD_CAP {
            return Err(Error::BlowUp { step, magnitude: max });
        }
    }
    let kn = (((x_eval + grid.y_max) / dy).round() as usize).min(nodes - 1);
    Ok(field[kn])
}

// ---------------------------------------------------------------------------
// Variance oracles (deterministic quadrature)
// ---------------------------------------------------------------------------

/// int_0^1 int p^2_{ts(1-s)}(center - y) E[phi(N(0, fv s |y|))^2] dy ds.
/// The time integral is split at 1/2: sqrt substitution at the s -> 0
/// envelope singularity, quartic distance substitution at the s -> 1 kernel
/// singularity (the distance 1 - s is passed exactly, never reconstructed).
pub fn walsh_heat_variance(
    phi: &PhiSpec,
    time_scale: f64,
    center: f64,
    field_var_scale: f64,
    tol: f64,
) -> f64 {
    let inner = |s: f64, one_minus_s: f64| -> f64 {
        let v = time_scale * one_minus_s;
        if v <= 0.0 {
            return 0.0;
        }
        // The squared kernel confines the integrand; the cut follows it.
        let y_cut = center.abs() + 9.0 * v.sqrt();
        let f = |y: f64| {
            crate::kernels::heat_kernel_unchecked(v, center - y).powi(2)
                * phi.mean_square_at_variance(field_var_scale * s * y.abs())
        };
        // |y|^{-1/2}-type envelope at the origin: sqrt substitution per side.
        adaptive_sqrt_left(f, 0.0, y_cut, tol * 0.02)
            + adaptive_sqrt_left(|y| f(-y), 0.0, y_cut, tol * 0.02)
    };
    adaptive_sqrt_left(|s| inner(s, 1.0 - s), 0.0, 0.5, tol * 0.2)
        + adaptive_quartic_right(|d| inner(1.0 - d, d), 0.5, 1.0, tol * 0.2)
}

/// Same with the window kernel K(s, y) of half-width `radius`.
pub fn walsh_window_variance(
    phi: &PhiSpec,
    radius: f64,
    time_scale: f64,
    field_var_scale: f64,
    tol: f64,
) -> f64 {
    let inner = |s: f64, one_minus_s: f64| -> f64 {
        let v = time_scale * one_minus_s;
        let y_cut = radius + 9.0 * v.max(0.0).sqrt();
        let k = |y: f64| -> f64 {
            if v <= 1e-300 {
                return if y.abs() < radius { 1.0 } else { 0.0 };
            }
            let sd = v.sqrt();
            crate::kernels::std_normal_cdf((radius - y) / sd)
                - crate::kernels::std_normal_cdf((-radius - y) / sd)
        };
        let f = |y: f64| {
            let kk = k(y);
            kk * kk * phi.mean_square_at_variance(field_var_scale * s * y.abs())
        };
        adaptive_sqrt_left(f, 0.0, y_cut, tol * 0.02)
            + adaptive_sqrt_left(|y| f(-y), 0.0, y_cut, tol * 0.02)
    };
    adaptive_sqrt_left(|s| inner(s, 1.0 - s), 0.0, 0.5, tol * 0.2)
        + adaptive_quartic_right(|d| inner(1.0 - d, d), 0.5, 1.0, tol * 0.2)
}

/// int_0^1 int_{-c}^{c} E[phi(N(0, fv s |y|))^2] dy ds.
pub fn walsh_band_variance(phi: &PhiSpec, half_width: f64, field_var_scale: f64, tol: f64) -> f64 {
    let inner = |s: f64| {
        2.0 * adaptive_sqrt_left(
            |y| phi.mean_square_at_variance(field_var_scale * s * y),
            0.0,
            half_width,
            tol * 0.05,
        )
    };
    adaptive_sqrt_left(inner, 0.0, 1.0, tol * 0.2)
}

/// Var u(t, x) for the discretization target (truncation-free continuum).
/// Closed form for the constant case; quadrature otherwise.
pub fn mild_variance_oracle(phi: &PhiSpec, t: f64, x: f64, tol: f64) -> f64 {
    if let PhiSpec::Constant(c) = phi {
        return c * c * t.sqrt() / std::f64::consts::PI.sqrt();
    }
    t * walsh_heat_variance(phi, t, x, t, tol)
}

/// Var u_R(t) by quadrature on the deterministic window kernel.
pub fn space_average_variance_oracle(phi: &PhiSpec, t: f64, radius: f64, tol: f64) -> f64 {
    t * walsh_window_variance(phi, radius, t, t, tol)
}

/// Variance m_n(1) of the unit-horizon chaos term, by the nested-quadrature
/// recursion m_k(s) = int_0^s (4 pi (s - r))^{-1/2} m_{k-1}(r) dr (the
/// whole-line spatial integral of a squared heat kernel collapses to
/// p_{2u}(0) exactly, which reduces the 2n-dimensional simplex integral to
/// a one-dimensional chain).
pub fn chaos_variance_oracle(n: usize, tol: f64) -> f64 {
    fn m(k: usize, s: f64, tol: f64) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let c = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
        adaptive_sqrt_left(
            |u| c * u.powf(-0.5) * m(k - 1, s - u, tol * 4.0),
            0.0,
            s,
            tol,
        )
    }
    m(n, 1.0, tol)
}

/// Brute-force variance of the regime-(iii) limit integral over
/// [0,1] x [-1,1] for |x|^alpha.
pub fn thm31iii_variance_oracle(alpha: f64, tol: f64) -> f64 {
    let phi = PhiSpec::HomogeneousPower { alpha, c_plus: 1.0, c_minus: 1.0 };
    walsh_band_variance(&phi, 1.0, 1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    const INV_SQRT_PI: f64 = 0.5641895835477563;

    fn var_of(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        // standard error of the variance from the fourth moment
        let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        let se = ((m4 - var * var).max(0.0) / n).sqrt();
        (var, se)
    }

    #[test]
    fn zero_phi_is_exactly_zero() {
        let grid = GridSpec::new(16, 16, 5.0).unwrap();
        let mut s = Stream::driving(1, 0);
        let m = simulate_mild(PhiSpec::Constant(0.0), 1.0, 0.0, grid, &mut s).unwrap();
        assert_eq!(m.value, 0.0);
        let mut s = Stream::driving(1, 1);
        let r = simulate_rescaled(PhiSpec::Constant(0.0), 4.0, 0.0, grid, &mut s).unwrap();
        assert_eq!(r.value, 0.0);
        let mut s = Stream::driving(1, 2);
        let a = simulate_space_average(PhiSpec::Constant(0.0), 1.0, 3.0, grid, &mut s).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn constant_variance_matches_exact_law() {
        // Var u(t,0) = sqrt(t)/sqrt(pi); checked at t = 1 with 20k replicates.
        let grid = GridSpec::new(64, 64, 7.0).unwrap();
        let sim = WalshSimulator::mild(PhiSpec::Constant(1.0), 1.0, 0.0, grid).unwrap();
        let vals: Vec<f64> = (0..20_000)
            .map(|r| sim.sample(&mut Stream::driving(99, r)))
            .collect();
        let (var, se) = var_of(&vals);
        assert!(
            (var - INV_SQRT_PI).abs() < 3.0 * se,
            "var {var} vs {INV_SQRT_PI} (3se {})",
            3.0 * se
        );
        // Mean is zero (Walsh integrals are martingales).
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let mse = (var / vals.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * mse);
    }

    #[test]
    fn homogeneous_variance_matches_quadrature_oracle() {
        // alpha = 1, t = 1, x = 0: oracle = int p^2 s|y| = 1/(4 pi).
        let oracle = mild_variance_oracle(
            &PhiSpec::HomogeneousPower { alpha: 1.0, c_plus: 1.0, c_minus: 1.0 },
            1.0,
            0.0,
            1e-7,
        );
        let closed = 1.0 / (4.0 * std::f64::consts::PI);
        assert!((oracle - closed).abs() < 1e-6, "{oracle} vs {closed}");
        let grid = GridSpec::new(96, 96, 7.0).unwrap();
        let sim = WalshSimulator::mild(
            PhiSpec::HomogeneousPower { alpha: 1.0, c_plus: 1.0, c_minus: 1.0 },
            1.0,
            0.0,
            grid,
        )
        .unwrap();
        let vals: Vec<f64> = (0..30_000)
            .map(|r| sim.sample(&mut Stream::driving(7, r)))
            .collect();
        let (var, se) = var_of(&vals);
        assert!(
            (var - oracle).abs() < 3.0 * se,
            "var {var} vs oracle {oracle} (3se {})",
            3.0 * se
        );
    }

    #[test]
    fn rescaled_variance_scales_like_sqrt_t() {
        let grid = GridSpec::new(64, 64, 7.0).unwrap();
        let sim = WalshSimulator::rescaled(PhiSpec::Constant(1.0), 16.0, 0.0, grid).unwrap();
        let vals: Vec<f64> = (0..20_000)
            .map(|r| sim.sample(&mut Stream::driving(3, r)))
            .collect();
        let (var, se) = var_of(&vals);
        let expect = 4.0 * INV_SQRT_PI;
        assert!((var - expect).abs() < 3.0 * se, "var {var} vs {expect}");
    }

    #[test]
    fn space_average_constant_variance() {
        let grid = GridSpec::new(48, 192, 12.0).unwrap();
        let (t, r) = (1.0, 8.0);
        let oracle =
            space_average_variance_oracle(&PhiSpec::Constant(1.0), t, r, 1e-6);
        let sim = WalshSimulator::space_average(PhiSpec::Constant(1.0), t, r, grid).unwrap();
        let vals: Vec<f64> = (0..8_000)
            .map(|rep| sim.sample(&mut Stream::driving(31, rep)))
            .collect();
        let (var, se) = var_of(&vals);
        assert!(
            (var - oracle).abs() < 3.0 * se,
            "var {var} vs oracle {oracle} (3se {})",
            3.0 * se
        );
    }

    #[test]
    fn chaos_order_zero_is_one() {
        let grid = GridSpec::new(16, 16, 5.0).unwrap();
        let c = chaos_term(0, 1.0, 0.0, grid, &mut Stream::driving(1, 0)).unwrap();
        assert_eq!(c.value, 1.0);
    }

    #[test]
    fn chaos_degradation_flag() {
        let grid = GridSpec::new(16, 16, 5.0).unwrap();
        let c = chaos_term(2, 1.0, 0.0, grid, &mut Stream::driving(1, 0)).unwrap();
        assert!(c.degraded); // 2/16 = 0.125 >= 0.1
        let fine = GridSpec::new(64, 32, 5.0).unwrap();
        let c = chaos_term(2, 1.0, 0.0, fine, &mut Stream::driving(1, 1)).unwrap();
        assert!(!c.degraded);
    }

    #[test]
    fn chaos_oracle_values() {
        // m_1(1) = 1/sqrt(pi); m_2(1) = 1/4 (Beta-chain closed forms).
        assert!((chaos_variance_oracle(1, 1e-8) - INV_SQRT_PI).abs() < 1e-6);
        assert!((chaos_variance_oracle(2, 1e-7) - 0.25).abs() < 3e-5);
    }

    #[test]
    fn chaos_unit_variances_match_oracles() {
        let grid = GridSpec::new(96, 96, 9.0).unwrap();
        for (n, n_rep) in [(1usize, 20_000u64), (2, 20_000)] {
            let sim = ChaosSimulator::new(n, 1.0, 0.0, grid).unwrap();
            let vals: Vec<f64> = (0..n_rep)
                .map(|r| sim.sample(&mut Stream::driving(17 + n as u64, r)).value)
                .collect();
            let (var, se) = var_of(&vals);
            let oracle = chaos_variance_oracle(n, 1e-7);
            assert!(
                (var - oracle).abs() < 3.0 * se,
                "order {n}: var {var} vs oracle {oracle} (3se {})",
                3.0 * se
            );
        }
    }

    #[test]
    fn nonlinear_zero_sigma_preserves_one() {
        let grid = GridSpec::new(32, 64, 8.0).unwrap();
        let u = simulate_nonlinear(PhiSpec::Constant(0.0), 1.0, 0.0, grid, &mut Stream::driving(1, 0))
            .unwrap();
        assert_eq!(u, 1.0);
    }

    #[test]
    fn nonlinear_linear_case_mean_one() {
        let grid = GridSpec::new(32, 96, 8.0).unwrap();
        let sigma = PhiSpec::HomogeneousPower { alpha: 1.0, c_plus: 1.0, c_minus: -1.0 };
        let vals: Vec<f64> = (0..4_000)
            .map(|r| {
                simulate_nonlinear(sigma.clone(), 1.0, 0.0, grid, &mut Stream::driving(77, r))
                    .unwrap()
            })
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} (3se {})", 3.0 * se);
    }

    #[test]
    fn nonlinear_rejects_non_lipschitz() {
        let grid = GridSpec::new(16, 16, 4.0).unwrap();
        let err = simulate_nonlinear(
            PhiSpec::Indicator { a: 0.0, b: 1.0 },
            1.0,
            0.0,
            grid,
            &mut Stream::driving(1, 0),
        );
        assert!(err.is_err());
    }

    // Linear sigma: Var(u - 1) should sit in a band around the two-term
    // chaos sum (higher orders contribute ~15-20% at t = 1) and grow with t.
    #[test]
    fn nonlinear_linear_variance_tracks_chaos_sum() {
        let sigma = PhiSpec::HomogeneousPower { alpha: 1.0, c_plus: 1.0, c_minus: -1.0 };
        let mut prev_var = 0.0;
        for (ti, &t) in [1.0f64, 2.0].iter().enumerate() {
            let y_max = GridSpec::recommended_y_max(0.0, 2.0 * t) + 2.0;
            let grid = GridSpec::new(64, 128, y_max).unwrap();
            let vals: Vec<f64> = (0..3_000)
                .map(|r| {
                    simulate_nonlinear(
                        sigma.clone(),
                        t,
                        0.0,
                        grid,
                        &mut Stream::driving(500 + ti as u64, r),
                    )
                    .unwrap() - 1.0
                })
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            let two_term: f64 = (1..=2)
                .map(|k| t.powf(k as f64 / 2.0) * chaos_variance_oracle(k, 1e-6))
                .sum();
            assert!(
                var > 0.85 * two_term && var < 1.9 * two_term,
                "t={t}: var {var} vs two-term {two_term}"
            );
            assert!(var > prev_var);
            prev_var = var;
        }
    }
}
