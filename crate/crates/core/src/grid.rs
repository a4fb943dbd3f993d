//! Augmented grids on the closed unit ball.
//!
//! A grid of size `n = n_R * n_S + n_0` consists of `n_0` copies of the
//! origin plus the points `(j / (n_R + 1)) * r_k` for radii `j = 1..=n_R` and
//! unit directions `r_k`, `k = 1..=n_S`. Directions are drawn uniformly at
//! random, placed deterministically through an equal-area product
//! construction in spherical coordinates, or drawn at random and then
//! symmetrized to match the low-order moments of the uniform law.

use std::f64::consts::PI;
use std::fmt::Write as _;

use faer::{Mat, Side};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::points::norm;
use crate::{rng, Error, Points, Result};

const BISECTION_MAX_ITER: usize = 200;
const BISECTION_REL_TOL: f64 = 1e-12;
const UNIT_NORM_TOL: f64 = 1e-12;
const ISOTROPY_TOL: f64 = 1e-12;
const ISOTROPY_MAX_ITER: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    Deterministic,
    Randomized,
    /// Random directions closed under negation with exactly isotropic
    /// second moments; see [`directions_isotropic`].
    Isotropic,
}

impl DirectionMode {
    /// Deterministic up to dimension 3, randomized above: the deterministic
    /// product construction needs `n_*^(d-1)` directions and collapses to
    /// `2^(d-1)` for moderate `n` in high dimension.
    pub fn default_for(d: usize) -> Self {
        if d <= 3 {
            DirectionMode::Deterministic
        } else {
            DirectionMode::Randomized
        }
    }
}

/// How grids are built for a sample: direction mode (automatic when `None`)
/// and the seed used by randomized directions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridConfig {
    pub mode: Option<DirectionMode>,
    pub seed: u64,
}

impl GridConfig {
    pub fn mode_for(&self, d: usize) -> DirectionMode {
        self.mode.unwrap_or_else(|| DirectionMode::default_for(d))
    }
}

/// Factorization `n = n_R * n_S + n_0` governing an augmented grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub n_r: usize,
    pub n_s: usize,
    pub n_0: usize,
    /// Per-angle counts `(n_1, ..., n_{d-1})` of the deterministic
    /// construction; empty for `d = 1` and for randomized directions.
    pub direction_factors: Vec<usize>,
}

impl GridSpec {
    pub fn new(
        d: usize,
        n_r: usize,
        n_s: usize,
        n_0: usize,
        direction_factors: Vec<usize>,
    ) -> Result<Self> {
        let spec = GridSpec {
            d,
            n: n_r * n_s + n_0,
            n_r,
            n_s,
            n_0,
            direction_factors,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::param("grid dimension must be at least 1"));
        }
        if self.n_r == 0 || self.n_s == 0 {
            return Err(Error::param("n_R and n_S must be positive"));
        }
        if self.n != self.n_r * self.n_s + self.n_0 {
            return Err(Error::param(format!(
                "n = {} is not n_R * n_S + n_0 = {} * {} + {}",
                self.n, self.n_r, self.n_s, self.n_0
            )));
        }
        if self.n_0 > 0 && self.n_0 >= self.n_r.min(self.n_s) {
            return Err(Error::param(format!(
                "n_0 = {} must be below min(n_R, n_S) = {}",
                self.n_0,
                self.n_r.min(self.n_s)
            )));
        }
        if self.d == 1 && self.n_s != 2 {
            return Err(Error::param("one-dimensional grids use n_S = 2"));
        }
        if !self.direction_factors.is_empty() {
            if self.direction_factors.len() != self.d - 1 {
                return Err(Error::param(format!(
                    "{} direction factors given for dimension {}",
                    self.direction_factors.len(),
                    self.d
                )));
            }
            let prod: usize = self.direction_factors.iter().product();
            if prod != self.n_s {
                return Err(Error::param(format!(
                    "direction factors multiply to {prod}, expected n_S = {}",
                    self.n_s
                )));
            }
        }
        Ok(())
    }
}

/// Chooses `(n_R, n_S, n_0)` for a sample of size `n` in dimension `d`.
///
/// - `d = 1`: `n_S = 2`, `n_R = n / 2`, `n_0 = n mod 2`.
/// - randomized: `n_S = floor(sqrt(n))`.
/// - deterministic: `n_* = floor(n^(1/(2d-2)))` (at least 2) per angle,
///   `n_S = n_*^(d-1)`.
///
/// In both `d >= 2` modes the direction count is decremented until
/// `n_0 < min(n_R, n_S)`.
pub fn factorize(n: usize, d: usize, mode: DirectionMode) -> Result<GridSpec> {
    if d < 1 {
        return Err(Error::param("dimension must be at least 1"));
    }
    if n < 4 {
        return Err(Error::param(format!(
            "sample size {n} is too small for a grid (need n >= 4)"
        )));
    }
    if d == 1 {
        let n_r = n / 2;
        return GridSpec::new(1, n_r, 2, n - 2 * n_r, Vec::new());
    }
    match mode {
        DirectionMode::Randomized | DirectionMode::Isotropic => {
            let mut n_s = integer_root(n, 2);
            loop {
                let n_r = n / n_s;
                let n_0 = n - n_r * n_s;
                if n_0 < n_r.min(n_s) {
                    return GridSpec::new(d, n_r, n_s, n_0, Vec::new());
                }
                n_s -= 1;
            }
        }
        DirectionMode::Deterministic => {
            let mut n_star = integer_root(n, 2 * d - 2).max(2);
            loop {
                let n_s = checked_pow(n_star, d - 1).filter(|&s| s <= n);
                if let Some(n_s) = n_s {
                    let n_r = n / n_s;
                    let n_0 = n - n_r * n_s;
                    if n_0 < n_r.min(n_s) {
                        return GridSpec::new(d, n_r, n_s, n_0, vec![n_star; d - 1]);
                    }
                }
                if n_star == 1 {
                    return Err(Error::param(format!(
                        "no valid deterministic factorization for n = {n}, d = {d}"
                    )));
                }
                n_star -= 1;
            }
        }
    }
}

/// Largest `r` with `r^k <= n`.
fn integer_root(n: usize, k: usize) -> usize {
    let mut r = (n as f64).powf(1.0 / k as f64).round() as usize;
    while r > 1 && checked_pow(r, k).is_none_or(|v| v > n) {
        r -= 1;
    }
    while checked_pow(r + 1, k).is_some_and(|v| v <= n) {
        r += 1;
    }
    r.max(1)
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Splits `total` into `parts` factors that are as equal as possible,
/// returned in ascending order (the largest factor goes to the azimuth).
pub fn balanced_factors(total: usize, parts: usize) -> Vec<usize> {
    if parts == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(parts);
    let mut rest = total;
    for remaining in (1..=parts).rev() {
        if remaining == 1 {
            out.push(rest);
            break;
        }
        let target = (rest as f64).powf(1.0 / remaining as f64);
        let best = (1..=rest)
            .filter(|f| rest.is_multiple_of(*f))
            .min_by(|a, b| {
                let da = (*a as f64 - target).abs();
                let db = (*b as f64 - target).abs();
                da.total_cmp(&db)
            })
            .unwrap_or(1);
        out.push(best);
        rest /= best;
    }
    out.sort_unstable();
    out
}

fn binomial(m: usize, k: usize) -> f64 {
    (ln_gamma(m as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((m - k) as f64 + 1.0))
        .exp()
        .round()
}

/// `int_0^pi sin^m t dt = sqrt(pi) Gamma((m+1)/2) / Gamma(m/2 + 1)`.
pub fn sin_power_total(m: usize) -> f64 {
    let m = m as f64;
    (0.5 * PI.ln() + ln_gamma((m + 1.0) / 2.0) - ln_gamma(m / 2.0 + 1.0)).exp()
}

/// Closed-form `g_m(theta) = int_0^theta sin^m t dt` via power reduction.
pub fn sin_power_integral(m: usize, theta: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::param(format!("angle {theta} outside [0, pi]")));
    }
    Ok(sin_power_integral_unchecked(m, theta))
}

fn sin_power_integral_unchecked(m: usize, theta: f64) -> f64 {
    if m == 0 {
        return theta;
    }
    let scale = 0.5f64.powi(m as i32 - 1);
    if m % 2 == 1 {
        let half = (m - 1) / 2;
        let mut acc = 0.0;
        for k in 0..=half {
            let sign = if (half - k).is_multiple_of(2) { 1.0 } else { -1.0 };
            let f = (m - 2 * k) as f64;
            acc += sign * binomial(m, k) * (1.0 - (f * theta).cos()) / f;
        }
        scale * acc
    } else {
        let half = m / 2;
        let mut acc = 0.0;
        for k in 0..half {
            let sign = if (half - k).is_multiple_of(2) { 1.0 } else { -1.0 };
            let f = (m - 2 * k) as f64;
            acc += sign * binomial(m, k) * (f * theta).sin() / f;
        }
        0.5f64.powi(m as i32) * binomial(m, half) * theta + scale * acc
    }
}

/// Inverse of [`sin_power_integral`] by bisection on the monotone map.
pub fn inverse_sin_power_integral(m: usize, target: f64) -> Result<f64> {
    let total = sin_power_total(m);
    let slack = BISECTION_REL_TOL * total;
    if !(target >= -slack && target <= total + slack) {
        return Err(Error::param(format!(
            "target {target} outside [0, g_{m}(pi) = {total}]"
        )));
    }
    if target <= 0.0 {
        return Ok(0.0);
    }
    if target >= total {
        return Ok(PI);
    }
    let tol = BISECTION_REL_TOL * total;
    let (mut lo, mut hi) = (0.0f64, PI);
    let mut mid = 0.5 * PI;
    for _ in 0..BISECTION_MAX_ITER {
        mid = 0.5 * (lo + hi);
        let v = sin_power_integral_unchecked(m, mid);
        if (v - target).abs() <= tol || hi - lo <= f64::EPSILON {
            break;
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Cartesian coordinates of a unit vector with angles `phi_1, ..., phi_{d-1}`.
fn spherical_to_cartesian(angles: &[f64], out: &mut [f64]) {
    let d = out.len();
    let mut sin_prod = 1.0;
    for m in 0..d - 1 {
        out[m] = sin_prod * angles[m].cos();
        sin_prod *= angles[m].sin();
    }
    out[d - 1] = sin_prod;
}

/// Deterministic directions on the sphere in `R^d`: the product of
/// per-angle grids `u_{m,j} = (2j - 1) / (2 n_m)` pushed through the inverse
/// cumulative sine-power integrals, so that each cell carries equal area.
pub fn directions_deterministic(d: usize, factors: &[usize]) -> Result<Points> {
    if d < 2 {
        return Err(Error::param("deterministic directions need d >= 2"));
    }
    if factors.len() != d - 1 {
        return Err(Error::param(format!(
            "expected {} direction factors, got {}",
            d - 1,
            factors.len()
        )));
    }
    if factors.contains(&0) {
        return Err(Error::param("direction factors must be positive"));
    }
    let mut tables: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for (idx, &n_m) in factors.iter().enumerate() {
        let m = idx + 1;
        let mut angles = Vec::with_capacity(n_m);
        for j in 1..=n_m {
            let u = (2 * j - 1) as f64 / (2 * n_m) as f64;
            let phi = if m == d - 1 {
                2.0 * PI * u
            } else {
                let power = d - 1 - m;
                inverse_sin_power_integral(power, sin_power_total(power) * u)?
            };
            angles.push(phi);
        }
        tables.push(angles);
    }

    let n_s: usize = factors.iter().product();
    let mut out = Points::zeros(d, n_s);
    let mut index = vec![0usize; d - 1];
    let mut angles = vec![0.0; d - 1];
    for row in 0..n_s {
        for (m, &j) in index.iter().enumerate() {
            angles[m] = tables[m][j];
        }
        spherical_to_cartesian(&angles, out.row_mut(row));
        // odometer, last angle fastest
        for m in (0..d - 1).rev() {
            index[m] += 1;
            if index[m] < factors[m] {
                break;
            }
            index[m] = 0;
        }
    }
    Ok(out)
}

/// `n_s` i.i.d. uniform directions (normalized standard Gaussian vectors).
pub fn directions_random(d: usize, n_s: usize, seed: u64) -> Result<Points> {
    if d < 2 {
        return Err(Error::param("random directions need d >= 2"));
    }
    if n_s == 0 {
        return Err(Error::param("need at least one direction"));
    }
    let mut rng = rng::seeded(seed);
    let mut out = Points::zeros(d, n_s);
    for i in 0..n_s {
        let row = out.row_mut(i);
        loop {
            for v in row.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let r = norm(row);
            if r > 1e-300 {
                row.iter_mut().for_each(|v| *v /= r);
                break;
            }
        }
    }
    Ok(out)
}

/// Random directions with the low-order moments of the uniform law on the
/// sphere: half are i.i.d. uniform, the other half their negatives (odd
/// moments vanish), and the set is then alternately whitened and projected
/// back to the sphere until `(d / n_s) sum r r^T = I`. With an odd count the
/// last direction has no partner.
pub fn directions_isotropic(d: usize, n_s: usize, seed: u64) -> Result<Points> {
    if d < 2 {
        return Err(Error::param("isotropic directions need d >= 2"));
    }
    if n_s < 2 * d {
        return Err(Error::param(format!(
            "isotropic directions need n_s >= 2d, got n_s = {n_s}, d = {d}"
        )));
    }
    let half = directions_random(d, n_s.div_ceil(2), seed)?;
    let mut out = Points::zeros(d, n_s);
    for i in 0..n_s / 2 {
        out.row_mut(2 * i).copy_from_slice(half.row(i));
        out.row_mut(2 * i + 1).iter_mut().zip(half.row(i)).for_each(|(o, v)| *o = -v);
    }
    if n_s % 2 == 1 {
        out.row_mut(n_s - 1).copy_from_slice(half.row(n_s / 2));
    }
    let scale = d as f64 / n_s as f64;
    for _ in 0..ISOTROPY_MAX_ITER {
        let mut second = Mat::<f64>::zeros(d, d);
        for r in out.rows() {
            for a in 0..d {
                for b in 0..=a {
                    second.write(a, b, second.read(a, b) + scale * r[a] * r[b]);
                }
            }
        }
        let off: f64 = (0..d)
            .flat_map(|a| (0..=a).map(move |b| (a, b)))
            .map(|(a, b)| (second.read(a, b) - if a == b { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        if off < ISOTROPY_TOL {
            return Ok(out);
        }
        let eig = second.selfadjoint_eigendecomposition(Side::Lower);
        let (u, s) = (eig.u(), eig.s().column_vector());
        let inv_sqrt = Mat::<f64>::from_fn(d, d, |a, b| {
            (0..d).map(|k| u.read(a, k) * u.read(b, k) / s.read(k).sqrt()).sum()
        });
        let mut buf = vec![0.0; d];
        for i in 0..n_s {
            let row = out.row_mut(i);
            for (a, v) in buf.iter_mut().enumerate() {
                *v = (0..d).map(|b| inv_sqrt.read(a, b) * row[b]).sum();
            }
            let r = norm(&buf);
            row.iter_mut().zip(&buf).for_each(|(o, v)| *o = v / r);
        }
    }
    Err(Error::Numerical("isotropic direction refinement did not converge".into()))
}

/// The multiset of grid points used as transport targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedGrid {
    pub spec: GridSpec,
    /// `n_0` origin copies first, then direction-major, radius-minor.
    pub points: Points,
    pub directions: Points,
}

pub fn build_grid(spec: GridSpec, directions: Points) -> Result<AugmentedGrid> {
    spec.validate()?;
    if directions.dim() != spec.d {
        return Err(Error::DimensionMismatch(format!(
            "directions have dimension {}, grid has {}",
            directions.dim(),
            spec.d
        )));
    }
    if directions.len() != spec.n_s {
        return Err(Error::DimensionMismatch(format!(
            "{} directions supplied, n_S = {}",
            directions.len(),
            spec.n_s
        )));
    }
    for (k, r) in directions.rows().enumerate() {
        if (norm(r) - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::param(format!("direction {k} is not a unit vector")));
        }
    }
    check_distinct(&directions)?;

    let mut points = Points::zeros(spec.d, spec.n);
    let denom = (spec.n_r + 1) as f64;
    for (k, r) in directions.rows().enumerate() {
        for j in 1..=spec.n_r {
            let row = points.row_mut(spec.n_0 + k * spec.n_r + (j - 1));
            let radius = j as f64 / denom;
            for (dst, &src) in row.iter_mut().zip(r) {
                *dst = radius * src;
            }
        }
    }
    Ok(AugmentedGrid {
        spec,
        points,
        directions,
    })
}

fn check_distinct(directions: &Points) -> Result<()> {
    let mut rows: Vec<&[f64]> = directions.rows().collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for w in rows.windows(2) {
        let gap = w[0]
            .iter()
            .zip(w[1])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if gap <= UNIT_NORM_TOL {
            return Err(Error::param("directions are not pairwise distinct"));
        }
    }
    Ok(())
}

fn directions_for(spec: &GridSpec, mode: DirectionMode, seed: u64) -> Result<Points> {
    if spec.d == 1 {
        return Points::new(1, vec![1.0, -1.0]);
    }
    match mode {
        DirectionMode::Deterministic => directions_deterministic(spec.d, &spec.direction_factors),
        DirectionMode::Randomized => directions_random(spec.d, spec.n_s, seed),
        DirectionMode::Isotropic => directions_isotropic(spec.d, spec.n_s, seed),
    }
}

impl AugmentedGrid {
    /// Grid of size `n` in dimension `d` following `config`.
    pub fn for_sample(n: usize, d: usize, config: &GridConfig) -> Result<Self> {
        let mode = config.mode_for(d);
        let spec = factorize(n, d, mode)?;
        let seed = rng::derive(config.seed, d as u64);
        let directions = directions_for(&spec, mode, seed)?;
        build_grid(spec, directions)
    }

    /// Origin-free grid with `m_r` radii and `m_s` directions, used to
    /// discretize the uniform law on the ball.
    pub fn ball(d: usize, m_r: usize, m_s: usize, mode: DirectionMode, seed: u64) -> Result<Self> {
        let factors = if d >= 2 && mode == DirectionMode::Deterministic {
            balanced_factors(m_s, d - 1)
        } else {
            Vec::new()
        };
        let spec = GridSpec::new(d, m_r, m_s, 0, factors)?;
        let directions = directions_for(&spec, mode, seed)?;
        build_grid(spec, directions)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spec.d
    }

    /// One point per row, `d` columns, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.points.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}
