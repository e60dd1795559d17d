use nalgebra::{DMatrix, DVector};

use super::SpinMode;
use crate::error::{Error, Result};
use crate::functionals::{mean_field, restricted, spin_lifted_h, FunctionalParams, PenaltyFunctional};
use crate::hamio::IntegralSet;

/// Occupation subproblem at fixed orbitals:
///
/// `E(n) = constant + linear·n + ½ nᵀ Q n - κ m Σ_i φ(n_i)`
/// on `{Σ n = target, 0 <= n <= 1}`, where `m` is the number of spin
/// orbitals sharing each occupation.
#[derive(Debug, Clone)]
pub struct OccupationProblem {
    pub constant: f64,
    pub linear: DVector<f64>,
    pub quadratic: DMatrix<f64>,
    pub kappa: f64,
    pub penalty: PenaltyFunctional,
    pub multiplicity: f64,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct OccupationConfig {
    /// KKT residual target, Hartree.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OccupationConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OccupationSolution {
    pub occupations: DVector<f64>,
    pub energy: f64,
    pub mu: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

const ARMIJO: f64 = 1e-4;

impl OccupationProblem {
    /// Separable problem `Σ ε_i n_i - κ m Σ φ(n_i)` (no interaction).
    pub fn separable(
        levels: DVector<f64>,
        kappa: f64,
        penalty: PenaltyFunctional,
        multiplicity: f64,
        target: f64,
    ) -> Self {
        let k = levels.len();
        Self {
            constant: 0.0,
            linear: levels,
            quadratic: DMatrix::zeros(k, k),
            kappa,
            penalty,
            multiplicity,
            target,
        }
    }

    pub fn len(&self) -> usize {
        self.linear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linear.is_empty()
    }

    fn weight(&self) -> f64 {
        self.kappa * self.multiplicity
    }

    pub fn energy(&self, n: &DVector<f64>) -> f64 {
        let pen: f64 = n.iter().map(|&x| self.penalty.term(x)).sum();
        self.constant + self.linear.dot(n) + 0.5 * n.dot(&(&self.quadratic * n)) - self.weight() * pen
    }

    /// Gradient of the smooth (interaction) part, `linear + Q n`.
    fn mean_field_levels(&self, n: &DVector<f64>) -> DVector<f64> {
        &self.linear + &self.quadratic * n
    }

    pub fn gradient(&self, n: &DVector<f64>) -> DVector<f64> {
        let mut g = self.mean_field_levels(n);
        if self.kappa > 0.0 {
            for (gi, &x) in g.iter_mut().zip(n.iter()) {
                *gi -= self.weight() * self.penalty.term_derivative(x);
            }
        }
        g
    }

    /// Smallest violation of the KKT conditions over the multiplier `μ`,
    /// returned with that `μ`.
    pub fn kkt_residual(&self, n: &DVector<f64>, g: &DVector<f64>) -> (f64, f64) {
        kkt_residual(n, g, self.weight(), &self.penalty)
    }

    fn check_start(&self, n0: &DVector<f64>) -> Result<()> {
        if n0.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} start occupations for {} orbitals",
                n0.len(),
                self.len()
            )));
        }
        if (n0.sum() - self.target).abs() > 1e-8 {
            return Err(Error::InvalidOccupations(format!(
                "start occupations sum to {}, expected {}",
                n0.sum(),
                self.target
            )));
        }
        let interior = self.kappa > 0.0;
        for &x in n0.iter() {
            let ok = if interior {
                x > 0.0 && x < 1.0
            } else {
                (0.0..=1.0).contains(&x)
            };
            if !ok {
                return Err(Error::InvalidOccupations(format!(
                    "start occupation {x} is not {}",
                    if interior { "interior" } else { "in [0, 1]" }
                )));
            }
        }
        Ok(())
    }

    pub fn solve(&self, n0: &DVector<f64>, config: &OccupationConfig) -> Result<OccupationSolution> {
        self.check_start(n0)?;
        if self.target <= 0.0 || self.target >= self.len() as f64 {
            // every orbital empty or full: the feasible set is a point
            let n = DVector::from_element(self.len(), (self.target / self.len() as f64).clamp(0.0, 1.0));
            let g = self.gradient(&n);
            let (_, mu) = self.kkt_residual(&n, &g);
            return Ok(OccupationSolution {
                energy: self.energy(&n),
                occupations: n,
                mu,
                kkt_residual: 0.0,
                iterations: 0,
            });
        }
        if self.kappa > 0.0 {
            self.solve_interior(n0.clone(), config)
        } else {
            self.solve_projected(n0.clone(), config)
        }
    }

    /// Separable minimizer of `e·n - κ m Σ φ(n)` on the constraint set.
    fn fermi_dirac(&self, levels: &DVector<f64>) -> DVector<f64> {
        let w = self.weight();
        let fill = |mu: f64| levels.map(|e| self.penalty.inverse_derivative((e - mu) / w));
        let mut lo = levels.min() - 1.0;
        let mut hi = levels.max() + 1.0;
        let mut step = 1.0;
        while fill(lo).sum() > self.target {
            step *= 2.0;
            lo -= step * w.max(1.0);
        }
        step = 1.0;
        while fill(hi).sum() < self.target {
            step *= 2.0;
            hi += step * w.max(1.0);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if fill(mid).sum() < self.target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut n = fill(0.5 * (lo + hi));
        rebalance(&mut n, self.target);
        n
    }

    /// Saddle-free Newton step on the constraint plane: Jacobi-scaled
    /// reduced Hessian with eigenvalues replaced by their magnitudes.
    fn newton_direction(&self, n: &DVector<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
        let k = self.len();
        if k < 2 {
            return None;
        }
        let w = self.weight();
        let mut h = self.quadratic.clone();
        for i in 0..k {
            h[(i, i)] -= w * self.penalty.term_curvature(n[i]);
        }
        let scale = DVector::from_fn(k, |i, _| 1.0 / h[(i, i)].abs().max(1e-300).sqrt());
        let hs = DMatrix::from_fn(k, k, |i, j| scale[i] * h[(i, j)] * scale[j]);
        let gs = g.component_mul(&scale);
        // orthonormal basis of {y : scaleᵀ y = 0} from a Householder reflector
        let u = &scale / scale.norm();
        let mut v = u.clone();
        v[0] += if u[0] >= 0.0 { 1.0 } else { -1.0 };
        let reflector = DMatrix::identity(k, k) - (&v * v.transpose()) * (2.0 / v.norm_squared());
        let z = reflector.columns(1, k - 1).into_owned();
        let reduced = z.transpose() * &hs * &z;
        let gr = z.transpose() * &gs;
        let eig = reduced.symmetric_eigen();
        let floor = 1e-10 * eig.eigenvalues.amax().max(1e-300);
        let mut yr = DVector::zeros(k - 1);
        for (j, lambda) in eig.eigenvalues.iter().enumerate() {
            let vj = eig.eigenvectors.column(j);
            yr -= vj * (vj.dot(&gr) / lambda.abs().max(floor));
        }
        let d = (&z * yr).component_mul(&scale);
        if !d.iter().all(|x| x.is_finite()) || g.dot(&d) >= 0.0 {
            return None;
        }
        Some(d)
    }

    /// Largest step along `d` keeping the non-tiny components interior.
    fn max_step(n: &DVector<f64>, d: &DVector<f64>) -> f64 {
        let mut alpha: f64 = 1.0;
        for (&x, &di) in n.iter().zip(d.iter()) {
            if x <= TINY || 1.0 - x <= TINY {
                continue;
            }
            if di < 0.0 {
                alpha = alpha.min(0.995 * x / -di);
            } else if di > 0.0 {
                alpha = alpha.min(0.995 * (1.0 - x) / di);
            }
        }
        alpha
    }

    /// `n + α d` with tiny components (near either bound) moved at most a
    /// fixed factor toward the bound instead of limiting `α`, so a single
    /// negligible occupation cannot stall the step.
    fn advance(&self, n: &DVector<f64>, d: &DVector<f64>, alpha: f64) -> Option<DVector<f64>> {
        let top = 1.0 - 0.5 * f64::EPSILON;
        let mut trial = DVector::from_fn(n.len(), |i, _| {
            let (x, y) = (n[i], n[i] + alpha * d[i]);
            let y = if x <= TINY { y.max(1e-3 * x) } else { y };
            let y = if 1.0 - x <= TINY {
                y.min(1.0 - 1e-3 * (1.0 - x))
            } else {
                y
            };
            y.min(top)
        });
        rebalance(&mut trial, self.target);
        trial.iter().all(|&x| x > 0.0 && x < 1.0).then_some(trial)
    }

    /// Rounding level of `energy(n)`.
    fn energy_noise(&self, n: &DVector<f64>) -> f64 {
        let quad = n.abs().dot(&(self.quadratic.abs() * n.abs()));
        16.0 * f64::EPSILON * (self.constant.abs() + self.linear.abs().dot(&n.abs()) + quad + 1.0)
    }

    /// Armijo backtracking along `d`.
    fn line_search(&self, n: &DVector<f64>, e: f64, g: &DVector<f64>, d: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
        let slope = g.dot(d);
        if slope >= 0.0 {
            return None;
        }
        let noise = self.energy_noise(n);
        let mut alpha = Self::max_step(n, d);
        for _ in 0..80 {
            if alpha * -slope < noise {
                // the predicted decrease is no longer resolvable
                return None;
            }
            if let Some(trial) = self.advance(n, d, alpha) {
                let et = self.energy(&trial);
                if et <= e + ARMIJO * alpha * slope {
                    return Some((trial, et));
                }
            }
            alpha *= 0.5;
        }
        None
    }

    /// Near the optimum the decrease drops below the energy's resolution:
    /// accept a full step that is flat within noise and halves the residual.
    fn noise_level_step(&self, n: &DVector<f64>, e: f64, res: f64, d: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
        let trial = self.advance(n, d, Self::max_step(n, d))?;
        let et = self.energy(&trial);
        if et > e + self.energy_noise(n) {
            return None;
        }
        let (rt, _) = self.kkt_residual(&trial, &self.gradient(&trial));
        (rt < 0.5 * res).then_some((trial, et))
    }

    /// Damped Newton on the barrier-like problem (κ > 0) with a
    /// Fermi–Dirac fixed-point step as the alternative direction.
    fn solve_interior(&self, mut n: DVector<f64>, config: &OccupationConfig) -> Result<OccupationSolution> {
        let mut e = self.energy(&n);
        let mut last = f64::INFINITY;
        let mut stalled = 0;
        for iter in 0..=config.max_iterations {
            let g = self.gradient(&n);
            let (res, mu) = self.kkt_residual(&n, &g);
            last = res;
            if res <= config.tolerance {
                return Ok(OccupationSolution {
                    occupations: n,
                    energy: e,
                    mu,
                    kkt_residual: res,
                    iterations: iter,
                });
            }
            if iter == config.max_iterations || stalled >= 20 {
                break;
            }
            let mut best: Option<(DVector<f64>, f64)> = None;
            let newton = self.newton_direction(&n, &g);
            if let Some(d) = &newton {
                best = self.line_search(&n, e, &g, d);
                if best.is_none() {
                    // near the optimum the decrease drops below the energy's
                    // resolution; accept a step that is flat within noise and
                    // halves the residual
                    best = self.noise_level_step(&n, e, res, d);
                }
            }
            let newton_full = best.is_some();
            let fd = self.fermi_dirac(&self.mean_field_levels(&n));
            let d = &fd - &n;
            if let Some(cand) = self.line_search(&n, e, &g, &d) {
                if !newton_full || cand.1 < best.as_ref().unwrap().1 {
                    best = Some(cand);
                }
            }
            match best {
                Some((next, en)) => {
                    stalled = if en < e { 0 } else { stalled + 1 };
                    n = next;
                    e = en;
                }
                None => break,
            }
        }
        let g = self.gradient(&n);
        let (res, mu) = self.kkt_residual(&n, &g);
        if res <= config.tolerance {
            return Ok(OccupationSolution {
                occupations: n,
                energy: e,
                mu,
                kkt_residual: res,
                iterations: config.max_iterations,
            });
        }
        Err(Error::NotConverged {
            operation: "occupation optimization",
            iterations: config.max_iterations,
            residual: last.min(res),
        })
    }

    /// Projected gradient with Armijo search along the projection arc,
    /// finished by Newton steps on the free set (κ = 0).
    fn solve_projected(&self, mut n: DVector<f64>, config: &OccupationConfig) -> Result<OccupationSolution> {
        let mut e = self.energy(&n);
        let lipschitz = self.quadratic.norm().max(1e-3);
        let mut step = 1.0 / lipschitz;
        let mut last = f64::INFINITY;
        for iter in 0..=config.max_iterations {
            let g = self.gradient(&n);
            let (res, mu) = self.kkt_residual(&n, &g);
            last = res;
            if res <= config.tolerance {
                return Ok(OccupationSolution {
                    occupations: n,
                    energy: e,
                    mu,
                    kkt_residual: res,
                    iterations: iter,
                });
            }
            if iter == config.max_iterations {
                break;
            }
            // free-set Newton polish
            if let Some((next, en)) = self.free_newton(&n, &g) {
                if en < e - 1e-15 * e.abs().max(1.0)
                    || (en <= e && self.kkt_residual(&next, &self.gradient(&next)).0 < res)
                {
                    n = next;
                    e = en;
                    continue;
                }
            }
            let mut alpha = step * 4.0;
            let mut accepted = false;
            for _ in 0..100 {
                let trial = project_capped_simplex(&(&n - &g * alpha), self.target);
                let et = self.energy(&trial);
                let decrease = g.dot(&(&trial - &n));
                if et <= e + ARMIJO * decrease && decrease < 0.0 {
                    n = trial;
                    e = et;
                    step = alpha;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Err(Error::NotConverged {
            operation: "occupation optimization",
            iterations: config.max_iterations,
            residual: last,
        })
    }

    fn free_newton(&self, n: &DVector<f64>, g: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
        let free: Vec<usize> = (0..self.len())
            .filter(|&i| n[i] > 1e-14 && n[i] < 1.0 - 1e-14)
            .collect();
        if free.len() < 2 {
            return None;
        }
        let k = free.len();
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kkt[(a, b)] = self.quadratic[(i, j)];
            }
            kkt[(a, k)] = 1.0;
            kkt[(k, a)] = 1.0;
            rhs[a] = -g[i];
        }
        let sol = kkt.clone().lu().solve(&rhs)?;
        let d = sol.rows(0, k).into_owned();
        if d.dot(&(kkt.view((0, 0), (k, k)) * &d)) <= 0.0 {
            return None;
        }
        let mut next = n.clone();
        for (a, &i) in free.iter().enumerate() {
            next[i] += d[a];
        }
        if next.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return None;
        }
        let en = self.energy(&next);
        Some((next, en))
    }
}

/// Occupations this close to a bound count as sitting on it. With κ > 0 the
/// exact optimum is interior but may lie below any resolvable energy
/// change (`n ~ exp(-Δ/κ)`); the distance to it is then below the threshold.
const PIN: f64 = 1e-14;

/// Below this distance from a bound a component no longer limits the step.
const TINY: f64 = 1e-10;

/// Resolution of each gradient component: the penalty derivative cannot be
/// known better than its change across one float spacing of `n_i`, which
/// matters for occupations within ~1e-10 of 1.
pub(crate) fn gradient_slack(n: &DVector<f64>, weight: f64, penalty: &PenaltyFunctional) -> DVector<f64> {
    n.map(|x| {
        if weight == 0.0 || x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        let spacing = f64::EPSILON * x;
        8.0 * weight * (penalty.term_curvature(x).abs() * spacing + f64::EPSILON * penalty.term_derivative(x).abs())
    })
}

/// Largest KKT violation, minimized over the multiplier `μ`, with that `μ`.
///
/// With a penalty (`weight > 0`) a component within `PIN` of a bound whose
/// own stationary value for the given `μ` is also within `PIN` of that bound
/// counts as converged: the remaining energy change is below resolution.
pub(crate) fn kkt_residual(n: &DVector<f64>, g: &DVector<f64>, weight: f64, penalty: &PenaltyFunctional) -> (f64, f64) {
    let slack = gradient_slack(n, weight, penalty);
    let violation = |mu: f64| {
        let mut worst = 0.0_f64;
        for i in 0..n.len() {
            let (x, gi) = (n[i], g[i]);
            let low = x <= PIN;
            let high = 1.0 - x <= PIN;
            let v = if weight > 0.0 && (low || high) && x > 0.0 && x < 1.0 {
                let level = gi + weight * penalty.term_derivative(x);
                let target = penalty.inverse_derivative((level - mu) / weight);
                if (low && target <= PIN) || (high && 1.0 - target <= PIN) {
                    0.0
                } else {
                    (gi - mu).abs()
                }
            } else if low {
                (mu - gi).max(0.0)
            } else if high {
                (gi - mu).max(0.0)
            } else {
                (gi - mu).abs()
            };
            worst = worst.max(v - slack[i]);
        }
        worst.max(0.0)
    };
    // convex piecewise-linear in μ: ternary search
    let mut a = g.min();
    let mut b = g.max();
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if violation(m1) <= violation(m2) {
            b = m2;
        } else {
            a = m1;
        }
        if b - a <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    let mu = 0.5 * (a + b);
    (violation(mu), mu)
}

/// Spreads a tiny sum error over the components farthest from the bounds.
fn rebalance(n: &mut DVector<f64>, target: f64) {
    let err = n.sum() - target;
    if err == 0.0 {
        return;
    }
    let (mut best, mut room) = (0, -1.0);
    for (i, &x) in n.iter().enumerate() {
        let r = x.min(1.0 - x);
        if r > room {
            room = r;
            best = i;
        }
    }
    if err.abs() < room {
        n[best] -= err;
    }
}

/// Euclidean projection onto `{Σ n = target, 0 <= n <= 1}` by bisection on
/// the shift `μ` in `n_i = clamp(x_i - μ, 0, 1)`.
pub fn project_capped_simplex(x: &DVector<f64>, target: f64) -> DVector<f64> {
    let fill = |mu: f64| x.map(|v| (v - mu).clamp(0.0, 1.0));
    let mut lo = x.min() - 1.0;
    let mut hi = x.max();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fill(mid).sum() > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut n = fill(0.5 * (lo + hi));
    // place the residual on a free component (or the one nearest the cut)
    let err = n.sum() - target;
    if err != 0.0 {
        let free: Vec<usize> = (0..n.len()).filter(|&i| n[i] > 0.0 && n[i] < 1.0).collect();
        if let Some(&i) = free.first() {
            n[i] = (n[i] - err).clamp(0.0, 1.0);
        }
    }
    n
}

/// Density matrices of unit occupation in each orbital of the given mode.
fn unit_densities(mode: SpinMode, orbitals: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    match mode {
        SpinMode::General => orbitals.column_iter().map(|c| c * c.transpose()).collect(),
        SpinMode::Restricted => {
            let d = orbitals.nrows();
            (0..d)
                .map(|k| {
                    let mut n = DVector::zeros(d);
                    n[k] = 1.0;
                    let (ns, chi) = restricted::lift(&n, orbitals);
                    crate::rdm::assemble_unchecked(&ns, &chi)
                })
                .collect()
        }
    }
}

/// Builds the occupation subproblem of the penalized functional at fixed
/// orbitals (`orbitals` is spatial in restricted mode).
pub fn occupation_problem(
    mode: SpinMode,
    orbitals: &DMatrix<f64>,
    ints: &IntegralSet,
    params: &FunctionalParams,
) -> OccupationProblem {
    let units = unit_densities(mode, orbitals);
    let h = spin_lifted_h(ints);
    let k = units.len();
    let linear = DVector::from_fn(k, |i, _| h.component_mul(&units[i]).sum());
    let fields: Vec<DMatrix<f64>> = units.iter().map(|u| mean_field(u, ints)).collect();
    let mut quadratic = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let v = 0.5 * (fields[j].component_mul(&units[i]).sum() + fields[i].component_mul(&units[j]).sum());
            quadratic[(i, j)] = v;
            quadratic[(j, i)] = v;
        }
    }
    let (multiplicity, target) = match mode {
        SpinMode::General => (1.0, ints.n_electrons() as f64),
        SpinMode::Restricted => (2.0, ints.n_electrons() as f64 / 2.0),
    };
    OccupationProblem {
        constant: ints.core_energy() - params.b,
        linear,
        quadratic,
        kappa: params.kappa,
        penalty: params.penalty,
        multiplicity,
        target,
    }
}

/// Minimizes over occupations at fixed orbitals.
pub fn optimize_occupations(
    mode: SpinMode,
    orbitals: &DMatrix<f64>,
    ints: &IntegralSet,
    params: &FunctionalParams,
    n0: &DVector<f64>,
    config: &OccupationConfig,
) -> Result<OccupationSolution> {
    occupation_problem(mode, orbitals, ints, params).solve(n0, config)
}
