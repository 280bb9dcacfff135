use super::residual::Quadruple;
use super::{AnalysisError, EstimateReport, Run, DISCRETE_CAVEAT};
use crate::coefficients::{c_star, CoefficientSlice, EmbeddingConstants, SchemeConstants};
use crate::spatial::{integrate_product, Discretization, Mesh};

fn scheme_constants(run: &Run, emb: &EmbeddingConstants) -> Result<SchemeConstants, AnalysisError> {
    Ok(SchemeConstants::compute(run.sextet.norms(), run.nu, run.horizon(), emb)?)
}

/// Discrete a-priori bound: the largest value over steps of
/// `|p_i|²_H + δ_*|z_i|²_H + Σ_{j≤i} τ(|p_j|²_V + ν|z_j|²_{V₀})` against
/// `2(1 + C₀* + |a|_∞) e^{6C₀*T+1} [|p₀|²_H + |z₀|²_H + Σ_j τ(|h_j|²_{V*} + |k_j|²_{V₀*})]`.
/// Marked not applicable unless `τ < δ₀`.
pub fn check_apriori(disc: &Discretization, run: &Run, emb: &EmbeddingConstants) -> Result<EstimateReport, AnalysisError> {
    let c = scheme_constants(run, emb)?;
    let norms = run.sextet.norms();
    let traj = &run.traj;
    let tau = traj.tau;
    let mut acc = 0.0;
    let mut lhs: f64 = 0.0;
    for i in 0..=traj.n_steps() {
        let (p, z) = traj.state(i);
        if i > 0 {
            acc += tau * (disc.v.gram().quad(p) + run.nu * disc.v0.gram().quad(z));
        }
        lhs = lhs.max(disc.v.mass().quad(p) + norms.delta_star * disc.v0.mass().quad(z) + acc);
    }
    let (p0, z0) = traj.state(0);
    let data = disc.v.mass().quad(p0) + disc.v0.mass().quad(z0) + run.forcing.y_norm_sq(disc);
    let factor = 2.0 * (1.0 + c.c0_star + norms.a_inf) * (6.0 * c.c0_star * run.horizon() + 1.0).exp();
    let mut r = EstimateReport::new("a-priori bound", lhs, factor * data)
        .with_constant("C0*", c.c0_star)
        .with_constant("delta0", c.delta0)
        .with_constant("tau", tau)
        .with_constant("data", data);
    r.applicable = tau < c.delta0;
    Ok(r)
}

/// Everything one evaluation of `R*` needs at a time step.
#[derive(Debug, Clone, Copy)]
pub struct RStarInputs<'a> {
    /// `p²` on `V_h`.
    pub p2: &'a [f64],
    /// `z²` on `V₀,h`.
    pub z2: &'a [f64],
    /// Time derivative of `z²` on `V₀,h`.
    pub dz2: &'a [f64],
    pub s1: CoefficientSlice<'a>,
    pub s2: CoefficientSlice<'a>,
    /// `|a¹ − a²|_{C(Q̄)}`.
    pub a_diff_sup: f64,
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn component(v: &[f64], nc: usize, k: usize) -> Vec<f64> {
    v.iter().skip(k).step_by(nc).copied().collect()
}

fn l4(mesh: &Mesh, v: &[f64]) -> f64 {
    (0..mesh.n_cells()).map(|c| integrate_product(mesh, c, &[v, v, v, v])).sum::<f64>().max(0.0).powf(0.25)
}

fn h_sq(mesh: &Mesh, v: &[f64]) -> f64 {
    (0..mesh.n_cells()).map(|c| integrate_product(mesh, c, &[v, v])).sum()
}

/// The six terms of `R*(t)`, in order.
pub fn r_star(disc: &Discretization, x: &RStarInputs<'_>) -> [f64; 6] {
    let mesh = &disc.mesh;
    let dim = mesh.dim();
    let p = disc.v.extend(x.p2);
    let z = disc.v0.extend(x.z2);
    let da = diff(x.s1.a, x.s2.a);
    let db = diff(x.s1.b, x.s2.b);
    let dmu = diff(x.s1.mu, x.s2.mu);
    let dl = diff(x.s1.lambda, x.s2.lambda);
    let dw = diff(x.s1.omega, x.s2.omega);
    let dam = diff(x.s1.amat, x.s2.amat);
    let dwk: Vec<Vec<f64>> = (0..dim).map(|k| component(&dw, dim, k)).collect();
    let damk: Vec<Vec<f64>> = (0..dim * dim).map(|k| component(&dam, dim * dim, k)).collect();

    let dz_fun = disc.v0.as_functional(x.dz2);
    let dz_dual_sq = disc.v0.dual_inner(&dz_fun, &dz_fun).max(0.0);
    // |∇(a¹−a²)|_{L⁴} with cellwise constant gradients.
    let mut grad4 = vec![0.0; dim];
    for c in 0..mesh.n_cells() {
        for (k, g) in mesh.cell_gradient(c, &da).iter().enumerate() {
            grad4[k] += mesh.measure(c) * g.powi(4);
        }
    }
    let grad_da_l4: f64 = grad4.iter().map(|v| v.powf(0.25)).sum();
    let t1 = dz_dual_sq * (x.a_diff_sup.powi(2) + grad_da_l4.powi(2));

    let p_v_sq = disc.v.gram().quad(x.p2);
    let dw_l4: f64 = dwk.iter().map(|w| l4(mesh, w)).sum();
    let t2 = p_v_sq * (h_sq(mesh, &dmu) + dw_l4.powi(2));

    let t3 = disc.v0.gram().quad(x.z2) * l4(mesh, &db).powi(2);

    let t4: f64 = (0..mesh.n_cells()).map(|c| integrate_product(mesh, c, &[&p, &p, &dl, &dl])).sum();

    let mut t5 = 0.0;
    let mut t6 = 0.0;
    for c in 0..mesh.n_cells() {
        let g = mesh.cell_gradient(c, &z);
        for k in 0..dim {
            for l in 0..dim {
                t5 += g[k] * g[l] * integrate_product(mesh, c, &[&dwk[k], &dwk[l]]);
            }
        }
        for r in 0..dim {
            for s in 0..dim {
                for s2 in 0..dim {
                    t6 += g[s] * g[s2] * integrate_product(mesh, c, &[&damk[r * dim + s], &damk[r * dim + s2]]);
                }
            }
        }
    }
    [t1, t2, t3, t4, t5, t6]
}

fn check_match(a: &Run, b: &Run) -> Result<(), AnalysisError> {
    if a.traj.tau != b.traj.tau || a.traj.n_steps() != b.traj.n_steps() {
        return Err(AnalysisError::Mismatch("step size or step count differs".into()));
    }
    if a.traj.p[0].len() != b.traj.p[0].len() || a.traj.z[0].len() != b.traj.z[0].len() {
        return Err(AnalysisError::Mismatch("meshes differ".into()));
    }
    if a.sextet.grid() != b.sextet.grid() {
        return Err(AnalysisError::Mismatch("coefficient time grids differ".into()));
    }
    Ok(())
}

/// Continuous-dependence estimate for two runs on one mesh and step size,
/// maximized over grid times. `C*` is that of the first run's sextet and
/// `∫R*` is the forward-rectangle sum over steps.
pub fn check_continuous_dependence(
    disc: &Discretization,
    run1: &Run,
    run2: &Run,
    emb: &EmbeddingConstants,
) -> Result<EstimateReport, AnalysisError> {
    check_match(run1, run2)?;
    let (t1, t2) = (&run1.traj, &run2.traj);
    let tau = t1.tau;
    let n = t1.n_steps();
    let cs = c_star(run1.sextet.norms(), run1.nu, emb)?;
    let horizon = run1.horizon();
    let grow = (3.0 * cs * horizon).exp();

    let a_diff_sup = run1
        .sextet
        .a()
        .values()
        .iter()
        .zip(run2.sextet.a().values())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));

    let mut lhs: f64 = 0.0;
    let mut acc = 0.0;
    let mut r_int = 0.0;
    let mut forcing_int = 0.0;
    let mut initial = 0.0;
    for i in 0..=n {
        let dp = diff(&t1.p[i], &t2.p[i]);
        let dz = diff(&t1.z[i], &t2.z[i]);
        let weighted = disc.assemble_forms(&run1.slices.slice(i))?.m_a.quad(&dz);
        if i == 0 {
            initial = disc.v.mass().quad(&dp) + weighted;
        } else {
            acc += tau * (disc.v.gram().quad(&dp) + run1.nu * disc.v0.gram().quad(&dz));
            let dh = diff(&run1.forcing.h[i], &run2.forcing.h[i]);
            let dk = diff(&run1.forcing.k[i], &run2.forcing.k[i]);
            forcing_int += tau * (disc.v.dual_inner(&dh, &dh) + disc.v0.dual_inner(&dk, &dk));
            let (_, dz2) = t2.slope(i);
            let terms = r_star(
                disc,
                &RStarInputs {
                    p2: &t2.p[i],
                    z2: &t2.z[i],
                    dz2: &dz2,
                    s1: run1.slices.slice(i),
                    s2: run2.slices.slice(i),
                    a_diff_sup,
                },
            );
            r_int += tau * terms.iter().sum::<f64>();
        }
        lhs = lhs.max(disc.v.mass().quad(&dp) + weighted + acc);
    }
    let rhs = grow * initial + 2.0 * cs * grow * forcing_int + 2.0 * cs * grow * r_int;
    Ok(EstimateReport::new("continuous dependence", lhs, rhs)
        .with_constant("C*", cs)
        .with_constant("initial", initial)
        .with_constant("forcing_integral", forcing_int)
        .with_constant("r_star_integral", r_int)
        .with_caveat(DISCRETE_CAVEAT))
}

/// Two-sided bound `M₀*|data| ≤ ‖[p, z]‖ ≤ M₁*|data|`. `lhs` is the solution
/// norm, `rhs` the upper bound; the lower bound is stored under
/// `lower_bound` and must hold as well.
pub fn check_isomorphism_sandwich(
    disc: &Discretization,
    run: &Run,
    emb: &EmbeddingConstants,
) -> Result<EstimateReport, AnalysisError> {
    let c = scheme_constants(run, emb)?;
    let traj = &run.traj;
    let x = Quadruple::from_states(traj.tau, &traj.p, &traj.z);
    let z_norm = x.x_norm(disc);
    let max_p = traj.p.iter().map(|p| disc.v.h_norm(p)).fold(0.0, f64::max);
    let max_z = traj.z.iter().map(|z| disc.v0.h_norm(z)).fold(0.0, f64::max);
    let sol = z_norm + max_p + max_z;
    let (p0, z0) = traj.state(0);
    let data = (disc.v.mass().quad(p0) + disc.v0.mass().quad(z0) + run.forcing.y_norm_sq(disc)).sqrt();
    let lower = c.m0_star * data;
    let upper = c.m1_star * data;
    let mut r = EstimateReport::new("isomorphism sandwich", sol, upper)
        .with_constant("lower_bound", lower)
        .with_constant("M0*", c.m0_star)
        .with_constant("M1*", c.m1_star)
        .with_constant("data_norm", data)
        .with_caveat(DISCRETE_CAVEAT);
    let lower_ok = super::passes(lower, sol);
    r.pass = r.pass && lower_ok;
    r.margin = r.margin.min(sol - lower);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::super::fixture;
    use super::*;
    use crate::coefficients::Forcing;

    fn emb() -> EmbeddingConstants {
        EmbeddingConstants { cv4: 1.0, cv04: 1.0, cv0h: 1.0, cvh: 1.0 }
    }

    #[test]
    fn zero_data_gives_zero_apriori_sides() {
        let disc = fixture::disc();
        let sextet = fixture::sextet(&disc, 0.0);
        let zeros = vec![0.0; disc.mesh.n_nodes()];
        let forcing = Forcing::zero(disc.mesh.n_nodes(), fixture::grid());
        let run = Run::execute(&disc, &sextet, &forcing, (&zeros, &zeros), &fixture::settings(0.02)).unwrap();
        let r = check_apriori(&disc, &run, &emb()).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn apriori_holds_on_a_smooth_run() {
        let disc = fixture::disc();
        let run = fixture::run(&disc, &fixture::sextet(&disc, 0.0), &fixture::forcing(&disc, 1.0), 0.001);
        let r = check_apriori(&disc, &run, &emb()).unwrap();
        assert!(r.pass && r.lhs > 0.0);
        assert_eq!(r.applicable, 0.001 < r.constants["delta0"]);
    }

    #[test]
    fn identical_runs_have_zero_difference() {
        let disc = fixture::disc();
        let run = fixture::run(&disc, &fixture::sextet(&disc, 0.0), &fixture::forcing(&disc, 1.0), 0.02);
        let r = check_continuous_dependence(&disc, &run, &run, &emb()).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.constants["r_star_integral"], 0.0);
        assert!(r.pass && r.caveat.is_some());
    }

    #[test]
    fn different_step_sizes_are_rejected() {
        let disc = fixture::disc();
        let s = fixture::sextet(&disc, 0.0);
        let f = fixture::forcing(&disc, 1.0);
        let (a, b) = (fixture::run(&disc, &s, &f, 0.02), fixture::run(&disc, &s, &f, 0.05));
        assert!(matches!(check_continuous_dependence(&disc, &a, &b, &emb()), Err(AnalysisError::Mismatch(_))));
    }

    #[test]
    fn r_star_isolates_a_lambda_difference() {
        let disc = fixture::disc();
        let s1 = fixture::sextet(&disc, 0.0).discretize(0.05, crate::coefficients::SliceMode::Point).unwrap();
        let s2 = fixture::sextet(&disc, 0.25).discretize(0.05, crate::coefficients::SliceMode::Point).unwrap();
        let (p0, z0) = fixture::initial(&disc);
        let p = disc.v.restrict(&p0);
        let z = disc.v0.restrict(&z0);
        let inputs = |s2| RStarInputs { p2: &p, z2: &z, dz2: &z, s1: s1.slice(1), s2, a_diff_sup: 0.0 };
        assert_eq!(r_star(&disc, &inputs(s1.slice(1))), [0.0; 6]);
        let terms = r_star(&disc, &inputs(s2.slice(1)));
        // Only |p (λ¹ − λ²)|² survives, and with λ¹ − λ² = −1/4 it is |p|²_H / 16.
        assert!(terms.iter().enumerate().all(|(k, v)| (k == 3) == (*v != 0.0)), "{terms:?}");
        let expected = disc.v.mass().quad(&p) / 16.0;
        assert!((terms[3] - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn sandwich_holds_on_a_smooth_run() {
        let disc = fixture::disc();
        let run = fixture::run(&disc, &fixture::sextet(&disc, 0.0), &fixture::forcing(&disc, 1.0), 0.02);
        let r = check_isomorphism_sandwich(&disc, &run, &emb()).unwrap();
        assert!(r.pass);
        assert!(r.constants["lower_bound"] <= r.lhs);
    }
}
