//! The four commands. Each returns a finished report or a classified error.

use crate::config::{Case, ConfigError, RunConfig};
use crate::report::{Conventions, Report, ReportBuilder};
use kflow_core::acs_space::{condition_c_pairing, CompatibleACS};
use kflow_core::calabi_functional::{
    assemble_d, d_apply, d_star_apply, df_pairing, encode_matrix, functional_f, optimize, H_REL,
};
use kflow_core::connection_space::{
    moment_identity_residual, moment_map_lc, random_low_mode_field, relative_sup_diff, Sym3Tensor,
};
use kflow_core::flows::{lemma_main_residual, moser_flow, moser_residual, PotentialPath};
use kflow_core::grid_core::{kfld, GridSpec, ScalarField};
use kflow_core::kahler_geometry::{
    build_geometry, closedness_residual, differential_ops, first_bianchi_residual, nabla_omega_residual,
    second_bianchi_residual, torsion_residual, GeometryCache, KahlerPotential,
};
use kflow_core::numerics::richardson_derivative;
use kflow_core::star_products::{
    bracket_witness, chi_commutator_defect, chi_commutator_defect_with, equivariant_bridge, fedosov_trace_density,
    trace_defect, wick_commutator_sides, wick_poisson_constant, wick_trace_defect, ClosedTwoForm, NuSeries,
    StarProduct, CHI_CLOSING_COEFF, FEDOSOV_NU2_COEFF, WICK_COMMUTATOR_CONSTANT,
};
use kflow_core::KflowError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Errors that stop a command before a verdict.
#[derive(Debug)]
pub enum RunError {
    /// Exit code 2.
    Config(ConfigError),
    /// Exit code 3: positivity, singular solves and other numerical preconditions.
    Numerical(KflowError),
    /// Exit code 2: the output directory cannot be written.
    Output(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Output(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Numerical(e) => write!(f, "numerical precondition failed: {e}"),
            RunError::Output(e) => write!(f, "output error: {e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<KflowError> for RunError {
    fn from(e: KflowError) -> Self {
        RunError::Numerical(e)
    }
}

type Result<T> = std::result::Result<T, RunError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Geom,
    Moment,
    Star,
    Optimize,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Geom => "geom",
            Command::Moment => "moment",
            Command::Star => "star",
            Command::Optimize => "optimize",
        }
    }
}

/// Where optional artifacts go; `None` skips them.
pub struct Output<'a> {
    pub dir: Option<&'a Path>,
}

impl Output<'_> {
    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = self.dir {
            let path: PathBuf = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

pub fn run_command(cmd: Command, cfg: &RunConfig, out: &Output) -> Result<Report> {
    let mut rep = ReportBuilder::new(cmd.name(), cfg);
    match cmd {
        Command::Geom => geom(cfg, out, &mut rep)?,
        Command::Moment => moment(cfg, out, &mut rep)?,
        Command::Star => star(cfg, out, &mut rep)?,
        Command::Optimize => optimize_cmd(cfg, out, &mut rep)?,
    }
    rep.section("conventions");
    rep.conventions = Some(conventions(cfg)?);
    Ok(rep.finish())
}

fn rng(seed: u64, offset: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(offset))
}

fn seeded_pair(spec: GridSpec, seed: u64, offset: u64) -> (ScalarField, ScalarField) {
    let mut r = rng(seed, offset);
    let f = random_low_mode_field(spec, 2, 1.0, 4, &mut r);
    let h = random_low_mode_field(spec, 2, 1.0, 4, &mut r);
    (f, h)
}

fn pair_for(cfg: &RunConfig, spec: GridSpec, offset: u64) -> (ScalarField, ScalarField) {
    cfg.test_pairs(spec).into_iter().next().unwrap_or_else(|| seeded_pair(spec, cfg.seed, offset))
}

fn geometry(case: &Case) -> Result<GeometryCache> {
    Ok(build_geometry(&case.potential()?)?)
}

fn conventions(cfg: &RunConfig) -> Result<Conventions> {
    let geom = geometry(&cfg.primary())?;
    let (f, h) = pair_for(cfg, geom.spec, 31);
    let (c, residual) = wick_poisson_constant(&f, &h, &geom)?;
    Ok(Conventions {
        laplacian: "Δ = d*d, nonnegative spectrum (flat: Δ cos(2πk·x) = 4π²|k|² cos(2πk·x))".into(),
        poisson: "{F,H} = Λ^{ab}∂_aF∂_bH = −ω(X_F,X_H)".into(),
        hamiltonian_field: "X_F^a = Λ^{ba}∂_bF, i(X_F)ω = dF".into(),
        trace_measure: "ω^n/n!".into(),
        wick_bracket_constant: [c.re, c.im],
        wick_bracket_residual: residual,
        wick_commutator_constant: WICK_COMMUTATOR_CONSTANT,
        fedosov_nu2_coefficient: FEDOSOV_NU2_COEFF,
    })
}

fn dump(out: &Output, cfg: &RunConfig, name: &str, bytes: Vec<u8>) -> Result<()> {
    if cfg.dump_fields {
        out.write(&format!("{name}.kfld"), &bytes)?;
    }
    Ok(())
}

fn geom(cfg: &RunConfig, out: &Output, rep: &mut ReportBuilder) -> Result<()> {
    let tol = &cfg.tolerances;
    for (i, case) in cfg.cases().iter().enumerate() {
        let l = case.name(i);
        rep.section(format!("{l}.geometry"));
        let geom = geometry(case)?;
        rep.info(format!("{l}.positivity_margin"), geom.positivity_margin);
        rep.below(format!("{l}.torsion"), torsion_residual(&geom.christoffel), tol.geometry);
        rep.below(format!("{l}.nabla_omega"), nabla_omega_residual(&geom.christoffel, &geom), tol.nabla_omega);
        rep.below(format!("{l}.first_bianchi"), first_bianchi_residual(&geom.riemann), tol.geometry);
        rep.below(format!("{l}.second_bianchi"), second_bianchi_residual(&geom)?, tol.second_bianchi);
        rep.below(format!("{l}.omega_closedness"), closedness_residual(&geom.omega), tol.closedness);
        rep.info(format!("{l}.sup_riemann"), geom.riemann.sup_norm());
        rep.info(format!("{l}.sup_scal"), geom.scal.sup_norm());
        if case.is_flat() {
            rep.below(format!("{l}.flat.sup_riemann"), geom.riemann.sup_norm(), tol.flat);
            rep.below(format!("{l}.flat.sup_ricci"), geom.ricci.sup_norm(), tol.flat);
            rep.below(format!("{l}.flat.sup_scal"), geom.scal.sup_norm(), tol.flat);
        }
        if i == 0 && cfg.geom.condition_c_seeds > 0 {
            rep.section(format!("{l}.condition_c"));
            let j = CompatibleACS::standard(&geom);
            let mut worst = f64::NEG_INFINITY;
            let mut smallest = f64::INFINITY;
            for s in 0..cfg.geom.condition_c_seeds as u64 {
                let f = random_low_mode_field(geom.spec, 2, 1.0, 3, &mut rng(cfg.seed, 200 + s));
                let v = condition_c_pairing(&f, &f, &j, &geom)?;
                worst = worst.max(v);
                smallest = smallest.min(v.abs());
            }
            rep.below(format!("{l}.condition_c.max_pairing"), worst, 0.0);
            rep.at_least(format!("{l}.condition_c.min_abs_pairing"), smallest, tol.condition_c);
        }
        dump(out, cfg, &format!("{l}_phi"), kfld::encode_scalar(geom.potential.phi()))?;
        dump(out, cfg, &format!("{l}_scal"), kfld::encode_scalar(&geom.scal))?;
        dump(out, cfg, &format!("{l}_volume"), kfld::encode_scalar(&geom.volume))?;
        dump(out, cfg, &format!("{l}_omega"), kfld::encode_tensor(&geom.omega))?;
        dump(out, cfg, &format!("{l}_metric"), kfld::encode_tensor(&geom.metric))?;
    }
    if let Some(m) = &cfg.geom.moser {
        rep.section("moser");
        let case = cfg.primary();
        let spec = case.spec()?;
        let path = PotentialPath::affine(case.n, &case.potential, &m.direction, 0.0, 1.0)?;
        for &t in &m.times {
            let f = moser_flow(&path, spec, t, m.steps)?;
            rep.below(format!("moser.t={t}.pullback_residual"), moser_residual(&path, &f, t)?, tol.moser);
            rep.below(format!("moser.t={t}.lemma_residual"), lemma_main_residual(&path, spec, t, m.steps)?, tol.lemma);
        }
    }
    Ok(())
}

fn moment(cfg: &RunConfig, out: &Output, rep: &mut ReportBuilder) -> Result<()> {
    let tol = &cfg.tolerances;
    for (i, case) in cfg.cases().iter().enumerate() {
        let l = case.name(i);
        rep.section(format!("{l}.moment"));
        let geom = geometry(case)?;
        let mm = moment_map_lc(&geom)?;
        rep.info(format!("{l}.mu0"), mm.mu0);
        rep.info(format!("{l}.sup_mu"), mm.mu.sup_norm());
        rep.info(format!("{l}.functional_F"), functional_f(&geom.potential)?);
        if case.is_flat() {
            rep.below(format!("{l}.flat.sup_mu_tilde"), mm.mu_tilde.sup_norm(), tol.flat);
        }
        if case.n == 1 {
            let target = differential_ops(&geom).laplacian(&geom.scal)?.scale(-0.5);
            rep.below(format!("{l}.dim2_reduction"), relative_sup_diff(&mm.mu, &target), tol.dim2_reduction);
        }
        if let Some(w) = &mm.p_wedge {
            rep.below(format!("{l}.p_wedge_vs_expanded"), relative_sup_diff(w, &mm.p_expanded), tol.p_consistency);
            rep.info(format!("{l}.sup_p"), mm.p_expanded.sup_norm());
        }
        rep.section(format!("{l}.moment_identity"));
        // seeded modes stay below a quarter of Nyquist
        let max_mode = ((geom.spec.points_per_axis as i64 - 1) / 8).clamp(1, 2);
        for k in 0..cfg.moment.identity_pairs as u64 {
            let mut r = rng(cfg.seed, 100 + k);
            let f = random_low_mode_field(geom.spec, max_mode, 1.0, 4, &mut r);
            let a = Sym3Tensor::random_low_mode(geom.spec, max_mode, cfg.moment.perturbation_amplitude, &mut r);
            let res = moment_identity_residual(&f, &a, &geom, cfg.moment.richardson_h)?;
            rep.below(format!("{l}.moment_identity.pair{k}"), res, tol.moment_identity);
        }
        dump(out, cfg, &format!("{l}_mu"), kfld::encode_scalar(&mm.mu))?;
        dump(out, cfg, &format!("{l}_mu_tilde"), kfld::encode_scalar(&mm.mu_tilde))?;
    }
    Ok(())
}

fn star(cfg: &RunConfig, out: &Output, rep: &mut ReportBuilder) -> Result<()> {
    let tol = &cfg.tolerances;
    for (i, case) in cfg.cases().iter().enumerate() {
        let l = case.name(i);
        rep.section(format!("{l}.fedosov"));
        let geom = geometry(case)?;
        let spec = geom.spec;
        let mu = moment_map_lc(&geom)?.mu;
        let (f, h) = match cfg.test_pairs(spec).into_iter().next() {
            Some(p) => p,
            None => {
                let (f, h, _) = bracket_witness(&geom, &mu, cfg.star.witness_max_mode)?;
                (f, h)
            }
        };
        let scale = f.sup_norm() * h.sup_norm();
        let plain = trace_defect(&f, &h, &NuSeries::one(spec, 3), StarProduct::Fedosov, &geom)?;
        if case.is_flat() {
            rep.below(format!("{l}.flat.sup_riemann"), geom.riemann.sup_norm(), tol.flat);
            rep.below(format!("{l}.flat.sup_mu_tilde"), moment_map_lc(&geom)?.mu_tilde.sup_norm(), tol.flat);
            rep.below(format!("{l}.flat.functional_F"), functional_f(&geom.potential)?, tol.flat);
            for (k, c) in plain.coefficients.iter().enumerate() {
                rep.below(format!("{l}.flat.fedosov_rho1.nu{k}"), c.norm(), tol.flat);
            }
        } else {
            let stated = trace_defect(&f, &h, &fedosov_trace_density(&mu)?, StarProduct::Fedosov, &geom)?;
            let closing_rho = NuSeries::from_real(&[
                ScalarField::constant(spec, 1.0),
                ScalarField::zeros(spec),
                mu.scale(-1.0 / 24.0),
                ScalarField::zeros(spec),
            ])?;
            let closing = trace_defect(&f, &h, &closing_rho, StarProduct::Fedosov, &geom)?;
            for k in 1..=3 {
                rep.below(format!("{l}.fedosov_stated_rho.nu{k}"), stated.coefficients[k].norm() / scale, tol.fedosov);
            }
            let p3 = plain.coefficients[3].norm();
            rep.info(format!("{l}.fedosov_rho1.nu3"), p3 / scale);
            rep.at_least(
                format!("{l}.fedosov_rho1_over_stated.nu3"),
                p3 / stated.coefficients[3].norm().max(f64::MIN_POSITIVE),
                tol.fedosov_ratio,
            );
            rep.diag_below(format!("{l}.fedosov_closing_rho.max_nu1_3"), closing.max_through(3) / scale, tol.fedosov);
            rep.diag_at_least(
                format!("{l}.fedosov_rho1_over_closing.nu3"),
                p3 / closing.coefficients[3].norm().max(f64::MIN_POSITIVE),
                tol.fedosov_ratio,
            );
        }
        rep.section(format!("{l}.bridge"));
        let b = equivariant_bridge(&f, &h, &geom)?;
        let denom = b.predicted.abs().max(1.0);
        rep.info(format!("{l}.bridge.omega_e"), b.omega_e);
        rep.info(format!("{l}.bridge.bracket_mu_tilde"), b.bracket_mu);
        rep.below(format!("{l}.bridge.rho1_vs_predicted"), (b.defect_plain - b.predicted).abs() / denom, tol.bridge);
        rep.diag_below(
            format!("{l}.bridge.stated_rho_vs_predicted"),
            (b.defect_corrected - b.predicted).abs() / denom,
            tol.bridge,
        );
        if cfg.star.wick {
            rep.section(format!("{l}.wick"));
            let (f, h) = pair_for(cfg, spec, 31);
            let scale = f.sup_norm() * h.sup_norm();
            let d = wick_trace_defect(&f, &h, &geom)?;
            for k in 1..=2 {
                rep.below(format!("{l}.wick.nu{k}"), d.coefficients[k].norm() / scale, tol.wick);
            }
            let (lhs, rhs) = wick_commutator_sides(&f, &h, &geom)?;
            let err = (lhs - rhs * WICK_COMMUTATOR_CONSTANT).norm() / rhs.norm().max(1.0);
            rep.below(format!("{l}.wick.commutator_vs_omega_j"), err, tol.wick);
        }
        if cfg.star.chi {
            rep.section(format!("{l}.chi"));
            let mut r = rng(cfg.seed, 41);
            let alpha: Vec<ScalarField> = (0..spec.dim())
                .map(|_| random_low_mode_field(spec, 2, cfg.star.chi_exact_amplitude, 3, &mut r))
                .collect();
            let (f, h) = pair_for(cfg, spec, 42);
            let scale = f.sup_norm() * h.sup_norm();
            let forms = [
                ("exact", ClosedTwoForm::exact(&alpha)?),
                ("omega_multiple", ClosedTwoForm::multiple_of_omega(&geom, cfg.star.chi_omega_multiple)?),
            ];
            for (name, chi) in forms {
                let d = chi_commutator_defect(&f, &h, &chi, &geom)?;
                rep.below(format!("{l}.chi_{name}.stated_rho.nu2"), d.coefficients[2].norm() / scale, tol.chi);
                let c = chi_commutator_defect_with(&f, &h, &chi, &geom, CHI_CLOSING_COEFF)?;
                rep.diag_below(format!("{l}.chi_{name}.closing_rho.nu2"), c.coefficients[2].norm() / scale, tol.chi);
            }
        }
        dump(out, cfg, &format!("{l}_mu"), kfld::encode_scalar(&mu))?;
    }
    Ok(())
}

/// Wavevectors with `|k|² = 1, 2, 5` padded to the grid dimension.
fn symbol_modes(dim: usize) -> Vec<Vec<i64>> {
    [[1i64, 0], [1, 1], [1, 2]]
        .iter()
        .map(|k| {
            let mut v = vec![0; dim];
            v[0] = k[0];
            v[1] = k[1];
            v
        })
        .collect()
}

fn optimize_cmd(cfg: &RunConfig, out: &Output, rep: &mut ReportBuilder) -> Result<()> {
    if !cfg.companions.is_empty() {
        return Err(ConfigError("optimize runs on the primary case only; remove companions".into()).into());
    }
    let tol = &cfg.tolerances;
    let case = cfg.primary();
    let spec = case.spec()?;
    let phi = case.potential()?;
    let geom = build_geometry(&phi)?;
    if cfg.optimize.operator_checks {
        rep.section("operator.flat_symbol");
        let flat = KahlerPotential::flat(spec);
        for k in symbol_modes(spec.dim()) {
            let psi = ScalarField::from_fn(spec, |x| {
                (2.0 * PI * k.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum::<f64>()).cos()
            });
            let k2: i64 = k.iter().map(|a| a * a).sum();
            let expect = psi.scale(0.5 * (4.0 * PI * PI * k2 as f64).powi(3));
            rep.below(
                format!("operator.flat_d_symbol.k2={k2}"),
                relative_sup_diff(&d_apply(&flat, &psi)?, &expect),
                tol.d_symbol,
            );
        }
        let one = ScalarField::constant(spec, 1.0);
        rep.below("operator.flat_d_constant", d_apply(&flat, &one)?.sup_norm(), tol.d_constant);
        rep.section("operator.adjoint");
        let (p1, p2) = seeded_pair(spec, cfg.seed, 21);
        let dp1 = d_apply(&phi, &p1)?;
        let lhs = geom.inner(&dp1, &p2)?;
        let rhs = geom.inner(&p1, &d_star_apply(&phi, &p2)?)?;
        let scale = (geom.inner(&dp1, &dp1)? * geom.inner(&p2, &p2)?).sqrt();
        rep.below("operator.adjoint_defect", (lhs - rhs).abs() / scale, tol.adjoint);
        rep.section("operator.gradient");
        let pairing = df_pairing(&phi, &p1)?;
        let flat_geom = build_geometry(&flat)?;
        let h = H_REL / differential_ops(&flat_geom).laplacian(&p1)?.sup_norm();
        let fd = richardson_derivative(|t| functional_f(&phi.perturbed(t, &p1)).unwrap_or(f64::NAN), h);
        rep.info("operator.gradient_pairing", pairing);
        rep.info("operator.gradient_fd", fd);
        // Near a critical point dF is O(h) and the difference is read against the
        // first-difference scale 2h‖Dψ‖² instead
        let size = pairing.abs().max(fd.abs()).max(2.0 * h * geom.inner(&dp1, &dp1)?);
        rep.info("operator.gradient_scale", size);
        let rel = (pairing - fd).abs() / size;
        rep.below("operator.gradient_vs_fd", rel, tol.gradient);
        rep.section("operator.kernel");
        let kspec =
            GridSpec::new(spec.n, cfg.optimize.kernel_points_per_axis).map_err(|e| ConfigError(e.to_string()))?;
        let d = assemble_d(&KahlerPotential::flat(kspec))?;
        rep.below("operator.kernel_dimension_minus_one", (d.report.kernel_dimension as f64 - 1.0).abs(), 0.5);
        rep.at_least("operator.kernel_min_eigenvalue", d.report.min_eigenvalue, tol.kernel_min_eigenvalue);
        rep.info("operator.kernel_min_eigenvalue_rel", d.report.min_eigenvalue_rel);
        if cfg.dump_fields {
            out.write("flat_d_matrix.bin", &encode_matrix(&d.matrix))?;
        }
    }
    rep.section("descent");
    let r = optimize(&phi, &cfg.optimizer)?;
    out.write("trajectory.csv", r.to_csv().as_bytes())?;
    rep.info("descent.iterations", r.iterations as f64);
    rep.info("descent.F_initial", r.f_initial);
    rep.info("descent.F_final", r.f_final);
    rep.below("descent.non_monotone", if r.is_monotone() { 0.0 } else { 1.0 }, 0.5);
    let ratio = if r.f_initial == 0.0 { 0.0 } else { r.f_final / r.f_initial };
    rep.below("descent.F_ratio", ratio, tol.optimizer_f_ratio);
    rep.below("descent.final_sup_mu", r.mu_inf_final, tol.optimizer_mu);
    rep.below("descent.final_sup_phi", r.phi_inf_final, tol.optimizer_phi);
    if let Some(phi) = &r.phi {
        dump(out, cfg, "final_phi", kfld::encode_scalar(phi.phi()))?;
    }
    Ok(())
}
