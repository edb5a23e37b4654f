use crate::config::Loaded;
use crate::output::{Artifacts, Csv};
use bosegas_core::bridge::{box_rescale, isometry_check, kinetic_penalty, BridgeProfile, Periodic1d, PENALTY_C_RIGOROUS};
use bosegas_core::checks::{bridge_corpus, nine_mode_setup, run_all, CheckOutcome, Row, Scale};
use bosegas_core::excitation::{energy_components, n_alpha, ExcitationFamily, TrialSetup};
use bosegas_core::fock::{
    build_hamiltonian, energy_expectation, exact_free_energy, norm2, BasisGuard, MomentumLattice, OccupationState, StateVector, VhatTable,
};
use bosegas_core::gibbs::{build_gamma0, random_weights, variational_report, Gamma0Options, MixtureState, TruncatedModeEnsemble};
use bosegas_core::scattering::{scattering_length_integral, solve_zero_energy, w_fourier, w_norms};
use bosegas_core::thermo::{
    chemical_potential, chemical_potential_quadrature, critical_density, delta_f_leading, density_quadrature, free_energy_density,
    free_energy_series, ratio_r, TemperatureSchedule,
};
use bosegas_core::RadialPotential;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::f64::consts::PI;

pub enum Failure {
    /// Bad configuration values; exit 2.
    Config(String),
    /// A computation failed; exit 1.
    Run(String),
}

impl From<bosegas_core::Error> for Failure {
    fn from(e: bosegas_core::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(format!("io: {e}"))
    }
}

pub type Outcome = Result<Vec<Row>, Failure>;

pub struct Ctx<'a> {
    pub loaded: &'a Loaded,
    pub seed: u64,
    pub out: &'a mut Artifacts,
    pub quiet: bool,
}

impl Ctx<'_> {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn potential(&self) -> Result<RadialPotential, Failure> {
        self.loaded.potential().map_err(Failure::Config)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn flag(bad: bool) -> f64 {
    if bad {
        1.0
    } else {
        0.0
    }
}

pub fn scattering(ctx: &mut Ctx) -> Outcome {
    let cfg = &ctx.loaded.config;
    let tol = &cfg.tolerances;
    let sc = &cfg.scattering;
    let pot = ctx.potential()?;
    let r0 = pot.range().max(1e-3);
    let sol = solve_zero_energy(&pot, sc.r_max_factor * r0, sc.step_fraction * r0)?;
    let quad = scattering_length_integral(&sol)?;
    let norms = w_norms(&sol)?;

    let mut profile = Csv::new(&["r", "w"]);
    for (r, w) in sol.w_profile(sc.profile_points.max(1)) {
        profile.row(vec![r.into(), w.into()]);
    }

    let lat = MomentumLattice::cube(sc.lattice_side, sc.lattice_cutoff)?;
    let shells: BTreeSet<i32> = lat.modes().iter().map(|&n| norm2(n)).filter(|&n| n > 0).collect();
    let mut fourier = Csv::new(&["n2", "p", "w_hat", "bound", "ratio"]);
    let mut worst: f64 = 0.0;
    for n2 in shells {
        let p = lat.k_unit() * (n2 as f64).sqrt();
        let w = w_fourier(&sol, p)?;
        let bound = 4.0 * PI * sol.a / (p * p);
        worst = worst.max(w.abs() / bound);
        fourier.row(vec![(n2 as usize).into(), p.into(), w.into(), bound.into(), (w.abs() / bound).into()]);
    }

    let four_pi_a = 4.0 * PI * sol.a;
    let energy_rel = (norms.grad_sq - norms.vw + norms.vw2).abs() / norms.vw.abs().max(f64::MIN_POSITIVE);
    let scattering_rel = rel(norms.half_v0 - norms.vw, four_pi_a);
    let mut summary = Csv::new(&["quantity", "value"]);
    for (k, v) in [
        ("a", sol.a),
        ("a_quadrature", quad),
        ("ode_residual", sol.residual),
        ("grad_w_sq", norms.grad_sq),
        ("half_vw", norms.vw),
        ("half_vw2", norms.vw2),
        ("half_v_hat0", norms.half_v0),
        ("fourier_max_ratio", worst),
    ] {
        summary.row(vec![k.into(), v.into()]);
    }
    ctx.out.csv("scattering_profile.csv", &profile)?;
    ctx.out.csv("scattering_fourier.csv", &fourier)?;
    ctx.out.csv("scattering_summary.csv", &summary)?;
    ctx.say(format!("a = {:.15e} (quadrature {:.15e}), max |w_p| p^2 / 4 pi a = {worst:.6}", sol.a, quad));
    Ok(vec![
        Row::new("a_ode_vs_quadrature_rel", rel(sol.a, quad), tol.scattering_rel),
        Row::new("fourier_max_ratio", worst, tol.fourier_ratio),
        Row::new("energy_identity_rel", energy_rel, tol.identity_rel),
        Row::new("scattering_identity_rel", scattering_rel, tol.identity_rel),
    ])
}

pub fn thermo(ctx: &mut Ctx) -> Outcome {
    let cfg = &ctx.loaded.config;
    let tol = cfg.tolerances.thermo_rel;
    let mut csv = Csv::new(&["rho", "beta", "regime", "rho_c", "rho_c_quadrature", "mu", "mu_quadrature", "f0", "f0_quadrature"]);
    let (mut rc_w, mut mu_w, mut f_w) = (0.0f64, 0.0f64, 0.0f64);
    for &rho in &cfg.thermo.rho {
        for &beta in &cfg.thermo.beta {
            if !(rho > 0.0) {
                return Err(Failure::Config(format!("thermo.rho: {rho} must be positive")));
            }
            let rc = critical_density(beta)?;
            let rcq = density_quadrature(beta, 0.0)?;
            let (mu, muq) = (chemical_potential(rho, beta)?, chemical_potential_quadrature(rho, beta)?);
            let (f, fq) = (free_energy_series(rho, beta)?, free_energy_density(rho, beta)?);
            rc_w = rc_w.max(rel(rc, rcq));
            mu_w = mu_w.max(if mu == 0.0 && muq == 0.0 { 0.0 } else { rel(mu, muq) });
            f_w = f_w.max(rel(f, fq));
            let regime = if rho >= rc { "above" } else { "below" };
            csv.row(vec![rho.into(), beta.into(), regime.into(), rc.into(), rcq.into(), mu.into(), muq.into(), f.into(), fq.into()]);
        }
    }
    ctx.out.csv("thermo.csv", &csv)?;
    ctx.say(format!("series vs quadrature: rho_c {rc_w:.3e}, mu {mu_w:.3e}, f0 {f_w:.3e}"));
    Ok(vec![Row::new("rho_c_rel", rc_w, tol), Row::new("mu_rel", mu_w, tol), Row::new("f0_rel", f_w, tol)])
}

pub fn delta_f(ctx: &mut Ctx) -> Outcome {
    let cfg = &ctx.loaded.config;
    let pot = ctx.potential()?;
    let r0 = pot.range().max(1e-3);
    let a = solve_zero_energy(&pot, 3.0 * r0, r0 * cfg.scattering.step_fraction)?.a;
    let schedule = TemperatureSchedule::power(cfg.delta_f.c).map_err(|e| Failure::Config(format!("delta_f.c: {e}")))?;
    let r = ratio_r(&schedule);
    let mut rhos = cfg.delta_f.rho.clone();
    if rhos.iter().any(|&x| !(x > 0.0)) {
        return Err(Failure::Config("delta_f.rho: densities must be positive".into()));
    }
    rhos.sort_by(|x, y| y.total_cmp(x));
    let mut csv = Csv::new(&["rho", "beta", "rho_c", "ratio_r", "a", "delta_f", "delta_f_over_rho2"]);
    let mut prev = f64::INFINITY;
    let mut nonmonotone = false;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &rho in &rhos {
        let beta = schedule.beta(rho);
        let rho_c = critical_density(beta)?;
        let df = delta_f_leading(a, rho, rho_c);
        nonmonotone |= df >= prev;
        prev = df;
        let scaled = df / (rho * rho);
        lo = lo.min(scaled);
        hi = hi.max(scaled);
        csv.row(vec![rho.into(), beta.into(), rho_c.into(), r.into(), a.into(), df.into(), scaled.into()]);
    }
    ctx.out.csv("delta_f.csv", &csv)?;
    ctx.say(format!("a = {a:.15e}, R = {r:.6}, delta_f / rho^2 in [{lo:.15e}, {hi:.15e}]"));
    Ok(vec![
        Row::new("nonmonotone", flag(nonmonotone), 0.0),
        Row::new("rho2_scaling_spread", rel(lo, hi), ctx.loaded.config.tolerances.delta_f_rel),
    ])
}

pub fn fock(ctx: &mut Ctx) -> Outcome {
    let cfg = &ctx.loaded.config;
    let pot = ctx.potential()?;
    let s = nine_mode_setup(&pot)?;
    let vh = VhatTable::new(&s.lattice, &pot)?;
    let h = build_hamiltonian(&s.lattice, cfg.fock.particles, &vh, BasisGuard::default())?;
    let mut csv = Csv::new(&["beta", "dim", "ground_energy", "mean_energy", "free_energy"]);
    for &beta in &cfg.fock.beta {
        let g = exact_free_energy(&h, beta)?;
        let ground = g.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let mean: f64 = g.weights.iter().zip(&g.eigenvalues).map(|(w, e)| w * e).sum();
        csv.row(vec![beta.into(), h.dim().into(), ground.into(), mean.into(), g.free_energy.into()]);
    }
    ctx.out.csv("fock.csv", &csv)?;
    ctx.say(format!("{} modes, N = {}, dimension {}", s.lattice.len(), cfg.fock.particles, h.dim()));
    Ok(vec![
        Row::new("hermiticity_defect", h.hermiticity_defect(), cfg.tolerances.hermiticity),
        Row::new("momentum_block_defect", h.momentum_block_defect(&s.lattice), 0.0),
    ])
}

fn parse_alphas(s: &TrialSetup, specs: &[String]) -> Result<Vec<OccupationState>, Failure> {
    specs
        .iter()
        .map(|a| OccupationState::parse(&s.lattice, a).map_err(|e| Failure::Config(format!("trial_state.alpha `{a}`: {e}"))))
        .collect()
}

pub fn trial_state(ctx: &mut Ctx) -> Outcome {
    let cfg = &ctx.loaded.config;
    let pot = ctx.potential()?;
    let s = nine_mode_setup(&pot)?;
    let vh = VhatTable::new(&s.lattice, &pot)?;
    let norms = w_norms(&s.solution)?;
    let mut csv = Csv::new(&["alpha", "members", "norm_sqr", "imaginary_defect", "n_alpha", "e_alpha", "e_psi", "main_term"]);
    let (mut norm, mut imag) = (0.0f64, 0.0f64);
    for alpha in parse_alphas(&s, &cfg.trial_state.alpha)? {
        let f = s.family(&alpha)?;
        let parts = energy_components(&s.lattice, &s.shells, &vh, &norms, s.solution.a, &f)?;
        norm = norm.max((f.norm_sqr() - 1.0).abs());
        imag = imag.max(f.imaginary_defect());
        let e_alpha = energy_expectation(&s.lattice, &vh, &StateVector::basis(alpha.clone()));
        let e_psi = energy_expectation(&s.lattice, &vh, &f.state());
        csv.row(vec![
            alpha.to_spec(&s.lattice).into(),
            f.len().into(),
            f.norm_sqr().into(),
            f.imaginary_defect().into(),
            n_alpha(&s.lattice, &s.shells, &alpha).into(),
            e_alpha.into(),
            e_psi.into(),
            parts.main_total.into(),
        ]);
    }
    ctx.out.csv("trial_state.csv", &csv)?;
    ctx.say(format!("{} families, worst normalization defect {norm:.3e}", cfg.trial_state.alpha.len()));
    Ok(vec![
        Row::new("normalization", norm, cfg.tolerances.normalization),
        Row::new("imaginary_defect", imag, cfg.tolerances.normalization),
    ])
}

pub fn upper_bound(ctx: &mut Ctx) -> Outcome {
    let cfg = &ctx.loaded.config;
    let ub = &cfg.upper_bound;
    let n = cfg.fock.particles;
    let pot = ctx.potential()?;
    let s = nine_mode_setup(&pot)?;
    let vh = VhatTable::new(&s.lattice, &pot)?;
    let h = build_hamiltonian(&s.lattice, n, &vh, BasisGuard::default())?;
    let pool: Vec<ExcitationFamily> = parse_alphas(&s, &cfg.trial_state.alpha)?
        .into_iter()
        .filter(|a| a.total() == n)
        .map(|a| s.family(&a))
        .collect::<bosegas_core::Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut csv = Csv::new(&["beta", "state", "energy", "s_exact", "s_lower", "f_var", "f_var_bound", "f_exact"]);
    let mut worst = f64::NEG_INFINITY;
    for &beta in &ub.beta {
        let g = exact_free_energy(&h, beta)?;
        let ens = TruncatedModeEnsemble::new(&s.lattice, &s.shells, beta, 0.0)?;
        let opts = Gamma0Options { target: n as f64, seed: ctx.seed, samples: ub.samples, ..Default::default() };
        let g0 = build_gamma0(&ens, n, &s.lattice, &s.shells, opts)?;
        let fams: Vec<ExcitationFamily> = g0.alphas.iter().map(|a| s.family(a)).collect::<bosegas_core::Result<_>>()?;
        let mut states = vec![
            ("gamma0".to_string(), MixtureState::from_gamma0(&g0)?),
            ("excited".to_string(), MixtureState::from_families(g0.weights.clone(), &fams)?),
        ];
        if pool.len() > 1 {
            for k in 0..ub.mixtures {
                states.push((format!("mixture{k}"), MixtureState::from_families(random_weights(pool.len(), &mut rng), &pool)?));
            }
        }
        for (label, gamma) in &states {
            let r = variational_report(gamma, &h, beta, g.free_energy)?;
            worst = worst.max(r.f_exact - r.f_var).max(r.f_exact - r.f_var_bound);
            csv.row(vec![
                beta.into(),
                label.as_str().into(),
                r.energy.into(),
                r.s_exact.into(),
                r.s_lower.into(),
                r.f_var.into(),
                r.f_var_bound.into(),
                r.f_exact.into(),
            ]);
        }
    }
    ctx.out.csv("upper_bound.csv", &csv)?;
    ctx.say(format!("largest F_exact - F_var = {worst:.3e}"));
    Ok(vec![Row::new("f_exact_minus_f_var", worst, cfg.tolerances.variational_slack)])
}

pub fn bridge(ctx: &mut Ctx) -> Outcome {
    let cfg = &ctx.loaded.config;
    let b = &cfg.bridge;
    let p = BridgeProfile::new(b.l, b.ell).map_err(|e| Failure::Config(format!("bridge: {e}")))?;
    let c = b.penalty_c.unwrap_or(PENALTY_C_RIGOROUS);
    let mut csv = Csv::new(&["index", "degrees", "norm", "bridged_norm", "isometry_defect", "c_needed", "penalty_margin"]);
    let (mut defect, mut c_max) = (0.0f64, 0.0f64);
    for (i, fs) in bridge_corpus(b.l, ctx.seed, b.corpus_random).iter().enumerate() {
        let f: [&dyn Periodic1d; 3] = [&fs[0], &fs[1], &fs[2]];
        let iso = isometry_check(&p, f)?;
        let pen = kinetic_penalty(&p, f, c)?;
        defect = defect.max(iso.defect);
        c_max = c_max.max(pen.c_needed);
        let degrees = fs.iter().map(|t| t.degree().to_string()).collect::<Vec<_>>().join(" ");
        csv.row(vec![
            i.into(),
            degrees.into(),
            iso.norm_in.into(),
            iso.norm_out.into(),
            iso.defect.into(),
            pen.c_needed.into(),
            pen.margin.into(),
        ]);
    }
    let rs = box_rescale(b.l, b.rho).map_err(|e| Failure::Config(format!("bridge: {e}")))?;
    let mut resc = Csv::new(&["l", "rho", "l_star", "rho_star", "factor", "defect"]);
    resc.row(vec![rs.l.into(), rs.rho.into(), rs.l_star.into(), rs.rho_star.into(), rs.factor.into(), rs.defect.into()]);
    ctx.out.csv("bridge_corpus.csv", &csv)?;
    ctx.out.csv("bridge_rescale.csv", &resc)?;
    ctx.say(format!("isometry defect {defect:.3e}, C needed {c_max:.6} against C = {c:.6}"));
    Ok(vec![
        Row::new("isometry_defect", defect, cfg.tolerances.isometry),
        Row::new("penalty_c_needed", c_max, c),
        Row::new("particle_number_rel", rs.defect, cfg.tolerances.rescale),
    ])
}

/// Runs the twelve acceptance checks; returns their rows flattened with the check name as prefix.
pub fn verify(ctx: &mut Ctx, quick: bool) -> Outcome {
    let outcomes: Vec<CheckOutcome> = run_all(if quick { Scale::Quick } else { Scale::Full });
    let mut csv = Csv::new(&["id", "check", "label", "value", "limit", "ok"]);
    let mut report = String::new();
    let mut rows = Vec::new();
    for o in &outcomes {
        let line = o.summary_line();
        ctx.say(&line);
        report.push_str(&line);
        report.push('\n');
        for r in &o.rows {
            csv.row(vec![
                (o.id as usize).into(),
                o.name.into(),
                r.label.as_str().into(),
                r.value.into(),
                r.limit.into(),
                (if r.ok() { "true" } else { "false" }).into(),
            ]);
            rows.push(Row::new(format!("{}: {}", o.name, r.label), r.value, r.limit));
        }
        if let Some(e) = &o.error {
            rows.push(Row::new(format!("{}: error `{e}`", o.name), f64::NAN, 0.0));
        }
        if o.elapsed_s >= o.budget_s {
            rows.push(Row::new(format!("{}: runtime_s", o.name), o.elapsed_s, o.budget_s));
        }
    }
    let passed = outcomes.iter().filter(|o| o.passed()).count();
    report.push_str(&format!("{passed}/{} checks passed\n", outcomes.len()));
    ctx.out.csv("verify.csv", &csv)?;
    ctx.out.write("verify_report.txt", &report)?;
    Ok(rows)
}
