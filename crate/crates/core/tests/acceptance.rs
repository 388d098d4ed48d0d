//! Acceptance criteria 1-10. Prints one `PASS`/`FAIL` line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use waveguide_core::carleman::{
    carleman_check_bounded, conjugated_operator, decomposition_residual_oracle, lemma_bounded_check,
    lemma_open_check,
};
use waveguide_core::fit::loglog_slope;
use waveguide_core::forward::{manufacture_pair, relative_l2, solve_heat, DataPreset};
use waveguide_core::presets::{open_lemma_field, random_smooth_field, Bump, Scenario, SeparableOracle, WindowedBump};
use waveguide_core::stability::perturbation_sweep;
use waveguide_core::transform::{
    boundary_max, build_bundle, ftc_representation_check, initial_max, rhs_identity_check, z_residual, z_source,
};
use waveguide_core::weights::{check_assumption_bounded, WeightParams};
use waveguide_core::{Regime, Result, SpaceTimeGrid, WaveguideDomain, WeightSystem};

type Verdict = Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Verdict);

fn bounded_grid(n1: usize, n2: usize, nt: usize) -> Result<SpaceTimeGrid> {
    SpaceTimeGrid::new(WaveguideDomain::bounded(1.0, 1.0, 1.0, 0.0)?, n1, n2, nt)
}

fn bounded_weights(grid: &SpaceTimeGrid, lambda: f64, s: f64) -> Result<WeightSystem> {
    WeightSystem::assemble(WeightParams::new(Regime::Bounded, lambda, s)?, grid)
}

fn open_weights(radius: f64, t: f64, n: (usize, usize, usize), lambda: f64, s: f64) -> Result<WeightSystem> {
    let g = SpaceTimeGrid::new(WaveguideDomain::truncated(radius, 1.0, t, 0.0)?, n.0, n.1, n.2)?;
    WeightSystem::assemble(WeightParams::new(Regime::Open, lambda, s)?, &g)
}

fn criterion_1() -> Verdict {
    let g = bounded_grid(64, 64, 256)?;
    let o = SeparableOracle::for_grid(&g, 1.0);
    let err = relative_l2(&solve_heat(&g, &o.potential(&g)?, &o.boundary_data(&g)?)?, &o.field(&g))?;
    let mut pts = vec![];
    for (n, nt) in [(15, 64), (31, 128), (63, 256)] {
        let g = bounded_grid(n, n, nt)?;
        let o = SeparableOracle::for_grid(&g, 1.0);
        let u = solve_heat(&g, &o.potential(&g)?, &o.boundary_data(&g)?)?;
        pts.push((g.dx1, relative_l2(&u, &o.field(&g))?));
    }
    let order = loglog_slope(&pts);
    Ok((err <= 1e-3 && order >= 1.8, format!("error at 64/64/256 = {err:.3e}, fitted order {order:.3}")))
}

fn criterion_2() -> Verdict {
    let g = bounded_grid(31, 31, 64)?;
    let ws = bounded_weights(&g, 1.0, 1.0)?;
    let rep = check_assumption_bounded(&ws)?;
    let (c1, delta) = (ws.params.c1, ws.params.delta);
    let min_psi = rep.bullet("psi_positive").map_or(f64::NAN, |b| b.margin);
    let min_grad = rep.bullet("gradient_lower_bound").map_or(f64::NAN, |b| b.margin);
    let max_nu = rep.bullet("normal_nonpositive_off_observed").map_or(f64::NAN, |b| b.margin);
    let ok = rep.all_pass() && min_psi >= 0.9 * c1 * delta && min_grad >= 0.9 * c1 && max_nu <= 0.0;
    Ok((
        ok,
        format!("all bullets {}, min psi {min_psi:.3e}, min |grad psi| {min_grad:.3e}, max d_nu psi off observed {max_nu:.3e}", rep.all_pass()),
    ))
}

fn criterion_3() -> Verdict {
    let g = bounded_grid(31, 15, 32)?;
    let ws = bounded_weights(&g, 1.0, 1.0)?;
    let (mut uniform, mut audit) = (true, true);
    let (mut worst_growth, mut worst_r) = (0.0_f64, 0.0_f64);
    for seed in 0..10 {
        let f = random_smooth_field(&g, seed, 4);
        let rep = lemma_bounded_check(&f, &ws, &[1.0, 2.0, 4.0, 8.0, 16.0])?;
        uniform &= rep.verdict("s_uniform") == Some(true);
        audit &= rep.verdict("ratio_audit") == Some(true);
        worst_growth = worst_growth.max(rep.metric("c_max_over_c_first").unwrap_or(f64::NAN));
        worst_r = worst_r.max(rep.metric("ratio_audit_max").unwrap_or(f64::NAN));
    }
    Ok((
        uniform && audit,
        format!(
            "s-uniform {uniform} (max C/C(1) = {worst_growth:.3}), ratio audit {audit} (max r = {worst_r:.3e}, limit 1 + 1e-12)"
        ),
    ))
}

fn criterion_4() -> Verdict {
    let ws = open_weights(1.0, 1.0, (399, 15, 16), 1.5, 4.0)?;
    let rep = lemma_open_check(&open_lemma_field(&ws.grid), &ws, &[4.0, 8.0, 16.0, 32.0, 64.0])?;
    let slope = rep.metric("slope").unwrap_or(f64::NAN);
    Ok((rep.verdict("slope") == Some(true), format!("fitted slope {slope:.3}")))
}

fn criterion_5() -> Verdict {
    let sc = Scenario::default();
    let (mut z, mut ftc_w, mut ftc_d, mut rhs) = (vec![], vec![], vec![], vec![]);
    let (mut bnd_ok, mut init_ok) = (true, true);
    let mut worst_bnd = 0.0_f64;
    for (n, nt) in [(31, 64), (63, 128), (127, 256)] {
        let g = bounded_grid(n, n, nt)?;
        let pot = sc.potential(&g, 0.0)?;
        let pot_tilde = sc.potential(&g, 0.1)?;
        let pair = manufacture_pair(&pot, &pot_tilde, DataPreset::Positive)?;
        let b = build_bundle(&pair.u, &pair.u_tilde, &pot)?;
        let h = g.dx1;
        z.push((h, z_residual(&b)?.discrepancy.max));
        let f = ftc_representation_check(&b)?;
        ftc_w.push((h, f.w.max));
        ftc_d.push((h, f.dx2_w.max));
        rhs.push((h, rhs_identity_check(&b, &pot, &pot_tilde)?.mismatch.max));
        let bm = boundary_max(&b.z)?;
        worst_bnd = worst_bnd.max(bm / (g.dx1.max(g.dx2).powi(2)));
        bnd_ok &= bm <= 10.0 * g.dx1.max(g.dx2).powi(2);
        init_ok &= initial_max(&b.z) == 0.0;
    }
    let orders = [loglog_slope(&z), loglog_slope(&ftc_w), loglog_slope(&ftc_d), loglog_slope(&rhs)];
    let ok = orders.iter().all(|o| *o >= 1.8) && bnd_ok && init_ok;
    Ok((
        ok,
        format!(
            "orders z-residual {:.3}, ftc w {:.3}, ftc dx2 w {:.3}, Pw identity {:.3}; max|z| on boundary / dx^2 = {worst_bnd:.3}; z(0) = 0 {init_ok}",
            orders[0], orders[1], orders[2], orders[3]
        ),
    ))
}

fn criterion_6() -> Verdict {
    let g = bounded_grid(31, 31, 64)?;
    let s = [2.0, 4.0, 8.0, 16.0, 32.0];
    let ws = bounded_weights(&g, 1.0, s[0])?;
    let mut reports = vec![];
    for b in Bump::SUITE {
        reports.push((b.name(), carleman_check_bounded(&b.value(&g), &b.heat_image(&g), &ws, &s)?));
    }
    let sc = Scenario::default();
    let pot = sc.potential(&g, 0.0)?;
    let pair = manufacture_pair(&pot, &sc.potential(&g, 0.1)?, DataPreset::Positive)?;
    let bundle = build_bundle(&pair.u, &pair.u_tilde, &pot)?;
    reports.push(("pipeline".into(), carleman_check_bounded(&bundle.z, &z_source(&bundle)?, &ws, &s)?));
    let mut ok = true;
    let mut detail = vec![];
    for (name, r) in &reports {
        ok &= r.verdict("finite") == Some(true) && r.verdict("bounded_beyond_s0") == Some(true);
        detail.push(format!("{name}: s0 = {}", r.metric("s0").unwrap_or(f64::NAN)));
    }
    Ok((ok, detail.join(", ")))
}

fn criterion_7() -> Verdict {
    let mut ok = true;
    let mut detail = vec![];
    for n in [31, 63] {
        let ws = open_weights(0.5, 4.0, (n, n, 2 * (n + 1)), 0.5, 1.0)?;
        let g = ws.grid;
        let [w, _, d1, d2, _] = WindowedBump { mode: 1 }.fields(&g);
        let zero = conjugated_operator(&w, &ws.with_s(0.0)?)?.residual.max_abs();
        let parts = conjugated_operator(&w, &ws)?;
        let oracle = decomposition_residual_oracle(&w, (&d1, &d2), &ws)?;
        let diff = parts.residual.sub(&oracle)?.max_abs();
        let tol = 10.0 * (g.dx1 * g.dx1 + g.dt * g.dt);
        ok &= zero == 0.0 && diff <= tol;
        detail.push(format!("n={n}: s=0 residual {zero:.1e}, |residual - oracle| {diff:.3e} <= {tol:.3e}"));
    }
    Ok((ok, detail.join("; ")))
}

fn criterion_8() -> Verdict {
    let g = bounded_grid(31, 31, 64)?;
    let eps = [0.05, 0.1, 0.2];
    let sw = perturbation_sweep(&Scenario::default(), &g, &[0.1, 0.05, 0.025], &eps)?;
    let orders: Vec<f64> = (0..eps.len()).map(|e| sw.theta_order(e)).collect();
    let spreads: Vec<f64> = (0..eps.len()).map(|e| sw.c_spread(e)).collect();
    let ok = orders.iter().all(|o| (o - 2.0).abs() <= 0.3) && spreads.iter().all(|s| *s <= 4.0) && sw.window_monotone();
    Ok((
        ok,
        format!(
            "theta orders {:?}, C_eps spreads {:?}, window monotone {}",
            orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>(),
            spreads.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>(),
            sw.window_monotone()
        ),
    ))
}

fn criterion_9() -> Verdict {
    let g = bounded_grid(31, 31, 64)?;
    let sc = Scenario::default();
    let pot = sc.potential(&g, 0.0)?;
    let pot_tilde = sc.potential(&g, 0.1)?;
    let pair = manufacture_pair(&pot, &pot_tilde, DataPreset::Positive)?;
    let min_ut = pair.u_tilde.min();
    let m = pair.u_tilde.mul(&pot.f_field())?;
    let bundle = build_bundle(&pair.u, &pair.u_tilde, &pot);
    let ok = min_ut > 0.0 && m.min() > 0.0 && bundle.is_ok();
    Ok((ok, format!("min u~ {min_ut:.3e}, min f u~ {:.3e}, transform built {}", m.min(), bundle.is_ok())))
}

fn criterion_10() -> Verdict {
    let run = || -> Result<String> {
        let g = bounded_grid(15, 15, 32)?;
        let ws = bounded_weights(&g, 1.0, 1.0)?;
        let f = random_smooth_field(&g, 42, 4);
        let lemma = lemma_bounded_check(&f, &ws, &[1.0, 2.0, 4.0])?.to_document().render();
        let sweep = perturbation_sweep(&Scenario::default(), &g, &[0.1, 0.05], &[0.1, 0.2])?
            .to_document()
            .render();
        Ok(lemma + &sweep)
    };
    let (a, b) = (run()?, run()?);
    Ok((a == b, format!("{} bytes per run, identical {}", a.len(), a == b)))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("forward-solver oracle", criterion_1),
        ("weight assumptions", criterion_2),
        ("bounded integral lemma", criterion_3),
        ("open integral lemma", criterion_4),
        ("transform pipeline", criterion_5),
        ("bounded Carleman estimate", criterion_6),
        ("conjugated operators", criterion_7),
        ("stability end-to-end", criterion_8),
        ("positivity surrogate", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = match f() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {:2} {:<26} {}  [{:.1}s] {detail}",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
