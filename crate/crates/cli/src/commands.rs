//! Subcommand bodies. Each returns whether every verdict passed; reports
//! are written under the output directory.

use std::path::Path;

use waveguide_core::carleman::{
    carleman_check_bounded, carleman_check_open, conjugated_operator, decomposition_residual_oracle,
    lemma_bounded_check, lemma_open_check, InequalityReport,
};
use waveguide_core::fit::loglog_slope;
use waveguide_core::forward::{
    manufacture_pair, relative_l2, solve_heat, BoundaryData, DataPreset,
};
use waveguide_core::grid::save_field;
use waveguide_core::presets::{random_smooth_field, open_lemma_field, Bump, Scenario, SeparableOracle, WindowedBump};
use waveguide_core::report::{num, Document, Table};
use waveguide_core::stability::perturbation_sweep;
use waveguide_core::transform::{build_bundle, z_source};
use waveguide_core::weights::{check_assumption_bounded, check_assumption_open, WeightParams};
use waveguide_core::{Regime, SpaceTimeGrid, WeightSystem};

use crate::config::{ForwardPreset, OpenSetup, ScenarioConfig};
use crate::CliError;

type Outcome = Result<bool, CliError>;

fn scenario(cfg: &ScenarioConfig) -> Scenario {
    Scenario {
        q0: cfg.scenario.q0,
        f_amplitude: cfg.scenario.f_amplitude,
    }
}

fn bounded_weights(cfg: &ScenarioConfig, grid: &SpaceTimeGrid, s: f64) -> Result<WeightSystem, CliError> {
    let w = &cfg.weights;
    let params = WeightParams::new(Regime::Bounded, w.lambda, s)?.with_offsets(w.delta, w.c1);
    Ok(WeightSystem::assemble(params, grid)?)
}

fn open_weights(cfg: &ScenarioConfig, grid: &SpaceTimeGrid, lambda: f64, s: f64) -> Result<WeightSystem, CliError> {
    let w = &cfg.weights;
    let params = WeightParams::new(Regime::Open, lambda, s)?.with_offsets(w.delta, w.c1);
    Ok(WeightSystem::assemble(params, grid)?)
}

fn write_report(out: &Path, stem: &str, rep: &InequalityReport) -> Result<(), CliError> {
    rep.to_document().write(out, stem)?;
    Ok(())
}

/// Grids coarsened by factors of two, coarsest first, ending at `grid`.
fn refinement_ladder(grid: &SpaceTimeGrid) -> Vec<SpaceTimeGrid> {
    let mut out = vec![*grid];
    let (mut n1, mut n2, mut nt) = (grid.n1, grid.n2, grid.nt);
    while out.len() < 3 && (n1 + 1) % 2 == 0 && (n2 + 1) % 2 == 0 && nt % 2 == 0 {
        (n1, n2, nt) = (n1.div_ceil(2) - 1, n2.div_ceil(2) - 1, nt / 2);
        match SpaceTimeGrid::new(grid.domain, n1, n2, nt) {
            Ok(g) => out.insert(0, g),
            Err(_) => break,
        }
    }
    out
}

pub fn forward(cfg: &ScenarioConfig, out: &Path) -> Outcome {
    let grid = cfg.bounded_grid()?;
    let mut doc = Document::new();
    doc.text("command", "forward")
        .text("n1", grid.n1.to_string())
        .text("n2", grid.n2.to_string())
        .text("nt", grid.nt.to_string());
    let u = match cfg.forward.preset {
        ForwardPreset::Separable => {
            doc.text("preset", "separable");
            let mut table = Table::new("convergence", &["n1", "n2", "nt", "dx1", "relative_l2_error"]);
            let mut points = vec![];
            let mut last = None;
            for g in refinement_ladder(&grid) {
                let oracle = SeparableOracle::for_grid(&g, cfg.forward.q0);
                let u = solve_heat(&g, &oracle.potential(&g)?, &oracle.boundary_data(&g)?)?;
                let err = relative_l2(&u, &oracle.field(&g))?;
                table.push(vec![g.n1.to_string(), g.n2.to_string(), g.nt.to_string(), num(g.dx1), num(err)]);
                points.push((g.dx1, err));
                last = Some((u, err));
            }
            let (u, err) = last.expect("ladder holds the configured grid");
            doc.number("relative_l2_error", err);
            doc.number("fitted_order", loglog_slope(&points));
            println!("forward: separable oracle, relative L2 error {}", num(err));
            doc.table(table);
            u
        }
        ForwardPreset::Scenario => {
            doc.text("preset", "scenario");
            let pot = scenario(cfg).potential(&grid, 0.0)?;
            let u = solve_heat(&grid, &pot, &BoundaryData::positive(&pot))?;
            doc.number("min_u", u.min()).number("max_u", u.max());
            println!("forward: scenario, min u {}", num(u.min()));
            u
        }
    };
    save_field(&u, out, "u", "forward solution")?;
    doc.write(out, "forward")?;
    Ok(true)
}

pub fn check_weights(cfg: &ScenarioConfig, out: &Path) -> Outcome {
    let grid = cfg.bounded_grid()?;
    let bounded = check_assumption_bounded(&bounded_weights(cfg, &grid, 1.0)?)?;
    let open_grid = cfg.open_grid(&OpenSetup {
        radius: cfg.weights.open_radius,
        n1: grid.n1,
        n2: grid.n2,
        nt: grid.nt,
        final_time: grid.domain.final_time,
        lambda: cfg.weights.lambda,
        s_list: vec![1.0],
    })?;
    let open = check_assumption_open(&open_weights(cfg, &open_grid, cfg.weights.lambda, 1.0)?)?;
    let text = format!("{}\n{}", bounded.to_text(), open.to_text());
    print!("{text}");
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("weights.txt"), text)?;
    Ok(bounded.all_pass() && open.all_pass())
}

pub fn verify_lemmas(cfg: &ScenarioConfig, out: &Path) -> Outcome {
    let grid = cfg.bounded_grid()?;
    let ws = bounded_weights(cfg, &grid, cfg.lemmas.s_list[0])?;
    let mut summary = Document::new();
    summary.text("command", "verify-lemmas").text("seed", cfg.seed.to_string());
    let mut table = Table::new(
        "draws",
        &["draw", "seed", "c_first", "c_max", "c_max_over_c_first", "ratio_audit_max", "s_uniform"],
    );
    let mut uniform = true;
    let mut audit = true;
    for draw in 0..cfg.lemmas.draws {
        let seed = cfg.seed.wrapping_add(draw);
        let f = random_smooth_field(&grid, seed, cfg.lemmas.modes);
        let rep = lemma_bounded_check(&f, &ws, &cfg.lemmas.s_list)?;
        write_report(out, &format!("lemma-bounded-draw{draw}"), &rep)?;
        let ok = rep.verdict("s_uniform") == Some(true);
        uniform &= ok;
        audit &= rep.verdict("ratio_audit") == Some(true);
        table.push(vec![
            draw.to_string(),
            seed.to_string(),
            num(rep.empirical_c),
            num(rep.metric("c_max").unwrap_or(f64::NAN)),
            num(rep.metric("c_max_over_c_first").unwrap_or(f64::NAN)),
            num(rep.metric("ratio_audit_max").unwrap_or(f64::NAN)),
            if ok { "pass" } else { "fail" }.into(),
        ]);
    }
    let setup = &cfg.lemmas.open;
    let og = cfg.open_grid(setup)?;
    let ows = open_weights(cfg, &og, setup.lambda, setup.s_list[0])?;
    let orep = lemma_open_check(&open_lemma_field(&og), &ows, &setup.s_list)?;
    write_report(out, "lemma-open", &orep)?;
    let slope_ok = orep.verdict("slope") == Some(true);
    summary
        .flag("bounded_s_uniform", uniform)
        .flag("bounded_ratio_audit", audit)
        .number("open_slope", orep.metric("slope").unwrap_or(f64::NAN))
        .flag("open_slope_in_range", slope_ok)
        .flag("open_s2_bounded", orep.verdict("s2_bounded") == Some(true))
        .table(table);
    summary.write(out, "lemmas")?;
    println!(
        "verify-lemmas: bounded s-uniform {}, ratio audit {}, open slope {}",
        uniform,
        audit,
        num(orep.metric("slope").unwrap_or(f64::NAN))
    );
    Ok(uniform && slope_ok)
}

pub fn verify_carleman(cfg: &ScenarioConfig, out: &Path) -> Outcome {
    let grid = cfg.bounded_grid()?;
    let s_list = &cfg.carleman.s_list;
    let ws = bounded_weights(cfg, &grid, s_list[0])?;
    let mut summary = Document::new();
    summary.text("command", "verify-carleman");
    let mut table = Table::new("reports", &["name", "c_first", "c_max", "s0", "finite", "bounded_beyond_s0"]);
    let mut finite = true;
    let mut record = |name: &str, rep: &InequalityReport, table: &mut Table| -> Result<(), CliError> {
        write_report(out, name, rep)?;
        finite &= rep.verdict("finite") == Some(true);
        table.push(vec![
            name.into(),
            num(rep.empirical_c),
            num(rep.metric("c_max").unwrap_or(f64::NAN)),
            num(rep.metric("s0").unwrap_or(f64::NAN)),
            flag(rep.verdict("finite")),
            flag(rep.verdict("bounded_beyond_s0")),
        ]);
        Ok(())
    };
    for b in Bump::SUITE {
        let rep = carleman_check_bounded(&b.value(&grid), &b.heat_image(&grid), &ws, s_list)?;
        record(&format!("carleman-bounded-{}", b.name()), &rep, &mut table)?;
    }
    let sc = scenario(cfg);
    let pot = sc.potential(&grid, 0.0)?;
    let pot_tilde = sc.potential(&grid, cfg.scenario.theta)?;
    let pair = manufacture_pair(&pot, &pot_tilde, DataPreset::Positive)?;
    let bundle = build_bundle(&pair.u, &pair.u_tilde, &pot)?;
    let rep = carleman_check_bounded(&bundle.z, &z_source(&bundle)?, &ws, s_list)?;
    record("carleman-bounded-pipeline", &rep, &mut table)?;

    let setup = &cfg.carleman.open;
    let og = cfg.open_grid(setup)?;
    let ows = open_weights(cfg, &og, setup.lambda, setup.s_list[0])?;
    let bump = WindowedBump { mode: 1 };
    let [w, _, d1, d2, _] = bump.fields(&og);
    let rep = carleman_check_open(&w, &bump.heat_image(&og), &ows, &setup.s_list)?;
    record("carleman-open-windowed", &rep, &mut table)?;

    let at_zero = conjugated_operator(&w, &ows.with_s(0.0)?)?;
    let parts = conjugated_operator(&w, &ows)?;
    let oracle = decomposition_residual_oracle(&w, (&d1, &d2), &ows)?;
    let diff = parts.residual.sub(&oracle)?.max_abs();
    let tol = 10.0 * (og.dx1 * og.dx1 + og.dt * og.dt);
    summary
        .number("conjugated.s", ows.params.s)
        .number("conjugated.residual_at_s0", at_zero.residual.max_abs())
        .number("conjugated.residual_max", parts.residual.max_abs())
        .number("conjugated.oracle_max", oracle.max_abs())
        .number("conjugated.oracle_mismatch", diff)
        .number("conjugated.tolerance", tol)
        .flag("conjugated.within_tolerance", diff <= tol)
        .flag("all_finite", finite)
        .table(table);
    summary.write(out, "carleman")?;
    println!("verify-carleman: all constants finite {finite}, conjugated mismatch {} (tolerance {})", num(diff), num(tol));
    Ok(finite)
}

fn flag(v: Option<bool>) -> String {
    match v {
        Some(true) => "pass".into(),
        Some(false) => "fail".into(),
        None => "n/a".into(),
    }
}

pub fn stability(cfg: &ScenarioConfig, out: &Path) -> Outcome {
    let grid = cfg.bounded_grid()?;
    let sc = scenario(cfg);
    let st = &cfg.stability;
    let pot = sc.potential(&grid, 0.0)?;
    let pot_tilde = sc.potential(&grid, st.thetas[0])?;
    let pair = manufacture_pair(&pot, &pot_tilde, DataPreset::Positive)?;
    let bundle = build_bundle(&pair.u, &pair.u_tilde, &pot)?;
    let sweep = perturbation_sweep(&sc, &grid, &st.thetas, &st.epsilons)?;
    for (ti, _) in st.thetas.iter().enumerate() {
        for (ei, _) in st.epsilons.iter().enumerate() {
            sweep.entry(ti, ei).to_document().write(out, &format!("stability-theta{ti}-eps{ei}"))?;
        }
    }
    let mut doc = sweep.to_document();
    doc.number("transform_floor", bundle.c1_floor);
    doc.write(out, "stability")?;
    let monotone = sweep.window_monotone();
    let nonfinite = sweep.nonfinite();
    println!(
        "stability: theta order {}, window monotone {monotone}, non-finite entries {nonfinite}",
        num(sweep.theta_order(0))
    );
    Ok(monotone && nonfinite == 0)
}
