//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context};

use hsps_core::beamoptics::{efficiency_to_db, overlap_efficiency, GaussianMode, LossBudget};
use hsps_core::pairsim::{
    self, power_sweep, read_binary, read_csv, simulate_stream, write_binary, write_csv,
    SweepConfig, TagStream,
};
use hsps_core::qpm::{
    calibrate_offset, idler_from_signal, phase_mismatch, solve_period, solve_phasematch,
    spdc_spectrum, ModeCombo, SpectrumOptions,
};
use hsps_core::tagmetrics::{
    car_rep, count, heralded_g2, heralding_efficiency, klyshko_infer, CoincidenceConfig,
    CountSummary,
};
use hsps_core::thinfilm::{
    convert_substrate, optimize_stack, OptimizeConstraints, OptimizeOptions,
};

use crate::outputs::{aligned_table, file_stem, fmt_float, OutputContext};
use crate::scenario::LoadedScenario;

pub fn cmd_phasematch(loaded: &LoadedScenario, out: &OutputContext) -> anyhow::Result<String> {
    let model = loaded.dispersion_model()?;
    let (mut process, combos) = loaded.process()?;
    let mut notes = String::new();

    if let Some(calibration) = &loaded.scenario.calibration {
        let measured_um = calibration.measured_peak_nm / 1000.0;
        let offsets = calibrate_offset(measured_um, &process, &model)?;
        let shift = offsets
            .get(&ModeCombo::fundamental())
            .map(|o| o.signal)
            .unwrap_or(0.0)
            - process
                .mode_offsets
                .get(&ModeCombo::fundamental())
                .map(|o| o.signal)
                .unwrap_or(0.0);
        process.mode_offsets = offsets;
        let _ = writeln!(
            notes,
            "calibrated to measured peak {} nm (applied signal-index offset {shift:+.6e})",
            calibration.measured_peak_nm
        );
        let period = solve_period(
            process.pump_wavelength_um,
            measured_um,
            &model,
            process.temperature_c,
            &process.offsets_for(&ModeCombo::fundamental())?,
        )?;
        let _ = writeln!(
            notes,
            "poling period matching the calibrated peak: {period:.4} um"
        );
    }

    let mut csv = String::from("combo,weight,lambda_s_nm,lambda_i_nm,delta_k_residual_rad_per_um\n");
    let mut rows = Vec::new();
    for (combo, weight) in &combos {
        let root_um = solve_phasematch(&process, &model, combo)?;
        let idler_um = idler_from_signal(process.pump_wavelength_um, root_um)?;
        let residual = phase_mismatch(&process, &model, root_um, combo)?;
        let _ = writeln!(
            csv,
            "{combo},{},{},{},{}",
            fmt_float(*weight),
            fmt_float(root_um * 1000.0),
            fmt_float(idler_um * 1000.0),
            fmt_float(residual)
        );
        rows.push(vec![
            combo.to_string(),
            format!("{weight:.3}"),
            format!("{:.3}", root_um * 1000.0),
            format!("{:.2}", idler_um * 1000.0),
        ]);
    }
    out.write_text("phasematch.csv", &csv)?;

    let mut summary = notes;
    summary.push_str(&aligned_table(
        &["combo", "weight", "lambda_s_nm", "lambda_i_nm"],
        &rows,
    ));
    out.write_text("summary.txt", &summary)?;
    Ok(summary)
}

pub fn cmd_spectrum(loaded: &LoadedScenario, out: &OutputContext) -> anyhow::Result<String> {
    let model = loaded.dispersion_model()?;
    let (mut process, combos) = loaded.process()?;
    if let Some(calibration) = &loaded.scenario.calibration {
        let measured_um = calibration.measured_peak_nm / 1000.0;
        process.mode_offsets = calibrate_offset(measured_um, &process, &model)?;
    }
    let section = loaded
        .scenario
        .spectrum
        .as_ref()
        .ok_or_else(|| anyhow!("scenario has no [spectrum] section"))?;
    if section.points < 2 {
        bail!("[spectrum].points must be at least 2");
    }
    let grid_um: Vec<f64> = (0..section.points)
        .map(|i| {
            (section.lambda_min_nm
                + (section.lambda_max_nm - section.lambda_min_nm) * (i as f64)
                    / ((section.points - 1) as f64))
                / 1000.0
        })
        .collect();
    let background = match &section.background_csv {
        None => None,
        Some(reference) => {
            let (text, name) = crate::scenario::resolve_text(reference, &loaded.base_dir)?;
            Some(parse_background_csv(&text, &name)?)
        }
    };
    let options = SpectrumOptions {
        pump_fwhm_nm: section.pump_fwhm_nm,
        background,
    };
    let spectrum = spdc_spectrum(&process, &model, &combos, &grid_um, &options)?;

    let mut csv = String::from("wavelength_nm,relative_intensity\n");
    for (wavelength_um, intensity) in &spectrum.samples {
        let _ = writeln!(csv, "{},{}", fmt_float(wavelength_um * 1000.0), fmt_float(*intensity));
    }
    out.write_text("spectrum.csv", &csv)?;

    let peak = spectrum
        .samples
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let summary = format!(
        "spectrum over [{}, {}] nm, {} points; maximum at {:.3} nm\n",
        section.lambda_min_nm,
        section.lambda_max_nm,
        section.points,
        peak.0 * 1000.0
    );
    out.write_text("summary.txt", &summary)?;
    Ok(summary)
}

fn parse_background_csv(text: &str, source_name: &str) -> anyhow::Result<Vec<(f64, f64)>> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("wavelength") {
            continue;
        }
        let (w, v) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("{source_name}:{}: expected wavelength_nm,intensity", idx + 1))?;
        let wavelength_nm: f64 = w
            .trim()
            .parse()
            .with_context(|| format!("{source_name}:{}", idx + 1))?;
        let intensity: f64 = v
            .trim()
            .parse()
            .with_context(|| format!("{source_name}:{}", idx + 1))?;
        points.push((wavelength_nm / 1000.0, intensity));
    }
    Ok(points)
}

pub fn cmd_coupling(loaded: &LoadedScenario, out: &OutputContext) -> anyhow::Result<String> {
    if loaded.scenario.coupling.is_empty() {
        bail!("scenario has no [[coupling]] entries");
    }
    let mode = |name: &str| -> anyhow::Result<GaussianMode> {
        let entry = loaded
            .scenario
            .modes
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| anyhow!("unknown mode {name:?} (define it under [[modes]])"))?;
        Ok(GaussianMode::new(entry.mfd_x_um, entry.mfd_y_um)?)
    };

    let wavelength_of = |name: &str| -> f64 {
        loaded
            .scenario
            .modes
            .iter()
            .find(|m| m.name == name)
            .and_then(|m| m.wavelength_nm)
            .unwrap_or(f64::NAN)
    };

    let mut csv = String::from(
        "label,wavelength_nm,a,b,mfd_a_x_um,mfd_a_y_um,mfd_b_x_um,mfd_b_y_um,efficiency,loss_db\n",
    );
    let mut rows = Vec::new();
    for entry in &loaded.scenario.coupling {
        let a = mode(&entry.a)?;
        let b = mode(&entry.b)?;
        let efficiency = overlap_efficiency(&a, &b);
        let loss_db = efficiency_to_db(efficiency)?;
        let label = entry
            .label
            .clone()
            .unwrap_or_else(|| format!("{}<->{}", entry.a, entry.b));
        let _ = writeln!(
            csv,
            "{label},{},{},{},{},{},{},{},{},{}",
            fmt_float(wavelength_of(&entry.a)),
            entry.a,
            entry.b,
            fmt_float(a.mfd_x_um),
            fmt_float(a.mfd_y_um),
            fmt_float(b.mfd_x_um),
            fmt_float(b.mfd_y_um),
            fmt_float(efficiency),
            fmt_float(loss_db)
        );
        rows.push(vec![
            label,
            format!("{efficiency:.2}"),
            format!("{loss_db:.2}"),
        ]);
    }
    out.write_text("coupling.csv", &csv)?;
    let summary = aligned_table(&["label", "efficiency", "loss_dB"], &rows);
    out.write_text("summary.txt", &summary)?;
    Ok(summary)
}

pub fn cmd_budget(loaded: &LoadedScenario, out: &OutputContext) -> anyhow::Result<String> {
    let section = loaded
        .scenario
        .budget
        .as_ref()
        .ok_or_else(|| anyhow!("scenario has no [budget] section"))?;
    let mut csv = String::from("file,label,loss_db\n");
    let mut table = String::new();
    for reference in &section.files {
        let (text, name) = crate::scenario::resolve_text(reference, &loaded.base_dir)?;
        let budget = LossBudget::parse(&text, &name)?;
        let stem = file_stem(reference);
        let mut rows = Vec::new();
        for entry in &budget.entries {
            let _ = writeln!(csv, "{stem},{},{}", entry.label, fmt_float(entry.loss_db));
            rows.push(vec![entry.label.clone(), format!("{:.2}", entry.loss_db)]);
        }
        let _ = writeln!(csv, "{stem},TOTAL,{}", fmt_float(budget.total_db()));
        rows.push(vec!["TOTAL".into(), format!("{:.2}", budget.total_db())]);
        rows.push(vec![
            "transmission".into(),
            format!("{:.4}", budget.transmission()),
        ]);
        let tag = budget
            .wavelength_nm
            .map(|w| format!(" @ {w} nm"))
            .unwrap_or_default();
        let _ = writeln!(table, "{stem}{tag}:");
        table.push_str(&aligned_table(&["entry", "loss_dB"], &rows));
        table.push('\n');
    }
    out.write_text("budgets.csv", &csv)?;
    out.write_text("summary.txt", &table)?;
    Ok(table)
}

pub fn cmd_coating(loaded: &LoadedScenario, out: &OutputContext) -> anyhow::Result<String> {
    let section = loaded
        .scenario
        .coating
        .as_ref()
        .ok_or_else(|| anyhow!("scenario has no [coating] section"))?;
    if section.points < 2 {
        bail!("[coating].points must be at least 2");
    }
    let grid: Vec<f64> = (0..section.points)
        .map(|i| {
            section.lambda_min_nm
                + (section.lambda_max_nm - section.lambda_min_nm) * (i as f64)
                    / ((section.points - 1) as f64)
        })
        .collect();
    let mut summary = String::new();
    for reference in &section.stacks {
        let (stack, _) = loaded.stack(reference)?;
        let stem = file_stem(reference);
        let spectrum = stack.spectrum(&grid)?;
        let mut csv = String::from("wavelength_nm,transmittance,reflectance\n");
        for point in &spectrum.samples {
            let _ = writeln!(
                csv,
                "{},{},{}",
                fmt_float(point.wavelength_nm),
                fmt_float(point.transmittance),
                fmt_float(point.reflectance)
            );
        }
        out.write_text(&format!("coating_{stem}.csv"), &csv)?;
        let peak = spectrum
            .samples
            .iter()
            .max_by(|a, b| a.transmittance.total_cmp(&b.transmittance))
            .expect("non-empty");
        let _ = writeln!(
            summary,
            "{stem}: {} layers, peak T = {:.4} at {:.1} nm",
            stack.layers.len(),
            peak.transmittance,
            peak.wavelength_nm
        );

        if let Some(convert) = &section.convert {
            let measured_incident = loaded.material(&convert.measured_incident)?;
            let measured_exit = loaded.material(&convert.measured_exit)?;
            let target_incident = loaded.material(&convert.target_incident)?;
            let target_exit = loaded.material(&convert.target_exit)?;
            let converted = convert_substrate(
                &spectrum,
                (&measured_incident, &measured_exit),
                (&target_incident, &target_exit),
            )?;
            let mut csv = String::from("wavelength_nm,transmittance,reflectance\n");
            for point in &converted.samples {
                let _ = writeln!(
                    csv,
                    "{},{},{}",
                    fmt_float(point.wavelength_nm),
                    fmt_float(point.transmittance),
                    fmt_float(point.reflectance)
                );
            }
            out.write_text(&format!("coating_{stem}_converted.csv"), &csv)?;
        }
    }
    out.write_text("summary.txt", &summary)?;
    Ok(summary)
}

pub fn cmd_optimize_coating(
    loaded: &LoadedScenario,
    out: &OutputContext,
) -> anyhow::Result<String> {
    let section = loaded
        .scenario
        .optimizer
        .as_ref()
        .ok_or_else(|| anyhow!("scenario has no [optimizer] section"))?;
    let (seed_design, _) = loaded.stack(&section.seed_design)?;
    let registry = loaded.material_registry()?;
    let materials = section
        .materials
        .iter()
        .map(|name| Ok(hsps_core::dispersion::resolve_material(name, &registry)?))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let targets = loaded.optimizer_targets()?;
    let constraints = OptimizeConstraints {
        max_layers: section.max_layers,
        materials,
        thickness_bounds_nm: (section.thickness_min_nm, section.thickness_max_nm),
    };
    let options = OptimizeOptions {
        rng_seed: section.rng_seed,
        restarts: section.restarts,
        ..OptimizeOptions::default()
    };
    let outcome = optimize_stack(&targets, &constraints, &seed_design, &options)?;

    let stack_text = outcome.stack.to_file_text(Some(
        "optimized layer stack; produced by the thickness optimizer",
    ));
    out.write_text("optimized.stack", &stack_text)?;

    let mut trace_csv = String::from("step,objective\n");
    for (step, objective) in outcome.trace.iter().enumerate() {
        let _ = writeln!(trace_csv, "{step},{}", fmt_float(*objective));
    }
    out.write_text("optimize_trace.csv", &trace_csv)?;

    let mut eval_csv = String::from("wavelength_nm,kind,target,achieved\n");
    let mut rows = Vec::new();
    for target in &targets {
        let (t, _) = outcome.stack.transmission(target.wavelength_nm)?;
        let kind = format!("{:?}", target.kind).to_lowercase();
        let _ = writeln!(
            eval_csv,
            "{},{kind},{},{}",
            fmt_float(target.wavelength_nm),
            fmt_float(target.value),
            fmt_float(t)
        );
        rows.push(vec![
            format!("{:.0}", target.wavelength_nm),
            kind,
            format!("{:.4}", target.value),
            format!("{:.4}", t),
        ]);
    }
    out.write_text("optimized_eval.csv", &eval_csv)?;

    let mut summary = format!(
        "objective {} after {} accepted steps, {} layers\n",
        fmt_float(outcome.objective),
        outcome.trace.len(),
        outcome.stack.layers.len()
    );
    summary.push_str(&aligned_table(
        &["wavelength_nm", "kind", "target", "achieved"],
        &rows,
    ));
    out.write_text("summary.txt", &summary)?;
    Ok(summary)
}

pub fn cmd_simulate(loaded: &LoadedScenario, out: &OutputContext) -> anyhow::Result<String> {
    let source = loaded
        .scenario
        .source
        .ok_or_else(|| anyhow!("scenario has no [source] section"))?;
    let channel = loaded
        .scenario
        .channel
        .ok_or_else(|| anyhow!("scenario has no [channel] section"))?;
    let section = loaded
        .scenario
        .simulate
        .as_ref()
        .ok_or_else(|| anyhow!("scenario has no [simulate] section"))?;
    let seed = loaded.require_seed()?;

    let stream = simulate_stream(&source, &channel, section.n_pulses, seed)?;
    let mut bytes = Vec::new();
    write_binary(&stream, &mut bytes)?;
    out.write_bytes("stream.tags", &bytes)?;
    if section.emit_csv {
        let mut csv = Vec::new();
        write_csv(&stream, &mut csv)?;
        out.write_bytes("stream.csv", &csv)?;
    }
    let counts = [
        stream
            .events
            .iter()
            .filter(|e| e.channel == pairsim::Channel::Signal)
            .count(),
        stream
            .events
            .iter()
            .filter(|e| e.channel == pairsim::Channel::Idler1)
            .count(),
        stream
            .events
            .iter()
            .filter(|e| e.channel == pairsim::Channel::Idler2)
            .count(),
    ];
    let summary = format!(
        "simulated {} pulses (seed {seed}): {} events (S {}, I1 {}, I2 {})\n",
        section.n_pulses,
        stream.events.len(),
        counts[0],
        counts[1],
        counts[2]
    );
    out.write_text("summary.txt", &summary)?;
    Ok(summary)
}

pub fn load_stream(path: &Path) -> anyhow::Result<TagStream> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    if bytes.starts_with(pairsim::TAGSTREAM_MAGIC) {
        Ok(read_binary(&mut bytes.as_slice())?)
    } else {
        Ok(read_csv(&mut bytes.as_slice())?)
    }
}

pub fn cmd_analyze(
    loaded: &LoadedScenario,
    out: &OutputContext,
    input: &Path,
) -> anyhow::Result<String> {
    let stream = load_stream(input)?;
    let config = match loaded.coincidence_config() {
        Ok(config) => config,
        // fall back to the stream's own repetition rate
        Err(_) if stream.header.repetition_rate_hz > 0.0 => {
            CoincidenceConfig::for_repetition((1e12 / stream.header.repetition_rate_hz) as i64)
        }
        Err(e) => return Err(e),
    };
    let summary = count(&stream, &config)?;
    let det_eff_idler = loaded
        .scenario
        .channel
        .map(|c| c.det_eff_i1)
        .unwrap_or(1.0);
    let report = render_metrics(&summary, det_eff_idler, out)?;
    if summary.empty_warning {
        Ok(format!("warning: empty stream, zero summary\n{report}"))
    } else {
        Ok(report)
    }
}

pub fn render_metrics(
    summary: &CountSummary,
    det_eff_idler: f64,
    out: &OutputContext,
) -> anyhow::Result<String> {
    let mut counts_csv = String::from(
        "duration_s,n_s,n_i1,n_i2,n_s_i1,n_s_i2,n_i1_i2,n_s_i1_i2,r_s_hz,r_i1_hz,r_i2_hz,r_s_i1_hz,r_s_i2_hz,r_i1_i2_hz,r_s_i1_i2_hz\n",
    );
    let _ = writeln!(
        counts_csv,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        fmt_float(summary.duration_s),
        summary.singles[0],
        summary.singles[1],
        summary.singles[2],
        summary.pairs_s_i1,
        summary.pairs_s_i2,
        summary.pairs_i1_i2,
        summary.triples,
        fmt_float(summary.r_s()),
        fmt_float(summary.r_i1()),
        fmt_float(summary.r_i2()),
        fmt_float(summary.r_s_i1()),
        fmt_float(summary.r_s_i2()),
        fmt_float(summary.r_i1_i2()),
        fmt_float(summary.r_triples())
    );
    out.write_text("counts.csv", &counts_csv)?;

    let empty = summary.empty_warning;
    let eta_h = if empty {
        f64::NAN
    } else {
        heralding_efficiency(summary, det_eff_idler)?
    };
    let g2_h = if empty { f64::NAN } else { heralded_g2(summary)? };
    let car1 = if empty {
        f64::NAN
    } else {
        car_rep(summary, 1).map(|c| c.as_f64()).unwrap_or(f64::NAN)
    };
    let car2 = if empty {
        f64::NAN
    } else {
        car_rep(summary, 2).map(|c| c.as_f64()).unwrap_or(f64::NAN)
    };
    let klyshko = if empty { None } else { Some(klyshko_infer(summary)?) };

    let mut metrics_csv =
        String::from("eta_h,g2_h,car_rep_1,car_rep_2,klyshko_eta_s,klyshko_eta_i,klyshko_pair_rate_hz\n");
    let _ = writeln!(
        metrics_csv,
        "{},{},{},{},{},{},{}",
        fmt_float(eta_h),
        fmt_float(g2_h),
        fmt_float(car1),
        fmt_float(car2),
        fmt_float(klyshko.map(|k| k.signal_arm_efficiency).unwrap_or(f64::NAN)),
        fmt_float(klyshko.map(|k| k.idler_arm_efficiency).unwrap_or(f64::NAN)),
        fmt_float(klyshko.map(|k| k.pair_rate_hz).unwrap_or(f64::NAN))
    );
    out.write_text("metrics.csv", &metrics_csv)?;

    let mut rows = vec![
        vec!["duration_s".into(), format!("{:.6}", summary.duration_s)],
        vec!["singles S".into(), summary.singles[0].to_string()],
        vec!["singles I1".into(), summary.singles[1].to_string()],
        vec!["singles I2".into(), summary.singles[2].to_string()],
        vec!["pairs S-I1".into(), summary.pairs_s_i1.to_string()],
        vec!["pairs S-I2".into(), summary.pairs_s_i2.to_string()],
        vec!["pairs I1-I2".into(), summary.pairs_i1_i2.to_string()],
        vec!["triples".into(), summary.triples.to_string()],
        vec!["eta_h".into(), format!("{eta_h:.4}")],
        vec!["g2_h".into(), format!("{g2_h:.4}")],
        vec!["car_rep(1)".into(), format!("{car1:.2}")],
        vec!["car_rep(2)".into(), format!("{car2:.2}")],
    ];
    for (m, n) in &summary.shifted_pairs {
        rows.push(vec![format!("shifted pairs m={m}"), n.to_string()]);
    }
    if eta_h > 1.0 {
        rows.push(vec![
            "warning".into(),
            "eta_h > 1 indicates pathological input".into(),
        ]);
    }
    let table = aligned_table(&["metric", "value"], &rows);
    out.write_text("summary.txt", &table)?;
    Ok(table)
}

pub fn cmd_sweep(loaded: &LoadedScenario, out: &OutputContext) -> anyhow::Result<String> {
    let source = loaded
        .scenario
        .source
        .ok_or_else(|| anyhow!("scenario has no [source] section"))?;
    let channel = loaded
        .scenario
        .channel
        .ok_or_else(|| anyhow!("scenario has no [channel] section"))?;
    let section = loaded
        .scenario
        .sweep
        .as_ref()
        .ok_or_else(|| anyhow!("scenario has no [sweep] section"))?;
    let seed = loaded.require_seed()?;
    let coincidence = loaded.coincidence_config()?;

    let config = match (&section.mu, &section.powers) {
        (Some(mu), None) => SweepConfig::from_mu_values(mu, section.n_pulses, seed),
        (None, Some(powers)) => {
            let kappa = section
                .kappa
                .ok_or_else(|| anyhow!("[sweep].kappa is required with powers"))?;
            SweepConfig::from_powers(powers, kappa, section.n_pulses, seed)?
        }
        _ => bail!("[sweep] needs exactly one of `mu` or `powers`"),
    };
    let rows = power_sweep(&source, &channel, &coincidence, &config)?;

    let mut csv = String::from(
        "power,mu,R_s,R_i1,R_i2,coincidences,eta_h,g2_h,car_rep_1,car_rep_2\n",
    );
    let mut table_rows = Vec::new();
    for row in &rows {
        let coincidence_rate = if row.summary.duration_s > 0.0 {
            (row.summary.pairs_s_i() as f64) / row.summary.duration_s
        } else {
            f64::NAN
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            row.power.map(fmt_float).unwrap_or_else(|| "nan".into()),
            fmt_float(row.mu),
            fmt_float(row.summary.r_s()),
            fmt_float(row.summary.r_i1()),
            fmt_float(row.summary.r_i2()),
            fmt_float(coincidence_rate),
            fmt_float(row.eta_h),
            fmt_float(row.g2_h),
            fmt_float(row.car_rep_1),
            fmt_float(row.car_rep_2)
        );
        table_rows.push(vec![
            format!("{:.4}", row.mu),
            format!("{:.1}", row.summary.r_s()),
            format!("{:.4}", row.eta_h),
            format!("{:.4}", row.g2_h),
            format!("{:.1}", row.car_rep_1),
            format!("{:.1}", row.car_rep_2),
        ]);
    }
    out.write_text("sweep.csv", &csv)?;
    let table = aligned_table(
        &["mu", "R_s_hz", "eta_h", "g2_h", "car_rep_1", "car_rep_2"],
        &table_rows,
    );
    out.write_text("summary.txt", &table)?;
    Ok(table)
}

/// The `analyze` subcommand applied to a freshly simulated stream,
/// used by `reproduce`.
pub fn simulate_then_analyze(
    loaded: &LoadedScenario,
    out: &OutputContext,
) -> anyhow::Result<String> {
    let simulate_out = out.subdir("stream")?;
    cmd_simulate(loaded, &simulate_out)?;
    let metrics_out = out.subdir("metrics")?;
    cmd_analyze(loaded, &metrics_out, &simulate_out.path("stream.tags"))
}
