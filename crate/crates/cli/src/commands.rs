use std::path::Path;

use qreg_core::conv::convolve_with;
use qreg_core::io::{format_f64, read_bank, read_signal, read_trajectory, write_signal, SignalFormat};
use qreg_core::pd::regulariser_value;
use qreg_core::{certify, solve_reconstruction, BallConstraint, Extent, PDConfig, SignalSource};

use crate::{Failure, ReconstructArgs, SynthArgs};

fn format_for(path: &Path, explicit: Option<crate::FormatArg>) -> Result<SignalFormat, Failure> {
    match explicit {
        Some(f) => Ok(f.into()),
        None => SignalFormat::from_path(path).map_err(|e| Failure::Usage(e.to_string())),
    }
}

/// The inline table describing the requested generator.
fn synth_source(a: &SynthArgs) -> Result<SignalSource, Failure> {
    let mut fields = vec![format!("kind = {:?}", a.kind)];
    let mut push = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            fields.push(format!("{key} = {v}"));
        }
    };
    let noise = a.kind == "noise";
    push(if noise { "rows" } else { "length" }, a.m.map(|m| m.to_string()));
    push("rows", a.rows.map(|v| v.to_string()));
    push("cols", a.cols.map(|v| v.to_string()));
    push("start", a.start.clone());
    push("end", a.end.clone());
    push("height", a.height.clone());
    push("orientation", a.orientation.as_ref().map(|o| format!("{o:?}")));
    push("thickness", a.thickness.clone());
    push("spacing", a.spacing.clone());
    push("angle", a.angle.clone());
    push("radius", a.radius.clone());
    push("center", a.center.as_ref().map(|c| format!("[{c}]")));
    push("amplitude", a.amplitude.clone());
    if noise {
        push("sigma", Some(a.sigma.unwrap_or(1.0).to_string()));
        push("seed", Some(a.seed.to_string()));
    }
    if let Some(p) = &a.params {
        fields.push(p.clone());
    }
    let source = SignalSource::parse_inline(&fields.join(", ")).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(match a.sigma {
        Some(sigma) if !noise => SignalSource::Noisy {
            signal: Box::new(source),
            sigma,
            seed: a.seed,
        },
        _ => source,
    })
}

pub fn synth(a: &SynthArgs) -> Result<(), Failure> {
    let source = synth_source(a)?;
    let format = format_for(&a.out, a.format)?;
    let u = source.build(Path::new(".")).map_err(|e| Failure::Usage(e.to_string()))?;
    write_signal(&a.out, &u, format)?;
    println!("wrote {} ({})", a.out.display(), u.shape());
    Ok(())
}

pub fn reconstruct(a: &ReconstructArgs) -> Result<(), Failure> {
    let f = read_signal(&a.input, format_for(&a.input, None)?)?;
    let bank = read_bank(&a.bank)?.bank;
    let ball = BallConstraint::noise_level(f.clone(), a.eta, a.sigma)?;
    let extent: Extent = a.extent.into();
    let cfg = PDConfig {
        max_iters: a.max_iters,
        gap_tol: a.gap_tol,
    };
    let rec = solve_reconstruction(&ball, &bank, extent, &cfg)?;
    let dist = rec.signal.distance(&f);
    println!("J(u; h)          {}", format_f64(rec.objective));
    println!("J(f; h)          {}", format_f64(rec.initial_objective));
    println!("J(u) <= J(f)     {}", rec.objective <= rec.initial_objective);
    println!("||u - f||        {}", format_f64(dist));
    println!("radius           {}", format_f64(ball.radius()));
    println!("feasibility      {}", format_f64(dist - ball.radius()));
    println!("iterations       {} (converged: {})", rec.iterations, rec.converged);
    if let Some(out) = &a.out {
        write_signal(out, &rec.signal, format_for(out, None)?)?;
    }
    Ok(())
}

pub fn evaluate(a: &crate::EvaluateArgs) -> Result<(), Failure> {
    let u = read_signal(&a.signal, format_for(&a.signal, None)?)?;
    let bank = read_bank(&a.bank)?.bank;
    let full = regulariser_value(&u, &bank, Extent::Full)?;
    // A kernel larger than the signal has no interior.
    let interior = if bank.filters().iter().all(|h| convolve_with(&u, h, Extent::Valid).is_ok()) {
        regulariser_value(&u, &bank, Extent::Valid)?
    } else {
        0.0
    };
    println!("J(u; h)          {}", format_f64(full));
    println!("interior         {}", format_f64(interior));
    println!("boundary         {}", format_f64(full - interior));
    for (k, h) in bank.filters().iter().enumerate() {
        println!("filter {}         {}", k + 1, format_f64(qreg_core::j_value(&u, h)));
    }
    Ok(())
}

pub fn verify(path: &Path) -> Result<(), Failure> {
    let traj = read_trajectory(path)?;
    let report = certify(&traj);
    print!("{}", crate::experiment::describe_certification(&report));
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Certification(path.display().to_string()))
    }
}
