use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ace_core::homomorphic::LifterSpec;
use ace_core::phantom::simulate;
use ace_core::rfm::{run_rfm, Method, RfmOptions, RfmRun};
use ace_core::RfFrame;
use rayon::prelude::*;

use crate::args::{CompareArgs, EstimateArgs, SimulateArgs, SweepArgs};
use crate::documents::{
    curves_csv, sweep_csv, CompareSummary, ResultDocument, Sidecar, SweepRow, SIDECAR_VERSION,
};
use crate::error::CliError;
use crate::rf_file::{decode_rf, encode_rf};

/// `<prefix>.<ext>` without replacing any dot already in the prefix.
fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialize");
    text.push('\n');
    text
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

/// RF path and sidecar path for an `--input` value given either as the
/// `.rf` file or as the bare prefix.
pub fn input_paths(input: &Path) -> (PathBuf, PathBuf) {
    if input.extension().is_some_and(|e| e == "rf") {
        (input.to_path_buf(), input.with_extension("json"))
    } else {
        (with_suffix(input, ".rf"), with_suffix(input, ".json"))
    }
}

pub fn write_frame(prefix: &Path, frame: &RfFrame, sidecar: &Sidecar) -> Result<(PathBuf, PathBuf), CliError> {
    let rf_path = with_suffix(prefix, ".rf");
    let json_path = with_suffix(prefix, ".json");
    let bytes = encode_rf(frame.num_lines(), frame.samples_per_line(), frame.samples())
        .map_err(|e| CliError::corrupt(&rf_path, e))?;
    write_file(&rf_path, &bytes)?;
    write_file(&json_path, to_json(sidecar).as_bytes())?;
    Ok((rf_path, json_path))
}

pub fn load_frame(input: &Path) -> Result<RfFrame, CliError> {
    let (rf_path, json_path) = input_paths(input);
    let bytes = fs::read(&rf_path).map_err(|e| CliError::io(&rf_path, e))?;
    let text = fs::read_to_string(&json_path).map_err(|e| CliError::io(&json_path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| CliError::corrupt(&json_path, e))?;
    if sidecar.format_version != SIDECAR_VERSION {
        return Err(CliError::corrupt(
            &json_path,
            format!("unsupported sidecar version {}", sidecar.format_version),
        ));
    }
    let (header, samples) = decode_rf(&bytes).map_err(|e| CliError::corrupt(&rf_path, e))?;
    if header.num_lines as usize != sidecar.scan.num_lines
        || header.samples_per_line as usize != sidecar.scan.samples_per_line
    {
        return Err(CliError::corrupt(
            &rf_path,
            format!(
                "header is {} x {} but the sidecar describes {} x {}",
                header.num_lines, header.samples_per_line, sidecar.scan.num_lines, sidecar.scan.samples_per_line
            ),
        ));
    }
    RfFrame::new(samples, sidecar.scan, sidecar.provenance).map_err(|e| CliError::corrupt(&json_path, e))
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = args.phantom.scan_config()?;
    let spec = args.phantom.phantom(args.phantom.seed)?;
    let effects = args.phantom.effects();
    let frame = simulate(&spec, &effects, &config).map_err(|e| CliError::Usage(e.to_string()))?;
    let sidecar = Sidecar {
        format_version: SIDECAR_VERSION,
        scan: config,
        phantom: Some(spec),
        effects,
        provenance: frame.provenance.clone(),
    };
    let (rf_path, json_path) = write_frame(&args.out, &frame, &sidecar)?;
    emit(
        out,
        &format!(
            "wrote {} ({} lines x {} samples) and {}\n",
            rf_path.display(),
            frame.num_lines(),
            frame.samples_per_line(),
            json_path.display()
        ),
    )
}

fn estimate_document(frame: &RfFrame, opts: &RfmOptions) -> Result<(ResultDocument, RfmRun), CliError> {
    let run = run_rfm(frame, opts)?;
    let doc = ResultDocument::new(&run.result, &run.curves, opts, &frame.provenance);
    Ok((doc, run))
}

pub fn cmd_estimate(args: &EstimateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let opts = args.estimator.options(args.method)?;
    let frame = load_frame(&args.input)?;
    let (doc, run) = estimate_document(&frame, &opts)?;
    if let Some(path) = &args.curves {
        write_file(path, curves_csv(&run.result, &run.curves).as_bytes())?;
    }
    match &args.out {
        Some(path) => {
            write_file(path, to_json(&doc).as_bytes())?;
            emit(out, &format!("{}\n", doc.summary_line()))
        }
        None => emit(out, &to_json(&doc)),
    }
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let baseline_opts = args.estimator.options(Method::Baseline)?;
    let improved_opts = args.estimator.options(Method::Improved)?;
    let frame = load_frame(&args.input)?;
    let (baseline, baseline_run) = estimate_document(&frame, &baseline_opts)?;
    let (improved, improved_run) = estimate_document(&frame, &improved_opts)?;
    let summary = CompareSummary::new(&baseline, &improved);
    if let Some(prefix) = &args.curves {
        write_file(
            &with_suffix(prefix, ".baseline.csv"),
            curves_csv(&baseline_run.result, &baseline_run.curves).as_bytes(),
        )?;
        write_file(
            &with_suffix(prefix, ".improved.csv"),
            curves_csv(&improved_run.result, &improved_run.curves).as_bytes(),
        )?;
    }
    match &args.out {
        Some(prefix) => {
            write_file(&with_suffix(prefix, ".baseline.json"), to_json(&baseline).as_bytes())?;
            write_file(&with_suffix(prefix, ".improved.json"), to_json(&improved).as_bytes())?;
            write_file(&with_suffix(prefix, ".summary.json"), to_json(&summary).as_bytes())?;
            let mut text = format!("{}\n{}\n", baseline.summary_line(), improved.summary_line());
            text.push_str(&format!("oscillation ratio (improved / baseline) = {:.4}\n", summary.oscillation_ratio));
            emit(out, &text)
        }
        None => emit(out, &to_json(&summary)),
    }
}

/// Rows in (seed, cutoff, method) order.
pub fn sweep_rows(args: &SweepArgs) -> Result<Vec<SweepRow>, CliError> {
    let config = args.phantom.scan_config()?;
    let effects = args.phantom.effects();
    let cutoffs = if args.cutoffs.is_empty() {
        vec![args
            .estimator
            .cutoff
            .unwrap_or_else(|| LifterSpec::default_for(args.estimator.window).cutoff())]
    } else {
        args.cutoffs.clone()
    };
    let lifters = cutoffs
        .iter()
        .map(|&c| LifterSpec::new(c).map_err(|e| CliError::Usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let baseline_opts = args.estimator.options(Method::Baseline)?;
    let improved_opts = args.estimator.options(Method::Improved)?;
    let truth = args.phantom.alpha;
    let last = args
        .phantom
        .seed
        .checked_add(args.count)
        .ok_or_else(|| CliError::Usage("seed range overflows".into()))?;
    let specs = (args.phantom.seed..last)
        .map(|seed| args.phantom.phantom(seed))
        .collect::<Result<Vec<_>, _>>()?;

    let per_seed: Vec<Vec<SweepRow>> = specs
        .par_iter()
        .map(|spec| {
            let frame = simulate(spec, &effects, &config).map_err(|e| CliError::Usage(e.to_string()))?;
            let baseline = run_rfm(&frame, &baseline_opts)?.result;
            let mut rows = Vec::with_capacity(2 * lifters.len());
            for lifter in &lifters {
                let opts = RfmOptions { lifter: Some(*lifter), ..improved_opts.clone() };
                let improved = run_rfm(&frame, &opts)?.result;
                for r in [&baseline, &improved] {
                    rows.push(SweepRow {
                        seed: spec.seed,
                        cutoff: lifter.cutoff(),
                        method: r.method,
                        alpha: r.aggregate_alpha_db_cm_mhz,
                        abs_error: (r.aggregate_alpha_db_cm_mhz - truth).abs(),
                        oscillation_metric: r.oscillation_metric,
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_, CliError>>()?;
    Ok(per_seed.concat())
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let csv = sweep_csv(&sweep_rows(args)?);
    match &args.out {
        Some(path) => write_file(path, csv.as_bytes()),
        None => emit(out, &csv),
    }
}
