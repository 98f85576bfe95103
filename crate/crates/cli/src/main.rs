use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use btl::acceptance;
use btl::pipeline::{self, RunArtifacts};
use btl::scenario::{self, BuiltScenario, Overrides, Scenario, Stage};
use btl_core::aiset;
use btl_core::classify::TypeTag;
use btl_core::group::GroupError;

/// Desk-scale analysis of nonsingular Bernoulli shifts: nonsingularity and
/// conservativeness criteria, Krieger-type classification, almost-invariant
/// set constructions and Monte Carlo density-ratio sampling.
#[derive(Parser)]
#[command(name = "btl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the enumeration radius.
    #[arg(long)]
    radius: Option<u32>,
    /// Override the Monte Carlo sample count.
    #[arg(long)]
    mc_samples: Option<u64>,
    /// Directory for JSON/CSV artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print machine-readable JSON instead of the human summary.
    #[arg(long)]
    json: bool,
    /// Exit with status 4 when the final verdict is Unknown.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run nonsingularity, conservativeness and classification.
    Classify(CommonArgs),
    /// Run the Monte Carlo stage and export samples.
    Simulate(CommonArgs),
    /// Build the scenario's almost-invariant set and export its membership table.
    ConstructAiSet(CommonArgs),
    /// Check the closed sphere-count formulas against exhaustive enumeration.
    VerifyCounts(CommonArgs),
    /// Run the acceptance suite and print one line per criterion.
    VerifyPaper {
        #[arg(long)]
        json: bool,
    },
    /// Run the full pipeline and emit the report.
    Report(CommonArgs),
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_UNKNOWN_STRICT: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Classify(args) => with_built(&args, &[Stage::Nonsingularity, Stage::Conservativeness, Stage::Classification], cmd_classify),
        Command::Simulate(args) => with_built(
            &args,
            &[Stage::Nonsingularity, Stage::Conservativeness, Stage::Classification, Stage::Mc],
            cmd_simulate,
        ),
        Command::ConstructAiSet(args) => with_built(&args, &[], cmd_construct_ai_set),
        Command::VerifyCounts(args) => with_built(&args, &[], cmd_verify_counts),
        Command::VerifyPaper { json } => cmd_verify_paper(json),
        Command::Report(args) => with_built(
            &args,
            &[Stage::Nonsingularity, Stage::Conservativeness, Stage::Classification, Stage::Mc],
            cmd_report,
        ),
    };
    ExitCode::from(code)
}

fn with_built(
    args: &CommonArgs,
    stage_override: &[Stage],
    handler: fn(&CommonArgs, &BuiltScenario) -> u8,
) -> u8 {
    let text = match std::fs::read_to_string(&args.scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read scenario {}: {e}", args.scenario.display());
            return EXIT_VALIDATION;
        }
    };
    let mut parsed = match Scenario::from_toml(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_VALIDATION;
        }
    };
    if !stage_override.is_empty() {
        parsed.run.stages = stage_override.to_vec();
        // MC without a declared seed is fine when the stage list drops it.
        if !parsed.run.stages.contains(&Stage::Mc) && parsed.run.seed.is_none() {
            parsed.run.seed = Some(0);
        }
    }
    let overrides =
        Overrides { seed: args.seed, radius: args.radius, mc_samples: args.mc_samples };
    let built = match scenario::build(parsed, &overrides) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_VALIDATION;
        }
    };
    handler(args, &built)
}

fn run_pipeline(built: &BuiltScenario) -> Result<RunArtifacts, u8> {
    match pipeline::run(built) {
        Ok(artifacts) => {
            if artifacts.report.incomplete {
                eprintln!("warning: enumeration budget exhausted; report flagged incomplete");
            }
            Ok(artifacts)
        }
        Err(pipeline::PipelineError::Group(GroupError::BudgetExceeded {
            requested,
            attainable,
            budget,
        })) => {
            eprintln!(
                "budget overrun: radius {requested} needs more than {budget} elements (attainable {attainable})"
            );
            Err(EXIT_BUDGET)
        }
        Err(e) => {
            eprintln!("pipeline failed: {e}");
            Err(EXIT_VALIDATION)
        }
    }
}

fn verdict_exit(args: &CommonArgs, artifacts: &RunArtifacts) -> u8 {
    if artifacts.report.incomplete {
        return EXIT_BUDGET;
    }
    if args.strict {
        let unknown = artifacts
            .report
            .classification
            .as_ref()
            .map(|v| v.tag == TypeTag::Unknown)
            .unwrap_or(true);
        if unknown {
            return EXIT_UNKNOWN_STRICT;
        }
    }
    0
}

fn cmd_classify(args: &CommonArgs, built: &BuiltScenario) -> u8 {
    let artifacts = match run_pipeline(built) {
        Ok(a) => a,
        Err(code) => return code,
    };
    if args.json {
        println!("{}", artifacts.report.full_json());
    } else {
        print_human_summary(&artifacts);
    }
    if let Some(dir) = &args.out {
        if let Err(e) = write_report_artifacts(dir, &artifacts) {
            eprintln!("cannot write artifacts: {e}");
            return EXIT_VALIDATION;
        }
    }
    verdict_exit(args, &artifacts)
}

fn cmd_simulate(args: &CommonArgs, built: &BuiltScenario) -> u8 {
    let artifacts = match run_pipeline(built) {
        Ok(a) => a,
        Err(code) => return code,
    };
    match &artifacts.report.mc {
        Some(stage) => {
            if args.json {
                println!("{}", serde_json::to_string_pretty(stage).expect("stage serializes"));
            } else {
                println!(
                    "{} certified / {} truncated samples, fit {:?}",
                    stage.report.certified_samples, stage.report.truncated_samples, stage.report.fit
                );
            }
        }
        None => {
            eprintln!("Monte Carlo stage did not run");
            return EXIT_BUDGET;
        }
    }
    if let Some(dir) = &args.out {
        if let Err(e) = write_samples_csv(dir, &artifacts) {
            eprintln!("cannot write samples: {e}");
            return EXIT_VALIDATION;
        }
    }
    verdict_exit(args, &artifacts)
}

fn cmd_construct_ai_set(args: &CommonArgs, built: &BuiltScenario) -> u8 {
    let group = &built.group;
    let wset = match built.profile.two_value_data() {
        Some((w, _, _, _)) => w.clone(),
        None => match group.family_name() {
            "lattice" => btl_core::aiset::AlmostInvariantSet::half_line(),
            "chain" => btl_core::aiset::AlmostInvariantSet::lf_union_even(),
            "afp" => btl_core::aiset::AlmostInvariantSet::afp_ends(),
            _ => btl_core::aiset::AlmostInvariantSet::hnn_ends(),
        },
    };
    let radius = built.radius.min(scenario::default_radius(group));
    let ball = match group.enumerate_ball(radius) {
        Ok(b) => b,
        Err(GroupError::BudgetExceeded { requested, attainable, budget }) => {
            eprintln!("budget overrun: radius {requested} exceeds budget {budget} (attainable {attainable})");
            return EXIT_BUDGET;
        }
        Err(e) => {
            eprintln!("{e}");
            return EXIT_VALIDATION;
        }
    };
    let mut members = 0usize;
    let mut rows = Vec::new();
    for h in &ball {
        let inside = wset.contains(group, h).unwrap_or(false);
        members += inside as usize;
        rows.push((group.element_label(h), inside));
    }
    println!(
        "construction {} on {}: {members} of {} ball elements inside",
        wset.construction_tag(),
        group.family_name(),
        ball.len()
    );
    for g in group.generators() {
        match btl_core::classify::omega_w(group, &wset, &g) {
            Ok(flow) => println!("  boundary flow at {} = {flow}", group.element_label(&g)),
            Err(e) => println!("  boundary flow at {} unavailable: {e}", group.element_label(&g)),
        }
    }
    if let Ok(bound) = aiset::kappa_bound(group) {
        println!("  kappa threshold {bound:.6}");
    }
    if let Some(dir) = &args.out {
        if let Err(e) = write_membership_csv(dir, &rows) {
            eprintln!("cannot write membership table: {e}");
            return EXIT_VALIDATION;
        }
    }
    0
}

fn cmd_verify_counts(_args: &CommonArgs, built: &BuiltScenario) -> u8 {
    let group = &built.group;
    let max_n = built.radius.min(5);
    if group.sphere_count(1).is_err() {
        eprintln!("sphere-count formulas apply to amalgams and HNN extensions");
        return EXIT_VALIDATION;
    }
    let mut all_ok = true;
    println!("n  formula  enumerated  match");
    for n in 1..=max_n {
        let formula = match group.sphere_count(n) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("{e}");
                return EXIT_VALIDATION;
            }
        };
        let enumerated = match group.sphere(n) {
            Ok(v) => v.len() as u64,
            Err(GroupError::BudgetExceeded { .. }) => {
                eprintln!("budget exhausted at n = {n}");
                return EXIT_BUDGET;
            }
            Err(e) => {
                eprintln!("{e}");
                return EXIT_VALIDATION;
            }
        };
        let ok = formula == enumerated;
        all_ok &= ok;
        println!("{n}  {formula}  {enumerated}  {}", if ok { "yes" } else { "NO" });
    }
    if all_ok {
        0
    } else {
        1
    }
}

fn cmd_verify_paper(json: bool) -> u8 {
    let rows = acceptance::run_suite();
    if json {
        println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
    } else {
        for row in &rows {
            println!("{}", row.render());
        }
    }
    if rows.iter().all(|r| r.pass) {
        0
    } else {
        1
    }
}

fn cmd_report(args: &CommonArgs, built: &BuiltScenario) -> u8 {
    let artifacts = match run_pipeline(built) {
        Ok(a) => a,
        Err(code) => return code,
    };
    if args.json {
        println!("{}", artifacts.report.full_json());
    } else {
        print_human_summary(&artifacts);
    }
    if let Some(dir) = &args.out {
        if let Err(e) = write_report_artifacts(dir, &artifacts) {
            eprintln!("cannot write artifacts: {e}");
            return EXIT_VALIDATION;
        }
        if let Err(e) = write_samples_csv(dir, &artifacts) {
            eprintln!("cannot write samples: {e}");
            return EXIT_VALIDATION;
        }
    }
    verdict_exit(args, &artifacts)
}

fn print_human_summary(artifacts: &RunArtifacts) {
    let report = &artifacts.report;
    println!("group: {} ({} ends)", report.group.family, report.group.ends);
    println!("profile: {}", report.profile);
    if let Some(stage) = &report.nonsingularity {
        println!(
            "nonsingularity: {:?} over {} generators; nonatomicity {:?} (partial {:.6})",
            stage.verdict,
            stage.per_generator.len(),
            stage.nonatomicity,
            stage.nonatomicity_partial
        );
    }
    if let Some(v) = &report.conservativeness {
        println!("conservativeness: {:?}", v.tag);
        for e in &v.evidence {
            println!("  [{}] {} -> {}", e.criterion, e.inputs, e.outcome);
        }
    }
    if let Some(v) = &report.classification {
        println!("type: {:?} (stable {})", v.tag, pipeline::stable_label(&v.stable));
        for e in &v.evidence {
            println!("  [{}] {} -> {}", e.criterion, e.inputs, e.outcome);
        }
    }
    if let Some(stage) = &report.mc {
        println!(
            "mc: {} certified / {} truncated samples, fit {:?}, agreement {:?}",
            stage.report.certified_samples,
            stage.report.truncated_samples,
            stage.report.fit,
            stage.lattice_agreement
        );
    }
    if report.incomplete {
        println!("NOTE: report incomplete (budget overruns)");
    }
}

fn write_report_artifacts(dir: &Path, artifacts: &RunArtifacts) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), artifacts.report.full_json())?;
    let mut writer = csv::Writer::from_path(dir.join("cocycle_rows.csv"))?;
    writer.write_record(["g", "norm_sq_partial", "norm_sq_exact", "kakutani_partial", "verdict"])?;
    for row in &artifacts.cocycle_rows {
        writer.write_record([
            row.g.clone(),
            format!("{}", row.norm_sq_partial),
            row.norm_sq_exact.map(|v| v.to_string()).unwrap_or_default(),
            format!("{}", row.partial),
            format!("{:?}", row.verdict),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn write_samples_csv(dir: &Path, artifacts: &RunArtifacts) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut writer = csv::Writer::from_path(dir.join("rn_samples.csv"))?;
    writer.write_record(["g", "log_rn", "truncated", "seed"])?;
    for s in &artifacts.samples {
        writer.write_record([
            s.g_label.clone(),
            format!("{}", s.log_rn),
            format!("{}", s.truncated),
            format!("{}", s.seed),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn write_membership_csv(dir: &Path, rows: &[(String, bool)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut writer = csv::Writer::from_path(dir.join("membership.csv"))?;
    writer.write_record(["g", "in_wset"])?;
    for (label, inside) in rows {
        writer.write_record([label.clone(), inside.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}
