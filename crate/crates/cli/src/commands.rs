use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use qmimo::frontend::{
    bernstein_approximate, check_binary_indexing, distance_sign_function, LabeledPartitionRd,
};
use qmimo::geometry::{adjudicate_theorem4, build_paraboloid_code, build_shattering_code, ParaboloidOptions};
use qmimo::rates::{allocate_and_bound_with, scenario1_baseline, AllocationOptions};
use qmimo::simulator::{highsnr_sweep, simulate_code, SweepTarget, TrialReport};
use qmimo::{ChannelModel, Family, RegionCode, Scenario};
use serde_json::json;

use crate::config::{pick, ExperimentConfig};
use crate::output::{join, write_atomic, Report};
use crate::{ApproxArgs, CliError, CountsArgs, HighsnrArgs, RatesArgs, SimulateArgs};

/// Settings shared by every subcommand after merging flags and config.
pub struct Ctx {
    pub out: PathBuf,
    pub seed: u64,
    pub timing: bool,
}

impl Ctx {
    fn elapsed(&self, start: Instant) -> u64 {
        if self.timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        }
    }
}

enum RateTarget {
    Baseline,
    Family(Family),
}

fn rate_target(token: &str) -> Result<(String, RateTarget), CliError> {
    if let Ok(s) = Scenario::from_str(token) {
        return Ok(match s {
            Scenario::I => ("I".into(), RateTarget::Baseline),
            other => (other.to_string(), RateTarget::Family(Family::from_scenario(other)?)),
        });
    }
    let f = Family::from_str(token)?;
    Ok((f.to_string(), RateTarget::Family(f)))
}

pub fn rates(args: &RatesArgs, cfg: &ExperimentConfig, ctx: &Ctx) -> Result<(), CliError> {
    let channel = cfg
        .channel(args.channel.as_deref(), args.gains.as_deref())?
        .ok_or_else(|| CliError::Config("rates needs a channel (--channel or --gains)".into()))?;
    let n_q = pick(args.nq, cfg.n_q, channel.n_r());
    let scenarios = pick(args.scenarios.clone(), cfg.scenarios.clone(), vec!["I".into(), "II".into(), "V".into()]);
    let powers = pick(args.powers.clone(), cfg.powers.clone(), vec![channel.power()]);
    let targets = scenarios.iter().map(|s| rate_target(s)).collect::<Result<Vec<_>, _>>()?;
    let mut opts = AllocationOptions::default();
    opts.thresholds.seed = ctx.seed;

    let mut report = Report::new("scenario,snr,n_q,nq_split,power_split,rate_bits,iterations,wall_ms");
    for &power in &powers {
        let ch = channel.with_power(power)?;
        let snr = power / ch.noise_var();
        for (name, target) in &targets {
            let start = Instant::now();
            let (nq_split, power_split, rate, iterations, detail) = match target {
                RateTarget::Baseline => {
                    let rate = scenario1_baseline(&ch, n_q)?;
                    (vec![1; ch.n_r()], vec![power; ch.n_t()], rate, 0, serde_json::Value::Null)
                }
                RateTarget::Family(f) => {
                    let res = allocate_and_bound_with(&ch, n_q, *f, &opts)?;
                    let detail = json!({ "subchannels": res.subchannels, "monotone": res.monotone });
                    (res.plan.nq_split, res.plan.power_split, res.rate_bits, res.iterations, detail)
                }
            };
            let wall_ms = ctx.elapsed(start);
            report.push(
                format!(
                    "{name},{snr},{n_q},{},{},{rate},{iterations},{wall_ms}",
                    join(&nq_split),
                    join(&power_split)
                ),
                json!({
                    "scenario": name,
                    "snr": snr,
                    "power": power,
                    "n_q": n_q,
                    "nq_split": nq_split,
                    "power_split": power_split,
                    "rate_bits": rate,
                    "iterations": iterations,
                    "wall_ms": wall_ms,
                    "detail": detail,
                })
                .to_string(),
            );
        }
    }
    report.write(&ctx.out)
}

fn identity_channel(dim: usize, power: f64) -> Result<ChannelModel, CliError> {
    Ok(ChannelModel::diagonal(&vec![1.0; dim], power)?)
}

fn push_trials(report: &mut Report, mut r: TrialReport, label: &str, ctx: &Ctx) {
    r.label = label.to_string();
    if !ctx.timing {
        r.wall_ms = 0;
    }
    report.push(r.csv_row(), r.json_line());
}

pub fn highsnr(args: &HighsnrArgs, cfg: &ExperimentConfig, ctx: &Ctx) -> Result<(), CliError> {
    let powers = pick(args.powers.clone(), cfg.powers.clone(), vec![1.0, 10.0, 100.0, 1e3, 1e4]);
    let trials = pick(args.trials, cfg.trials, 100_000);
    let rank = pick(args.rank, cfg.rank, 1);
    let n_q = pick(args.nq, cfg.n_q, 2);
    let degree = pick(args.degree, cfg.degree, 2);
    let code_path = args.code.clone().or_else(|| cfg.code.as_ref().map(|p| cfg.resolve(p)));
    let (label, code) = match code_path {
        Some(p) => ("code".to_string(), RegionCode::load(p)?),
        None => {
            let construction = pick(args.construction.clone(), cfg.construction.clone(), "paraboloid".into());
            match construction.as_str() {
                "paraboloid" => (format!("paraboloid-r{rank}-q{n_q}"), build_paraboloid_code(rank, n_q, ctx.seed)?),
                "shattering" => {
                    (format!("shattering-r{rank}-d{degree}-q{n_q}"), build_shattering_code(rank, degree, n_q, ctx.seed)?)
                }
                "fig1a" => ("fig1a".into(), RegionCode::figure1a()),
                "fig1b" => ("fig1b".into(), RegionCode::figure1b()),
                other => {
                    return Err(CliError::Config(format!(
                        "unknown construction '{other}' (paraboloid, shattering, fig1a, fig1b)"
                    )))
                }
            }
        }
    };
    let channel = identity_channel(code.dim(), powers[0])?;
    let reports = highsnr_sweep(&SweepTarget::Code(code), &channel, &powers, trials, ctx.seed)?;
    let mut report = Report::new(TrialReport::CSV_HEADER);
    for r in reports {
        push_trials(&mut report, r, &label, ctx);
    }
    report.write(&ctx.out)
}

pub fn simulate(args: &SimulateArgs, cfg: &ExperimentConfig, ctx: &Ctx) -> Result<(), CliError> {
    let trials = pick(args.trials, cfg.trials, 100_000);
    let power = args.power.or(cfg.power);
    let code_path = args.code.clone().or_else(|| cfg.code.as_ref().map(|p| cfg.resolve(p)));
    let fig = args.fig1.clone().or_else(|| cfg.fig1.clone());
    let (label, code) = match (code_path, fig) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either --fig1 or --code, not both".into())),
        (Some(p), None) => {
            let code = RegionCode::load(p)?;
            match power {
                Some(p) => ("code".to_string(), code.at_power(p)),
                None => ("code".to_string(), code),
            }
        }
        (None, fig) => {
            let base = match fig.as_deref().unwrap_or("b") {
                "a" => RegionCode::figure1a(),
                "b" => RegionCode::figure1b(),
                other => return Err(CliError::Config(format!("--fig1 must be 'a' or 'b', got '{other}'"))),
            };
            let p = power.unwrap_or(400.0);
            if !(p > 0.0) {
                return Err(CliError::Config("power must be positive".into()));
            }
            (format!("fig1{}", fig.as_deref().unwrap_or("b")), base.scaled(p.sqrt()))
        }
    };
    let channel = identity_channel(code.dim(), power.unwrap_or(400.0).max(f64::MIN_POSITIVE))?;
    let r = simulate_code(&code, &channel, trials, ctx.seed)?;
    let mut report = Report::new(TrialReport::CSV_HEADER);
    push_trials(&mut report, r, &label, ctx);
    report.write(&ctx.out)
}

pub fn counts(args: &CountsArgs, cfg: &ExperimentConfig, ctx: &Ctx) -> Result<(), CliError> {
    let rank_max = pick(args.rank_max, cfg.rank_max, 2);
    let nq_min = pick(args.nq_min, cfg.nq_min, 2);
    let nq_max = pick(args.nq_max, cfg.nq_max, 5);
    if rank_max == 0 || nq_min == 0 || nq_min > nq_max {
        return Err(CliError::Config("need rank-max ≥ 1 and 1 ≤ nq-min ≤ nq-max".into()));
    }
    let ranks: Vec<usize> = (1..=rank_max).collect();
    let nqs: Vec<usize> = (nq_min..=nq_max).collect();
    let samples = args.samples.or(cfg.samples).unwrap_or(1_000_000);
    let opts = ParaboloidOptions { samples: args.samples.or(cfg.samples), ..Default::default() };
    let rows = adjudicate_theorem4(&ranks, &nqs, samples, ctx.seed, &opts)?;

    let mut report = Report::new(
        "rank,n_q,printed,alpha,oracle,sampled,code_messages,printed_differs,beta_standard,beta_printed,total_cells,bounded_cells",
    );
    let mut md = String::from(
        "# Region counts on the lifted paraboloid\n\n\
         `printed` is `Σ_{i=0}^{r+1} C(n_q, i) − C(n_q−1, r)`; `α` is `2 Σ_{i=0}^{r} C(n_q−1, i)`; \
         `oracle` counts the cells met by the surface, traced exactly from the sphere arrangement the comparators cut on it; `sampled` counts the cells hit by independent uniform surface samples, which must be a subset; \
         bounded-cell columns compare `C(n_q−1, r+1)` and `C(n_q−1, r)` with the LP count in `ℝ^{r+1}`.\n\n\
         | rank | n_q | printed | α | oracle | sampled | code messages | oracle = α | printed ≠ α | C(n−1,d) | C(n−1,d−1) | cells | bounded cells |\n\
         |---:|---:|---:|---:|---:|---:|---:|:---:|:---:|---:|---:|---:|---:|\n",
    );
    let mut mismatches = Vec::new();
    for r in &rows {
        report.push(
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.rank,
                r.n_q,
                r.printed,
                r.alpha,
                r.oracle,
                r.sampled,
                r.code_messages,
                r.printed_differs,
                r.beta_standard,
                r.beta_printed,
                r.total_cells,
                r.bounded_cells
            ),
            serde_json::to_string(r).expect("serializable"),
        );
        let yes_no = |b: bool| if b { "yes" } else { "no" };
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            r.rank,
            r.n_q,
            r.printed,
            r.alpha,
            r.oracle,
            r.sampled,
            r.code_messages,
            yes_no(r.oracle_matches_alpha()),
            yes_no(r.printed_differs),
            r.beta_standard,
            r.beta_printed,
            r.total_cells,
            r.bounded_cells
        ));
        if r.printed_differs {
            mismatches.push(format!("(rank {}, n_q {}): printed {} vs α {}", r.rank, r.n_q, r.printed, r.alpha));
        }
    }
    let agree = rows.iter().filter(|r| r.oracle_matches_alpha()).count();
    md.push_str(&format!("\nOracle equals α at {agree} of {} entries.\n", rows.len()));
    if mismatches.is_empty() {
        md.push_str("The printed formula agrees with α at every entry.\n");
    } else {
        md.push_str("The printed formula differs from α at:\n\n");
        for m in &mismatches {
            md.push_str(&format!("- {m}\n"));
        }
    }
    report.write(&ctx.out)?;
    write_atomic(&ctx.out, "adjudication.md", &md)
}

pub fn approx(args: &ApproxArgs, cfg: &ExperimentConfig, ctx: &Ctx) -> Result<(), CliError> {
    let partitions = pick(args.partitions, cfg.partitions, 10);
    let samples = pick(args.samples, cfg.samples, 10_000);
    let degrees = pick(args.degrees.clone(), cfg.degrees.clone(), vec![2, 8, 32, 128]);
    let half_width = pick(args.half_width, cfg.half_width, 4.0);
    if !(half_width > 1.0) {
        return Err(CliError::Config("half-width must exceed 1 so the demo partition has three cells".into()));
    }

    let mut report = Report::new("kind,dim,seed,degree,tested,agreement,sup_error");
    for dim in 1..=2 {
        for k in 0..partitions {
            let seed = qmimo::exec::derive_seed(ctx.seed, (dim as u64) << 32 | k);
            let part = LabeledPartitionRd::random_rectangular(dim, 3, 5.0, seed)?;
            let (agree, tested) = check_binary_indexing(&part, samples, 5.0, seed)?;
            let frac = agree as f64 / tested as f64;
            report.push(
                format!("distance-sign,{dim},{seed},,{tested},{frac},"),
                json!({ "kind": "distance-sign", "dim": dim, "seed": seed, "tested": tested, "agreement": frac })
                    .to_string(),
            );
        }
    }

    // cells (−∞,−1), (−1,1), (1,∞) indexed 1, 2, 3; bit 0 is set only in the middle
    let part = LabeledPartitionRd::from_intervals(&[-1.0, 1.0], vec![1, 2, 3], 2)?;
    let f = |y: &[f64]| distance_sign_function(&part, 0, y).unwrap_or(0.0);
    let grid = 1024;
    for &degree in &degrees {
        let a = bernstein_approximate(&f, 1, half_width, degree, grid)?;
        report.push(
            format!("bernstein,1,,{degree},{grid},{},{}", a.sign_agreement, a.sup_error),
            json!({
                "kind": "bernstein",
                "dim": 1,
                "degree": degree,
                "half_width": half_width,
                "tested": grid,
                "agreement": a.sign_agreement,
                "sup_error": a.sup_error,
            })
            .to_string(),
        );
    }
    report.write(&ctx.out)
}
