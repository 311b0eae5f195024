use std::io::Write;
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mpir_core::audit::{self, Assignment};
use mpir_core::gf::smallest_prime_above;
use mpir_core::params::{build_m, compute_fg, int, lj_mj};
use mpir_core::{Answer, Params, ProbTable, RateReport, Rational, Scheme};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use mpir::table::{self, Format};
use mpir::{net, Server, StoreFile};

#[derive(Parser)]
#[command(name = "mpir", version, about = "Multi-message private information retrieval for N = D + 1 servers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print weights, matrices, the probability table and rates
    Params(Instance),
    /// Exact rate table for one demand size over a range of K
    RateTable {
        #[arg(long = "D")]
        d: usize,
        #[arg(long = "K-min")]
        k_min: usize,
        #[arg(long = "K-max")]
        k_max: usize,
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
    },
    /// Run in-memory rounds and report recovery and download statistics
    Simulate(Rounds),
    #[command(subcommand)]
    Audit(AuditCommand),
    #[command(subcommand)]
    Store(StoreCommand),
    /// Serve a store file over TCP
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 0)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Retrieve the demanded messages from N = D + 1 servers
    Retrieve {
        /// Comma-separated server addresses; the i-th is server i
        #[arg(long, value_delimiter = ',', required = true)]
        servers: Vec<String>,
        /// Comma-separated 1-based message indices
        #[arg(long, value_delimiter = ',', required = true)]
        demand: Vec<usize>,
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        q: Option<u64>,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Compare the recovered messages against this store file
        #[arg(long)]
        check: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Markdown,
}

#[derive(Args)]
struct Instance {
    #[arg(long = "K")]
    k: usize,
    #[arg(long = "D")]
    d: usize,
    /// Field prime; defaults to the smallest prime above D
    #[arg(long)]
    q: Option<u64>,
}

#[derive(Args)]
struct Rounds {
    #[command(flatten)]
    instance: Instance,
    #[arg(long, default_value_t = 8)]
    m: usize,
    #[arg(long, default_value_t = 10_000)]
    rounds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum AuditCommand {
    /// Exact check that every server's support distribution is independent of W
    Privacy {
        #[command(flatten)]
        instance: Instance,
        /// Perturb P_{i,j} by --delta and renormalize before auditing
        #[arg(long, value_name = "I,J", value_delimiter = ',')]
        mutate: Option<Vec<usize>>,
        #[arg(long, default_value = "1/1000")]
        delta: String,
        /// Send C_n to server n instead of a random permutation
        #[arg(long)]
        identity_permutation: bool,
    },
    /// Check that each sub-block covers every j-subset of W equally often
    Evenness {
        #[arg(long = "D")]
        d: usize,
    },
    /// Random rounds: all must recover, mean answers within 3 standard errors
    Recoverability(Rounds),
}

#[derive(Subcommand)]
enum StoreCommand {
    /// Write a store file of uniformly random messages
    Init {
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        q: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Instance {
    fn params(&self, m: usize) -> Result<Params> {
        let q = self.q.unwrap_or_else(|| smallest_prime_above(self.d as u64));
        Ok(Params::new(self.k, self.d, q, m)?)
    }
}

/// Fixed-point rendering of an exact value.
fn decimal(r: &Rational, places: u32) -> String {
    let neg = *r < int(0);
    let abs = if neg { -r.clone() } else { r.clone() };
    let n = (abs * int(10u64.pow(places))).round().to_integer();
    let digits = format!("{n:0>width$}", width = places as usize + 1);
    let (a, b) = digits.split_at(digits.len() - places as usize);
    format!("{}{a}.{b}", if neg { "-" } else { "" })
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn cmd_params(inst: &Instance) -> Result<()> {
    let params = inst.params(1)?;
    let d = params.d();
    let (l, m) = lj_mj(d);
    let (f, g) = compute_fg(&params);
    let table = ProbTable::build(&params)?;
    let report = RateReport::from_table(&table);
    println!("{params}");
    println!("l = ({})", join(&l));
    println!("m = ({})", join(&m));
    print!("M =\n{}", build_m(d));
    println!("F = ({})", join(&f));
    println!("G = ({})", join(&g));
    println!("j* = {}", table.j_star());
    println!("P (rows i = 0..={}, columns j = 1..={d}):", params.excess());
    for i in 0..=params.excess() {
        println!("  P_{i} = ({})", join(table.row(i)));
    }
    println!("expected answering servers = {}", report.expected_download_factor);
    println!("rate = {}", report.rate);
    println!("upper bound = {}", report.upper_bound);
    println!("gap = {}", report.gap);
    match &report.capacity_if_divisible {
        Some(c) => println!("capacity = {c}"),
        None => println!("capacity = unknown (D does not divide K)"),
    }
    Ok(())
}

fn run_rounds(r: &Rounds, audit_mode: bool) -> Result<bool> {
    let params = r.instance.params(r.m)?;
    let scheme = Scheme::new(&params)?;
    let mut rng = ChaCha20Rng::seed_from_u64(r.seed);
    let rep = audit::recoverability_check(&scheme, r.rounds, &mut rng)?;
    let mean = rep.mean_answers();
    let se2 = rep.variance() / int(rep.trials.max(1));
    let within = rep.within_standard_errors(3);
    let exact_rate = scheme.prob().rate();
    println!("{params}");
    println!("rounds = {}", rep.trials);
    println!("recovered = {}/{}", rep.successes, rep.trials);
    println!("mean answering servers = {} ({})", mean, decimal(&mean, 6));
    println!("expected answering servers = {} ({})", rep.expected_answers, decimal(&rep.expected_answers, 6));
    println!("standard error^2 = {}", decimal(&se2, 9));
    println!("within 3 standard errors = {within}");
    if rep.answers_sum > 0 {
        let empirical = int(params.d() as u64) / &mean;
        println!("empirical rate = {}", decimal(&empirical, 6));
    }
    println!("rate = {} ({})", exact_rate, decimal(&exact_rate, 6));
    println!("downloaded elements = {}", rep.download_elements);
    Ok(rep.all_recovered() && (!audit_mode || within))
}

fn cmd_privacy(inst: &Instance, mutate: Option<&[usize]>, delta: &str, identity: bool) -> Result<bool> {
    let params = inst.params(1)?;
    let scheme = Scheme::new(&params)?;
    let prob = match mutate {
        Some(&[i, j]) => {
            let delta: Rational = delta.parse().map_err(|e| anyhow::anyhow!("bad --delta {delta:?}: {e:?}"))?;
            if i > params.excess() || j == 0 || j > params.d() {
                bail!("P_{{{i},{j}}} is outside the table (i <= {}, 1 <= j <= {})", params.excess(), params.d());
            }
            println!("mutation: P_{{{i},{j}}} += {delta}, renormalized");
            scheme.prob().perturbed(i, j, &delta)?
        }
        Some(_) => bail!("--mutate takes I,J"),
        None => scheme.prob().clone(),
    };
    let assignment = if identity { Assignment::Identity } else { Assignment::UniformPermutation };
    let rep = audit::privacy_check(scheme.plan(), &prob, assignment)?;
    println!("{params}");
    println!("assignment = {}", if identity { "identity" } else { "uniform permutation" });
    println!("demand sets = {}", rep.demand_sets);
    println!("servers = {}", rep.servers);
    println!("max total variation = {}", rep.max_tv);
    println!("violations = {}", rep.violation_count);
    for v in &rep.violations {
        println!(
            "  server {} support {}: P = {} under {} but {} under {}",
            v.server, v.support, v.reference_prob, v.reference, v.prob, v.demand
        );
    }
    println!("privacy: {}", if rep.passed() { "PASS" } else { "FAIL" });
    Ok(rep.passed())
}

fn cmd_evenness(d: usize) -> Result<bool> {
    let records = audit::evenness_audit(d)?;
    let mut ok = true;
    for r in &records {
        ok &= r.even;
        println!(
            "j = {}: l = {}, m = {}, lex-first {}, collection {} [{}]",
            r.j,
            r.l,
            r.m,
            if r.lex_first_even { "even" } else { "NOT even (replaced)" },
            join(&r.collection),
            if r.even { "PASS" } else { "FAIL" }
        );
    }
    Ok(ok)
}

fn cmd_serve(store: &PathBuf, host: &str, port: u16) -> Result<()> {
    let file = StoreFile::load(store).with_context(|| format!("loading {}", store.display()))?;
    let listener = TcpListener::bind((host, port)).with_context(|| format!("binding {host}:{port}"))?;
    println!("listening on {}", listener.local_addr()?);
    std::io::stdout().flush()?;
    Server::new(file.store).run(listener)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_retrieve(
    servers: &[String],
    demand: &[usize],
    k: usize,
    q: Option<u64>,
    m: usize,
    seed: u64,
    check: Option<&PathBuf>,
) -> Result<bool> {
    let d = demand.len();
    let q = q.unwrap_or_else(|| smallest_prime_above(d as u64));
    let params = Params::new(k, d, q, m)?;
    let scheme = Scheme::new(&params)?;
    let w = scheme.demand(demand.iter().copied())?;
    let r = net::retrieve(&scheme, servers, &w, seed)?;
    let t = &r.transcript;
    println!("{params}");
    println!("demand = {}", t.demand);
    println!("row = {}", t.query_set.row);
    println!("permutation = ({})", join(&t.query_set.permutation));
    for (s, a) in t.answers.iter().enumerate() {
        match a {
            Answer::Empty => println!("server {s}: empty"),
            Answer::Combination(x) => println!("server {s}: ({})", join(x)),
        }
    }
    for (&idx, x) in t.demand.members().iter().zip(&t.recovered) {
        println!("X_{idx} = ({})", join(x));
    }
    println!("downloaded bytes = {}", r.downloaded_bytes);
    match check {
        Some(path) => {
            let file = StoreFile::load(path).with_context(|| format!("loading {}", path.display()))?;
            let ok = t.matches(&file.store);
            println!("check: {}", if ok { "PASS" } else { "FAIL" });
            Ok(ok)
        }
        None => Ok(true),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Params(inst) => cmd_params(&inst).map(|_| true),
        Command::RateTable { d, k_min, k_max, format } => {
            let rows = table::rate_table(d, k_min, k_max)?;
            let format = match format {
                TableFormat::Csv => Format::Csv,
                TableFormat::Markdown => Format::Markdown,
            };
            print!("{}", table::render(&rows, format));
            Ok(true)
        }
        Command::Simulate(r) => run_rounds(&r, false),
        Command::Audit(AuditCommand::Privacy { instance, mutate, delta, identity_permutation }) => {
            cmd_privacy(&instance, mutate.as_deref(), &delta, identity_permutation)
        }
        Command::Audit(AuditCommand::Evenness { d }) => cmd_evenness(d),
        Command::Audit(AuditCommand::Recoverability(r)) => run_rounds(&r, true),
        Command::Store(StoreCommand::Init { k, m, q, seed, out }) => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let file = StoreFile::random(q, k, m, &mut rng)?;
            file.save(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} (q = {q}, K = {k}, m = {m})", out.display());
            Ok(true)
        }
        Command::Serve { store, port, host } => cmd_serve(&store, &host, port).map(|_| true),
        Command::Retrieve { servers, demand, k, q, m, seed, check } => {
            cmd_retrieve(&servers, &demand, k, q, m, seed, check.as_ref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
