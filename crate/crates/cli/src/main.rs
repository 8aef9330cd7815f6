use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use ppdt::client::Client;
use ppdt::compare::CompareMode;
use ppdt::harness::{self, synth, BenchConfig, Topology, TopologyOptions};
use ppdt::he::{ClientKeys, ProtocolParams};
use ppdt::levelsite::{LevelSite, SiteConfig};
use ppdt::net::{DelayedNetwork, MemNetwork, Network, TcpNetwork};
use ppdt::tree::{depth_stats, partition_and_encrypt, TreeModel};
use ppdt::wire::{self, Message};

use ppdt_cli::config::{self, SiteFile};
use ppdt_cli::error::CliError;
use ppdt_cli::{files, input};

#[derive(Parser)]
#[command(name = "ppdt", version, about = "Privacy-preserving decision tree inference over a chain of level-sites")]
struct Cli {
    /// Log protocol progress to stderr. Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the client's Paillier and DGK key pairs.
    Keygen(KeygenArgs),
    /// Split a tree into encrypted per-level slices.
    Partition(PartitionArgs),
    /// Install key material and slices on running level-sites.
    Deploy(DeployArgs),
    /// Run one level-site daemon.
    Levelsite(LevelsiteArgs),
    /// Classify feature vectors against a deployed tree.
    Classify(ClassifyArgs),
    /// Classify in plaintext and print the label and termination level.
    Oracle(OracleArgs),
    /// Termination depth statistics of a tree over a dataset.
    DepthStats(DepthStatsArgs),
    /// Latency per termination level with an injected hop delay.
    Bench(BenchArgs),
    /// Exhaustive comparison check over all pairs of small values.
    ProtocolTest(ProtocolTestArgs),
}

#[derive(clap::Args)]
struct KeygenArgs {
    /// Directory for client.key and client.pub.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Bit length of attribute values.
    #[arg(long, default_value_t = 32)]
    t: u32,
    #[arg(long, default_value_t = 40)]
    kappa: u32,
    /// Modulus size for both schemes.
    #[arg(long, default_value_t = 2048)]
    key_bits: u32,
    /// Bit length of the share blinder.
    #[arg(long, default_value_t = 32)]
    tau: u32,
}

#[derive(clap::Args)]
struct PartitionArgs {
    #[arg(long)]
    tree: PathBuf,
    /// The client's public key file.
    #[arg(long = "pub")]
    public: PathBuf,
    /// Receives slice-<level>.bin and schema.json.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(clap::Args)]
struct DeployArgs {
    #[arg(long = "pub")]
    public: PathBuf,
    /// Directory holding slice-<level>.bin files.
    #[arg(long, default_value = ".")]
    slices: PathBuf,
    /// Level-site endpoints in level order, comma separated.
    #[arg(long, env = "PPDT_ENDPOINTS", value_delimiter = ',', required = true)]
    endpoints: Vec<String>,
}

#[derive(clap::Args)]
struct LevelsiteArgs {
    /// TOML configuration; flags override its values.
    #[arg(long, env = "PPDT_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "PPDT_LEVEL")]
    level: Option<usize>,
    #[arg(long, env = "PPDT_LISTEN")]
    listen: Option<String>,
    #[arg(long, env = "PPDT_DOWNSTREAM")]
    downstream: Option<String>,
    #[arg(long, env = "PPDT_PAD_MIN_MS")]
    pad_min_ms: Option<u64>,
    #[arg(long, env = "PPDT_PAD_MAX_MS")]
    pad_max_ms: Option<u64>,
    #[arg(long, env = "PPDT_BOGUS_CONTINUATION", num_args = 0..=1, default_missing_value = "true")]
    bogus_continuation: Option<bool>,
    /// KEY_MATERIAL file to install before serving.
    #[arg(long = "pub")]
    public: Option<PathBuf>,
    /// SETUP file to install before serving.
    #[arg(long)]
    slice: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ClassifyArgs {
    /// Private key file. Optional with --simulate.
    #[arg(long)]
    key: Option<PathBuf>,
    /// schema.json written by partition.
    #[arg(long, conflicts_with = "tree")]
    schema: Option<PathBuf>,
    /// Endpoint of level 0.
    #[arg(long, env = "PPDT_LEVEL0", conflicts_with = "simulate")]
    level0: Option<String>,
    /// Where level-sites reach the client.
    #[arg(long, env = "PPDT_CLIENT_LISTEN", default_value = "127.0.0.1:0")]
    listen: String,
    /// One feature vector as a JSON object of attribute name to value.
    #[arg(long, conflicts_with = "csv")]
    input: Option<String>,
    /// A dataset, one vector per row.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Run every role in this process over in-memory channels.
    #[arg(long, requires = "tree")]
    simulate: bool,
    /// Plaintext tree for --simulate.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Feature bit length for keys generated by --simulate.
    #[arg(long, default_value_t = 32)]
    t: u32,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
}

#[derive(clap::Args)]
struct OracleArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long, default_value_t = 32)]
    t: u32,
    #[arg(long, conflicts_with = "csv")]
    input: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(clap::Args)]
struct DepthStatsArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, default_value_t = 32)]
    t: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum Transport {
    /// In-process channels.
    Sim,
    /// Loopback TCP.
    Tcp,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Transport::Sim)]
    network: Transport,
    /// Tree to benchmark. Defaults to a spine tree with a leaf on every level.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Levels of the generated spine tree.
    #[arg(long, default_value_t = 13)]
    depth: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,4,9,12")]
    levels: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 25)]
    hop_delay_ms: u64,
    #[arg(long)]
    bogus: bool,
    #[arg(long, default_value_t = 8)]
    t: u32,
    #[arg(long, default_value_t = 512)]
    key_bits: u32,
    /// Per-query records as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Numeric,
    Equality,
    Both,
}

#[derive(clap::Args)]
struct ProtocolTestArgs {
    #[arg(long, default_value_t = 4)]
    t: u32,
    #[arg(long, default_value_t = 512)]
    key_bits: u32,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Keygen(a) => keygen(a),
        Command::Partition(a) => partition(a),
        Command::Deploy(a) => deploy(a),
        Command::Levelsite(a) => levelsite(a),
        Command::Classify(a) => classify(a),
        Command::Oracle(a) => oracle(a),
        Command::DepthStats(a) => depth_stats_cmd(a),
        Command::Bench(a) => bench(a),
        Command::ProtocolTest(a) => protocol_test(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ppdt: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}

fn generate(params: ProtocolParams) -> Result<(ClientKeys, Duration), CliError> {
    let start = Instant::now();
    let keys = ClientKeys::generate(params).map_err(|e| CliError::Parameter(e.to_string()))?;
    Ok((keys, start.elapsed()))
}

fn testing_params(t: u32, key_bits: u32) -> ProtocolParams {
    ProtocolParams { paillier_bits: key_bits, dgk_bits: key_bits, ..ProtocolParams::testing(t) }
}

fn keygen(a: KeygenArgs) -> Result<(), CliError> {
    let params = ProtocolParams {
        t: a.t,
        kappa: a.kappa,
        paillier_bits: a.key_bits,
        dgk_bits: a.key_bits,
        tau: a.tau,
        ..ProtocolParams::default()
    };
    let (keys, took) = generate(params)?;
    let public = keys.public();
    let frame = wire::encode(&Message::KeyMaterial(public.clone()));
    files::write(&a.out_dir.join("client.key"), &keys.to_private_bytes())?;
    files::write(&a.out_dir.join("client.pub"), &frame)?;
    println!("fingerprint {}", public.fingerprint());
    println!("keygen {:.3} s", took.as_secs_f64());
    Ok(())
}

fn partition(a: PartitionArgs) -> Result<(), CliError> {
    let public = files::public_keys(&a.public)?;
    let model = files::tree(&a.tree, public.params.t)?;
    let slices = partition_and_encrypt(&model, &public, &public.params)?;
    for slice in &slices {
        let frame = wire::encode(&Message::Setup(slice.clone()));
        files::write(&a.out_dir.join(files::slice_name(slice.level)), &frame)?;
    }
    let schema = serde_json::to_string_pretty(&model.schema).expect("schema serializes");
    files::write(&a.out_dir.join("schema.json"), schema.as_bytes())?;
    println!("{} slices", slices.len());
    Ok(())
}

fn deploy(a: DeployArgs) -> Result<(), CliError> {
    let public = files::public_keys(&a.public)?;
    let mut slices = Vec::new();
    for level in 0..a.endpoints.len() {
        let slice = files::slice(&a.slices.join(files::slice_name(level)))?;
        if slice.depth != a.endpoints.len() {
            return Err(CliError::Parameter(format!(
                "tree has {} levels but {} endpoints were given",
                slice.depth,
                a.endpoints.len()
            )));
        }
        slices.push(slice);
    }
    for (endpoint, slice) in a.endpoints.iter().zip(&slices) {
        harness::deploy_slice(&TcpNetwork, endpoint, &public, slice)?;
        log::info!("level {} installed on {endpoint}", slice.level);
    }
    println!("deployed {} levels", slices.len());
    Ok(())
}

fn levelsite(a: LevelsiteArgs) -> Result<(), CliError> {
    let file = match &a.config {
        Some(path) => SiteFile::load(path)?,
        None => SiteFile::default(),
    };
    let level = a.level.or(file.level).ok_or_else(|| CliError::Parameter("no level given".into()))?;
    let listen = a.listen.or(file.listen).ok_or_else(|| CliError::Parameter("no listen endpoint given".into()))?;
    let config = SiteConfig {
        level,
        downstream: a.downstream.or(file.downstream).filter(|d| !d.is_empty()),
        padding: config::padding(a.pad_min_ms.or(file.pad_min_ms), a.pad_max_ms.or(file.pad_max_ms))?,
        bogus_continuation: a.bogus_continuation.or(file.bogus_continuation).unwrap_or(false),
    };
    let site = LevelSite::new(config, TcpNetwork);
    if let Some(path) = a.public.or(file.keys) {
        site.install_keys(files::public_keys(&path)?).map_err(|e| CliError::Parameter(e.to_string()))?;
    }
    if let Some(path) = a.slice.or(file.slice) {
        site.install_slice(files::slice(&path)?).map_err(|e| CliError::Parameter(e.to_string()))?;
    }
    let handle = site.serve(&listen).map_err(|e| CliError::Network(format!("{listen}: {e}")))?;
    println!("level {level} listening on {}", handle.endpoint());
    let _ = std::io::stdout().flush();
    loop {
        std::thread::park();
    }
}

fn classify(a: ClassifyArgs) -> Result<(), CliError> {
    let timeout = Duration::from_secs(a.timeout_secs);
    if a.simulate {
        let tree = a.tree.as_deref().expect("clap requires --tree");
        let keys = match &a.key {
            Some(path) => files::private_keys(path)?,
            None => generate(ProtocolParams::testing(a.t))?.0,
        };
        let model = files::tree(tree, keys.params.t)?;
        let vectors = input::feature_vectors(&model.schema, keys.params.t, a.input.as_deref(), a.csv.as_deref())?;
        let topology = Topology::launch(MemNetwork::new(), "sim", Arc::new(keys), &model, &TopologyOptions::default())?;
        for fv in vectors {
            let (result, _) = topology.classify(&fv)?;
            print_label(&model.schema.classes, result.class_id)?;
        }
        return Ok(());
    }
    let key = a.key.as_deref().ok_or_else(|| CliError::Parameter("--key is required".into()))?;
    let schema = a.schema.as_deref().ok_or_else(|| CliError::Parameter("--schema is required".into()))?;
    let level0 = a.level0.ok_or_else(|| CliError::Parameter("--level0 is required".into()))?;
    let keys = files::private_keys(key)?;
    let schema = files::schema(schema)?;
    let vectors = input::feature_vectors(&schema, keys.params.t, a.input.as_deref(), a.csv.as_deref())?;
    let client = Client::start(Arc::new(keys), TcpNetwork, &a.listen, level0)
        .map_err(|e| CliError::Network(format!("{}: {e}", a.listen)))?
        .with_timeout(timeout);
    for fv in vectors {
        let result = client.classify(&fv)?;
        log::info!("{} comparisons in {:.1} ms", result.comparisons, result.wall.as_secs_f64() * 1000.0);
        print_label(&schema.classes, result.class_id)?;
    }
    Ok(())
}

fn print_label(classes: &[String], class_id: usize) -> Result<(), CliError> {
    let label = classes.get(class_id).ok_or_else(|| CliError::Protocol(format!("class id {class_id} has no label")))?;
    println!("{label}");
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<(), CliError> {
    let model = files::tree(&a.tree, a.t)?;
    let vectors = input::feature_vectors(&model.schema, a.t, a.input.as_deref(), a.csv.as_deref())?;
    for fv in vectors {
        let (class, level) = model.plaintext_classify(&fv);
        println!("{}\t{level}", model.class_label(class).unwrap_or("?"));
    }
    Ok(())
}

fn depth_stats_cmd(a: DepthStatsArgs) -> Result<(), CliError> {
    let model = files::tree(&a.tree, a.t)?;
    let vectors = input::feature_vectors(&model.schema, a.t, None, Some(&a.csv))?;
    let stats = depth_stats(&model, &vectors)?;
    println!("{:>8} {:>7} {:>13} {:>4} {:>8}", "average", "median", "3rd quartile", "max", "size");
    println!(
        "{:>8.2} {:>7} {:>13} {:>4} {:>8}",
        stats.average, stats.median, stats.third_quartile, stats.max, stats.size
    );
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), CliError> {
    let params = testing_params(a.t, a.key_bits);
    let model = match &a.tree {
        Some(path) => files::tree(path, a.t)?,
        None => synth::spine_tree(a.depth, 3, a.t),
    };
    if let Some(&level) = a.levels.iter().find(|&&l| l >= model.depth()) {
        return Err(CliError::Parameter(format!("level {level} outside a tree of {} levels", model.depth())));
    }
    let (keys, keygen) = generate(params)?;
    let keys = Arc::new(keys);
    let options = TopologyOptions { padding: None, bogus_continuation: a.bogus };
    let delay = Duration::from_millis(a.hop_delay_ms);
    let config = BenchConfig::new(&params, a.hop_delay_ms, model.depth(), a.bogus);
    let mut rng = rand::thread_rng();
    let report = match a.network {
        Transport::Sim => run_bench(
            DelayedNetwork::new(MemNetwork::new(), delay),
            "bench",
            keys,
            &model,
            &options,
            &a,
            config,
            &mut rng,
        )?,
        Transport::Tcp => run_bench(
            DelayedNetwork::new(TcpNetwork, delay),
            "127.0.0.1",
            keys,
            &model,
            &options,
            &a,
            config,
            &mut rng,
        )?,
    };
    println!("keygen {:.3} s (excluded from per-query times)", keygen.as_secs_f64());
    print!("{}", report.summary());
    if let Some(path) = &a.csv {
        files::write(path, report.to_csv().as_bytes())?;
    }
    match &report.aborted {
        Some(reason) => Err(CliError::Network(format!("benchmark aborted: {reason}"))),
        None => Ok(()),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_bench<N: Network + Clone>(
    net: N,
    host: &str,
    keys: Arc<ClientKeys>,
    model: &TreeModel,
    options: &TopologyOptions,
    a: &BenchArgs,
    config: BenchConfig,
    rng: &mut impl rand::Rng,
) -> Result<harness::BenchReport, CliError> {
    let topology = Topology::launch(net, host, keys, model, options)?;
    Ok(harness::bench_latency(&topology, model, &a.levels, a.runs, config, rng))
}

fn protocol_test(a: ProtocolTestArgs) -> Result<(), CliError> {
    if a.t > 8 {
        return Err(CliError::Parameter(format!("t = {} is too large for an exhaustive run; use at most 8", a.t)));
    }
    let (keys, _) = generate(testing_params(a.t, a.key_bits))?;
    let keys = Arc::new(keys);
    let modes: &[CompareMode] = match a.mode {
        ModeArg::Numeric => &[CompareMode::Numeric],
        ModeArg::Equality => &[CompareMode::Equality],
        ModeArg::Both => &[CompareMode::Numeric, CompareMode::Equality],
    };
    let mut failed = false;
    for &mode in modes {
        let result = harness::exhaustive_comparison(&keys, mode, &mut rand::rngs::OsRng)
            .map_err(|e| CliError::Protocol(e.to_string()))?;
        println!("{} t={}: {}/{}", mode_name(mode), result.t, result.passed, result.total);
        failed |= !result.all_passed();
    }
    if failed {
        return Err(CliError::CheckFailed("comparison disagreed with the plaintext predicate".into()));
    }
    Ok(())
}

fn mode_name(mode: CompareMode) -> &'static str {
    match mode {
        CompareMode::Numeric => "numeric",
        CompareMode::Equality => "equality",
    }
}
