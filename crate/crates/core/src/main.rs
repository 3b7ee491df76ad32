use std::error::Error;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use twinkit::layout::{choose_assets, sample_layout, LayoutItem, SelectionMode, Table, DEFAULT_MAX_ATTEMPTS};
use twinkit::model::AssetRecord;
use twinkit::pipeline::{
    ingest_dir, ingest_synthetic, reverify_asset, run_pipeline, store_stats, AssetStatus, ClientMode, PipelineConfig,
    Store, CANDIDATES_FILE, MANIFEST_FILE,
};
use twinkit::review::{ReviewServer, ReviewService};
use twinkit::vqa::generate_vqa;

type Result<T> = std::result::Result<T, Box<dyn Error>>;

/// Writes to stdout; a closed pipe ends output quietly.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

macro_rules! say {
    ($($arg:tt)*) => { emit(&format!("{}\n", format!($($arg)*)))? };
}

#[derive(Parser)]
#[command(name = "twinkit", version, about = "Simulation-ready object asset pipeline")]
struct Cli {
    /// Asset store root.
    #[arg(long, global = true, env = "TWINKIT_STORE", default_value = "store")]
    store: PathBuf,
    /// Global seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = ClientMode::Mock)]
    clients: ClientMode,
    /// Annotation service base URL for remote clients.
    #[arg(long, global = true, env = "TWINKIT_ENDPOINT")]
    endpoint: Option<String>,
    /// Max distance (m) from a grasp to its nearest selected point.
    #[arg(long, global = true)]
    proximity_threshold: Option<f64>,
    /// FPS candidates shown to point selection.
    #[arg(long, global = true)]
    fps_k: Option<usize>,
    /// Grasps kept by 7-DoF FPS.
    #[arg(long, global = true)]
    grasp_k: Option<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Copy OBJ meshes (or generated synthetic meshes) into the store.
    Ingest(IngestArgs),
    /// Run every pipeline stage over the store.
    Run,
    /// Re-run grasp verification with overridden physics.
    Verify(VerifyArgs),
    /// Sample a collision-free tabletop layout from annotated assets.
    Layout(LayoutArgs),
    /// Generate grounded question/answer pairs for a layout.
    Vqa(VqaArgs),
    /// Print verification statistics recomputed from the store.
    Stats,
    /// Serve the review API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Directory of .obj files.
    #[arg(required_unless_present = "synthetic", conflicts_with = "synthetic")]
    dir: Option<PathBuf>,
    /// Fixture table (JSON) merged into the store.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Generate this many synthetic assets instead.
    #[arg(long)]
    synthetic: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Assets to re-verify; all annotated assets when empty.
    asset_ids: Vec<String>,
    /// Friction coefficient override.
    #[arg(long)]
    mu: Option<f64>,
    /// Squeeze force override (N).
    #[arg(long)]
    squeeze_force: Option<f64>,
    /// Slide displacement threshold (m).
    #[arg(long)]
    displacement_threshold: Option<f64>,
}

#[derive(Args)]
struct LayoutArgs {
    /// Objects drawn uniformly from the annotated assets.
    #[arg(long, conflicts_with = "assets")]
    num_objects: Option<usize>,
    /// Explicit comma-separated asset ids, placed in this order.
    #[arg(long, value_delimiter = ',')]
    assets: Vec<String>,
    /// Table extent in metres: `W` or `WxD`.
    #[arg(long, default_value = "1.0x1.0", value_parser = parse_table)]
    table_size: Table,
    #[arg(long, default_value = "scene_000")]
    scene_id: String,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    max_attempts: usize,
    /// Output path; defaults to `<store>/scenes/<scene_id>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VqaArgs {
    /// Layout file written by `layout`.
    layout: PathBuf,
    #[arg(long, default_value_t = 5)]
    per_category: usize,
    /// Output JSONL path; defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Fraction of annotated assets placed in the review queue.
    #[arg(long)]
    review_sample_rate: f64,
}

fn parse_table(s: &str) -> std::result::Result<Table, String> {
    let (w, d) = s.split_once(['x', 'X']).unwrap_or((s, s));
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Table::new(num(w)?, num(d)?).map_err(|e| e.to_string())
}

impl Cli {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::new(&self.store);
        cfg.seed = self.seed;
        cfg.clients = self.clients;
        cfg.endpoint = self.endpoint.clone();
        cfg.workers = self.workers;
        if let Some(v) = self.proximity_threshold {
            cfg.proximity_threshold = v;
        }
        if let Some(v) = self.fps_k {
            cfg.fps_k = v;
        }
        if let Some(v) = self.grasp_k {
            cfg.grasp_k = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn ingest(cli: &Cli, args: &IngestArgs) -> Result<()> {
    let store = Store::create(&cli.store)?;
    let ids = match (&args.dir, args.synthetic) {
        (_, Some(n)) => ingest_synthetic(&store, n, cli.seed)?,
        (Some(dir), None) => ingest_dir(&store, dir, args.fixtures.as_deref())?,
        (None, None) => unreachable!("clap requires one source"),
    };
    say!("ingested {} assets into {}", ids.len(), cli.store.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let report = run_pipeline(&cli.config()?)?;
    for o in &report.outcomes {
        let status = match &o.status {
            AssetStatus::Annotated => format!("annotated ({} verified / {} candidates)", o.counts.verified, o.counts.candidates),
            AssetStatus::Filtered { reasons } => format!("filtered {reasons:?}"),
            AssetStatus::Error { stage, message } => format!("error at {stage}: {message}"),
        };
        let skipped = if o.skipped { " [unchanged]" } else { "" };
        say!("{}: {status}{skipped}", o.asset_id);
    }
    say!("{}", serde_json::to_string_pretty(&report.stats)?);
    Ok(())
}

fn verify(cli: &Cli, args: &VerifyArgs) -> Result<()> {
    let mut cfg = cli.config()?;
    cfg.verify.mu = args.mu.or(cfg.verify.mu);
    cfg.verify.squeeze_force = args.squeeze_force.or(cfg.verify.squeeze_force);
    if let Some(d) = args.displacement_threshold {
        cfg.verify.displacement_threshold = d;
    }
    cfg.validate()?;
    let store = Store::open(&cli.store);
    let ids = if args.asset_ids.is_empty() {
        store.load_records()?.into_iter().map(|r| r.asset_id).collect()
    } else {
        args.asset_ids.clone()
    };
    for id in ids {
        let record = reverify_asset(
            &store.asset_file(&id, MANIFEST_FILE),
            &store.asset_file(&id, CANDIDATES_FILE),
            &cfg.gripper,
            &cfg.verify,
        )?;
        let c = &record.provenance.grasp_counts;
        say!("{id}: {} verified / {} candidates", c.verified, c.candidates);
    }
    Ok(())
}

fn layout(cli: &Cli, args: &LayoutArgs) -> Result<()> {
    let store = Store::open(&cli.store);
    let records = store.load_records()?;
    let (chosen, mode): (Vec<&AssetRecord>, _) = if args.assets.is_empty() {
        let n = args.num_objects.ok_or("pass --num-objects or --assets")?;
        (choose_assets(&records, n, cli.seed)?, SelectionMode::Uniform)
    } else {
        let picked = args
            .assets
            .iter()
            .map(|id| records.iter().find(|r| &r.asset_id == id).ok_or(format!("no annotated asset `{id}`")))
            .collect::<std::result::Result<_, _>>()?;
        (picked, SelectionMode::Explicit)
    };
    let items: Vec<LayoutItem> = chosen.into_iter().map(LayoutItem::from).collect();
    let mut scene = sample_layout(&args.scene_id, &items, args.table_size, cli.seed, args.max_attempts)?;
    scene.selection = mode;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cli.store.join("scenes").join(format!("{}.json", args.scene_id)));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    scene.save(&out)?;
    say!("placed {} objects, wrote {}", scene.placements.len(), out.display());
    Ok(())
}

fn vqa(cli: &Cli, args: &VqaArgs) -> Result<()> {
    let scene = twinkit::layout::SceneLayout::load(&args.layout)?;
    let records = Store::open(&cli.store).load_records()?;
    let pairs = generate_vqa(&scene, &records, args.per_category, cli.seed)?;
    let mut text = String::new();
    for p in &pairs {
        text.push_str(&serde_json::to_string(p)?);
        text.push('\n');
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, text)?;
            say!("wrote {} pairs to {}", pairs.len(), path.display());
        }
        None => emit(&text)?,
    }
    Ok(())
}

fn stats(cli: &Cli) -> Result<()> {
    let stats = store_stats(&Store::open(&cli.store))?;
    say!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

fn serve(cli: &Cli, args: &ServeArgs) -> Result<()> {
    let store = Store::open(&cli.store);
    if !store.root().is_dir() {
        return Err(format!("store {} does not exist", store.root().display()).into());
    }
    let service = Arc::new(ReviewService::open(store, args.review_sample_rate)?);
    let workers = if cli.workers == 0 { 4 } else { cli.workers };
    let server = ReviewServer::start(service, &format!("{}:{}", args.host, args.port), workers)?;
    say!("review API on {}/api/v1", server.base_url());
    server.join();
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => ingest(cli, a),
        Command::Run => run(cli),
        Command::Verify(a) => verify(cli, a),
        Command::Layout(a) => layout(cli, a),
        Command::Vqa(a) => vqa(cli, a),
        Command::Stats => stats(cli),
        Command::Serve(a) => serve(cli, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
