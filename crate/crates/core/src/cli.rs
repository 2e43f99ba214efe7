//! The `treespace` command line.
//!
//! Every output starts with `#` metadata lines (tool version, command
//! line, seed); the readers in this crate skip them, so outputs can be fed
//! back in. Exit status is 0 on success, 2 for bad input and 3 for
//! numerical or domain failures.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::alignment::{parse_alignment, Alignment, Format};
use crate::embedding::{classical_mds, kernel_transform};
use crate::error::{Error, Result};
use crate::geodesic::{boundary_trees, distance_matrix, geodesic};
use crate::hyperbolicity::{gromov_delta, quadruple_count, Normalization};
use crate::inference::{
    anneal_to_boundary, bin_topologies, bootstrap_trees, shannon_diversity_with, write_trace,
    Schedule,
};
use crate::matrix::DistanceMatrix;
use crate::newick::{parse_newick_multi, write_newick, ParseOptions};
use crate::simulate::{clock_tree, evolve, make_tree, EvolutionModel, ModelKind, Shape};
use crate::tree::Tree;
use crate::treebuild::{agglomerate, cut_dendrogram, DistanceKind, Estimator, EstimatorConfig, Linkage, Rooting};

#[derive(Debug, Parser)]
#[command(name = "treespace", version, about = "Geodesic distances and inference in BHV tree space")]
pub struct RunConfig {
    /// Worker threads for parallel workloads. Results do not depend on it.
    #[arg(long, global = true, env = "TREESPACE_JOBS")]
    pub jobs: Option<usize>,

    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Write the primary output here instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Geodesic distance between the trees in two Newick files.
    Dist {
        first: PathBuf,
        second: PathBuf,
        /// List the support pairs of the path.
        #[arg(long)]
        path: bool,
        /// Print the trees where the path crosses orthant boundaries.
        #[arg(long)]
        boundary: bool,
        #[arg(long)]
        collapse_zero: bool,
    },
    /// All pairwise distances between the trees of one Newick file, as CSV.
    Matrix {
        trees: PathBuf,
        #[arg(long)]
        collapse_zero: bool,
    },
    /// Gromov δ-hyperbolicity of a CSV distance matrix.
    Delta {
        matrix: PathBuf,
        /// none, max, perimeter or max_sum.
        #[arg(long, default_value = "none")]
        norm: Normalization,
    },
    /// Classical multidimensional scaling of a CSV distance matrix.
    Mds {
        matrix: PathBuf,
        #[arg(short, default_value_t = 2)]
        k: usize,
        /// Embed 1 - exp(-lambda d) instead of d.
        #[arg(long)]
        kernel: Option<f64>,
    },
    /// Bootstrap an alignment; writes trees, topology bins, diversity and
    /// the distance matrix between replicates.
    Bootstrap {
        alignment: PathBuf,
        #[arg(short = 'B', long, default_value_t = 200)]
        replicates: usize,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        input: AlignmentArgs,
        /// Skip the replicate distance matrix.
        #[arg(long)]
        no_matrix: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Evolve sequences along a tree, or sweep a range of rates.
    Simulate {
        /// Use this tree instead of a generated one.
        #[arg(long)]
        tree: Option<PathBuf>,
        /// balanced or comb.
        #[arg(long, default_value = "balanced")]
        shape: Shape,
        /// Number of ingroup leaves.
        #[arg(short, default_value_t = 8)]
        n: usize,
        /// Length of every edge of the generated tree.
        #[arg(long, default_value_t = 1.0)]
        edge_length: f64,
        /// Build a clock-like tree of this root-to-leaf height instead.
        #[arg(long, conflicts_with = "edge_length")]
        height: Option<f64>,
        /// Attach an outgroup leaf `OUT` at the root.
        #[arg(long)]
        outgroup: bool,
        /// cfn or jc69.
        #[arg(long, default_value = "cfn")]
        model: ModelKind,
        #[arg(long, default_value_t = 0.05)]
        rate: f64,
        /// Comma-separated rates. Each gets `--replicates` simulated data
        /// sets and estimated trees, pooled with the truth into one file.
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        replicates: usize,
        #[arg(long, default_value_t = 400)]
        length: usize,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Anneal column weights until the estimate approaches a target tree.
    Anneal {
        alignment: PathBuf,
        target: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
        #[arg(long, default_value_t = 0.95)]
        cooling: f64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        input: AlignmentArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Hierarchical clustering of a CSV distance matrix as a Newick dendrogram.
    Hclust {
        matrix: PathBuf,
        /// single or average.
        #[arg(long, default_value = "single")]
        linkage: Linkage,
        /// Also print the assignment into this many clusters.
        #[arg(long)]
        clusters: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// nj or upgma.
    #[arg(long, default_value = "nj")]
    pub estimator: Estimator,
    /// hamming or jc69.
    #[arg(long, default_value = "hamming")]
    pub distance: DistanceKind,
    /// Root estimated trees at this leaf.
    #[arg(long = "root-at")]
    pub root_at: Option<String>,
}

impl EstimatorArgs {
    fn config(&self) -> EstimatorConfig {
        EstimatorConfig {
            estimator: self.estimator,
            distance: self.distance,
            rooting: self.root_at.clone().map_or(Rooting::Natural, Rooting::Outgroup),
        }
    }
}

#[derive(Debug, Args)]
pub struct AlignmentArgs {
    /// fasta or phylip; guessed from the first character when omitted.
    #[arg(long)]
    pub format: Option<Format>,
}

/// Entry point used by the binary; returns the exit status.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let argv: Vec<String> = std::env::args().collect();
    let cfg = match RunConfig::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cfg, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_domain() {
        3
    } else {
        2
    }
}

/// Run one parsed invocation. `argv` is only echoed into the metadata.
pub fn run(cfg: &RunConfig, argv: &[String]) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        if j == 0 {
            return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let ctx = Context {
        header: header(argv, cfg.seed),
        seed: cfg.seed,
        output: cfg.output.clone(),
    };
    pool.install(|| dispatch(&ctx, &cfg.command))
}

struct Context {
    header: String,
    seed: u64,
    output: Option<PathBuf>,
}

impl Context {
    /// Primary output: the header followed by `body`.
    fn emit(&self, body: &str) -> Result<()> {
        let text = format!("{}{body}", self.header);
        match &self.output {
            Some(p) => fs::write(p, text)?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }

    fn write_file(&self, dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
        let p = dir.join(name);
        fs::write(&p, format!("{}{body}", self.header))?;
        Ok(p)
    }
}

fn header(argv: &[String], seed: u64) -> String {
    let cmd: Vec<String> = argv.iter().map(|a| shell_quote(a)).collect();
    format!(
        "# treespace {}\n# command: {}\n# seed: {seed}\n",
        env!("CARGO_PKG_VERSION"),
        cmd.join(" ")
    )
}

fn shell_quote(a: &str) -> String {
    if !a.is_empty() && a.bytes().all(|b| b.is_ascii_alphanumeric() || b"-_./=,:".contains(&b)) {
        a.to_string()
    } else {
        format!("'{}'", a.replace('\'', "'\\''"))
    }
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
    })
}

fn read_trees(p: &Path, collapse_zero: bool) -> Result<Vec<Tree>> {
    parse_newick_multi(&read(p)?, ParseOptions { collapse_zero })
}

fn read_one_tree(p: &Path, collapse_zero: bool) -> Result<Tree> {
    let mut ts = read_trees(p, collapse_zero)?;
    match ts.len() {
        1 => Ok(ts.pop().expect("one tree")),
        k => Err(Error::InvalidArgument(format!(
            "{} holds {k} trees, expected one",
            p.display()
        ))),
    }
}

fn read_matrix(p: &Path) -> Result<DistanceMatrix> {
    DistanceMatrix::read_csv(fs::File::open(p)?)
}

fn read_alignment(p: &Path, args: &AlignmentArgs) -> Result<Alignment> {
    let text = read(p)?;
    let format = args.format.unwrap_or_else(|| {
        let first = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('#'));
        if first.is_some_and(|l| l.starts_with('>')) {
            Format::Fasta
        } else {
            Format::Phylip
        }
    });
    parse_alignment(&text, format, None)
}

fn trees_to_newick(trees: &[Tree]) -> String {
    trees.iter().map(|t| write_newick(t) + "\n").collect()
}

fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Numerical(e.to_string()))
}

fn dispatch(ctx: &Context, cmd: &Command) -> Result<()> {
    match cmd {
        Command::Dist {
            first,
            second,
            path,
            boundary,
            collapse_zero,
        } => cmd_dist(ctx, first, second, *path, *boundary, *collapse_zero),
        Command::Matrix {
            trees,
            collapse_zero,
        } => cmd_matrix(ctx, trees, *collapse_zero),
        Command::Delta { matrix, norm } => cmd_delta(ctx, matrix, *norm),
        Command::Mds { matrix, k, kernel } => cmd_mds(ctx, matrix, *k, *kernel),
        Command::Bootstrap {
            alignment,
            replicates,
            est,
            input,
            no_matrix,
            out_dir,
        } => cmd_bootstrap(ctx, alignment, *replicates, est, input, *no_matrix, out_dir),
        Command::Simulate {
            tree,
            shape,
            n,
            edge_length,
            height,
            outgroup,
            model,
            rate,
            rates,
            replicates,
            length,
            est,
            out_dir,
        } => {
            let truth = match tree {
                Some(p) => read_one_tree(p, false)?,
                None => match height {
                    Some(h) => clock_tree(*shape, *n, *h, *outgroup)?,
                    None => make_tree(*shape, *n, *edge_length, *outgroup)?,
                },
            };
            if rates.is_empty() {
                cmd_simulate(ctx, &truth, *model, *rate, *length, out_dir)
            } else {
                cmd_sweep(ctx, &truth, *model, rates, *replicates, *length, est, out_dir)
            }
        }
        Command::Anneal {
            alignment,
            target,
            t0,
            cooling,
            iterations,
            est,
            input,
            out_dir,
        } => cmd_anneal(
            ctx,
            alignment,
            target,
            Schedule {
                t0: *t0,
                cooling: *cooling,
                iterations: *iterations,
            },
            est,
            input,
            out_dir,
        ),
        Command::Hclust {
            matrix,
            linkage,
            clusters,
        } => cmd_hclust(ctx, matrix, *linkage, *clusters),
    }
}

fn cmd_dist(ctx: &Context, a: &Path, b: &Path, path: bool, boundary: bool, collapse: bool) -> Result<()> {
    let t = read_one_tree(a, collapse)?;
    let t2 = read_one_tree(b, collapse)?;
    let g = geodesic(&t, &t2)?;
    let mut out = format!("distance\t{}\n", g.distance);
    if path {
        let names = |s: &[crate::splits::Split]| -> String {
            s.iter()
                .map(|x| format!("{{{}}}", g.start().mask_labels(x.mask()).join(",")))
                .collect::<Vec<_>>()
                .join(" ")
        };
        for (k, p) in g.pairs().enumerate() {
            writeln!(
                out,
                "pair\t{}\t{:.6}\t{}\t{}",
                k + 1,
                p.transition_time(),
                names(&p.a),
                names(&p.b)
            )
            .expect("string write");
        }
    }
    if boundary {
        for (lambda, tree) in boundary_trees(&g)? {
            writeln!(out, "boundary\t{lambda:.6}\t{}", write_newick(&tree)).expect("string write");
        }
    }
    ctx.emit(&out)
}

fn cmd_matrix(ctx: &Context, trees: &Path, collapse: bool) -> Result<()> {
    let ts = read_trees(trees, collapse)?;
    let start = Instant::now();
    let d = distance_matrix(&ts)?;
    log::info!(
        "{} trees, {} distances in {:.2?} on {} threads",
        ts.len(),
        ts.len() * ts.len().saturating_sub(1) / 2,
        start.elapsed(),
        rayon::current_num_threads()
    );
    ctx.emit(&csv_string(|b| d.write_csv(b))?)
}

fn cmd_delta(ctx: &Context, matrix: &Path, norm: Normalization) -> Result<()> {
    let d = read_matrix(matrix)?;
    let r = gromov_delta(&d, norm)?;
    let out = format!(
        "delta\t{}\nnormalization\t{}\nratio\t{}\nquadruple\t{}\nquadruples\t{}\n",
        r.delta,
        r.normalization,
        r.ratio,
        r.argmax_labels.join(","),
        quadruple_count(d.len())
    );
    ctx.emit(&out)
}

fn cmd_mds(ctx: &Context, matrix: &Path, k: usize, kernel: Option<f64>) -> Result<()> {
    let mut d = read_matrix(matrix)?;
    if let Some(l) = kernel {
        d = kernel_transform(&d, l)?;
    }
    let e = classical_mds(&d, k)?;
    let join = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let mut out = String::new();
    writeln!(out, "# eigenvalues: {}", join(&mut e.eigenvalues.iter().copied())).expect("string write");
    writeln!(out, "# explained: {}", join(&mut (0..k).map(|i| e.explained(i)))).expect("string write");
    writeln!(out, "# stress: {}", e.stress).expect("string write");
    if e.padded {
        writeln!(out, "# fewer than {k} positive eigenvalues; trailing axes are zero").expect("string write");
    }
    out.push_str(&csv_string(|b| e.write_csv(b))?);
    ctx.emit(&out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_bootstrap(
    ctx: &Context,
    alignment: &Path,
    replicates: usize,
    est: &EstimatorArgs,
    input: &AlignmentArgs,
    no_matrix: bool,
    out_dir: &Path,
) -> Result<()> {
    let a = read_alignment(alignment, input)?;
    fs::create_dir_all(out_dir)?;
    let trees = bootstrap_trees(&a, replicates, &est.config(), ctx.seed)?;
    ctx.write_file(out_dir, "trees.nwk", &trees_to_newick(&trees))?;
    let bins = bin_topologies(&trees)?;
    ctx.write_file(out_dir, "bins.tsv", &bins.to_tsv())?;
    let counts = bins.counts();
    let n = bins.total as f64;
    let div = format!(
        "trees\t{}\ntopologies\t{}\nshannon_2n\t{}\nshannon_2n_plus_2\t{}\n",
        bins.total,
        counts.len(),
        shannon_diversity_with(&counts, 2.0 * n),
        shannon_diversity_with(&counts, 2.0 * n + 2.0),
    );
    ctx.write_file(out_dir, "diversity.tsv", &div)?;
    if !no_matrix {
        let d = distance_matrix(&trees)?;
        ctx.write_file(out_dir, "distances.csv", &csv_string(|b| d.write_csv(b))?)?;
    }
    ctx.emit(&div)
}

fn cmd_simulate(
    ctx: &Context,
    truth: &Tree,
    model: ModelKind,
    rate: f64,
    length: usize,
    out_dir: &Path,
) -> Result<()> {
    let m = EvolutionModel::new(model, rate)?;
    let a = evolve(truth, &m, length, ctx.seed)?;
    fs::create_dir_all(out_dir)?;
    let fa = ctx.write_file(out_dir, "alignment.fasta", &a.to_fasta())?;
    let tr = ctx.write_file(out_dir, "truth.nwk", &(write_newick(truth) + "\n"))?;
    ctx.emit(&format!("alignment\t{}\ntruth\t{}\n", fa.display(), tr.display()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    ctx: &Context,
    truth: &Tree,
    model: ModelKind,
    rates: &[f64],
    replicates: usize,
    length: usize,
    est: &EstimatorArgs,
    out_dir: &Path,
) -> Result<()> {
    let cfg = est.config();
    let truth_est = cfg.rooting.apply(truth.clone())?;
    let mut trees = vec![truth_est];
    let mut labels = String::from("index\trate\n0\ttruth\n");
    for (k, &rate) in rates.iter().enumerate() {
        let m = EvolutionModel::new(model, rate)?;
        for r in 0..replicates {
            let seed = ctx.seed.wrapping_add((k * replicates + r) as u64);
            trees.push(cfg.estimate(&evolve(truth, &m, length, seed)?)?);
            writeln!(labels, "{}\t{rate}", trees.len() - 1).expect("string write");
        }
    }
    fs::create_dir_all(out_dir)?;
    let tp = ctx.write_file(out_dir, "sweep.nwk", &trees_to_newick(&trees))?;
    let lp = ctx.write_file(out_dir, "sweep_labels.tsv", &labels)?;
    ctx.emit(&format!("trees\t{}\nlabels\t{}\n", tp.display(), lp.display()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_anneal(
    ctx: &Context,
    alignment: &Path,
    target: &Path,
    schedule: Schedule,
    est: &EstimatorArgs,
    input: &AlignmentArgs,
    out_dir: &Path,
) -> Result<()> {
    let a = read_alignment(alignment, input)?;
    let t = read_one_tree(target, false)?;
    let r = anneal_to_boundary(&a, &t, &est.config(), schedule, ctx.seed)?;
    fs::create_dir_all(out_dir)?;
    let mut w = String::from("column,weight\n");
    for (c, x) in r.weights.iter().enumerate() {
        writeln!(w, "{},{x}", c + 1).expect("string write");
    }
    ctx.write_file(out_dir, "weights.csv", &w)?;
    ctx.write_file(out_dir, "trace.csv", &csv_string(|b| write_trace(&r.trace, b))?)?;
    ctx.write_file(out_dir, "final.nwk", &(write_newick(&r.tree) + "\n"))?;
    ctx.emit(&format!(
        "initial_distance\t{}\nfinal_distance\t{}\niterations\t{}\ntree\t{}\n",
        r.initial_distance,
        r.distance,
        r.trace.len() - 1,
        write_newick(&r.tree)
    ))
}

fn cmd_hclust(ctx: &Context, matrix: &Path, linkage: Linkage, clusters: Option<usize>) -> Result<()> {
    let d = read_matrix(matrix)?;
    let den = agglomerate(&d, linkage)?;
    let mut out = den.to_newick()? + "\n";
    if let Some(k) = clusters {
        out.push_str("label\tcluster\n");
        for (l, c) in d.labels().iter().zip(cut_dendrogram(&den, k)?) {
            writeln!(out, "{l}\t{}", c + 1).expect("string write");
        }
    }
    ctx.emit(&out)
}
