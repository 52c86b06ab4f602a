use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use patmat::approx::{approx_positions, approx_regex_flat, edit_distance, edit_distance_fr_stats, ApproxRegex, Mode};
use patmat::csearch::{capprox_search, capprox_search_stats, cregex_search, SearchError};
use patmat::engines::{EngineConfig, EngineKind, Matcher};
use patmat::regex::{parse_regex, RegexAst};
use patmat::subseq::{build_index, SubseqIndex};
use patmat::tps::{default_micro_size, tps_fast, tps_simple};
use patmat::tree_distance::{alignment_distance, zhang_shasha, CostFunction};
use patmat::tree_inclusion::TextTree;
use patmat::trees::{parse_tree, LabeledTree};
use patmat::zl::{compress, decompress, CompressedText, Scheme, ZlError};

#[derive(Parser)]
#[command(name = "patmat", version, about = "Pattern matching in trees, strings and compressed text")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// one JSON object per result line
    #[arg(long, global = true)]
    json: bool,
    /// worker threads for multi-file commands
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..=256))]
    threads: u16,
    /// emulated machine word size for the bit-parallel structures
    #[arg(long, global = true, default_value_t = 64, value_parser = clap::value_parser!(u16).range(8..=4096))]
    word_bits: u16,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CostArgs {
    /// unit costs (the default)
    #[arg(long, conflicts_with = "costs")]
    unit: bool,
    /// cost file with lines `a b cost`, `-` for the empty label
    #[arg(long)]
    costs: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tree edit distance
    TreeEd {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        cost: CostArgs,
    },
    /// Tree alignment distance
    TreeAlign {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        cost: CostArgs,
    },
    /// Ordered tree inclusion; exit 0 when P is included in T
    TreeIncl {
        p: PathBuf,
        t: PathBuf,
        /// print preorder numbers (1-based) of the including subtree roots
        #[arg(long)]
        report_roots: bool,
    },
    /// Tree path subsequence: which pattern paths occur on which text paths
    Tps {
        p: PathBuf,
        t: PathBuf,
        #[arg(long)]
        fast: bool,
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..=64))]
        micro_size: Option<u16>,
    },
    /// Regular expression matching; prints 1-based match end offsets
    Regex {
        pattern: String,
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value = "auto")]
        engine: EngineKind,
        /// do not report empty matches
        #[arg(long)]
        no_empty: bool,
    },
    /// String edit distance
    Ed {
        a: String,
        b: String,
        #[arg(long)]
        fr: bool,
        #[arg(long, default_value_t = 4, requires = "fr")]
        x: usize,
        #[arg(long, default_value_t = 4, requires = "fr")]
        y: usize,
    },
    /// Approximate string matching with at most K errors
    Agrep {
        #[arg(short)]
        k: usize,
        pattern: String,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Approximate regular expression matching with at most D errors
    Aregex {
        #[arg(short)]
        d: usize,
        pattern: String,
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// decide whether each whole file is within distance D
        #[arg(long)]
        whole: bool,
    },
    /// Subsequence index
    Subseq {
        #[command(subcommand)]
        cmd: SubseqCmd,
    },
    /// ZL78/ZLW compression
    Zl {
        #[command(subcommand)]
        cmd: ZlCmd,
    },
    /// Approximate matching on a compressed file
    Zgrep {
        #[arg(short)]
        k: usize,
        pattern: String,
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 8)]
        tau: usize,
    },
    /// Regular expression matching on a compressed file
    Zregex {
        pattern: String,
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 8)]
        tau: usize,
        #[arg(long)]
        no_empty: bool,
    },
    /// Timing suites; lists the suites when none is given
    Bench {
        suite: Option<String>,
        #[arg(long, default_value_t = 5)]
        repeat: usize,
        /// input size in bytes
        #[arg(long, default_value_t = 1 << 20)]
        size: usize,
    },
}

#[derive(Subcommand)]
enum SubseqCmd {
    Build {
        file: PathBuf,
        #[arg(short)]
        o: PathBuf,
    },
    /// exit 0 when P is a subsequence
    Query { index: PathBuf, pattern: String },
}

#[derive(Subcommand)]
enum ZlCmd {
    Compress {
        file: PathBuf,
        #[arg(short)]
        o: PathBuf,
        #[arg(long, default_value = "zl78")]
        scheme: Scheme,
    },
    Decompress {
        file: PathBuf,
        #[arg(short)]
        o: PathBuf,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {msg}", path.display())]
    Corrupt { path: PathBuf, msg: String },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Corrupt { .. } => 4,
        }
    }
}

type Res<T> = Result<T, CliError>;

fn read(path: &Path) -> Res<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn write(path: &Path, data: &[u8]) -> Res<()> {
    fs::write(path, data).map_err(|source| CliError::Io { path: path.into(), source })
}

fn read_tree(path: &Path) -> Res<LabeledTree> {
    let raw = read(path)?;
    let text = String::from_utf8_lossy(&raw);
    parse_tree(text.trim()).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read_z(path: &Path) -> Res<CompressedText> {
    let raw = read(path)?;
    CompressedText::from_bytes(&raw).map_err(|e| corrupt(path, e))
}

fn corrupt(path: &Path, e: ZlError) -> CliError {
    match e {
        ZlError::Io(source) => CliError::Io { path: path.into(), source },
        e => CliError::Corrupt { path: path.into(), msg: e.to_string() },
    }
}

fn parse_pattern(p: &str) -> Res<RegexAst> {
    parse_regex(p).map_err(|e| CliError::Usage(format!("pattern: {e}")))
}

/// Output collected by a command; `found` decides exit 0 or 1.
struct Out {
    lines: Vec<String>,
    found: bool,
}

impl Out {
    fn new() -> Self {
        Out { lines: Vec::new(), found: true }
    }

    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    fn json(&mut self, v: Value) {
        self.lines.push(v.to_string());
    }
}

/// Runs `f` over the files with up to `threads` workers; results keep
/// input order.
fn per_file<T: Send>(files: &[PathBuf], threads: usize, f: impl Fn(&Path) -> Res<T> + Sync) -> Res<Vec<T>> {
    let threads = threads.clamp(1, files.len().max(1));
    if threads == 1 {
        return files.iter().map(|p| f(p)).collect();
    }
    let chunk = files.len().div_ceil(threads);
    let results: Vec<Vec<Res<T>>> = std::thread::scope(|s| {
        let handles: Vec<_> = files
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                s.spawn(move || part.iter().map(|p| f(p)).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    results.into_iter().flatten().collect()
}

/// Emits per-file positions in the shared text/JSON format.
fn emit_positions(out: &mut Out, cli: &Cli, files: &[PathBuf], all: Vec<Vec<usize>>) {
    let multi = files.len() > 1;
    out.found = all.iter().any(|v| !v.is_empty());
    for (path, pos) in files.iter().zip(all) {
        if cli.json {
            out.json(json!({ "file": path.display().to_string(), "matches": pos }));
        } else {
            for j in pos {
                if multi {
                    out.line(format!("{}:{j}", path.display()));
                } else {
                    out.line(j.to_string());
                }
            }
        }
    }
}

fn costs(args: &CostArgs) -> Res<CostFunction> {
    match &args.costs {
        None => Ok(CostFunction::unit()),
        Some(p) => {
            let text = String::from_utf8_lossy(&read(p)?).into_owned();
            CostFunction::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        }
    }
}

fn fmt_cost(c: f64) -> String {
    if c.fract() == 0.0 && c.abs() < 1e15 {
        format!("{}", c as i64)
    } else {
        format!("{c}")
    }
}

fn run(cli: &Cli) -> Res<Out> {
    let mut out = Out::new();
    let cfg = EngineConfig { word_bits: cli.word_bits as usize, ..EngineConfig::default() };
    let threads = cli.threads as usize;
    match &cli.cmd {
        Cmd::TreeEd { a, b, cost } | Cmd::TreeAlign { a, b, cost } => {
            let (t1, t2) = (read_tree(a)?, read_tree(b)?);
            let c = costs(cost)?;
            let d = match cli.cmd {
                Cmd::TreeEd { .. } => zhang_shasha(&t1, &t2, &c),
                _ => alignment_distance(&t1, &t2, &c),
            }
            .map_err(|e| CliError::Usage(e.to_string()))?;
            if cli.json {
                out.json(json!({ "distance": d }));
            } else {
                out.line(fmt_cost(d));
            }
        }
        Cmd::TreeIncl { p, t, report_roots } => {
            let (pt, tt) = (read_tree(p)?, read_tree(t)?);
            let text = TextTree::new(tt.clone());
            let included = text.includes(&pt);
            out.found = included;
            let mut pre = vec![0; tt.len()];
            for (i, v) in tt.walk_pre().into_iter().enumerate() {
                pre[v] = i + 1;
            }
            let roots: Vec<usize> =
                if *report_roots { text.including_subtrees(&pt).into_iter().map(|v| pre[v]).collect() } else { Vec::new() };
            if cli.json {
                let mut v = json!({ "included": included });
                if *report_roots {
                    v["roots"] = json!(roots);
                }
                out.json(v);
            } else {
                out.line(if included { "included" } else { "not included" });
                for r in roots {
                    out.line(r.to_string());
                }
            }
        }
        Cmd::Tps { p, t, fast, micro_size } => {
            let (pt, tt) = (read_tree(p)?, read_tree(t)?);
            let s = micro_size.map_or_else(|| default_micro_size(cli.word_bits as usize), |s| s as usize);
            let rep = if *fast { tps_fast(&pt, &tt, s) } else { tps_simple(&pt, &tt) };
            out.found = !rep.is_empty();
            if cli.json {
                let pairs: Vec<[usize; 2]> = rep.iter().map(|&(i, j)| [i + 1, j + 1]).collect();
                out.json(json!({ "pairs": pairs }));
            } else {
                for (i, j) in rep {
                    out.line(format!("p{} ⊑ t{}", i + 1, j + 1));
                }
            }
        }
        Cmd::Regex { pattern, files, engine, no_empty } => {
            let ast = parse_pattern(pattern)?;
            let m = Matcher::from_ast(&ast, *engine, &cfg);
            let all = per_file(files, threads, |p| Ok(m.find_matches(&read(p)?, *no_empty)))?;
            emit_positions(&mut out, cli, files, all);
        }
        Cmd::Ed { a, b, fr, x, y } => {
            let (a, b) = (a.as_bytes(), b.as_bytes());
            let (d, fallback) = if *fr {
                if *x == 0 || *y == 0 {
                    return Err(CliError::Usage("--x and --y must be at least 1".into()));
                }
                let (d, st) = edit_distance_fr_stats(a, b, *x, *y);
                if st.fallback {
                    eprintln!("patmat: cell encoding exceeds the word budget, using the plain DP");
                }
                (d, st.fallback)
            } else {
                (edit_distance(a, b), false)
            };
            if cli.json {
                out.json(json!({ "distance": d, "fallback": fallback }));
            } else {
                out.line(d.to_string());
            }
        }
        Cmd::Agrep { k, pattern, files } => {
            let p = pattern.as_bytes();
            if p.is_empty() || *k >= p.len() {
                return Err(CliError::Usage(format!("-k must be below the pattern length {}", p.len())));
            }
            let all = per_file(files, threads, |f| Ok(approx_positions(p, &read(f)?, *k)))?;
            emit_positions(&mut out, cli, files, all);
        }
        Cmd::Aregex { d, pattern, files, whole } => {
            let ast = parse_pattern(pattern)?;
            let ar = ApproxRegex::new(&ast, *d, cfg.word_bits);
            if *whole {
                let verdicts = per_file(files, threads, |f| {
                    let q = read(f)?;
                    Ok(*ar.values(&q, Mode::Whole).last().unwrap() as usize <= *d)
                })?;
                out.found = verdicts.iter().all(|&v| v);
                for (f, v) in files.iter().zip(verdicts) {
                    if cli.json {
                        out.json(json!({ "file": f.display().to_string(), "accepted": v }));
                    } else if files.len() > 1 {
                        out.line(format!("{}:{}", f.display(), if v { "yes" } else { "no" }));
                    } else {
                        out.line(if v { "yes" } else { "no" });
                    }
                }
            } else {
                let all = per_file(files, threads, |f| {
                    let v = ar.values(&read(f)?, Mode::Substring);
                    Ok((0..v.len()).filter(|&j| v[j] as usize <= *d).collect())
                })?;
                emit_positions(&mut out, cli, files, all);
            }
        }
        Cmd::Subseq { cmd: SubseqCmd::Build { file, o } } => {
            let ix = build_index(&read(file)?);
            let bytes = ix.to_bytes();
            write(o, &bytes)?;
            if cli.json {
                out.json(json!({ "length": ix.len(), "sigma": ix.sigma(), "blocks": ix.blocks(), "bytes": bytes.len() }));
            }
        }
        Cmd::Subseq { cmd: SubseqCmd::Query { index, pattern } } => {
            let raw = read(index)?;
            let ix = SubseqIndex::from_bytes(&raw).map_err(|e| CliError::Corrupt { path: index.clone(), msg: e.to_string() })?;
            let yes = ix.is_subsequence(pattern.as_bytes());
            out.found = yes;
            if cli.json {
                out.json(json!({ "subsequence": yes }));
            } else {
                out.line(if yes { "yes" } else { "no" });
            }
        }
        Cmd::Zl { cmd: ZlCmd::Compress { file, o, scheme } } => {
            let q = read(file)?;
            let z = compress(&q, *scheme);
            let bytes = z.to_bytes();
            write(o, &bytes)?;
            if cli.json {
                out.json(json!({ "elements": z.elements.len(), "input_bytes": q.len(), "output_bytes": bytes.len() }));
            }
        }
        Cmd::Zl { cmd: ZlCmd::Decompress { file, o } } => {
            let z = read_z(file)?;
            let q = decompress(&z).map_err(|e| corrupt(file, e))?;
            write(o, &q)?;
        }
        Cmd::Zgrep { k, pattern, files, tau } => {
            let p = pattern.as_bytes();
            let all = per_file(files, threads, |f| {
                let z = read_z(f)?;
                let tau = (*tau).clamp(1, z.elements.len().max(1));
                capprox_search(&z, p, *k, tau).map_err(|e| match e {
                    SearchError::KTooLarge { .. } => CliError::Usage(e.to_string()),
                    SearchError::Corrupt(e) => corrupt(f, e),
                })
            })?;
            emit_positions(&mut out, cli, files, all);
        }
        Cmd::Zregex { pattern, files, tau, no_empty } => {
            let ast = parse_pattern(pattern)?;
            let all = per_file(files, threads, |f| {
                let z = read_z(f)?;
                let tau = (*tau).clamp(1, z.elements.len().max(1));
                cregex_search(&z, &ast, tau, *no_empty).map_err(|e| corrupt(f, e))
            })?;
            emit_positions(&mut out, cli, files, all);
        }
        Cmd::Bench { suite, repeat, size } => bench(cli, suite.as_deref(), (*repeat).max(1), *size, &mut out)?,
    }
    Ok(out)
}

const SUITES: &[(&str, &str)] = &[
    ("regex-engines", "ns/char of every regex engine for small, medium and large patterns"),
    ("approx", "plain against Four-Russians edit distance, approximate string and regex matching"),
    ("zl", "compression ratio, (de)compression speed and compressed search throughput"),
];

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn time<T>(repeat: usize, mut f: impl FnMut() -> T) -> f64 {
    median(
        (0..repeat)
            .map(|_| {
                let t = Instant::now();
                std::hint::black_box(f());
                t.elapsed().as_secs_f64()
            })
            .collect(),
    )
}

/// Deterministic pseudo-random bytes over the first `sigma` letters.
fn bench_text(len: usize, sigma: u8, seed: u64) -> Vec<u8> {
    let mut x = seed | 1;
    (0..len)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            b'a' + (x % sigma as u64) as u8
        })
        .collect()
}

fn bench(cli: &Cli, suite: Option<&str>, repeat: usize, size: usize, out: &mut Out) -> Res<()> {
    let Some(suite) = suite else {
        for (name, what) in SUITES {
            if cli.json {
                out.json(json!({ "suite": name, "description": what }));
            } else {
                out.line(format!("{name:<14} {what}"));
            }
        }
        return Ok(());
    };
    let row = |out: &mut Out, cells: Vec<(&str, Value)>| {
        let cells: Vec<(&str, Value)> = cells
            .into_iter()
            .map(|(k, v)| match v.as_f64() {
                Some(x) if !v.is_u64() && !v.is_i64() => (k, json!((x * 1000.0).round() / 1000.0)),
                _ => (k, v),
            })
            .collect();
        if cli.json {
            out.json(Value::Object(cells.into_iter().map(|(k, v)| (k.to_string(), v)).collect()));
        } else {
            out.line(cells.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" "));
        }
    };
    let cfg = EngineConfig { word_bits: cli.word_bits as usize, ..EngineConfig::default() };
    match suite {
        "regex-engines" => {
            let q = bench_text(size, 4, 7);
            let patterns = [("small", "ab(c|d)*a"), ("medium", "(abc|bd)*(a|cc)(dab|b*)ddc(a|b)"), ("large", "")];
            let large: String = (0..25).map(|i| ["(ab|c)", "d*", "(ca|db)"][i % 3]).collect();
            for (regime, pat) in patterns {
                let pat = if pat.is_empty() { large.as_str() } else { pat };
                let ast = parse_pattern(pat)?;
                for kind in [EngineKind::Classic, EngineKind::Simple, EngineKind::Separator, EngineKind::Fr, EngineKind::Nested] {
                    let m = Matcher::from_ast(&ast, kind, &cfg);
                    let secs = time(repeat, || m.find_matches(&q, false).len());
                    row(out, vec![
                        ("regime", json!(regime)),
                        ("m", json!(ast.len())),
                        ("engine", json!(format!("{kind:?}").to_lowercase())),
                        ("ns_per_char", json!((secs * 1e9 / q.len() as f64 * 10.0).round() / 10.0)),
                    ]);
                }
            }
        }
        "approx" => {
            for sigma in [2u8, 26] {
                let s = bench_text(2000, sigma, 3);
                let t = bench_text(2000, sigma, 5);
                let plain = time(repeat, || edit_distance(&s, &t));
                let fr = time(repeat, || edit_distance_fr_stats(&s, &t, 4, 4).0);
                row(out, vec![("op", json!("ed")), ("sigma", json!(sigma)), ("plain_ms", json!(plain * 1e3)), ("fr_ms", json!(fr * 1e3))]);
            }
            let q = bench_text(size, 4, 11);
            let secs = time(repeat, || approx_positions(b"abcdabcd", &q, 2).len());
            row(out, vec![("op", json!("agrep")), ("ns_per_char", json!(secs * 1e9 / q.len() as f64))]);
            let ast = parse_pattern("(ab|c)*d(a|bb)")?;
            let ar = ApproxRegex::new(&ast, 2, cfg.word_bits);
            let small = &q[..q.len().min(1 << 16)];
            let chunked = time(repeat, || ar.values(small, Mode::Substring).len());
            let flat = time(repeat, || approx_regex_flat(&ast, small, 2, Mode::Substring).len());
            row(out, vec![
                ("op", json!("aregex")),
                ("chunked_ns_per_char", json!(chunked * 1e9 / small.len() as f64)),
                ("flat_ns_per_char", json!(flat * 1e9 / small.len() as f64)),
            ]);
        }
        "zl" => {
            for sigma in [2u8, 4, 26] {
                let q = bench_text(size, sigma, 13);
                for scheme in [Scheme::Zl78, Scheme::Zlw] {
                    let z = compress(&q, scheme);
                    let bytes = z.to_bytes().len();
                    let c = time(repeat, || compress(&q, scheme).elements.len());
                    let d = time(repeat, || decompress(&z).map(|v| v.len()).unwrap_or(0));
                    let mut live = 0;
                    let g = time(repeat, || {
                        let (m, st) = capprox_search_stats(&z, b"abcab", 1, 16).expect("valid input");
                        live = st.peak_live;
                        m.len()
                    });
                    let r_ast = parse_pattern("ab(a|b)*ba")?;
                    let r = time(repeat, || cregex_search(&z, &r_ast, 16, true).map(|v| v.len()).unwrap_or(0));
                    let mb = q.len() as f64 / 1e6;
                    row(out, vec![
                        ("sigma", json!(sigma)),
                        ("scheme", json!(format!("{scheme:?}").to_lowercase())),
                        ("ratio", json!((bytes as f64 / q.len() as f64 * 1000.0).round() / 1000.0)),
                        ("compress_mb_s", json!(mb / c)),
                        ("decompress_mb_s", json!(mb / d)),
                        ("zgrep_mb_s", json!(mb / g)),
                        ("zregex_mb_s", json!(mb / r)),
                        ("peak_live", json!(live)),
                    ]);
                }
            }
        }
        other => return Err(CliError::Usage(format!("unknown suite '{other}'; run `patmat bench` for the list"))),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            for l in &out.lines {
                if writeln!(lock, "{l}").is_err() {
                    return ExitCode::from(3);
                }
            }
            ExitCode::from(if out.found { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("patmat: {e}");
            ExitCode::from(e.code())
        }
    }
}
