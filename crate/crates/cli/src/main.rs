use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use latentid::codec::{load_minutiae_template, load_template, load_texture_template, save_template};
use latentid::config::Config;
use latentid::db::{candidate_lists_to_csv, enroll, CandidateList, ReferenceDb, Searcher};
use latentid::descriptor::{BaselineDescriptor, PatchTypeCatalog, SidecarDescriptors};
use latentid::eval::{compute_cmc, fuse_external_scores, sfs_patch_selection, FusionMode, SearchBenchmark};
use latentid::extract::{latent_templates, read_minutiae_json, reference_subject, Descriptors};
use latentid::ingest::load_gray_image;
use latentid::model::{validate_template, LatentTemplates, PatchTypeId, SubjectRecord};
use latentid::scoring::ScoreBreakdown;
use latentid::synth::{generate_benchmark, BenchmarkSpec, DistortionSpec};
use latentid::Error;

#[derive(Parser)]
#[command(name = "latentid", version, about = "Latent fingerprint identification")]
struct Cli {
    /// TOML configuration (matcher settings, fusion weights, search defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Latent,
    Reference,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Score,
    Borda,
}

#[derive(Subcommand)]
enum Command {
    /// Build templates from an image, an ROI mask and a minutiae list.
    Extract {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        /// JSON array of {"x", "y", "alpha"} objects.
        #[arg(long)]
        minutiae: PathBuf,
        /// Second minutiae set for a latent (defaults to the first).
        #[arg(long)]
        minutiae2: Option<PathBuf>,
        #[arg(long)]
        id: String,
        #[arg(long, value_enum)]
        role: Role,
        /// JSON-lines descriptor sidecar replacing the computed minutia descriptors.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        block_size: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Create a reference database from `<id>.mt.lfrt` / `<id>.tt.lfrt` pairs.
    Enroll {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        templates: PathBuf,
    },
    /// Search latents (`<id>.mt1/.mt2/.tt.lfrt`) against a database.
    Search {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        latents: PathBuf,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// Candidate list CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON lines with one score breakdown per listed candidate.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Compute a CMC curve from candidate lists and ground truth.
    Eval {
        #[arg(long)]
        candidates: PathBuf,
        /// CSV with `query_id,subject_id` rows.
        #[arg(long)]
        truth: PathBuf,
        /// Output CSV `rank,rate`.
        #[arg(long)]
        cmc: PathBuf,
        #[arg(long, default_value_t = 20)]
        max_rank: usize,
    },
    /// Fuse our candidate lists with another matcher's.
    Fuse {
        #[arg(long)]
        ours: PathBuf,
        #[arg(long)]
        theirs: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        list_len: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic benchmark: references, latents and ground truth.
    Synth {
        #[arg(long, default_value_t = 100)]
        subjects: usize,
        /// Number of latents (defaults to the subject count).
        #[arg(long)]
        queries: Option<usize>,
        #[arg(long, default_value_t = 40)]
        minutiae: usize,
        /// JSON distortion spec; fields left out are zero.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Keep the rigid motion of the spec instead of drawing one per latent.
        #[arg(long)]
        fixed_rigid: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sequential forward selection of descriptor patch types.
    Sfs {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        latents: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Candidate patch types, comma separated (defaults to the types the
        /// templates carry).
        #[arg(long, value_delimiter = ',')]
        catalog: Vec<PatchTypeId>,
        #[arg(long, default_value_t = 3)]
        max_k: usize,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check template files and print a JSON report for each.
    Validate { files: Vec<PathBuf> },
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Error plus the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_integrity() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn with_path<T>(p: &Path, r: latentid::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", p.display(), f.message);
        f
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(p) => with_path(p, Config::load(p))?,
        None => Config::default(),
    };
    match cli.command {
        Command::Extract { image, mask, minutiae, minutiae2, id, role, sidecar, block_size, out } => {
            let img = with_path(&image, load_gray_image(&image, mask.as_deref()))?;
            let m1 = with_path(&minutiae, read_minutiae_json(&minutiae))?;
            let m2 = match &minutiae2 {
                Some(p) => Some(with_path(p, read_minutiae_json(p))?),
                None => None,
            };
            let baseline = BaselineDescriptor::default();
            let side = match &sidecar {
                Some(p) => Some(with_path(p, SidecarDescriptors::read(BufReader::new(fs::File::open(p)?)))?),
                None => None,
            };
            let subset = PatchTypeCatalog::default().selected_subset;
            let desc = match &side {
                Some(s) => Descriptors::Sidecar(s, &subset),
                None => Descriptors::Computed(&baseline),
            };
            fs::create_dir_all(&out)?;
            match role {
                Role::Reference => {
                    let r = reference_subject(&img, m1, &id, block_size, &desc, &baseline)?;
                    save_template(&r.minutiae_template.into(), out.join(format!("{id}.mt.lfrt")))?;
                    save_template(&r.texture_template.into(), out.join(format!("{id}.tt.lfrt")))?;
                }
                Role::Latent => {
                    let l = latent_templates(&img, m1, m2, &id, block_size, &desc, &baseline)?;
                    write_latent(&l, &out)?;
                }
            }
            Ok(())
        }
        Command::Enroll { db, templates } => {
            let records = read_references(&templates)?;
            let handle = enroll(&records, &db)?;
            println!("enrolled {} subjects, manifest {}", handle.len(), handle.manifest().hash());
            Ok(())
        }
        Command::Search { db, latents, top_k, workers, out, scores } => {
            let db = with_path(&db, ReferenceDb::open(&db))?;
            let subjects = db.load_all()?;
            let queries = read_latents(&latents)?;
            let searcher = Searcher::new(config.scoring, workers.unwrap_or(config.search.workers))?;
            let k = top_k.unwrap_or(config.search.top_k);
            let lists = queries
                .iter()
                .map(|q| searcher.search(q, &subjects, k))
                .collect::<latentid::Result<Vec<_>>>()?;
            fs::write(&out, candidate_lists_to_csv(&lists))?;
            if let Some(p) = scores {
                fs::write(p, score_lines(&lists))?;
            }
            Ok(())
        }
        Command::Eval { candidates, truth, cmc, max_rank } => {
            let lists = read_candidates(&candidates)?;
            let truth = read_truth(&truth)?;
            let curve = compute_cmc(&lists, &truth, max_rank)?;
            fs::write(&cmc, curve.to_csv())?;
            println!("rank-1 {:.4} over {} queries", curve.at(1), curve.queries);
            Ok(())
        }
        Command::Fuse { ours, theirs, mode, list_len, out } => {
            let ours = read_candidates(&ours)?;
            let theirs: HashMap<String, CandidateList> =
                read_candidates(&theirs)?.into_iter().map(|l| (l.query_id.clone(), l)).collect();
            let mode = match mode {
                Mode::Score => FusionMode::ScoreEqualWeight,
                Mode::Borda => FusionMode::Borda { list_len: list_len.unwrap_or(config.fusion.borda_list_len) },
            };
            let fused = ours
                .iter()
                .map(|l| {
                    let empty = CandidateList { query_id: l.query_id.clone(), entries: Vec::new() };
                    fuse_external_scores(l, theirs.get(&l.query_id).unwrap_or(&empty), mode)
                })
                .collect::<latentid::Result<Vec<_>>>()?;
            fs::write(&out, candidate_lists_to_csv(&fused))?;
            Ok(())
        }
        Command::Synth { subjects, queries, minutiae, spec, fixed_rigid, seed, out } => {
            let distortion = match &spec {
                Some(p) => serde_json::from_str::<DistortionSpec>(&fs::read_to_string(p)?)
                    .map_err(|e| input_error(format!("{}: {e}", p.display())))?,
                None => BenchmarkSpec::default().distortion,
            };
            distortion.validate()?;
            let bspec = BenchmarkSpec {
                subjects,
                queries: queries.unwrap_or(subjects),
                minutiae_per_subject: minutiae,
                distortion,
                random_rigid: !fixed_rigid,
                seed,
                ..Default::default()
            };
            let b = generate_benchmark(&bspec)?;
            write_synth(&b, &out)?;
            println!("wrote {} references and {} latents to {}", b.subjects.len(), b.queries.len(), out.display());
            Ok(())
        }
        Command::Sfs { db, latents, truth, catalog, max_k, workers } => {
            let db = with_path(&db, ReferenceDb::open(&db))?;
            let subjects = db.load_all()?;
            let queries = read_latents(&latents)?;
            let truth = read_truth(&truth)?;
            let catalog = if catalog.is_empty() {
                subjects
                    .first()
                    .and_then(|s| s.minutiae_template.descriptors.first())
                    .map(|d| d.patch_types().to_vec())
                    .unwrap_or_default()
            } else {
                catalog
            };
            let searcher = Searcher::new(config.scoring, workers.unwrap_or(config.search.workers))?;
            let bench = SearchBenchmark { subjects: &subjects, queries: &queries, truth: &truth, searcher: &searcher };
            for step in sfs_patch_selection(&bench, &catalog, max_k)? {
                println!("{}", serde_json::to_string(&step).expect("step serialises"));
            }
            Ok(())
        }
        Command::Validate { files } => {
            let mut invalid = 0;
            for f in &files {
                let t = with_path(f, load_template(f))?;
                let report = validate_template(&t);
                if !report.is_valid() {
                    invalid += 1;
                }
                println!("{}", serde_json::json!({ "file": f, "report": report }));
            }
            if invalid > 0 {
                return Err(Failure { code: 3, message: format!("{invalid} template(s) failed validation") });
            }
            Ok(())
        }
    }
}

fn write_latent(l: &LatentTemplates, dir: &Path) -> CliResult<()> {
    let id = &l.query_id;
    save_template(&l.mt1.clone().into(), dir.join(format!("{id}.mt1.lfrt")))?;
    save_template(&l.mt2.clone().into(), dir.join(format!("{id}.mt2.lfrt")))?;
    save_template(&l.tt.clone().into(), dir.join(format!("{id}.tt.lfrt")))?;
    Ok(())
}

/// Ids of files in `dir` named `<id><suffix>`, sorted.
fn ids_with_suffix(dir: &Path, suffix: &str) -> CliResult<Vec<String>> {
    let mut ids = Vec::new();
    for e in fs::read_dir(dir).map_err(|e| input_error(format!("{}: {e}", dir.display())))? {
        let name = e?.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix(suffix) {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    Ok(ids)
}

fn read_references(dir: &Path) -> CliResult<Vec<SubjectRecord>> {
    let ids = ids_with_suffix(dir, ".mt.lfrt")?;
    if ids.is_empty() {
        return Err(input_error(format!("no *.mt.lfrt templates in {}", dir.display())));
    }
    ids.into_iter()
        .map(|id| {
            let mp = dir.join(format!("{id}.mt.lfrt"));
            let tp = dir.join(format!("{id}.tt.lfrt"));
            let mt = with_path(&mp, load_minutiae_template(&mp))?;
            let tt = with_path(&tp, load_texture_template(&tp))?;
            Ok(SubjectRecord { subject_id: mt.source_id.clone(), minutiae_template: mt, texture_template: tt })
        })
        .collect()
}

fn read_latents(dir: &Path) -> CliResult<Vec<LatentTemplates>> {
    let ids = ids_with_suffix(dir, ".mt1.lfrt")?;
    if ids.is_empty() {
        return Err(input_error(format!("no *.mt1.lfrt templates in {}", dir.display())));
    }
    ids.into_iter()
        .map(|id| {
            let p = |s: &str| dir.join(format!("{id}.{s}.lfrt"));
            let mt1 = with_path(&p("mt1"), load_minutiae_template(p("mt1")))?;
            let mt2 = with_path(&p("mt2"), load_minutiae_template(p("mt2")))?;
            let tt = with_path(&p("tt"), load_texture_template(p("tt")))?;
            Ok(LatentTemplates { query_id: mt1.source_id.clone(), mt1, mt2, tt })
        })
        .collect()
}

fn read_candidates(p: &Path) -> CliResult<Vec<CandidateList>> {
    let text = fs::read_to_string(p).map_err(|e| input_error(format!("{}: {e}", p.display())))?;
    with_path(p, CandidateList::read_csv(&text))
}

fn read_truth(p: &Path) -> CliResult<HashMap<String, String>> {
    let text = fs::read_to_string(p).map_err(|e| input_error(format!("{}: {e}", p.display())))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == "query_id,subject_id" {
            continue;
        }
        let (q, s) = line
            .split_once(',')
            .ok_or_else(|| input_error(format!("{}:{}: expected query_id,subject_id", p.display(), i + 1)))?;
        out.insert(q.to_string(), s.to_string());
    }
    Ok(out)
}

#[derive(Serialize)]
struct ScoreLine<'a> {
    query_id: &'a str,
    subject_id: &'a str,
    #[serde(flatten)]
    scores: &'a ScoreBreakdown,
}

fn score_lines(lists: &[CandidateList]) -> String {
    let mut s = String::new();
    for l in lists {
        for c in &l.entries {
            if let Some(b) = &c.breakdown {
                let line = ScoreLine { query_id: &l.query_id, subject_id: &c.subject_id, scores: b };
                s.push_str(&serde_json::to_string(&line).expect("scores serialise"));
                s.push('\n');
            }
        }
    }
    s
}

fn write_synth(b: &latentid::synth::Benchmark, out: &Path) -> CliResult<()> {
    let refs = out.join("references");
    let lats = out.join("latents");
    let truth_dir = out.join("truth");
    for d in [&refs, &lats, &truth_dir] {
        fs::create_dir_all(d)?;
    }
    for s in &b.subjects {
        save_template(&s.minutiae_template.clone().into(), refs.join(format!("{}.mt.lfrt", s.subject_id)))?;
        save_template(&s.texture_template.clone().into(), refs.join(format!("{}.tt.lfrt", s.subject_id)))?;
    }
    let mut truth: BTreeMap<&str, &str> = BTreeMap::new();
    for (l, gt) in &b.queries {
        write_latent(l, &lats)?;
        let json = serde_json::to_string_pretty(gt).expect("truth serialises");
        fs::write(truth_dir.join(format!("{}.json", l.query_id)), json)?;
        truth.insert(&l.query_id, &gt.subject_id);
    }
    let mut csv = String::from("query_id,subject_id\n");
    for (q, s) in truth {
        csv.push_str(&format!("{q},{s}\n"));
    }
    fs::write(out.join("truth.csv"), csv)?;
    Ok(())
}
