//! On-disk reference database and 1:N search.
//!
//! A database is a directory holding `manifest.json` and two template files
//! per subject. Search scores a latent against every subject, optionally on
//! a worker pool, and ranks by final score with ties broken by subject id.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{load_minutiae_template, load_texture_template, save_template};
use crate::error::{Error, Result};
use crate::model::{LatentTemplates, SubjectRecord};
use crate::scoring::{compare, ScoreBreakdown, ScoringConfig};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub minutiae_file: String,
    pub texture_file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub count: usize,
    pub subjects: Vec<ManifestEntry>,
}

impl Manifest {
    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serialises");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceDb {
    root: PathBuf,
    manifest: Manifest,
}

/// File-name-safe form of a subject id.
fn file_stem(index: usize, subject_id: &str) -> String {
    let clean: String = subject_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .take(64)
        .collect();
    format!("{index:06}_{clean}")
}

/// Writes `records` into a fresh database at `db_path`.
///
/// The manifest is written last, so an interrupted enrolment leaves no
/// openable database.
pub fn enroll(records: &[SubjectRecord], db_path: impl AsRef<Path>) -> Result<ReferenceDb> {
    let root = db_path.as_ref().to_path_buf();
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.subject_id.as_str()) {
            return Err(Error::DuplicateSubject(r.subject_id.clone()));
        }
    }
    if root.join(MANIFEST_FILE).exists() {
        return Err(Error::InvalidInput(format!(
            "{} already holds a database",
            root.display()
        )));
    }
    fs::create_dir_all(root.join("templates"))?;
    let mut subjects = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let stem = file_stem(i, &r.subject_id);
        let entry = ManifestEntry {
            subject_id: r.subject_id.clone(),
            minutiae_file: format!("templates/{stem}.mt.lfrt"),
            texture_file: format!("templates/{stem}.tt.lfrt"),
        };
        save_template(&r.minutiae_template.clone().into(), root.join(&entry.minutiae_file))?;
        save_template(&r.texture_template.clone().into(), root.join(&entry.texture_file))?;
        subjects.push(entry);
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        count: subjects.len(),
        subjects,
    };
    let tmp = root.join("manifest.json.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, root.join(MANIFEST_FILE))?;
    Ok(ReferenceDb { root, manifest })
}

impl ReferenceDb {
    /// Opens a database and checks that the manifest is consistent.
    pub fn open(db_path: impl AsRef<Path>) -> Result<Self> {
        let root = db_path.as_ref().to_path_buf();
        let text = fs::read_to_string(root.join(MANIFEST_FILE))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::MalformedPayload(format!("manifest: {e}")))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::VersionMismatch {
                found: manifest.version as u16,
                expected: MANIFEST_VERSION as u16,
            });
        }
        if manifest.count != manifest.subjects.len() {
            return Err(Error::MalformedPayload(format!(
                "manifest count {} but {} entries",
                manifest.count,
                manifest.subjects.len()
            )));
        }
        let mut seen = HashSet::new();
        for e in &manifest.subjects {
            if !seen.insert(e.subject_id.as_str()) {
                return Err(Error::DuplicateSubject(e.subject_id.clone()));
            }
            for f in [&e.minutiae_file, &e.texture_file] {
                if !root.join(f).is_file() {
                    return Err(Error::MalformedPayload(format!(
                        "manifest entry {} points at missing file {f}",
                        e.subject_id
                    )));
                }
            }
        }
        Ok(Self { root, manifest })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.manifest.count
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.count == 0
    }

    pub fn load_subject(&self, entry: &ManifestEntry) -> Result<SubjectRecord> {
        let mt = load_minutiae_template(self.root.join(&entry.minutiae_file))?;
        let tt = load_texture_template(self.root.join(&entry.texture_file))?;
        if mt.source_id != entry.subject_id || tt.source_id != entry.subject_id {
            return Err(Error::MalformedPayload(format!(
                "templates of {} carry source ids {} / {}",
                entry.subject_id, mt.source_id, tt.source_id
            )));
        }
        Ok(SubjectRecord {
            subject_id: entry.subject_id.clone(),
            minutiae_template: mt,
            texture_template: tt,
        })
    }

    /// Reads every subject into memory, in manifest order.
    pub fn load_all(&self) -> Result<Vec<SubjectRecord>> {
        self.manifest.subjects.iter().map(|e| self.load_subject(e)).collect()
    }
}

/// One ranked candidate. External matchers provide only a score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub subject_id: String,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<ScoreBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub query_id: String,
    pub entries: Vec<Candidate>,
}

impl CandidateList {
    /// Sorts descending by score, ties by ascending subject id, and keeps
    /// the first `k`.
    pub fn ranked(query_id: String, mut entries: Vec<Candidate>, k: usize) -> Self {
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.subject_id.cmp(&b.subject_id))
        });
        entries.truncate(k);
        Self { query_id, entries }
    }

    /// 1-based rank of a subject, if listed.
    pub fn rank_of(&self, subject_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|c| c.subject_id == subject_id)
            .map(|p| p + 1)
    }

    pub const CSV_HEADER: &'static str =
        "query_id,rank,subject_id,score,s_mt1,s_mt2,s_tt,n_corr_1,n_corr_2,n_corr_tt";

    /// CSV rows (without header). Floats use shortest round-trip formatting.
    pub fn write_csv_rows(&self, out: &mut String) {
        use std::fmt::Write as _;
        for (r, c) in self.entries.iter().enumerate() {
            let _ = write!(out, "{},{},{},{}", self.query_id, r + 1, c.subject_id, c.score);
            match &c.breakdown {
                Some(b) => {
                    let _ = writeln!(
                        out,
                        ",{},{},{},{},{},{}",
                        b.s_mt1, b.s_mt2, b.s_tt, b.n_corr_1, b.n_corr_2, b.n_corr_tt
                    );
                }
                None => out.push_str(",,,,,,\n"),
            }
        }
    }

    /// Parses rows written by [`write_csv_rows`](Self::write_csv_rows) (a
    /// header line is skipped). Rows are grouped by query id in first-seen
    /// order; rows of one query must be in rank order.
    pub fn read_csv(text: &str) -> Result<Vec<CandidateList>> {
        let mut lists: Vec<CandidateList> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("query_id,") {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::InvalidInput(format!("candidate csv line {}: {line:?}", ln + 1));
            if f.len() < 4 {
                return Err(bad());
            }
            let score: f64 = f[3].parse().map_err(|_| bad())?;
            let breakdown = if f.len() >= 10 && !f[4].is_empty() {
                let p = |s: &str| s.parse::<f64>().map_err(|_| bad());
                let u = |s: &str| s.parse::<usize>().map_err(|_| bad());
                Some(ScoreBreakdown {
                    s_mt1: p(f[4])?,
                    s_mt2: p(f[5])?,
                    s_tt: p(f[6])?,
                    s_final: score,
                    n_corr_1: u(f[7])?,
                    n_corr_2: u(f[8])?,
                    n_corr_tt: u(f[9])?,
                })
            } else {
                None
            };
            let c = Candidate {
                subject_id: f[2].to_string(),
                score,
                breakdown,
            };
            match lists.iter_mut().find(|l| l.query_id == f[0]) {
                Some(l) => l.entries.push(c),
                None => lists.push(CandidateList {
                    query_id: f[0].to_string(),
                    entries: vec![c],
                }),
            }
        }
        Ok(lists)
    }
}

/// Writes candidate lists as one CSV document.
pub fn candidate_lists_to_csv(lists: &[CandidateList]) -> String {
    let mut s = String::from(CandidateList::CSV_HEADER);
    s.push('\n');
    for l in lists {
        l.write_csv_rows(&mut s);
    }
    s
}

/// 1:N search engine with a fixed worker count.
pub struct Searcher {
    cfg: ScoringConfig,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Searcher {
    /// `workers <= 1` runs on the calling thread.
    pub fn new(cfg: ScoringConfig, workers: usize) -> Result<Self> {
        #[cfg(feature = "parallel")]
        {
            let pool = if workers > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .build()
                        .map_err(|e| Error::Config(format!("worker pool: {e}")))?,
                )
            } else {
                None
            };
            Ok(Self { cfg, pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            Ok(Self { cfg })
        }
    }

    pub fn config(&self) -> &ScoringConfig {
        &self.cfg
    }

    /// Scores `latent` against every subject and keeps the top `k`.
    pub fn search(&self, latent: &LatentTemplates, subjects: &[SubjectRecord], k: usize) -> Result<CandidateList> {
        if subjects.is_empty() {
            return Err(Error::EmptyDb);
        }
        let score_one = |s: &SubjectRecord| -> Result<Candidate> {
            let b = compare(
                &latent.mt1,
                &latent.mt2,
                &latent.tt,
                &s.minutiae_template,
                &s.texture_template,
                &self.cfg,
            )?;
            Ok(Candidate {
                subject_id: s.subject_id.clone(),
                score: b.s_final,
                breakdown: Some(b),
            })
        };
        #[cfg(feature = "parallel")]
        let scored: Result<Vec<Candidate>> = match &self.pool {
            Some(pool) => {
                use rayon::prelude::*;
                pool.install(|| subjects.par_iter().map(score_one).collect())
            }
            None => subjects.iter().map(score_one).collect(),
        };
        #[cfg(not(feature = "parallel"))]
        let scored: Result<Vec<Candidate>> = subjects.iter().map(score_one).collect();
        Ok(CandidateList::ranked(latent.query_id.clone(), scored?, k))
    }

    pub fn search_db(&self, latent: &LatentTemplates, db: &ReferenceDb, k: usize) -> Result<CandidateList> {
        if db.is_empty() {
            return Err(Error::EmptyDb);
        }
        self.search(latent, &db.load_all()?, k)
    }
}

/// Single-threaded convenience wrapper around [`Searcher::search`].
pub fn search(
    latent: &LatentTemplates,
    subjects: &[SubjectRecord],
    k: usize,
    cfg: &ScoringConfig,
) -> Result<CandidateList> {
    Searcher::new(*cfg, 1)?.search(latent, subjects, k)
}
