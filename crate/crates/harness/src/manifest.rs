//! Run manifests: enough provenance to re-derive a run from the commit,
//! the lockfile digest and the seeds.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::matches::{read_rows, run_match, MatchResult, MatchSpec};
use crate::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ROWS_FILE: &str = "rows.csv";

/// Environment variables copied into the manifest when set.
pub const TRACKED_ENV: [&str; 5] = ["RUSTFLAGS", "RAYON_NUM_THREADS", "RUST_LOG", "CARGO_PROFILE", "CMTG_RUN_DIR"];

/// Libraries whose resolved versions are recorded.
pub const KEY_LIBRARIES: [&str; 6] = ["rand", "rand_chacha", "serde", "serde_json", "statrs", "sha2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub schema_version: u32,
    pub name: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcsInfo {
    pub commit: String,
    pub branch: String,
    pub dirty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeInfo {
    pub rustc: String,
    pub platform: String,
    pub harness_version: String,
    pub libraries: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockfileInfo {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub args: Vec<String>,
    pub host: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub seeds: Vec<u64>,
    /// Per-seed digest of the first 32 bytes of the ChaCha8 stream.
    pub fingerprints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run: RunInfo,
    pub vcs: VcsInfo,
    pub runtime: RuntimeInfo,
    pub lockfile: LockfileInfo,
    pub invocation: Invocation,
    pub environment: BTreeMap<String, String>,
    pub config: serde_json::Value,
    pub seeds: SeedInfo,
}

/// What a manifest is written from.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub name: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    /// Working tree queried for the commit, branch and dirty flag.
    pub repo: PathBuf,
    pub lockfile: PathBuf,
}

impl RunContext {
    /// Context rooted at the workspace this crate was built from.
    pub fn here(name: &str, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        let repo = workspace_root();
        RunContext {
            name: name.to_string(),
            args: std::env::args().collect(),
            config,
            seeds,
            lockfile: repo.join("Cargo.lock"),
            repo,
        }
    }
}

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap_or_else(|_| PathBuf::from("."))
}

pub fn rng_fingerprint(seed: u64) -> String {
    let mut bytes = [0u8; 32];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut bytes);
    hex::encode(&Sha256::digest(bytes)[..8])
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let data = std::fs::read(path).map_err(|e| HarnessError::Lockfile { path: path.to_path_buf(), source: e })?;
    Ok(hex::encode(Sha256::digest(&data)))
}

fn git(repo: &Path, args: &[&str]) -> Option<String> {
    let out = Command::new("git").arg("-C").arg(repo).args(args).output().ok()?;
    out.status.success().then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

pub fn vcs_info(repo: &Path) -> VcsInfo {
    VcsInfo {
        commit: git(repo, &["rev-parse", "HEAD"]).unwrap_or_else(|| "unknown".into()),
        branch: git(repo, &["rev-parse", "--abbrev-ref", "HEAD"]).unwrap_or_else(|| "unknown".into()),
        dirty: git(repo, &["status", "--porcelain"]).map(|s| !s.is_empty()).unwrap_or(true),
    }
}

/// Resolved versions of `names` from a Cargo lockfile.
pub fn locked_versions(lockfile: &Path, names: &[&str]) -> Result<BTreeMap<String, String>> {
    #[derive(Deserialize)]
    struct Lock {
        #[serde(default)]
        package: Vec<Pkg>,
    }
    #[derive(Deserialize)]
    struct Pkg {
        name: String,
        version: String,
    }
    let text =
        std::fs::read_to_string(lockfile).map_err(|e| HarnessError::Lockfile { path: lockfile.to_path_buf(), source: e })?;
    let lock: Lock = toml::from_str(&text)?;
    let mut out = BTreeMap::new();
    for p in lock.package.into_iter().filter(|p| names.contains(&p.name.as_str())) {
        // Several versions may be locked; keep them all.
        out.entry(p.name).and_modify(|v: &mut String| {
            v.push_str(", ");
            v.push_str(&p.version);
        }).or_insert(p.version);
    }
    Ok(out)
}

fn rustc_version() -> String {
    Command::new("rustc")
        .arg("--version")
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

fn host_id() -> String {
    std::env::var("HOSTNAME")
        .ok()
        .or_else(|| std::fs::read_to_string("/etc/hostname").ok().map(|s| s.trim().to_string()))
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

pub fn build_manifest(ctx: &RunContext) -> Result<Manifest> {
    let sha256 = file_sha256(&ctx.lockfile)?;
    let environment = TRACKED_ENV
        .iter()
        .filter_map(|k| std::env::var(k).ok().map(|v| (k.to_string(), v)))
        .collect();
    Ok(Manifest {
        run: RunInfo {
            schema_version: SCHEMA_VERSION,
            name: ctx.name.clone(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        },
        vcs: vcs_info(&ctx.repo),
        runtime: RuntimeInfo {
            rustc: rustc_version(),
            platform: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
            harness_version: env!("CARGO_PKG_VERSION").to_string(),
            libraries: locked_versions(&ctx.lockfile, &KEY_LIBRARIES)?,
        },
        lockfile: LockfileInfo { path: ctx.lockfile.clone(), sha256 },
        invocation: Invocation { args: ctx.args.clone(), host: host_id() },
        environment,
        config: ctx.config.clone(),
        seeds: SeedInfo { seeds: ctx.seeds.clone(), fingerprints: ctx.seeds.iter().map(|&s| rng_fingerprint(s)).collect() },
    })
}

/// Build the manifest for `ctx` and write it to `path`.
pub fn write_manifest(ctx: &RunContext, path: &Path) -> Result<Manifest> {
    let m = build_manifest(ctx)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(&m)?)?;
    Ok(m)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Result of recomputing a manifest's digest fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCheck {
    pub lockfile_matches: bool,
    pub fingerprints_match: bool,
    pub commit_matches: bool,
    pub sections_complete: bool,
    pub issues: Vec<String>,
}

impl ManifestCheck {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }
}

pub fn verify_manifest(m: &Manifest, repo: &Path) -> Result<ManifestCheck> {
    let mut issues = Vec::new();
    let lock_now = file_sha256(&m.lockfile.path)?;
    let lockfile_matches = lock_now == m.lockfile.sha256;
    if !lockfile_matches {
        issues.push(format!("lockfile digest {} != recorded {}", lock_now, m.lockfile.sha256));
    }
    let fingerprints_match = m.seeds.seeds.len() == m.seeds.fingerprints.len()
        && m.seeds.seeds.iter().zip(&m.seeds.fingerprints).all(|(&s, f)| rng_fingerprint(s) == *f);
    if !fingerprints_match {
        issues.push("seed fingerprints do not recompute".into());
    }
    let commit_now = vcs_info(repo).commit;
    let commit_matches = commit_now == m.vcs.commit;
    if !commit_matches {
        issues.push(format!("checked-out commit {commit_now} != recorded {}", m.vcs.commit));
    }
    let sections_complete = m.run.schema_version == SCHEMA_VERSION
        && !m.run.name.is_empty()
        && !m.run.timestamp.is_empty()
        && !m.runtime.rustc.is_empty()
        && !m.invocation.args.is_empty()
        && !m.config.is_null()
        && !m.seeds.seeds.is_empty();
    if !sections_complete {
        issues.push("manifest has empty sections".into());
    }
    Ok(ManifestCheck { lockfile_matches, fingerprints_match, commit_matches, sections_complete, issues })
}

/// Config section of an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    #[serde(rename = "match")]
    pub spec: MatchSpec,
}

/// Run an evaluation and record it under `dir`: manifest plus result rows.
pub fn record_eval(spec: &MatchSpec, dir: &Path, mut ctx: RunContext) -> Result<(Manifest, MatchResult)> {
    let res = run_match(spec)?;
    std::fs::create_dir_all(dir)?;
    res.write_csv(&dir.join(ROWS_FILE))?;
    ctx.config = serde_json::to_value(EvalConfig { spec: spec.clone() })?;
    ctx.seeds = spec.seeds.clone();
    let m = write_manifest(&ctx, &dir.join(MANIFEST_FILE))?;
    Ok((m, res))
}

/// Re-run the evaluation a manifest describes.
pub fn rerun(m: &Manifest) -> Result<MatchResult> {
    let cfg: EvalConfig = serde_json::from_value(m.config.clone())
        .map_err(|e| HarnessError::Manifest(format!("config is not an evaluation: {e}")))?;
    if cfg.spec.seeds != m.seeds.seeds {
        return Err(HarnessError::Manifest("seed section disagrees with the match spec".into()));
    }
    run_match(&cfg.spec)
}

/// Re-run a recorded evaluation and compare per-episode trace hashes with
/// the stored rows. Returns the indices of mismatching episodes.
pub fn verify_rerun(dir: &Path) -> Result<Vec<usize>> {
    let m = read_manifest(&dir.join(MANIFEST_FILE))?;
    let stored = read_rows(&dir.join(ROWS_FILE))?;
    let fresh = rerun(&m)?;
    if stored.len() != fresh.rows.len() {
        return Err(HarnessError::Manifest(format!("{} stored rows, {} rerun", stored.len(), fresh.rows.len())));
    }
    Ok(stored
        .iter()
        .zip(&fresh.rows)
        .enumerate()
        .filter(|(_, (a, b))| a.trace_hash != b.trace_hash || a != b)
        .map(|(i, _)| i)
        .collect())
}
