//! Child-process sandboxes for blueprint code.
//!
//! Each execution runs as a plain child process in its own process group
//! with a scrubbed environment, a private scratch directory as working
//! directory, kernel resource limits, and (where the host allows it) a
//! fresh network namespace plus a read-only view of the blueprint
//! directory. [`IsolationReport`] records which of these were actually
//! enforced so callers never over-claim.

mod manifest;
mod procfs;

use std::collections::BTreeMap;
use std::ffi::CString;
use std::io::{self, Read};
use std::os::unix::ffi::OsStrExt;
use std::os::unix::fs::PermissionsExt;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::OnceLock;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manifest::{
    is_pinned, validate_manifest, DependencyCatalog, DependencyManifest, ManifestParseError,
    ManifestVerdict, PackagePin, Violation,
};
pub use procfs::{group_members, sample_group, GroupUsage};

use crate::config::QuotaSpec;
use crate::protocol::{ErrorInfo, ENV_RPC_ADDR};

/// `PATH` handed to every sandboxed process.
pub const SANDBOX_PATH: &str = "/usr/local/bin:/usr/bin:/bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkPolicy {
    /// No network and no engine socket.
    Deny,
    /// No network; the engine's local socket is the only reachable endpoint.
    #[default]
    EngineSocketOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Enforcement {
    /// Kernel-enforced for this process.
    Enforced,
    /// Requested but not enforceable on this host.
    Advisory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolationReport {
    pub network_policy: NetworkPolicy,
    pub network: Enforcement,
    pub blueprint_dir_read_only: Enforcement,
    pub resource_limits: Enforcement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeDef {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
}

/// Runtime tag → interpreter. The entry file path is appended to `args`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeCatalog {
    pub runtimes: BTreeMap<String, RuntimeDef>,
}

impl RuntimeCatalog {
    pub fn with(mut self, tag: &str, program: impl Into<PathBuf>) -> Self {
        self.runtimes.insert(
            tag.to_string(),
            RuntimeDef {
                program: program.into(),
                args: Vec::new(),
            },
        );
        self
    }

    pub fn get(&self, tag: &str) -> Option<&RuntimeDef> {
        self.runtimes.get(tag)
    }

    pub fn tags(&self) -> Vec<&str> {
        self.runtimes.keys().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SandboxSpec {
    pub runtime: String,
    /// Relative to `blueprint_dir`.
    pub entry_file: PathBuf,
    pub blueprint_dir: PathBuf,
    /// Created by [`spawn`]; must not exist beforehand.
    pub scratch_dir: PathBuf,
    /// `AGENT_*` variables only.
    pub env: BTreeMap<String, String>,
    pub network: NetworkPolicy,
    pub limits: QuotaSpec,
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("runtime `{0}` is not supported")]
    UnsupportedRuntime(String),
    #[error("runtime binary {0} is missing")]
    MissingInterpreter(PathBuf),
    #[error("entry file {0} is not readable")]
    UnreadableEntry(PathBuf),
    #[error("environment variable `{0}` is outside the sandbox allowlist")]
    EnvNotAllowed(String),
    #[error("dependency manifest rejected: {0:?}")]
    Manifest(Vec<Violation>),
    #[error(transparent)]
    ManifestParse(#[from] ManifestParseError),
    #[error("scratch directory {0} already exists")]
    ScratchExists(PathBuf),
    #[error("spawn failed: {0}")]
    Io(#[from] io::Error),
}

impl SandboxError {
    pub fn to_error_info(&self) -> ErrorInfo {
        match self {
            SandboxError::UnsupportedRuntime(_)
            | SandboxError::EnvNotAllowed(_)
            | SandboxError::Manifest(_)
            | SandboxError::ManifestParse(_) => ErrorInfo::validation(self.to_string()),
            _ => ErrorInfo::fatal(self.to_string()),
        }
    }
}

/// The exact environment a sandboxed process receives.
pub fn sandbox_env(spec: &SandboxSpec) -> Result<BTreeMap<String, String>, SandboxError> {
    let mut env = BTreeMap::new();
    for (key, value) in &spec.env {
        if !key.starts_with("AGENT_") {
            return Err(SandboxError::EnvNotAllowed(key.clone()));
        }
        if spec.network == NetworkPolicy::Deny && key == ENV_RPC_ADDR {
            continue;
        }
        env.insert(key.clone(), value.clone());
    }
    env.insert("PATH".into(), SANDBOX_PATH.into());
    env.insert("HOME".into(), spec.scratch_dir.display().to_string());
    Ok(env)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct NamespaceSupport {
    net: bool,
    mount: bool,
}

/// Which namespace operations this host permits, probed once per process
/// by running the same setup on a throwaway child.
fn namespace_support() -> NamespaceSupport {
    static SUPPORT: OnceLock<NamespaceSupport> = OnceLock::new();
    *SUPPORT.get_or_init(|| {
        let probe_dir = std::env::temp_dir();
        let probe = |net: bool, mount: bool| {
            let ro = mount.then(|| CString::new(probe_dir.as_os_str().as_bytes()).unwrap());
            let mut cmd = Command::new("/bin/sh");
            cmd.args(["-c", "exit 0"])
                .stdin(Stdio::null())
                .stdout(Stdio::null())
                .stderr(Stdio::null());
            // SAFETY: the closure only performs raw syscalls on pre-built data.
            unsafe {
                cmd.pre_exec(move || enter_namespaces(net, ro.as_ref()));
            }
            cmd.status().is_ok_and(|s| s.success())
        };
        if probe(true, true) {
            NamespaceSupport {
                net: true,
                mount: true,
            }
        } else {
            NamespaceSupport {
                net: probe(true, false),
                mount: probe(false, true),
            }
        }
    })
}

/// Runs in the forked child before exec. Only async-signal-safe calls.
fn enter_namespaces(net: bool, read_only: Option<&CString>) -> io::Result<()> {
    let mut flags = 0;
    if net {
        flags |= libc::CLONE_NEWNET;
    }
    if read_only.is_some() {
        flags |= libc::CLONE_NEWNS;
    }
    if flags == 0 {
        return Ok(());
    }
    // SAFETY: plain syscalls with valid, NUL-terminated arguments.
    unsafe {
        if libc::unshare(flags) != 0 {
            return Err(io::Error::last_os_error());
        }
        if let Some(dir) = read_only {
            let root = c"/";
            if libc::mount(
                std::ptr::null(),
                root.as_ptr(),
                std::ptr::null(),
                libc::MS_REC | libc::MS_PRIVATE,
                std::ptr::null(),
            ) != 0
            {
                return Err(io::Error::last_os_error());
            }
            if libc::mount(
                dir.as_ptr(),
                dir.as_ptr(),
                std::ptr::null(),
                libc::MS_BIND | libc::MS_REC,
                std::ptr::null(),
            ) != 0
            {
                return Err(io::Error::last_os_error());
            }
            if libc::mount(
                std::ptr::null(),
                dir.as_ptr(),
                std::ptr::null(),
                libc::MS_BIND | libc::MS_REMOUNT | libc::MS_RDONLY,
                std::ptr::null(),
            ) != 0
            {
                return Err(io::Error::last_os_error());
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Rlimits {
    cpu_soft: u64,
    data: u64,
}

impl Rlimits {
    /// Kernel limits sit above the sampled quotas and act as a backstop for
    /// the sampler, so breaches are normally reported by the guard first.
    fn for_quota(limits: &QuotaSpec) -> Self {
        Rlimits {
            cpu_soft: limits.cpu_seconds.ceil() as u64 + 1,
            data: limits.memory_bytes.saturating_mul(2),
        }
    }

    fn apply(&self) -> io::Result<()> {
        let set = |resource, soft: u64, hard: u64| {
            let limit = libc::rlimit {
                rlim_cur: soft,
                rlim_max: hard,
            };
            // SAFETY: `limit` is a valid rlimit struct.
            if unsafe { libc::setrlimit(resource, &limit) } != 0 {
                Err(io::Error::last_os_error())
            } else {
                Ok(())
            }
        };
        set(libc::RLIMIT_CPU, self.cpu_soft, self.cpu_soft + 1)?;
        set(libc::RLIMIT_DATA, self.data, self.data)?;
        set(libc::RLIMIT_CORE, 0, 0)?;
        set(libc::RLIMIT_NOFILE, 256, 256)?;
        set(libc::RLIMIT_FSIZE, 64 * 1024 * 1024, 64 * 1024 * 1024)?;
        Ok(())
    }
}

/// Captured output of one stream, capped at `limit` bytes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Captured {
    pub bytes: Vec<u8>,
    pub truncated: bool,
}

pub const TRUNCATION_MARKER: &str = "\n[output truncated]\n";

impl Captured {
    pub fn to_text(&self) -> String {
        let mut text = String::from_utf8_lossy(&self.bytes).into_owned();
        if self.truncated {
            text.push_str(TRUNCATION_MARKER);
        }
        text
    }
}

fn capture<R: Read + Send + 'static>(mut stream: R, limit: usize) -> JoinHandle<Captured> {
    std::thread::spawn(move || {
        let mut out = Captured::default();
        let mut buf = [0u8; 8192];
        loop {
            match stream.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    let room = limit.saturating_sub(out.bytes.len());
                    out.bytes.extend_from_slice(&buf[..n.min(room)]);
                    if n > room {
                        out.truncated = true;
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(_) => break,
            }
        }
        out
    })
}

/// Handle to a running sandboxed process.
#[derive(Debug)]
pub struct SandboxProcess {
    child: Child,
    pgid: i32,
    stdout: Option<JoinHandle<Captured>>,
    stderr: Option<JoinHandle<Captured>>,
    scratch_dir: PathBuf,
    isolation: IsolationReport,
    exit: Option<ExitStatus>,
    reaped: bool,
}

#[derive(Debug, Clone)]
pub struct ReapOutcome {
    pub status: ExitStatus,
    pub stdout: Captured,
    pub stderr: Captured,
    /// Group members still present after reaping (should be empty).
    pub survivors: Vec<i32>,
}

impl ReapOutcome {
    pub fn exit_code(&self) -> Option<i32> {
        self.status.code()
    }

    pub fn signal(&self) -> Option<i32> {
        self.status.signal()
    }
}

impl SandboxProcess {
    pub fn pid(&self) -> u32 {
        self.child.id()
    }

    pub fn pgid(&self) -> i32 {
        self.pgid
    }

    pub fn isolation(&self) -> IsolationReport {
        self.isolation
    }

    pub fn scratch_dir(&self) -> &Path {
        &self.scratch_dir
    }

    pub fn try_wait(&mut self) -> io::Result<Option<ExitStatus>> {
        if self.exit.is_none() {
            self.exit = self.child.try_wait()?;
        }
        Ok(self.exit)
    }

    /// SIGKILL the whole process group.
    pub fn kill(&self) {
        kill_group(self.pgid);
    }

    /// Wait up to `grace` for a voluntary exit, then kill the group, collect
    /// output and delete the scratch directory.
    pub fn reap(mut self, grace: Duration) -> ReapOutcome {
        let deadline = Instant::now() + grace;
        while self.try_wait().ok().flatten().is_none() && Instant::now() < deadline {
            std::thread::sleep(Duration::from_millis(5));
        }
        self.kill();
        let status = match self.exit {
            Some(status) => status,
            None => self
                .child
                .wait()
                .unwrap_or_else(|_| ExitStatus::from_raw(libc::SIGKILL)),
        };
        // Stray members may still be exiting after SIGKILL.
        let settle = Instant::now() + Duration::from_secs(2);
        let mut survivors = group_members(self.pgid);
        while !survivors.is_empty() && Instant::now() < settle {
            kill_group(self.pgid);
            std::thread::sleep(Duration::from_millis(10));
            survivors = group_members(self.pgid);
        }
        let stdout = self.stdout.take().and_then(|h| h.join().ok()).unwrap_or_default();
        let stderr = self.stderr.take().and_then(|h| h.join().ok()).unwrap_or_default();
        let _ = std::fs::remove_dir_all(&self.scratch_dir);
        self.reaped = true;
        ReapOutcome {
            status,
            stdout,
            stderr,
            survivors,
        }
    }
}

impl Drop for SandboxProcess {
    fn drop(&mut self) {
        if !self.reaped {
            kill_group(self.pgid);
            let _ = self.child.wait();
            let _ = std::fs::remove_dir_all(&self.scratch_dir);
        }
    }
}

pub fn kill_group(pgid: i32) {
    if pgid > 1 {
        // SAFETY: sending a signal has no memory-safety preconditions.
        unsafe {
            libc::killpg(pgid, libc::SIGKILL);
        }
    }
}

/// Start `spec` under `runtimes`. When a `catalog` is given and the
/// blueprint directory holds a `blueprint.manifest`, the manifest must pass
/// [`validate_manifest`] before anything is spawned.
pub fn spawn(
    spec: &SandboxSpec,
    runtimes: &RuntimeCatalog,
    catalog: Option<&DependencyCatalog>,
) -> Result<SandboxProcess, SandboxError> {
    let runtime = runtimes
        .get(&spec.runtime)
        .ok_or_else(|| SandboxError::UnsupportedRuntime(spec.runtime.clone()))?;
    if !runtime.program.is_file() {
        return Err(SandboxError::MissingInterpreter(runtime.program.clone()));
    }
    let entry = spec.blueprint_dir.join(&spec.entry_file);
    if std::fs::File::open(&entry).is_err() || !entry.is_file() {
        return Err(SandboxError::UnreadableEntry(entry));
    }
    if let Some(catalog) = catalog {
        let manifest_path = spec.blueprint_dir.join("blueprint.manifest");
        if manifest_path.exists() {
            let manifest = DependencyManifest::load(&manifest_path)?;
            let mut violations = validate_manifest(&manifest, catalog).violations;
            if manifest.runtime != spec.runtime {
                violations.push(Violation::UnknownRuntime {
                    runtime: manifest.runtime.clone(),
                });
            }
            if !violations.is_empty() {
                return Err(SandboxError::Manifest(violations));
            }
        }
    }
    let env = sandbox_env(spec)?;

    if spec.scratch_dir.exists() {
        return Err(SandboxError::ScratchExists(spec.scratch_dir.clone()));
    }
    if let Some(parent) = spec.scratch_dir.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::create_dir(&spec.scratch_dir)?;
    std::fs::set_permissions(&spec.scratch_dir, std::fs::Permissions::from_mode(0o700))?;

    let support = namespace_support();
    let blueprint_dir = spec
        .blueprint_dir
        .canonicalize()
        .unwrap_or_else(|_| spec.blueprint_dir.clone());
    let read_only = support
        .mount
        .then(|| CString::new(blueprint_dir.as_os_str().as_bytes()))
        .transpose()
        .map_err(|e| SandboxError::Io(io::Error::new(io::ErrorKind::InvalidInput, e)))?;
    let net = support.net;
    let limits = Rlimits::for_quota(&spec.limits);

    let mut cmd = Command::new(&runtime.program);
    cmd.args(&runtime.args)
        .arg(&entry)
        .env_clear()
        .envs(&env)
        .current_dir(&spec.scratch_dir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    // SAFETY: the hook performs setrlimit/unshare/mount syscalls on data
    // prepared before fork; no allocation happens in the child.
    unsafe {
        cmd.pre_exec(move || {
            limits.apply()?;
            enter_namespaces(net, read_only.as_ref())
        });
    }
    let mut child = match cmd.spawn() {
        Ok(child) => child,
        Err(e) => {
            let _ = std::fs::remove_dir_all(&spec.scratch_dir);
            return Err(SandboxError::Io(e));
        }
    };
    let pgid = child.id() as i32;
    let cap = spec.limits.max_stdout_bytes as usize;
    let stdout = child.stdout.take().map(|s| capture(s, cap));
    let stderr = child.stderr.take().map(|s| capture(s, cap));
    let enforcement = |on: bool| {
        if on {
            Enforcement::Enforced
        } else {
            Enforcement::Advisory
        }
    };
    Ok(SandboxProcess {
        child,
        pgid,
        stdout,
        stderr,
        scratch_dir: spec.scratch_dir.clone(),
        isolation: IsolationReport {
            network_policy: spec.network,
            network: enforcement(net),
            blueprint_dir_read_only: enforcement(support.mount),
            resource_limits: Enforcement::Enforced,
        },
        exit: None,
        reaped: false,
    })
}

/// Descriptor of the network policy that [`spawn`] would apply on this host.
pub fn isolate_network(policy: NetworkPolicy) -> (NetworkPolicy, Enforcement) {
    let enforced = namespace_support().net;
    (
        policy,
        if enforced {
            Enforcement::Enforced
        } else {
            Enforcement::Advisory
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(dir: &Path, entry: &str) -> SandboxSpec {
        SandboxSpec {
            runtime: "sh".into(),
            entry_file: entry.into(),
            blueprint_dir: dir.join("bp"),
            scratch_dir: dir.join("scratch/one"),
            env: BTreeMap::from([
                ("AGENT_EXEC_ID".to_string(), "e1".to_string()),
                (ENV_RPC_ADDR.to_string(), "/tmp/x.sock".to_string()),
            ]),
            network: NetworkPolicy::EngineSocketOnly,
            limits: QuotaSpec::default(),
        }
    }

    fn shell() -> RuntimeCatalog {
        RuntimeCatalog::default().with("sh", "/bin/sh")
    }

    fn setup(script: &str) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("bp")).unwrap();
        std::fs::write(dir.path().join("bp/main.sh"), script).unwrap();
        dir
    }

    #[test]
    fn environment_is_exactly_the_allowlist() {
        let dir = setup("env | sort\n");
        let proc = spawn(&spec(dir.path(), "main.sh"), &shell(), None).unwrap();
        let out = proc.reap(Duration::from_secs(5));
        let text = String::from_utf8(out.stdout.bytes).unwrap();
        let keys: Vec<&str> = text
            .lines()
            .filter_map(|l| l.split_once('=').map(|(k, _)| k))
            // The shell itself exports PWD/SHLVL/_; everything else must come from us.
            .filter(|k| !matches!(*k, "PWD" | "SHLVL" | "_" | "OLDPWD"))
            .collect();
        assert_eq!(keys, ["AGENT_EXEC_ID", ENV_RPC_ADDR, "HOME", "PATH"]);
    }

    #[test]
    fn deny_policy_drops_engine_socket() {
        let dir = setup("true\n");
        let mut s = spec(dir.path(), "main.sh");
        s.network = NetworkPolicy::Deny;
        let env = sandbox_env(&s).unwrap();
        assert!(!env.contains_key(ENV_RPC_ADDR));
    }

    #[test]
    fn non_agent_env_rejected() {
        let dir = setup("true\n");
        let mut s = spec(dir.path(), "main.sh");
        s.env.insert("SECRET".into(), "x".into());
        assert!(matches!(
            spawn(&s, &shell(), None),
            Err(SandboxError::EnvNotAllowed(_))
        ));
    }

    #[test]
    fn scratch_is_cwd_and_removed_on_reap() {
        let dir = setup("pwd\ntouch made-here\nls\n");
        let s = spec(dir.path(), "main.sh");
        let proc = spawn(&s, &shell(), None).unwrap();
        let mode = std::fs::metadata(proc.scratch_dir()).unwrap().permissions().mode();
        assert_eq!(mode & 0o777, 0o700);
        let out = proc.reap(Duration::from_secs(5));
        let text = String::from_utf8(out.stdout.bytes).unwrap();
        assert!(text.contains("scratch/one"));
        assert!(text.contains("made-here"));
        assert!(!s.scratch_dir.exists());
    }

    #[test]
    fn blueprint_dir_write_fails_when_enforced() {
        let dir = setup("echo hacked > main.sh && echo wrote || echo denied\n");
        let mut s = spec(dir.path(), "main.sh");
        // Run from inside the blueprint dir to attempt the overwrite.
        std::fs::write(
            dir.path().join("bp/main.sh"),
            format!(
                "cd {} && (echo hacked > main.sh) 2>/dev/null && echo wrote || echo denied\n",
                dir.path().join("bp").display()
            ),
        )
        .unwrap();
        s.scratch_dir = dir.path().join("scratch/two");
        let proc = spawn(&s, &shell(), None).unwrap();
        let enforced = proc.isolation().blueprint_dir_read_only == Enforcement::Enforced;
        let out = proc.reap(Duration::from_secs(5));
        let text = String::from_utf8(out.stdout.bytes).unwrap();
        if enforced {
            assert_eq!(text.trim(), "denied");
            assert!(std::fs::read_to_string(dir.path().join("bp/main.sh"))
                .unwrap()
                .contains("cd "));
        }
    }

    #[test]
    fn output_is_capped_with_marker() {
        let dir = setup("i=0; while [ $i -lt 200 ]; do echo 0123456789; i=$((i+1)); done\n");
        let mut s = spec(dir.path(), "main.sh");
        s.limits.max_stdout_bytes = 100;
        let out = spawn(&s, &shell(), None).unwrap().reap(Duration::from_secs(5));
        assert_eq!(out.stdout.bytes.len(), 100);
        assert!(out.stdout.truncated);
        assert!(out.stdout.to_text().ends_with(TRUNCATION_MARKER));
    }

    #[test]
    fn unsupported_runtime_and_missing_entry() {
        let dir = setup("true\n");
        let mut s = spec(dir.path(), "main.sh");
        s.runtime = "cobol".into();
        assert!(matches!(
            spawn(&s, &shell(), None),
            Err(SandboxError::UnsupportedRuntime(_))
        ));
        let s = spec(dir.path(), "absent.sh");
        let err = spawn(&s, &shell(), None).unwrap_err();
        assert_eq!(err.to_error_info().class, crate::protocol::ErrorClass::Fatal);
    }

    #[test]
    fn manifest_outside_catalog_blocks_spawn() {
        let dir = setup("true\n");
        std::fs::write(
            dir.path().join("bp/blueprint.manifest"),
            r#"{"runtime": "sh", "packages": [{"name": "leftpad", "version": "1.0.0"}]}"#,
        )
        .unwrap();
        let catalog = DependencyCatalog::parse(r#"{"runtimes": {"sh": []}}"#).unwrap();
        let s = spec(dir.path(), "main.sh");
        let err = spawn(&s, &shell(), Some(&catalog)).unwrap_err();
        assert!(matches!(err, SandboxError::Manifest(ref v) if v.len() == 1));
        assert_eq!(err.to_error_info().class, crate::protocol::ErrorClass::Validation);
        assert!(!s.scratch_dir.exists());
    }

    #[test]
    fn kill_reaps_the_whole_group() {
        let dir = setup("sleep 30 &\nsleep 30\n");
        let proc = spawn(&spec(dir.path(), "main.sh"), &shell(), None).unwrap();
        let pgid = proc.pgid();
        std::thread::sleep(Duration::from_millis(100));
        assert!(group_members(pgid).len() >= 2);
        let started = Instant::now();
        let out = proc.reap(Duration::ZERO);
        assert!(started.elapsed() < Duration::from_secs(2));
        assert_eq!(out.signal(), Some(libc::SIGKILL));
        assert!(out.survivors.is_empty(), "survivors: {:?}", out.survivors);
    }

    #[test]
    fn network_descriptor_is_honest() {
        let (policy, enforcement) = isolate_network(NetworkPolicy::Deny);
        assert_eq!(policy, NetworkPolicy::Deny);
        assert_eq!(enforcement == Enforcement::Enforced, namespace_support().net);
    }
}
