//! Quota guard: samples a sandbox's process group and kills it on breach.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::{QuotaDimension, QuotaSpec};
use crate::sandbox::{kill_group, sample_group};

pub const SAMPLE_INTERVAL: Duration = Duration::from_millis(100);

/// Measured usage. `memory_bytes` is the peak sampled group RSS and
/// `wall_seconds` excludes time spent blocked on the user.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QuotaUsage {
    pub cpu_seconds: f64,
    pub memory_bytes: u64,
    pub wall_seconds: f64,
    pub frames: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct Breach {
    pub dimension: QuotaDimension,
    pub detected_at: Instant,
}

#[derive(Debug, Default)]
struct Pause {
    since: Option<Instant>,
    total: Duration,
}

#[derive(Debug)]
struct Shared {
    pgid: i32,
    started: Instant,
    limits: QuotaSpec,
    stop: AtomicBool,
    frames: AtomicU64,
    usage: Mutex<QuotaUsage>,
    breach: Mutex<Option<Breach>>,
    pause: Mutex<Pause>,
}

impl Shared {
    fn active_wall(&self, now: Instant) -> Duration {
        let pause = self.pause.lock().unwrap();
        let paused = pause.total + pause.since.map_or(Duration::ZERO, |s| now - s);
        (now - self.started).saturating_sub(paused)
    }

    /// First breach wins; later ones are ignored.
    fn trip(&self, dimension: QuotaDimension) {
        let mut breach = self.breach.lock().unwrap();
        if breach.is_none() {
            *breach = Some(Breach {
                dimension,
                detected_at: Instant::now(),
            });
            kill_group(self.pgid);
        }
    }

    fn sample(&self) {
        let now = Instant::now();
        let measured = sample_group(self.pgid);
        let wall = self.active_wall(now);
        let usage = {
            let mut usage = self.usage.lock().unwrap();
            if measured.processes > 0 {
                usage.cpu_seconds = usage.cpu_seconds.max(measured.cpu_seconds);
                usage.memory_bytes = usage.memory_bytes.max(measured.rss_bytes);
            }
            usage.wall_seconds = wall.as_secs_f64();
            usage.frames = self.frames.load(Ordering::SeqCst);
            *usage
        };
        if usage.memory_bytes > self.limits.memory_bytes {
            self.trip(QuotaDimension::Memory);
        } else if usage.cpu_seconds > self.limits.cpu_seconds {
            self.trip(QuotaDimension::Cpu);
        } else if wall.as_secs_f64() >= self.limits.wall_clock_seconds {
            self.trip(QuotaDimension::WallClock);
        }
    }
}

/// Runs beside the serve loop. The two share only the usage snapshot, the
/// frame counter and the kill.
#[derive(Debug)]
pub struct QuotaGuard {
    shared: Arc<Shared>,
    thread: Option<JoinHandle<()>>,
}

impl QuotaGuard {
    pub fn start(pgid: i32, limits: QuotaSpec) -> Self {
        let shared = Arc::new(Shared {
            pgid,
            started: Instant::now(),
            limits,
            stop: AtomicBool::new(false),
            frames: AtomicU64::new(0),
            usage: Mutex::new(QuotaUsage::default()),
            breach: Mutex::new(None),
            pause: Mutex::new(Pause::default()),
        });
        let worker = shared.clone();
        let thread = std::thread::spawn(move || {
            while !worker.stop.load(Ordering::SeqCst) {
                worker.sample();
                if worker.breach.lock().unwrap().is_some() {
                    break;
                }
                // Wake in time for the wall-clock deadline.
                let remaining = Duration::from_secs_f64(worker.limits.wall_clock_seconds)
                    .saturating_sub(worker.active_wall(Instant::now()));
                let nap = if worker.pause.lock().unwrap().since.is_some() {
                    SAMPLE_INTERVAL
                } else {
                    SAMPLE_INTERVAL.min(remaining.max(Duration::from_millis(1)))
                };
                std::thread::sleep(nap);
            }
        });
        QuotaGuard {
            shared,
            thread: Some(thread),
        }
    }

    pub fn breach(&self) -> Option<Breach> {
        *self.shared.breach.lock().unwrap()
    }

    /// Count one frame from the blueprint; trips the frame quota when the
    /// count exceeds the limit. Returns false once tripped.
    pub fn count_frame(&self) -> bool {
        let n = self.shared.frames.fetch_add(1, Ordering::SeqCst) + 1;
        if n > self.shared.limits.max_protocol_frames {
            self.shared.trip(QuotaDimension::Frames);
            return false;
        }
        true
    }

    /// Stop the wall clock while the blueprint is blocked on the user.
    pub fn pause(&self) {
        let mut pause = self.shared.pause.lock().unwrap();
        if pause.since.is_none() {
            pause.since = Some(Instant::now());
        }
    }

    pub fn resume(&self) {
        let mut pause = self.shared.pause.lock().unwrap();
        if let Some(since) = pause.since.take() {
            pause.total += since.elapsed();
        }
    }

    pub fn usage(&self) -> QuotaUsage {
        *self.shared.usage.lock().unwrap()
    }

    /// Stop sampling and return the final usage.
    pub fn stop(mut self) -> QuotaUsage {
        self.halt();
        let mut usage = self.usage();
        usage.wall_seconds = self.shared.active_wall(Instant::now()).as_secs_f64();
        usage.frames = self.shared.frames.load(Ordering::SeqCst);
        usage
    }

    fn halt(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for QuotaGuard {
    fn drop(&mut self) {
        self.halt();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::os::unix::process::CommandExt;
    use std::process::Command;

    fn spawn_group(script: &str) -> std::process::Child {
        Command::new("/bin/sh")
            .args(["-c", script])
            .process_group(0)
            .spawn()
            .unwrap()
    }

    #[test]
    fn wall_clock_breach_kills_group() {
        let mut child = spawn_group("sleep 30");
        let limits = QuotaSpec {
            wall_clock_seconds: 0.3,
            ..QuotaSpec::default()
        };
        let guard = QuotaGuard::start(child.id() as i32, limits);
        let status = child.wait().unwrap();
        let breach = guard.breach().unwrap();
        assert_eq!(breach.dimension, QuotaDimension::WallClock);
        assert!(!status.success());
        let usage = guard.stop();
        assert!(usage.wall_seconds >= 0.3);
    }

    #[test]
    fn paused_time_does_not_count() {
        let mut child = spawn_group("sleep 30");
        let limits = QuotaSpec {
            wall_clock_seconds: 0.4,
            ..QuotaSpec::default()
        };
        let guard = QuotaGuard::start(child.id() as i32, limits);
        guard.pause();
        std::thread::sleep(Duration::from_millis(600));
        assert!(guard.breach().is_none());
        guard.resume();
        child.wait().unwrap();
        assert_eq!(guard.breach().unwrap().dimension, QuotaDimension::WallClock);
    }

    #[test]
    fn frame_quota_trips_after_limit() {
        let mut child = spawn_group("sleep 30");
        let limits = QuotaSpec {
            max_protocol_frames: 3,
            ..QuotaSpec::default()
        };
        let guard = QuotaGuard::start(child.id() as i32, limits);
        assert!((0..3).all(|_| guard.count_frame()));
        assert!(!guard.count_frame());
        child.wait().unwrap();
        assert_eq!(guard.breach().unwrap().dimension, QuotaDimension::Frames);
        assert_eq!(guard.stop().frames, 4);
    }

    #[test]
    fn well_behaved_process_is_left_alone() {
        let mut child = spawn_group("sleep 0.3");
        let guard = QuotaGuard::start(child.id() as i32, QuotaSpec::default());
        assert!(child.wait().unwrap().success());
        assert!(guard.breach().is_none());
        let usage = guard.stop();
        assert!(usage.memory_bytes > 0);
    }
}
