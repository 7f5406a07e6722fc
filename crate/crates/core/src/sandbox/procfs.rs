//! Process-group usage sampling from `/proc`.

use std::fs;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GroupUsage {
    pub cpu_seconds: f64,
    pub rss_bytes: u64,
    pub processes: usize,
}

#[derive(Debug, Clone, Copy)]
struct StatLine {
    state: char,
    pgrp: i32,
    cpu_ticks: u64,
    rss_pages: u64,
}

fn parse_stat(text: &str) -> Option<StatLine> {
    let after_comm = &text[text.rfind(')')? + 1..];
    let fields: Vec<&str> = after_comm.split_whitespace().collect();
    Some(StatLine {
        state: fields.first()?.chars().next()?,
        pgrp: fields.get(2)?.parse().ok()?,
        cpu_ticks: fields.get(11)?.parse::<u64>().ok()? + fields.get(12)?.parse::<u64>().ok()?,
        rss_pages: fields.get(21)?.parse().ok()?,
    })
}

fn ticks_per_second() -> f64 {
    // SAFETY: sysconf has no memory-safety preconditions.
    let ticks = unsafe { libc::sysconf(libc::_SC_CLK_TCK) };
    if ticks > 0 {
        ticks as f64
    } else {
        100.0
    }
}

fn page_size() -> u64 {
    // SAFETY: as above.
    let size = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
    if size > 0 {
        size as u64
    } else {
        4096
    }
}

fn group_stats(pgid: i32) -> impl Iterator<Item = (i32, StatLine)> {
    fs::read_dir("/proc")
        .into_iter()
        .flatten()
        .filter_map(|entry| entry.ok()?.file_name().to_str()?.parse::<i32>().ok())
        .filter_map(move |pid| {
            let text = fs::read_to_string(format!("/proc/{pid}/stat")).ok()?;
            let stat = parse_stat(&text)?;
            (stat.pgrp == pgid).then_some((pid, stat))
        })
}

/// Summed CPU time and resident memory of every live member of `pgid`.
pub fn sample_group(pgid: i32) -> GroupUsage {
    let page = page_size();
    let hz = ticks_per_second();
    group_stats(pgid)
        .filter(|(_, s)| s.state != 'Z')
        .fold(GroupUsage::default(), |acc, (_, s)| GroupUsage {
            cpu_seconds: acc.cpu_seconds + s.cpu_ticks as f64 / hz,
            rss_bytes: acc.rss_bytes + s.rss_pages * page,
            processes: acc.processes + 1,
        })
}

/// Pids still present in the process table for `pgid`, zombies included.
pub fn group_members(pgid: i32) -> Vec<i32> {
    group_stats(pgid).map(|(pid, _)| pid).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comm_with_spaces() {
        let line = "1234 (my (odd) proc) S 1 1234 1234 0 -1 4194560 100 0 0 0 7 3 0 0 20 0 1 0 100 1000000 250 18446744073709551615";
        let stat = parse_stat(line).unwrap();
        assert_eq!(stat.state, 'S');
        assert_eq!(stat.pgrp, 1234);
        assert_eq!(stat.cpu_ticks, 10);
        assert_eq!(stat.rss_pages, 250);
    }

    #[test]
    fn samples_own_group() {
        // SAFETY: getpgrp cannot fail.
        let pgid = unsafe { libc::getpgrp() };
        let usage = sample_group(pgid);
        assert!(usage.processes >= 1);
        assert!(usage.rss_bytes > 0);
    }
}
