//! Fixed-cadence scheduling of ingest and refresh jobs.
//!
//! Due times are anchored at the scheduler's start: job `j` is due at
//! `start + k * interval(j)` for `k >= 1`. A tick triggers each due job at
//! most once; a job still running when its next slot arrives is deferred
//! until it completes. Slots missed entirely coalesce into one run.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::job::JobType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub ingest_every: Duration,
    pub refresh_every: Duration,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            ingest_every: Duration::hours(24),
            refresh_every: Duration::hours(12),
        }
    }
}

impl Schedule {
    pub fn interval(&self, job: JobType) -> Duration {
        match job {
            JobType::Ingest => self.ingest_every,
            JobType::Refresh => self.refresh_every,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deferral {
    pub job_type: JobType,
    pub due_at: DateTime<Utc>,
    pub observed_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    schedule: Schedule,
    next_due: BTreeMap<JobType, DateTime<Utc>>,
    running: BTreeSet<JobType>,
    deferrals: Vec<Deferral>,
}

impl Scheduler {
    pub fn new(schedule: Schedule, start: DateTime<Utc>) -> Self {
        let next_due = JobType::ALL
            .into_iter()
            .map(|j| (j, start + schedule.interval(j)))
            .collect();
        Scheduler {
            schedule,
            next_due,
            running: BTreeSet::new(),
            deferrals: Vec::new(),
        }
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn next_due(&self, job: JobType) -> DateTime<Utc> {
        self.next_due[&job]
    }

    pub fn is_running(&self, job: JobType) -> bool {
        self.running.contains(&job)
    }

    pub fn deferrals(&self) -> &[Deferral] {
        &self.deferrals
    }

    /// Jobs to start now. Each returned job is marked running until
    /// [`Scheduler::complete`] is called for it.
    pub fn tick(&mut self, now: DateTime<Utc>) -> Vec<JobType> {
        let mut triggered = Vec::new();
        for job in JobType::ALL {
            let due = self.next_due[&job];
            if now < due {
                continue;
            }
            if self.running.contains(&job) {
                let already = self
                    .deferrals
                    .iter()
                    .any(|d| d.job_type == job && d.due_at == due);
                if !already {
                    self.deferrals.push(Deferral {
                        job_type: job,
                        due_at: due,
                        observed_at: now,
                    });
                }
                continue;
            }
            let interval = self.schedule.interval(job);
            let mut next = due + interval;
            while next <= now {
                next += interval;
            }
            self.next_due.insert(job, next);
            self.running.insert(job);
            triggered.push(job);
        }
        triggered
    }

    pub fn complete(&mut self, job: JobType) {
        self.running.remove(&job);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_for(hours: i64, step_minutes: i64) -> (usize, usize) {
        let start = DateTime::<Utc>::UNIX_EPOCH;
        let mut s = Scheduler::new(Schedule::default(), start);
        let (mut ingest, mut refresh) = (0, 0);
        let mut t = start;
        while t <= start + Duration::hours(hours) {
            for j in s.tick(t) {
                match j {
                    JobType::Ingest => ingest += 1,
                    JobType::Refresh => refresh += 1,
                }
                s.complete(j);
            }
            t += Duration::minutes(step_minutes);
        }
        (ingest, refresh)
    }

    #[test]
    fn forty_eight_hours_of_default_cadence() {
        assert_eq!(run_for(48, 1), (2, 4));
        assert_eq!(run_for(48, 60), (2, 4));
    }

    #[test]
    fn refresh_boundary() {
        let start = DateTime::<Utc>::UNIX_EPOCH;
        let mut s = Scheduler::new(Schedule::default(), start);
        assert!(s.tick(start + Duration::minutes(11 * 60 + 59)).is_empty());
        assert_eq!(s.tick(start + Duration::hours(12)), vec![JobType::Refresh]);
    }

    #[test]
    fn running_job_is_deferred_not_duplicated() {
        let start = DateTime::<Utc>::UNIX_EPOCH;
        let mut s = Scheduler::new(Schedule::default(), start);
        assert_eq!(
            s.tick(start + Duration::hours(24)),
            vec![JobType::Ingest, JobType::Refresh]
        );
        s.complete(JobType::Refresh);
        // ingest keeps running past its next slot
        for h in [36, 48, 49] {
            let got = s.tick(start + Duration::hours(h));
            assert!(!got.contains(&JobType::Ingest));
            s.complete(JobType::Refresh);
        }
        assert_eq!(s.deferrals().len(), 1);
        assert_eq!(s.deferrals()[0].due_at, start + Duration::hours(48));
        s.complete(JobType::Ingest);
        assert_eq!(s.tick(start + Duration::hours(50)), vec![JobType::Ingest]);
        assert_eq!(s.next_due(JobType::Ingest), start + Duration::hours(72));
    }
}
