//! Runs two days of the default ingest/refresh cadence on a virtual clock,
//! including one refresh that overruns its slot and gets deferred.
//!
//!     cargo run --example scheduler_simulation

use asset_catalog::ingest::{JobType, Schedule, Scheduler};
use chrono::{Duration, TimeZone, Utc};

fn main() {
    let start = Utc.with_ymd_and_hms(2025, 3, 1, 0, 0, 0).unwrap();
    let schedule = Schedule::default();
    for job in JobType::ALL {
        println!("{job}: every {} h", schedule.interval(job).num_hours());
    }
    let mut scheduler = Scheduler::new(schedule, start);
    let mut now = start;
    // (job, time it finishes)
    let mut running: Vec<(JobType, chrono::DateTime<Utc>)> = Vec::new();
    let mut refreshes = 0;
    while now <= start + Duration::hours(48) {
        running.retain(|(job, until)| {
            if *until <= now {
                scheduler.complete(*job);
                println!("{}  {job} finished", until.format("%a %H:%M"));
                false
            } else {
                true
            }
        });
        for job in scheduler.tick(now) {
            let took = match job {
                JobType::Ingest => Duration::minutes(40),
                JobType::Refresh => {
                    refreshes += 1;
                    // the second refresh stalls past the next slot
                    if refreshes == 2 {
                        Duration::hours(13)
                    } else {
                        Duration::minutes(20)
                    }
                }
            };
            println!("{}  {job} started", now.format("%a %H:%M"));
            running.push((job, now + took));
        }
        now += Duration::minutes(5);
    }
    for d in scheduler.deferrals() {
        println!(
            "deferred {} due {} (still running at {})",
            d.job_type,
            d.due_at.format("%a %H:%M"),
            d.observed_at.format("%a %H:%M")
        );
    }
}
