//! Registers a user, saves a shortlist and two tracked interests, runs an
//! ingest and prints the notifications it produced.
//!
//!     cargo run --example workspace_alerts

use std::sync::Arc;

use asset_catalog::catalog::{AssetId, AssetKind, Taxonomy};
use asset_catalog::ingest::{
    run_ingestion, Clock, FixtureProvider, PipelineContext, Provider, RateBudget, SystemClock,
};
use asset_catalog::leaderboard::{LeaderboardQuery, MetricRegistry};
use asset_catalog::query::FilterQuery;
use asset_catalog::store::Store;
use asset_catalog::workspace::{PreferenceCriteria, Workspace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let store = Arc::new(Store::open_in_memory()?);
    store.sync_taxonomy(&Taxonomy::seed())?;
    let ctx = PipelineContext::new(
        store.clone(),
        Arc::new(Taxonomy::seed()),
        Arc::new(MetricRegistry::builtin()),
        clock.clone(),
    );
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/registry");
    let providers = vec![Provider::new(
        Arc::new(FixtureProvider::new("hf", root, clock.clone())),
        RateBudget::new(600, 50)?,
        clock.clone(),
    )];

    let ws = Workspace::new(store.clone());
    let user = ws.register("dev@example.org", "correct horse battery", clock.now())?;
    let session = ws.login("dev@example.org", "correct horse battery", clock.now())?;
    println!(
        "user {} session expires {}",
        user.user_id, session.expires_at
    );

    let mut repair = FilterQuery::all(AssetKind::Model);
    repair.se_task_ids = Some(["program-repair".to_string()].into());
    ws.put_preference(
        user.user_id,
        "repair models",
        PreferenceCriteria::Filter(repair),
    )?;
    let cpp = LeaderboardQuery::new("HumanEval", "pass@1").language("C++");
    ws.put_preference(
        user.user_id,
        "HumanEval C++",
        PreferenceCriteria::Leaderboard(cpp),
    )?;

    let run = run_ingestion(&ctx, &providers, None)?;
    println!("ingest catalogued {}", run.assets_catalogued);

    let prefs = ws.preferences(user.user_id)?;
    let page = ws.notifications(user.user_id, 0, 50)?;
    println!("{} notifications, {} unread", page.total, page.unread);
    for n in &page.items {
        let why = prefs
            .iter()
            .find(|p| p.preference_id == n.preference_id)
            .map(|p| p.name.as_str())
            .unwrap_or("?");
        println!("  {:<36} <- {}", n.asset_id.as_str(), why);
    }

    let list = ws.create_list(user.user_id, "to evaluate")?;
    for n in page.items.iter().take(3) {
        ws.add_item(user.user_id, list.list_id, &n.asset_id)?;
        ws.mark_read(user.user_id, n.notification_id)?;
    }
    let list = ws.get_list(user.user_id, list.list_id)?;
    let items: Vec<&str> = list.items.iter().map(AssetId::as_str).collect();
    println!("list '{}': {}", list.title, items.join(", "));
    println!(
        "unread now {}",
        ws.notifications(user.user_id, 0, 50)?.unread
    );
    ws.logout(&session.token)?;
    Ok(())
}
