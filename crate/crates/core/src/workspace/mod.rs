//! User accounts, saved lists, tracked preferences and the notification feed.

use std::collections::BTreeSet;
use std::sync::Arc;

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::Argon2;
use chrono::{DateTime, Duration, Utc};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::{AssetId, AssetRecord};
use crate::leaderboard::{Leaderboard, LeaderboardQuery, MetricRegistry};
use crate::query::{FilterQuery, InvalidQuery};
use crate::store::{Store, StoreError};

pub const MIN_SECRET_LEN: usize = 10;
pub const SESSION_TTL_HOURS: i64 = 24;

pub type UserId = i64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub user_id: UserId,
    pub email: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    /// Opaque bearer token; only its digest is stored.
    pub token: String,
    pub user_id: UserId,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavedList {
    pub list_id: i64,
    pub owner: UserId,
    pub title: String,
    pub items: Vec<AssetId>,
}

/// What a preference tracks: a leaderboard setting (any subset of its five
/// filters) or a catalogue filter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum PreferenceCriteria {
    Leaderboard(LeaderboardQuery),
    Filter(FilterQuery),
}

impl PreferenceCriteria {
    pub fn validate(&self) -> Result<(), InvalidQuery> {
        match self {
            PreferenceCriteria::Filter(q) => q.validate(),
            PreferenceCriteria::Leaderboard(q) => {
                let dims = [
                    &q.benchmark,
                    &q.implementation,
                    &q.language,
                    &q.metric_name,
                    &q.metric_config,
                ];
                if dims
                    .iter()
                    .all(|d| d.as_deref().is_none_or(|s| s.trim().is_empty()))
                {
                    return Err(InvalidQuery::single(
                        "leaderboard",
                        "track at least one of benchmark, implementation, language, metric, metric_config",
                    ));
                }
                if q.name_search.is_some() {
                    return Err(InvalidQuery::single(
                        "leaderboard.name_search",
                        "name search does not select models and cannot be tracked",
                    ));
                }
                Ok(())
            }
        }
    }

    /// Same predicate as the live query: the filter's `matches`, or the
    /// leaderboard's row filter applied to the asset's evaluations.
    pub fn matches(&self, asset: &AssetRecord, registry: &MetricRegistry) -> bool {
        match self {
            PreferenceCriteria::Filter(q) => q.matches(asset),
            PreferenceCriteria::Leaderboard(q) => {
                let lb = Leaderboard::from_assets([asset], registry.clone());
                let hit = lb.matching_rows(q).next().is_some();
                hit
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preference {
    pub preference_id: i64,
    pub owner: UserId,
    pub name: String,
    pub criteria: PreferenceCriteria,
    /// Set when stored criteria no longer validate; such preferences are
    /// skipped during alert matching.
    pub invalid_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub notification_id: i64,
    pub owner: UserId,
    pub asset_id: AssetId,
    pub preference_id: i64,
    pub created_at: DateTime<Utc>,
    pub read: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotificationPage {
    pub total: usize,
    pub unread: usize,
    pub items: Vec<Notification>,
}

/// A (preference, asset) pair that should notify the preference owner.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AlertMatch {
    pub preference_id: i64,
    pub owner: UserId,
    pub asset_id: AssetId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlertOutcome {
    pub matches: Vec<AlertMatch>,
    /// Preferences skipped because their criteria failed validation.
    pub invalid: Vec<(i64, String)>,
}

/// Pairs every valid preference with every new asset it matches. Pure; the
/// at-most-once guarantee is enforced when the pairs are stored.
pub fn match_alerts(
    new_assets: &[&AssetRecord],
    preferences: &[Preference],
    registry: &MetricRegistry,
) -> AlertOutcome {
    let mut matches = BTreeSet::new();
    let mut invalid = Vec::new();
    for p in preferences {
        if let Err(e) = p.criteria.validate() {
            invalid.push((p.preference_id, e.to_string()));
            continue;
        }
        for a in new_assets {
            if p.criteria.matches(a, registry) {
                matches.insert(AlertMatch {
                    preference_id: p.preference_id,
                    owner: p.owner,
                    asset_id: a.asset_id.clone(),
                });
            }
        }
    }
    AlertOutcome {
        matches: matches.into_iter().collect(),
        invalid,
    }
}

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("`{0}` is not a valid email address")]
    InvalidEmail(String),
    #[error("secret must be at least {MIN_SECRET_LEN} characters")]
    WeakSecret,
    #[error("an account with this email already exists")]
    DuplicateEmail,
    #[error("invalid credentials")]
    InvalidCredentials,
    #[error("missing, expired or revoked session token")]
    Unauthenticated,
    #[error("{0} not found")]
    NotFound(String),
    #[error("resource belongs to another user")]
    Forbidden,
    #[error("a list titled `{0}` already exists")]
    DuplicateTitle(String),
    #[error("list title must not be empty")]
    EmptyTitle,
    #[error(transparent)]
    InvalidCriteria(#[from] InvalidQuery),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub type WorkspaceResult<T> = Result<T, WorkspaceError>;

/// Syntactic check only: one `@`, non-empty local part, dotted domain.
pub fn is_valid_email(email: &str) -> bool {
    let Some((local, domain)) = email.split_once('@') else {
        return false;
    };
    !local.is_empty()
        && !domain.contains('@')
        && !email.chars().any(char::is_whitespace)
        && domain.split('.').count() >= 2
        && domain.split('.').all(|label| {
            !label.is_empty() && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
        })
}

fn random_bytes<const N: usize>() -> [u8; N] {
    let mut buf = [0u8; N];
    rand::rng().fill_bytes(&mut buf);
    buf
}

pub(crate) fn token_digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

#[derive(Clone)]
pub struct Workspace {
    store: Arc<Store>,
    hasher: Argon2<'static>,
    /// Verified against when the email is unknown, so both failure paths
    /// cost the same.
    dummy_hash: String,
}

impl std::fmt::Debug for Workspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workspace").finish_non_exhaustive()
    }
}

impl Workspace {
    pub fn new(store: Arc<Store>) -> Self {
        let hasher = Argon2::default();
        let dummy_hash = hash_secret(&hasher, "not-a-real-secret").expect("hashing a constant");
        Workspace {
            store,
            hasher,
            dummy_hash,
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn register(
        &self,
        email: &str,
        secret: &str,
        now: DateTime<Utc>,
    ) -> WorkspaceResult<UserAccount> {
        let email = email.trim();
        if !is_valid_email(email) {
            return Err(WorkspaceError::InvalidEmail(email.to_string()));
        }
        if secret.chars().count() < MIN_SECRET_LEN {
            return Err(WorkspaceError::WeakSecret);
        }
        let hash = hash_secret(&self.hasher, secret)?;
        let user_id = self
            .store
            .insert_user(email, &hash, now)
            .map_err(|e| match e {
                StoreError::ConstraintViolation(_) => WorkspaceError::DuplicateEmail,
                other => other.into(),
            })?;
        Ok(UserAccount {
            user_id,
            email: email.to_string(),
            created_at: now,
        })
    }

    pub fn login(&self, email: &str, secret: &str, now: DateTime<Utc>) -> WorkspaceResult<Session> {
        let found = self.store.user_credentials(email.trim())?;
        let stored = found
            .as_ref()
            .map(|(_, h)| h.as_str())
            .unwrap_or(&self.dummy_hash);
        let ok = PasswordHash::new(stored)
            .map(|parsed| {
                self.hasher
                    .verify_password(secret.as_bytes(), &parsed)
                    .is_ok()
            })
            .unwrap_or(false);
        let Some((user_id, _)) = found.filter(|_| ok) else {
            return Err(WorkspaceError::InvalidCredentials);
        };
        let token = hex::encode(random_bytes::<32>());
        let expires_at = now + Duration::hours(SESSION_TTL_HOURS);
        self.store
            .insert_session(&token_digest(&token), user_id, expires_at)?;
        Ok(Session {
            token,
            user_id,
            expires_at,
        })
    }

    pub fn authenticate(&self, token: &str, now: DateTime<Utc>) -> WorkspaceResult<UserAccount> {
        match self.store.session_user(&token_digest(token))? {
            Some((user, expires_at)) if expires_at > now => Ok(user),
            _ => Err(WorkspaceError::Unauthenticated),
        }
    }

    pub fn logout(&self, token: &str) -> WorkspaceResult<()> {
        self.store.delete_session(&token_digest(token))?;
        Ok(())
    }

    fn owned_list(&self, user: UserId, list_id: i64) -> WorkspaceResult<SavedList> {
        let list = self
            .store
            .saved_list(list_id)?
            .ok_or_else(|| WorkspaceError::NotFound(format!("list {list_id}")))?;
        if list.owner != user {
            return Err(WorkspaceError::Forbidden);
        }
        Ok(list)
    }

    fn check_title(title: &str) -> WorkspaceResult<&str> {
        let t = title.trim();
        if t.is_empty() {
            Err(WorkspaceError::EmptyTitle)
        } else {
            Ok(t)
        }
    }

    fn title_conflict(title: &str) -> impl FnOnce(StoreError) -> WorkspaceError + '_ {
        move |e| match e {
            StoreError::ConstraintViolation(_) => WorkspaceError::DuplicateTitle(title.to_string()),
            other => other.into(),
        }
    }

    pub fn create_list(&self, user: UserId, title: &str) -> WorkspaceResult<SavedList> {
        let title = Self::check_title(title)?;
        let list_id = self
            .store
            .insert_list(user, title)
            .map_err(Self::title_conflict(title))?;
        self.owned_list(user, list_id)
    }

    pub fn rename_list(
        &self,
        user: UserId,
        list_id: i64,
        title: &str,
    ) -> WorkspaceResult<SavedList> {
        let title = Self::check_title(title)?;
        self.owned_list(user, list_id)?;
        self.store
            .rename_list(list_id, title)
            .map_err(Self::title_conflict(title))?;
        self.owned_list(user, list_id)
    }

    pub fn delete_list(&self, user: UserId, list_id: i64) -> WorkspaceResult<()> {
        self.owned_list(user, list_id)?;
        self.store.delete_list(list_id)?;
        Ok(())
    }

    pub fn get_list(&self, user: UserId, list_id: i64) -> WorkspaceResult<SavedList> {
        self.owned_list(user, list_id)
    }

    pub fn lists(&self, user: UserId) -> WorkspaceResult<Vec<SavedList>> {
        Ok(self.store.lists_of(user)?)
    }

    /// Adding an asset already on the list leaves it unchanged.
    pub fn add_item(
        &self,
        user: UserId,
        list_id: i64,
        asset: &AssetId,
    ) -> WorkspaceResult<SavedList> {
        let list = self.owned_list(user, list_id)?;
        if list.items.contains(asset) {
            return Ok(list);
        }
        if self.store.snapshot()?.get(asset).is_none() {
            return Err(WorkspaceError::NotFound(format!("asset {asset}")));
        }
        self.store.add_list_item(list_id, asset)?;
        self.owned_list(user, list_id)
    }

    pub fn remove_item(
        &self,
        user: UserId,
        list_id: i64,
        asset: &AssetId,
    ) -> WorkspaceResult<SavedList> {
        self.owned_list(user, list_id)?;
        self.store.remove_list_item(list_id, asset)?;
        self.owned_list(user, list_id)
    }

    /// Creates or replaces the caller's preference called `name`.
    pub fn put_preference(
        &self,
        user: UserId,
        name: &str,
        criteria: PreferenceCriteria,
    ) -> WorkspaceResult<Preference> {
        let name = name.trim();
        if name.is_empty() {
            return Err(InvalidQuery::single("name", "must not be empty").into());
        }
        criteria.validate()?;
        let id = self.store.upsert_preference(user, name, &criteria)?;
        Ok(Preference {
            preference_id: id,
            owner: user,
            name: name.to_string(),
            criteria,
            invalid_reason: None,
        })
    }

    pub fn preferences(&self, user: UserId) -> WorkspaceResult<Vec<Preference>> {
        Ok(self
            .store
            .all_preferences()?
            .into_iter()
            .filter(|p| p.owner == user)
            .collect())
    }

    pub fn delete_preference(&self, user: UserId, preference_id: i64) -> WorkspaceResult<()> {
        let pref = self
            .store
            .all_preferences()?
            .into_iter()
            .find(|p| p.preference_id == preference_id)
            .ok_or_else(|| WorkspaceError::NotFound(format!("preference {preference_id}")))?;
        if pref.owner != user {
            return Err(WorkspaceError::Forbidden);
        }
        self.store.delete_preference(preference_id)?;
        Ok(())
    }

    pub fn notifications(
        &self,
        user: UserId,
        offset: usize,
        limit: usize,
    ) -> WorkspaceResult<NotificationPage> {
        let all = self.store.notifications_of(user)?;
        let unread = all.iter().filter(|n| !n.read).count();
        Ok(NotificationPage {
            total: all.len(),
            unread,
            items: all.into_iter().skip(offset).take(limit).collect(),
        })
    }

    pub fn mark_read(&self, user: UserId, notification_id: i64) -> WorkspaceResult<()> {
        match self.store.notification_owner(notification_id)? {
            None => Err(WorkspaceError::NotFound(format!(
                "notification {notification_id}"
            ))),
            Some(owner) if owner != user => Err(WorkspaceError::Forbidden),
            Some(_) => Ok(self.store.mark_notification_read(notification_id)?),
        }
    }
}

fn hash_secret(hasher: &Argon2<'_>, secret: &str) -> WorkspaceResult<String> {
    let salt = SaltString::encode_b64(&random_bytes::<16>())
        .map_err(|e| WorkspaceError::Store(StoreError::Corrupt(e.to_string())))?;
    hasher
        .hash_password(secret.as_bytes(), &salt)
        .map(|h| h.to_string())
        .map_err(|e| WorkspaceError::Store(StoreError::Corrupt(e.to_string())))
}
