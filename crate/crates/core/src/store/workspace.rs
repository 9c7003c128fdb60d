use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, OptionalExtension};

use super::{parse_ts, ts, Store, StoreResult, WriteTx};
use crate::catalog::AssetId;
use crate::workspace::{
    AlertMatch, Notification, Preference, PreferenceCriteria, SavedList, UserAccount, UserId,
};

fn load_list(c: &Connection, list_id: i64) -> StoreResult<Option<SavedList>> {
    let head: Option<(UserId, String)> = c
        .query_row(
            "SELECT owner, title FROM saved_lists WHERE list_id = ?1",
            [list_id],
            |r| Ok((r.get(0)?, r.get(1)?)),
        )
        .optional()?;
    let Some((owner, title)) = head else {
        return Ok(None);
    };
    let mut stmt =
        c.prepare("SELECT asset_id FROM list_items WHERE list_id = ?1 ORDER BY position")?;
    let items = stmt
        .query_map([list_id], |r| r.get::<_, String>(0))?
        .map(|r| r.map(|s| AssetId::from(s.as_str())))
        .collect::<Result<_, _>>()?;
    Ok(Some(SavedList {
        list_id,
        owner,
        title,
        items,
    }))
}

impl Store {
    pub(crate) fn insert_user(
        &self,
        email: &str,
        credential_hash: &str,
        now: DateTime<Utc>,
    ) -> StoreResult<UserId> {
        self.write(|tx| {
            tx.conn().execute(
                "INSERT INTO users (email, credential_hash, created_at, row_created_at, row_updated_at)
                 VALUES (?1, ?2, ?3, ?4, ?4)",
                params![email, credential_hash, ts(now), tx.now],
            )?;
            Ok(tx.conn().last_insert_rowid())
        })
    }

    pub(crate) fn user_credentials(&self, email: &str) -> StoreResult<Option<(UserId, String)>> {
        self.read(|c| {
            Ok(c.query_row(
                "SELECT user_id, credential_hash FROM users WHERE email = ?1",
                [email],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )
            .optional()?)
        })
    }

    pub(crate) fn insert_session(
        &self,
        token_hash: &str,
        user: UserId,
        expires_at: DateTime<Utc>,
    ) -> StoreResult<()> {
        self.write(|tx| {
            tx.conn().execute(
                "INSERT INTO sessions (token_hash, user_id, expires_at, row_created_at, row_updated_at)
                 VALUES (?1, ?2, ?3, ?4, ?4)",
                params![token_hash, user, ts(expires_at), tx.now],
            )?;
            Ok(())
        })
    }

    pub(crate) fn session_user(
        &self,
        token_hash: &str,
    ) -> StoreResult<Option<(UserAccount, DateTime<Utc>)>> {
        self.read(|c| {
            let row: Option<(UserId, String, String, String)> = c
                .query_row(
                    "SELECT u.user_id, u.email, u.created_at, s.expires_at
                     FROM sessions s JOIN users u ON u.user_id = s.user_id
                     WHERE s.token_hash = ?1",
                    [token_hash],
                    |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)),
                )
                .optional()?;
            row.map(|(user_id, email, created, expires)| {
                Ok((
                    UserAccount {
                        user_id,
                        email,
                        created_at: parse_ts(&created)?,
                    },
                    parse_ts(&expires)?,
                ))
            })
            .transpose()
        })
    }

    pub(crate) fn delete_session(&self, token_hash: &str) -> StoreResult<()> {
        self.write(|tx| {
            tx.conn()
                .execute("DELETE FROM sessions WHERE token_hash = ?1", [token_hash])?;
            Ok(())
        })
    }

    pub(crate) fn saved_list(&self, list_id: i64) -> StoreResult<Option<SavedList>> {
        self.read(|c| load_list(c, list_id))
    }

    pub(crate) fn lists_of(&self, owner: UserId) -> StoreResult<Vec<SavedList>> {
        self.read(|c| {
            let mut stmt =
                c.prepare("SELECT list_id FROM saved_lists WHERE owner = ?1 ORDER BY list_id")?;
            let ids: Vec<i64> = stmt
                .query_map([owner], |r| r.get(0))?
                .collect::<Result<_, _>>()?;
            ids.into_iter()
                .filter_map(|id| load_list(c, id).transpose())
                .collect()
        })
    }

    pub(crate) fn insert_list(&self, owner: UserId, title: &str) -> StoreResult<i64> {
        self.write(|tx| {
            tx.conn().execute(
                "INSERT INTO saved_lists (owner, title, row_created_at, row_updated_at) VALUES (?1, ?2, ?3, ?3)",
                params![owner, title, tx.now],
            )?;
            Ok(tx.conn().last_insert_rowid())
        })
    }

    pub(crate) fn rename_list(&self, list_id: i64, title: &str) -> StoreResult<()> {
        self.write(|tx| {
            tx.conn().execute(
                "UPDATE saved_lists SET title = ?2, row_updated_at = ?3 WHERE list_id = ?1",
                params![list_id, title, tx.now],
            )?;
            Ok(())
        })
    }

    pub(crate) fn delete_list(&self, list_id: i64) -> StoreResult<()> {
        self.write(|tx| {
            tx.conn()
                .execute("DELETE FROM saved_lists WHERE list_id = ?1", [list_id])?;
            Ok(())
        })
    }

    pub(crate) fn add_list_item(&self, list_id: i64, asset: &AssetId) -> StoreResult<()> {
        self.write(|tx| {
            tx.conn().execute(
                "INSERT OR IGNORE INTO list_items (list_id, asset_id, position, row_created_at, row_updated_at)
                 VALUES (?1, ?2, (SELECT COALESCE(MAX(position), -1) + 1 FROM list_items WHERE list_id = ?1),
                         ?3, ?3)",
                params![list_id, asset.as_str(), tx.now],
            )?;
            Ok(())
        })
    }

    pub(crate) fn remove_list_item(&self, list_id: i64, asset: &AssetId) -> StoreResult<()> {
        self.write(|tx| {
            tx.conn().execute(
                "DELETE FROM list_items WHERE list_id = ?1 AND asset_id = ?2",
                params![list_id, asset.as_str()],
            )?;
            Ok(())
        })
    }

    pub(crate) fn upsert_preference(
        &self,
        owner: UserId,
        name: &str,
        criteria: &PreferenceCriteria,
    ) -> StoreResult<i64> {
        let json = serde_json::to_string(criteria)?;
        self.write(|tx| {
            tx.conn().execute(
                "INSERT INTO preferences (owner, name, criteria, invalid_reason, row_created_at, row_updated_at)
                 VALUES (?1, ?2, ?3, NULL, ?4, ?4)
                 ON CONFLICT (owner, name) DO UPDATE SET
                     criteria = excluded.criteria, invalid_reason = NULL,
                     row_updated_at = excluded.row_updated_at",
                params![owner, name, json, tx.now],
            )?;
            Ok(tx.conn().query_row(
                "SELECT preference_id FROM preferences WHERE owner = ?1 AND name = ?2",
                params![owner, name],
                |r| r.get(0),
            )?)
        })
    }

    pub fn all_preferences(&self) -> StoreResult<Vec<Preference>> {
        self.read(|c| {
            let mut stmt = c.prepare(
                "SELECT preference_id, owner, name, criteria, invalid_reason
                 FROM preferences ORDER BY preference_id",
            )?;
            let rows = stmt.query_map([], |r| {
                Ok((
                    r.get::<_, i64>(0)?,
                    r.get::<_, UserId>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, Option<String>>(4)?,
                ))
            })?;
            let mut out = Vec::new();
            for row in rows {
                let (preference_id, owner, name, criteria, invalid_reason) = row?;
                out.push(Preference {
                    preference_id,
                    owner,
                    name,
                    criteria: serde_json::from_str(&criteria)?,
                    invalid_reason,
                });
            }
            Ok(out)
        })
    }

    pub(crate) fn delete_preference(&self, preference_id: i64) -> StoreResult<()> {
        self.write(|tx| {
            tx.conn().execute(
                "DELETE FROM preferences WHERE preference_id = ?1",
                [preference_id],
            )?;
            Ok(())
        })
    }

    /// Newest first.
    pub(crate) fn notifications_of(&self, owner: UserId) -> StoreResult<Vec<Notification>> {
        self.read(|c| {
            let mut stmt = c.prepare(
                "SELECT notification_id, owner, asset_id, preference_id, created_at, read
                 FROM notifications WHERE owner = ?1 ORDER BY notification_id DESC",
            )?;
            let rows = stmt.query_map([owner], |r| {
                Ok((
                    r.get::<_, i64>(0)?,
                    r.get::<_, UserId>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, i64>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, bool>(5)?,
                ))
            })?;
            let mut out = Vec::new();
            for row in rows {
                let (notification_id, owner, asset, preference_id, created, read) = row?;
                out.push(Notification {
                    notification_id,
                    owner,
                    asset_id: AssetId::from(asset.as_str()),
                    preference_id,
                    created_at: parse_ts(&created)?,
                    read,
                });
            }
            Ok(out)
        })
    }

    pub(crate) fn notification_owner(&self, notification_id: i64) -> StoreResult<Option<UserId>> {
        self.read(|c| {
            Ok(c.query_row(
                "SELECT owner FROM notifications WHERE notification_id = ?1",
                [notification_id],
                |r| r.get(0),
            )
            .optional()?)
        })
    }

    pub(crate) fn mark_notification_read(&self, notification_id: i64) -> StoreResult<()> {
        self.write(|tx| {
            tx.conn().execute(
                "UPDATE notifications SET read = 1, row_updated_at = ?2 WHERE notification_id = ?1",
                params![notification_id, tx.now],
            )?;
            Ok(())
        })
    }
}

impl WriteTx<'_> {
    /// Stores the alert unless this (preference, asset) pair already
    /// notified. Returns whether a row was added.
    pub fn insert_notification(&mut self, m: &AlertMatch, at: DateTime<Utc>) -> StoreResult<bool> {
        let n = self.tx.execute(
            "INSERT OR IGNORE INTO notifications
                 (owner, preference_id, asset_id, created_at, read, row_created_at, row_updated_at)
             VALUES (?1, ?2, ?3, ?4, 0, ?5, ?5)",
            params![
                m.owner,
                m.preference_id,
                m.asset_id.as_str(),
                ts(at),
                self.now
            ],
        )?;
        Ok(n == 1)
    }

    pub fn flag_preference(&mut self, preference_id: i64, reason: &str) -> StoreResult<()> {
        self.tx.execute(
            "UPDATE preferences SET invalid_reason = ?2, row_updated_at = ?3 WHERE preference_id = ?1",
            params![preference_id, reason, self.now],
        )?;
        Ok(())
    }
}
