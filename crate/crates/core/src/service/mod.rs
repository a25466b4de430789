//! The repository over HTTP. Clients log in for a session token that rolls
//! on every authenticated exchange: each response names the next token in
//! `X-Next-Token`, and presenting a superseded token destroys the session.
//!
//! The service speaks plain HTTP/1.1 and belongs behind a TLS terminator.

mod credentials;
mod http;

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use chrono::{DateTime, TimeDelta, Utc};
use rand::RngCore;
use serde::Deserialize;
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audit::{filter_changes, AuditError, FilterSpec, Report, ReportFormat};
use crate::container::{load_document, render_timestamp};
use crate::repository::{Checkin, FileId, RepoError, Repository};

pub use credentials::{Credentials, DEFAULT_ITERATIONS};
pub use http::HttpServer;

pub const SESSION_HEADER: &str = "X-Session-Token";
pub const NEXT_TOKEN_HEADER: &str = "X-Next-Token";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid user name {0:?}")]
    InvalidUser(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub method: String,
    /// Path plus optional query string.
    pub url: String,
    pub token: Option<String>,
    pub body: Vec<u8>,
}

impl Request {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            method: "GET".into(),
            url: url.into(),
            token: None,
            body: Vec::new(),
        }
    }

    pub fn post(url: impl Into<String>, body: &Json) -> Self {
        Self {
            method: "POST".into(),
            url: url.into(),
            token: None,
            body: body.to_string().into_bytes(),
        }
    }

    pub fn token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub content_type: &'static str,
    pub next_token: Option<String>,
    pub body: Vec<u8>,
}

impl Response {
    fn json(status: u16, body: &Json) -> Self {
        Self {
            status,
            content_type: "application/json",
            next_token: None,
            body: body.to_string().into_bytes(),
        }
    }

    fn error(status: u16, message: impl std::fmt::Display) -> Self {
        Self::json(status, &json!({ "error": message.to_string() }))
    }

    /// The body parsed as JSON; `Null` when it is not JSON.
    pub fn body_json(&self) -> Json {
        serde_json::from_slice(&self.body).unwrap_or(Json::Null)
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

struct Session {
    user: String,
    token_digest: String,
    last_seen: DateTime<Utc>,
    /// Lease tokens for files checked out through this session.
    leases: BTreeMap<FileId, String>,
}

#[derive(Default)]
struct Sessions {
    next_id: u64,
    live: HashMap<u64, Session>,
    by_token: HashMap<String, u64>,
    /// Superseded token digests → the session they belonged to.
    retired: HashMap<String, u64>,
}

impl Sessions {
    fn destroy(&mut self, id: u64) {
        if let Some(s) = self.live.remove(&id) {
            self.by_token.remove(&s.token_digest);
            self.retired.insert(s.token_digest, id);
        }
    }
}

struct Authenticated {
    session: u64,
    user: String,
    next_token: String,
}

/// Why a routed request failed. `Revoke` also ends the session.
enum Failure {
    Respond(Response),
    Revoke(Response),
}

impl From<Response> for Failure {
    fn from(r: Response) -> Self {
        Failure::Respond(r)
    }
}

fn digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn repo_failure(e: RepoError) -> Failure {
    use RepoError::*;
    let response = match &e {
        Locked { holder, since } => Response::json(
            423,
            &json!({ "error": e.to_string(), "holder": holder, "since": render_timestamp(since) }),
        ),
        StaleToken => return Failure::Revoke(Response::error(401, &e)),
        NoPrivilege { .. } | NotAdmin(_) => Response::error(403, &e),
        UnknownFile(_) | UnknownVersion { .. } => Response::error(404, &e),
        NoActiveLease | LeaseExpired | DuplicateName(_) => Response::error(409, &e),
        InvalidName(_) => Response::error(400, &e),
        PathNotEmpty(_) | NotARepository(_) | InvalidConfig(_) | Corrupt(_) | Io(_) | Json(_) => {
            log::error!("repository failure: {e}");
            Response::error(500, "internal error")
        }
    };
    Failure::Respond(response)
}

fn bad_request(message: impl std::fmt::Display) -> Failure {
    Failure::Respond(Response::error(400, message))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, Failure> {
    serde_json::from_slice(body).map_err(|e| bad_request(format!("malformed body: {e}")))
}

fn decode_b64(text: &str) -> Result<Vec<u8>, Failure> {
    BASE64
        .decode(text)
        .map_err(|e| bad_request(format!("content_b64: {e}")))
}

#[derive(Deserialize)]
struct LoginBody {
    user: String,
    password: String,
}

#[derive(Deserialize)]
struct CheckinBody {
    otp: String,
    content_b64: Option<String>,
    #[serde(default)]
    discard: bool,
}

#[derive(Deserialize)]
struct NewFileBody {
    name: String,
    content_b64: String,
}

pub struct Service {
    repo: Arc<Repository>,
    credentials: RwLock<Credentials>,
    sessions: Mutex<Sessions>,
    session_timeout: TimeDelta,
}

impl Service {
    /// Sessions idle longer than the repository's inactivity timeout end.
    pub fn new(repo: Arc<Repository>, credentials: Credentials) -> Self {
        let secs = repo.config().inactivity_timeout.min(i64::MAX as u64 / 1000) as i64;
        Self {
            repo,
            credentials: RwLock::new(credentials),
            sessions: Mutex::new(Sessions::default()),
            session_timeout: TimeDelta::seconds(secs),
        }
    }

    pub fn repository(&self) -> &Arc<Repository> {
        &self.repo
    }

    fn sessions(&self) -> MutexGuard<'_, Sessions> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn token_bytes(&self) -> usize {
        (self.repo.config().token_bits / 8) as usize
    }

    fn fresh_token(&self, sessions: &Sessions) -> String {
        let mut bytes = vec![0u8; self.token_bytes()];
        loop {
            rand::rng().fill_bytes(&mut bytes);
            let token = hex::encode(&bytes);
            let d = digest(&token);
            if !sessions.by_token.contains_key(&d) && !sessions.retired.contains_key(&d) {
                return token;
            }
        }
    }

    /// Starts a session. Earlier sessions of the same user stay valid.
    pub fn login(&self, user: &str, password: &str, now: DateTime<Utc>) -> Option<String> {
        let ok = self
            .credentials
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .verify(user, password);
        if !ok {
            return None;
        }
        let mut sessions = self.sessions();
        let token = self.fresh_token(&sessions);
        let id = sessions.next_id;
        sessions.next_id += 1;
        sessions.by_token.insert(digest(&token), id);
        sessions.live.insert(
            id,
            Session {
                user: user.to_string(),
                token_digest: digest(&token),
                last_seen: now,
                leases: BTreeMap::new(),
            },
        );
        Some(token)
    }

    /// Validates and consumes a session token, issuing its successor.
    fn authenticate(&self, token: Option<&str>, now: DateTime<Utc>) -> Result<Authenticated, Response> {
        let Some(token) = token else {
            return Err(Response::error(401, "no session"));
        };
        let d = digest(token);
        let mut sessions = self.sessions();
        let Some(&id) = sessions.by_token.get(&d) else {
            if let Some(&id) = sessions.retired.get(&d) {
                if let Some(s) = sessions.live.get(&id) {
                    log::warn!("replayed session token for {}; session revoked", s.user);
                }
                sessions.destroy(id);
                return Err(Response::error(401, "stale session token; session revoked"));
            }
            return Err(Response::error(401, "no session"));
        };
        if now - sessions.live[&id].last_seen > self.session_timeout {
            sessions.destroy(id);
            return Err(Response::error(401, "session expired"));
        }
        let next_token = self.fresh_token(&sessions);
        let next = digest(&next_token);
        sessions.by_token.remove(&d);
        sessions.retired.insert(d, id);
        sessions.by_token.insert(next.clone(), id);
        let session = sessions.live.get_mut(&id).expect("indexed session is live");
        session.token_digest = next;
        session.last_seen = session.last_seen.max(now);
        Ok(Authenticated {
            session: id,
            user: session.user.clone(),
            next_token,
        })
    }

    /// Handles one request at instant `now`. Idle leases are swept first.
    pub fn dispatch(&self, req: &Request, now: DateTime<Utc>) -> Response {
        if let Err(e) = self.repo.expire_sweep(now) {
            log::error!("lease sweep failed: {e}");
            return Response::error(500, "internal error");
        }
        let (path, query) = req.url.split_once('?').unwrap_or((&req.url, ""));
        let segments: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
        if segments == ["login"] {
            if req.method != "POST" {
                return Response::error(405, "method not allowed");
            }
            return match parse_body::<LoginBody>(&req.body) {
                Ok(body) => match self.login(&body.user, &body.password, now) {
                    Some(token) => Response {
                        next_token: Some(token.clone()),
                        ..Response::json(200, &json!({ "token": token }))
                    },
                    None => Response::error(401, "bad credentials"),
                },
                Err(Failure::Respond(r) | Failure::Revoke(r)) => r,
            };
        }
        let auth = match self.authenticate(req.token.as_deref(), now) {
            Ok(a) => a,
            Err(r) => return r,
        };
        match self.route(&auth, &req.method, &segments, query, &req.body, now) {
            Ok(r) | Err(Failure::Respond(r)) => Response {
                next_token: Some(auth.next_token),
                ..r
            },
            Err(Failure::Revoke(r)) => {
                self.sessions().destroy(auth.session);
                r
            }
        }
    }

    fn route(
        &self,
        auth: &Authenticated,
        method: &str,
        segments: &[&str],
        query: &str,
        body: &[u8],
        now: DateTime<Utc>,
    ) -> Result<Response, Failure> {
        let file = |s: &str| {
            s.parse::<FileId>()
                .map_err(|_| Failure::from(Response::error(404, "no such file")))
        };
        let seq = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Failure::from(Response::error(404, "no such version")))
        };
        let user = auth.user.as_str();
        let expect = |m: &str| {
            if method == m {
                Ok(())
            } else {
                Err(Failure::from(Response::error(405, "method not allowed")))
            }
        };
        match segments {
            ["files"] => {
                expect("GET")?;
                let list: Vec<Json> = self
                    .repo
                    .list_files(user)
                    .into_iter()
                    .map(|f| json!({ "file_id": f.file_id, "name": f.name, "privileges": f.privileges.names() }))
                    .collect();
                Ok(Response::json(200, &Json::Array(list)))
            }
            ["files", id, "checkout"] => {
                expect("POST")?;
                let id = file(id)?;
                let co = self.repo.checkout(user, id, now).map_err(repo_failure)?;
                if let Some(s) = self.sessions().live.get_mut(&auth.session) {
                    s.leases.insert(id, co.lease.session_token.clone());
                }
                Ok(Response::json(
                    200,
                    &json!({ "otp": co.lease.otp, "content_b64": BASE64.encode(&co.content), "version": co.version }),
                ))
            }
            ["files", id, "checkin"] => {
                expect("POST")?;
                let id = file(id)?;
                let body: CheckinBody = parse_body(body)?;
                let content = match (&body.content_b64, body.discard) {
                    (_, true) => None,
                    (Some(b64), false) => Some(decode_b64(b64)?),
                    (None, false) => return Err(bad_request("checkin needs content_b64 or discard")),
                };
                let action = content.as_deref().map_or(Checkin::Discard, Checkin::Save);
                let result = self.repo.checkin_with_otp(user, id, &body.otp, action, now);
                if let Some(s) = self.sessions().live.get_mut(&auth.session) {
                    if !matches!(result, Err(RepoError::LeaseExpired)) {
                        s.leases.remove(&id);
                    }
                }
                Ok(match result.map_err(repo_failure)? {
                    Some(v) => Response::json(200, &json!({ "version": v.seq })),
                    None => Response::json(200, &json!({ "unchanged": true })),
                })
            }
            ["session", "renew"] => {
                expect("POST")?;
                self.renew_leases(auth.session, now);
                Ok(Response::json(200, &json!({})))
            }
            ["files", id, "history"] => {
                expect("GET")?;
                let versions = self.repo.history(user, file(id)?).map_err(repo_failure)?;
                let list: Vec<Json> = versions
                    .iter()
                    .map(|v| {
                        json!({ "seq": v.seq, "author": v.author, "saved_at": render_timestamp(&v.saved_at), "checksum": v.checksum })
                    })
                    .collect();
                Ok(Response::json(200, &Json::Array(list)))
            }
            ["files", id, "versions", n] => {
                expect("GET")?;
                let bytes = self.repo.get_version(user, file(id)?, seq(n)?).map_err(repo_failure)?;
                Ok(Response::json(200, &json!({ "content_b64": BASE64.encode(bytes) })))
            }
            ["files", id, "versions", n, "audit"] => {
                expect("GET")?;
                let bytes = self
                    .repo
                    .audit_version(user, file(id)?, seq(n)?)
                    .map_err(repo_failure)?;
                self.audit_report(&bytes, query)
            }
            ["admin", "files"] => {
                expect("POST")?;
                let body: NewFileBody = parse_body(body)?;
                let content = decode_b64(&body.content_b64)?;
                let (id, _) = self
                    .repo
                    .add_file(user, &body.name, &content, now)
                    .map_err(repo_failure)?;
                Ok(Response::json(200, &json!({ "file_id": id })))
            }
            _ => Err(Response::error(404, "no such endpoint").into()),
        }
    }

    /// Keeps this session's leases alive, rotating their tokens. Leases that
    /// can no longer be renewed are forgotten.
    fn renew_leases(&self, session: u64, now: DateTime<Utc>) {
        let held = match self.sessions().live.get(&session) {
            Some(s) => s.leases.clone(),
            None => return,
        };
        let renewed: BTreeMap<FileId, String> = held
            .into_iter()
            .filter_map(|(id, token)| self.repo.renew(&token, now).ok().map(|t| (id, t)))
            .collect();
        if let Some(s) = self.sessions().live.get_mut(&session) {
            s.leases = renewed;
        }
    }

    fn audit_report(&self, bytes: &[u8], query: &str) -> Result<Response, Failure> {
        let params: HashMap<String, String> = form_urlencoded::parse(query.as_bytes()).into_owned().collect();
        let get = |k: &str| params.get(k).map(String::as_str);
        let spec = FilterSpec::from_text(get("class"), get("author"), get("since"), get("until"), get("range"))
            .map_err(|e: AuditError| bad_request(e))?;
        let doc = load_document(bytes)
            .map_err(|e| Failure::from(Response::error(422, format!("stored version is not a container: {e}"))))?
            .document;
        let records = filter_changes(doc.changes(), &spec);
        let names: Vec<String> = doc.sheets().iter().map(|s| s.name().to_string()).collect();
        Ok(Response {
            status: 200,
            content_type: "text/csv",
            next_token: None,
            body: Report::new(&records).sheet_names(&names).render(ReportFormat::Csv),
        })
    }

    pub fn set_password(&self, user: &str, password: &str) -> Result<(), ServiceError> {
        self.credentials
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .set_password(user, password)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repository::{Privileges, RepoConfig};
    use chrono::TimeZone;

    fn t(secs: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2003, 5, 1, 9, 0, 0).unwrap() + TimeDelta::seconds(secs)
    }

    fn setup() -> (tempfile::TempDir, Service, FileId) {
        let dir = tempfile::tempdir().unwrap();
        let repo = Repository::init(RepoConfig::new(dir.path().join("repo")), &["root"]).unwrap();
        let (id, _) = repo.add_file("root", "marks.ttz", b"v1", t(0)).unwrap();
        repo.set_privileges(
            "root",
            "alice",
            id,
            Privileges {
                edit: true,
                ..Privileges::NONE
            },
            t(0),
        )
        .unwrap();
        repo.set_privileges(
            "root",
            "bob",
            id,
            Privileges {
                edit: true,
                ..Privileges::NONE
            },
            t(0),
        )
        .unwrap();
        let mut creds = Credentials::in_memory().with_iterations(2);
        for u in ["root", "alice", "bob"] {
            creds.set_password(u, &format!("{u}-pw")).unwrap();
        }
        (dir, Service::new(Arc::new(repo), creds), id)
    }

    fn login(svc: &Service, user: &str) -> String {
        let r = svc.dispatch(
            &Request::post("/login", &json!({ "user": user, "password": format!("{user}-pw") })),
            t(1),
        );
        assert_eq!(r.status, 200);
        r.body_json()["token"].as_str().unwrap().to_string()
    }

    #[test]
    fn login_is_uniform_on_failure() {
        let (_d, svc, _) = setup();
        let wrong_pw = svc.dispatch(
            &Request::post("/login", &json!({"user": "alice", "password": "x"})),
            t(1),
        );
        let no_user = svc.dispatch(&Request::post("/login", &json!({"user": "zed", "password": "x"})), t(1));
        assert_eq!((wrong_pw.status, &wrong_pw.body), (401, &no_user.body));
        assert_eq!(no_user.status, 401);
        assert_ne!(login(&svc, "alice"), login(&svc, "alice"));
    }

    #[test]
    fn tokens_roll() {
        let (_d, svc, _) = setup();
        let token = login(&svc, "alice");
        let r = svc.dispatch(&Request::get("/files").token(&token), t(2));
        assert_eq!(r.status, 200);
        let next = r.next_token.clone().unwrap();
        assert_ne!(next, token);
        assert_eq!(r.body_json()[0]["privileges"], json!(["edit", "view"]));
        // Replaying the old token kills the session, including the new token.
        assert_eq!(svc.dispatch(&Request::get("/files").token(&token), t(3)).status, 401);
        let r = svc.dispatch(&Request::get("/files").token(&next), t(4));
        assert_eq!(r.status, 401);
        assert!(r.next_token.is_none());
    }

    #[test]
    fn other_sessions_survive_a_replay() {
        let (_d, svc, _) = setup();
        let a = login(&svc, "alice");
        let b = login(&svc, "alice");
        let next = svc
            .dispatch(&Request::get("/files").token(&a), t(2))
            .next_token
            .unwrap();
        svc.dispatch(&Request::get("/files").token(&a), t(3));
        assert_eq!(svc.dispatch(&Request::get("/files").token(&next), t(4)).status, 401);
        assert_eq!(svc.dispatch(&Request::get("/files").token(&b), t(4)).status, 200);
    }

    #[test]
    fn lock_conflict_reports_holder() {
        let (_d, svc, id) = setup();
        let a = login(&svc, "alice");
        let b = login(&svc, "bob");
        let r = svc.dispatch(
            &Request::post(format!("/files/{id}/checkout"), &json!({})).token(&a),
            t(5),
        );
        assert_eq!(r.status, 200);
        assert_eq!(r.body_json()["version"], 1);
        let r = svc.dispatch(
            &Request::post(format!("/files/{id}/checkout"), &json!({})).token(&b),
            t(6),
        );
        assert_eq!(r.status, 423);
        assert_eq!(r.body_json()["holder"], "alice");
        assert_eq!(r.body_json()["since"], "2003-05-01T09:00:05Z");
        // Failed operations still roll the token.
        assert!(r.next_token.is_some());
    }

    #[test]
    fn checkin_flow_and_history() {
        let (_d, svc, id) = setup();
        let mut tok = login(&svc, "alice");
        let mut send = |req: Request, at: i64| {
            let r = svc.dispatch(&req.token(&tok), t(at));
            if let Some(n) = &r.next_token {
                tok = n.clone();
            }
            r
        };
        let co = send(Request::post(format!("/files/{id}/checkout"), &json!({})), 10);
        let otp = co.body_json()["otp"].as_str().unwrap().to_string();
        assert_eq!(send(Request::post("/session/renew", &json!({})), 11).status, 200);
        let r = send(
            Request::post(
                format!("/files/{id}/checkin"),
                &json!({"otp": otp, "content_b64": BASE64.encode(b"v2")}),
            ),
            12,
        );
        assert_eq!(r.body_json(), json!({"version": 2}));
        let r = send(
            Request::post(format!("/files/{id}/checkin"), &json!({"otp": otp, "discard": true})),
            13,
        );
        assert_eq!(r.status, 409);
        let co = send(Request::post(format!("/files/{id}/checkout"), &json!({})), 14);
        let otp = co.body_json()["otp"].as_str().unwrap().to_string();
        let r = send(
            Request::post(format!("/files/{id}/checkin"), &json!({"otp": otp, "discard": true})),
            15,
        );
        assert_eq!(r.body_json(), json!({"unchanged": true}));
        let h = send(Request::get(format!("/files/{id}/history")), 16).body_json();
        assert_eq!(h.as_array().unwrap().len(), 2);
        assert_eq!(h[1]["author"], "alice");
        let v = send(Request::get(format!("/files/{id}/versions/1")), 17).body_json();
        assert_eq!(BASE64.decode(v["content_b64"].as_str().unwrap()).unwrap(), b"v1");
        assert_eq!(send(Request::get(format!("/files/{id}/versions/9")), 18).status, 404);
        assert_eq!(send(Request::get("/files/77/history"), 19).status, 404);
        assert_eq!(send(Request::get("/nowhere"), 20).status, 404);
        assert_eq!(send(Request::get("/session/renew"), 21).status, 405);
        // Audit needs the audit flag, which alice lacks.
        assert_eq!(
            send(Request::get(format!("/files/{id}/versions/1/audit")), 22).status,
            403
        );
        assert_eq!(
            send(
                Request::post("/admin/files", &json!({"name": "x", "content_b64": ""})),
                23
            )
            .status,
            403
        );
    }

    #[test]
    fn bad_otp_revokes_lease_and_session() {
        let (_d, svc, id) = setup();
        let tok = login(&svc, "alice");
        let r = svc.dispatch(
            &Request::post(format!("/files/{id}/checkout"), &json!({})).token(&tok),
            t(2),
        );
        let tok = r.next_token.unwrap();
        let r = svc.dispatch(
            &Request::post(format!("/files/{id}/checkin"), &json!({"otp": "00", "discard": true})).token(&tok),
            t(3),
        );
        assert_eq!(r.status, 401);
        assert!(r.next_token.is_none());
        assert!(svc.repository().lease_info(id).is_none());
    }

    #[test]
    fn idle_sessions_and_leases_expire() {
        let (_d, svc, id) = setup();
        let tok = login(&svc, "alice");
        let r = svc.dispatch(
            &Request::post(format!("/files/{id}/checkout"), &json!({})).token(&tok),
            t(2),
        );
        assert_eq!(r.status, 200);
        let tok = r.next_token.unwrap();
        assert_eq!(svc.dispatch(&Request::get("/files").token(&tok), t(1803)).status, 401);
        assert!(svc.repository().lease_info(id).is_none());
    }

    #[test]
    fn admin_upload_and_audit() {
        let (_d, svc, _) = setup();
        let doc = crate::audit::fixture::gradebook().document;
        let bytes = crate::container::save_document(&doc).unwrap();
        let tok = login(&svc, "root");
        let r = svc.dispatch(
            &Request::post(
                "/admin/files",
                &json!({"name": "grades.ttz", "content_b64": BASE64.encode(&bytes)}),
            )
            .token(&tok),
            t(2),
        );
        assert_eq!(r.status, 200);
        let id = r.body_json()["file_id"].as_u64().unwrap();
        let tok = r.next_token.unwrap();
        let r = svc.dispatch(
            &Request::get(format!("/files/{id}/versions/1/audit?class=formula-to-value")).token(&tok),
            t(3),
        );
        assert_eq!(r.status, 200);
        assert_eq!(r.content_type, "text/csv");
        assert_eq!(String::from_utf8(r.body).unwrap().lines().count(), 8);
        let tok = r.next_token.unwrap();
        let r = svc.dispatch(
            &Request::get(format!("/files/{id}/versions/1/audit?class=bogus")).token(&tok),
            t(4),
        );
        assert_eq!(r.status, 400);
        let r = svc.dispatch(
            &Request::get("/files/1/versions/1/audit").token(r.next_token.unwrap()),
            t(5),
        );
        assert_eq!(r.status, 422);
    }

    #[test]
    fn responses_never_leak_secrets() {
        let (_d, svc, _) = setup();
        let tok = login(&svc, "alice");
        let r = svc.dispatch(&Request::get("/files").token(&tok), t(2));
        let body = String::from_utf8(r.body).unwrap();
        assert!(!body.contains("alice-pw") && !body.contains(&tok));
    }
}
