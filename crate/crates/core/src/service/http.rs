use std::io::{self, Read};
use std::net::SocketAddr;
use std::sync::Arc;

use chrono::Utc;

use super::{Request, Response, Service, NEXT_TOKEN_HEADER, SESSION_HEADER};

/// Request bodies beyond this are refused with 413.
pub const MAX_BODY: u64 = 64 << 20;

/// A blocking HTTP/1.1 front end for a [`Service`].
pub struct HttpServer {
    server: Arc<tiny_http::Server>,
}

impl HttpServer {
    pub fn bind(addr: &str) -> io::Result<Self> {
        let server = tiny_http::Server::http(addr).map_err(io::Error::other)?;
        Ok(Self {
            server: Arc::new(server),
        })
    }

    pub fn local_addr(&self) -> Option<SocketAddr> {
        self.server.server_addr().to_ip()
    }

    /// A handle that stops [`run`](Self::run) when called from another thread.
    pub fn stopper(&self) -> impl Fn() + Send + Sync + 'static {
        let server = Arc::clone(&self.server);
        move || server.unblock()
    }

    /// Serves requests on `workers` threads until stopped.
    pub fn run(&self, service: Arc<Service>, workers: usize) {
        std::thread::scope(|scope| {
            for _ in 0..workers.max(1) {
                let service = Arc::clone(&service);
                scope.spawn(move || {
                    while let Ok(request) = self.server.recv() {
                        handle(&service, request);
                    }
                    // `unblock` wakes a single receiver; pass it on.
                    self.server.unblock();
                });
            }
        });
    }
}

fn handle(service: &Service, mut raw: tiny_http::Request) {
    let response = match read_request(&mut raw) {
        Ok(req) => service.dispatch(&req, Utc::now()),
        Err(r) => r,
    };
    log::info!("{} {} -> {}", raw.method(), raw.url(), response.status);
    let mut out = tiny_http::Response::from_data(response.body).with_status_code(response.status);
    let header = |name: &str, value: &str| tiny_http::Header::from_bytes(name.as_bytes(), value.as_bytes()).ok();
    out.add_header(header("Content-Type", response.content_type).expect("static header"));
    if let Some(h) = response
        .next_token
        .as_deref()
        .and_then(|t| header(NEXT_TOKEN_HEADER, t))
    {
        out.add_header(h);
    }
    if let Err(e) = raw.respond(out) {
        log::warn!("failed to send response: {e}");
    }
}

fn read_request(raw: &mut tiny_http::Request) -> Result<Request, Response> {
    if raw.body_length().is_some_and(|n| n as u64 > MAX_BODY) {
        return Err(Response::error(413, "body too large"));
    }
    let mut body = Vec::new();
    raw.as_reader()
        .take(MAX_BODY + 1)
        .read_to_end(&mut body)
        .map_err(|e| Response::error(400, e))?;
    if body.len() as u64 > MAX_BODY {
        return Err(Response::error(413, "body too large"));
    }
    let token = raw
        .headers()
        .iter()
        .find(|h| h.field.equiv(SESSION_HEADER))
        .map(|h| h.value.as_str().to_string());
    Ok(Request {
        method: raw.method().as_str().to_ascii_uppercase(),
        url: raw.url().to_string(),
        token,
        body,
    })
}
