use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::Arc;
use std::thread;

use celltrail::repository::{RepoConfig, Repository};
use celltrail::service::{Credentials, HttpServer, Service};

fn exchange(addr: SocketAddr, method: &str, path: &str, token: Option<&str>, body: &str) -> (u16, String, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    let auth = token.map_or_else(String::new, |t| format!("X-Session-Token: {t}\r\n"));
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: test\r\nConnection: close\r\n{auth}Content-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    let status = head.split(' ').nth(1).unwrap().parse().unwrap();
    let next = head
        .lines()
        .find_map(|l| {
            l.strip_prefix("X-Next-Token: ")
                .or_else(|| l.strip_prefix("x-next-token: "))
        })
        .unwrap_or_default()
        .to_string();
    (status, next, body.to_string())
}

#[test]
fn serves_over_tcp_and_stops() {
    let dir = tempfile::tempdir().unwrap();
    let repo = Arc::new(Repository::init(RepoConfig::new(dir.path().join("repo")), &["root"]).unwrap());
    let mut credentials = Credentials::in_memory().with_iterations(1);
    credentials.set_password("root", "secret").unwrap();
    let service = Arc::new(Service::new(repo, credentials));

    let server = HttpServer::bind("127.0.0.1:0").unwrap();
    let addr = server.local_addr().unwrap();
    let stop = server.stopper();
    let worker = thread::spawn(move || server.run(service, 3));

    let (status, _, _) = exchange(addr, "POST", "/login", None, r#"{"user":"root","password":"wrong"}"#);
    assert_eq!(status, 401);
    let (status, token, body) = exchange(addr, "POST", "/login", None, r#"{"user":"root","password":"secret"}"#);
    assert_eq!(status, 200);
    assert!(!token.is_empty() && body.contains(&token));

    let (status, next, body) = exchange(addr, "GET", "/files", Some(&token), "");
    assert_eq!((status, body.as_str()), (200, "[]"));
    assert!(!next.is_empty() && next != token);
    let (status, _, _) = exchange(addr, "GET", "/files", Some(&token), "");
    assert_eq!(status, 401);
    let (status, _, _) = exchange(addr, "GET", "/files", None, "");
    assert_eq!(status, 401);

    stop();
    worker.join().unwrap();
}
