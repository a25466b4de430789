use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Subcommand};

use celltrail::container::render_timestamp;
use celltrail::repository::{Checkin, FileId, Privileges, RepoError, Repository};
use celltrail::service::{Credentials, HttpServer, Service};

use crate::config::repo_config;
use crate::{instant, read_file, usage, write_output};

#[derive(Args)]
pub struct Common {
    /// Repository directory.
    #[arg(long, short = 'r')]
    repo: PathBuf,
    /// Acting user (defaults to $CELLTRAIL_USER, then $USER).
    #[arg(long)]
    user: Option<String>,
    /// Clock override, RFC 3339.
    #[arg(long)]
    when: Option<String>,
    /// `key = value` file with inactivity_timeout and token_bits.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum RepoCommand {
    /// Create an empty repository.
    Init {
        #[command(flatten)]
        common: Common,
        /// Repository administrators (repeatable; defaults to the acting user).
        #[arg(long)]
        admin: Vec<String>,
    },
    /// Add a file as version 1.
    Add {
        #[command(flatten)]
        common: Common,
        name: String,
        file: PathBuf,
    },
    /// Take the edit lease; writes the latest version and prints the lease secrets.
    Checkout {
        #[command(flatten)]
        common: Common,
        name: String,
        /// Where to write the content (defaults to the file name).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Return the lease, saving new content or discarding.
    Checkin {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        token: String,
        #[arg(long, conflicts_with = "discard", required_unless_present = "discard")]
        file: Option<PathBuf>,
        #[arg(long)]
        discard: bool,
    },
    /// List a file's versions.
    History {
        #[command(flatten)]
        common: Common,
        name: String,
    },
    /// Fetch one stored version.
    Get {
        #[command(flatten)]
        common: Common,
        name: String,
        #[arg(long)]
        seq: u64,
        #[arg(short, long, default_value = "-")]
        output: PathBuf,
    },
    /// Set a user's privileges on a file, e.g. `edit,audit` or `none`.
    Grant {
        #[command(flatten)]
        common: Common,
        name: String,
        grantee: String,
        privileges: String,
    },
    /// Release leases idle past the timeout.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Serve the repository over HTTP until interrupted.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// Credential file (defaults to users.json inside the repository).
        #[arg(long)]
        users: Option<PathBuf>,
    },
    /// Set a login password, read from the first line of stdin.
    Passwd {
        #[command(flatten)]
        common: Common,
        account: String,
        #[arg(long)]
        users: Option<PathBuf>,
    },
}

impl Common {
    fn user(&self) -> anyhow::Result<String> {
        self.user
            .clone()
            .or_else(|| std::env::var("CELLTRAIL_USER").ok())
            .or_else(|| std::env::var("USER").ok())
            .filter(|u| !u.is_empty())
            .ok_or_else(|| usage("no acting user: pass --user or set CELLTRAIL_USER"))
    }

    fn open(&self) -> anyhow::Result<Repository> {
        let config = repo_config(self.repo.clone(), self.config.as_deref())?;
        Ok(Repository::open(config).map_err(explain)?)
    }
}

/// Repository errors with CLI wording.
fn explain(e: RepoError) -> anyhow::Error {
    match e {
        RepoError::Locked { holder, since } => anyhow!("locked by {holder} since {}", render_timestamp(&since)),
        RepoError::NoPrivilege { user, file_id, needed } => {
            anyhow!("permission denied: {user} needs {needed} privilege on file {file_id}")
        }
        RepoError::StaleToken => anyhow!("stale token: it was superseded, so the lease has been revoked"),
        other => other.into(),
    }
}

fn file_id(repo: &Repository, name: &str) -> anyhow::Result<FileId> {
    repo.find_file(name).ok_or_else(|| anyhow!("no file named {name:?}"))
}

fn credentials_path(repo: &Path, users: Option<&Path>) -> PathBuf {
    users.map_or_else(|| repo.join("users.json"), Path::to_path_buf)
}

pub fn run(cmd: RepoCommand) -> anyhow::Result<()> {
    match cmd {
        RepoCommand::Init { common, admin } => {
            let config = repo_config(common.repo.clone(), common.config.as_deref())?;
            let admins = if admin.is_empty() { vec![common.user()?] } else { admin };
            let admins: Vec<&str> = admins.iter().map(String::as_str).collect();
            Repository::init(config, &admins).map_err(explain)?;
            eprintln!("initialized {}", common.repo.display());
        }
        RepoCommand::Add { common, name, file } => {
            let repo = common.open()?;
            let bytes = read_file(&file)?;
            let (id, v) = repo
                .add_file(&common.user()?, &name, &bytes, instant(common.when.as_deref())?)
                .map_err(explain)?;
            println!("{id}\t{name}\tv{}\t{}", v.seq, v.checksum);
        }
        RepoCommand::Checkout { common, name, output } => {
            let repo = common.open()?;
            let id = file_id(&repo, &name)?;
            let co = repo
                .checkout(&common.user()?, id, instant(common.when.as_deref())?)
                .map_err(explain)?;
            let out = output.unwrap_or_else(|| PathBuf::from(&name));
            write_output(&out, &co.content)?;
            println!("token={}", co.lease.session_token);
            println!("otp={}", co.lease.otp);
            println!("version={}", co.version);
        }
        RepoCommand::Checkin {
            common,
            token,
            file,
            discard,
        } => {
            let repo = common.open()?;
            let now = instant(common.when.as_deref())?;
            let bytes = file.as_deref().map(read_file).transpose()?;
            let action = match (&bytes, discard) {
                (_, true) => Checkin::Discard,
                (Some(b), false) => Checkin::Save(b),
                (None, false) => return Err(usage("pass --file or --discard")),
            };
            match repo.checkin(&token, action, now).map_err(explain)? {
                Some(v) => println!("version {}", v.seq),
                None if discard => println!("discarded"),
                None => println!("unchanged"),
            }
        }
        RepoCommand::History { common, name } => {
            let repo = common.open()?;
            let id = file_id(&repo, &name)?;
            for v in repo.history(&common.user()?, id).map_err(explain)? {
                println!(
                    "{}\t{}\t{}\t{}",
                    v.seq,
                    v.author,
                    render_timestamp(&v.saved_at),
                    v.checksum
                );
            }
        }
        RepoCommand::Get {
            common,
            name,
            seq,
            output,
        } => {
            let repo = common.open()?;
            let id = file_id(&repo, &name)?;
            write_output(&output, &repo.get_version(&common.user()?, id, seq).map_err(explain)?)?;
        }
        RepoCommand::Grant {
            common,
            name,
            grantee,
            privileges,
        } => {
            let privileges: Privileges = privileges.parse().map_err(usage)?;
            let repo = common.open()?;
            let id = file_id(&repo, &name)?;
            repo.set_privileges(
                &common.user()?,
                &grantee,
                id,
                privileges,
                instant(common.when.as_deref())?,
            )
            .map_err(explain)?;
            println!("{grantee}\t{name}\t{privileges}");
        }
        RepoCommand::Sweep { common } => {
            let repo = common.open()?;
            for l in repo.expire_sweep(instant(common.when.as_deref())?).map_err(explain)? {
                println!("{}\t{}\t{}", l.file_id, l.user, render_timestamp(&l.last_activity));
            }
        }
        RepoCommand::Serve {
            common,
            bind,
            port,
            workers,
            users,
        } => {
            let repo = Arc::new(common.open()?);
            let credentials = Credentials::open(credentials_path(&common.repo, users.as_deref()))?;
            let server = HttpServer::bind(&format!("{bind}:{port}")).context("cannot bind")?;
            eprintln!(
                "serving {} on http://{} (plain HTTP: put a TLS terminator in front)",
                common.repo.display(),
                server
                    .local_addr()
                    .map_or_else(|| format!("{bind}:{port}"), |a| a.to_string())
            );
            server.run(Arc::new(Service::new(repo, credentials)), workers);
        }
        RepoCommand::Passwd { common, account, users } => {
            let mut line = String::new();
            std::io::stdin().lock().read_line(&mut line)?;
            let password = line.trim_end_matches(['\r', '\n']);
            if password.is_empty() {
                return Err(anyhow!("empty password"));
            }
            let mut credentials = Credentials::open(credentials_path(&common.repo, users.as_deref()))?;
            credentials.set_password(&account, password)?;
            eprintln!("password set for {account}");
        }
    }
    Ok(())
}
