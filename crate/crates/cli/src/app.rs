//! Argument parsing and dispatch.

use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use edoc_core::sig::{keystore, MiniCert, Signer};
use edoc_core::time::{self, Timestamp};
use edoc_core::xml::a_canon_string;
use edoc_platform::{Platform, Server, SystemClock};
use edoc_protocol::commands::{self, Link};
use edoc_protocol::Gateway;

use crate::agent::{Agent, AgentConfig};
use crate::error::CliError;
use crate::ops::{self, parse_time, Output};
use crate::profile::{read_xml, Profile, ProfileArgs};

#[derive(Debug, Parser)]
#[command(name = "edoc", version, about = "Signed electronic documents: sign, verify, store and exchange")]
pub struct Cli {
    /// Print results as canonical XML.
    #[arg(long, global = true)]
    pub xml: bool,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate a key pair into a passphrase-protected key store.
    Keygen {
        #[arg(long)]
        out: PathBuf,
        /// Also write the `<publicKey>` element here.
        #[arg(long)]
        public: Option<PathBuf>,
        #[arg(long, default_value = "ed25519")]
        alg: String,
        #[arg(long, env = "EDOC_NEW_PASS", hide_env_values = true)]
        pass: String,
        /// Refuse a passphrase that also opens this key store.
        #[arg(long)]
        distinct_from: Vec<PathBuf>,
        #[arg(long, default_value_t = keystore::DEFAULT_ITERATIONS)]
        iterations: u32,
    },
    /// Issue a certificate, or a self-signed anchor with --self-signed.
    CertIssue {
        #[arg(long)]
        subject: String,
        /// auth, sign, role, platform or issuer. Repeatable.
        #[arg(long = "purpose", required = true)]
        purposes: Vec<String>,
        #[arg(long)]
        public: Option<PathBuf>,
        #[arg(long)]
        issuer_key: PathBuf,
        #[arg(long, env = "EDOC_ISSUER_PASS", hide_env_values = true)]
        issuer_pass: String,
        #[arg(long, conflicts_with = "self_signed")]
        issuer_cert: Option<PathBuf>,
        #[arg(long)]
        self_signed: bool,
        #[arg(long)]
        not_before: String,
        #[arg(long)]
        not_after: String,
        #[arg(long, default_value_t = 1)]
        serial: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Show a document exactly as it renders. Signed documents are verified.
    DocView {
        file: PathBuf,
        /// Platform data root or definitions directory. Without it the
        /// definition is fetched from --endpoint.
        #[arg(long)]
        defs: Option<PathBuf>,
        #[arg(long)]
        at: Option<String>,
    },
    /// Render a draft and sign what was rendered.
    DocSign {
        file: PathBuf,
        #[arg(long)]
        defs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Ask for confirmation after showing the rendering.
        #[arg(long)]
        confirm: bool,
    },
    /// Verify a signed document; exits 0 only when it is VALID.
    DocVerify {
        file: PathBuf,
        #[arg(long)]
        defs: Option<PathBuf>,
        #[arg(long)]
        at: Option<String>,
    },
    /// Ask the platform for a draft, from field values or an input document.
    Create {
        #[arg(long = "type")]
        type_id: String,
        /// path=value. Repeatable.
        #[arg(long = "field")]
        fields: Vec<String>,
        /// docId of the input document for the type's rules.
        #[arg(long)]
        input: Option<String>,
        /// path=value for fields the rules leave to the signer. Repeatable.
        #[arg(long = "manual")]
        manual: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Store a signed document, optionally moving a linked document's status.
    Submit {
        file: PathBuf,
        #[arg(long, requires = "link_to")]
        link_doc: Option<String>,
        #[arg(long, requires = "link_doc")]
        link_to: Option<String>,
        #[arg(long, requires = "link_doc")]
        link_expect: Option<String>,
    },
    /// Find stored documents by attribute and field values.
    Search {
        #[arg(long = "type")]
        type_id: String,
        /// attribute=value. Repeatable.
        #[arg(long = "attr")]
        attrs: Vec<String>,
        /// path=value. Repeatable.
        #[arg(long = "field")]
        fields: Vec<String>,
    },
    /// Move a stored document to another lifecycle state.
    SetStatus {
        #[arg(long = "type")]
        type_id: String,
        #[arg(long)]
        doc: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        expect: Option<String>,
    },
    /// Revoke a stored document.
    Revoke {
        #[arg(long = "type")]
        type_id: String,
        #[arg(long)]
        doc: String,
        #[arg(long)]
        reason: String,
    },
    /// Platform-side validity report for a stored or supplied document.
    Validate {
        #[arg(long = "type")]
        type_id: String,
        #[arg(long)]
        doc: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long)]
        at: Option<String>,
    },
    /// Administrative commands; accepted on the admin port only.
    #[command(subcommand)]
    Admin(AdminCmd),
    /// Run a platform from a data root.
    Serve {
        #[arg(long, env = "EDOC_DATA")]
        data: PathBuf,
        #[arg(long)]
        platform_key: PathBuf,
        #[arg(long)]
        platform_cert: PathBuf,
        #[arg(long, env = "EDOC_PLATFORM_PASS", hide_env_values = true)]
        platform_pass: String,
    },
    /// Relay frames between an HTTPS-style tunnel and a platform port.
    Gateway {
        #[arg(long, default_value = "127.0.0.1:0")]
        listen: String,
        #[arg(long)]
        upstream: String,
    },
    /// Local signing agent for the desktop UI.
    Agent {
        #[arg(long, default_value = "127.0.0.1:0")]
        listen: String,
    },
    /// Run the examination scenario end to end on fixture data.
    Demo {
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Working directory; a temporary one by default.
        #[arg(long)]
        work: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AdminCmd {
    /// Register a definition bundle directory.
    PutDef { dir: PathBuf },
    /// Replace the role map.
    SetRolemap { file: PathBuf },
    /// Open or close a platform port.
    Port { name: String, action: String },
    /// Print entries of the platform log.
    Log {
        #[arg(long, default_value_t = 0)]
        from: u64,
        #[arg(long)]
        to: Option<u64>,
    },
}

fn opt_time(s: &Option<String>) -> Result<Option<Timestamp>, CliError> {
    s.as_deref().map(parse_time).transpose()
}

fn confirm(prompt: &str) -> bool {
    eprint!("{prompt} [y/N] ");
    let _ = io::stderr().flush();
    let mut line = String::new();
    io::stdin().lock().read_line(&mut line).is_ok() && matches!(line.trim(), "y" | "Y" | "yes")
}

fn dispatch(cli: &Cli) -> Result<Output, CliError> {
    let profile = Profile::resolve(&cli.profile)?;
    match &cli.command {
        Cmd::Keygen {
            out,
            public,
            alg,
            pass,
            distinct_from,
            iterations,
        } => ops::keygen_cmd(ops::KeygenArgs {
            out,
            public_out: public.as_deref(),
            alg,
            passphrase: pass,
            distinct_from,
            iterations: *iterations,
        }),
        Cmd::CertIssue {
            subject,
            purposes,
            public,
            issuer_key,
            issuer_pass,
            issuer_cert,
            self_signed,
            not_before,
            not_after,
            serial,
            out,
        } => {
            if !self_signed && issuer_cert.is_none() {
                return Err(CliError::input("give --issuer-cert or --self-signed"));
            }
            ops::cert_issue_cmd(ops::CertArgs {
                subject,
                purposes,
                public: public.as_deref(),
                issuer_key,
                issuer_pass,
                issuer_cert: issuer_cert.as_deref(),
                not_before: parse_time(not_before)?,
                not_after: parse_time(not_after)?,
                serial: *serial,
                out,
            })
        }
        Cmd::DocView { file, defs, at } => ops::doc_view(file, defs.as_deref(), &profile, opt_time(at)?),
        Cmd::DocSign {
            file,
            defs,
            out,
            confirm: ask,
        } => {
            if *ask {
                let shown = ops::doc_view(file, defs.as_deref(), &profile, None)?;
                println!("{}", shown.human);
                if !confirm("Sign this document?") {
                    return Err(CliError::input("not signed"));
                }
            }
            ops::doc_sign(file, defs.as_deref(), &profile, out)
        }
        Cmd::DocVerify { file, defs, at } => ops::doc_verify(file, defs.as_deref(), &profile, opt_time(at)?),
        Cmd::Create {
            type_id,
            fields,
            input,
            manual,
            out,
        } => ops::create(&profile, type_id, fields, input.as_deref(), manual, out),
        Cmd::Submit {
            file,
            link_doc,
            link_to,
            link_expect,
        } => {
            let link = link_doc.as_ref().map(|d| Link {
                doc_id: d.clone(),
                to: link_to.clone().unwrap_or_default(),
                expect: link_expect.clone(),
            });
            ops::submit(&profile, file, link)
        }
        Cmd::Search { type_id, attrs, fields } => ops::search(&profile, type_id, attrs, fields),
        Cmd::SetStatus { type_id, doc, to, expect } => ops::set_status(&profile, type_id, doc, to, expect.as_deref()),
        Cmd::Revoke { type_id, doc, reason } => ops::revoke(&profile, type_id, doc, reason),
        Cmd::Validate { type_id, doc, file, at } => ops::validate(&profile, type_id, doc.as_deref(), file.as_deref(), opt_time(at)?),
        Cmd::Admin(a) => {
            let cmd = match a {
                AdminCmd::PutDef { dir } => ops::put_definition_cmd(dir)?,
                AdminCmd::SetRolemap { file } => commands::set_role_map(read_xml(file)?),
                AdminCmd::Port { name, action } => commands::port_control(name, action),
                AdminCmd::Log { from, to } => commands::get_log(*from, *to),
            };
            ops::admin(&profile, cmd)
        }
        Cmd::Serve {
            data,
            platform_key,
            platform_cert,
            platform_pass,
        } => serve(data, platform_key, platform_cert, platform_pass),
        Cmd::Gateway { listen, upstream } => {
            let gw = Gateway::start(listen, upstream).map_err(|e| CliError::Transport(e.to_string()))?;
            println!("gateway {} -> {upstream}", gw.url());
            wait_forever()
        }
        Cmd::Agent { listen } => {
            let token = std::env::var("EDOC_AGENT_TOKEN").ok();
            let agent = Agent::start(AgentConfig::from_profile(listen, token, &profile)?)?;
            println!("agent listening on {}", agent.url());
            println!("session token: {}", agent.token());
            let _ = io::stdout().flush();
            wait_forever()
        }
        Cmd::Demo { fixtures, work } => demo(fixtures.clone(), work.clone()),
    }
}

fn wait_forever() -> ! {
    loop {
        std::thread::park();
    }
}

fn serve(data: &std::path::Path, key: &std::path::Path, cert: &std::path::Path, pass: &str) -> Result<Output, CliError> {
    let key = keystore::open(&std::fs::read(key)?, pass)?;
    let signer = Signer::new(key, MiniCert::from_xml(&read_xml(cert)?)?)?;
    let platform = Platform::open(data, signer, Arc::new(SystemClock)).map_err(|e| CliError::input(e.to_string()))?;
    let report = platform.integrity().clone();
    if !report.is_ok() {
        eprintln!("warning: integrity check: {report:?}");
    }
    let server = Server::start(platform.clone()).map_err(|e| CliError::Transport(e.to_string()))?;
    println!("platform {} ({} documents)", data.display(), platform.document_count());
    for p in &platform.ports().ports {
        if let Some(a) = server.addr(&p.name) {
            println!("port {} {a}", p.name);
        }
    }
    let _ = io::stdout().flush();
    wait_forever()
}

fn demo(fixtures: Option<PathBuf>, work: Option<PathBuf>) -> Result<Output, CliError> {
    let fixtures = fixtures.unwrap_or_else(edoc_eas::fixtures::fixture_dir);
    let tmp;
    let work = match work {
        Some(w) => w,
        None => {
            tmp = tempdir()?;
            tmp.clone()
        }
    };
    let started = Instant::now();
    let mut out = io::stdout();
    let report = edoc_eas::run_demo(&fixtures, &work, &mut out).map_err(CliError::from)?;
    let passed = report.passed();
    let mut o = Output::ok(
        edoc_core::xml::Element::new("demo")
            .attr("passed", passed.to_string())
            .attr("elapsedMs", started.elapsed().as_millis().to_string()),
        String::new(),
    );
    if !passed {
        o.exit_code = 1;
    }
    Ok(o)
}

fn tempdir() -> Result<PathBuf, CliError> {
    let p = std::env::temp_dir().join(format!("edoc-demo-{}-{}", std::process::id(), time::now().timestamp_nanos_opt().unwrap_or(0)));
    std::fs::create_dir_all(&p)?;
    Ok(p)
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(&cli) {
        Ok(out) => {
            if cli.xml {
                println!("{}", a_canon_string(&out.xml));
            } else if !out.human.is_empty() {
                print!("{}", out.human);
                if !out.human.ends_with('\n') {
                    println!();
                }
            }
            out.exit_code
        }
        Err(e) => {
            if cli.xml {
                println!("{}", a_canon_string(&e.to_xml()));
            }
            eprintln!("error: {}: {}", e.family(), e.to_xml().text());
            e.exit_code()
        }
    }
}
