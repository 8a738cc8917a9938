use std::collections::BTreeSet;
use std::net::IpAddr;

use edoc_core::xml::Element;
use edoc_protocol::CommandName;
use ipnet::IpNet;

/// The port that accepts administrative commands.
pub const ADMIN_PORT: &str = "admin";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Visibility {
    Loopback,
    Any,
    Networks(Vec<IpNet>),
}

impl Visibility {
    pub fn allows(&self, peer: IpAddr) -> bool {
        match self {
            Visibility::Loopback => peer.is_loopback(),
            Visibility::Any => true,
            Visibility::Networks(nets) => peer.is_loopback() || nets.iter().any(|n| n.contains(&peer)),
        }
    }

    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "loopback" => Ok(Visibility::Loopback),
            "any" => Ok(Visibility::Any),
            _ => s
                .split(',')
                .map(|n| n.trim().parse::<IpNet>().map_err(|e| format!("visibility `{n}`: {e}")))
                .collect::<Result<Vec<_>, _>>()
                .map(Visibility::Networks),
        }
    }

    fn as_string(&self) -> String {
        match self {
            Visibility::Loopback => "loopback".into(),
            Visibility::Any => "any".into(),
            Visibility::Networks(n) => n.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Every non-administrative command.
    Full,
    /// Only the commands listed for the port.
    Restricted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortSpec {
    pub name: String,
    /// 0 picks an ephemeral port.
    pub tcp_port: u16,
    pub visibility: Visibility,
    pub policy: Policy,
    pub commands: BTreeSet<String>,
}

impl PortSpec {
    pub fn new(name: &str, tcp_port: u16, visibility: Visibility) -> Self {
        PortSpec {
            name: name.to_string(),
            tcp_port,
            visibility,
            policy: Policy::Full,
            commands: BTreeSet::new(),
        }
    }

    pub fn restricted<I: IntoIterator<Item = CommandName>>(mut self, commands: I) -> Self {
        self.policy = Policy::Restricted;
        self.commands = commands.into_iter().map(|c| c.as_str().to_string()).collect();
        self
    }

    /// Administrative commands are accepted only on the admin port; a
    /// restricted port further limits the rest to its list.
    pub fn accepts(&self, command: CommandName) -> bool {
        if command.is_admin() {
            return self.name == ADMIN_PORT;
        }
        match self.policy {
            Policy::Full => true,
            Policy::Restricted => self.commands.contains(command.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortsConfig {
    pub ports: Vec<PortSpec>,
}

impl Default for PortsConfig {
    fn default() -> Self {
        PortsConfig {
            ports: vec![
                PortSpec::new(ADMIN_PORT, 0, Visibility::Loopback),
                PortSpec::new("scenario", 0, Visibility::Loopback),
            ],
        }
    }
}

impl PortsConfig {
    pub fn get(&self, name: &str) -> Option<&PortSpec> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("ports");
        for p in &self.ports {
            let mut pe = Element::new("port")
                .attr("name", &p.name)
                .attr("tcpPort", p.tcp_port.to_string())
                .attr("visibility", p.visibility.as_string())
                .attr(
                    "policy",
                    match p.policy {
                        Policy::Full => "full",
                        Policy::Restricted => "restricted",
                    },
                );
            for c in &p.commands {
                pe.push(Element::new("command").attr("name", c));
            }
            e.push(pe);
        }
        e
    }

    pub fn from_xml(e: &Element) -> Result<Self, String> {
        if e.name != "ports" {
            return Err("expected <ports>".into());
        }
        let mut ports: Vec<PortSpec> = Vec::new();
        for p in e.elements_named("port") {
            let name = p.get_attr("name").ok_or("port without name")?;
            if ports.iter().any(|q| q.name == name) {
                return Err(format!("port `{name}` declared twice"));
            }
            let tcp_port = p
                .get_attr("tcpPort")
                .unwrap_or("0")
                .parse()
                .map_err(|_| format!("port `{name}`: bad tcpPort"))?;
            let visibility = Visibility::parse(p.get_attr("visibility").unwrap_or("loopback"))?;
            let policy = match p.get_attr("policy").unwrap_or("full") {
                "full" => Policy::Full,
                "restricted" => Policy::Restricted,
                other => return Err(format!("port `{name}`: unknown policy `{other}`")),
            };
            let mut commands = BTreeSet::new();
            for c in p.elements_named("command") {
                let n = c.get_attr("name").ok_or("command without name")?;
                n.parse::<CommandName>().map_err(|_| format!("port `{name}`: unknown command `{n}`"))?;
                commands.insert(n.to_string());
            }
            ports.push(PortSpec {
                name: name.to_string(),
                tcp_port,
                visibility,
                policy,
                commands,
            });
        }
        if !ports.iter().any(|p| p.name == ADMIN_PORT) {
            return Err("no admin port declared".into());
        }
        Ok(PortsConfig { ports })
    }
}
