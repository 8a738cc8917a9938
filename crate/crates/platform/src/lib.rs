//! The e-doc platform: role-based authorization of signed commands, the
//! command catalog, the document directory with lifecycle attributes,
//! port policies and an append-only audit log.

pub mod clock;
pub mod log;
pub mod platform;
pub mod ports;
pub mod rolemap;
pub mod server;
pub mod store;
pub mod usermap;

pub use clock::{Clock, FixedClock, SystemClock};
pub use platform::{init_data_root, DataRootConfig, IntegrityReport, Platform, PlatformError, PortController};
pub use ports::{PortSpec, PortsConfig, Visibility, ADMIN_PORT};
pub use rolemap::{authorize, Denial, RoleEntry, RoleMap};
pub use server::Server;
pub use usermap::UserMap;
