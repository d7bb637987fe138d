pub mod ascent;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod idspace;
pub mod levels;
pub mod oracle;
pub mod propagation;
pub mod router;
pub mod topology;

pub use error::{Error, IdError, Result};
pub use idspace::{Color, LevelRef, NodeId};
pub use levels::{EdgeRecord, RoutingTable, TableUpdate};
pub use topology::{GenConfig, Link, PhysicalNetwork};
pub use ascent::{build_multilevel, BuildOptions, ConnectTarget, MultiLevelNetwork};
pub use router::{route, RouteResult};
