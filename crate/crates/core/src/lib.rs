//! Module files and global module indexes for a miniature declaration
//! language.
//!
//! Libraries are compiled into binary module files whose declarations can be
//! deserialized one at a time. A global index maps identifiers to the
//! modules that mention (and, in its semantic flavor, define) them, which
//! lets an interpreter session load only the modules a lookup actually
//! needs. Five lookup strategies are provided and every load is charged to a
//! deterministic cost model so their behavior can be compared.
//!
//! - [`declang`]: lexer and parser for headers and interpreter statements
//! - [`modfile`]: the `.pcm` format, entity merging, PCH construction
//! - [`modulemap`]: module maps, overlays, search paths
//! - [`gmi`]: the global module index
//! - [`loader`]: sessions, strategies, cost accounting
//! - [`interp`]: statement evaluation and the REPL
//! - [`bench`]: synthetic corpora and strategy comparison reports
//! - [`release`]: compiling a whole release directory from module maps

pub mod bench;
mod codec;
pub mod declang;
pub mod gmi;
pub mod hash;
pub mod interp;
pub mod loader;
pub mod modfile;
pub mod modulemap;
pub mod release;

pub use declang::{Decl, HeaderAST, Need, Statement};
pub use gmi::{Flavor, GlobalIndex};
pub use loader::{CostModel, LoadStats, Outcome, Resolution, Session, SessionConfig, Strategy};
pub use modfile::{Entity, ModuleFile};
pub use modulemap::{ModuleMap, Overlay, SearchPaths};
