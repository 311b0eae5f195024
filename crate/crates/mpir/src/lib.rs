//! Std companion to `mpir-core`: the on-disk message store, the TCP wire
//! protocol with its server and retrieval client, and rate tables.

pub mod frame;
pub mod net;
pub mod store;
pub mod table;

pub use frame::{Frame, FrameError, MsgType};
pub use net::{retrieve, simulate_round, Retrieval, Server};
pub use store::{StoreError, StoreFile};
