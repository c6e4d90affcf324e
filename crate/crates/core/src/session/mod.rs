//! Interactive deformation sessions.
//!
//! Clients send [`ClientEnvelope`]s and receive [`ServerEnvelope`]s, both as
//! JSON objects with a `version` field and a `type` tag. Every client message
//! gets exactly one `Ack` or `Error` echoing its `id`, sent before any data
//! message it triggers. The [`Session`] state machine is transport agnostic;
//! [`run_channel`] drives one on its own thread from a message queue.

mod protocol;
mod state;

pub use protocol::{
    decode_positions, encode_positions, ClientEnvelope, ClientMessage, ErrorCode, ServerEnvelope, ServerMessage,
    PROTOCOL_VERSION,
};
pub use state::{run_channel, Session, SessionConfig};
