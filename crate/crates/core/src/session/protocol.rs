use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::deform::{Energies, RotationFit};
use crate::mesh::{MeshFormat, MeshGenerator};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientEnvelope {
    pub version: u32,
    /// Strictly increasing per session.
    pub id: u64,
    #[serde(flatten)]
    pub message: ClientMessage,
}

impl ClientEnvelope {
    pub fn new(id: u64, message: ClientMessage) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            id,
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ClientMessage {
    /// Either `format` + `payload` (file contents) or `generator`.
    LoadMesh {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        format: Option<MeshFormat>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        payload: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generator: Option<MeshGenerator>,
    },
    SetParams {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tolerance: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iter_per_frame: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation_fit: Option<RotationFit>,
    },
    /// Pins `vertex` at `position`, or where it currently is.
    AddHandle {
        vertex: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<[f64; 3]>,
    },
    MoveHandle {
        vertex: usize,
        position: [f64; 3],
    },
    RemoveHandle {
        vertex: usize,
    },
    /// Frame request: run up to `iterations` (default: the per-frame cap)
    /// iterations, then send a frame. Zero sends the current state.
    Step {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        iterations: Option<usize>,
    },
    ResetPose,
    Shutdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    ParseError,
    UnsupportedVersion,
    InvalidRequestId,
    NoMesh,
    InvalidMesh,
    NonManifold,
    OutOfRangeVertex,
    DuplicateHandle,
    NotConstrained,
    InvalidParams,
    SolverError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerEnvelope {
    pub version: u32,
    #[serde(flatten)]
    pub message: ServerMessage,
}

impl From<ServerMessage> for ServerEnvelope {
    fn from(message: ServerMessage) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ServerMessage {
    Ack {
        id: u64,
    },
    Error {
        /// Absent when the request could not be parsed far enough to read it.
        id: Option<u64>,
        code: ErrorCode,
        message: String,
    },
    MeshTopology {
        vertices: usize,
        triangles: Vec<[usize; 3]>,
        /// Rest positions, see [`encode_positions`].
        positions: String,
    },
    Frame {
        /// Strictly increasing per session.
        frame: u64,
        /// Local-global iterations run since the mesh was loaded.
        iteration: u64,
        positions: String,
        energies: Energies,
        /// Relative change of the last iteration, zero if none ran.
        change: f64,
        converged: bool,
    },
}

/// Base64 of the little-endian `f64` coordinates, `x y z` per vertex.
pub fn encode_positions(positions: &[Vector3<f64>]) -> String {
    let mut bytes = Vec::with_capacity(positions.len() * 24);
    for p in positions {
        for c in p.iter() {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
    }
    STANDARD.encode(bytes)
}

pub fn decode_positions(text: &str) -> Result<Vec<Vector3<f64>>, String> {
    let bytes = STANDARD.decode(text).map_err(|e| e.to_string())?;
    if bytes.len() % 24 != 0 {
        return Err(format!("{} bytes is not a whole number of vertices", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(24)
        .map(|c| {
            let f = |i: usize| f64::from_le_bytes(c[8 * i..8 * i + 8].try_into().expect("8-byte chunk"));
            Vector3::new(f(0), f(1), f(2))
        })
        .collect())
}
