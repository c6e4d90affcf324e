use std::io::Cursor;
use std::sync::mpsc::{Receiver, Sender};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::protocol::{encode_positions, ClientEnvelope, ClientMessage, ErrorCode, ServerEnvelope, ServerMessage};
use super::PROTOCOL_VERSION;
use crate::deform::{ConstraintMode, DeformError, DeformParams, Deformer};
use crate::linear::SolverError;
use crate::mesh::{load_mesh, make_test_mesh, HalfEdgeMesh, MeshError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub params: DeformParams,
    pub max_iter_per_frame: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            params: DeformParams {
                constraint_mode: ConstraintMode::KktUpdating,
                ..DeformParams::default()
            },
            max_iter_per_frame: 4,
        }
    }
}

struct Failure {
    code: ErrorCode,
    message: String,
}

impl Failure {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<DeformError> for Failure {
    fn from(e: DeformError) -> Self {
        let code = match &e {
            DeformError::Mesh(MeshError::NonManifold(..) | MeshError::InconsistentOrientation(..)) => {
                ErrorCode::NonManifold
            }
            DeformError::Mesh(_) => ErrorCode::InvalidMesh,
            DeformError::Solver(SolverError::VertexOutOfRange { .. }) => ErrorCode::OutOfRangeVertex,
            DeformError::Solver(SolverError::DuplicateConstraint(_)) => ErrorCode::DuplicateHandle,
            DeformError::Solver(SolverError::NotConstrained(_)) => ErrorCode::NotConstrained,
            DeformError::InvalidParams(_) => ErrorCode::InvalidParams,
            _ => ErrorCode::SolverError,
        };
        Self::new(code, e.to_string())
    }
}

impl From<MeshError> for Failure {
    fn from(e: MeshError) -> Self {
        DeformError::from(e).into()
    }
}

/// One client's deformation session.
#[derive(Debug)]
pub struct Session {
    config: SessionConfig,
    deformer: Option<Deformer>,
    last_id: Option<u64>,
    frame: u64,
    iterations: u64,
    shutdown: bool,
}

impl Default for Session {
    fn default() -> Self {
        Self::new(SessionConfig::default())
    }
}

impl Session {
    pub fn new(config: SessionConfig) -> Self {
        Self {
            config,
            deformer: None,
            last_id: None,
            frame: 0,
            iterations: 0,
            shutdown: false,
        }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn deformer(&self) -> Option<&Deformer> {
        self.deformer.as_ref()
    }

    pub fn is_shutdown(&self) -> bool {
        self.shutdown
    }

    /// Parses one JSON message and handles it.
    pub fn handle_text(&mut self, text: &str) -> Vec<ServerEnvelope> {
        match serde_json::from_str::<ClientEnvelope>(text) {
            Ok(envelope) => self.handle(envelope),
            Err(e) => {
                // Echo the id when the envelope is at least a JSON object with one.
                let id = serde_json::from_str::<serde_json::Value>(text)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|id| id.as_u64()));
                vec![error(id, ErrorCode::ParseError, e.to_string())]
            }
        }
    }

    pub fn handle(&mut self, envelope: ClientEnvelope) -> Vec<ServerEnvelope> {
        let id = envelope.id;
        if envelope.version != PROTOCOL_VERSION {
            return vec![error(
                Some(id),
                ErrorCode::UnsupportedVersion,
                format!("protocol version {} is not supported", envelope.version),
            )];
        }
        if self.last_id.is_some_and(|last| id <= last) {
            return vec![error(
                Some(id),
                ErrorCode::InvalidRequestId,
                format!("request id {id} does not increase"),
            )];
        }
        self.last_id = Some(id);
        match self.dispatch(envelope.message) {
            Ok(data) => {
                let mut out = vec![ServerMessage::Ack { id }.into()];
                out.extend(data.into_iter().map(ServerEnvelope::from));
                out
            }
            Err(f) => vec![error(Some(id), f.code, f.message)],
        }
    }

    fn deformer_mut(&mut self) -> Result<&mut Deformer, Failure> {
        self.deformer
            .as_mut()
            .ok_or_else(|| Failure::new(ErrorCode::NoMesh, "no mesh loaded"))
    }

    fn dispatch(&mut self, message: ClientMessage) -> Result<Vec<ServerMessage>, Failure> {
        match message {
            ClientMessage::LoadMesh {
                format,
                payload,
                generator,
            } => {
                let mesh = match (format, payload, generator) {
                    (Some(format), Some(payload), None) => load_mesh(Cursor::new(payload.as_bytes()), format)?,
                    (None, None, Some(generator)) => make_test_mesh(&generator)?,
                    _ => {
                        return Err(Failure::new(
                            ErrorCode::ParseError,
                            "LoadMesh needs either format and payload, or generator",
                        ))
                    }
                };
                let mesh = HalfEdgeMesh::new(mesh)?;
                let deformer = Deformer::new(mesh, self.config.params)?;
                let topology = ServerMessage::MeshTopology {
                    vertices: deformer.rest().len(),
                    triangles: deformer.mesh().triangles().to_vec(),
                    positions: encode_positions(deformer.rest()),
                };
                self.deformer = Some(deformer);
                self.iterations = 0;
                Ok(vec![topology, self.frame_message(0.0, false)])
            }
            ClientMessage::SetParams {
                lambda,
                tolerance,
                max_iter_per_frame,
                rotation_fit,
            } => {
                let mut params = self.config.params;
                if let Some(l) = lambda {
                    params.lambda = l;
                }
                if let Some(t) = tolerance {
                    params.tolerance = t;
                }
                if let Some(f) = rotation_fit {
                    params.rotation_fit = f;
                }
                params.validate()?;
                if max_iter_per_frame == Some(0) {
                    return Err(Failure::new(
                        ErrorCode::InvalidParams,
                        "max_iter_per_frame must be positive",
                    ));
                }
                if let Some(d) = self.deformer.as_mut() {
                    d.set_params(params)?;
                }
                self.config.params = params;
                if let Some(m) = max_iter_per_frame {
                    self.config.max_iter_per_frame = m;
                }
                Ok(vec![])
            }
            ClientMessage::AddHandle { vertex, position } => {
                let d = self.deformer_mut()?;
                let count = d.rest().len();
                if vertex >= count {
                    return Err(Failure::new(
                        ErrorCode::OutOfRangeVertex,
                        format!("vertex {vertex} is out of range for {count} vertices"),
                    ));
                }
                let target = position.map(Vector3::from).unwrap_or(d.positions()[vertex]);
                d.add_constraint(vertex, target)?;
                Ok(vec![])
            }
            ClientMessage::MoveHandle { vertex, position } => {
                let d = self.deformer_mut()?;
                if vertex >= d.rest().len() {
                    return Err(Failure::new(
                        ErrorCode::OutOfRangeVertex,
                        format!("vertex {vertex} is out of range"),
                    ));
                }
                d.move_constraint(vertex, Vector3::from(position))?;
                let cap = self.config.max_iter_per_frame;
                Ok(vec![self.advance(cap)?])
            }
            ClientMessage::RemoveHandle { vertex } => {
                self.deformer_mut()?.remove_constraint(vertex)?;
                Ok(vec![])
            }
            ClientMessage::Step { iterations } => {
                self.deformer_mut()?;
                let n = iterations.unwrap_or(self.config.max_iter_per_frame);
                Ok(vec![self.advance(n)?])
            }
            ClientMessage::ResetPose => {
                self.deformer_mut()?.reset();
                Ok(vec![self.frame_message(0.0, false)])
            }
            ClientMessage::Shutdown => {
                self.shutdown = true;
                Ok(vec![])
            }
        }
    }

    fn advance(&mut self, max_iterations: usize) -> Result<ServerMessage, Failure> {
        let d = self.deformer_mut()?;
        let reports = d.iterate_up_to(max_iterations)?;
        self.iterations += reports.len() as u64;
        let (change, converged) = reports.last().map_or((0.0, false), |r| (r.change, r.converged));
        Ok(self.frame_message(change, converged))
    }

    fn frame_message(&mut self, change: f64, converged: bool) -> ServerMessage {
        let d = self.deformer.as_ref().expect("frames need a mesh");
        self.frame += 1;
        ServerMessage::Frame {
            frame: self.frame,
            iteration: self.iterations,
            positions: encode_positions(d.positions()),
            energies: d.energies(),
            change,
            converged,
        }
    }
}

fn error(id: Option<u64>, code: ErrorCode, message: String) -> ServerEnvelope {
    ServerMessage::Error { id, code, message }.into()
}

/// Serves one session on the calling thread: reads JSON text messages from
/// `incoming` and sends serialized replies to `outgoing` in order. Returns
/// after `Shutdown` or when either channel closes.
pub fn run_channel(config: SessionConfig, incoming: Receiver<String>, outgoing: Sender<String>) {
    let mut session = Session::new(config);
    while let Ok(text) = incoming.recv() {
        for reply in session.handle_text(&text) {
            let json = serde_json::to_string(&reply).expect("server messages serialize");
            if outgoing.send(json).is_err() {
                return;
            }
        }
        if session.is_shutdown() {
            return;
        }
    }
}
