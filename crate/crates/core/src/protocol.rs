//! Line-delimited JSON wire protocol between the simulator and an external planner.
//!
//! The server sends `TASK_CONTEXT`, `OBSERVATION`, `FEEDBACK`, `PLAN_REQUEST`,
//! `REPAIR_REQUEST` and a final `RUN_END`; the client answers each request with
//! exactly one `PLAN_RESPONSE` or `REPAIR_RESPONSE` line. See `docs/protocol.md`.

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{score_episode, ScoreCard};
use crate::rules::PrimitiveAction;
use crate::runtime::{run_episode, Notice, PlanError, PlanRequest, Planner, RepairRequest, RunConfig, TaskRunLog};
use crate::scenario::Episode;
use crate::task::{GoalPredicate, SkillCall};

pub const PROTOCOL_VERSION: &str = "hwsim-wire/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum Message {
    TaskContext {
        protocol: String,
        episode_id: String,
        task_id: String,
        position: usize,
        instruction: String,
        goal: GoalPredicate,
        skills: Vec<String>,
        current_area: String,
        left_hand: Option<String>,
        right_hand: Option<String>,
    },
    Observation {
        step: u64,
        area: String,
        image_ref: String,
        text: String,
    },
    Feedback {
        step: u64,
        action: PrimitiveAction,
        feedback: crate::rules::Feedback,
    },
    PlanRequest {
        request: PlanRequest,
    },
    PlanResponse {
        skills: Vec<SkillCall>,
    },
    RepairRequest {
        request: RepairRequest,
    },
    RepairResponse {
        action: Option<PrimitiveAction>,
    },
    RunEnd {
        episode_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scorecard: Option<ScoreCard>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::TaskContext { .. } => "TASK_CONTEXT",
            Self::Observation { .. } => "OBSERVATION",
            Self::Feedback { .. } => "FEEDBACK",
            Self::PlanRequest { .. } => "PLAN_REQUEST",
            Self::PlanResponse { .. } => "PLAN_RESPONSE",
            Self::RepairRequest { .. } => "REPAIR_REQUEST",
            Self::RepairResponse { .. } => "REPAIR_RESPONSE",
            Self::RunEnd { .. } => "RUN_END",
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, ProtocolError> {
        serde_json::from_str(line.trim_end()).map_err(|e| ProtocolError::Malformed(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("protocol violation: expected {expected}, got {got}")]
    Violation { expected: &'static str, got: &'static str },
    #[error("peer closed the connection")]
    Closed,
    #[error("timed out waiting for the peer")]
    Timeout,
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for ProtocolError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => Self::Timeout,
            io::ErrorKind::BrokenPipe | io::ErrorKind::ConnectionReset | io::ErrorKind::UnexpectedEof => Self::Closed,
            _ => Self::Io(e),
        }
    }
}

/// Which side wrote a transcript line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Server,
    Client,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub from: Direction,
    pub line: String,
}

/// Line-framed JSON over any reader/writer pair, recording a transcript.
pub struct Channel<R, W> {
    reader: R,
    writer: W,
    pub transcript: Vec<TranscriptLine>,
}

impl<R: BufRead, W: Write> Channel<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self {
            reader,
            writer,
            transcript: Vec::new(),
        }
    }

    fn send(&mut self, msg: &Message, from: Direction) -> Result<(), ProtocolError> {
        let line = msg.to_line();
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        self.transcript.push(TranscriptLine { from, line });
        Ok(())
    }

    /// Next raw line; `Closed` at end of stream.
    fn recv_line(&mut self, from: Direction) -> Result<String, ProtocolError> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(ProtocolError::Closed);
        }
        let line = line.trim_end_matches(['\n', '\r']).to_string();
        self.transcript.push(TranscriptLine {
            from,
            line: line.clone(),
        });
        Ok(line)
    }
}

/// Planner adapter that forwards every call over the wire.
pub struct ExternalPlanner<R, W> {
    channel: Channel<R, W>,
    episode_id: String,
    vocabulary: BTreeSet<String>,
    /// First fatal error; once set every call fails with `Disconnected`.
    pub fatal: Option<String>,
}

impl<R: BufRead, W: Write> ExternalPlanner<R, W> {
    pub fn new(ep: &Episode, reader: R, writer: W) -> Self {
        Self {
            channel: Channel::new(reader, writer),
            episode_id: ep.episode_id.clone(),
            vocabulary: ep.skills.ids().map(str::to_string).collect(),
            fatal: None,
        }
    }

    pub fn transcript(&self) -> &[TranscriptLine] {
        &self.channel.transcript
    }

    fn fail(&mut self, e: ProtocolError) -> PlanError {
        match e {
            ProtocolError::Timeout => PlanError::Timeout,
            ProtocolError::Malformed(m) => PlanError::Malformed(m),
            other => {
                let reason = other.to_string();
                self.fatal.get_or_insert(reason.clone());
                PlanError::Disconnected(reason)
            }
        }
    }

    fn request(&mut self, msg: Message) -> Result<Message, PlanError> {
        if let Some(reason) = &self.fatal {
            return Err(PlanError::Disconnected(reason.clone()));
        }
        if let Err(e) = self.channel.send(&msg, Direction::Server) {
            return Err(self.fail(e));
        }
        match self.channel.recv_line(Direction::Client) {
            Ok(line) => Message::from_line(&line).map_err(|e| self.fail(e)),
            Err(e) => Err(self.fail(e)),
        }
    }

    /// Final message of a session.
    pub fn finish(&mut self, scorecard: Option<ScoreCard>, error: Option<String>) {
        if self.fatal.is_some() {
            return;
        }
        let msg = Message::RunEnd {
            episode_id: self.episode_id.clone(),
            scorecard,
            error,
        };
        let _ = self.channel.send(&msg, Direction::Server);
    }
}

impl<R: BufRead, W: Write> Planner for ExternalPlanner<R, W> {
    fn plan(&mut self, req: &PlanRequest) -> Result<Vec<SkillCall>, PlanError> {
        match self.request(Message::PlanRequest { request: req.clone() })? {
            Message::PlanResponse { skills } => {
                if let Some(bad) = skills.iter().find(|s| !self.vocabulary.contains(&s.skill_id)) {
                    return Err(PlanError::Malformed(format!(
                        "skill `{}` is not in the vocabulary",
                        bad.skill_id
                    )));
                }
                Ok(skills)
            }
            other => Err(self.fail(ProtocolError::Violation {
                expected: "PLAN_RESPONSE",
                got: other.kind(),
            })),
        }
    }

    fn repair(&mut self, req: &RepairRequest) -> Result<Option<PrimitiveAction>, PlanError> {
        match self.request(Message::RepairRequest { request: req.clone() })? {
            Message::RepairResponse { action } => Ok(action),
            other => Err(self.fail(ProtocolError::Violation {
                expected: "REPAIR_RESPONSE",
                got: other.kind(),
            })),
        }
    }

    fn notify(&mut self, notice: &Notice) {
        if self.fatal.is_some() {
            return;
        }
        let msg = match notice.clone() {
            Notice::TaskContext {
                task_id,
                position,
                instruction,
                goal,
                skills,
                current_area,
                left_hand,
                right_hand,
            } => Message::TaskContext {
                protocol: PROTOCOL_VERSION.into(),
                episode_id: self.episode_id.clone(),
                task_id,
                position,
                instruction,
                goal,
                skills,
                current_area,
                left_hand,
                right_hand,
            },
            Notice::Observation {
                step,
                area,
                image_ref,
                text,
            } => Message::Observation {
                step,
                area,
                image_ref,
                text,
            },
            Notice::Feedback { step, action, feedback } => Message::Feedback { step, action, feedback },
            // Task boundaries are implied by the next TASK_CONTEXT or RUN_END.
            Notice::TaskEnd { .. } => return,
        };
        if let Err(e) = self.channel.send(&msg, Direction::Server) {
            self.fail(e);
        }
    }
}

/// Outcome of one served episode.
#[derive(Debug)]
pub struct Session {
    pub logs: Vec<TaskRunLog>,
    pub scorecard: Option<ScoreCard>,
    pub transcript: Vec<TranscriptLine>,
    /// Set when the client broke the session.
    pub error: Option<String>,
}

/// Drives one episode over the wire and sends `RUN_END` with the scores.
pub fn serve_session<R: BufRead, W: Write>(ep: &Episode, cfg: &RunConfig, reader: R, writer: W) -> Session {
    let mut planner = ExternalPlanner::new(ep, reader, writer);
    let logs = run_episode(ep, &mut planner, cfg);
    let scorecard = score_episode(ep, &logs).ok();
    planner.finish(scorecard.clone(), planner.fatal.clone());
    Session {
        error: planner.fatal.clone(),
        transcript: planner.channel.transcript,
        logs,
        scorecard,
    }
}

/// Client side: answers requests with `planner` until `RUN_END`.
pub fn run_client<P: Planner + ?Sized, R: BufRead, W: Write>(
    planner: &mut P,
    reader: R,
    writer: W,
) -> Result<Option<ScoreCard>, ProtocolError> {
    let mut ch = Channel::new(reader, writer);
    loop {
        let line = ch.recv_line(Direction::Server)?;
        let reply = match Message::from_line(&line)? {
            Message::PlanRequest { request } => Message::PlanResponse {
                skills: planner.plan(&request).unwrap_or_default(),
            },
            Message::RepairRequest { request } => Message::RepairResponse {
                action: planner.repair(&request).ok().flatten(),
            },
            Message::TaskContext {
                task_id,
                position,
                instruction,
                goal,
                skills,
                current_area,
                left_hand,
                right_hand,
                ..
            } => {
                planner.notify(&Notice::TaskContext {
                    task_id,
                    position,
                    instruction,
                    goal,
                    skills,
                    current_area,
                    left_hand,
                    right_hand,
                });
                continue;
            }
            Message::Observation {
                step,
                area,
                image_ref,
                text,
            } => {
                planner.notify(&Notice::Observation {
                    step,
                    area,
                    image_ref,
                    text,
                });
                continue;
            }
            Message::Feedback { step, action, feedback } => {
                planner.notify(&Notice::Feedback { step, action, feedback });
                continue;
            }
            Message::RunEnd { scorecard, .. } => return Ok(scorecard),
            other => {
                return Err(ProtocolError::Violation {
                    expected: "a server message",
                    got: other.kind(),
                })
            }
        };
        ch.send(&reply, Direction::Client)?;
    }
}
