//! Protocol message encoding.
//!
//! Every message body is `kind (1 byte) || instance (16 bytes) || payload`;
//! the transport adds a 4-byte big-endian length prefix around whatever it
//! carries (a plain body on coordinator links, an encrypted record on
//! participant channels). Messages are capped at 64 KiB.

use thiserror::Error;

use crate::identity::ParticipantId;

pub const MAX_MESSAGE_LEN: usize = 64 * 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("message truncated")]
    Truncated,
    #[error("unknown tag {0}")]
    UnknownTag(u8),
    #[error("message exceeds the 64 KiB limit")]
    TooLong,
    #[error("trailing bytes after message body")]
    TrailingBytes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalPurpose {
    SetupTest,
    RefreshTest,
    Use,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefusalCode {
    WrongEpoch,
    NotReady,
    Unauthorized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceMode {
    Setup,
    Refresh,
}

/// Coordinator-to-node prompts and node-to-coordinator progress reports.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PhaseSignal {
    /// Begin dealing for this instance.
    Start { mode: InstanceMode, epoch: u32 },
    /// All commitments are posted; run the threshold-validation test.
    BeginTest,
    /// Final verdict: install on success, discard on failure.
    Conclude { done: bool },
    /// Node progress report.
    Report { phase: ReportedPhase, epoch: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportedPhase {
    Committed,
    TestPassed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Body {
    /// A dealer's partial key for the receiving participant (secure
    /// channels only).
    DealShare {
        epoch: u32,
        value: Vec<u8>,
    },
    /// Progress note to the coordinator after publishing a commitment.
    CommitmentPosted {
        index: u16,
        epoch: u32,
    },
    /// Ask a participant to evaluate the DPRF on `x`.
    EvalRequest {
        id: u64,
        purpose: EvalPurpose,
        epoch: u32,
        x: Vec<u8>,
    },
    /// Answer to an [`Body::EvalRequest`].
    EvalResponse {
        id: u64,
        outcome: EvalOutcome,
    },
    PhasePrompt(PhaseSignal),
    Abort {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalOutcome {
    /// Encoded partial evaluations: one for ordinary use and setup tests,
    /// new-epoch plus old-epoch during a refresh test.
    Partials(Vec<Vec<u8>>),
    Refused(RefusalCode),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolMessage {
    pub instance: ParticipantId,
    pub body: Body,
}

impl Body {
    pub fn kind_tag(&self) -> u8 {
        match self {
            Body::DealShare { .. } => 1,
            Body::CommitmentPosted { .. } => 2,
            Body::EvalRequest { .. } => 3,
            Body::EvalResponse { .. } => 4,
            Body::PhasePrompt(_) => 5,
            Body::Abort { .. } => 6,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Body::DealShare { .. } => "deal-share",
            Body::CommitmentPosted { .. } => "commitment-posted",
            Body::EvalRequest { .. } => "eval-request",
            Body::EvalResponse { .. } => "eval-response",
            Body::PhasePrompt(_) => "phase-prompt",
            Body::Abort { .. } => "abort",
        }
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn bytes(&mut self, v: &[u8]) {
        self.u16(v.len() as u16);
        self.0.extend_from_slice(v);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.at + n > self.buf.len() {
            return Err(WireError::Truncated);
        }
        let out = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn bytes(&mut self) -> Result<Vec<u8>, WireError> {
        let len = self.u16()? as usize;
        Ok(self.take(len)?.to_vec())
    }
    fn done(&self) -> Result<(), WireError> {
        if self.at == self.buf.len() {
            Ok(())
        } else {
            Err(WireError::TrailingBytes)
        }
    }
}

impl ProtocolMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::with_capacity(64));
        w.u8(self.body.kind_tag());
        w.0.extend_from_slice(&self.instance);
        match &self.body {
            Body::DealShare { epoch, value } => {
                w.u32(*epoch);
                w.bytes(value);
            }
            Body::CommitmentPosted { index, epoch } => {
                w.u16(*index);
                w.u32(*epoch);
            }
            Body::EvalRequest {
                id,
                purpose,
                epoch,
                x,
            } => {
                w.u64(*id);
                w.u8(match purpose {
                    EvalPurpose::SetupTest => 0,
                    EvalPurpose::RefreshTest => 1,
                    EvalPurpose::Use => 2,
                });
                w.u32(*epoch);
                w.bytes(x);
            }
            Body::EvalResponse { id, outcome } => {
                w.u64(*id);
                match outcome {
                    EvalOutcome::Partials(parts) => {
                        w.u8(1);
                        w.u8(parts.len() as u8);
                        for p in parts {
                            w.bytes(p);
                        }
                    }
                    EvalOutcome::Refused(code) => {
                        w.u8(0);
                        w.u8(match code {
                            RefusalCode::WrongEpoch => 0,
                            RefusalCode::NotReady => 1,
                            RefusalCode::Unauthorized => 2,
                        });
                    }
                }
            }
            Body::PhasePrompt(signal) => match signal {
                PhaseSignal::Start { mode, epoch } => {
                    w.u8(0);
                    w.u8(match mode {
                        InstanceMode::Setup => 0,
                        InstanceMode::Refresh => 1,
                    });
                    w.u32(*epoch);
                }
                PhaseSignal::BeginTest => w.u8(1),
                PhaseSignal::Conclude { done } => {
                    w.u8(2);
                    w.u8(*done as u8);
                }
                PhaseSignal::Report { phase, epoch } => {
                    w.u8(3);
                    w.u8(match phase {
                        ReportedPhase::Committed => 0,
                        ReportedPhase::TestPassed => 1,
                    });
                    w.u32(*epoch);
                }
            },
            Body::Abort { reason } => {
                w.bytes(reason.as_bytes());
            }
        }
        debug_assert!(w.0.len() <= MAX_MESSAGE_LEN);
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() > MAX_MESSAGE_LEN {
            return Err(WireError::TooLong);
        }
        let mut r = Reader { buf: bytes, at: 0 };
        let tag = r.u8()?;
        let instance: ParticipantId = r.take(16)?.try_into().unwrap();
        let body = match tag {
            1 => Body::DealShare {
                epoch: r.u32()?,
                value: r.bytes()?,
            },
            2 => Body::CommitmentPosted {
                index: r.u16()?,
                epoch: r.u32()?,
            },
            3 => {
                let id = r.u64()?;
                let purpose = match r.u8()? {
                    0 => EvalPurpose::SetupTest,
                    1 => EvalPurpose::RefreshTest,
                    2 => EvalPurpose::Use,
                    t => return Err(WireError::UnknownTag(t)),
                };
                Body::EvalRequest {
                    id,
                    purpose,
                    epoch: r.u32()?,
                    x: r.bytes()?,
                }
            }
            4 => {
                let id = r.u64()?;
                let outcome = match r.u8()? {
                    1 => {
                        let count = r.u8()? as usize;
                        let mut parts = Vec::with_capacity(count);
                        for _ in 0..count {
                            parts.push(r.bytes()?);
                        }
                        EvalOutcome::Partials(parts)
                    }
                    0 => EvalOutcome::Refused(match r.u8()? {
                        0 => RefusalCode::WrongEpoch,
                        1 => RefusalCode::NotReady,
                        2 => RefusalCode::Unauthorized,
                        t => return Err(WireError::UnknownTag(t)),
                    }),
                    t => return Err(WireError::UnknownTag(t)),
                };
                Body::EvalResponse { id, outcome }
            }
            5 => {
                let signal = match r.u8()? {
                    0 => PhaseSignal::Start {
                        mode: match r.u8()? {
                            0 => InstanceMode::Setup,
                            1 => InstanceMode::Refresh,
                            t => return Err(WireError::UnknownTag(t)),
                        },
                        epoch: r.u32()?,
                    },
                    1 => PhaseSignal::BeginTest,
                    2 => PhaseSignal::Conclude { done: r.u8()? != 0 },
                    3 => PhaseSignal::Report {
                        phase: match r.u8()? {
                            0 => ReportedPhase::Committed,
                            1 => ReportedPhase::TestPassed,
                            t => return Err(WireError::UnknownTag(t)),
                        },
                        epoch: r.u32()?,
                    },
                    t => return Err(WireError::UnknownTag(t)),
                };
                Body::PhasePrompt(signal)
            }
            6 => Body::Abort {
                reason: String::from_utf8_lossy(&r.bytes()?).into_owned(),
            },
            t => return Err(WireError::UnknownTag(t)),
        };
        r.done()?;
        Ok(Self { instance, body })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(body: Body) {
        let msg = ProtocolMessage {
            instance: [7u8; 16],
            body,
        };
        let bytes = msg.encode();
        assert_eq!(ProtocolMessage::decode(&bytes).unwrap(), msg);
    }

    #[test]
    fn bodies_round_trip() {
        roundtrip(Body::DealShare {
            epoch: 3,
            value: vec![1, 2, 3],
        });
        roundtrip(Body::CommitmentPosted { index: 4, epoch: 0 });
        roundtrip(Body::EvalRequest {
            id: 99,
            purpose: EvalPurpose::Use,
            epoch: 1,
            x: vec![0xAB; 112],
        });
        roundtrip(Body::EvalResponse {
            id: 99,
            outcome: EvalOutcome::Partials(vec![vec![1; 131], vec![2; 131]]),
        });
        roundtrip(Body::EvalResponse {
            id: 1,
            outcome: EvalOutcome::Refused(RefusalCode::WrongEpoch),
        });
        roundtrip(Body::PhasePrompt(PhaseSignal::Start {
            mode: InstanceMode::Refresh,
            epoch: 2,
        }));
        roundtrip(Body::PhasePrompt(PhaseSignal::BeginTest));
        roundtrip(Body::PhasePrompt(PhaseSignal::Conclude { done: true }));
        roundtrip(Body::PhasePrompt(PhaseSignal::Report {
            phase: ReportedPhase::TestPassed,
            epoch: 1,
        }));
        roundtrip(Body::Abort {
            reason: "degree too high".into(),
        });
    }

    #[test]
    fn malformed_messages_are_rejected() {
        assert_eq!(
            ProtocolMessage::decode(&[]).unwrap_err(),
            WireError::Truncated
        );
        assert_eq!(
            ProtocolMessage::decode(&[9; 17]).unwrap_err(),
            WireError::UnknownTag(9)
        );
        let msg = ProtocolMessage {
            instance: [0u8; 16],
            body: Body::PhasePrompt(PhaseSignal::BeginTest),
        };
        let mut bytes = msg.encode();
        bytes.push(0);
        assert_eq!(
            ProtocolMessage::decode(&bytes).unwrap_err(),
            WireError::TrailingBytes
        );
        assert_eq!(
            ProtocolMessage::decode(&vec![1u8; MAX_MESSAGE_LEN + 1]).unwrap_err(),
            WireError::TooLong
        );
    }
}
