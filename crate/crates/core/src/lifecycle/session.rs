use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::FitTask;
use crate::probability::EngineConfig;

pub const SESSION_HEADER: &str = "DCNET-SESSION v1\n";

/// A resumable unit of work: the running fit with its instance network,
/// ledger, configuration and fragment queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub task: FitTask,
}

impl Session {
    pub fn new(task: FitTask) -> Self {
        Session { task }
    }

    /// A session with nothing observed yet.
    pub fn empty(config: EngineConfig) -> Self {
        use crate::graph::CognitiveNetwork;
        let kb = CognitiveNetwork::knowledge();
        let task = FitTask::new(&kb, config, &Default::default()).expect("empty scene always ingests");
        Session { task }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = SESSION_HEADER.as_bytes().to_vec();
        serde_json::to_writer_pretty(&mut out, self).expect("session serializes");
        out.push(b'\n');
        out
    }
}

pub fn session_save(session: &Session, mut sink: impl Write) -> std::io::Result<()> {
    sink.write_all(&session.to_bytes())
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let before: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    before + column.saturating_sub(1)
}

/// Reads a session. Any defect yields an error carrying the byte offset
/// where reading failed; nothing partial is returned.
pub fn session_load(mut source: impl Read) -> Result<Session> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Load { offset: bytes.len(), reason: e.to_string() })?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::Load { offset: e.valid_up_to(), reason: "invalid UTF-8".into() })?;
    let Some(body) = text.strip_prefix(SESSION_HEADER) else {
        let matched = SESSION_HEADER.bytes().zip(text.bytes()).take_while(|(a, b)| a == b).count();
        return Err(Error::Load { offset: matched, reason: "missing or unsupported session header".into() });
    };
    serde_json::from_str(body).map_err(|e| Error::Load {
        offset: SESSION_HEADER.len() + byte_offset(body, e.line(), e.column()),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ElementId;
    use crate::growth::{FitInput, SceneInputs};

    fn faces_session(steps: usize) -> (crate::graph::CognitiveNetwork, Session) {
        let kb = crate::growth::tests::faces_kb();
        let inputs = [("eye", 0.6), ("nose", 0.5), ("mouth", 0.4), ("ear", 0.1), ("face", 0.3), ("egg", 0.5)]
            .into_iter()
            .map(|(b, p)| FitInput::new(b, p).named(b))
            .collect();
        let mut task = FitTask::new(&kb, EngineConfig::default(), &SceneInputs { inputs, relations: vec![] }).unwrap();
        for _ in 0..steps {
            task.step(&kb).unwrap();
        }
        (kb, Session::new(task))
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let (_, s) = faces_session(2);
        let bytes = s.to_bytes();
        let back = session_load(bytes.as_slice()).unwrap();
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn empty_session_round_trips() {
        let s = Session::empty(EngineConfig::default());
        let back = session_load(s.to_bytes().as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn resumed_run_matches_uninterrupted() {
        let (kb, s) = faces_session(2);
        let mut resumed = session_load(s.to_bytes().as_slice()).unwrap().task;
        let mut straight = s.task.clone();
        let skip = straight.trace.len();
        let a = resumed.run(&kb).unwrap();
        let b = straight.run(&kb).unwrap();
        assert_eq!(a.events, b.events[skip..]);
        assert_eq!(a.instance, b.instance);
        assert_eq!(a.state(&ElementId::from("face")).unwrap().result, 1.0);
    }

    #[test]
    fn truncated_file_fails_with_offset() {
        let (_, s) = faces_session(1);
        let bytes = s.to_bytes();
        let cut = &bytes[..bytes.len() / 2];
        match session_load(cut) {
            Err(Error::Load { offset, .. }) => assert!(offset > SESSION_HEADER.len() && offset <= cut.len()),
            other => panic!("expected load error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(matches!(
            session_load(&b"DCNET-SESSION v2\n{}"[..]),
            Err(Error::Load { offset: 15, .. })
        ));
    }
}
