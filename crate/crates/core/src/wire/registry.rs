use std::collections::{BTreeMap, BTreeSet};

/// Broker-side session identifier.
pub type SessionId = u64;

#[derive(Debug, Default, Clone)]
pub struct TopicEntry {
    /// Fixed by the first advertiser for the life of the entry.
    pub type_name: Option<String>,
    pub advertisers: BTreeSet<SessionId>,
    pub subscribers: BTreeSet<SessionId>,
}

/// The MASTER's state: topic name → advertisers, subscribers, message type.
#[derive(Debug, Default)]
pub struct TopicRegistry {
    topics: BTreeMap<String, TopicEntry>,
}

#[derive(Debug, PartialEq, Eq)]
pub struct TypeConflict {
    pub topic: String,
    pub existing: String,
    pub offered: String,
}

impl TopicRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advertise(
        &mut self,
        session: SessionId,
        topic: &str,
        type_name: &str,
    ) -> Result<(), TypeConflict> {
        let entry = self.topics.entry(topic.to_string()).or_default();
        match &entry.type_name {
            Some(existing) if existing != type_name => Err(TypeConflict {
                topic: topic.to_string(),
                existing: existing.clone(),
                offered: type_name.to_string(),
            }),
            _ => {
                entry.type_name = Some(type_name.to_string());
                entry.advertisers.insert(session);
                Ok(())
            }
        }
    }

    pub fn subscribe(&mut self, session: SessionId, topic: &str) {
        self.topics
            .entry(topic.to_string())
            .or_default()
            .subscribers
            .insert(session);
    }

    pub fn is_advertised_by(&self, session: SessionId, topic: &str) -> bool {
        self.topics
            .get(topic)
            .is_some_and(|e| e.advertisers.contains(&session))
    }

    pub fn subscribers_of(&self, topic: &str) -> impl Iterator<Item = SessionId> + '_ {
        self.topics
            .get(topic)
            .into_iter()
            .flat_map(|e| e.subscribers.iter().copied())
    }

    /// Removes every trace of a disconnected session; topic entries that no
    /// session references any more are dropped.
    pub fn remove_session(&mut self, session: SessionId) {
        self.topics.retain(|_, entry| {
            entry.advertisers.remove(&session);
            entry.subscribers.remove(&session);
            !entry.advertisers.is_empty() || !entry.subscribers.is_empty()
        });
    }

    pub fn contains_session(&self, session: SessionId) -> bool {
        self.topics
            .values()
            .any(|e| e.advertisers.contains(&session) || e.subscribers.contains(&session))
    }

    pub fn topic(&self, name: &str) -> Option<&TopicEntry> {
        self.topics.get(name)
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_fixed_by_first_advertiser() {
        let mut reg = TopicRegistry::new();
        reg.advertise(1, "camera", "ImageFrame").unwrap();
        reg.advertise(2, "camera", "ImageFrame").unwrap();
        let err = reg.advertise(3, "camera", "DetectionMsg").unwrap_err();
        assert_eq!(err.existing, "ImageFrame");
        assert_eq!(err.offered, "DetectionMsg");
    }

    #[test]
    fn subscribe_before_advertise_is_allowed() {
        let mut reg = TopicRegistry::new();
        reg.subscribe(5, "camera");
        reg.advertise(1, "camera", "ImageFrame").unwrap();
        assert_eq!(reg.subscribers_of("camera").collect::<Vec<_>>(), vec![5]);
    }

    #[test]
    fn remove_session_leaves_no_trace() {
        let mut reg = TopicRegistry::new();
        reg.advertise(1, "a", "T").unwrap();
        reg.subscribe(1, "b");
        reg.subscribe(2, "b");
        reg.remove_session(1);
        assert!(!reg.contains_session(1));
        assert!(reg.topic("a").is_none(), "empty topic entries are dropped");
        assert!(reg.topic("b").is_some());
    }

    #[test]
    fn random_event_interleavings_never_leak_sessions() {
        // Deterministic pseudo-random walk over connect / advertise /
        // subscribe / disconnect events.
        let mut reg = TopicRegistry::new();
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut live: Vec<SessionId> = Vec::new();
        let mut next_id: SessionId = 0;
        for _ in 0..2000 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let topic = format!("t{}", state % 5);
            match state % 4 {
                0 => {
                    live.push(next_id);
                    next_id += 1;
                }
                1 if !live.is_empty() => {
                    let sid = live[(state >> 8) as usize % live.len()];
                    let _ = reg.advertise(sid, &topic, "T");
                }
                2 if !live.is_empty() => {
                    let sid = live[(state >> 8) as usize % live.len()];
                    reg.subscribe(sid, &topic);
                }
                3 if !live.is_empty() => {
                    let sid = live.swap_remove((state >> 8) as usize % live.len());
                    reg.remove_session(sid);
                    assert!(!reg.contains_session(sid));
                }
                _ => {}
            }
        }
        for sid in 0..next_id {
            if !live.contains(&sid) {
                assert!(!reg.contains_session(sid));
            }
        }
    }
}
