//! Point-to-point messaging between workers.
//!
//! A transport connects `world_size` workers, each addressed by a dense rank.
//! Delivery between any ordered pair is FIFO and carries a sequence number
//! that the receiver validates, so protocol drift (skipped or reordered
//! messages) surfaces as an error instead of silent corruption.

use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use crate::error::{CommError, Result};
use crate::frame::Frame;

/// Blocking point-to-point channel between ranked workers.
pub trait Transport: Send {
    fn rank(&self) -> usize;
    fn world_size(&self) -> usize;

    /// Sends `payload` to `to` under `tag`. Tags identify protocol steps;
    /// the receiver states the tag it expects.
    fn send(&mut self, to: usize, tag: u32, payload: &[f64]) -> Result<()>;

    /// Receives the next message from `from`, which must carry `tag` and the
    /// next sequence number for the pair. Blocks up to the configured
    /// timeout.
    fn recv(&mut self, from: usize, tag: u32) -> Result<Vec<f64>>;
}

pub(crate) fn peer_name(rank: usize) -> String {
    format!("rank {rank}")
}

pub(crate) fn check_target(me: usize, other: usize, n: usize) -> Result<()> {
    if other >= n {
        return Err(CommError::Setup(format!(
            "rank {other} does not exist in a world of {n}"
        )));
    }
    if other == me {
        return Err(CommError::Setup(format!("rank {me} addressed itself")));
    }
    Ok(())
}

/// Validates an incoming frame against the expected tag and sequence number.
pub(crate) fn check_frame(frame: &Frame, peer: usize, tag: u32, expected_seq: u64) -> Result<()> {
    if frame.tag != tag {
        return Err(CommError::Protocol {
            peer: peer_name(peer),
            msg: format!("expected tag {tag}, got tag {} (seq {})", frame.tag, frame.seq),
        });
    }
    if frame.seq != expected_seq {
        return Err(CommError::Protocol {
            peer: peer_name(peer),
            msg: format!("expected sequence {expected_seq}, got {}", frame.seq),
        });
    }
    Ok(())
}

/// In-process transport: one worker per thread, one channel per ordered pair
/// of ranks, so traffic between two workers can never interleave with
/// anyone else's.
pub struct InProcPeer {
    rank: usize,
    timeout: Duration,
    to_peers: Vec<Option<Sender<Frame>>>,
    from_peers: Vec<Option<Receiver<Frame>>>,
    next_send_seq: Vec<u64>,
    next_recv_seq: Vec<u64>,
}

/// Creates a fully connected in-process mesh of `n` workers. Move each
/// returned endpoint into its worker thread.
pub fn inproc_mesh(n: usize, timeout: Duration) -> Vec<InProcPeer> {
    let mut peers: Vec<InProcPeer> = (0..n)
        .map(|rank| InProcPeer {
            rank,
            timeout,
            to_peers: (0..n).map(|_| None).collect(),
            from_peers: (0..n).map(|_| None).collect(),
            next_send_seq: vec![0; n],
            next_recv_seq: vec![0; n],
        })
        .collect();
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let (tx, rx) = channel();
            peers[a].to_peers[b] = Some(tx);
            peers[b].from_peers[a] = Some(rx);
        }
    }
    peers
}

impl Transport for InProcPeer {
    fn rank(&self) -> usize {
        self.rank
    }

    fn world_size(&self) -> usize {
        self.to_peers.len()
    }

    fn send(&mut self, to: usize, tag: u32, payload: &[f64]) -> Result<()> {
        check_target(self.rank, to, self.world_size())?;
        let seq = self.next_send_seq[to];
        self.next_send_seq[to] += 1;
        let frame = Frame {
            tag,
            seq,
            payload: payload.to_vec(),
        };
        self.to_peers[to]
            .as_ref()
            .expect("mesh channel")
            .send(frame)
            .map_err(|_| CommError::Disconnected {
                peer: peer_name(to),
            })
    }

    fn recv(&mut self, from: usize, tag: u32) -> Result<Vec<f64>> {
        check_target(self.rank, from, self.world_size())?;
        let frame = self.from_peers[from]
            .as_ref()
            .expect("mesh channel")
            .recv_timeout(self.timeout)
            .map_err(|e| match e {
                RecvTimeoutError::Timeout => CommError::Timeout {
                    peer: peer_name(from),
                    millis: self.timeout.as_millis() as u64,
                },
                RecvTimeoutError::Disconnected => CommError::Disconnected {
                    peer: peer_name(from),
                },
            })?;
        check_frame(&frame, from, tag, self.next_recv_seq[from])?;
        self.next_recv_seq[from] += 1;
        Ok(frame.payload)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_between_two_ranks_arrive_in_order() {
        let mut mesh = inproc_mesh(2, Duration::from_secs(1));
        let mut b = mesh.pop().unwrap();
        let mut a = mesh.pop().unwrap();
        a.send(1, 10, &[1.0]).unwrap();
        a.send(1, 11, &[2.0, 3.0]).unwrap();
        assert_eq!(b.recv(0, 10).unwrap(), vec![1.0]);
        assert_eq!(b.recv(0, 11).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn wrong_tag_is_a_protocol_error_naming_the_sender() {
        let mut mesh = inproc_mesh(2, Duration::from_secs(1));
        let mut b = mesh.pop().unwrap();
        let mut a = mesh.pop().unwrap();
        a.send(1, 5, &[0.0]).unwrap();
        match b.recv(0, 6) {
            Err(CommError::Protocol { peer, .. }) => assert_eq!(peer, "rank 0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn timeout_names_the_silent_peer() {
        let mut mesh = inproc_mesh(3, Duration::from_millis(20));
        let mut a = mesh.remove(0);
        match a.recv(2, 1) {
            Err(CommError::Timeout { peer, millis }) => {
                assert_eq!(peer, "rank 2");
                assert_eq!(millis, 20);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_send_is_rejected() {
        let mut mesh = inproc_mesh(2, Duration::from_secs(1));
        let mut a = mesh.remove(0);
        assert!(matches!(a.send(0, 1, &[]), Err(CommError::Setup(_))));
        assert!(matches!(a.recv(0, 1), Err(CommError::Setup(_))));
        assert!(matches!(a.send(9, 1, &[]), Err(CommError::Setup(_))));
    }

    #[test]
    fn dropped_peer_reports_disconnect() {
        let mut mesh = inproc_mesh(2, Duration::from_secs(1));
        let mut a = mesh.remove(0);
        drop(mesh); // rank 1 is gone
        match a.recv(1, 1) {
            Err(CommError::Disconnected { peer }) => assert_eq!(peer, "rank 1"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            a.send(1, 1, &[1.0]),
            Err(CommError::Disconnected { .. })
        ));
    }
}
