//! TCP transport: a full mesh of sockets between ranked workers, one stream
//! per unordered pair, used bidirectionally. Frames use the shared wire
//! format; per-pair FIFO comes from TCP itself and is cross-checked by the
//! sequence numbers.

use std::io::Write;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::time::{Duration, Instant};

use crate::error::{CommError, Result};
use crate::frame::{read_frame, write_frame, Frame};
use crate::transport::{check_frame, check_target, peer_name, Transport};

/// Binds `n` listeners for a mesh, all on `bind_addr` (typically
/// `127.0.0.1:0` to take ephemeral ports). Returns the listeners along with
/// the addresses peers should dial.
pub fn bind_listeners(n: usize, bind_addr: &str) -> Result<(Vec<TcpListener>, Vec<SocketAddr>)> {
    let mut listeners = Vec::with_capacity(n);
    let mut addrs = Vec::with_capacity(n);
    for _ in 0..n {
        let l = TcpListener::bind(bind_addr).map_err(|source| CommError::Io {
            peer: bind_addr.to_string(),
            source,
        })?;
        addrs.push(l.local_addr().map_err(|source| CommError::Io {
            peer: bind_addr.to_string(),
            source,
        })?);
        listeners.push(l);
    }
    Ok((listeners, addrs))
}

pub struct TcpPeer {
    rank: usize,
    streams: Vec<Option<TcpStream>>,
    next_send_seq: Vec<u64>,
    next_recv_seq: Vec<u64>,
    timeout: Duration,
}

fn io_err(peer: &str, source: std::io::Error) -> CommError {
    CommError::Io {
        peer: peer.to_string(),
        source,
    }
}

/// Builds rank `rank`'s endpoint of the mesh: dials every lower rank and
/// accepts a connection from every higher rank, with an 8-byte hello
/// identifying the dialer. Every worker must call this concurrently.
pub fn establish_tcp_mesh(
    rank: usize,
    listener: TcpListener,
    peers: &[SocketAddr],
    timeout: Duration,
) -> Result<TcpPeer> {
    let n = peers.len();
    if rank >= n {
        return Err(CommError::Setup(format!(
            "rank {rank} outside world of {n}"
        )));
    }
    let mut streams: Vec<Option<TcpStream>> = (0..n).map(|_| None).collect();

    // Dial lower ranks, retrying while their listeners come up.
    for (to, addr) in peers.iter().enumerate().take(rank) {
        let deadline = Instant::now() + timeout;
        let stream = loop {
            match TcpStream::connect(addr) {
                Ok(s) => break s,
                Err(e) => {
                    if Instant::now() >= deadline {
                        return Err(CommError::Timeout {
                            peer: format!("{} ({addr})", peer_name(to)),
                            millis: timeout.as_millis() as u64,
                        });
                    }
                    let _ = e;
                    std::thread::sleep(Duration::from_millis(10));
                }
            }
        };
        configure(&stream, to, timeout)?;
        let mut s = stream;
        s.write_all(&(rank as u64).to_le_bytes())
            .map_err(|e| io_err(&peer_name(to), e))?;
        streams[to] = Some(s);
    }

    // Accept higher ranks; each identifies itself first.
    let mut accepted = 0usize;
    let expect = n - rank - 1;
    while accepted < expect {
        let (stream, addr) = listener.accept().map_err(|e| io_err("listener", e))?;
        configure(&stream, usize::MAX, timeout)?;
        let mut hello = [0u8; 8];
        use std::io::Read;
        let mut s = stream;
        s.read_exact(&mut hello)
            .map_err(|e| io_err(&format!("dialer at {addr}"), e))?;
        let from = u64::from_le_bytes(hello) as usize;
        if from <= rank || from >= n {
            return Err(CommError::Protocol {
                peer: format!("dialer at {addr}"),
                msg: format!("claimed rank {from}, expected one of {}..{n}", rank + 1),
            });
        }
        if streams[from].is_some() {
            return Err(CommError::Protocol {
                peer: peer_name(from),
                msg: "connected twice".into(),
            });
        }
        streams[from] = Some(s);
        accepted += 1;
    }

    Ok(TcpPeer {
        rank,
        streams,
        next_send_seq: vec![0; n],
        next_recv_seq: vec![0; n],
        timeout,
    })
}

fn configure(stream: &TcpStream, peer: usize, timeout: Duration) -> Result<()> {
    let name = if peer == usize::MAX {
        "dialer".to_string()
    } else {
        peer_name(peer)
    };
    stream.set_nodelay(true).map_err(|e| io_err(&name, e))?;
    stream
        .set_read_timeout(Some(timeout))
        .map_err(|e| io_err(&name, e))?;
    Ok(())
}

impl Transport for TcpPeer {
    fn rank(&self) -> usize {
        self.rank
    }

    fn world_size(&self) -> usize {
        self.streams.len()
    }

    fn send(&mut self, to: usize, tag: u32, payload: &[f64]) -> Result<()> {
        check_target(self.rank, to, self.streams.len())?;
        let seq = self.next_send_seq[to];
        let frame = Frame {
            tag,
            seq,
            payload: payload.to_vec(),
        };
        let stream = self.streams[to].as_mut().expect("mesh stream");
        write_frame(stream, &peer_name(to), &frame)?;
        self.next_send_seq[to] += 1;
        Ok(())
    }

    fn recv(&mut self, from: usize, tag: u32) -> Result<Vec<f64>> {
        check_target(self.rank, from, self.streams.len())?;
        let timeout = self.timeout;
        let stream = self.streams[from].as_mut().expect("mesh stream");
        let frame = read_frame(stream, &peer_name(from)).map_err(|e| match e {
            // read_frame cannot know the configured timeout; fill it in.
            CommError::Timeout { peer, .. } => CommError::Timeout {
                peer,
                millis: timeout.as_millis() as u64,
            },
            other => other,
        })?;
        check_frame(&frame, from, tag, self.next_recv_seq[from])?;
        self.next_recv_seq[from] += 1;
        Ok(frame.payload)
    }
}
