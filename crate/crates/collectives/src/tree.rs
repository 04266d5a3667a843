//! Deterministic tree collectives over a transport.
//!
//! A collective runs over a *group*: a slice of ranks in an agreed order that
//! every member passes identically. Members form a binary heap by position
//! (children of position `p` are `2p+1` and `2p+2`), rooted at the group's
//! first member. Reduction sums each node's own buffer, then its left
//! subtree, then its right subtree, in that fixed order — so for a given
//! group the floating-point result is bitwise reproducible, independent of
//! timing or transport.

use crate::error::{CommError, Result};
use crate::transport::{peer_name, Transport};

/// Position of `rank` in the group, validating the group itself.
pub fn position_in(group: &[usize], rank: usize) -> Result<usize> {
    if group.is_empty() {
        return Err(CommError::Setup("empty collective group".into()));
    }
    let mut pos = None;
    for (i, &g) in group.iter().enumerate() {
        if group[..i].contains(&g) {
            return Err(CommError::Setup(format!(
                "rank {g} appears twice in the collective group"
            )));
        }
        if g == rank {
            pos = Some(i);
        }
    }
    pos.ok_or_else(|| {
        CommError::Setup(format!("rank {rank} is not a member of the group {group:?}"))
    })
}

fn add_checked(acc: &mut [f64], part: &[f64], from: usize) -> Result<()> {
    if part.len() != acc.len() {
        return Err(CommError::Protocol {
            peer: peer_name(from),
            msg: format!("payload of {} elements, expected {}", part.len(), acc.len()),
        });
    }
    for (a, p) in acc.iter_mut().zip(part) {
        *a += p;
    }
    Ok(())
}

/// Sums `buf` across the group, leaving the total in the first member's
/// `buf`. Other members are left holding their partial subtree sums.
pub fn reduce_sum(t: &mut impl Transport, group: &[usize], tag: u32, buf: &mut [f64]) -> Result<()> {
    let k = group.len();
    let p = position_in(group, t.rank())?;
    let left = 2 * p + 1;
    let right = 2 * p + 2;
    if left < k {
        let part = t.recv(group[left], tag)?;
        add_checked(buf, &part, group[left])?;
    }
    if right < k {
        let part = t.recv(group[right], tag)?;
        add_checked(buf, &part, group[right])?;
    }
    if p > 0 {
        t.send(group[(p - 1) / 2], tag, buf)?;
    }
    Ok(())
}

/// Copies the first member's `buf` into every member's `buf`.
pub fn broadcast(t: &mut impl Transport, group: &[usize], tag: u32, buf: &mut [f64]) -> Result<()> {
    let k = group.len();
    let p = position_in(group, t.rank())?;
    if p > 0 {
        let data = t.recv(group[(p - 1) / 2], tag)?;
        if data.len() != buf.len() {
            return Err(CommError::Protocol {
                peer: peer_name(group[(p - 1) / 2]),
                msg: format!("payload of {} elements, expected {}", data.len(), buf.len()),
            });
        }
        buf.copy_from_slice(&data);
    }
    let left = 2 * p + 1;
    let right = 2 * p + 2;
    if left < k {
        t.send(group[left], tag, buf)?;
    }
    if right < k {
        t.send(group[right], tag, buf)?;
    }
    Ok(())
}

/// Reduce followed by broadcast: every member ends with the identical,
/// bitwise-deterministic group sum.
pub fn allreduce_sum(
    t: &mut impl Transport,
    group: &[usize],
    reduce_tag: u32,
    bcast_tag: u32,
    buf: &mut [f64],
) -> Result<()> {
    reduce_sum(t, group, reduce_tag, buf)?;
    broadcast(t, group, bcast_tag, buf)
}

/// Blocks until every group member has arrived.
pub fn barrier(t: &mut impl Transport, group: &[usize], tag: u32) -> Result<()> {
    let mut empty: [f64; 0] = [];
    reduce_sum(t, group, tag, &mut empty)?;
    broadcast(t, group, tag.wrapping_add(1), &mut empty)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn position_lookup_and_group_validation() {
        assert_eq!(position_in(&[4, 2, 9], 9).unwrap(), 2);
        assert_eq!(position_in(&[4], 4).unwrap(), 0);
        assert!(matches!(position_in(&[], 0), Err(CommError::Setup(_))));
        assert!(matches!(position_in(&[1, 2], 3), Err(CommError::Setup(_))));
        assert!(matches!(position_in(&[1, 1], 1), Err(CommError::Setup(_))));
    }
}
