//! Intra-flow linear coding: packet pools, coded packets, per-receiver
//! subspace tracking, and the innovative-vector search.
//!
//! A coded packet for a pool of n originals carries a coefficient vector in
//! GF(q)^n plus the matching linear combination of payloads. A packet is
//! innovative for a receiver when its coefficient vector lies outside the
//! subspace spanned by everything that receiver has seen; the scheduler only
//! ever transmits vectors innovative for every receiver it serves, which is
//! possible whenever q exceeds the number of receivers served together.
//!
//! Receiver state is a payload-carrying reduced row echelon form, stored
//! sparsely: coordinates whose unit vector is known are held as decoded
//! payloads and dropped from all rows, so a row only references the still
//! undetermined ("gap") coordinates. Online pools grow into the tens of
//! thousands of packets while backlogs stay small, and all costs here scale
//! with the backlog, not the pool.

use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

use crate::gf::Field;
use crate::{Error, Result};

/// Sparse coefficient vector over a pool of dimension `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientVector {
    pub n: usize,
    /// (coordinate, nonzero coefficient), sorted by coordinate.
    pub entries: Vec<(usize, u8)>,
}

impl CoefficientVector {
    pub fn unit(n: usize, coord: usize) -> Self {
        assert!(coord < n);
        CoefficientVector {
            n,
            entries: vec![(coord, 1)],
        }
    }

    pub fn from_dense(dense: &[u8]) -> Self {
        CoefficientVector {
            n: dense.len(),
            entries: dense
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0)
                .map(|(i, &c)| (i, c))
                .collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.n];
        for &(i, c) in &self.entries {
            out[i] = c;
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Original packets of one (flow, batch), in arrival order.
#[derive(Debug, Clone)]
pub struct PacketPool {
    pub flow: usize,
    pub batch: usize,
    payload_len: usize,
    packets: Vec<Vec<u8>>,
}

impl PacketPool {
    pub fn new(flow: usize, batch: usize, payload_len: usize) -> Self {
        PacketPool {
            flow,
            batch,
            payload_len,
            packets: Vec::new(),
        }
    }

    pub fn push(&mut self, payload: Vec<u8>) -> Result<()> {
        if payload.len() != self.payload_len {
            return Err(Error::Dimension(format!(
                "payload of {} bytes in a pool of {}-byte packets",
                payload.len(),
                self.payload_len
            )));
        }
        self.packets.push(payload);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    pub fn packet(&self, i: usize) -> &[u8] {
        &self.packets[i]
    }
}

/// A transmitted linear combination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPacket {
    pub flow: usize,
    pub batch: usize,
    pub coeffs: CoefficientVector,
    pub payload: Vec<u8>,
}

impl CodedPacket {
    /// Canonical byte serialization (flow, batch, n, dense coefficients,
    /// payload), used by determinism checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.flow as u64).to_be_bytes());
        out.extend_from_slice(&(self.batch as u64).to_be_bytes());
        out.extend_from_slice(&(self.coeffs.n as u64).to_be_bytes());
        out.extend_from_slice(&self.coeffs.to_dense());
        out.extend_from_slice(&self.payload);
        out
    }
}

/// Computes Σ coeff_p · packet_p over the pool.
pub fn encode(field: &Field, pool: &PacketPool, coeffs: &CoefficientVector) -> Result<CodedPacket> {
    if coeffs.n != pool.len() {
        return Err(Error::Dimension(format!(
            "{}-dimensional coefficients for a pool of {}",
            coeffs.n,
            pool.len()
        )));
    }
    encode_prefix(field, pool, coeffs)
}

/// Like [`encode`], but codes over the first `coeffs.n` pool packets only.
/// Used when a scheduler is restricted to a visible prefix of the arrivals.
pub fn encode_prefix(
    field: &Field,
    pool: &PacketPool,
    coeffs: &CoefficientVector,
) -> Result<CodedPacket> {
    if coeffs.n > pool.len() {
        return Err(Error::Dimension(format!(
            "{}-dimensional coefficients for a pool of {}",
            coeffs.n,
            pool.len()
        )));
    }
    let mut payload = vec![0u8; pool.payload_len()];
    for &(i, c) in &coeffs.entries {
        field.axpy_packed(&mut payload, c, pool.packet(i));
    }
    Ok(CodedPacket {
        flow: pool.flow,
        batch: pool.batch,
        coeffs: coeffs.clone(),
        payload,
    })
}

/// One stored (not yet decoded) row of the receiver's echelon form.
#[derive(Debug, Clone)]
struct Row {
    /// Leading coordinate; coefficient normalized to 1. Marked `Pivot` in
    /// the coordinate map.
    pivot: usize,
    /// Remaining coefficients, all on `Gap` coordinates, sorted.
    tail: Vec<(usize, u8)>,
    payload: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coord {
    /// Unit vector known; payload held in `decoded`.
    Decoded,
    /// Leading coordinate of the stored row with this index.
    Pivot(usize),
    /// Not yet determined by any received combination.
    Gap,
}

/// Everything one output has received for one (flow, batch).
#[derive(Debug, Clone)]
pub struct ReceiverState {
    pub flow: usize,
    pub batch: usize,
    field: Field,
    payload_len: usize,
    coords: Vec<Coord>,
    decoded: BTreeMap<usize, Vec<u8>>,
    /// Coordinates currently in `Gap` state, kept so that `gaps()` costs
    /// O(deficiency) instead of a scan of the whole dimension.
    gap_index: BTreeSet<usize>,
    rows: Vec<Option<Row>>,
    free_rows: Vec<usize>,
    rank: usize,
}

impl ReceiverState {
    pub fn new(flow: usize, batch: usize, field: &Field, payload_len: usize) -> Self {
        ReceiverState {
            flow,
            batch,
            field: field.clone(),
            payload_len,
            coords: Vec::new(),
            decoded: BTreeMap::new(),
            gap_index: BTreeSet::new(),
            rows: Vec::new(),
            free_rows: Vec::new(),
            rank: 0,
        }
    }

    /// Current pool dimension this receiver has been told about.
    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Pool coordinates not yet pinned down; the receiver needs exactly one
    /// innovative packet per gap.
    pub fn deficiency(&self) -> usize {
        self.dimension() - self.rank
    }

    /// Gap coordinates, ascending.
    pub fn gaps(&self) -> Vec<usize> {
        self.gap_index.iter().copied().collect()
    }

    /// Grows the ambient dimension as the pool grows (never shrinks).
    pub fn grow(&mut self, n: usize) -> Result<()> {
        if n < self.coords.len() {
            return Err(Error::Contract(format!(
                "pool dimension went from {} to {n}",
                self.coords.len()
            )));
        }
        for i in self.coords.len()..n {
            self.gap_index.insert(i);
        }
        self.coords.resize(n, Coord::Gap);
        Ok(())
    }

    /// True if the coefficient vector would be innovative (rank-increasing)
    /// for this receiver. Pure check; no state change. Coordinates at or
    /// beyond the current dimension count as gaps.
    ///
    /// Row tails reference gap coordinates only, so eliminating a pivot or
    /// decoded entry never creates work beyond the original entries; what
    /// survives is the residual on gap coordinates.
    pub fn is_innovative(&self, coeffs: &CoefficientVector) -> bool {
        let mut work: BTreeMap<usize, u8> = BTreeMap::new();
        for &(i, c) in &coeffs.entries {
            if c != 0 {
                work.insert(i, c);
            }
        }
        let mut pending: Vec<usize> = work.keys().copied().collect();
        while let Some(i) = pending.pop() {
            let Some(&c) = work.get(&i) else { continue };
            match self.coord(i) {
                Coord::Gap => {}
                Coord::Decoded => {
                    work.remove(&i);
                }
                Coord::Pivot(r) => {
                    work.remove(&i);
                    for &(j, rc) in &self.rows[r].as_ref().unwrap().tail {
                        merge(&mut work, j, self.field.mul(c, rc));
                    }
                }
            }
        }
        !work.is_empty()
    }

    fn coord(&self, i: usize) -> Coord {
        if i < self.coords.len() {
            self.coords[i]
        } else {
            Coord::Gap
        }
    }

    /// Receives a coded packet. Returns true iff it was innovative. A
    /// non-innovative packet whose payload disagrees with the known
    /// combination is a data-integrity error.
    pub fn absorb(&mut self, packet: &CodedPacket) -> Result<bool> {
        if packet.flow != self.flow || packet.batch != self.batch {
            return Err(Error::Contract(format!(
                "packet for flow {} batch {} absorbed by state for flow {} batch {}",
                packet.flow, packet.batch, self.flow, self.batch
            )));
        }
        if packet.payload.len() != self.payload_len {
            return Err(Error::Dimension("payload length mismatch".into()));
        }
        self.grow(packet.coeffs.n)?;

        // reduce the packet against decoded coordinates and stored rows
        let mut work: BTreeMap<usize, u8> = BTreeMap::new();
        for &(i, c) in &packet.coeffs.entries {
            if i >= packet.coeffs.n {
                return Err(Error::Contract("coefficient beyond pool dimension".into()));
            }
            if c != 0 {
                work.insert(i, c);
            }
        }
        let mut payload = packet.payload.clone();
        let mut pending: Vec<usize> = work.keys().copied().collect();
        while let Some(i) = pending.pop() {
            let Some(&c) = work.get(&i) else { continue };
            match self.coords[i] {
                Coord::Gap => {}
                Coord::Decoded => {
                    work.remove(&i);
                    self.field.axpy_packed(&mut payload, c, &self.decoded[&i]);
                }
                Coord::Pivot(r) => {
                    work.remove(&i);
                    let row = self.rows[r].as_ref().unwrap();
                    self.field.axpy_packed(&mut payload, c, &row.payload);
                    for &(j, rc) in &row.tail {
                        merge(&mut work, j, self.field.mul(c, rc));
                    }
                }
            }
        }

        if work.is_empty() {
            if payload.iter().any(|&b| b != 0) {
                return Err(Error::Integrity(
                    "known combination arrived with a different payload".into(),
                ));
            }
            return Ok(false);
        }

        // normalize on the smallest residual coordinate and store
        let (&p, &pc) = work.iter().next().unwrap();
        work.remove(&p);
        let inv = self.field.inv(pc)?;
        let mut tail: Vec<(usize, u8)> = work
            .into_iter()
            .map(|(j, c)| (j, self.field.mul(inv, c)))
            .collect();
        tail.retain(|&(_, c)| c != 0);
        if inv != 1 {
            for b in payload.iter_mut() {
                *b = self.field.mul_packed(inv, *b);
            }
        }
        let new_row = Row {
            pivot: p,
            tail,
            payload,
        };
        let slot = if let Some(s) = self.free_rows.pop() {
            self.rows[s] = Some(new_row);
            s
        } else {
            self.rows.push(Some(new_row));
            self.rows.len() - 1
        };
        self.coords[p] = Coord::Pivot(slot);
        self.gap_index.remove(&p);
        self.rank += 1;

        // eliminate the fresh pivot from every row that references it, then
        // resolve any rows left with an empty tail into decoded payloads
        let mut resolve: Vec<usize> = Vec::new();
        let fresh = self.rows[slot].as_ref().unwrap().clone();
        for (ri, row) in self.rows.iter_mut().enumerate() {
            let Some(row) = row else { continue };
            if ri == slot {
                continue;
            }
            if let Ok(pos) = row.tail.binary_search_by_key(&p, |&(j, _)| j) {
                let c = row.tail[pos].1;
                row.tail.remove(pos);
                for &(j, fc) in &fresh.tail {
                    let add = self.field.mul(c, fc);
                    merge_sorted(&mut row.tail, j, add);
                }
                self.field.axpy_packed(&mut row.payload, c, &fresh.payload);
                if row.tail.is_empty() {
                    resolve.push(ri);
                }
            }
        }
        if fresh.tail.is_empty() {
            resolve.push(slot);
        }
        for ri in resolve {
            let row = self.rows[ri].take().unwrap();
            self.coords[row.pivot] = Coord::Decoded;
            self.decoded.insert(row.pivot, row.payload);
            self.free_rows.push(ri);
        }
        Ok(true)
    }

    /// Decoded payloads in pool order once the batch of `batch_size` is
    /// fully resolved; otherwise the remaining deficiency.
    pub fn decode(&self, batch_size: usize) -> Result<std::result::Result<Vec<Vec<u8>>, usize>> {
        if batch_size != self.dimension() {
            return Err(Error::Contract(format!(
                "decode of batch {batch_size} against dimension {}",
                self.dimension()
            )));
        }
        if self.rank < batch_size {
            return Ok(Err(batch_size - self.rank));
        }
        let mut out = Vec::with_capacity(batch_size);
        for i in 0..batch_size {
            match self.decoded.get(&i) {
                Some(p) => out.push(p.clone()),
                None => {
                    return Err(Error::Contract(
                        "full rank but an undecoded coordinate remains".into(),
                    ))
                }
            }
        }
        Ok(Ok(out))
    }
}

fn merge(map: &mut BTreeMap<usize, u8>, key: usize, add: u8) -> bool {
    if add == 0 {
        return false;
    }
    match map.entry(key) {
        std::collections::btree_map::Entry::Occupied(mut e) => {
            let v = *e.get() ^ add;
            if v == 0 {
                e.remove();
                false
            } else {
                *e.get_mut() = v;
                false
            }
        }
        std::collections::btree_map::Entry::Vacant(e) => {
            e.insert(add);
            true
        }
    }
}

fn merge_sorted(tail: &mut Vec<(usize, u8)>, key: usize, add: u8) {
    if add == 0 {
        return;
    }
    match tail.binary_search_by_key(&key, |&(j, _)| j) {
        Ok(pos) => {
            let v = tail[pos].1 ^ add;
            if v == 0 {
                tail.remove(pos);
            } else {
                tail[pos].1 = v;
            }
        }
        Err(pos) => tail.insert(pos, (key, add)),
    }
}

/// Searches for a coefficient vector in GF(q)^n innovative for every given
/// receiver. Guaranteed to exist when q > k; `Ok(None)` is only returned
/// after exhausting the whole space (so only when q ≤ k).
///
/// Random candidates are drawn from the span of the unit vectors of the
/// receivers' gap coordinates: each receiver's subspace meets that span
/// properly (a gap unit vector never lies in the receiver's subspace), so
/// a union bound over the k proper intersections leaves each draw innovative
/// with probability at least 1 - k/q.
pub fn find_innovative(
    field: &Field,
    n: usize,
    receivers: &[&ReceiverState],
    rng: &mut impl Rng,
) -> Result<Option<CoefficientVector>> {
    if n == 0 {
        return Err(Error::Validation("empty pool".into()));
    }
    for r in receivers {
        if r.dimension() > n {
            return Err(Error::Contract("receiver ahead of the pool".into()));
        }
        if r.rank() == n {
            return Err(Error::Contract(
                "receiver already at full rank; exclude it before the search".into(),
            ));
        }
    }
    if receivers.is_empty() {
        return Ok(Some(CoefficientVector::unit(n, 0)));
    }

    let mut support: Vec<usize> = Vec::new();
    for r in receivers {
        for g in r.gaps() {
            if !support.contains(&g) {
                support.push(g);
            }
        }
        // coordinates past a lagging receiver's dimension are gaps for it
        for g in r.dimension()..n {
            if !support.contains(&g) {
                support.push(g);
            }
        }
    }
    support.sort_unstable();

    let q = field.order();
    let innovative_for_all =
        |cand: &CoefficientVector, rs: &[&ReceiverState]| rs.iter().all(|r| r.is_innovative(cand));

    for _ in 0..64 {
        let entries: Vec<(usize, u8)> = support
            .iter()
            .map(|&i| (i, rng.random_range(0..q) as u8))
            .filter(|&(_, c)| c != 0)
            .collect();
        if entries.is_empty() {
            continue;
        }
        let cand = CoefficientVector { n, entries };
        if innovative_for_all(&cand, receivers) {
            return Ok(Some(cand));
        }
    }

    // deterministic fallbacks; full-space exhaustion is the only path that
    // may certify absence
    let fits = |dims: usize| (dims as u32) * field.bits() <= 16;
    if fits(support.len()) {
        if let Some(cand) = exhaust(field, n, &support, receivers, &innovative_for_all) {
            return Ok(Some(cand));
        }
        if receivers.len() < q {
            return Err(Error::Contract(
                "no innovative vector found although q > k".into(),
            ));
        }
    }
    if fits(n) {
        let all: Vec<usize> = (0..n).collect();
        if let Some(cand) = exhaust(field, n, &all, receivers, &innovative_for_all) {
            return Ok(Some(cand));
        }
        return Ok(None);
    }
    Err(Error::Coding(format!(
        "no innovative vector after 64 draws and the space is too large to exhaust \
         (q = {q}, {} receivers)",
        receivers.len()
    )))
}

fn exhaust(
    field: &Field,
    n: usize,
    support: &[usize],
    receivers: &[&ReceiverState],
    check: &impl Fn(&CoefficientVector, &[&ReceiverState]) -> bool,
) -> Option<CoefficientVector> {
    let q = field.order();
    let total = q.pow(support.len() as u32);
    for code in 1..total {
        let mut x = code;
        let mut entries = Vec::new();
        for &i in support {
            let c = (x % q) as u8;
            x /= q;
            if c != 0 {
                entries.push((i, c));
            }
        }
        let cand = CoefficientVector { n, entries };
        if check(&cand, receivers) {
            return Some(cand);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn gf(q: usize) -> Field {
        Field::new(q).unwrap()
    }

    fn pool_with(field: &Field, payloads: &[&[u8]]) -> PacketPool {
        let mut pool = PacketPool::new(0, 0, payloads[0].len());
        for p in payloads {
            pool.push(p.to_vec()).unwrap();
        }
        let _ = field;
        pool
    }

    fn unit_packet(field: &Field, pool: &PacketPool, i: usize) -> CodedPacket {
        encode(field, pool, &CoefficientVector::unit(pool.len(), i)).unwrap()
    }

    #[test]
    fn encode_unit_vector_is_passthrough() {
        let f = gf(256);
        let pool = pool_with(&f, &[b"abcd", b"wxyz"]);
        let p = unit_packet(&f, &pool, 1);
        assert_eq!(p.payload, b"wxyz");
    }

    #[test]
    fn encode_gf2_sum_is_xor() {
        let f = gf(2);
        let pool = pool_with(&f, &[&[0xF0, 0x12], &[0x0F, 0x34]]);
        let p = encode(&f, &pool, &CoefficientVector::from_dense(&[1, 1])).unwrap();
        assert_eq!(p.payload, vec![0xFF, 0x26]);
    }

    #[test]
    fn encode_zero_is_zero() {
        let f = gf(16);
        let pool = pool_with(&f, &[&[1, 2], &[3, 4]]);
        let p = encode(&f, &pool, &CoefficientVector::from_dense(&[0, 0])).unwrap();
        assert_eq!(p.payload, vec![0, 0]);
    }

    #[test]
    fn absorb_tracks_rank_and_rejects_known_combinations() {
        let f = gf(256);
        let pool = pool_with(&f, &[b"aa", b"bb"]);
        let mut st = ReceiverState::new(0, 0, &f, 2);
        assert!(st.absorb(&unit_packet(&f, &pool, 0)).unwrap());
        assert_eq!(st.rank(), 1);
        assert!(!st.absorb(&unit_packet(&f, &pool, 0)).unwrap());
        assert!(st.absorb(&unit_packet(&f, &pool, 1)).unwrap());
        assert_eq!(st.rank(), 2);
        let mixed = encode(&f, &pool, &CoefficientVector::from_dense(&[1, 1])).unwrap();
        assert!(!st.absorb(&mixed).unwrap());
        assert_eq!(st.rank(), 2);
    }

    #[test]
    fn corrupted_payload_is_an_integrity_error() {
        let f = gf(256);
        let pool = pool_with(&f, &[b"aa", b"bb"]);
        let mut st = ReceiverState::new(0, 0, &f, 2);
        st.absorb(&unit_packet(&f, &pool, 0)).unwrap();
        let mut again = unit_packet(&f, &pool, 0);
        again.payload[0] ^= 0x55;
        assert!(matches!(st.absorb(&again), Err(Error::Integrity(_))));
    }

    #[test]
    fn table_one_run_decodes_both_packets() {
        // output 1 receives P1 then P1+P2 and recovers (P1, P2)
        let f = gf(2);
        let p1 = [0xDE, 0xAD];
        let p2 = [0xBE, 0xEF];
        let pool = pool_with(&f, &[&p1, &p2]);
        let mut st = ReceiverState::new(0, 0, &f, 2);
        st.absorb(&unit_packet(&f, &pool, 0)).unwrap();
        let x = encode(&f, &pool, &CoefficientVector::from_dense(&[1, 1])).unwrap();
        assert!(st.absorb(&x).unwrap());
        let out = st.decode(2).unwrap().unwrap();
        assert_eq!(out, vec![p1.to_vec(), p2.to_vec()]);
    }

    #[test]
    fn decode_reports_deficiency() {
        let f = gf(256);
        let pool = pool_with(&f, &[b"aa", b"bb"]);
        let mut st = ReceiverState::new(0, 0, &f, 2);
        st.grow(2).unwrap();
        assert_eq!(st.decode(2).unwrap(), Err(2));
        st.absorb(&unit_packet(&f, &pool, 1)).unwrap();
        assert_eq!(st.decode(2).unwrap(), Err(1));
    }

    #[test]
    fn random_batch_round_trip_gf256() {
        let f = gf(256);
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let batch = 5;
            let payloads: Vec<Vec<u8>> = (0..batch)
                .map(|_| (0..16).map(|_| rng.random()).collect())
                .collect();
            let mut pool = PacketPool::new(3, 7, 16);
            for p in &payloads {
                pool.push(p.clone()).unwrap();
            }
            let mut st = ReceiverState::new(3, 7, &f, 16);
            let mut sent = 0;
            while st.rank() < batch {
                let dense: Vec<u8> = (0..batch).map(|_| rng.random()).collect();
                let cand = CoefficientVector::from_dense(&dense);
                if cand.is_zero() {
                    continue;
                }
                let pkt = encode(&f, &pool, &cand).unwrap();
                st.absorb(&pkt).unwrap();
                sent += 1;
                assert!(sent < 100);
            }
            let got = st.decode(batch).unwrap().unwrap();
            assert_eq!(got, payloads);
        }
    }

    #[test]
    fn growing_pool_pads_earlier_receptions() {
        let f = gf(256);
        let mut pool = PacketPool::new(0, 0, 2);
        pool.push(vec![1, 1]).unwrap();
        let mut st = ReceiverState::new(0, 0, &f, 2);
        st.absorb(&unit_packet(&f, &pool, 0)).unwrap();
        pool.push(vec![2, 2]).unwrap();
        pool.push(vec![3, 3]).unwrap();
        let c = CoefficientVector::from_dense(&[0x11, 0x22, 0x33]);
        let pkt = encode(&f, &pool, &c).unwrap();
        assert!(st.absorb(&pkt).unwrap());
        assert_eq!(st.dimension(), 3);
        assert_eq!(st.rank(), 2);
        assert_eq!(st.decode(3).unwrap(), Err(1));
    }

    #[test]
    fn shrinking_pool_is_a_contract_error() {
        let f = gf(256);
        let mut st = ReceiverState::new(0, 0, &f, 1);
        st.grow(3).unwrap();
        assert!(st.grow(2).is_err());
    }

    #[test]
    fn find_innovative_trivial_cases() {
        let f = gf(256);
        let mut rng = StdRng::seed_from_u64(1);
        let v = find_innovative(&f, 4, &[], &mut rng).unwrap().unwrap();
        assert_eq!(v, CoefficientVector::unit(4, 0));
    }

    #[test]
    fn find_innovative_gf2_example() {
        let f = gf(2);
        let pool = pool_with(&f, &[&[1u8], &[2u8]]);
        let mut a = ReceiverState::new(0, 0, &f, 1);
        a.absorb(&unit_packet(&f, &pool, 0)).unwrap();
        let mut b = ReceiverState::new(0, 0, &f, 1);
        b.absorb(&unit_packet(&f, &pool, 1)).unwrap();
        let mut rng = StdRng::seed_from_u64(2);
        let v = find_innovative(&f, 2, &[&a, &b], &mut rng)
            .unwrap()
            .unwrap();
        assert_eq!(v.to_dense(), vec![1, 1]);
    }

    #[test]
    fn find_innovative_gf2_three_lines_is_none() {
        let f = gf(2);
        let pool = pool_with(&f, &[&[1u8], &[2u8]]);
        let mut a = ReceiverState::new(0, 0, &f, 1);
        a.absorb(&unit_packet(&f, &pool, 0)).unwrap();
        let mut b = ReceiverState::new(0, 0, &f, 1);
        b.absorb(&unit_packet(&f, &pool, 1)).unwrap();
        let mut c = ReceiverState::new(0, 0, &f, 1);
        let sum = encode(&f, &pool, &CoefficientVector::from_dense(&[1, 1])).unwrap();
        c.absorb(&sum).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        // q = 2 with k = 3 receivers: every nonzero vector is covered
        assert!(find_innovative(&f, 2, &[&a, &b, &c], &mut rng)
            .unwrap()
            .is_none());
    }

    #[test]
    fn find_innovative_rejects_full_rank_receiver() {
        let f = gf(256);
        let pool = pool_with(&f, &[b"zz"]);
        let mut a = ReceiverState::new(0, 0, &f, 2);
        a.absorb(&unit_packet(&f, &pool, 0)).unwrap();
        let mut rng = StdRng::seed_from_u64(4);
        assert!(find_innovative(&f, 1, &[&a], &mut rng).is_err());
    }

    #[test]
    fn innovative_search_succeeds_when_field_beats_receivers() {
        // randomized instances with q > k must never come back empty
        for q in [16usize, 256] {
            let f = gf(q);
            let mut rng = StdRng::seed_from_u64(q as u64);
            for _ in 0..200 {
                let n = rng.random_range(1..=6);
                let k = rng.random_range(1..=3.min(q - 1));
                let mut receivers = Vec::new();
                for _ in 0..k {
                    let mut st = ReceiverState::new(0, 0, &f, 1);
                    st.grow(n).unwrap();
                    let rows = rng.random_range(0..n);
                    for _ in 0..rows {
                        let dense: Vec<u8> = (0..n).map(|_| rng.random_range(0..q) as u8).collect();
                        let cand = CoefficientVector::from_dense(&dense);
                        if cand.is_zero() {
                            continue;
                        }
                        let payload = vec![0u8; 1];
                        let pkt = CodedPacket {
                            flow: 0,
                            batch: 0,
                            coeffs: cand,
                            payload,
                        };
                        let _ = st.absorb(&pkt);
                    }
                    if st.rank() == n {
                        continue;
                    }
                    receivers.push(st);
                }
                let views: Vec<&ReceiverState> = receivers.iter().collect();
                let got = find_innovative(&f, n, &views, &mut rng).unwrap();
                let v = got.expect("q > k guarantees an innovative vector");
                for r in &views {
                    assert!(r.is_innovative(&v));
                }
            }
        }
    }

    #[test]
    fn canonical_packet_bytes_are_deterministic() {
        let f = gf(256);
        let pool = pool_with(&f, &[b"ab", b"cd"]);
        let c = CoefficientVector::from_dense(&[3, 5]);
        let p1 = encode(&f, &pool, &c).unwrap();
        let p2 = encode(&f, &pool, &c).unwrap();
        assert_eq!(p1.to_bytes(), p2.to_bytes());
        assert_eq!(p1.to_bytes().len(), 8 + 8 + 8 + 2 + 2);
    }

    #[test]
    fn gap_index_tracks_coordinate_states() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let f = Field::new(256).unwrap();
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..30 {
            let n = rng.random_range(1..=8usize);
            let mut pool = PacketPool::new(0, 0, 2);
            for _ in 0..n {
                pool.push(vec![rng.random(), rng.random()]).unwrap();
            }
            let mut rx = ReceiverState::new(0, 0, &f, 2);
            for _ in 0..rng.random_range(0..=2 * n) {
                let dense: Vec<u8> = (0..n).map(|_| rng.random()).collect();
                let c = CoefficientVector::from_dense(&dense);
                if c.is_zero() {
                    continue;
                }
                rx.absorb(&encode(&f, &pool, &c).unwrap()).unwrap();
                let scan: Vec<usize> = rx
                    .coords
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| matches!(c, Coord::Gap))
                    .map(|(i, _)| i)
                    .collect();
                assert_eq!(rx.gaps(), scan);
                assert_eq!(rx.gaps().len(), rx.deficiency());
            }
        }
    }
}
