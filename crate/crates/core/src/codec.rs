//! Wire format of the advertisement payload and slot-bitmap algebra.
//!
//! Layout (22 bytes, multi-byte integers big-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 2    | magic `0x4A41`                          |
//! | 2      | 1    | sender index (0..=103)                  |
//! | 3      | 4    | µs from first packet to next window     |
//! | 7      | 1    | conflicted index, `0xFF` if none        |
//! | 8      | 1    | flags: bit0 inhibitor, bit1 crowd alarm |
//! | 9      | 13   | slot bitmap, LSB-first within each byte |

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::config::{NodeIndex, INDEX_SPACE};

pub const MAGIC: u16 = 0x4A41;
pub const PAYLOAD_LEN: usize = 22;
pub const BITMAP_BYTES: usize = 13;
/// Largest payload a single advertisement can carry.
pub const MAX_ADV_PAYLOAD: usize = 24;

const NO_CONFLICT: u8 = 0xFF;
const FLAG_INHIBITOR: u8 = 0b01;
const FLAG_CROWD: u8 = 0b10;
const BITMAP_MASK: u128 = (1u128 << INDEX_SPACE) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("payload must be {PAYLOAD_LEN} bytes, got {0}")]
    BadLength(usize),
    #[error("bad magic {0:#06x}")]
    BadMagic(u16),
    #[error("field `{field}` out of range: {value:#04x}")]
    FieldOutOfRange { field: &'static str, value: u8 },
}

/// 104-bit slot allocation bitmap; bit `x` set means a slot for index `x`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SlotBitmap(u128);

impl SlotBitmap {
    pub const EMPTY: SlotBitmap = SlotBitmap(0);
    pub const FULL: SlotBitmap = SlotBitmap(BITMAP_MASK);

    pub fn from_indexes<I: IntoIterator<Item = NodeIndex>>(it: I) -> Self {
        let mut bm = SlotBitmap::EMPTY;
        for i in it {
            bm.set(i);
        }
        bm
    }

    pub fn contains(self, idx: NodeIndex) -> bool {
        self.0 >> idx.get() & 1 == 1
    }

    pub fn set(&mut self, idx: NodeIndex) {
        self.0 |= 1u128 << idx.get();
    }

    pub fn clear(&mut self, idx: NodeIndex) {
        self.0 &= !(1u128 << idx.get());
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: SlotBitmap) -> SlotBitmap {
        SlotBitmap(self.0 | other.0)
    }

    /// Set indexes in ascending order (= slot order).
    pub fn iter(self) -> impl Iterator<Item = NodeIndex> {
        NodeIndex::all().filter(move |&i| self.contains(i))
    }

    pub fn to_bytes(self) -> [u8; BITMAP_BYTES] {
        let le = self.0.to_le_bytes();
        let mut out = [0u8; BITMAP_BYTES];
        out.copy_from_slice(&le[..BITMAP_BYTES]);
        out
    }

    pub fn from_bytes(bytes: [u8; BITMAP_BYTES]) -> Self {
        let mut le = [0u8; 16];
        le[..BITMAP_BYTES].copy_from_slice(&bytes);
        SlotBitmap(u128::from_le_bytes(le))
    }

    /// 1-based slot number of `idx`: one plus the number of set bits below it.
    pub fn slot_ordinal(self, idx: NodeIndex) -> Option<u32> {
        if !self.contains(idx) {
            return None;
        }
        let below = self.0 & ((1u128 << idx.get()) - 1);
        Some(below.count_ones() + 1)
    }
}

impl fmt::Debug for SlotBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|i| i.get())).finish()
    }
}

/// Indexes that are neither allocated in `own` or any cached neighbor bitmap,
/// nor currently used as a sender index by a neighbor.
pub fn free_indexes<'a>(
    own: SlotBitmap,
    cached: impl IntoIterator<Item = &'a SlotBitmap>,
    in_use: &BTreeSet<NodeIndex>,
) -> Vec<NodeIndex> {
    let taken = cached.into_iter().fold(own, |acc, bm| acc.union(*bm));
    NodeIndex::all()
        .filter(|i| !taken.contains(*i) && !in_use.contains(i))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct AdvFlags {
    pub inhibitor: bool,
    pub crowd_alarm: bool,
}

/// Application payload carried by every advertisement packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AdvPayload {
    pub sender_index: NodeIndex,
    /// Microseconds from the advertisement's first packet to the next window.
    pub v_us: u32,
    pub conflict_index: Option<NodeIndex>,
    pub flags: AdvFlags,
    pub bitmap: SlotBitmap,
}

impl AdvPayload {
    pub fn encode(&self) -> [u8; PAYLOAD_LEN] {
        let mut out = [0u8; PAYLOAD_LEN];
        out[0..2].copy_from_slice(&MAGIC.to_be_bytes());
        out[2] = self.sender_index.get();
        out[3..7].copy_from_slice(&self.v_us.to_be_bytes());
        out[7] = self.conflict_index.map_or(NO_CONFLICT, NodeIndex::get);
        let mut flags = 0;
        if self.flags.inhibitor {
            flags |= FLAG_INHIBITOR;
        }
        if self.flags.crowd_alarm {
            flags |= FLAG_CROWD;
        }
        out[8] = flags;
        out[9..].copy_from_slice(&self.bitmap.to_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<AdvPayload, DecodeError> {
        if bytes.len() != PAYLOAD_LEN {
            return Err(DecodeError::BadLength(bytes.len()));
        }
        let magic = u16::from_be_bytes([bytes[0], bytes[1]]);
        if magic != MAGIC {
            return Err(DecodeError::BadMagic(magic));
        }
        let sender_index = NodeIndex::new(bytes[2])
            .ok_or(DecodeError::FieldOutOfRange { field: "sender_index", value: bytes[2] })?;
        let v_us = u32::from_be_bytes([bytes[3], bytes[4], bytes[5], bytes[6]]);
        let conflict_index = match bytes[7] {
            NO_CONFLICT => None,
            b => Some(
                NodeIndex::new(b).ok_or(DecodeError::FieldOutOfRange { field: "conflict_index", value: b })?,
            ),
        };
        let flags = bytes[8];
        if flags & !(FLAG_INHIBITOR | FLAG_CROWD) != 0 {
            return Err(DecodeError::FieldOutOfRange { field: "flags", value: flags });
        }
        let mut bm = [0u8; BITMAP_BYTES];
        bm.copy_from_slice(&bytes[9..]);
        Ok(AdvPayload {
            sender_index,
            v_us,
            conflict_index,
            flags: AdvFlags { inhibitor: flags & FLAG_INHIBITOR != 0, crowd_alarm: flags & FLAG_CROWD != 0 },
            bitmap: SlotBitmap::from_bytes(bm),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn idx(v: u8) -> NodeIndex {
        NodeIndex::new(v).unwrap()
    }

    fn zero_payload() -> AdvPayload {
        AdvPayload {
            sender_index: idx(0),
            v_us: 0,
            conflict_index: None,
            flags: AdvFlags::default(),
            bitmap: SlotBitmap::EMPTY,
        }
    }

    #[test]
    fn zero_payload_bytes() {
        let p = AdvPayload { conflict_index: Some(idx(0)), ..zero_payload() };
        let bytes = p.encode();
        assert_eq!(bytes.len(), PAYLOAD_LEN);
        assert!(PAYLOAD_LEN <= MAX_ADV_PAYLOAD);
        assert_eq!(&bytes[..2], &[0x4A, 0x41]);
        assert!(bytes[2..].iter().all(|&b| b == 0));
    }

    #[test]
    fn bits_two_and_six_land_in_first_bitmap_byte() {
        let p = AdvPayload {
            sender_index: idx(2),
            bitmap: SlotBitmap::from_indexes([idx(2), idx(6)]),
            ..zero_payload()
        };
        let bytes = p.encode();
        assert_eq!(bytes[9], 0x44);
        assert!(bytes[10..].iter().all(|&b| b == 0));
        let back = AdvPayload::decode(&bytes).unwrap();
        assert_eq!(back.bitmap.count(), 2);
    }

    #[test]
    fn decode_rejects_bad_input() {
        let good = zero_payload().encode();
        assert_eq!(AdvPayload::decode(&good[..21]), Err(DecodeError::BadLength(21)));
        let mut bad = good;
        bad[0] = 0x00;
        assert!(matches!(AdvPayload::decode(&bad), Err(DecodeError::BadMagic(_))));
        let mut bad = good;
        bad[2] = 0xD0;
        assert_eq!(
            AdvPayload::decode(&bad),
            Err(DecodeError::FieldOutOfRange { field: "sender_index", value: 0xD0 })
        );
        let mut bad = good;
        bad[7] = 104;
        assert!(matches!(AdvPayload::decode(&bad), Err(DecodeError::FieldOutOfRange { field: "conflict_index", .. })));
        let mut bad = good;
        bad[8] = 0x04;
        assert!(matches!(AdvPayload::decode(&bad), Err(DecodeError::FieldOutOfRange { field: "flags", .. })));
    }

    #[test]
    fn slot_ordinals() {
        let bm = SlotBitmap::from_indexes([idx(2), idx(6)]);
        assert_eq!(bm.slot_ordinal(idx(2)), Some(1));
        assert_eq!(bm.slot_ordinal(idx(6)), Some(2));
        assert_eq!(bm.slot_ordinal(idx(5)), None);
        assert_eq!(SlotBitmap::FULL.slot_ordinal(idx(103)), Some(104));
        assert_eq!(SlotBitmap::FULL.slot_ordinal(idx(0)), Some(1));
    }

    #[test]
    fn free_index_sets() {
        let none = BTreeSet::new();
        assert_eq!(free_indexes(SlotBitmap::EMPTY, [], &none).len(), INDEX_SPACE);

        let own = SlotBitmap::from_indexes([idx(2), idx(6)]);
        let cached = [SlotBitmap::from_indexes([idx(6), idx(7)])];
        let in_use = BTreeSet::from([idx(9)]);
        let free = free_indexes(own, &cached, &in_use);
        let expected: Vec<NodeIndex> =
            NodeIndex::all().filter(|i| ![2, 6, 7, 9].contains(&i.get())).collect();
        assert_eq!(free, expected);

        assert!(free_indexes(SlotBitmap::FULL, [], &none).is_empty());
    }

    fn arb_payload() -> impl Strategy<Value = AdvPayload> {
        (0u8..104, any::<u32>(), proptest::option::of(0u8..104), any::<bool>(), any::<bool>(), any::<u128>())
            .prop_map(|(s, v, c, inh, crowd, bits)| AdvPayload {
                sender_index: idx(s),
                v_us: v,
                conflict_index: c.map(idx),
                flags: AdvFlags { inhibitor: inh, crowd_alarm: crowd },
                bitmap: SlotBitmap(bits & BITMAP_MASK),
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn round_trip(p in arb_payload()) {
            let bytes = p.encode();
            prop_assert_eq!(bytes.len(), PAYLOAD_LEN);
            prop_assert_eq!(AdvPayload::decode(&bytes), Ok(p));
        }

        #[test]
        fn ordinals_increase_over_set_bits(bits in any::<u128>()) {
            let bm = SlotBitmap(bits & BITMAP_MASK);
            let ords: Vec<u32> = bm.iter().map(|i| bm.slot_ordinal(i).unwrap()).collect();
            prop_assert!(ords.windows(2).all(|w| w[1] == w[0] + 1));
            prop_assert_eq!(ords.last().copied().unwrap_or(0), bm.count());
        }

        #[test]
        fn free_set_is_disjoint_from_inputs(a in any::<u128>(), b in any::<u128>(), used in proptest::collection::btree_set(0u8..104, 0..10)) {
            let own = SlotBitmap(a & BITMAP_MASK);
            let other = SlotBitmap(b & BITMAP_MASK);
            let in_use: BTreeSet<NodeIndex> = used.into_iter().map(idx).collect();
            for i in free_indexes(own, [&other], &in_use) {
                prop_assert!(!own.contains(i) && !other.contains(i) && !in_use.contains(&i));
            }
        }
    }
}
