//! Tree records for the simulated radio.
//!
//! All integers and floats little-endian:
//!
//! ```text
//! magic   4 bytes  "SCHT"
//! version u32      1
//! params  4 × f64  d_e, d_c, v_nominal, reserve_time
//! count   u64      number of records
//! record  count ×
//!     len     u32  byte length of the rest of the record (45)
//!     id      u64
//!     kind    u8   0 base, 1 landed robot, 2 deployed beacon, 3 pose
//!     pos     3 × f64
//!     parent  u64  u64::MAX for the base
//!     edge    f64  link cost (s)
//! ```
//!
//! Records are in the tree's insertion order, base first.

use super::{HomingError, HomingParams, HomingTree, Node, NodeKind};

pub const TREE_MAGIC: &[u8; 4] = b"SCHT";
pub const TREE_VERSION: u32 = 1;
const RECORD_LEN: u32 = 8 + 1 + 24 + 8 + 8;

fn kind_code(k: NodeKind) -> u8 {
    match k {
        NodeKind::Base => 0,
        NodeKind::LandedRobot => 1,
        NodeKind::DeployedBeacon => 2,
        NodeKind::Pose => 3,
    }
}

pub fn encode_tree(tree: &HomingTree) -> Vec<u8> {
    let mut out = Vec::with_capacity(48 + tree.len() * (RECORD_LEN as usize + 4));
    out.extend_from_slice(TREE_MAGIC);
    out.extend_from_slice(&TREE_VERSION.to_le_bytes());
    let p = tree.params();
    for v in [p.d_e, p.d_c, p.v_nominal, p.reserve_time] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(tree.len() as u64).to_le_bytes());
    for n in tree.nodes() {
        out.extend_from_slice(&RECORD_LEN.to_le_bytes());
        out.extend_from_slice(&n.id.to_le_bytes());
        out.push(kind_code(n.kind));
        for v in n.position.to_array() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&n.parent.unwrap_or(u64::MAX).to_le_bytes());
        out.extend_from_slice(&n.edge_cost.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8], HomingError> {
        let end = self.pos + n;
        let s = self.buf.get(self.pos..end).ok_or_else(|| HomingError::Format(format!("truncated at {what}")))?;
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self, what: &str) -> Result<u32, HomingError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &str) -> Result<u64, HomingError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &str) -> Result<f64, HomingError> {
        let v = f64::from_le_bytes(self.take(8, what)?.try_into().unwrap());
        if v.is_finite() { Ok(v) } else { Err(HomingError::Format(format!("non-finite {what}"))) }
    }
}

pub fn decode_tree(bytes: &[u8]) -> Result<HomingTree, HomingError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != TREE_MAGIC {
        return Err(HomingError::Format("bad magic".into()));
    }
    let version = r.u32("version")?;
    if version != TREE_VERSION {
        return Err(HomingError::Format(format!("unsupported version {version}")));
    }
    let params = HomingParams {
        d_e: r.f64("d_e")?,
        d_c: r.f64("d_c")?,
        v_nominal: r.f64("v_nominal")?,
        reserve_time: r.f64("reserve_time")?,
    };
    let count = r.u64("count")? as usize;
    if count > bytes.len() / (RECORD_LEN as usize + 4) {
        return Err(HomingError::Format("record count exceeds payload".into()));
    }
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32("record length")?;
        if len != RECORD_LEN {
            return Err(HomingError::Format(format!("record length {len}, expected {RECORD_LEN}")));
        }
        let id = r.u64("id")?;
        let kind = match r.take(1, "kind")?[0] {
            0 => NodeKind::Base,
            1 => NodeKind::LandedRobot,
            2 => NodeKind::DeployedBeacon,
            3 => NodeKind::Pose,
            k => return Err(HomingError::Format(format!("unknown node kind {k}"))),
        };
        let position = crate::Vec3::new(r.f64("position")?, r.f64("position")?, r.f64("position")?);
        let parent = r.u64("parent")?;
        let edge_cost = r.f64("edge cost")?;
        records.push(Node { id, kind, position, parent: (parent != u64::MAX).then_some(parent), edge_cost });
    }
    if r.pos != bytes.len() {
        return Err(HomingError::Format("trailing bytes".into()));
    }
    HomingTree::from_records(params, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    #[test]
    fn round_trip() {
        let open = |_: Vec3, _: Vec3| true;
        let mut t = HomingTree::new(0, Vec3::ZERO, HomingParams::default()).unwrap();
        for i in 1..6 {
            t.insert(i, NodeKind::Pose, Vec3::new(3.0 * i as f64, 0.5, 0.0), &open);
        }
        t.insert(9, NodeKind::LandedRobot, Vec3::new(14.0, 0.0, 0.0), &open);
        let bytes = encode_tree(&t);
        let back = decode_tree(&bytes).unwrap();
        assert_eq!(back.nodes(), t.nodes());
        for n in t.nodes() {
            assert_eq!(back.accumulated_cost(n.id).unwrap(), t.accumulated_cost(n.id).unwrap());
        }
        assert_eq!(encode_tree(&back), bytes);
        assert!(decode_tree(&bytes[..bytes.len() - 1]).is_err());
    }
}
