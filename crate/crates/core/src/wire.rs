//! Names, packets and their fixed-layout binary encoding.
//!
//! Every frame starts with a 16-byte header:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 1    | kind (`0x01` Interest, `0x02` Data)    |
//! | 1      | 1    | flags                                  |
//! | 2      | 4    | nonce, big endian (zero for Data)      |
//! | 6      | 1    | hop count                              |
//! | 7      | 1    | name length in bytes                   |
//! | 8      | 8    | reserved, zero                         |
//!
//! The header is followed by the textual name encoding (`/riot/text/a`).
//! An Interest then carries a single hop-limit byte; a Data frame carries its
//! payload up to the end of the frame, so a frame is self-delimiting only
//! together with the link-layer frame length.

use std::fmt;

use thiserror::Error;

/// Link-layer MTU of the deployment.
pub const MTU: usize = 64;
/// Fixed header size.
pub const HEADER_LEN: usize = 16;
/// Largest encoded name: MTU minus header minus the Interest trailer byte.
pub const MAX_NAME_LEN: usize = MTU - HEADER_LEN - 1;
/// Largest single name component.
pub const MAX_COMPONENT_LEN: usize = 32;
/// Payload size of one content chunk in the default scenarios.
pub const CHUNK_PAYLOAD_LEN: usize = 30;
/// Hop limit stamped on freshly expressed Interests.
pub const DEFAULT_HOP_LIMIT: u8 = 32;

const KIND_INTEREST: u8 = 0x01;
const KIND_DATA: u8 = 0x02;
const SEPARATOR: u8 = b'/';

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("name has an empty component")]
    EmptyComponent,
    #[error("encoded name is {0} bytes, limit is {MAX_NAME_LEN}")]
    OversizeName(usize),
    #[error("name component of {0} bytes exceeds {MAX_COMPONENT_LEN}")]
    ComponentTooLong(usize),
    #[error("illegal byte {0:#04x} in name")]
    IllegalByte(u8),
    #[error("name must start with '/'")]
    MissingLeadingSlash,
    #[error("name has a single component and no parent")]
    RootName,
    #[error("frame of {0} bytes exceeds the {MTU}-byte MTU")]
    MtuExceeded(usize),
    #[error("malformed frame: {0}")]
    MalformedFrame(&'static str),
    #[error("unknown packet kind {0:#04x}")]
    UnknownKind(u8),
}

/// Hierarchical content name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name {
    components: Vec<Vec<u8>>,
}

impl Name {
    pub fn from_components<I, C>(components: I) -> Result<Self, WireError>
    where
        I: IntoIterator<Item = C>,
        C: Into<Vec<u8>>,
    {
        let components: Vec<Vec<u8>> = components.into_iter().map(Into::into).collect();
        if components.is_empty() {
            return Err(WireError::EmptyComponent);
        }
        for c in &components {
            check_component(c)?;
        }
        let name = Name { components };
        let len = name.encoded_len();
        if len > MAX_NAME_LEN {
            return Err(WireError::OversizeName(len));
        }
        Ok(name)
    }

    /// Parses the textual form, e.g. `/riot/text/a`.
    pub fn parse(text: &str) -> Result<Self, WireError> {
        Self::from_bytes(text.as_bytes())
    }

    /// Parses the encoded form; components may hold any byte except 0 and `/`.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.first() != Some(&SEPARATOR) {
            return Err(WireError::MissingLeadingSlash);
        }
        if bytes.len() > MAX_NAME_LEN {
            return Err(WireError::OversizeName(bytes.len()));
        }
        Self::from_components(bytes[1..].split(|&b| b == SEPARATOR).map(<[u8]>::to_vec))
    }

    pub fn components(&self) -> &[Vec<u8>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Length of the '/'-joined encoding including the leading slash.
    pub fn encoded_len(&self) -> usize {
        self.components.iter().map(|c| c.len() + 1).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        for c in &self.components {
            out.push(SEPARATOR);
            out.extend_from_slice(c);
        }
        out
    }

    /// True iff `self` is a leading sub-list of `name`. Reflexive.
    pub fn is_prefix_of(&self, name: &Name) -> bool {
        self.components.len() <= name.components.len()
            && self.components.iter().zip(&name.components).all(|(a, b)| a == b)
    }

    /// The name with its last component removed.
    pub fn parent(&self) -> Result<Name, WireError> {
        if self.components.len() < 2 {
            return Err(WireError::RootName);
        }
        Ok(Name {
            components: self.components[..self.components.len() - 1].to_vec(),
        })
    }

    pub fn child(&self, component: impl Into<Vec<u8>>) -> Result<Name, WireError> {
        let mut components = self.components.clone();
        components.push(component.into());
        Self::from_components(components)
    }

    pub fn last(&self) -> &[u8] {
        self.components.last().map(Vec::as_slice).unwrap_or_default()
    }
}

fn check_component(c: &[u8]) -> Result<(), WireError> {
    if c.is_empty() {
        return Err(WireError::EmptyComponent);
    }
    if c.len() > MAX_COMPONENT_LEN {
        return Err(WireError::ComponentTooLong(c.len()));
    }
    if let Some(&b) = c.iter().find(|&&b| b == 0 || b == SEPARATOR) {
        return Err(WireError::IllegalByte(b));
    }
    Ok(())
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.components {
            write!(f, "/{}", String::from_utf8_lossy(c))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Name({self})")
    }
}

impl std::str::FromStr for Name {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Name::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interest {
    pub name: Name,
    pub nonce: u32,
    pub flags: u8,
    pub hop_count: u8,
    pub hop_limit: u8,
}

impl Interest {
    pub fn new(name: Name, nonce: u32) -> Self {
        Interest {
            name,
            nonce,
            flags: 0,
            hop_count: 0,
            hop_limit: DEFAULT_HOP_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Data {
    pub name: Name,
    pub payload: Vec<u8>,
    pub flags: u8,
    pub hop_count: u8,
}

impl Data {
    pub fn new(name: Name, payload: Vec<u8>) -> Self {
        Data {
            name,
            payload,
            flags: 0,
            hop_count: 0,
        }
    }

    /// Largest payload that still fits one frame with `name`.
    pub fn max_payload(name: &Name) -> usize {
        MTU - HEADER_LEN - name.encoded_len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketKind {
    Interest,
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Interest(Interest),
    Data(Data),
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        match self {
            Packet::Interest(_) => PacketKind::Interest,
            Packet::Data(_) => PacketKind::Data,
        }
    }

    pub fn name(&self) -> &Name {
        match self {
            Packet::Interest(i) => &i.name,
            Packet::Data(d) => &d.name,
        }
    }

    /// Nonce carried in the header; always zero for Data.
    pub fn nonce(&self) -> u32 {
        match self {
            Packet::Interest(i) => i.nonce,
            Packet::Data(_) => 0,
        }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN
            + self.name().encoded_len()
            + match self {
                Packet::Interest(_) => 1,
                Packet::Data(d) => d.payload.len(),
            }
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let len = self.encoded_len();
        if len > MTU {
            return Err(WireError::MtuExceeded(len));
        }
        let name = self.name();
        let mut out = Vec::with_capacity(len);
        let (kind, flags, hop_count) = match self {
            Packet::Interest(i) => (KIND_INTEREST, i.flags, i.hop_count),
            Packet::Data(d) => (KIND_DATA, d.flags, d.hop_count),
        };
        out.push(kind);
        out.push(flags);
        out.extend_from_slice(&self.nonce().to_be_bytes());
        out.push(hop_count);
        out.push(name.encoded_len() as u8);
        out.extend_from_slice(&[0u8; 8]);
        out.extend_from_slice(&name.to_bytes());
        match self {
            Packet::Interest(i) => out.push(i.hop_limit),
            Packet::Data(d) => out.extend_from_slice(&d.payload),
        }
        debug_assert_eq!(out.len(), len);
        Ok(out)
    }

    pub fn decode(frame: &[u8]) -> Result<Packet, WireError> {
        if frame.len() > MTU {
            return Err(WireError::MtuExceeded(frame.len()));
        }
        if frame.len() < HEADER_LEN {
            return Err(WireError::MalformedFrame("shorter than header"));
        }
        let kind = frame[0];
        if kind != KIND_INTEREST && kind != KIND_DATA {
            return Err(WireError::UnknownKind(kind));
        }
        let flags = frame[1];
        let nonce = u32::from_be_bytes([frame[2], frame[3], frame[4], frame[5]]);
        let hop_count = frame[6];
        let name_len = frame[7] as usize;
        if frame[8..HEADER_LEN].iter().any(|&b| b != 0) {
            return Err(WireError::MalformedFrame("reserved bytes not zero"));
        }
        let name_end = HEADER_LEN + name_len;
        if name_end > frame.len() {
            return Err(WireError::MalformedFrame("name overruns frame"));
        }
        let name = Name::from_bytes(&frame[HEADER_LEN..name_end])?;
        let body = &frame[name_end..];
        match kind {
            KIND_INTEREST => {
                if body.len() != 1 {
                    return Err(WireError::MalformedFrame("interest trailer must be one byte"));
                }
                Ok(Packet::Interest(Interest {
                    name,
                    nonce,
                    flags,
                    hop_count,
                    hop_limit: body[0],
                }))
            }
            _ => {
                if nonce != 0 {
                    return Err(WireError::MalformedFrame("data carries a nonce"));
                }
                Ok(Packet::Data(Data {
                    name,
                    payload: body.to_vec(),
                    flags,
                    hop_count,
                }))
            }
        }
    }
}

impl From<Interest> for Packet {
    fn from(i: Interest) -> Self {
        Packet::Interest(i)
    }
}

impl From<Data> for Packet {
    fn from(d: Data) -> Self {
        Packet::Data(d)
    }
}
