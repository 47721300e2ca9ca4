//! Declarative payload layouts of every message type.
//!
//! The codec checks fixed payload lengths against this table, so the table
//! cannot drift from what actually travels on the wire.

use embed_router_core::HIDDEN_DIM;

use crate::MsgType;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    U16,
    U32,
    U64,
    F32,
    /// One byte, 0 or 1.
    Flag,
    /// Fixed-length `f32` vector.
    F32Vec(usize),
    /// `count` repetitions of a fixed-length `f32` vector, where `count` is
    /// the value of an earlier field.
    RepeatedF32Vec { count_field: &'static str, dims: usize },
    /// UTF-8 text running to the end of the payload.
    Utf8Tail,
}

impl FieldKind {
    /// Encoded size, when independent of the payload contents.
    pub fn fixed_len(self) -> Option<usize> {
        Some(match self {
            FieldKind::U16 => 2,
            FieldKind::U32 | FieldKind::F32 => 4,
            FieldKind::U64 => 8,
            FieldKind::Flag => 1,
            FieldKind::F32Vec(n) => 4 * n,
            FieldKind::RepeatedF32Vec { .. } | FieldKind::Utf8Tail => return None,
        })
    }

    /// Dimensionality of a single vector this field can hold (0 for scalars).
    pub fn vector_dims(self) -> usize {
        match self {
            FieldKind::F32Vec(n) | FieldKind::RepeatedF32Vec { dims: n, .. } => n,
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Field {
    pub name: &'static str,
    pub kind: FieldKind,
}

#[derive(Clone, Copy, Debug)]
pub struct MessageLayout {
    pub msg_type: MsgType,
    pub fields: &'static [Field],
}

impl MessageLayout {
    /// Payload size when every field is fixed-size.
    pub fn fixed_len(&self) -> Option<usize> {
        self.fields.iter().map(|f| f.kind.fixed_len()).sum()
    }

    /// Largest single vector, in bytes.
    pub fn max_vector_bytes(&self) -> usize {
        self.fields.iter().map(|f| 4 * f.kind.vector_dims()).max().unwrap_or(0)
    }
}

const fn field(name: &'static str, kind: FieldKind) -> Field {
    Field { name, kind }
}

pub const GRAMMAR: &[MessageLayout] = &[
    MessageLayout {
        msg_type: MsgType::Register,
        fields: &[
            field("expert_id", FieldKind::U32),
            field("class_count", FieldKind::U32),
            field("dataset_centroid", FieldKind::F32Vec(HIDDEN_DIM)),
            field(
                "class_centroids",
                FieldKind::RepeatedF32Vec { count_field: "class_count", dims: HIDDEN_DIM },
            ),
        ],
    },
    MessageLayout {
        msg_type: MsgType::Match,
        fields: &[
            field("request_id", FieldKind::U64),
            field("embedding", FieldKind::F32Vec(HIDDEN_DIM)),
            field("threshold", FieldKind::F32),
            field("want_fine", FieldKind::Flag),
        ],
    },
    MessageLayout {
        msg_type: MsgType::MatchResult,
        fields: &[
            field("request_id", FieldKind::U64),
            field("expert_id", FieldKind::U32),
            field("class_id", FieldKind::U32),
            field("rejected", FieldKind::Flag),
            field("score", FieldKind::F32),
        ],
    },
    MessageLayout {
        msg_type: MsgType::Error,
        fields: &[field("code", FieldKind::U16), field("message", FieldKind::Utf8Tail)],
    },
    MessageLayout {
        msg_type: MsgType::Ping,
        fields: &[],
    },
    MessageLayout {
        msg_type: MsgType::Pong,
        fields: &[field("entries", FieldKind::U32), field("replaced", FieldKind::Flag)],
    },
];

pub fn layout(t: MsgType) -> &'static MessageLayout {
    GRAMMAR
        .iter()
        .find(|l| l.msg_type == t)
        .expect("every message type has a layout")
}
