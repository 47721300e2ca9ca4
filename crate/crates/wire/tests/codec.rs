use embed_router_core::{Embedding, ExpertEntry, Rng, HIDDEN_DIM};
use embed_router_wire::grammar::{layout, FieldKind, GRAMMAR};
use embed_router_wire::*;
use proptest::prelude::*;

fn entry_strategy() -> impl Strategy<Value = ExpertEntry> {
    let vec128 = || proptest::collection::vec(-1e6f32..1e6, HIDDEN_DIM);
    (any::<u32>(), vec128(), proptest::collection::vec(vec128(), 1..4)).prop_map(|(id, d, cs)| {
        ExpertEntry::new(
            id,
            Embedding::from_f32(&d).unwrap(),
            cs.iter().map(|c| Embedding::from_f32(c).unwrap()).collect(),
        )
        .unwrap()
    })
}

fn message_strategy() -> impl Strategy<Value = Message> {
    prop_oneof![
        entry_strategy().prop_map(Message::Register),
        (any::<u64>(), proptest::collection::vec(any::<f32>(), HIDDEN_DIM), any::<f32>(), any::<bool>())
            .prop_map(|(request_id, embedding, threshold, want_fine)| Message::Match(MatchRequest {
                request_id,
                embedding,
                threshold,
                want_fine,
            })),
        (any::<u64>(), any::<u32>(), any::<u32>(), any::<bool>(), any::<f32>()).prop_map(
            |(request_id, expert_id, class_id, rejected, score)| Message::MatchResult(MatchResult {
                request_id,
                expert_id,
                class_id,
                rejected,
                score,
            })
        ),
        (any::<u16>(), ".{0,40}").prop_map(|(c, message)| Message::Error {
            code: ErrorCode(c),
            message,
        }),
        Just(Message::Ping),
        (any::<u32>(), any::<bool>()).prop_map(|(entries, replaced)| Message::Pong(Status { entries, replaced })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn round_trip_is_bit_exact(msg in message_strategy()) {
        let bytes = encode_frame(&msg).unwrap();
        let (back, used) = decode_frame(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        // compare through bytes so NaN payloads count as equal
        prop_assert_eq!(encode_frame(&back).unwrap(), bytes.clone());
        prop_assert_eq!(back.msg_type(), msg.msg_type());
        if let Some(n) = layout(msg.msg_type()).fixed_len() {
            prop_assert_eq!(bytes.len(), HEADER_LEN + n);
        }
        let mut r = &bytes[..];
        let streamed = read_message(&mut r).unwrap();
        prop_assert_eq!(encode_frame(&streamed).unwrap(), bytes);
    }
}

#[test]
fn zero_embedding_round_trips() {
    let m = Message::Match(MatchRequest {
        request_id: 0,
        embedding: vec![0.0; HIDDEN_DIM],
        threshold: -1.0,
        want_fine: false,
    });
    let bytes = encode_frame(&m).unwrap();
    assert_eq!(decode_frame(&bytes).unwrap().0, m);
}

#[test]
fn wrong_embedding_length_is_not_encodable() {
    let m = Message::Match(MatchRequest {
        request_id: 0,
        embedding: vec![0.0; 784],
        threshold: -1.0,
        want_fine: false,
    });
    assert!(matches!(encode_frame(&m), Err(WireError::Protocol(_))));
}

#[test]
fn oversize_error_message_is_rejected() {
    let m = Message::Error {
        code: ErrorCode::INTERNAL,
        message: "x".repeat(MAX_PAYLOAD),
    };
    assert!(matches!(encode_frame(&m), Err(WireError::Size(_))));
}

/// Valid frames of every type, used as fuzzing seeds.
fn seeds() -> Vec<Vec<u8>> {
    let mut rng = Rng::new(11);
    let mut v = |n| (0..n).map(|_| rng.uniform(-1.0, 1.0) as f32).collect::<Vec<f32>>();
    let entry = ExpertEntry::new(
        3,
        Embedding::from_f32(&v(HIDDEN_DIM)).unwrap(),
        vec![Embedding::from_f32(&v(HIDDEN_DIM)).unwrap(); 2],
    )
    .unwrap();
    [
        Message::Register(entry),
        Message::Match(MatchRequest {
            request_id: 9,
            embedding: v(HIDDEN_DIM),
            threshold: 0.2,
            want_fine: true,
        }),
        Message::MatchResult(MatchResult {
            request_id: 9,
            expert_id: 1,
            class_id: NO_ID,
            rejected: false,
            score: 0.9,
        }),
        Message::Error {
            code: ErrorCode::EMPTY_INDEX,
            message: "empty".into(),
        },
        Message::Ping,
        Message::Pong(Status {
            entries: 4,
            replaced: true,
        }),
    ]
    .iter()
    .map(|m| encode_frame(m).unwrap())
    .collect()
}

/// Decodes 10^5 random and mutated inputs. Every outcome must be a typed
/// error or a message whose canonical encoding is the consumed prefix.
#[test]
fn fuzz_decode_frame() {
    let seeds = seeds();
    let mut rng = Rng::new(0xf022);
    let mut counts = [0usize; 2];
    for i in 0..100_000 {
        let input: Vec<u8> = match i % 4 {
            0 => {
                let n = rng.below(64) as usize;
                (0..n).map(|_| rng.next_u64() as u8).collect()
            }
            1 => {
                // valid header, random payload
                let mut f = seeds[rng.below(seeds.len() as u64) as usize][..HEADER_LEN].to_vec();
                let n = rng.below(700) as usize;
                if rng.below(2) == 0 {
                    f[7..11].copy_from_slice(&(n as u32).to_le_bytes());
                }
                f.extend((0..n).map(|_| rng.next_u64() as u8));
                f
            }
            2 => {
                let s = &seeds[rng.below(seeds.len() as u64) as usize];
                s[..rng.below(s.len() as u64 + 1) as usize].to_vec()
            }
            _ => {
                let mut f = seeds[rng.below(seeds.len() as u64) as usize].clone();
                for _ in 0..1 + rng.below(4) {
                    let at = rng.below(f.len() as u64) as usize;
                    f[at] ^= 1 << rng.below(8);
                }
                f
            }
        };
        let outcome = std::panic::catch_unwind(|| decode_frame(&input));
        let result = outcome.unwrap_or_else(|_| panic!("decoder panicked on input {i}: {input:?}"));
        match result {
            Ok((msg, used)) => {
                assert_eq!(encode_frame(&msg).unwrap(), input[..used], "input {i}");
                counts[0] += 1;
            }
            Err(
                WireError::Protocol(_) | WireError::Truncation { .. } | WireError::Size(_),
            ) => counts[1] += 1,
            Err(other) => panic!("untyped decode failure {other:?}"),
        }
    }
    assert_eq!(counts[0] + counts[1], 100_000);
    assert!(counts[0] > 1000, "fuzzer rarely produced valid frames: {counts:?}");
}

/// No message type has a field able to hold a 784-dim vector; the largest
/// vector on the wire is 128 f32 values.
#[test]
fn grammar_admits_no_raw_input() {
    assert_eq!(GRAMMAR.len(), MsgType::ALL.len());
    for t in MsgType::ALL {
        let l = layout(t);
        for f in l.fields {
            let dims = f.kind.vector_dims();
            assert!(dims == 0 || dims == HIDDEN_DIM, "{t:?}.{} has {dims} dims", f.name);
            if let FieldKind::RepeatedF32Vec { count_field, .. } = f.kind {
                assert!(l.fields.iter().any(|g| g.name == count_field && g.kind == FieldKind::U32));
            }
        }
        assert!(l.max_vector_bytes() <= 512);
    }
    let max = GRAMMAR.iter().map(|l| l.max_vector_bytes()).max().unwrap();
    assert_eq!(max, 512);
    assert_eq!(layout(MsgType::Match).fixed_len(), Some(8 + 512 + 4 + 1));
}
