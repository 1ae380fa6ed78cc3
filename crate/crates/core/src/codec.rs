//! Byte encoding of task payloads and results.
//!
//! Every task crosses the executor boundary as bytes, which is what keeps
//! tasks free of references into executor state.

use bytes::Bytes;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
#[error("payload codec error: {0}")]
pub struct CodecError(String);

pub fn encode<T: Serialize>(value: &T) -> Bytes {
    // Serialization into a Vec only fails for unsupported serde shapes,
    // which none of the payload types use.
    Bytes::from(bincode::serialize(value).expect("payload types are always serializable"))
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, CodecError> {
    bincode::deserialize(bytes).map_err(|e| CodecError(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip(v in proptest::collection::vec(any::<(u32, f64, bool)>(), 0..64), s in ".*") {
            let encoded = encode(&(v.clone(), s.clone()));
            let back: (Vec<(u32, f64, bool)>, String) = decode(&encoded).unwrap();
            prop_assert_eq!(back.0.len(), v.len());
            for (a, b) in back.0.iter().zip(&v) {
                prop_assert_eq!(a.0, b.0);
                prop_assert_eq!(a.1.to_bits(), b.1.to_bits());
                prop_assert_eq!(a.2, b.2);
            }
            prop_assert_eq!(back.1, s);
        }
    }

    #[test]
    fn truncated_input_is_an_error() {
        let encoded = encode(&vec![1u64, 2, 3]);
        assert!(decode::<Vec<u64>>(&encoded[..encoded.len() - 1]).is_err());
    }
}
