//! Line-delimited JSON network files.
//!
//! The first non-blank line is a header `{"kind":"header","schema":1,"horizon":T}`.
//! It is followed by `user`, `edge` and `image` records in any order. The writer
//! emits a canonical order (users, edges by slice, images by owner and slice) so
//! that write → read → write is byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BinaryLabel, EmotionCategory, ImageId, ImageRecord, NetworkBuilder, TimeSlice, TimeVaryingNetwork, UserId};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Header {
        schema: u32,
        horizon: usize,
    },
    User {
        id: UserId,
    },
    Edge {
        u: UserId,
        v: UserId,
        t: TimeSlice,
    },
    Image {
        id: ImageId,
        owner: UserId,
        t: TimeSlice,
        features: FeatureVector,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        labels: BTreeMap<EmotionCategory, BinaryLabel>,
    },
}

pub fn load_network(path: impl AsRef<Path>) -> Result<TimeVaryingNetwork> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network(&text)
}

pub fn parse_network(text: &str) -> Result<TimeVaryingNetwork> {
    let mut builder: Option<NetworkBuilder> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(raw).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        match (record, builder.as_mut()) {
            (Record::Header { schema, horizon }, None) => {
                if schema != SCHEMA_VERSION {
                    return Err(Error::Parse {
                        line,
                        message: format!("unsupported schema version {schema}"),
                    });
                }
                builder = Some(NetworkBuilder::new(horizon));
            }
            (Record::Header { .. }, Some(_)) => {
                return Err(Error::Parse {
                    line,
                    message: "duplicate header".into(),
                })
            }
            (_, None) => {
                return Err(Error::Parse {
                    line,
                    message: "first record must be the header".into(),
                })
            }
            (Record::User { id }, Some(b)) => {
                b.add_user(id);
            }
            (Record::Edge { u, v, t }, Some(b)) => {
                b.add_edge(u, v, t);
            }
            (
                Record::Image {
                    id,
                    owner,
                    t,
                    features,
                    labels,
                },
                Some(b),
            ) => {
                b.add_image(ImageRecord {
                    id,
                    owner,
                    slice: t,
                    features,
                    labels,
                });
            }
        }
    }
    match builder {
        Some(b) => b.build(),
        None => Ok(TimeVaryingNetwork::empty()),
    }
}

fn push_record(out: &mut String, record: &Record) {
    let line = serde_json::to_string(record).expect("records always serialize");
    out.push_str(&line);
    out.push('\n');
}

/// Serialises the network in canonical order.
pub fn write_network(net: &TimeVaryingNetwork) -> String {
    let mut out = String::new();
    push_record(
        &mut out,
        &Record::Header {
            schema: SCHEMA_VERSION,
            horizon: net.horizon(),
        },
    );
    for &id in net.users() {
        push_record(&mut out, &Record::User { id });
    }
    for t in 0..net.horizon() {
        for (u, v) in net.edges_at(t) {
            push_record(&mut out, &Record::Edge { u, v, t });
        }
    }
    for rec in net.images() {
        push_record(
            &mut out,
            &Record::Image {
                id: rec.id,
                owner: rec.owner,
                t: rec.slice,
                features: rec.features.clone(),
                labels: rec.labels.clone(),
            },
        );
    }
    out
}

/// Serialises image records alone, one per line (a network-file fragment).
pub fn write_image_fragment(images: &[ImageRecord]) -> String {
    let mut out = String::new();
    for rec in images {
        push_record(
            &mut out,
            &Record::Image {
                id: rec.id,
                owner: rec.owner,
                t: rec.slice,
                features: rec.features.clone(),
                labels: rec.labels.clone(),
            },
        );
    }
    out
}

/// Reads a fragment written by [`write_image_fragment`]. Only `image`
/// records are accepted.
pub fn parse_image_fragment(text: &str) -> Result<Vec<ImageRecord>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line = idx + 1;
        match serde_json::from_str(raw) {
            Ok(Record::Image {
                id,
                owner,
                t,
                features,
                labels,
            }) => out.push(ImageRecord {
                id,
                owner,
                slice: t,
                features,
                labels,
            }),
            Ok(_) => {
                return Err(Error::Parse {
                    line,
                    message: "fragments hold image records only".into(),
                })
            }
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}
