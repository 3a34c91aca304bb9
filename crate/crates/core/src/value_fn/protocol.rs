//! Newline-delimited JSON messages exchanged with external models.
//!
//! ```text
//! -> {"type":"hello"}
//! <- {"type":"hello","num_classes":2,"class_names":["a","b"]}
//! -> {"type":"predict","id":7,"format":"png","data":"<base64>"}
//! <- {"type":"logits","id":7,"values":[0.5,-0.5]}
//! <- {"type":"error","id":7,"message":"..."}
//! ```

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Request {
    Hello,
    Predict {
        id: u64,
        format: String,
        data: String,
    },
}

impl Request {
    pub fn predict(id: u64, img: &RasterImage) -> Result<Self> {
        Ok(Request::Predict {
            id,
            format: "png".into(),
            data: base64::engine::general_purpose::STANDARD.encode(img.encode_png()?),
        })
    }

    /// Decodes the image carried by a predict request.
    pub fn decode_image(&self) -> Result<RasterImage> {
        match self {
            Request::Predict { format, data, .. } => {
                if format != "png" {
                    return Err(Error::UnsupportedImageFormat(format.clone()));
                }
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(data)
                    .map_err(|e| Error::InvalidImage(e.to_string()))?;
                RasterImage::decode(&bytes)
            }
            Request::Hello => Err(Error::InvalidImage("hello carries no image".into())),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Response {
    Hello {
        num_classes: usize,
        class_names: Vec<String>,
    },
    Logits {
        id: u64,
        values: Vec<f64>,
    },
    Error {
        #[serde(default)]
        id: u64,
        message: String,
    },
}

impl Response {
    pub fn parse(line: &str) -> Result<Self> {
        serde_json::from_str(line.trim()).map_err(|e| Error::MalformedResponse(e.to_string()))
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }

    /// Validates a hello response and returns the advertised class names.
    pub fn into_classes(self) -> Result<Vec<String>> {
        match self {
            Response::Hello {
                num_classes,
                class_names,
            } => {
                if class_names.len() != num_classes {
                    return Err(Error::HandshakeFailed(format!(
                        "num_classes is {num_classes} but {} class names were sent",
                        class_names.len()
                    )));
                }
                if num_classes < 2 {
                    return Err(Error::HandshakeFailed(format!(
                        "model advertises {num_classes} classes"
                    )));
                }
                Ok(class_names)
            }
            Response::Error { message, .. } => Err(Error::HandshakeFailed(message)),
            other => Err(Error::HandshakeFailed(format!(
                "expected hello, got {}",
                other.to_line()
            ))),
        }
    }
}
