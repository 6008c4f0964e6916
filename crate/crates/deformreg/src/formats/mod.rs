//! On-disk formats: match and landmark CSV, DVF1 rasters, 8-bit PNG.

pub mod dvf;
pub mod image;
pub mod landmarks;
pub mod matches;

pub use self::dvf::{decode_dvf, encode_dvf, read_dvf, write_dvf};
pub use self::image::{read_image, write_image};
pub use self::landmarks::{encode_landmarks_csv, parse_landmarks_csv, read_landmarks_csv, write_landmarks_csv};
pub use self::matches::{
    encode_match_csv, parse_match_csv, read_match_csv, write_labels_csv, write_match_csv,
};
