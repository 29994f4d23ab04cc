#![allow(dead_code)]

pub mod kn_oracle;
