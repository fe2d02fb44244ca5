//! Tree addresses for inverse-limit stages.
//!
//! An address is a finite word of naturals. The first letter names a root of
//! the address tree; each later stage appends letters recording duplication
//! and expansion choices. Addresses print `/`-joined, e.g. `2/0/1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Address(pub Vec<u64>);

impl Address {
    pub fn root(r: u64) -> Self {
        Address(vec![r])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, letter: u64) -> Address {
        let mut v = self.0.clone();
        v.push(letter);
        Address(v)
    }

    /// Append `count` zero letters.
    pub fn pad_zeros(&self, count: usize) -> Address {
        let mut v = self.0.clone();
        v.extend(std::iter::repeat(0).take(count));
        Address(v)
    }

    pub fn is_prefix_of(&self, other: &Address) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn prefix(&self, len: usize) -> Result<Address> {
        if len > self.0.len() {
            return Err(Error::InvalidAddress(format!(
                "prefix of length {len} from address of length {}",
                self.0.len()
            )));
        }
        Ok(Address(self.0[..len].to_vec()))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "{}", parts.join("/"))
    }
}

impl FromStr for Address {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Ok(Address(vec![]));
        }
        let parts: std::result::Result<Vec<u64>, _> =
            s.split('/').map(|p| p.parse::<u64>()).collect();
        parts
            .map(Address)
            .map_err(|e| Error::InvalidAddress(format!("{s}: {e}")))
    }
}

impl From<Address> for String {
    fn from(a: Address) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for Address {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}
