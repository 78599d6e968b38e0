//! Experiment runner: symbol bounds, eigenvalue counts, matching, solver tables and
//! preconditioned spectra as CSV or JSON.

pub mod experiments;
pub mod table;

use std::str::FromStr;

/// Comma-separated list argument; the empty string is the empty list.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<T>().map_err(|e| format!("'{t}': {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parsing() {
        assert_eq!("7, 15,31".parse::<List<usize>>().unwrap(), List(vec![7, 15, 31]));
        assert_eq!("".parse::<List<f64>>().unwrap(), List(vec![]));
        assert!("1,x".parse::<List<usize>>().is_err());
    }
}
