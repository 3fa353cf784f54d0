//! 10-20-system electrode label parsing.
//!
//! A label is a row letter group plus a lateral suffix: odd numbers sit on
//! the left hemisphere, even on the right, 'z' on the midline. Temporal
//! labels are folded onto their positional rows (T7 sits where a "C7" would,
//! FT7 on the FC row, TP7 on the CP row) so that the lattice rule can treat
//! every montage uniformly.

use crate::GraphError;

/// Anteroposterior row groups, front to back. `I` is the inion row, behind O.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Row {
    Fp,
    Af,
    F,
    Fc,
    C,
    Cp,
    P,
    Po,
    O,
    I,
}

impl Row {
    pub fn as_str(&self) -> &'static str {
        match self {
            Row::Fp => "Fp",
            Row::Af => "AF",
            Row::F => "F",
            Row::Fc => "FC",
            Row::C => "C",
            Row::Cp => "CP",
            Row::P => "P",
            Row::Po => "PO",
            Row::O => "O",
            Row::I => "I",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElectrodeLabel {
    pub raw: String,
    pub row: Row,
    /// Negative = left (odd suffix), 0 = midline ('z'), positive = right (even).
    pub lateral_index: i32,
}

impl std::fmt::Display for ElectrodeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.raw)
    }
}

pub fn parse_label(s: &str) -> Result<ElectrodeLabel, GraphError> {
    let trimmed = s.trim();
    if trimmed.is_empty() {
        return Err(GraphError::Parse { label: s.to_string(), reason: "empty label".into() });
    }
    let upper = trimmed.to_ascii_uppercase();

    // longest prefix first
    const TWO: [(&str, Row); 7] = [
        ("FP", Row::Fp),
        ("AF", Row::Af),
        ("FC", Row::Fc),
        ("CP", Row::Cp),
        ("PO", Row::Po),
        ("FT", Row::Fc), // fold: frontotemporal sits on the FC row
        ("TP", Row::Cp), // fold: temporoparietal sits on the CP row
    ];
    const ONE: [(&str, Row); 6] = [
        ("F", Row::F),
        ("C", Row::C),
        ("P", Row::P),
        ("O", Row::O),
        ("T", Row::C), // fold: temporal sits on the C row
        ("I", Row::I),
    ];

    let (prefix_len, row, is_temporal) = TWO
        .iter()
        .find(|(p, _)| upper.starts_with(p))
        .map(|(p, r)| (p.len(), *r, p.starts_with('T') || p.ends_with('T')))
        .or_else(|| {
            ONE.iter()
                .find(|(p, _)| upper.starts_with(p))
                .map(|(p, r)| (p.len(), *r, *p == "T"))
        })
        .ok_or_else(|| GraphError::Parse {
            label: trimmed.to_string(),
            reason: "unrecognized row prefix".into(),
        })?;

    let suffix = &upper[prefix_len..];
    let lateral_index = if suffix == "Z" {
        0
    } else {
        let n: u32 = suffix.parse().map_err(|_| GraphError::Parse {
            label: trimmed.to_string(),
            reason: format!("invalid lateral suffix '{}'", &trimmed[prefix_len..]),
        })?;
        if n == 0 || n > 10 {
            return Err(GraphError::Parse {
                label: trimmed.to_string(),
                reason: format!("lateral suffix {n} out of range"),
            });
        }
        if is_temporal && !(7..=10).contains(&n) {
            return Err(GraphError::Parse {
                label: trimmed.to_string(),
                reason: "temporal labels fold onto positions 7-10 only".into(),
            });
        }
        if n % 2 == 1 {
            -(n as i32)
        } else {
            n as i32
        }
    };

    Ok(ElectrodeLabel { raw: trimmed.to_string(), row, lateral_index })
}
