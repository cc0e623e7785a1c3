use serde::Serialize;

pub const BAR_VOCAB: u16 = 2;
pub const POSITION_VOCAB: u16 = 16;
pub const PITCH_VOCAB: u16 = 86;
pub const DURATION_VOCAB: u16 = 64;

/// Lowest MIDI pitch representable; pitch index 0.
pub const PITCH_OFFSET: u8 = 22;
/// Highest MIDI pitch representable; pitch index 85.
pub const PITCH_MAX: u8 = PITCH_OFFSET + (PITCH_VOCAB as u8) - 1;

pub const SPECIAL_COUNT: u16 = 5;

/// Regular vocabulary size per dimension, in token field order.
pub const REGULAR_SIZES: [u16; 4] = [BAR_VOCAB, POSITION_VOCAB, PITCH_VOCAB, DURATION_VOCAB];

/// Special tokens, in reserved-slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Special {
    Bos,
    Eos,
    Pad,
    Mask,
    Abs,
}

impl Special {
    pub const ALL: [Special; 5] = [Special::Bos, Special::Eos, Special::Pad, Special::Mask, Special::Abs];

    pub fn slot(self) -> u16 {
        self as u16
    }

    pub fn from_slot(slot: u16) -> Option<Special> {
        Special::ALL.get(usize::from(slot)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Special::Bos => "BOS",
            Special::Eos => "EOS",
            Special::Pad => "PAD",
            Special::Mask => "MASK",
            Special::Abs => "ABS",
        }
    }

    /// Encoded id of this special in the given dimension.
    pub fn id_in(self, dimension: usize) -> u16 {
        REGULAR_SIZES[dimension] + self.slot()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dimension {
    pub name: &'static str,
    pub regular: u16,
    pub special: u16,
}

impl Dimension {
    pub fn size(&self) -> u16 {
        self.regular + self.special
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VocabSpec {
    pub dimensions: [Dimension; 4],
    pub specials: [&'static str; 5],
}

impl VocabSpec {
    /// Stable identifier a model checkpoint can be checked against.
    pub fn fingerprint(&self) -> String {
        let dims: Vec<String> = self
            .dimensions
            .iter()
            .map(|d| format!("{}={}+{}", d.name, d.regular, d.special))
            .collect();
        format!("cp-v1:{};specials={}", dims.join(","), self.specials.join(","))
    }
}

pub fn vocab_spec() -> VocabSpec {
    let names = ["bar", "position", "pitch", "duration"];
    let dimensions = std::array::from_fn(|i| Dimension {
        name: names[i],
        regular: REGULAR_SIZES[i],
        special: SPECIAL_COUNT,
    });
    VocabSpec {
        dimensions,
        specials: Special::ALL.map(Special::name),
    }
}
