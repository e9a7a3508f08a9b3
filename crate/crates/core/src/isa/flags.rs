use serde::{Deserialize, Serialize};
use std::fmt;

const CF_BIT: u8 = 0;
const PF_BIT: u8 = 2;
const AF_BIT: u8 = 4;
const ZF_BIT: u8 = 6;
const SF_BIT: u8 = 7;
const OF_BIT: u16 = 11;

/// Bit 1 of the x86 flag image is reserved and always reads as 1.
const RESERVED_ONE: u8 = 1 << 1;

/// Status flags. Only `zf` carries full semantics; the others exist so that
/// flag-image round trips (LAHF/SAHF, PUSHF/POPF) are real transformations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flags {
    pub zf: bool,
    pub cf: bool,
    pub sf: bool,
    pub of: bool,
    pub pf: bool,
    pub af: bool,
}

/// Identifies a single flag bit. Pending reverts are keyed by this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flag {
    Zf,
    Cf,
    Sf,
    Of,
    Pf,
    Af,
}

impl Flag {
    pub const ALL: [Flag; 6] = [Flag::Zf, Flag::Cf, Flag::Sf, Flag::Of, Flag::Pf, Flag::Af];
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Flag::Zf => "zf",
            Flag::Cf => "cf",
            Flag::Sf => "sf",
            Flag::Of => "of",
            Flag::Pf => "pf",
            Flag::Af => "af",
        };
        f.write_str(s)
    }
}

impl Flags {
    pub fn get(&self, flag: Flag) -> bool {
        match flag {
            Flag::Zf => self.zf,
            Flag::Cf => self.cf,
            Flag::Sf => self.sf,
            Flag::Of => self.of,
            Flag::Pf => self.pf,
            Flag::Af => self.af,
        }
    }

    /// Flags produced by a flag-writing ALU instruction whose result is
    /// `result`. Only ZF is computed; the remaining status bits are cleared.
    pub fn from_result(result: u64) -> Flags {
        Flags {
            zf: result == 0,
            ..Flags::default()
        }
    }

    /// Low byte of the flag register, as loaded into AH by LAHF.
    pub fn low_byte(&self) -> u8 {
        (u8::from(self.sf) << SF_BIT)
            | (u8::from(self.zf) << ZF_BIT)
            | (u8::from(self.af) << AF_BIT)
            | (u8::from(self.pf) << PF_BIT)
            | RESERVED_ONE
            | (u8::from(self.cf) << CF_BIT)
    }

    /// SAHF: overwrite the low-byte flags from `byte`, keeping OF.
    pub fn with_low_byte(self, byte: u8) -> Flags {
        let bit = |b: u8| byte & (1 << b) != 0;
        Flags {
            sf: bit(SF_BIT),
            zf: bit(ZF_BIT),
            af: bit(AF_BIT),
            pf: bit(PF_BIT),
            cf: bit(CF_BIT),
            of: self.of,
        }
    }

    /// 16-bit flag image pushed by PUSHF.
    pub fn image(&self) -> u16 {
        u16::from(self.low_byte()) | (u16::from(self.of) << OF_BIT)
    }

    /// POPF: rebuild every modeled flag from a 16-bit image.
    pub fn from_image(image: u16) -> Flags {
        Flags {
            of: image & (1 << OF_BIT) != 0,
            ..Flags::default().with_low_byte(image as u8)
        }
    }
}
