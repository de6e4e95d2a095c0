//! Carrying a Fid in overloaded L2/L3 header fields.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::bfcore::Fid;
use crate::bits::{Bits, BitsError};

/// Header fields whose match supports an arbitrary mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct OverlayHeader {
    /// 48 bits.
    pub eth_dst: u64,
    /// 48 bits.
    pub eth_src: u64,
    /// 12 bits.
    pub vlan_id: u16,
    pub ipv6_src: u128,
    pub ipv6_dst: u128,
    /// 20 bits.
    pub flow_label: u32,
}

const MAC_MASK: u64 = (1 << 48) - 1;

impl OverlayHeader {
    /// Sets the network attachment point id carried in `eth_src` (only
    /// meaningful for [`HeaderLayout::Fid276`], where that field is free).
    pub fn with_nap(mut self, nap: u64) -> Self {
        self.eth_src = nap & MAC_MASK;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum HeaderLayout {
    /// Flow label, IPv6 source and destination (276 bits). The Ethernet
    /// destination is all-zero to mark the frame as Bloom-forwarded and the
    /// Ethernet source names the attachment point.
    Fid276,
    /// All six fields in order: eth_dst, eth_src, vlan, ipv6_src, ipv6_dst, flow label.
    Fid384,
}

#[derive(Debug, Clone, Copy)]
enum Field {
    EthDst,
    EthSrc,
    Vlan,
    Ipv6Src,
    Ipv6Dst,
    FlowLabel,
}

impl Field {
    fn get(self, h: &OverlayHeader) -> u128 {
        match self {
            Field::EthDst => h.eth_dst as u128,
            Field::EthSrc => h.eth_src as u128,
            Field::Vlan => h.vlan_id as u128,
            Field::Ipv6Src => h.ipv6_src,
            Field::Ipv6Dst => h.ipv6_dst,
            Field::FlowLabel => h.flow_label as u128,
        }
    }

    fn set(self, h: &mut OverlayHeader, v: u128) {
        match self {
            Field::EthDst => h.eth_dst = v as u64,
            Field::EthSrc => h.eth_src = v as u64,
            Field::Vlan => h.vlan_id = v as u16,
            Field::Ipv6Src => h.ipv6_src = v,
            Field::Ipv6Dst => h.ipv6_dst = v,
            Field::FlowLabel => h.flow_label = v as u32,
        }
    }

    fn bits(self) -> usize {
        match self {
            Field::EthDst | Field::EthSrc => 48,
            Field::Vlan => 12,
            Field::Ipv6Src | Field::Ipv6Dst => 128,
            Field::FlowLabel => 20,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Field::EthDst => "eth_dst",
            Field::EthSrc => "eth_src",
            Field::Vlan => "vlan_id",
            Field::Ipv6Src => "ipv6_src",
            Field::Ipv6Dst => "ipv6_dst",
            Field::FlowLabel => "flow_label",
        }
    }
}

impl HeaderLayout {
    pub fn capacity(self) -> usize {
        match self {
            HeaderLayout::Fid276 => 276,
            HeaderLayout::Fid384 => 384,
        }
    }

    /// Fields in Fid bit order, lowest bits first.
    fn fields(self) -> &'static [Field] {
        match self {
            HeaderLayout::Fid276 => &[Field::FlowLabel, Field::Ipv6Src, Field::Ipv6Dst],
            HeaderLayout::Fid384 => {
                &[Field::EthDst, Field::EthSrc, Field::Vlan, Field::Ipv6Src, Field::Ipv6Dst, Field::FlowLabel]
            }
        }
    }

    /// `(field name, first fid bit, bit count)` in Fid bit order.
    pub fn segments(self) -> Vec<(&'static str, usize, usize)> {
        let mut at = 0;
        self.fields()
            .iter()
            .map(|f| {
                let seg = (f.name(), at, f.bits());
                at += f.bits();
                seg
            })
            .collect()
    }
}

impl fmt::Display for HeaderLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeaderLayout::Fid276 => "fid276",
            HeaderLayout::Fid384 => "fid384",
        })
    }
}

impl FromStr for HeaderLayout {
    type Err = HeaderError;
    fn from_str(s: &str) -> Result<Self, HeaderError> {
        match s {
            "fid276" => Ok(HeaderLayout::Fid276),
            "fid384" => Ok(HeaderLayout::Fid384),
            _ => Err(HeaderError::UnknownLayout(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeaderError {
    #[error("a {width}-bit FID does not fit the {layout} layout ({} bits)", .layout.capacity())]
    TooWide { width: usize, layout: HeaderLayout },
    #[error("eth_dst must be all-zero in the {0} layout")]
    NotBloomFrame(HeaderLayout),
    #[error("header carries set bits beyond FID width {width} (field {field})")]
    StrayBits { width: usize, field: &'static str },
    #[error("field {field} exceeds its {bits}-bit size")]
    FieldOverflow { field: &'static str, bits: usize },
    #[error("unknown header layout {0:?} (expected fid276 or fid384)")]
    UnknownLayout(String),
    #[error(transparent)]
    Bits(#[from] BitsError),
}

/// Spreads `fid` over the layout's fields. Fid bits beyond its width leave the
/// corresponding header bits zero.
pub fn encode_header(fid: &Fid, layout: HeaderLayout) -> Result<OverlayHeader, HeaderError> {
    let width = fid.width();
    if width > layout.capacity() {
        return Err(HeaderError::TooWide { width, layout });
    }
    let mut h = OverlayHeader::default();
    for (field, (_, from, len)) in layout.fields().iter().zip(layout.segments()) {
        let take = len.min(width.saturating_sub(from));
        if take > 0 {
            field.set(&mut h, fid.bits().extract(from, take));
        }
    }
    Ok(h)
}

/// Inverse of [`encode_header`] for a Fid of `width` bits.
pub fn decode_header(header: &OverlayHeader, layout: HeaderLayout, width: usize) -> Result<Fid, HeaderError> {
    if width > layout.capacity() {
        return Err(HeaderError::TooWide { width, layout });
    }
    if layout == HeaderLayout::Fid276 && header.eth_dst != 0 {
        return Err(HeaderError::NotBloomFrame(layout));
    }
    let mut bits = Bits::zeros(width)?;
    for (field, (name, from, len)) in layout.fields().iter().zip(layout.segments()) {
        let value = field.get(header);
        if len < 128 && value >> len != 0 {
            return Err(HeaderError::FieldOverflow { field: name, bits: len });
        }
        let take = len.min(width.saturating_sub(from));
        if take < 128 && value >> take != 0 {
            return Err(HeaderError::StrayBits { width, field: name });
        }
        if take > 0 {
            bits.deposit(from, take, value)?;
        }
    }
    Ok(Fid::from_bits(bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_fid(rng: &mut impl Rng, width: usize) -> Fid {
        let ones = (0..width).filter(|_| rng.random_bool(0.5));
        Fid::from_bits(Bits::with_bits(width, ones).unwrap())
    }

    #[test]
    fn fid276_layout_is_bit_exact() {
        let fid = |bits: &[usize]| Fid::from_bits(Bits::with_bits(276, bits.iter().copied()).unwrap());
        let h = encode_header(&fid(&[0, 19]), HeaderLayout::Fid276).unwrap();
        assert_eq!(h, OverlayHeader { flow_label: 1 | 1 << 19, ..Default::default() });
        let h = encode_header(&fid(&[20, 147]), HeaderLayout::Fid276).unwrap();
        assert_eq!(h, OverlayHeader { ipv6_src: 1 | 1 << 127, ..Default::default() });
        let h = encode_header(&fid(&[148, 275]), HeaderLayout::Fid276).unwrap();
        assert_eq!(h, OverlayHeader { ipv6_dst: 1 | 1 << 127, ..Default::default() });
        assert_eq!(h.eth_dst, 0);

        let tagged = h.with_nap(0xdead_beef);
        assert_eq!(decode_header(&tagged, HeaderLayout::Fid276, 276).unwrap(), fid(&[148, 275]));
        let not_bf = OverlayHeader { eth_dst: 1, ..h };
        assert_eq!(decode_header(&not_bf, HeaderLayout::Fid276, 276), Err(HeaderError::NotBloomFrame(HeaderLayout::Fid276)));
    }

    #[test]
    fn fid384_layout_is_bit_exact() {
        let segs = HeaderLayout::Fid384.segments();
        assert_eq!(
            segs,
            vec![
                ("eth_dst", 0, 48),
                ("eth_src", 48, 48),
                ("vlan_id", 96, 12),
                ("ipv6_src", 108, 128),
                ("ipv6_dst", 236, 128),
                ("flow_label", 364, 20),
            ]
        );
        for (name, from, len) in segs {
            let f = Fid::from_bits(Bits::with_bits(384, [from + len - 1]).unwrap());
            let h = encode_header(&f, HeaderLayout::Fid384).unwrap();
            let top = 1u128 << (len - 1);
            let expect = match name {
                "eth_dst" => OverlayHeader { eth_dst: top as u64, ..Default::default() },
                "eth_src" => OverlayHeader { eth_src: top as u64, ..Default::default() },
                "vlan_id" => OverlayHeader { vlan_id: top as u16, ..Default::default() },
                "ipv6_src" => OverlayHeader { ipv6_src: top, ..Default::default() },
                "ipv6_dst" => OverlayHeader { ipv6_dst: top, ..Default::default() },
                _ => OverlayHeader { flow_label: top as u32, ..Default::default() },
            };
            assert_eq!(h, expect, "{name}");
        }
        assert_eq!(HeaderLayout::Fid276.segments().iter().map(|s| s.2).sum::<usize>(), 276);
    }

    #[test]
    fn width_checks() {
        let wide = Fid::zero(384).unwrap();
        assert_eq!(
            encode_header(&wide, HeaderLayout::Fid276),
            Err(HeaderError::TooWide { width: 384, layout: HeaderLayout::Fid276 })
        );
        assert!(decode_header(&OverlayHeader::default(), HeaderLayout::Fid276, 300).is_err());
        let h = OverlayHeader { ipv6_dst: 1 << 127, ..Default::default() };
        assert!(matches!(decode_header(&h, HeaderLayout::Fid276, 256), Err(HeaderError::StrayBits { field: "ipv6_dst", .. })));
        let h = OverlayHeader { vlan_id: 1 << 12, ..Default::default() };
        assert!(matches!(decode_header(&h, HeaderLayout::Fid384, 384), Err(HeaderError::FieldOverflow { .. })));
        assert_eq!("fid384".parse::<HeaderLayout>().unwrap(), HeaderLayout::Fid384);
        assert!("fid999".parse::<HeaderLayout>().is_err());
    }

    #[test]
    fn thousand_random_round_trips() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(276);
        for i in 0..1000 {
            for (layout, width) in [(HeaderLayout::Fid276, 256), (HeaderLayout::Fid276, 276), (HeaderLayout::Fid384, 256), (HeaderLayout::Fid384, 384)] {
                let fid = random_fid(&mut rng, width);
                let h = encode_header(&fid, layout).unwrap();
                assert_eq!(decode_header(&h, layout, width).unwrap(), fid, "case {i} {layout} {width}");
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_any_width(width in 1usize..=276, seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let fid = random_fid(&mut rng, width);
            for layout in [HeaderLayout::Fid276, HeaderLayout::Fid384] {
                let h = encode_header(&fid, layout).unwrap();
                prop_assert_eq!(decode_header(&h, layout, width).unwrap(), fid);
            }
        }
    }
}
