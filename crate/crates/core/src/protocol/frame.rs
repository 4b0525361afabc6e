use super::calibrate::{MAX_CODE, MIN_CODE};
use super::ProtocolError;
use crate::CHANNELS;

/// 3 status bytes followed by 8 channels of 3 bytes.
pub const FRAME_LEN: usize = 3 + 3 * CHANNELS;
/// Top nibble of every status word.
pub const SYNC_NIBBLE: u8 = 0b1100;

/// One conversion result as read off the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleFrame {
    /// 24-bit status: sync nibble, LOFF_STATP, LOFF_STATN, GPIO.
    pub status: u32,
    pub raw: [i32; CHANNELS],
    pub seq: u64,
}

impl SampleFrame {
    pub fn new(leadoff_p: u8, leadoff_n: u8, gpio: u8, raw: [i32; CHANNELS], seq: u64) -> Self {
        let status = ((SYNC_NIBBLE as u32) << 20)
            | ((leadoff_p as u32) << 12)
            | ((leadoff_n as u32) << 4)
            | (gpio as u32 & 0x0F);
        SampleFrame { status, raw, seq }
    }

    pub fn sync(&self) -> u8 {
        ((self.status >> 20) & 0x0F) as u8
    }

    pub fn leadoff_positive(&self) -> u8 {
        (self.status >> 12) as u8
    }

    pub fn leadoff_negative(&self) -> u8 {
        (self.status >> 4) as u8
    }

    pub fn gpio(&self) -> u8 {
        (self.status & 0x0F) as u8
    }
}

fn be24(b: &[u8]) -> u32 {
    (b[0] as u32) << 16 | (b[1] as u32) << 8 | b[2] as u32
}

fn sign_extend24(v: u32) -> i32 {
    ((v << 8) as i32) >> 8
}

/// Decode one wire frame. The sequence number is supplied by the caller,
/// since it is not part of the wire format.
pub fn decode_frame(bytes: &[u8], seq: u64) -> Result<SampleFrame, ProtocolError> {
    if bytes.len() != FRAME_LEN {
        return Err(ProtocolError::Framing(bytes.len()));
    }
    let status = be24(&bytes[..3]);
    if (status >> 20) as u8 != SYNC_NIBBLE {
        return Err(ProtocolError::Desync(status));
    }
    let mut raw = [0i32; CHANNELS];
    for (i, r) in raw.iter_mut().enumerate() {
        *r = sign_extend24(be24(&bytes[3 + 3 * i..6 + 3 * i]));
    }
    Ok(SampleFrame { status, raw, seq })
}

pub fn encode_frame(frame: &SampleFrame) -> Result<[u8; FRAME_LEN], ProtocolError> {
    if frame.status > 0xFF_FFFF || frame.sync() != SYNC_NIBBLE {
        return Err(ProtocolError::Desync(frame.status));
    }
    let mut out = [0u8; FRAME_LEN];
    out[..3].copy_from_slice(&frame.status.to_be_bytes()[1..]);
    for (i, &r) in frame.raw.iter().enumerate() {
        if !(MIN_CODE..=MAX_CODE).contains(&r) {
            return Err(ProtocolError::RawRange(r as i64));
        }
        out[3 + 3 * i..6 + 3 * i].copy_from_slice(&(r as u32).to_be_bytes()[1..]);
    }
    Ok(out)
}

/// Incremental frame decoder for a byte stream that may lose alignment.
///
/// While locked, a frame is accepted as soon as its sync nibble checks out.
/// After a desync the decoder hunts one byte at a time and only relocks where
/// both the candidate frame and the one after it carry the sync nibble.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    pos: usize,
    next_seq: u64,
    locked: bool,
    started: bool,
    ended: bool,
    discarded: u64,
    desyncs: u64,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.pos > 4096 {
            self.buf.drain(..self.pos);
            self.pos = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    /// No more bytes will arrive; trailing frames no longer wait for lookahead.
    pub fn finish(&mut self) {
        self.ended = true;
    }

    /// Bytes skipped while hunting for sync.
    pub fn discarded_bytes(&self) -> u64 {
        self.discarded
    }

    /// Number of times sync was lost after having been established.
    pub fn desync_count(&self) -> u64 {
        self.desyncs
    }

    pub fn buffered(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn is_sync(&self, at: usize) -> bool {
        self.buf[at] >> 4 == SYNC_NIBBLE
    }

    pub fn next_frame(&mut self) -> Option<SampleFrame> {
        loop {
            let avail = self.buf.len() - self.pos;
            if avail < FRAME_LEN {
                return None;
            }
            let here = self.is_sync(self.pos);
            let accept = if !here {
                false
            } else if self.locked {
                true
            } else if avail >= 2 * FRAME_LEN {
                self.is_sync(self.pos + FRAME_LEN)
            } else if self.ended {
                true
            } else {
                return None;
            };
            if accept {
                let frame = decode_frame(&self.buf[self.pos..self.pos + FRAME_LEN], self.next_seq)
                    .expect("sync checked");
                self.pos += FRAME_LEN;
                self.next_seq += 1;
                self.locked = true;
                self.started = true;
                return Some(frame);
            }
            if self.locked && self.started {
                self.desyncs += 1;
            }
            self.locked = false;
            self.pos += 1;
            self.discarded += 1;
        }
    }
}

impl Iterator for FrameDecoder {
    type Item = SampleFrame;

    fn next(&mut self) -> Option<SampleFrame> {
        self.next_frame()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zero_frame() -> Vec<u8> {
        let mut b = vec![0xC0, 0x00, 0x00];
        b.extend([0u8; 24]);
        b
    }

    #[test]
    fn decode_all_zero() {
        let f = decode_frame(&zero_frame(), 0).unwrap();
        assert_eq!(f.status, 0xC00000);
        assert_eq!(f.raw, [0; 8]);
    }

    #[test]
    fn decode_extremes() {
        let mut b = zero_frame();
        b[3..6].copy_from_slice(&[0x7F, 0xFF, 0xFF]);
        assert_eq!(decode_frame(&b, 0).unwrap().raw[0], 8_388_607);
        b[3..6].copy_from_slice(&[0x80, 0x00, 0x00]);
        assert_eq!(decode_frame(&b, 0).unwrap().raw[0], -8_388_608);
        b[3..6].copy_from_slice(&[0xFF, 0xFF, 0xFF]);
        assert_eq!(decode_frame(&b, 0).unwrap().raw[0], -1);
    }

    #[test]
    fn framing_and_sync_errors() {
        assert_eq!(
            decode_frame(&[0xC0; 26], 0),
            Err(ProtocolError::Framing(26))
        );
        let mut b = zero_frame();
        b[0] = 0x40;
        assert_eq!(decode_frame(&b, 0), Err(ProtocolError::Desync(0x400000)));
    }

    #[test]
    fn encode_examples_round_trip() {
        for raw0 in [0, 8_388_607, -8_388_608] {
            let mut raw = [0; 8];
            raw[0] = raw0;
            let f = SampleFrame::new(0, 0, 0, raw, 5);
            assert_eq!(decode_frame(&encode_frame(&f).unwrap(), 5).unwrap(), f);
        }
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let mut raw = [0; 8];
        raw[0] = 1 << 23;
        assert_eq!(
            encode_frame(&SampleFrame::new(0, 0, 0, raw, 0)),
            Err(ProtocolError::RawRange(1 << 23))
        );
    }

    #[test]
    fn status_fields() {
        let f = SampleFrame::new(0b0000_0100, 0x81, 0x0A, [0; 8], 0);
        assert_eq!(f.status, 0xC0_481A);
        assert_eq!(f.leadoff_positive(), 0x04);
        assert_eq!(f.leadoff_negative(), 0x81);
        assert_eq!(f.gpio(), 0x0A);
    }

    fn stream(n: usize) -> (Vec<SampleFrame>, Vec<u8>) {
        let frames: Vec<_> = (0..n as u64)
            .map(|i| {
                let mut raw = [0i32; 8];
                for (c, r) in raw.iter_mut().enumerate() {
                    // small EEG-sized codes whose low byte never looks like a sync nibble
                    *r = ((i as i32 * 37 + c as i32 * 101) % 2000) - 1000;
                    if *r & 0xF0 == 0xC0 {
                        *r ^= 0x40;
                    }
                }
                SampleFrame::new(0, 0, 0, raw, i)
            })
            .collect();
        let bytes = frames
            .iter()
            .flat_map(|f| encode_frame(f).unwrap())
            .collect();
        (frames, bytes)
    }

    #[test]
    fn decoder_handles_arbitrary_chunking() {
        let (frames, bytes) = stream(20);
        let mut d = FrameDecoder::new();
        for piece in bytes.chunks(7) {
            d.push(piece);
        }
        d.finish();
        let got: Vec<_> = d.by_ref().collect();
        assert_eq!(got, frames);
        assert_eq!(d.discarded_bytes(), 0);
    }

    #[test]
    fn decoder_resyncs_after_garbage_byte() {
        let (frames, mut bytes) = stream(10);
        bytes.insert(3 * FRAME_LEN, 0x5A);
        let mut d = FrameDecoder::new();
        d.push(&bytes);
        d.finish();
        let got: Vec<_> = d.by_ref().collect();
        assert_eq!(got.len(), 10);
        for (g, f) in got.iter().zip(&frames) {
            assert_eq!(g.raw, f.raw);
        }
        assert_eq!(d.discarded_bytes(), 1);
        assert_eq!(d.desync_count(), 1);
    }

    proptest! {
        #[test]
        fn frame_round_trip(
            raw in prop::array::uniform8(MIN_CODE..=MAX_CODE),
            p: u8, n: u8, gpio in 0u8..16, seq: u64,
        ) {
            let f = SampleFrame::new(p, n, gpio, raw, seq);
            prop_assert_eq!(decode_frame(&encode_frame(&f).unwrap(), seq).unwrap(), f);
        }

        // One inserted byte costs at most one frame, and sync is back within
        // one frame length of the insertion point.
        #[test]
        fn resync_within_one_frame(at in 0usize..(12 * FRAME_LEN), junk: u8) {
            let (frames, mut bytes) = stream(16);
            bytes.insert(at, junk);
            let mut d = FrameDecoder::new();
            d.push(&bytes);
            d.finish();
            let got: Vec<_> = d.collect();
            prop_assert!(got.len() >= 15);
            let hit = at / FRAME_LEN;
            let tail = &frames[hit + 2..];
            let got_tail = &got[got.len() - tail.len()..];
            for (g, f) in got_tail.iter().zip(tail) {
                prop_assert_eq!(g.raw, f.raw);
            }
        }
    }
}
