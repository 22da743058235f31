// SPDX-License-Identifier: Apache-2.0

//! Pattern generator: SRAM image, sequencer and serializer chain.
//!
//! The pattern memory is four banks of 512 words x 16 bytes (32 KiB).
//! One byte holds one 8-bit sample and one frame is the 32 samples (256
//! bits) captured by the DAC per C32 cycle.
//!
//! Address map: frame `f` lives in bank `f % 4` at words `2*(f/4)` and
//! `2*(f/4) + 1`. Bytes within a word are in ascending time order, so
//! samples `32f..32f+16` fill the first word and `32f+16..32f+32` the second.
//!
//! Image file layout: a 16-byte header (`"AWGIMG01"`, little-endian `u32`
//! sample count, 4 zero bytes) followed by the 32768 memory bytes in
//! bank-major order (bank 0 word 0 byte 0 first).

use thiserror::Error;

use crate::dacmodel::{thermometer_encode, SegmentEnables, SEGMENT_COUNT};

pub const BANK_COUNT: usize = 4;
pub const WORDS_PER_BANK: usize = 512;
pub const WORD_BYTES: usize = 16;
pub const FRAME_SAMPLES: usize = 32;
pub const SRAM_BYTES: usize = BANK_COUNT * WORDS_PER_BANK * WORD_BYTES;
pub const MAX_SAMPLES: usize = SRAM_BYTES;
pub const MAX_FRAMES: usize = MAX_SAMPLES / FRAME_SAMPLES;

/// Code written to padding and to memory outside the programmed range.
pub const PAD_CODE: u8 = 128;

pub const IMAGE_MAGIC: &[u8; 8] = b"AWGIMG01";
pub const IMAGE_HEADER_BYTES: usize = 16;
pub const IMAGE_FILE_BYTES: usize = IMAGE_HEADER_BYTES + SRAM_BYTES;

/// Samples per quarter-rate word out of each 32:4 serializer.
const MUX_WIDTH: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatgenError {
    #[error("{0} samples exceed the 32768-sample pattern memory")]
    CapacityExceeded(usize),
    #[error("an image must contain at least one sample")]
    Empty,
    #[error("invalid sequencer range: {0}")]
    InvalidRange(String),
    #[error("loop_count must be at least 1, got {0}")]
    InvalidLoop(u32),
    #[error("malformed image file: {0}")]
    BadImageFile(String),
}

/// Contents of the pattern memory.
#[derive(Clone, PartialEq, Eq)]
pub struct SramImage {
    /// Bank-major raw bytes; see the module docs for the address map.
    bytes: Box<[u8; SRAM_BYTES]>,
    sample_count: usize,
}

impl std::fmt::Debug for SramImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SramImage")
            .field("sample_count", &self.sample_count)
            .finish_non_exhaustive()
    }
}

/// Byte offset of sample `n` in the bank-major memory.
pub fn sample_address(n: usize) -> usize {
    let frame = n / FRAME_SAMPLES;
    let within = n % FRAME_SAMPLES;
    let bank = frame % BANK_COUNT;
    let word = 2 * (frame / BANK_COUNT) + within / WORD_BYTES;
    bank * WORDS_PER_BANK * WORD_BYTES + word * WORD_BYTES + within % WORD_BYTES
}

impl SramImage {
    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn frame_count(&self) -> usize {
        self.sample_count / FRAME_SAMPLES
    }

    pub fn bytes(&self) -> &[u8; SRAM_BYTES] {
        &self.bytes
    }

    /// 16-byte word `word` of bank `bank`.
    pub fn word(&self, bank: usize, word: usize) -> [u8; WORD_BYTES] {
        let base = (bank * WORDS_PER_BANK + word) * WORD_BYTES;
        self.bytes[base..base + WORD_BYTES].try_into().unwrap()
    }

    /// Fraction of the memory holding programmed (including padded) samples.
    pub fn occupancy(&self) -> f64 {
        self.sample_count as f64 / MAX_SAMPLES as f64
    }

    pub fn to_file_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(IMAGE_FILE_BYTES);
        out.extend_from_slice(IMAGE_MAGIC);
        out.extend_from_slice(&(self.sample_count as u32).to_le_bytes());
        out.extend_from_slice(&[0; 4]);
        out.extend_from_slice(&self.bytes[..]);
        out
    }

    pub fn from_file_bytes(data: &[u8]) -> Result<Self, PatgenError> {
        if data.len() != IMAGE_FILE_BYTES {
            return Err(PatgenError::BadImageFile(format!(
                "expected {IMAGE_FILE_BYTES} bytes, got {}",
                data.len()
            )));
        }
        if &data[..8] != IMAGE_MAGIC {
            return Err(PatgenError::BadImageFile("bad magic".into()));
        }
        let sample_count = u32::from_le_bytes(data[8..12].try_into().unwrap()) as usize;
        if data[12..16] != [0; 4] {
            return Err(PatgenError::BadImageFile("reserved header bytes are not zero".into()));
        }
        if sample_count == 0 || sample_count > MAX_SAMPLES || !sample_count.is_multiple_of(FRAME_SAMPLES) {
            return Err(PatgenError::BadImageFile(format!(
                "invalid sample_count {sample_count}"
            )));
        }
        let bytes: Box<[u8; SRAM_BYTES]> = data[IMAGE_HEADER_BYTES..]
            .to_vec()
            .into_boxed_slice()
            .try_into()
            .unwrap();
        Ok(Self { bytes, sample_count })
    }
}

/// Packs samples into the pattern memory, padding the last frame with
/// [`PAD_CODE`].
pub fn pack_image(samples: &[u8]) -> Result<SramImage, PatgenError> {
    if samples.is_empty() {
        return Err(PatgenError::Empty);
    }
    if samples.len() > MAX_SAMPLES {
        return Err(PatgenError::CapacityExceeded(samples.len()));
    }
    let sample_count = samples.len().div_ceil(FRAME_SAMPLES) * FRAME_SAMPLES;
    let mut bytes: Box<[u8; SRAM_BYTES]> = vec![PAD_CODE; SRAM_BYTES].into_boxed_slice().try_into().unwrap();
    for (n, &s) in samples.iter().enumerate() {
        bytes[sample_address(n)] = s;
    }
    Ok(SramImage { bytes, sample_count })
}

/// All `sample_count` samples in time order.
pub fn unpack_image(image: &SramImage) -> Vec<u8> {
    (0..image.sample_count)
        .map(|n| image.bytes[sample_address(n)])
        .collect()
}

/// 32 samples delivered to the DAC in one C32 cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternFrame {
    pub samples: [u8; FRAME_SAMPLES],
}

impl PatternFrame {
    pub const BITS: usize = FRAME_SAMPLES * 8;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequencerConfig {
    pub start_frame: usize,
    pub frame_count: usize,
    pub loop_count: u32,
    /// Left rotation applied to every 16-byte word, 0..=15.
    pub byte_rotation: u8,
}

impl SequencerConfig {
    /// Plays the whole image once without rotation.
    pub fn whole(image: &SramImage) -> Self {
        Self {
            start_frame: 0,
            frame_count: image.frame_count(),
            loop_count: 1,
            byte_rotation: 0,
        }
    }

    pub fn validate(&self, image: &SramImage) -> Result<(), PatgenError> {
        if self.byte_rotation as usize >= WORD_BYTES {
            return Err(PatgenError::InvalidRange(format!(
                "byte_rotation {} outside 0..=15",
                self.byte_rotation
            )));
        }
        if self.loop_count < 1 {
            return Err(PatgenError::InvalidLoop(self.loop_count));
        }
        if self.frame_count == 0 {
            return Err(PatgenError::InvalidRange("frame_count must be at least 1".into()));
        }
        let end = self.start_frame.checked_add(self.frame_count);
        if end.is_none_or(|e| e > image.frame_count()) {
            return Err(PatgenError::InvalidRange(format!(
                "frames {}..{}+{} exceed the {} frames in the image",
                self.start_frame,
                self.start_frame,
                self.frame_count,
                image.frame_count()
            )));
        }
        Ok(())
    }
}

/// Word as seen by the data path after the rotation stage.
pub fn rotate_word(word: [u8; WORD_BYTES], rotation: u8) -> [u8; WORD_BYTES] {
    let mut out = word;
    out.rotate_left(rotation as usize % WORD_BYTES);
    out
}

/// Controller state machine: reads the frame range `loop_count` times,
/// fetching both words of each frame from its bank and passing them
/// through the byte rotator.
pub fn run_sequencer(image: &SramImage, cfg: &SequencerConfig) -> Result<Vec<PatternFrame>, PatgenError> {
    cfg.validate(image)?;
    let mut frames = Vec::with_capacity(cfg.frame_count * cfg.loop_count as usize);
    for _ in 0..cfg.loop_count {
        for f in cfg.start_frame..cfg.start_frame + cfg.frame_count {
            let bank = f % BANK_COUNT;
            let word = 2 * (f / BANK_COUNT);
            let lo = rotate_word(image.word(bank, word), cfg.byte_rotation);
            let hi = rotate_word(image.word(bank, word + 1), cfg.byte_rotation);
            let mut samples = [0u8; FRAME_SAMPLES];
            samples[..WORD_BYTES].copy_from_slice(&lo);
            samples[WORD_BYTES..].copy_from_slice(&hi);
            frames.push(PatternFrame { samples });
        }
    }
    Ok(frames)
}

/// One full-rate bit stream per DAC segment, in segment order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlaneStreams {
    pub streams: [Vec<bool>; SEGMENT_COUNT],
}

impl BitPlaneStreams {
    pub fn len(&self) -> usize {
        self.streams[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams[0].is_empty()
    }

    pub fn enables_at(&self, n: usize) -> SegmentEnables {
        let mut bits = [false; SEGMENT_COUNT];
        for (b, s) in bits.iter_mut().zip(&self.streams) {
            *b = s[n];
        }
        SegmentEnables(bits)
    }

    /// Recovers the code of every full-rate sample from the segment
    /// enables. `None` marks an enable pattern the encoder cannot produce.
    pub fn decode(&self) -> Vec<Option<u8>> {
        (0..self.len()).map(|n| self.enables_at(n).decode()).collect()
    }
}

/// Models the nine 32:4 serializers followed by the per-segment 4:1 muxes.
///
/// Each C32 cycle a serializer latches one frame's 32 bits for its segment
/// and shifts them out as eight 4-bit quarter-rate words; the 4:1 mux then
/// emits the word's bits on the four C4 phases in order.
pub fn serialize(frames: &[PatternFrame]) -> BitPlaneStreams {
    let n = frames.len() * FRAME_SAMPLES;
    let mut streams: [Vec<bool>; SEGMENT_COUNT] = std::array::from_fn(|_| Vec::with_capacity(n));
    for frame in frames {
        // 32-bit parallel load per segment: bit i = segment enable of sample i
        let mut latched = [0u32; SEGMENT_COUNT];
        for (i, &code) in frame.samples.iter().enumerate() {
            let en = thermometer_encode(code);
            for (seg, word) in latched.iter_mut().enumerate() {
                if en.0[seg] {
                    *word |= 1 << i;
                }
            }
        }
        for (seg, word) in latched.iter().enumerate() {
            for quarter in 0..FRAME_SAMPLES / MUX_WIDTH {
                let nibble = (word >> (quarter * MUX_WIDTH)) & 0xF;
                for phase in 0..MUX_WIDTH {
                    streams[seg].push(nibble & (1 << phase) != 0);
                }
            }
        }
    }
    BitPlaneStreams { streams }
}
