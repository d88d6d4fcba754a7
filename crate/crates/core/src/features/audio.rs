//! Multichannel amplitude spectrograms plus inter-channel phase differences.
//!
//! A feature window spans 1.27 s (30 480 samples at 24 kHz). Frames are 480
//! samples (20 ms) long with a 240-sample (10 ms) hop; frame `k` is centred on
//! sample `240·k` of the window, and samples falling outside the window are
//! zero. That gives exactly 128 frames. Each frame is tapered with a periodic
//! Hann window and zero-padded to a 512-point FFT, keeping 257 bins.
//!
//! Output planes: 0-3 are the magnitudes of channels 0-3 (no scaling);
//! 4-6 are the phase of `X_m · conj(X_0)` for `m = 1, 2, 3`, in `(-π, π]`,
//! set to 0 where both bins are below [`SILENCE_MAGNITUDE`].

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};

use crate::array_io::FlatArray;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const SAMPLE_RATE_HZ: u32 = 24_000;
pub const INPUT_CHANNELS: usize = 4;
pub const FRAME_LENGTH: usize = 480;
pub const HOP_LENGTH: usize = 240;
pub const FFT_SIZE: usize = 512;
pub const FREQUENCY_BINS: usize = FFT_SIZE / 2 + 1;
pub const FEATURE_FRAMES: usize = 128;
pub const FEATURE_CHANNELS: usize = 7;
/// Samples covered by one feature window (1.27 s).
pub const WINDOW_SAMPLES: usize = (FEATURE_FRAMES - 1) * HOP_LENGTH;
/// Window advance used to tile a clip at inference time.
pub const WINDOW_SHIFT_FRAMES: usize = 120;
pub const SILENCE_MAGNITUDE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip<T> {
    channels: Vec<Vec<T>>,
    sample_rate_hz: u32,
}

impl<T: Scalar> AudioClip<T> {
    pub fn new(channels: Vec<Vec<T>>, sample_rate_hz: u32) -> Result<Self> {
        if channels.len() != INPUT_CHANNELS {
            return Err(Error::ChannelCount {
                expected: INPUT_CHANNELS,
                found: channels.len(),
            });
        }
        if sample_rate_hz != SAMPLE_RATE_HZ {
            return Err(Error::SampleRate {
                expected: SAMPLE_RATE_HZ,
                found: sample_rate_hz,
            });
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::Format("audio channels differ in length".into()));
        }
        Ok(Self {
            channels,
            sample_rate_hz,
        })
    }

    /// Reads a 4-channel 24 kHz WAV file (integer PCM or 32-bit float).
    /// Integer samples are scaled to `[-1, 1)`.
    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = hound::WavReader::open(path)?;
        let spec = reader.spec();
        let channel_count = usize::from(spec.channels);
        if channel_count != INPUT_CHANNELS {
            return Err(Error::ChannelCount {
                expected: INPUT_CHANNELS,
                found: channel_count,
            });
        }
        let interleaved: Vec<f64> = match spec.sample_format {
            hound::SampleFormat::Float => reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()?,
            hound::SampleFormat::Int => {
                let scale = f64::from(1u32 << (spec.bits_per_sample - 1));
                reader
                    .samples::<i32>()
                    .map(|s| s.map(|v| f64::from(v) / scale))
                    .collect::<std::result::Result<_, _>>()?
            }
        };
        let mut channels =
            vec![Vec::with_capacity(interleaved.len() / channel_count); channel_count];
        for frame in interleaved.chunks_exact(channel_count) {
            for (channel, &sample) in channels.iter_mut().zip(frame) {
                channel.push(T::lit(sample));
            }
        }
        Self::new(channels, spec.sample_rate)
    }

    pub fn channel(&self, index: usize) -> &[T] {
        &self.channels[index]
    }

    pub fn sample_count(&self) -> usize {
        self.channels[0].len()
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }
}

/// Feature planes of one window, shape `[7, 257, 128]` (plane, bin, frame).
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFeature<T> {
    values: Vec<T>,
    pub start_sample: usize,
}

impl<T: Scalar> AudioFeature<T> {
    pub fn shape(&self) -> [usize; 3] {
        [FEATURE_CHANNELS, FREQUENCY_BINS, FEATURE_FRAMES]
    }

    pub fn get(&self, plane: usize, bin: usize, frame: usize) -> T {
        self.values[(plane * FREQUENCY_BINS + bin) * FEATURE_FRAMES + frame]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Periodic Hann window of length [`FRAME_LENGTH`].
pub fn hann_window<T: Scalar>() -> Vec<T> {
    let n = T::from_usize_lossy(FRAME_LENGTH);
    (0..FRAME_LENGTH)
        .map(|i| {
            let phase = T::TAU() * T::from_usize_lossy(i) / n;
            T::lit(0.5) - T::lit(0.5) * phase.cos()
        })
        .collect()
}

/// Start samples of consecutive windows shifted by 120 frames, enough of them
/// to reach the last sample. The final window may run past the clip end; see
/// [`FeatureExtractor::extract_tiled`].
pub fn window_starts(sample_count: usize) -> Vec<usize> {
    let shift = WINDOW_SHIFT_FRAMES * HOP_LENGTH;
    if sample_count == 0 {
        return Vec::new();
    }
    let extra = sample_count.saturating_sub(WINDOW_SAMPLES).div_ceil(shift);
    (0..=extra).map(|i| i * shift).collect()
}

/// Reusable extractor holding the FFT plan and taper.
pub struct FeatureExtractor<T: FftNum> {
    fft: Arc<dyn Fft<T>>,
    window: Vec<T>,
}

impl<T: Scalar + FftNum> Default for FeatureExtractor<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar + FftNum> FeatureExtractor<T> {
    pub fn new() -> Self {
        let fft = FftPlanner::new().plan_fft_forward(FFT_SIZE);
        Self {
            fft,
            window: hann_window(),
        }
    }

    fn spectrum(&self, samples: &[T], start: usize, frame: usize, buffer: &mut [Complex<T>]) {
        let half = FRAME_LENGTH / 2;
        buffer.fill(Complex::new(T::zero(), T::zero()));
        for (i, w) in self.window.iter().enumerate() {
            // Offset inside the window; frames near the edges reach outside it.
            let offset = (frame * HOP_LENGTH + i) as isize - half as isize;
            if offset >= 0 && (offset as usize) < WINDOW_SAMPLES {
                buffer[i] = Complex::new(samples[start + offset as usize] * *w, T::zero());
            }
        }
        self.fft.process(buffer);
    }

    pub fn extract(&self, clip: &AudioClip<T>, start_sample: usize) -> Result<AudioFeature<T>> {
        let needed =
            start_sample
                .checked_add(WINDOW_SAMPLES)
                .ok_or(Error::InsufficientSamples {
                    needed: usize::MAX,
                    available: clip.sample_count(),
                })?;
        if needed > clip.sample_count() {
            return Err(Error::InsufficientSamples {
                needed,
                available: clip.sample_count(),
            });
        }
        let plane = FREQUENCY_BINS * FEATURE_FRAMES;
        let mut values = vec![T::zero(); FEATURE_CHANNELS * plane];
        let silence = T::lit(SILENCE_MAGNITUDE);
        let mut spectra = vec![vec![Complex::new(T::zero(), T::zero()); FFT_SIZE]; INPUT_CHANNELS];
        for frame in 0..FEATURE_FRAMES {
            for (channel, buffer) in spectra.iter_mut().enumerate() {
                self.spectrum(clip.channel(channel), start_sample, frame, buffer);
            }
            for bin in 0..FREQUENCY_BINS {
                let at = bin * FEATURE_FRAMES + frame;
                for (channel, spectrum) in spectra.iter().enumerate() {
                    values[channel * plane + at] = spectrum[bin].norm();
                }
                let reference = spectra[0][bin];
                for m in 1..INPUT_CHANNELS {
                    let other = spectra[m][bin];
                    let ipd = if other.norm() < silence && reference.norm() < silence {
                        T::zero()
                    } else {
                        wrap_phase((other * reference.conj()).arg())
                    };
                    values[(INPUT_CHANNELS + m - 1) * plane + at] = ipd;
                }
            }
        }
        Ok(AudioFeature {
            values,
            start_sample,
        })
    }

    /// Features for every window of [`window_starts`], computed in parallel
    /// and returned in window order. The clip is zero-padded at the end so
    /// the last window is complete.
    pub fn extract_tiled(&self, clip: &AudioClip<T>) -> Result<Vec<AudioFeature<T>>> {
        let starts = window_starts(clip.sample_count());
        let needed = starts.last().map_or(0, |s| s + WINDOW_SAMPLES);
        let padded;
        let clip = if needed > clip.sample_count() {
            let channels = (0..INPUT_CHANNELS)
                .map(|c| {
                    let mut samples = clip.channel(c).to_vec();
                    samples.resize(needed, T::zero());
                    samples
                })
                .collect();
            padded = AudioClip::new(channels, clip.sample_rate_hz())?;
            &padded
        } else {
            clip
        };
        starts
            .into_par_iter()
            .map(|start| self.extract(clip, start))
            .collect()
    }
}

/// Maps an angle from `[-π, π]` onto `(-π, π]`.
fn wrap_phase<T: Scalar>(angle: T) -> T {
    if angle <= -T::PI() {
        angle + T::TAU()
    } else {
        angle
    }
}

pub fn extract_audio_features<T: Scalar + FftNum>(
    clip: &AudioClip<T>,
    start_sample: usize,
) -> Result<AudioFeature<T>> {
    FeatureExtractor::new().extract(clip, start_sample)
}

/// Stacks windows into one `[W, 7, 257, 128]` array at the 100 Hz frame rate.
pub fn features_to_array<T: Scalar>(features: Vec<AudioFeature<T>>) -> FlatArray<T> {
    let count = features.len();
    let data: Vec<T> = features
        .into_iter()
        .flat_map(AudioFeature::into_values)
        .collect();
    FlatArray::new(
        vec![count, FEATURE_CHANNELS, FREQUENCY_BINS, FEATURE_FRAMES],
        f64::from(SAMPLE_RATE_HZ) / HOP_LENGTH as f64,
        data,
    )
    .expect("feature planes have fixed size")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, delay: f64, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| (std::f64::consts::TAU * freq * (n as f64 - delay) / 24_000.0).sin())
            .collect()
    }

    #[test]
    fn constants_line_up() {
        assert_eq!(FREQUENCY_BINS, 257);
        assert_eq!(WINDOW_SAMPLES, 30_480);
        assert_eq!(WINDOW_SAMPLES as f64 / 24_000.0, 1.27);
    }

    #[test]
    fn rejects_bad_clips() {
        assert!(matches!(
            AudioClip::<f64>::new(vec![vec![0.0; 10]; 3], 24_000),
            Err(Error::ChannelCount {
                expected: 4,
                found: 3
            })
        ));
        assert!(matches!(
            AudioClip::<f64>::new(vec![vec![0.0; 10]; 4], 48_000),
            Err(Error::SampleRate { .. })
        ));
        let short = AudioClip::<f64>::new(vec![vec![0.0; WINDOW_SAMPLES - 1]; 4], 24_000).unwrap();
        assert!(matches!(
            extract_audio_features(&short, 0),
            Err(Error::InsufficientSamples { .. })
        ));
        let exact = AudioClip::<f64>::new(vec![vec![0.0; WINDOW_SAMPLES]; 4], 24_000).unwrap();
        assert!(extract_audio_features(&exact, 1).is_err());
        assert!(extract_audio_features(&exact, 0).is_ok());
    }

    #[test]
    fn silence_gives_zero_planes() {
        let clip = AudioClip::<f64>::new(vec![vec![0.0; WINDOW_SAMPLES]; 4], 24_000).unwrap();
        let feature = extract_audio_features(&clip, 0).unwrap();
        assert_eq!(feature.values().len(), 7 * 257 * 128);
        assert!(feature.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hann_taper_is_periodic() {
        let w = hann_window::<f64>();
        assert_eq!(w[0], 0.0);
        assert!((w[FRAME_LENGTH / 2] - 1.0).abs() < 1e-15);
        assert!((w[1] - w[FRAME_LENGTH - 1]).abs() < 1e-15);
    }

    #[test]
    fn window_tiling() {
        assert!(window_starts(0).is_empty());
        assert_eq!(window_starts(100), vec![0]);
        assert_eq!(window_starts(WINDOW_SAMPLES), vec![0]);
        assert_eq!(window_starts(WINDOW_SAMPLES + 1), vec![0, 28_800]);
        let starts = window_starts(24_000 * 60);
        assert_eq!(starts[1], 120 * HOP_LENGTH);
        // Each window ends after the next one starts: no uncovered frames.
        for pair in starts.windows(2) {
            assert!(pair[0] + (FEATURE_FRAMES - 1) * HOP_LENGTH >= pair[1]);
        }
    }

    #[test]
    fn ipd_sign_follows_delay() {
        let bin = 64;
        let freq = bin as f64 * 24_000.0 / FFT_SIZE as f64;
        let len = WINDOW_SAMPLES + 1000;
        let clip = AudioClip::new(
            vec![
                tone(freq, 0.0, len),
                tone(freq, 1.0, len),
                tone(freq, 0.0, len),
                tone(freq, -1.0, len),
            ],
            24_000,
        )
        .unwrap();
        let feature = extract_audio_features(&clip, 500).unwrap();
        let expected = -std::f64::consts::TAU * freq / 24_000.0;
        assert!((feature.get(4, bin, 60) - expected).abs() < 1e-3);
        assert!(feature.get(5, bin, 60).abs() < 1e-3);
        assert!((feature.get(6, bin, 60) + expected).abs() < 1e-3);
    }

    #[test]
    fn single_precision_matches_double() {
        let len = WINDOW_SAMPLES;
        let channels: Vec<Vec<f64>> = (0..4)
            .map(|c| tone(1000.0 + 100.0 * c as f64, 0.0, len))
            .collect();
        let wide =
            extract_audio_features(&AudioClip::new(channels.clone(), 24_000).unwrap(), 0).unwrap();
        let narrow_channels: Vec<Vec<f32>> = channels
            .iter()
            .map(|c| c.iter().map(|&v| v as f32).collect())
            .collect();
        let narrow =
            extract_audio_features(&AudioClip::new(narrow_channels, 24_000).unwrap(), 0).unwrap();
        for bin in [10, 43, 200] {
            let (a, b) = (wide.get(0, bin, 64), f64::from(narrow.get(0, bin, 64)));
            assert!((a - b).abs() <= 1e-3 * a.abs().max(1.0));
        }
    }

    #[test]
    fn tiled_extraction_is_order_stable() {
        let len = 24_000 * 3;
        let channels: Vec<Vec<f64>> = (0..4)
            .map(|c| tone(300.0 * (c + 1) as f64, 0.0, len))
            .collect();
        let clip = AudioClip::new(channels, 24_000).unwrap();
        let extractor = FeatureExtractor::new();
        let tiled = extractor.extract_tiled(&clip).unwrap();
        assert_eq!(tiled.len(), 3);
        for feature in tiled
            .iter()
            .filter(|f| f.start_sample + WINDOW_SAMPLES <= len)
        {
            assert_eq!(
                feature,
                &extractor.extract(&clip, feature.start_sample).unwrap()
            );
        }
        // the last window runs past the end and sees zeros there
        assert_eq!(tiled[2].start_sample, 57_600);
        assert_eq!(tiled[2].get(0, 13, 127), 0.0);
        let array = features_to_array(tiled);
        assert_eq!(array.shape, vec![3, 7, 257, 128]);
        assert_eq!(array.frame_rate_hz, 100.0);
    }
}
