use super::{DspError, Sos};
use crate::signal::SignalChunk;

/// Per-channel Direct Form II transposed state for one [`Sos`] cascade.
#[derive(Debug, Clone)]
pub struct FilterState {
    sos: Sos,
    state: Vec<Vec<[f64; 2]>>,
}

impl FilterState {
    pub fn new(sos: Sos, channels: usize) -> Self {
        let state = vec![vec![[0.0; 2]; sos.sections.len()]; channels];
        FilterState { sos, state }
    }

    pub fn sos(&self) -> &Sos {
        &self.sos
    }

    pub fn channels(&self) -> usize {
        self.state.len()
    }

    pub fn reset(&mut self) {
        for ch in &mut self.state {
            ch.fill([0.0; 2]);
        }
    }

    pub fn reset_channel(&mut self, ch: usize) {
        self.state[ch].fill([0.0; 2]);
    }

    #[inline]
    pub fn process_sample(&mut self, ch: usize, x: f64) -> f64 {
        let mut y = x;
        for (s, z) in self.sos.sections.iter().zip(self.state[ch].iter_mut()) {
            let x = y;
            y = s.b[0] * x + z[0];
            z[0] = s.b[1] * x - s.a[1] * y + z[1];
            z[1] = s.b[2] * x - s.a[2] * y;
        }
        y
    }

    pub fn process_channel(&mut self, ch: usize, samples: &mut [f64]) {
        for v in samples {
            *v = self.process_sample(ch, *v);
        }
    }

    fn check(&self, chunk: &SignalChunk) -> Result<(), DspError> {
        if chunk.n_channels() != self.channels() {
            return Err(DspError::Shape {
                expected: self.channels(),
                got: chunk.n_channels(),
            });
        }
        if chunk.fs != self.sos.fs() {
            return Err(DspError::SampleRate {
                expected: self.sos.fs(),
                got: chunk.fs,
            });
        }
        Ok(())
    }

    /// Filter a chunk in place; state carries over to the next call.
    pub fn process_in_place(&mut self, chunk: &mut SignalChunk) -> Result<(), DspError> {
        self.check(chunk)?;
        for (ch, data) in chunk.data.iter_mut().enumerate() {
            self.process_channel(ch, data);
        }
        Ok(())
    }
}

pub fn filter_process(
    state: &mut FilterState,
    chunk: &SignalChunk,
) -> Result<SignalChunk, DspError> {
    let mut out = chunk.clone();
    state.process_in_place(&mut out)?;
    Ok(out)
}

/// Filter one sequence from rest.
pub fn filter_signal(sos: &Sos, x: &[f64]) -> Vec<f64> {
    let mut st = FilterState::new(sos.clone(), 1);
    let mut y = x.to_vec();
    st.process_channel(0, &mut y);
    y
}
