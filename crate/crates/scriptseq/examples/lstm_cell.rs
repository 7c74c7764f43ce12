//! Step a single LSTM cell by hand and watch the gates.
//!
//! ```bash
//! cargo run -p scriptseq --example lstm_cell
//! ```

use scriptseq::seqmodel::{lstm_step, LstmParams, LstmState};

fn main() {
    // A 3-unit cell over 2-dimensional inputs, all parameters zero: every
    // gate sits at sigmoid(0) = 0.5 and the candidate at tanh(0) = 0.
    let zero = LstmParams::zeros(2, 3);
    let state = lstm_step(&zero, &[0.7, -0.4], &LstmState::zeros(3));
    println!("zero parameters:    z = {:?}  m = {:?}", state.z, state.m);

    // Pushing the forget bias up saturates the forget gate: the memory
    // survives the step almost untouched.
    let mut sticky = LstmParams::zeros(2, 3);
    for b in &mut sticky.b_f {
        *b = 100.0;
    }
    let prev = LstmState {
        z: vec![0.0; 3],
        m: vec![1.0, -0.5, 2.0],
    };
    let state = lstm_step(&sticky, &[0.3, 0.6], &prev);
    println!("saturated forget:   m = {:?} (was {:?})", state.m, prev.m);

    // With a strongly negative forget bias the memory is wiped instead.
    let mut leaky = LstmParams::zeros(2, 3);
    for b in &mut leaky.b_f {
        *b = -100.0;
    }
    let state = lstm_step(&leaky, &[0.3, 0.6], &prev);
    println!("saturated wipe:     m = {:?}", state.m);

    // Hidden outputs are always o * tanh(m), so |z| < 1 no matter how the
    // parameters are set.
    let mut wild = LstmParams::zeros(2, 3);
    wild.b_g = vec![50.0, -50.0, 50.0];
    wild.b_i = vec![50.0, 50.0, 50.0];
    wild.b_o = vec![50.0, 50.0, 50.0];
    let state = lstm_step(&wild, &[10.0, -10.0], &prev);
    println!("saturated gates:    z = {:?}", state.z);
}
