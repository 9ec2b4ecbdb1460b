//! Eight-state recursive systematic convolutional code with feedback
//! polynomial 13 and feedforward polynomial 15 (octal).

pub const MEMORY: usize = 3;
pub const STATES: usize = 1 << MEMORY;

/// State bits are (s1, s2, s3) packed as s1 | s2 << 1 | s3 << 2, s1 newest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Step {
    pub next: usize,
    pub parity: u8,
}

fn bits(s: usize) -> (u8, u8, u8) {
    ((s & 1) as u8, ((s >> 1) & 1) as u8, ((s >> 2) & 1) as u8)
}

/// Transition for input bit `u` from state `s`.
pub fn step(s: usize, u: u8) -> Step {
    let (s1, s2, s3) = bits(s);
    let a = u ^ s2 ^ s3; // feedback 1 + D^2 + D^3
    let parity = a ^ s1 ^ s3; // feedforward 1 + D + D^3
    Step {
        next: (a as usize) | ((s1 as usize) << 1) | ((s2 as usize) << 2),
        parity,
    }
}

/// Input bit that drives the register toward zero (feedback cancelled).
pub fn tail_input(s: usize) -> u8 {
    let (_, s2, s3) = bits(s);
    s2 ^ s3
}

/// Full transition table indexed by [state][input].
pub fn table() -> [[Step; 2]; STATES] {
    let mut t = [[Step { next: 0, parity: 0 }; 2]; STATES];
    for (s, row) in t.iter_mut().enumerate() {
        row[0] = step(s, 0);
        row[1] = step(s, 1);
    }
    t
}

/// Encodes `input` from the zero state, returning parity bits and the final state.
pub fn encode(input: &[u8]) -> (Vec<u8>, usize) {
    let mut s = 0;
    let parity = input
        .iter()
        .map(|&u| {
            let st = step(s, u);
            s = st.next;
            st.parity
        })
        .collect();
    (parity, s)
}

/// Three termination steps from state `s`: (systematic, parity) pairs.
pub fn terminate(mut s: usize) -> [(u8, u8); MEMORY] {
    let mut out = [(0, 0); MEMORY];
    for o in out.iter_mut() {
        let u = tail_input(s);
        let st = step(s, u);
        *o = (u, st.parity);
        s = st.next;
    }
    debug_assert_eq!(s, 0);
    out
}
