//! Neighbourhood moves over positions and the EV adjacency rules.

use crate::evaluator::Sequence;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MoveKind {
    Swap,
    /// The vehicle at `t1` moves to `t2`; the block in between shifts left.
    InsertForward,
    /// The vehicle at `t2` moves to `t1`; the block in between shifts right.
    InsertBackward,
    /// Reverses positions `t1..=t2`.
    Inversion,
}

impl MoveKind {
    pub const ALL: [MoveKind; 4] = [
        MoveKind::Swap,
        MoveKind::InsertForward,
        MoveKind::InsertBackward,
        MoveKind::Inversion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Swap => "swap",
            MoveKind::InsertForward => "insert_forward",
            MoveKind::InsertBackward => "insert_backward",
            MoveKind::Inversion => "inversion",
        }
    }
}

impl fmt::Display for MoveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A move on zero-based positions `t1 < t2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Move {
    pub kind: MoveKind,
    pub t1: usize,
    pub t2: usize,
}

impl Move {
    /// # Panics
    /// If `t1 >= t2`.
    pub fn new(kind: MoveKind, t1: usize, t2: usize) -> Self {
        assert!(t1 < t2, "move positions must satisfy t1 < t2, got {t1} and {t2}");
        Move { kind, t1, t2 }
    }

    /// Position, before the move, of the vehicle that ends up at `t`.
    pub fn source(&self, t: usize) -> usize {
        let (t1, t2) = (self.t1, self.t2);
        if t < t1 || t > t2 {
            return t;
        }
        match self.kind {
            MoveKind::Swap if t == t1 => t2,
            MoveKind::Swap if t == t2 => t1,
            MoveKind::Swap => t,
            MoveKind::InsertForward if t == t2 => t1,
            MoveKind::InsertForward => t + 1,
            MoveKind::InsertBackward if t == t1 => t2,
            MoveKind::InsertBackward => t - 1,
            MoveKind::Inversion => t1 + t2 - t,
        }
    }

    /// Positions whose vehicle may change, ascending.
    pub fn touched(&self) -> Vec<usize> {
        match self.kind {
            MoveKind::Swap => vec![self.t1, self.t2],
            _ => (self.t1..=self.t2).collect(),
        }
    }

    pub fn apply_in_place(&self, order: &mut [usize]) {
        let span = &mut order[self.t1..=self.t2];
        match self.kind {
            MoveKind::Swap => span.swap(0, span.len() - 1),
            MoveKind::InsertForward => span.rotate_left(1),
            MoveKind::InsertBackward => span.rotate_right(1),
            MoveKind::Inversion => span.reverse(),
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.kind, self.t1, self.t2)
    }
}

pub fn apply(sequence: &Sequence, mv: Move) -> Sequence {
    let mut order = sequence.order().to_vec();
    mv.apply_in_place(&mut order);
    Sequence::from_permutation_unchecked(order)
}

/// Whether the move is forbidden by the EV adjacency rules.
///
/// `is_ev` is indexed by vehicle id. Positions outside the sequence count as
/// non-EV. Applied to a sequence without adjacent EVs, a move that is not tabu
/// never creates adjacent EVs.
pub fn is_tabu(is_ev: &[bool], sequence: &Sequence, mv: Move) -> bool {
    let order = sequence.order();
    let ev = |t: Option<usize>| t.and_then(|t| order.get(t)).is_some_and(|&v| is_ev[v]);
    let (t1, t2) = (mv.t1, mv.t2);
    let before = |t: usize| t.checked_sub(1);
    let after = |t: usize| Some(t + 1);
    match mv.kind {
        MoveKind::Swap => {
            if ev(Some(t1)) {
                ev(before(t2)) || ev(after(t2))
            } else {
                ev(Some(t2)) && (ev(before(t1)) || ev(after(t1)))
            }
        }
        MoveKind::InsertForward => {
            if ev(Some(t1)) {
                ev(Some(t2)) || ev(after(t2))
            } else {
                ev(before(t1)) && ev(after(t1))
            }
        }
        MoveKind::InsertBackward => {
            if ev(Some(t2)) {
                ev(Some(t1)) || ev(before(t1))
            } else {
                ev(before(t2)) && ev(after(t2))
            }
        }
        MoveKind::Inversion => {
            if ev(Some(t1)) {
                ev(after(t2))
            } else {
                ev(before(t1)) && ev(Some(t2))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn letters(s: &str) -> Sequence {
        Sequence::from_permutation_unchecked(s.bytes().map(|b| (b - b'a') as usize).collect())
    }

    fn as_letters(s: &Sequence) -> String {
        s.order().iter().map(|&v| (b'a' + v as u8) as char).collect()
    }

    #[test]
    fn apply_examples() {
        let s = letters("abcdef");
        // positions 2 and 5 in one-based terms
        assert_eq!(as_letters(&apply(&s, Move::new(MoveKind::InsertForward, 1, 4))), "acdebf");
        assert_eq!(as_letters(&apply(&s, Move::new(MoveKind::InsertBackward, 1, 4))), "aebcdf");
        assert_eq!(as_letters(&apply(&s, Move::new(MoveKind::Inversion, 0, 5))), "fedcba");
        let sw = Move::new(MoveKind::Swap, 1, 4);
        assert_eq!(as_letters(&apply(&s, sw)), "aecdbf");
        assert_eq!(apply(&apply(&s, sw), sw), s);
    }

    #[test]
    fn source_matches_apply() {
        let s = letters("abcdefgh");
        for kind in MoveKind::ALL {
            for t1 in 0..8 {
                for t2 in t1 + 1..8 {
                    let mv = Move::new(kind, t1, t2);
                    let moved = apply(&s, mv);
                    for t in 0..8 {
                        assert_eq!(moved.order()[t], s.order()[mv.source(t)], "{mv} at {t}");
                    }
                    let untouched: Vec<usize> = (0..8).filter(|t| !mv.touched().contains(t)).collect();
                    assert!(untouched.iter().all(|&t| mv.source(t) == t));
                }
            }
        }
    }

    #[test]
    fn all_non_ev_never_tabu() {
        let s = letters("abcdef");
        let ev = [false; 6];
        for kind in MoveKind::ALL {
            for t1 in 0..6 {
                for t2 in t1 + 1..6 {
                    assert!(!is_tabu(&ev, &s, Move::new(kind, t1, t2)));
                }
            }
        }
    }

    #[test]
    fn rule_examples() {
        // [EV, n, n, EV, n]: putting the first EV at position 2 (zero-based)
        // would make it adjacent to the EV at 3
        let s = letters("abcde");
        let ev = [true, false, false, true, false];
        assert!(is_tabu(&ev, &s, Move::new(MoveKind::Swap, 0, 2)));
        assert!(!is_tabu(&ev, &s, Move::new(MoveKind::Swap, 1, 2)));
        // inversion: non-EV at t1, EV at t2, EV at t1-1
        let s = letters("abcdef");
        let ev = [true, false, false, true, false, false];
        assert!(is_tabu(&ev, &s, Move::new(MoveKind::Inversion, 1, 3)));
    }

    fn adjacent(ev: &[bool], order: &[usize]) -> bool {
        order.windows(2).any(|w| ev[w[0]] && ev[w[1]])
    }

    #[test]
    fn rules_are_sound_exhaustively() {
        for n in 2..=8usize {
            let identity: Vec<usize> = (0..n).collect();
            for mask in 0u32..1 << n {
                let ev: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                if adjacent(&ev, &identity) {
                    continue;
                }
                let s = Sequence::from_permutation_unchecked(identity.clone());
                for kind in MoveKind::ALL {
                    for t1 in 0..n {
                        for t2 in t1 + 1..n {
                            let mv = Move::new(kind, t1, t2);
                            if !is_tabu(&ev, &s, mv) {
                                let moved = apply(&s, mv);
                                assert!(!adjacent(&ev, moved.order()), "n={n} mask={mask:b} {mv}");
                            }
                        }
                    }
                }
            }
        }
    }
}
