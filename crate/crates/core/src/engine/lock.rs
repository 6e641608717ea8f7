//! Lock state machine.

use serde::{Deserialize, Serialize};

use crate::topology::LockSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LockPhase {
    LowOpen,
    Raising,
    HighOpen,
    Lowering,
}

impl LockPhase {
    pub fn code(self) -> u8 {
        match self {
            LockPhase::LowOpen => 0,
            LockPhase::Raising => 1,
            LockPhase::HighOpen => 2,
            LockPhase::Lowering => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<LockPhase> {
        Some(match code {
            0 => LockPhase::LowOpen,
            1 => LockPhase::Raising,
            2 => LockPhase::HighOpen,
            3 => LockPhase::Lowering,
            _ => return None,
        })
    }

    pub fn in_transit(self) -> bool {
        matches!(self, LockPhase::Raising | LockPhase::Lowering)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LockRuntime {
    pub phase: LockPhase,
    /// Ticks left in a transit phase; zero while open.
    pub timer: u32,
    /// An Operate waiting for the next open phase.
    pub latched: bool,
}

impl Default for LockRuntime {
    fn default() -> Self {
        LockRuntime { phase: LockPhase::LowOpen, timer: 0, latched: false }
    }
}

/// Start-of-tick traffic around a lock, read from the chamber and its gates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LockDemand {
    /// Boats in the chamber heading out through the low gate.
    pub inside_low: bool,
    /// Boats in the chamber heading out through the high gate.
    pub inside_high: bool,
    /// A boat on the low gate cell routed into the chamber.
    pub waiting_low: bool,
    /// A boat on the high gate cell routed into the chamber.
    pub waiting_high: bool,
}

impl LockDemand {
    /// Whether an auto-cycling lock should operate from `phase`. Occupants
    /// heading for the far side are carried unless someone still has to get
    /// off on the near side; an empty lock crosses over only to fetch a boat
    /// when nobody waits on the near side.
    fn wants_operate(&self, phase: LockPhase) -> bool {
        let (inside_near, inside_far, wait_near, wait_far) = match phase {
            LockPhase::LowOpen => (self.inside_low, self.inside_high, self.waiting_low, self.waiting_high),
            LockPhase::HighOpen => (self.inside_high, self.inside_low, self.waiting_high, self.waiting_low),
            _ => return false,
        };
        if inside_near || inside_far {
            inside_far && !inside_near
        } else {
            wait_far && !wait_near
        }
    }
}

/// One tick of the lock state machine.
pub fn advance_lock(spec: &LockSpec, state: LockRuntime, demand: LockDemand) -> LockRuntime {
    let mut s = state;
    if spec.auto_cycle && !s.latched && demand.wants_operate(s.phase) {
        s.latched = true;
    }
    match s.phase {
        LockPhase::LowOpen if s.latched => LockRuntime {
            phase: LockPhase::Raising,
            timer: spec.raise_ticks,
            latched: false,
        },
        LockPhase::HighOpen if s.latched => LockRuntime {
            phase: LockPhase::Lowering,
            timer: spec.lower_ticks,
            latched: false,
        },
        LockPhase::Raising | LockPhase::Lowering => {
            s.timer -= 1;
            if s.timer == 0 {
                s.phase = if s.phase == LockPhase::Raising {
                    LockPhase::HighOpen
                } else {
                    LockPhase::LowOpen
                };
            }
            s
        }
        _ => s,
    }
}
