//! Process-wide cache of forward/inverse FFT plans keyed by length.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use rustfft::{Fft, FftPlanner};

type Plan = Arc<dyn Fft<f64>>;

#[derive(Default)]
struct Plans {
    forward: HashMap<usize, Plan>,
    inverse: HashMap<usize, Plan>,
}

fn cache() -> &'static RwLock<Plans> {
    static CACHE: OnceLock<RwLock<Plans>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

pub(crate) fn forward(len: usize) -> Plan {
    plan(len, false)
}

pub(crate) fn inverse(len: usize) -> Plan {
    plan(len, true)
}

fn plan(len: usize, inverse: bool) -> Plan {
    {
        let plans = cache().read().expect("fft cache poisoned");
        let map = if inverse { &plans.inverse } else { &plans.forward };
        if let Some(p) = map.get(&len) {
            return Arc::clone(p);
        }
    }
    let mut plans = cache().write().expect("fft cache poisoned");
    let map = if inverse {
        &mut plans.inverse
    } else {
        &mut plans.forward
    };
    Arc::clone(map.entry(len).or_insert_with(|| {
        let mut planner = FftPlanner::new();
        if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        }
    }))
}
