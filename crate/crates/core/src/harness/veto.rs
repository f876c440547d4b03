//! Executable check of the density-veto construction.

use rand::Rng as _;

use crate::error::Result;
use crate::rng::rng_from_seed;
use crate::selectors::{verify_density_veto, VetoReport};

pub const DEFAULT_TUPLE: (f64, f64, f64, f64) = (0.05, 0.9, 0.3, 0.4);
pub const RANDOM_TUPLES: usize = 1000;

#[derive(Debug, Clone)]
pub struct VetoDemo {
    pub lines: Vec<String>,
    pub random_checked: usize,
    pub failures: usize,
}

impl VetoDemo {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn describe(r: &VetoReport) -> String {
    let pref = if r.igs_prefers_distractor {
        "iGS prefers distractor"
    } else {
        "iGS prefers target"
    };
    format!(
        "(d*={}, u*={}, d'={}, u'={}): {pref} ({:.4} vs {:.4}); additive window (0, {:.3})",
        r.d_star,
        r.u_star,
        r.d_prime,
        r.u_prime,
        r.igs_target,
        r.igs_distractor,
        r.additive_weight_window.1
    )
}

/// Whether a report is internally consistent: non-empty window, correct multiplicative
/// preference, and the additive score ranking the target first inside the window.
fn consistent(r: &VetoReport) -> bool {
    let mid = r.additive_weight_window.1 / 2.0;
    !r.window_is_empty()
        && r.igs_prefers_distractor == (r.d_star * r.u_star < r.d_prime * r.u_prime)
        && r.additive_prefers_target(mid)
}

/// Checks `tuple` (the documented example by default) and a fixed set of random valid tuples.
pub fn veto_demo(tuple: Option<(f64, f64, f64, f64)>, seed: u64) -> Result<VetoDemo> {
    let (a, b, c, d) = tuple.unwrap_or(DEFAULT_TUPLE);
    let main = verify_density_veto(a, b, c, d)?;
    let mut failures = usize::from(!consistent(&main));
    let mut lines = vec![describe(&main)];
    if !main.igs_prefers_distractor {
        lines.push(
            "multiplicative score already prefers the target; the veto precondition does not hold"
                .into(),
        );
    }
    let mut rng = rng_from_seed(seed);
    let mut checked = 0;
    let mut flips = 0;
    while checked < RANDOM_TUPLES {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        let (d_star, d_prime) = (x.min(y), x.max(y));
        let (u_prime, u_star) = (u.min(v), u.max(v));
        if d_star == d_prime || u_star == u_prime {
            continue;
        }
        let r = verify_density_veto(d_star, u_star, d_prime, u_prime)?;
        checked += 1;
        flips += usize::from(r.igs_prefers_distractor);
        if !consistent(&r) {
            failures += 1;
            lines.push(format!("FAILED {}", describe(&r)));
        }
    }
    lines.push(format!(
        "{checked} random tuples: {flips} with iGS preferring the distractor, {failures} failures"
    ));
    Ok(VetoDemo {
        lines,
        random_checked: checked,
        failures,
    })
}
